fn main() {
    std::process::exit(linctl::cli::run(std::env::args_os()));
}
