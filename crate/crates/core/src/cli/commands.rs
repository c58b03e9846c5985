use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use super::io::{
    complex_json, matrix_from_rows, matrix_json, parse_list, parse_roots, parse_vector, to_json_string, vector_json,
    CliConfig, SystemFile,
};
use super::{error_json, AnalyzeArgs, Command, Outcome, PlaceArgs};
use crate::lqr::{are_solve, lqr_trajectory, riccati_finite, LqrProblem};
use crate::lti::{simulate, uniform_grid, ControlSignal, LtiSystem};
use crate::nonlinear::{steer_nonlinear, ReferenceTrajectory, VectorField};
use crate::numkernel::{eigenvalues, Matrix, ToleranceConfig, Vector};
use crate::observability::observability_test;
use crate::reachability::{controllability_gramian, hautus_test, kalman_test, min_energy_control};
use crate::stability::assess;
use crate::synthesis::{design_observer, gramian_stabilizer, pole_place, MonicPolynomial};
use crate::{ControlError, Result};

pub(crate) fn dispatch(command: &Command, config: &CliConfig) -> Outcome {
    let cfg = &config.tolerances;
    let mut inputs = Map::new();
    inputs.insert("config".into(), serde_json::to_value(cfg).expect("tolerances serialize"));
    let mut out = Outcome::new(inputs);
    let result = match command {
        Command::Analyze(args) => analyze(args, cfg, &mut out),
        Command::Gramian(args) => load(&args.system, &mut out).and_then(|sys| {
            out.inputs.insert("t0".into(), json!(args.t0));
            out.inputs.insert("t1".into(), json!(args.t1));
            let g = controllability_gramian(&sys, args.t0, args.t1, cfg)?;
            out.verdicts.insert("invertible".into(), json!(g.invertible));
            out.results = json!({
                "gramian": matrix_json(&g.gramian),
                "min_eigenvalue": g.min_eigenvalue,
                "invertible": g.invertible,
                "interval": [g.interval.0, g.interval.1],
            });
            Ok(())
        }),
        Command::Steer(args) => load(&args.system, &mut out).and_then(|sys| {
            let x0 = parse_vector(&args.x0, "x0")?;
            let x1 = parse_vector(&args.x1, "x1")?;
            out.inputs.insert("t0".into(), json!(args.t0));
            out.inputs.insert("t1".into(), json!(args.t1));
            out.inputs.insert("x0".into(), vector_json(&x0));
            out.inputs.insert("x1".into(), vector_json(&x1));
            let mec = min_energy_control(&sys, args.t0, args.t1, &x0, &x1, cfg)?;
            let traj = simulate(&sys, &x0, &mec.control, &mec.grid, cfg)?;
            let endpoint_error = (traj.final_state() - &x1).norm();
            out.results = json!({
                "predicted_cost": mec.predicted_cost,
                "multiplier": vector_json(&mec.multiplier),
                "gramian_min_eigenvalue": mec.gramian.min_eigenvalue,
                "final_state": vector_json(traj.final_state()),
                "endpoint_error": endpoint_error,
            });
            out.verdicts.insert("endpoint_error".into(), json!(endpoint_error));
            out.csv = Some(traj.to_csv());
            attach_report("steer", &args.report, &mut out);
            Ok(())
        }),
        Command::Place(args) => load(&args.system, &mut out).and_then(|sys| {
            let target = target_polynomial(args, sys.n(), &mut out)?;
            let g = pole_place(sys.a(), sys.b(), &target, cfg)?;
            out.results = json!({
                "F": matrix_json(&g.f),
                "achieved_spectrum": complex_json(&g.achieved_spectrum.sorted().0),
                "residual": g.residual,
            });
            out.verdicts.insert("residual".into(), json!(g.residual));
            Ok(())
        }),
        Command::Observer(args) => load(&args.system, &mut out).and_then(|sys| {
            let target = target_polynomial(args, sys.n(), &mut out)?;
            let g = design_observer(sys.a(), sys.c(), &target, cfg)?;
            let spectrum = eigenvalues(&(sys.a() + &g.l * sys.c()))?;
            out.results = json!({
                "L": matrix_json(&g.l),
                "closed_loop_abscissa": g.closed_loop_abscissa,
                "achieved_spectrum": complex_json(&spectrum.sorted().0),
            });
            out.verdicts.insert("closed_loop_abscissa".into(), json!(g.closed_loop_abscissa));
            Ok(())
        }),
        Command::Lqr(args) => load(&args.system, &mut out).and_then(|sys| {
            let n = sys.n();
            let p0 = match &args.p0 {
                Some(text) => {
                    let rows: Vec<Vec<f64>> = serde_json::from_str(text)
                        .map_err(|e| ControlError::InvalidInput(format!("p0: {e}")))?;
                    matrix_from_rows(&rows, "P0", Some(n))?
                }
                None => Matrix::zeros(n, n),
            };
            let x0 = match &args.x0 {
                Some(text) => parse_vector(text, "x0")?,
                None => Vector::zeros(n),
            };
            out.inputs.insert("horizon".into(), json!(args.horizon));
            out.inputs.insert("P0".into(), matrix_json(&p0));
            out.inputs.insert("x0".into(), vector_json(&x0));
            let prob = LqrProblem::new(sys, p0, args.horizon)?;
            let sol = riccati_finite(&prob, cfg)?;
            let run = lqr_trajectory(&prob, &sol, &x0)?;
            out.results = json!({
                "P_initial": matrix_json(sol.initial()),
                "K_initial": matrix_json(&(-prob.sys.b().transpose() * sol.initial())),
                "max_residual": sol.max_residual,
                "terminal_matches_P0": sol.terminal_matches_p0,
                "samples": sol.grid.len(),
                "cost": run.cost,
                "final_state": vector_json(run.trajectory.final_state()),
            });
            out.verdicts.insert("max_residual".into(), json!(sol.max_residual));
            if let Some(path) = &args.csv {
                out.extra.push((path.clone(), run.trajectory.to_csv()));
            }
            Ok(())
        }),
        Command::Are(args) => load(&args.system, &mut out).and_then(|sys| {
            let sol = are_solve(&sys, cfg)?;
            out.results = json!({
                "P": matrix_json(&sol.p),
                "K": matrix_json(&sol.gain(sys.b())),
                "residual": sol.residual,
                "closed_loop_abscissa": sol.closed_loop_abscissa,
                "horizon_used": sol.horizon_used,
                "terminal_weight": matrix_json(&sol.terminal_weight),
            });
            out.verdicts.insert("finite_cost".into(), json!(true));
            out.verdicts.insert("closed_loop_abscissa".into(), json!(sol.closed_loop_abscissa));
            Ok(())
        }),
        Command::GramianStab(args) => load(&args.system, &mut out).and_then(|sys| {
            out.inputs.insert("lambda".into(), json!(args.lambda));
            let g = gramian_stabilizer(sys.a(), sys.b(), args.lambda, cfg)?;
            out.results = json!({
                "lambda": g.lambda,
                "Q": matrix_json(&g.q),
                "P": matrix_json(&g.p),
                "K": matrix_json(&g.k),
                "riccati_residual": g.riccati_residual,
                "closed_loop_abscissa": g.closed_loop_abscissa,
            });
            out.verdicts.insert("closed_loop_abscissa".into(), json!(g.closed_loop_abscissa));
            Ok(())
        }),
        Command::Simulate(args) => load(&args.system, &mut out).and_then(|sys| {
            let x0 = parse_vector(&args.x0, "x0")?;
            let u = match &args.u {
                Some(text) => parse_vector(text, "u")?,
                None => Vector::zeros(sys.p()),
            };
            if args.samples == 0 {
                return Err(ControlError::InvalidInput("samples must be at least 1".into()));
            }
            out.inputs.insert("t0".into(), json!(args.t0));
            out.inputs.insert("t1".into(), json!(args.t1));
            out.inputs.insert("x0".into(), vector_json(&x0));
            out.inputs.insert("u".into(), vector_json(&u));
            out.inputs.insert("samples".into(), json!(args.samples));
            if !(args.t0 < args.t1) {
                return Err(ControlError::InvalidInput(format!("need t0 < t1, got [{}, {}]", args.t0, args.t1)));
            }
            let control = ControlSignal::constant(args.t0, args.t1, u);
            let traj = simulate(&sys, &x0, &control, &uniform_grid(args.t0, args.t1, args.samples), cfg)?;
            out.results = json!({ "final_state": vector_json(traj.final_state()) });
            out.csv = Some(traj.to_csv());
            Ok(())
        }),
        Command::SteerNl(args) => steer_nl(args, config, &mut out),
    };
    if let Err(e) = result {
        out.errors.push(e);
    }
    out
}

fn load(path: &Path, out: &mut Outcome) -> Result<LtiSystem> {
    out.inputs.insert("system".into(), json!(path.display().to_string()));
    let file = SystemFile::load(path)?;
    out.inputs.insert("name".into(), json!(file.name));
    file.system()
}

fn attach_report(command: &str, path: &Option<PathBuf>, out: &mut Outcome) {
    if let Some(path) = path {
        let doc = json!({
            "command": command,
            "inputs": Value::Object(out.inputs.clone()),
            "results": out.results,
            "errors": out.errors.iter().map(error_json).collect::<Vec<_>>(),
        });
        out.extra.push((path.clone(), to_json_string(&doc)));
    }
}

fn target_polynomial(args: &PlaceArgs, n: usize, out: &mut Outcome) -> Result<MonicPolynomial> {
    let target = match (&args.poly, &args.roots) {
        (Some(poly), _) => MonicPolynomial::from_alphas(parse_list(poly, "poly")?)?,
        (None, Some(roots)) => MonicPolynomial::from_roots(&parse_roots(roots)?)?,
        (None, None) => return Err(ControlError::InvalidInput("either --poly or --roots is required".into())),
    };
    if target.degree() != n {
        return Err(ControlError::Dimension(format!("target has degree {}, system order is {n}", target.degree())));
    }
    out.inputs.insert("target_alphas".into(), json!(target.alphas()));
    Ok(target)
}

fn analyze_file(path: &Path, horizon: f64, cfg: &ToleranceConfig) -> Result<Value> {
    let file = SystemFile::load(path)?;
    let sys = file.system()?;
    let kalman = kalman_test(&sys, cfg);
    let hautus = hautus_test(&sys, cfg)?;
    let obs = observability_test(sys.a(), sys.c(), horizon, cfg)?;
    let stab = assess(sys.a())?;
    let spectrum = eigenvalues(sys.a())?.sorted();
    Ok(json!({
        "name": file.name,
        "n": sys.n(),
        "p": sys.p(),
        "m": sys.m(),
        "controllable": kalman.controllable,
        "kalman_rank": kalman.rank,
        "hautus_pass": hautus.pass,
        "hautus": hautus.records.iter().map(|r| json!({
            "lambda": [r.lambda.re, r.lambda.im],
            "rank": r.rank,
            "pass": r.pass,
        })).collect::<Vec<_>>(),
        "observable": obs.observable,
        "observability_rank": obs.rank,
        "observability_gramian_min_eigenvalue": obs.gramian.min_eigenvalue,
        "eigenvalues": complex_json(&spectrum.0),
        "spectral_abscissa": stab.omega,
        "stable": stab.stable,
        "marginal": stab.marginal,
    }))
}

fn analyze(args: &AnalyzeArgs, cfg: &ToleranceConfig, out: &mut Outcome) -> Result<()> {
    out.inputs.insert("horizon".into(), json!(args.horizon));
    if let Some(path) = &args.system {
        out.inputs.insert("system".into(), json!(path.display().to_string()));
        let report = analyze_file(path, args.horizon, cfg)?;
        for key in ["controllable", "observable", "stable"] {
            out.verdicts.insert(key.into(), report[key].clone());
        }
        out.results = report;
        return Ok(());
    }
    let dir = args.dir.as_ref().expect("clap requires a system or --dir");
    out.inputs.insert("dir".into(), json!(dir.display().to_string()));
    let entries = fs::read_dir(dir)
        .map_err(|e| ControlError::InvalidInput(format!("cannot list {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let reports: Vec<Result<Value>> = std::thread::scope(|scope| {
        let handles: Vec<_> = files
            .iter()
            .map(|f| scope.spawn(move || analyze_file(f, args.horizon, cfg)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("analysis thread panicked")).collect()
    });
    let mut items = Vec::with_capacity(files.len());
    for (file, report) in files.iter().zip(reports) {
        let label = file.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        match report {
            Ok(v) => {
                out.verdicts.insert(label.clone(), json!({
                    "controllable": v["controllable"],
                    "observable": v["observable"],
                    "stable": v["stable"],
                }));
                items.push(json!({ "file": label, "report": v }));
            }
            Err(e) => {
                items.push(json!({ "file": label, "error": error_json(&e) }));
                out.errors.push(e);
            }
        }
    }
    out.results = Value::Array(items);
    Ok(())
}

fn steer_nl(args: &super::SteerNlArgs, config: &CliConfig, out: &mut Outcome) -> Result<()> {
    let cfg = &config.tolerances;
    let vf = match args.field.as_str() {
        "pendulum" => VectorField::pendulum(),
        "double-integrator" => VectorField::double_integrator(),
        other => match config.fields.get(other) {
            Some(spec) => VectorField::polynomial(spec)?,
            None => return Err(ControlError::InvalidInput(format!("unknown vector field {other:?}"))),
        },
    };
    let (n, p) = (vf.state_dim(), vf.control_dim());
    let x0 = parse_vector(&args.x0, "x0")?;
    let x1 = parse_vector(&args.x1, "x1")?;
    let xe = match &args.xe {
        Some(t) => parse_vector(t, "xe")?,
        None => Vector::zeros(n),
    };
    let ue = match &args.ue {
        Some(t) => parse_vector(t, "ue")?,
        None => Vector::zeros(p),
    };
    out.inputs.insert("field".into(), json!(args.field));
    out.inputs.insert("t0".into(), json!(args.t0));
    out.inputs.insert("t1".into(), json!(args.t1));
    out.inputs.insert("x0".into(), vector_json(&x0));
    out.inputs.insert("x1".into(), vector_json(&x1));
    out.inputs.insert("xe".into(), vector_json(&xe));
    out.inputs.insert("ue".into(), vector_json(&ue));
    let reference = ReferenceTrajectory::equilibrium(&vf, xe, ue, args.t0, args.t1)?;
    let res = steer_nonlinear(&vf, &reference, &x0, &x1, cfg)?;
    out.results = json!({
        "converged": res.converged,
        "iterations": res.iterations,
        "terminal_error": res.terminal_error,
        "error_history": res.error_history,
        "final_state": vector_json(res.trajectory.final_state()),
    });
    out.verdicts.insert("converged".into(), json!(res.converged));
    out.csv = Some(res.trajectory.to_csv());
    if !res.converged {
        out.errors.push(ControlError::Numerical(format!(
            "no convergence after {} iterations (terminal error {:e})",
            res.iterations, res.terminal_error
        )));
    }
    attach_report("steer-nl", &args.report, out);
    Ok(())
}
