use num_complex::Complex64;

use super::{check_square, Matrix};
use crate::{ControlError, Result};

/// Eigenvalues of a real matrix, listed with multiplicity.
///
/// Produced from a real matrix the list is closed under conjugation: the
/// QR iteration emits every complex pair as `x ± iz` from the same 2×2 block.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComplexScalarList(pub Vec<Complex64>);

impl ComplexScalarList {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Complex64> {
        self.0.iter()
    }

    /// Largest real part; `-inf` for the empty spectrum.
    pub fn max_real(&self) -> f64 {
        self.0.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sorted(&self) -> Self {
        Self(sort_spectrum(&self.0))
    }

    /// Representatives with non-negative imaginary part, one per conjugate pair.
    pub fn upper_half(&self) -> Vec<Complex64> {
        self.0.iter().copied().filter(|z| z.im >= 0.0).collect()
    }
}

impl From<Vec<Complex64>> for ComplexScalarList {
    fn from(v: Vec<Complex64>) -> Self {
        Self(v)
    }
}

/// Lexicographic order on (real, imaginary).
pub fn sort_spectrum(values: &[Complex64]) -> Vec<Complex64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    v
}

/// All eigenvalues of a square real matrix.
///
/// Balancing, Householder reduction to Hessenberg form, then Francis
/// double-shift QR sweeps with exceptional shifts.
pub fn eigenvalues(a: &Matrix) -> Result<ComplexScalarList> {
    check_square(a, "eigenvalues")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(ComplexScalarList::default());
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(ControlError::NonFinite("eigenvalue argument".into()));
    }
    if n == 1 {
        return Ok(ComplexScalarList(vec![Complex64::new(a[(0, 0)], 0.0)]));
    }
    let mut h = a.clone();
    balance(&mut h);
    let mut h = h.hessenberg().h();
    for j in 0..n {
        for i in (j + 2)..n {
            h[(i, j)] = 0.0;
        }
    }
    hessenberg_qr(&mut h).map(ComplexScalarList)
}

fn balance(a: &mut Matrix) {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let s = c + r;
                let mut f = 1.0;
                let mut g = r / RADIX;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let ginv = 1.0 / f;
                    for j in 0..n {
                        a[(i, j)] *= ginv;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

// Francis double-shift QR on an upper Hessenberg matrix (EISPACK hqr layout).
fn hessenberg_qr(a: &mut Matrix) -> Result<Vec<Complex64>> {
    const MAX_SWEEPS: usize = 60;
    let n = a.nrows();
    let eps = f64::EPSILON;
    let mut out = vec![Complex64::new(0.0, 0.0); n];

    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }

    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0usize;
        loop {
            let nu = nn as usize;
            let mut l = nu;
            while l > 0 {
                let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[(l, l - 1)].abs() <= eps * s {
                    a[(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[(nu, nu)];
            if l == nu {
                out[nu] = Complex64::new(x + t, 0.0);
                nn -= 1;
            } else {
                let mut y = a[(nu - 1, nu - 1)];
                let mut w = a[(nu, nu - 1)] * a[(nu - 1, nu)];
                if l == nu - 1 {
                    let p = 0.5 * (y - x);
                    let q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        out[nu - 1] = Complex64::new(x + z, 0.0);
                        out[nu] = Complex64::new(x + z, 0.0);
                        if z != 0.0 {
                            out[nu] = Complex64::new(x - w / z, 0.0);
                        }
                    } else {
                        out[nu] = Complex64::new(x + p, -z);
                        out[nu - 1] = Complex64::new(x + p, z);
                    }
                    nn -= 2;
                } else {
                    if its == MAX_SWEEPS {
                        return Err(ControlError::Numerical(format!(
                            "QR iteration did not converge after {MAX_SWEEPS} sweeps"
                        )));
                    }
                    if its == 10 || its == 20 || its == 40 {
                        // exceptional shift
                        t += x;
                        for i in 0..=nu {
                            a[(i, i)] -= x;
                        }
                        let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;

                    let mut m = nu - 2;
                    let (mut p, mut q, mut r, mut z);
                    loop {
                        z = a[(m, m)];
                        let rr = x - z;
                        let ss = y - z;
                        p = (rr * ss - w) / a[(m + 1, m)] + a[(m, m + 1)];
                        q = a[(m + 1, m + 1)] - z - rr - ss;
                        r = a[(m + 2, m + 1)];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                        if u <= eps * v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m..(nu - 1) {
                        a[(i + 2, i)] = 0.0;
                        if i != m {
                            a[(i + 2, i - 1)] = 0.0;
                        }
                    }
                    for k in m..nu {
                        if k != m {
                            p = a[(k, k - 1)];
                            q = a[(k + 1, k - 1)];
                            r = 0.0;
                            if k + 1 != nu {
                                r = a[(k + 2, k - 1)];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    a[(k, k - 1)] = -a[(k, k - 1)];
                                }
                            } else {
                                a[(k, k - 1)] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nu {
                                let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                                if k + 1 != nu {
                                    pp += r * a[(k + 2, j)];
                                    a[(k + 2, j)] -= pp * z;
                                }
                                a[(k + 1, j)] -= pp * y;
                                a[(k, j)] -= pp * x;
                            }
                            let mmin = if nu < k + 3 { nu } else { k + 3 };
                            for i in l..=mmin {
                                let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                                if k + 1 != nu {
                                    pp += z * a[(i, k + 2)];
                                    a[(i, k + 2)] -= pp * r;
                                }
                                a[(i, k + 1)] -= pp * q;
                                a[(i, k)] -= pp;
                            }
                        }
                    }
                }
            }
            if nn < 0 || l as isize >= nn - 1 {
                break;
            }
        }
    }
    Ok(out)
}
