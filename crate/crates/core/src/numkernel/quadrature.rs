use std::ops::{Add, Mul};

/// Composite Simpson rule on uniformly spaced samples. An even sample count
/// closes the last three intervals with the 3/8 rule.
pub fn simpson_uniform<T>(values: &[T], h: f64) -> Option<T>
where
    T: Clone + Add<Output = T> + Mul<f64, Output = T>,
{
    let m = values.len();
    match m {
        0 => None,
        1 => Some(values[0].clone() * 0.0),
        2 => Some((values[0].clone() + values[1].clone()) * (0.5 * h)),
        3 => Some(simpson_panel(&values[0..3], h)),
        _ if m % 2 == 1 => {
            let mut acc = values[0].clone() * 0.0;
            for k in (0..m - 1).step_by(2) {
                acc = acc + simpson_panel(&values[k..k + 3], h);
            }
            Some(acc)
        }
        _ => {
            let split = m - 4;
            let mut acc = values[0].clone() * 0.0;
            for k in (0..split).step_by(2) {
                acc = acc + simpson_panel(&values[k..k + 3], h);
            }
            let v = &values[split..];
            let tail = (v[0].clone() + v[1].clone() * 3.0 + v[2].clone() * 3.0 + v[3].clone())
                * (3.0 * h / 8.0);
            Some(acc + tail)
        }
    }
}

fn simpson_panel<T>(v: &[T], h: f64) -> T
where
    T: Clone + Add<Output = T> + Mul<f64, Output = T>,
{
    (v[0].clone() + v[1].clone() * 4.0 + v[2].clone()) * (h / 3.0)
}

/// Composite Simpson rule on an arbitrary increasing grid (pairwise quadratic
/// interpolation; a trailing odd interval uses the quadratic through the last
/// three samples).
pub fn simpson_nonuniform<T>(times: &[f64], values: &[T]) -> Option<T>
where
    T: Clone + Add<Output = T> + Mul<f64, Output = T>,
{
    let m = times.len();
    if m == 0 || values.len() != m {
        return None;
    }
    let mut acc = values[0].clone() * 0.0;
    if m == 1 {
        return Some(acc);
    }
    if m == 2 {
        let h = times[1] - times[0];
        return Some((values[0].clone() + values[1].clone()) * (0.5 * h));
    }
    let mut k = 0;
    while k + 2 < m {
        let h0 = times[k + 1] - times[k];
        let h1 = times[k + 2] - times[k + 1];
        let s = h0 + h1;
        let w0 = s / 6.0 * (2.0 - h1 / h0);
        let w1 = s / 6.0 * (s * s / (h0 * h1));
        let w2 = s / 6.0 * (2.0 - h0 / h1);
        acc = acc + values[k].clone() * w0 + values[k + 1].clone() * w1 + values[k + 2].clone() * w2;
        k += 2;
    }
    if k + 1 < m {
        // one interval left: [times[k], times[k+1]] with k >= 1
        let h0 = times[k] - times[k - 1];
        let h1 = times[k + 1] - times[k];
        let wa = (2.0 * h1 * h1 + 3.0 * h0 * h1) / (6.0 * (h0 + h1));
        let wb = (h1 * h1 + 3.0 * h0 * h1) / (6.0 * h0);
        let wc = -(h1 * h1 * h1) / (6.0 * h0 * (h0 + h1));
        acc = acc + values[k + 1].clone() * wa + values[k].clone() * wb + values[k - 1].clone() * wc;
    }
    Some(acc)
}
