use super::{check_square, Matrix};
use crate::{ControlError, Result};

// Numerator coefficients of the [13/13] diagonal Padé approximant of exp.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which the [13/13] approximant is accurate to unit roundoff.
const THETA13: f64 = 5.371_920_351_148_152;

/// Matrix exponential by scaling and squaring with the [13/13] Padé approximant.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    check_square(a, "expm")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(ControlError::NonFinite("expm argument".into()));
    }

    let norm1 = a.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max);
    let squarings = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a * 2f64.powi(-squarings);

    let ident = Matrix::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = &scaled * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];

    let denom = &v - &u;
    let numer = &v + &u;
    let mut result = denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| ControlError::Numerical("singular Padé denominator in expm".into()))?;

    for _ in 0..squarings {
        result = &result * &result;
    }
    if result.iter().any(|v| !v.is_finite()) {
        return Err(ControlError::Numerical("matrix exponential overflowed".into()));
    }
    Ok(result)
}
