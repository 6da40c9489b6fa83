//! Closed-form roots of real cubics, returned over the complex numbers.
//!
//! The solver always returns all three roots (with multiplicity), since the
//! callers care about root moduli relative to the unit circle. One complex
//! Newton step per root polishes the closed-form values; for well-separated
//! roots this lands within a few ulps.

use num_complex::Complex64;

use crate::error::SwimError;

/// Roots of `c3 x^3 + c2 x^2 + c1 x + c0` with real coefficients.
///
/// Requires `c3 != 0`. Real roots come back with zero imaginary part;
/// complex roots come in conjugate pairs.
pub fn solve_cubic(c0: f64, c1: f64, c2: f64, c3: f64) -> Result<[Complex64; 3], SwimError> {
    if c3 == 0.0 || !c3.is_finite() {
        return Err(SwimError::InvalidArgument(format!(
            "cubic leading coefficient must be finite and nonzero, got {c3}"
        )));
    }
    if ![c0, c1, c2].iter().all(|v| v.is_finite()) {
        return Err(SwimError::InvalidArgument(
            "cubic coefficients must be finite".into(),
        ));
    }

    let a = c2 / c3;
    let b = c1 / c3;
    let c = c0 / c3;

    // Depressed form t^3 + p t + q with x = t - a/3.
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;

    let scale = b.abs().max(a * a).max(c.abs().powf(2.0 / 3.0)).max(1e-300);
    let mut roots = if p.abs() <= 1e-14 * scale && q.abs() <= 1e-14 * scale.powf(1.5) {
        // Triple (or numerically triple) root.
        let r = Complex64::new(-shift, 0.0);
        [r, r, r]
    } else {
        let disc = (q / 2.0) * (q / 2.0) + (p / 3.0) * (p / 3.0) * (p / 3.0);
        if disc > 0.0 {
            // One real root, one conjugate pair. Pick the larger-magnitude
            // Cardano branch to dodge cancellation.
            let sq = disc.sqrt();
            let m = -q / 2.0 - sq.copysign(q);
            let u = m.cbrt();
            let v = if u == 0.0 { 0.0 } else { -p / (3.0 * u) };
            let t1 = u + v;
            // Deflation: t^2 + t1 t + (t1^2 + p) holds the conjugate pair.
            let im = (3.0 * t1 * t1 + 4.0 * p).max(0.0).sqrt() / 2.0;
            [
                Complex64::new(t1 - shift, 0.0),
                Complex64::new(-t1 / 2.0 - shift, im),
                Complex64::new(-t1 / 2.0 - shift, -im),
            ]
        } else {
            // Three real roots: trigonometric form (p < 0 here).
            let m = 2.0 * (-p / 3.0).sqrt();
            let cos_phi = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
            let phi = cos_phi.acos();
            let mut out = [Complex64::new(0.0, 0.0); 3];
            for (k, slot) in out.iter_mut().enumerate() {
                let t = m * ((phi - 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos();
                *slot = Complex64::new(t - shift, 0.0);
            }
            out
        }
    };

    for r in roots.iter_mut() {
        *r = polish(*r, c0, c1, c2, c3);
    }
    Ok(roots)
}

/// One complex Newton step; skipped near multiple roots where p' vanishes.
fn polish(x: Complex64, c0: f64, c1: f64, c2: f64, c3: f64) -> Complex64 {
    let p = ((Complex64::new(c3, 0.0) * x + c2) * x + c1) * x + c0;
    let dp = (Complex64::new(3.0 * c3, 0.0) * x + 2.0 * c2) * x + c1;
    let scale = c3.abs() * x.norm().max(1.0).powi(2);
    if dp.norm() <= 1e-8 * scale {
        return x;
    }
    x - p / dp
}
