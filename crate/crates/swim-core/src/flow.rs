//! Exterior Stokes flow driven by a deforming shape.
//!
//! The flow is built from two functions holomorphic in the fluid domain
//! `|s| > 1`:
//!
//! ```text
//! f1(s) = dY/s + dZ/(sqrt(2) s^2)
//! f2(s) = dX + dW/s + z(1/s) f1'(s) / z'(s)
//! v     = f1 + conj(f2) - z conj(f1'/z')
//! p     = -4 mu Re(f1'/z')
//! ```
//!
//! With the translation rate locked to the gauge connection
//! `dX = A dY`, `A = Z/(sqrt(2) W)`, the velocity decays like `1/|s|`
//! at infinity; on the boundary it equals the material velocity of the
//! deforming map exactly (no slip). Power flux through any boundary
//! circle reduces to `4 pi mu (dW^2 + dY^2 + dZ^2)`.

use num_complex::Complex64;

use crate::error::SwimError;
use crate::shape::{ShapePoint, SQRT2};

const TAU: f64 = std::f64::consts::TAU;

/// Fluid with a positive dynamic viscosity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fluid {
    mu: f64,
}

impl Fluid {
    pub fn new(mu: f64) -> Result<Self, SwimError> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(SwimError::InvalidArgument(format!(
                "viscosity must be positive and finite, got {mu}"
            )));
        }
        Ok(Self { mu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// Instantaneous shape deformation plus translation rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationRate {
    pub dw: f64,
    pub dy: f64,
    pub dz: f64,
    /// Translation rate of the center; free in general, fixed by the
    /// connection for force-free swimming.
    pub dx: f64,
}

impl DeformationRate {
    pub fn new(dw: f64, dy: f64, dz: f64, dx: f64) -> Self {
        Self { dw, dy, dz, dx }
    }

    /// Material velocity of the boundary point at `s` (d/dt of the map
    /// at frozen `s`).
    pub fn map_rate(&self, s: Complex64) -> Complex64 {
        s * self.dw + self.dx + self.dy / s + self.dz / (SQRT2 * s * s)
    }
}

/// One probed flow value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSample {
    pub position: Complex64,
    pub velocity: Complex64,
    pub pressure: f64,
}

/// Gauge connection `A = Z / (sqrt(2) W)`.
pub fn connection(s: &ShapePoint) -> Result<f64, SwimError> {
    if s.w == 0.0 {
        return Err(SwimError::DegenerateMap);
    }
    Ok(s.z / (SQRT2 * s.w))
}

/// Rate with the translation locked to the connection, `dX = A dY`;
/// the resulting flow carries no net momentum flux at infinity.
pub fn with_connection(
    s: &ShapePoint,
    dw: f64,
    dy: f64,
    dz: f64,
) -> Result<DeformationRate, SwimError> {
    Ok(DeformationRate::new(dw, dy, dz, connection(s)? * dy))
}

fn require_fluid_point(s: Complex64) -> Result<(), SwimError> {
    let m = s.norm();
    if m < 1.0 - 1e-12 {
        return Err(SwimError::InsideBody { modulus: m });
    }
    Ok(())
}

/// First flow potential.
pub fn f1_value(r: &DeformationRate, s: Complex64) -> Result<Complex64, SwimError> {
    require_fluid_point(s)?;
    Ok(r.dy / s + r.dz / (SQRT2 * s * s))
}

fn f1_deriv(r: &DeformationRate, s: Complex64) -> Complex64 {
    let s2 = s * s;
    -r.dy / s2 - SQRT2 * r.dz / (s2 * s)
}

fn f1_second(r: &DeformationRate, s: Complex64) -> Complex64 {
    let s3 = s * s * s;
    2.0 * r.dy / s3 + 3.0 * SQRT2 * r.dz / (s3 * s)
}

fn map_deriv_checked(shape: &ShapePoint, s: Complex64) -> Result<Complex64, SwimError> {
    let d = shape.map_deriv(s);
    if d.norm() <= 1e-12 * shape.w.abs().max(1e-300) {
        return Err(SwimError::CriticalPoint);
    }
    Ok(d)
}

/// Second flow potential.
pub fn f2_value(
    shape: &ShapePoint,
    r: &DeformationRate,
    s: Complex64,
) -> Result<Complex64, SwimError> {
    require_fluid_point(s)?;
    let zd = map_deriv_checked(shape, s)?;
    Ok(r.dx + r.dw / s + shape.map_mirror(s) * f1_deriv(r, s) / zd)
}

fn f2_deriv(shape: &ShapePoint, r: &DeformationRate, s: Complex64) -> Complex64 {
    let zd = shape.map_deriv(s);
    let zdd = shape.map_second_deriv(s);
    let g = f1_deriv(r, s);
    let gd = f1_second(r, s);
    let m = shape.map_mirror(s);
    let md = shape.map_mirror_deriv(s);
    -r.dw / (s * s) + md * g / zd + m * (gd * zd - g * zdd) / (zd * zd)
}

/// Fluid velocity at `s` (complex v_x + i v_y, body frame).
pub fn velocity(
    shape: &ShapePoint,
    r: &DeformationRate,
    s: Complex64,
) -> Result<Complex64, SwimError> {
    require_fluid_point(s)?;
    let zd = map_deriv_checked(shape, s)?;
    let f1 = r.dy / s + r.dz / (SQRT2 * s * s);
    let f2 = r.dx + r.dw / s + shape.map_mirror(s) * f1_deriv(r, s) / zd;
    Ok(f1 + f2.conj() - shape.map(s) * (f1_deriv(r, s) / zd).conj())
}

/// Pressure at `s`.
pub fn pressure(
    shape: &ShapePoint,
    r: &DeformationRate,
    fluid: &Fluid,
    s: Complex64,
) -> Result<f64, SwimError> {
    require_fluid_point(s)?;
    let zd = map_deriv_checked(shape, s)?;
    Ok(-4.0 * fluid.mu() * (f1_deriv(r, s) / zd).re)
}

/// Power the deforming boundary feeds into the fluid, via the traction
/// contour integral on the unit circle with `n` trapezoid samples:
///
/// ```text
/// P = Im oint conj(v) (2 mu (dv/dzbar) dzbar + p dz)
/// dv/dzbar = conj(psi'(z)) - z conj(phi''(z))
/// phi' = f1'/z',  psi' = f2'/z',  phi'' = (f1'' z' - f1' z'') / z'^3
/// ```
///
/// The integrand is smooth for strictly interior shapes, so the
/// trapezoid rule converges geometrically in `n`.
pub fn power_contour(
    shape: &ShapePoint,
    r: &DeformationRate,
    fluid: &Fluid,
    n: usize,
) -> Result<f64, SwimError> {
    if n < 8 {
        return Err(SwimError::InvalidArgument(format!(
            "contour quadrature needs n >= 8, got {n}"
        )));
    }
    if !shape.cone_classify(1e-9).is_interior() {
        return Err(SwimError::NotInterior {
            w: shape.w,
            y: shape.y,
            z: shape.z,
        });
    }
    let mu = fluid.mu();
    let dtheta = TAU / n as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let s = Complex64::from_polar(1.0, dtheta * k as f64);
        let zd = shape.map_deriv(s);
        let zdd = shape.map_second_deriv(s);
        let z = shape.map(s);
        let g = f1_deriv(r, s);
        let gd = f1_second(r, s);

        let phi_d = g / zd;
        let phi_dd = (gd * zd - g * zdd) / (zd * zd * zd);
        let psi_d = f2_deriv(shape, r, s) / zd;

        let v = velocity(shape, r, s)?;
        let p = -4.0 * mu * phi_d.re;
        let dv_dzbar = psi_d.conj() - z * phi_dd.conj();

        let dz = zd * Complex64::new(0.0, 1.0) * s * dtheta;
        total += v.conj() * (2.0 * mu * dv_dzbar * dz.conj() + p * dz);
    }
    Ok(total.im)
}

/// Same power, in closed form: `4 pi mu (dW^2 + dY^2 + dZ^2)`.
pub fn power_closed_form(r: &DeformationRate, fluid: &Fluid) -> f64 {
    4.0 * std::f64::consts::PI * fluid.mu() * (r.dw * r.dw + r.dy * r.dy + r.dz * r.dz)
}

/// Invert the map at `target`, seeded by a coarse polar scan of the
/// fluid annulus, then Newton.
pub fn invert_map(shape: &ShapePoint, target: Complex64) -> Result<Complex64, SwimError> {
    let w = shape.w.abs().max(1e-300);
    let reach = (target.norm() / w).max(2.0) * 2.0;
    let mut best = Complex64::new(2.0, 0.0);
    let mut best_d = f64::INFINITY;
    let rings = 24;
    let spokes = 48;
    for i in 0..=rings {
        // Geometric radii from just outside the body to beyond the target.
        let rad = 1.0001 * (reach / 1.0001).powf(i as f64 / rings as f64);
        for j in 0..spokes {
            let s = Complex64::from_polar(rad, TAU * j as f64 / spokes as f64);
            let d = (shape.map(s) - target).norm();
            if d < best_d {
                best_d = d;
                best = s;
            }
        }
    }
    newton_invert(shape, target, best)
}

fn newton_invert(
    shape: &ShapePoint,
    target: Complex64,
    seed: Complex64,
) -> Result<Complex64, SwimError> {
    let scale = shape.w.abs().max(target.norm()).max(1e-300);
    let mut s = seed;
    for _ in 0..50 {
        let f = shape.map(s) - target;
        if f.norm() <= 1e-13 * scale {
            return Ok(s);
        }
        let d = shape.map_deriv(s);
        if d.norm() == 0.0 {
            break;
        }
        s -= f / d;
    }
    let f = (shape.map(s) - target).norm();
    if f <= 1e-10 * scale {
        return Ok(s);
    }
    Err(SwimError::InversionFailed { iters: 50 })
}

/// Finite-difference Stokes residuals at the physical point `z0`:
/// `(|div v|, |mu lap v - grad p|)`, centered second-order stencil of
/// width `h`, both normalized by `max(|v(z0)|/h, 1)`.
///
/// The flow satisfies Stokes identically, so the residuals measure pure
/// truncation and vanish at least quadratically in `h`.
pub fn stokes_residual(
    shape: &ShapePoint,
    r: &DeformationRate,
    fluid: &Fluid,
    z0: Complex64,
    h: f64,
) -> Result<(f64, f64), SwimError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(SwimError::InvalidArgument(format!(
            "stencil width must be positive, got {h}"
        )));
    }
    let s0 = invert_map(shape, z0)?;
    let margin = 1.0 + 4.0 * h / shape.w.abs().max(1e-300);
    if s0.norm() <= margin {
        return Err(SwimError::InvalidArgument(format!(
            "probe point too close to the body: |s0| = {} <= {margin}",
            s0.norm()
        )));
    }

    let probe = |dz: Complex64| -> Result<(Complex64, f64), SwimError> {
        let s = newton_invert(shape, z0 + dz, s0)?;
        if s.norm() < 1.0 {
            return Err(SwimError::InsideBody { modulus: s.norm() });
        }
        Ok((velocity(shape, r, s)?, pressure(shape, r, fluid, s)?))
    };

    let (vc, _pc) = probe(Complex64::new(0.0, 0.0))?;
    let (vxp, pxp) = probe(Complex64::new(h, 0.0))?;
    let (vxm, pxm) = probe(Complex64::new(-h, 0.0))?;
    let (vyp, pyp) = probe(Complex64::new(0.0, h))?;
    let (vym, pym) = probe(Complex64::new(0.0, -h))?;

    // div v = d(vx)/dx + d(vy)/dy.
    let div = (vxp.re - vxm.re) / (2.0 * h) + (vyp.im - vym.im) / (2.0 * h);
    // Five-point Laplacian of the complex velocity.
    let lap = (vxp + vxm + vyp + vym - 4.0 * vc) / (h * h);
    let grad_p = Complex64::new((pxp - pxm) / (2.0 * h), (pyp - pym) / (2.0 * h));
    let momentum = (fluid.mu() * lap - grad_p).norm();

    let norm = (vc.norm() / h).max(1.0);
    Ok((div.abs() / norm, momentum / norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const PI: f64 = std::f64::consts::PI;

    fn fluid() -> Fluid {
        Fluid::new(1.0).unwrap()
    }

    #[test]
    fn connection_examples() {
        let a = connection(&ShapePoint::new(1.0, 0.0, SQRT2)).unwrap();
        assert_relative_eq!(a, 1.0, max_relative = 1e-15);
        assert!(connection(&ShapePoint::new(0.0, 0.1, 0.1)).is_err());
    }

    #[test]
    fn no_slip_on_the_boundary() {
        let s = ShapePoint::new(1.5, 0.3, 0.2);
        let r = with_connection(&s, 0.1, -0.2, 0.3).unwrap();
        let zeta = Complex64::from_polar(1.0, PI / 3.0);
        let v = velocity(&s, &r, zeta).unwrap();
        let material = r.map_rate(zeta);
        assert!(
            (v - material).norm() <= 1e-10 * material.norm().max(1.0),
            "no-slip violated by {:e}",
            (v - material).norm()
        );
    }

    #[test]
    fn velocity_decays_at_infinity() {
        let s = ShapePoint::new(1.5, 0.3, 0.2);
        let r = with_connection(&s, 0.1, -0.2, 0.3).unwrap();
        let v10 = velocity(&s, &r, Complex64::new(10.0, 3.0)).unwrap().norm();
        let v100 = velocity(&s, &r, Complex64::new(100.0, 30.0)).unwrap().norm();
        let ratio = v10 / v100;
        assert!((5.0..20.0).contains(&ratio), "decay ratio {ratio}");
        // Without the connection the reflected potential tends to a
        // constant instead.
        let raw = DeformationRate::new(0.1, -0.2, 0.3, 0.0);
        let far = velocity(&s, &raw, Complex64::new(1e6, 0.0)).unwrap().norm();
        assert!(far > 1e-3, "raw rate should not decay, got {far:e}");
    }

    #[test]
    fn pressure_example() {
        let s = ShapePoint::new(1.0, 0.0, 0.0);
        let r = DeformationRate::new(0.0, 1.0, 0.0, 0.0);
        let p = pressure(&s, &r, &fluid(), Complex64::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(p, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn power_breathing_mode() {
        let s = ShapePoint::new(1.0, 0.0, 0.0);
        let r = with_connection(&s, 1.0, 0.0, 0.0).unwrap();
        let p = power_contour(&s, &r, &fluid(), 512).unwrap();
        assert_relative_eq!(p, 4.0 * PI, max_relative = 1e-10);
    }

    #[test]
    fn power_example_mixed_rates() {
        let s = ShapePoint::new(1.5, 0.3, 0.2);
        let r = with_connection(&s, 0.1, -0.2, 0.3).unwrap();
        let p = power_contour(&s, &r, &fluid(), 512).unwrap();
        assert_relative_eq!(p, 0.56 * PI, max_relative = 1e-6);
        assert_relative_eq!(
            power_closed_form(&r, &fluid()),
            0.56 * PI,
            max_relative = 1e-15
        );
    }

    #[test]
    fn power_rejects_non_interior() {
        let s = ShapePoint::new(1.0, 2.0, 0.0);
        let r = DeformationRate::new(0.0, 1.0, 0.0, 0.0);
        assert!(power_contour(&s, &r, &fluid(), 512).is_err());
    }

    #[test]
    fn fluid_points_only() {
        let s = ShapePoint::new(1.5, 0.3, 0.2);
        let r = with_connection(&s, 0.1, -0.2, 0.3).unwrap();
        assert!(f1_value(&r, Complex64::new(0.5, 0.0)).is_err());
        assert!(velocity(&s, &r, Complex64::new(0.3, 0.2)).is_err());
    }

    #[test]
    fn map_inversion_round_trip() {
        let s = ShapePoint::new(1.5, 0.3, 0.2);
        for (rad, ang) in [(1.3, 0.4), (2.0, 2.8), (5.0, -1.2), (40.0, 3.0)] {
            let zeta = Complex64::from_polar(rad, ang);
            let z = s.map(zeta);
            let back = invert_map(&s, z).unwrap();
            assert!((back - zeta).norm() < 1e-9 * rad, "round trip {rad},{ang}");
        }
    }

    #[test]
    fn stokes_residual_small_and_second_order() {
        let s = ShapePoint::new(1.5, 0.3, 0.2);
        let r = with_connection(&s, 0.1, -0.2, 0.3).unwrap();
        let z0 = s.map(Complex64::from_polar(2.0, PI / 5.0));
        let (d3, m3) = stokes_residual(&s, &r, &fluid(), z0, 1e-3).unwrap();
        assert!(d3 <= 1e-3, "div residual {d3:e}");
        assert!(m3 <= 1e-3, "momentum residual {m3:e}");
        let (d4, m4) = stokes_residual(&s, &r, &fluid(), z0, 1e-4).unwrap();
        assert!(d4 <= d3 / 30.0, "div did not shrink: {d3:e} -> {d4:e}");
        assert!(m4 <= m3 / 30.0, "momentum did not shrink: {m3:e} -> {m4:e}");
    }

    proptest! {
        #[test]
        fn velocity_is_linear_in_rates(
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
            rad in 1.05f64..4.0,
            ang in 0.0f64..TAU,
        ) {
            let s = ShapePoint::new(1.5, 0.3, 0.2);
            let r1 = with_connection(&s, 0.1, -0.2, 0.3).unwrap();
            let r2 = with_connection(&s, -0.4, 0.25, 0.05).unwrap();
            let mix = with_connection(
                &s,
                a * r1.dw + b * r2.dw,
                a * r1.dy + b * r2.dy,
                a * r1.dz + b * r2.dz,
            ).unwrap();
            let zeta = Complex64::from_polar(rad, ang);
            let v_mix = velocity(&s, &mix, zeta).unwrap();
            let v_sum = a * velocity(&s, &r1, zeta).unwrap()
                + b * velocity(&s, &r2, zeta).unwrap();
            let scale = v_mix.norm().max(v_sum.norm()).max(1e-9);
            prop_assert!((v_mix - v_sum).norm() <= 1e-11 * scale);
        }

        #[test]
        fn contour_power_matches_closed_form(
            dw in -1.0f64..1.0,
            dy in -1.0f64..1.0,
            dz in -1.0f64..1.0,
        ) {
            let s = ShapePoint::new(1.5, 0.3, 0.2);
            let r = with_connection(&s, dw, dy, dz).unwrap();
            let exact = power_closed_form(&r, &fluid());
            let got = power_contour(&s, &r, &fluid(), 512).unwrap();
            prop_assert!(
                (got - exact).abs() <= 1e-6 * exact.abs().max(1e-12),
                "{got} vs {exact}"
            );
        }
    }
}
