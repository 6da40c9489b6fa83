//! Throwaway probe: drag of loops that hug the feasible-domain boundary.

use swim_core::shape::SQRT2;

fn lift(y: f64, z: f64) -> f64 {
    (1.0 + y * y + z * z).sqrt()
}

/// Upper tube-arm height: positive root of `w^2 + w y = 2 z^2` on the sheet.
fn arm_z(y: f64) -> f64 {
    let s = 1.0 + y * y;
    let u = 0.5 * (2.0 * s + y * y - y.abs() * (8.0 * s + y * y).sqrt());
    u.max(0.0).sqrt()
}

/// Pinch-curve height at a given `y >= 0`: root of `w = y + sqrt(2) z`.
fn pinch_z(y: f64) -> f64 {
    -SQRT2 * y + (2.0 * y * y + 1.0).sqrt()
}

fn score(path: &[[f64; 2]]) -> (f64, f64, f64) {
    let mut len = 0.0;
    let mut flux = 0.0;
    for k in 0..path.len() {
        let [y0, z0] = path[k];
        let [y1, z1] = path[(k + 1) % path.len()];
        let (w0, w1) = (lift(y0, z0), lift(y1, z1));
        len += ((w1 - w0).powi(2) + (y1 - y0).powi(2) + (z1 - z0).powi(2)).sqrt();
        let (ym, zm) = (0.5 * (y0 + y1), 0.5 * (z0 + z1));
        flux += zm / (SQRT2 * lift(ym, zm)) * (y1 - y0);
    }
    (len, flux, (len / flux).powi(2))
}

fn hull(y_left: f64, y_right: f64, m: usize) -> Vec<[f64; 2]> {
    let mut p = Vec::new();
    // Upper pinch curve from the corner out to the right cap.
    let z_r = pinch_z(y_right);
    for k in 0..m {
        let z = 1.0 + (z_r - 1.0) * k as f64 / m as f64;
        p.push([(1.0 - z * z) / (2.0 * SQRT2 * z), z]);
    }
    // Right cap.
    for k in 0..m {
        p.push([y_right, z_r - 2.0 * z_r * k as f64 / m as f64]);
    }
    // Lower pinch curve back to the corner.
    for k in 0..m {
        let z = -(z_r + (1.0 - z_r) * k as f64 / m as f64);
        p.push([(1.0 - z * z) / (2.0 * SQRT2 * -z), z]);
    }
    // Lower tube arm out to the left cap.
    for k in 0..m {
        let y = y_left * k as f64 / m as f64;
        p.push([y, -arm_z(y)]);
    }
    // Left cap.
    let z_l = arm_z(y_left);
    for k in 0..m {
        p.push([y_left, -z_l + 2.0 * z_l * k as f64 / m as f64]);
    }
    // Upper tube arm back to the corner.
    for k in 0..m {
        let y = y_left * (m - k) as f64 / m as f64;
        p.push([y, arm_z(y)]);
    }
    p
}

fn main() {
    let m = 4000;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for il in 0..40 {
        let y_left = -0.8 - 0.2 * il as f64;
        for ir in 0..40 {
            let y_right = 0.1 + 0.15 * ir as f64;
            let (_, flux, drag) = score(&hull(y_left, y_right, m));
            if flux > 0.0 && drag < best.0 {
                best = (drag, y_left, y_right);
            }
        }
    }
    let (len, flux, drag) = score(&hull(best.1, best.2, m));
    println!(
        "best hull: y_left={:+.3} y_right={:+.3}  L={:.4} X={:.4} drag={:.4}",
        best.1, best.2, len, flux, drag
    );
    for (yl, yr) in [(-2.0, 1.0), (-3.0, 2.0), (-1.5, 0.8), (-4.0, 2.5)] {
        let (len, flux, drag) = score(&hull(yl, yr, m));
        println!("hull({yl:+.1},{yr:+.1}): L={len:.4} X={flux:.4} drag={drag:.4}");
    }
}
