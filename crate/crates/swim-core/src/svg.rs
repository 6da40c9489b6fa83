//! Deterministic SVG 1.1 scenes: shape outlines, the constraint domain
//! with an inscribed stroke, and swim-snapshot strips.
//!
//! Output bytes depend only on the inputs: fixed viewport math, fixed
//! decimal formatting, no timestamps or randomness.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::SwimError;
use crate::optimizer::ContactArc;
use crate::shape::{LocatedShape, SQRT2};
use crate::stroke::Stroke;

const FRAC_1_SQRT_3: f64 = 0.577_350_269_189_625_8;

/// World-coordinate drawing surface with a uniform scale and a flipped
/// y axis (world up = screen up).
pub struct SvgScene {
    width: f64,
    height: f64,
    scale: f64,
    ox: f64,
    oy: f64,
    body: String,
}

impl SvgScene {
    /// Viewport of `width x height` pixels framing the world rectangle.
    pub fn with_world_bounds(
        width: f64,
        height: f64,
        (xmin, xmax, ymin, ymax): (f64, f64, f64, f64),
    ) -> Self {
        let margin = 0.06 * width.min(height);
        let spanx = (xmax - xmin).max(1e-9);
        let spany = (ymax - ymin).max(1e-9);
        let scale = ((width - 2.0 * margin) / spanx).min((height - 2.0 * margin) / spany);
        let ox = width / 2.0 - scale * (xmin + xmax) / 2.0;
        let oy = height / 2.0 + scale * (ymin + ymax) / 2.0;
        Self {
            width,
            height,
            scale,
            ox,
            oy,
            body: String::new(),
        }
    }

    fn px(&self, p: (f64, f64)) -> (f64, f64) {
        (self.ox + self.scale * p.0, self.oy - self.scale * p.1)
    }

    fn points_attr(&self, pts: &[(f64, f64)]) -> String {
        let mut s = String::with_capacity(pts.len() * 14);
        for (i, &p) in pts.iter().enumerate() {
            let (x, y) = self.px(p);
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{x:.2},{y:.2}");
        }
        s
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], style: &str) {
        let _ = writeln!(
            self.body,
            r#"<polyline fill="none" points="{}" {style}/>"#,
            self.points_attr(pts)
        );
    }

    pub fn polygon(&mut self, pts: &[(f64, f64)], style: &str) {
        let _ = writeln!(
            self.body,
            r#"<polygon points="{}" {style}/>"#,
            self.points_attr(pts)
        );
    }

    /// Circle marker with a radius in pixels, not world units.
    pub fn marker(&mut self, center: (f64, f64), r_px: f64, style: &str) {
        let (cx, cy) = self.px(center);
        let _ = writeln!(
            self.body,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r_px:.2}" {style}/>"#
        );
    }

    pub fn text(&mut self, pos: (f64, f64), content: &str, style: &str) {
        let (x, y) = self.px(pos);
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" {style}>{content}</text>"#
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
             width=\"{:.0}\" height=\"{:.0}\" \
             viewBox=\"0 0 {:.0} {:.0}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
             {}</svg>\n",
            self.width, self.height, self.width, self.height, self.body
        )
    }
}

fn complex_bbox(pts: &[Complex64]) -> (f64, f64, f64, f64) {
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for p in pts {
        xmin = xmin.min(p.re);
        xmax = xmax.max(p.re);
        ymin = ymin.min(p.im);
        ymax = ymax.max(p.im);
    }
    (xmin, xmax, ymin, ymax)
}

/// Closed boundary curve of one located shape; cusps of boundary-cone
/// shapes appear directly in the sampled outline.
pub fn shape_scene(located: &LocatedShape, samples: usize) -> Result<SvgScene, SwimError> {
    let pts = located.sample_boundary(samples)?.points;
    let mut scene = SvgScene::with_world_bounds(640.0, 640.0, complex_bbox(&pts));
    let poly: Vec<(f64, f64)> = pts.iter().map(|p| (p.re, p.im)).collect();
    scene.polygon(&poly, r##"fill="#f6e7d7" stroke="#333333" stroke-width="2""##);
    scene.marker((located.x, 0.0), 3.0, r##"fill="#333333""##);
    Ok(scene)
}

/// Feasible-domain boundary curves in the `(Y, Z)` chart of the
/// unit-area sheet, clipped to the given world window.
///
/// The outline consists of the two pinch curves `Y = (1 - Z^2) /
/// (2 sqrt(2) Z)` (one per sign of `Z`, ending on the cone edges at
/// `(0, +-1)`) and the two long-arm curves `Y = -sqrt((Z^2 - 1)^2 /
/// (3 Z^2 - 1))` which flare out to the asymptotic half-width
/// `|Z| = 1/sqrt(3)`.
pub fn chart_domain_outline(
    (ymin, ymax, zmin, zmax): (f64, f64, f64, f64),
    samples: usize,
) -> Vec<Vec<(f64, f64)>> {
    let mut curves = Vec::new();
    // Pinch curve, upper half: Z in (0, 1], Y decreasing from the clip
    // edge down to 0 at Z = 1.
    let z_of_y = |y: f64| -> f64 {
        // Invert y = (1 - z^2)/(2 sqrt(2) z) on 0 < z <= 1.
        let b = SQRT2 * y;
        (b * b + 1.0).sqrt() - b
    };
    let z_start = z_of_y(ymax.max(0.0)).clamp(1e-6, 1.0);
    let mut upper = Vec::with_capacity(samples);
    for k in 0..samples {
        let z = z_start + (1.0 - z_start) * k as f64 / (samples - 1) as f64;
        let y = (1.0 - z * z) / (2.0 * SQRT2 * z);
        upper.push((y, z));
    }
    curves.push(upper.clone());
    curves.push(upper.iter().map(|&(y, z)| (y, -z)).collect());

    // Long-arm curve, upper half: Z from 1 down toward 1/sqrt(3),
    // Y running to -infinity; clip at the window edge.
    let mut arm = Vec::with_capacity(samples);
    for k in 0..samples {
        let u = k as f64 / (samples - 1) as f64;
        // Quadratic spacing concentrates samples near the flare.
        let z = 1.0 - (1.0 - FRAC_1_SQRT_3 - 1e-4) * u * u;
        let y = -(((z * z - 1.0) * (z * z - 1.0)) / (3.0 * z * z - 1.0)).sqrt();
        if y < ymin {
            break;
        }
        arm.push((y, z));
    }
    curves.push(arm.clone());
    curves.push(arm.iter().map(|&(y, z)| (y, -z)).collect());
    let _ = (zmin, zmax);
    curves
}

/// Stroke inscribed in the feasible domain, chart projection, with
/// contact arcs overdrawn and the cone edges marked.
pub fn chart_scene(stroke: &Stroke, contacts: &[ContactArc]) -> SvgScene {
    let chart: Vec<(f64, f64)> = stroke.nodes().iter().map(|p| (p.y, p.z)).collect();
    let mut ymin = -1.0f64;
    let mut ymax = 1.0f64;
    let mut zmin = -1.1f64;
    let mut zmax = 1.1f64;
    for &(y, z) in &chart {
        ymin = ymin.min(y);
        ymax = ymax.max(y);
        zmin = zmin.min(z);
        zmax = zmax.max(z);
    }
    let pad_y = 0.3 * (ymax - ymin);
    let pad_z = 0.2 * (zmax - zmin);
    let window = (ymin - pad_y, ymax + pad_y, zmin - pad_z, zmax + pad_z);

    let mut scene = SvgScene::with_world_bounds(760.0, 560.0, (window.0, window.1, window.2, window.3));
    for curve in chart_domain_outline(window, 400) {
        if curve.len() >= 2 {
            scene.polyline(&curve, r##"stroke="#999999" stroke-width="1.5""##);
        }
    }
    scene.marker((0.0, 1.0), 2.5, r##"fill="#999999""##);
    scene.marker((0.0, -1.0), 2.5, r##"fill="#999999""##);

    scene.polygon(&chart, r##"fill="none" stroke="#c0392b" stroke-width="2""##);
    let n = chart.len();
    for arc in contacts {
        let mut pts = Vec::with_capacity(arc.node_count);
        let mut i = arc.start;
        loop {
            pts.push(chart[i]);
            if i == arc.end {
                break;
            }
            i = (i + 1) % n;
        }
        if pts.len() >= 2 {
            scene.polyline(&pts, r##"stroke="#2980b9" stroke-width="3.5""##);
        } else {
            scene.marker(pts[0], 3.0, r##"fill="#2980b9""##);
        }
    }
    scene.text(
        (window.1 - 0.12 * (window.1 - window.0), window.2 + 0.06 * (window.3 - window.2)),
        "Y",
        r##"font-family="sans-serif" font-size="16" fill="#555555""##,
    );
    scene.text(
        (window.0 + 0.02 * (window.1 - window.0), window.3 - 0.04 * (window.3 - window.2)),
        "Z",
        r##"font-family="sans-serif" font-size="16" fill="#555555""##,
    );
    scene
}

/// Snapshot strip over one period: `frames + 1` outlines, each shifted
/// down one row for visibility, each carrying its swim offset in `x`
/// and a fixed reference marker at boundary angle 0. The final row
/// repeats the starting shape translated by the net displacement.
pub fn frames_scene(
    stroke: &Stroke,
    frames: usize,
    boundary_samples: usize,
) -> Result<SvgScene, SwimError> {
    if frames < 1 {
        return Err(SwimError::InvalidArgument(
            "need at least one frame".into(),
        ));
    }
    let per = (boundary_samples.max(stroke.node_count()) + frames - 1) / frames;
    let trace = stroke.simulate(frames * per)?;

    // World extent of all outlines to pick a row pitch.
    let mut located = Vec::with_capacity(frames + 1);
    for k in 0..=frames {
        located.push(trace.samples[k * per].1);
    }
    let mut all = Vec::new();
    for loc in &located {
        all.extend(loc.sample_boundary(boundary_samples.max(64))?.points);
    }
    let (xmin, xmax, ymin, ymax) = complex_bbox(&all);
    let pitch = 1.15 * (ymax - ymin).max(1e-9);

    let mut world = (xmin, xmax, ymin - pitch * frames as f64, ymax);
    // Keep the aspect ratio sane for long strips.
    let height = 140.0 * (frames as f64 + 1.0);
    let width = 540.0f64.max(
        height * (world.1 - world.0) / ((world.3 - world.2).max(1e-9)),
    );
    world.0 -= 0.05 * (xmax - xmin).max(1e-9);
    world.1 += 0.05 * (xmax - xmin).max(1e-9);
    let mut scene = SvgScene::with_world_bounds(width.min(1600.0), height, world);

    for (k, loc) in located.iter().enumerate() {
        let dyy = -pitch * k as f64;
        let pts = loc.sample_boundary(boundary_samples.max(64))?.points;
        let poly: Vec<(f64, f64)> = pts.iter().map(|p| (p.re, p.im + dyy)).collect();
        scene.polygon(
            &poly,
            r##"fill="#eef3f8" stroke="#34495e" stroke-width="1.5""##,
        );
        let anchor = loc.boundary_point(0.0);
        scene.marker((anchor.re, anchor.im + dyy), 3.5, r##"fill="#c0392b""##);
    }
    Ok(scene)
}
