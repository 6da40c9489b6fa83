//! Closed strokes in shape space and their swimming metrics.
//!
//! A stroke is a closed polyline over `(W, Y, Z)` shape points,
//! optionally carrying a time parameterization. Per cycle it produces
//!
//! * `length`: Euclidean arclength of the loop,
//! * `displacement`: the holonomy `X = oint A dY` with `A = Z/(sqrt(2) W)`,
//! * `dissipation`: `4 pi mu int |gamma_dot|^2 dt`,
//! * `drag`: `dissipation * period / (4 pi mu X^2)`, which collapses to
//!   `(length / X)^2` under the constant-speed convention.
//!
//! Drag is dimensionless and scale-invariant; it diverges like
//! `1/|gamma|^2` for small loops, which is why optimal swimming happens
//! at finite stroke amplitude.

use serde::{Deserialize, Serialize};

use crate::error::SwimError;
use crate::flow::connection;
use crate::quadrature::gauss_legendre_unit;
use crate::shape::{LocatedShape, ShapePoint};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;
const TAU_ANGLE: f64 = std::f64::consts::TAU;

/// Gauss order used for `A dY` segment quadrature unless the caller
/// asks otherwise. Order 4 integrates the smooth connection along a
/// straight segment far below every tolerance in this crate.
pub const DEFAULT_QUAD_ORDER: usize = 4;

/// Node physicality gate: Boundary contact is allowed, leaving the
/// cone is not.
const PHYSICAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
struct Timing {
    times: Vec<f64>,
    period: f64,
}

/// Closed, oriented polyline in shape space, optionally timed.
///
/// Serializes as `{"nodes": [[W,Y,Z], ...], "times": [...], "period": t}`
/// where `times` and `period` are optional: a bare `period` means the
/// constant-speed parameterization with that period, and neither means
/// the untimed constant-speed convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StrokeFile", into = "StrokeFile")]
pub struct Stroke {
    nodes: Vec<ShapePoint>,
    timing: Option<Timing>,
}

/// Wire format for stroke JSON files.
#[derive(Serialize, Deserialize)]
struct StrokeFile {
    nodes: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    period: Option<f64>,
}

impl TryFrom<StrokeFile> for Stroke {
    type Error = SwimError;

    fn try_from(f: StrokeFile) -> Result<Self, SwimError> {
        let nodes: Vec<ShapePoint> = f
            .nodes
            .iter()
            .map(|&[w, y, z]| ShapePoint::new(w, y, z))
            .collect();
        match (f.times, f.period) {
            (Some(times), Some(period)) => Stroke::with_times(nodes, times, period),
            (Some(_), None) => Err(SwimError::InvalidStroke(
                "times given without a period".into(),
            )),
            (None, Some(period)) => {
                Ok(Stroke::new(nodes)?.reparameterize_constant_speed(period)?)
            }
            (None, None) => Stroke::new(nodes),
        }
    }
}

impl From<Stroke> for StrokeFile {
    fn from(s: Stroke) -> Self {
        StrokeFile {
            nodes: s.nodes.iter().map(|p| [p.w, p.y, p.z]).collect(),
            times: s.timing.as_ref().map(|t| t.times.clone()),
            period: s.timing.as_ref().map(|t| t.period),
        }
    }
}

/// Per-cycle summary; `drag` is `None` for non-swimming strokes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrokeMetrics {
    pub length: f64,
    pub displacement: f64,
    pub dissipation: f64,
    pub period: f64,
    pub drag: Option<f64>,
}

/// Swim trajectory: sampled times with the shape and its center offset.
#[derive(Debug, Clone, PartialEq)]
pub struct SwimTrace {
    pub samples: Vec<(f64, LocatedShape)>,
}

fn node_delta(a: &ShapePoint, b: &ShapePoint) -> [f64; 3] {
    [b.w - a.w, b.y - a.y, b.z - a.z]
}

fn delta_norm(d: [f64; 3]) -> f64 {
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn lerp(a: &ShapePoint, b: &ShapePoint, u: f64) -> ShapePoint {
    ShapePoint::new(
        a.w + (b.w - a.w) * u,
        a.y + (b.y - a.y) * u,
        a.z + (b.z - a.z) * u,
    )
}

impl Stroke {
    /// Untimed stroke (constant-speed convention).
    pub fn new(nodes: Vec<ShapePoint>) -> Result<Self, SwimError> {
        Self::validate_nodes(&nodes)?;
        Ok(Self {
            nodes,
            timing: None,
        })
    }

    /// Timed stroke; `times` start at exactly 0, increase strictly, and
    /// the closing segment runs from the last time to `period`.
    pub fn with_times(
        nodes: Vec<ShapePoint>,
        times: Vec<f64>,
        period: f64,
    ) -> Result<Self, SwimError> {
        Self::validate_nodes(&nodes)?;
        if times.len() != nodes.len() {
            return Err(SwimError::InvalidStroke(format!(
                "{} times for {} nodes",
                times.len(),
                nodes.len()
            )));
        }
        if !times.iter().all(|t| t.is_finite()) || !period.is_finite() {
            return Err(SwimError::InvalidStroke("non-finite time value".into()));
        }
        if times[0] != 0.0 {
            return Err(SwimError::InvalidStroke(format!(
                "times must start at 0, got {}",
                times[0]
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SwimError::InvalidStroke(
                "times must increase strictly".into(),
            ));
        }
        if period <= *times.last().unwrap() {
            return Err(SwimError::InvalidStroke(format!(
                "period {period} does not exceed the last node time"
            )));
        }
        Ok(Self {
            nodes,
            timing: Some(Timing { times, period }),
        })
    }

    fn validate_nodes(nodes: &[ShapePoint]) -> Result<(), SwimError> {
        if nodes.len() < 3 {
            return Err(SwimError::InvalidStroke(format!(
                "a closed stroke needs at least 3 nodes, got {}",
                nodes.len()
            )));
        }
        for (i, p) in nodes.iter().enumerate() {
            let finite = p.w.is_finite() && p.y.is_finite() && p.z.is_finite();
            if !finite || p.cone_classify(PHYSICAL_TOL).is_outside() {
                return Err(SwimError::NonPhysicalNode {
                    index: i,
                    w: p.w,
                    y: p.y,
                    z: p.z,
                });
            }
        }
        for i in 0..nodes.len() {
            let j = (i + 1) % nodes.len();
            if delta_norm(node_delta(&nodes[i], &nodes[j])) == 0.0 {
                return Err(SwimError::InvalidStroke(format!(
                    "zero-length segment starting at node {i}"
                )));
            }
        }
        Ok(())
    }

    /// Parse the JSON node-list format, keeping structured errors (a
    /// non-physical node reports as such instead of a generic parse
    /// failure).
    pub fn from_json(text: &str) -> Result<Self, SwimError> {
        let file: StrokeFile =
            serde_json::from_str(text).map_err(|e| SwimError::Parse(e.to_string()))?;
        Stroke::try_from(file)
    }

    /// Serialize to the JSON node-list format.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("stroke serializes");
        text.push('\n');
        text
    }

    pub fn nodes(&self) -> &[ShapePoint] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn times(&self) -> Option<&[f64]> {
        self.timing.as_ref().map(|t| t.times.as_slice())
    }

    pub fn period(&self) -> Option<f64> {
        self.timing.as_ref().map(|t| t.period)
    }

    fn segment(&self, i: usize) -> (&ShapePoint, &ShapePoint) {
        (&self.nodes[i], &self.nodes[(i + 1) % self.nodes.len()])
    }

    fn segment_duration(&self, i: usize) -> f64 {
        let t = self.timing.as_ref().expect("timed stroke");
        if i + 1 < t.times.len() {
            t.times[i + 1] - t.times[i]
        } else {
            t.period - t.times[i]
        }
    }

    /// Euclidean arclength of the closed loop.
    pub fn length(&self) -> f64 {
        (0..self.nodes.len())
            .map(|i| {
                let (a, b) = self.segment(i);
                delta_norm(node_delta(a, b))
            })
            .sum()
    }

    /// Per-segment Gauss quadrature of `A dY` over one whole segment.
    fn segment_holonomy(&self, i: usize, rule: &[(f64, f64)]) -> Result<f64, SwimError> {
        let (a, b) = self.segment(i);
        let dy = b.y - a.y;
        if dy == 0.0 {
            return Ok(0.0);
        }
        let mut acc = 0.0;
        for &(u, wt) in rule {
            acc += wt * connection(&lerp(a, b, u))?;
        }
        Ok(acc * dy)
    }

    /// Net swim step per cycle, `X = oint A dY`, per-segment
    /// Gauss-Legendre of the given order. Timing-independent.
    pub fn displacement(&self, quad_order: usize) -> Result<f64, SwimError> {
        if quad_order < 1 || quad_order > 256 {
            return Err(SwimError::InvalidArgument(format!(
                "quadrature order must be in 1..=256, got {quad_order}"
            )));
        }
        let rule = gauss_legendre_unit(quad_order);
        let mut x = 0.0;
        for i in 0..self.nodes.len() {
            x += self.segment_holonomy(i, &rule)?;
        }
        Ok(x)
    }

    /// Energy dissipated into the fluid per cycle,
    /// `4 pi mu sum |delta_node|^2 / delta_t`. Requires timing.
    pub fn dissipation(&self, mu: f64) -> Result<f64, SwimError> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(SwimError::InvalidArgument(format!(
                "viscosity must be positive, got {mu}"
            )));
        }
        if self.timing.is_none() {
            return Err(SwimError::InvalidStroke(
                "dissipation needs a timed stroke; use reparameterize_constant_speed".into(),
            ));
        }
        let mut d = 0.0;
        for i in 0..self.nodes.len() {
            let (a, b) = self.segment(i);
            let step = delta_norm(node_delta(a, b));
            d += step * step / self.segment_duration(i);
        }
        Ok(FOUR_PI * mu * d)
    }

    /// Swimming drag coefficient. With timing,
    /// `dissipation * period / (4 pi mu X^2)`; untimed, the
    /// constant-speed value `(length / X)^2`. Viscosity cancels either
    /// way. Errors on non-swimming strokes (`X ~ 0`).
    pub fn drag(&self, mu: f64) -> Result<f64, SwimError> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(SwimError::InvalidArgument(format!(
                "viscosity must be positive, got {mu}"
            )));
        }
        let x = self.displacement(DEFAULT_QUAD_ORDER)?;
        let len = self.length();
        if x.abs() <= 1e-12 * len.max(1.0) {
            return Err(SwimError::NonSwimming { displacement: x });
        }
        match &self.timing {
            Some(t) => Ok(self.dissipation(mu)? * t.period / (FOUR_PI * mu * x * x)),
            None => Ok((len / x) * (len / x)),
        }
    }

    /// All per-cycle metrics at once. Untimed strokes are reported
    /// under the constant-speed convention with period 1; a
    /// non-swimming stroke yields `drag: None` instead of an error.
    pub fn metrics(&self, mu: f64) -> Result<StrokeMetrics, SwimError> {
        let length = self.length();
        let displacement = self.displacement(DEFAULT_QUAD_ORDER)?;
        let (dissipation, period) = match &self.timing {
            Some(t) => (self.dissipation(mu)?, t.period),
            None => (FOUR_PI * mu * length * length, 1.0),
        };
        let drag = match self.drag(mu) {
            Ok(d) => Some(d),
            Err(SwimError::NonSwimming { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(StrokeMetrics {
            length,
            displacement,
            dissipation,
            period,
            drag,
        })
    }

    /// Same nodes, times proportional to cumulative arclength. This is
    /// the dissipation-minimizing timing for a fixed path; afterwards
    /// `dissipation = 4 pi mu length^2 / period`.
    pub fn reparameterize_constant_speed(&self, period: f64) -> Result<Stroke, SwimError> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(SwimError::InvalidStroke(format!(
                "period must be positive, got {period}"
            )));
        }
        let total = self.length();
        let mut times = Vec::with_capacity(self.nodes.len());
        let mut walked = 0.0;
        for i in 0..self.nodes.len() {
            times.push(period * walked / total);
            let (a, b) = self.segment(i);
            walked += delta_norm(node_delta(a, b));
        }
        Stroke::with_times(self.nodes.clone(), times, period)
    }

    /// Shape at time `t` (timed strokes only), linear between nodes.
    pub fn shape_at(&self, t: f64) -> Result<ShapePoint, SwimError> {
        let timing = self.timing.as_ref().ok_or_else(|| {
            SwimError::InvalidStroke("shape_at needs a timed stroke".into())
        })?;
        let t = t.rem_euclid(timing.period);
        let i = match timing.times.binary_search_by(|probe| {
            probe.partial_cmp(&t).expect("finite times")
        }) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let (a, b) = self.segment(i);
        let u = (t - timing.times[i]) / self.segment_duration(i);
        Ok(lerp(a, b, u))
    }

    /// Integrate the swim position over one period, reporting `n + 1`
    /// uniformly spaced samples. Uses the same per-segment quadrature
    /// as `displacement`, split at sample times, so the final offset
    /// reproduces `displacement` to rounding.
    pub fn simulate(&self, n: usize) -> Result<SwimTrace, SwimError> {
        let timing = self
            .timing
            .as_ref()
            .ok_or_else(|| SwimError::InvalidStroke("simulate needs a timed stroke".into()))?
            .clone();
        if n < self.nodes.len() {
            return Err(SwimError::InvalidArgument(format!(
                "need at least one sample per node: n = {n} < {}",
                self.nodes.len()
            )));
        }
        let rule = gauss_legendre_unit(DEFAULT_QUAD_ORDER);

        // Holonomy accumulated at node times, summed exactly like
        // displacement() so the last sample matches it bit-for-bit.
        let count = self.nodes.len();
        let mut at_node = vec![0.0; count + 1];
        for i in 0..count {
            at_node[i + 1] = at_node[i] + self.segment_holonomy(i, &rule)?;
        }

        // Partial holonomy of segment i over parameter [0, u].
        let partial = |i: usize, u: f64| -> Result<f64, SwimError> {
            let (a, b) = self.segment(i);
            let dy = (b.y - a.y) * u;
            if dy == 0.0 {
                return Ok(0.0);
            }
            let mut acc = 0.0;
            for &(q, wt) in &rule {
                acc += wt * connection(&lerp(a, b, u * q))?;
            }
            Ok(acc * dy)
        };

        let mut samples = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let t = timing.period * j as f64 / n as f64;
            let (x, shape) = if j == n {
                (at_node[count], self.nodes[0])
            } else {
                let i = match timing.times.binary_search_by(|probe| {
                    probe.partial_cmp(&t).expect("finite times")
                }) {
                    Ok(i) => i,
                    Err(0) => 0,
                    Err(i) => i - 1,
                };
                let u = (t - timing.times[i]) / self.segment_duration(i);
                let (a, b) = self.segment(i);
                (at_node[i] + partial(i, u)?, lerp(a, b, u))
            };
            samples.push((t, LocatedShape { shape, x }));
        }
        Ok(SwimTrace { samples })
    }

    /// Every node multiplied by `lambda > 0`; timing preserved. Drag is
    /// invariant under this map, displacement scales linearly.
    pub fn scale(&self, lambda: f64) -> Result<Stroke, SwimError> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(SwimError::InvalidArgument(format!(
                "scale factor must be positive, got {lambda}"
            )));
        }
        Ok(Stroke {
            nodes: self.nodes.iter().map(|p| p.scaled(lambda)).collect(),
            timing: self.timing.clone(),
        })
    }

    /// Traversal-order reversal; displacement negates, drag survives.
    pub fn reversed(&self) -> Stroke {
        let count = self.nodes.len();
        let mut nodes = self.nodes.clone();
        nodes[1..].reverse();
        let timing = self.timing.as_ref().map(|t| {
            // Segment durations reverse along with the segments.
            let dur: Vec<f64> = (0..count).map(|i| self.segment_duration(i)).collect();
            let mut times = Vec::with_capacity(count);
            let mut acc = 0.0;
            for i in 0..count {
                times.push(acc);
                acc += dur[count - 1 - i];
            }
            Timing {
                times,
                period: t.period,
            }
        });
        Stroke {
            nodes,
            timing,
        }
    }

    /// Cyclic rotation placing node `k` first; metrics are invariant.
    pub fn rotated(&self, k: usize) -> Stroke {
        let count = self.nodes.len();
        let k = k % count;
        let mut nodes = Vec::with_capacity(count);
        nodes.extend_from_slice(&self.nodes[k..]);
        nodes.extend_from_slice(&self.nodes[..k]);
        let timing = self.timing.as_ref().map(|t| {
            let mut times = Vec::with_capacity(count);
            let mut acc = 0.0;
            for i in 0..count {
                times.push(acc);
                acc += self.segment_duration((k + i) % count);
            }
            Timing {
                times,
                period: t.period,
            }
        });
        Stroke {
            nodes,
            timing,
        }
    }
}

/// Circle of radius `r` around `(W0, 0, 0)` in the `Y`-`Z` plane;
/// `orientation = -1` (clockwise in the chart) swims in `+x`.
pub fn circle_stroke(
    w0: f64,
    r: f64,
    n: usize,
    orientation: i32,
) -> Result<Stroke, SwimError> {
    if !(r > 0.0) || !r.is_finite() || !w0.is_finite() {
        return Err(SwimError::InvalidArgument(format!(
            "need a positive radius, got {r}"
        )));
    }
    if n < 16 {
        return Err(SwimError::InvalidArgument(format!(
            "circle stroke needs n >= 16, got {n}"
        )));
    }
    if orientation != 1 && orientation != -1 {
        return Err(SwimError::InvalidArgument(format!(
            "orientation must be +1 or -1, got {orientation}"
        )));
    }
    let sign = orientation as f64;
    let nodes = (0..n)
        .map(|k| {
            let th = TAU_ANGLE * k as f64 / n as f64;
            ShapePoint::new(w0, r * th.cos(), sign * r * th.sin())
        })
        .collect();
    Stroke::new(nodes)
}

/// Analytic drag of the vanishing-amplitude circle stroke,
/// `8 (W0 / r)^2`; the exact drag approaches this as `r -> 0`.
pub fn squirmer_drag_analytic(w0: f64, r: f64) -> f64 {
    8.0 * (w0 / r) * (w0 / r)
}

/// Long rounded-rectangle loop on the unit-area sheet
/// `W = sqrt(1 + Y^2 + Z^2)`, spanning `Y` from `-l` to `-1` and `Z`
/// from `-w` to `w` with quarter-circle corners of radius `w/2`;
/// oriented to swim in `+x`. The physical cone opens toward negative
/// `Y` on this sheet with asymptotic half-width `1/sqrt(3)` in `Z`, so
/// the long arm is feasible for `w < 1/sqrt(3)`.
///
/// Its length grows like `2l` while its displacement only grows like
/// `sqrt(2) w log(l)`, which makes it the canonical family for probing
/// how drag diverges with stroke elongation.
pub fn elongated_stroke(l: f64, w: f64, n: usize) -> Result<Stroke, SwimError> {
    if !(l > w && w > 0.0) || !l.is_finite() {
        return Err(SwimError::InvalidArgument(format!(
            "need l > w > 0, got l = {l}, w = {w}"
        )));
    }
    if n < 32 {
        return Err(SwimError::InvalidArgument(format!(
            "elongated stroke needs n >= 32, got {n}"
        )));
    }
    let rho = w / 2.0;
    let straight_y = (l - 1.0) - 2.0 * rho;
    let straight_z = 2.0 * w - 2.0 * rho;
    if straight_y <= 0.0 {
        return Err(SwimError::InvalidArgument(format!(
            "l = {l} leaves no straight arm after rounding corners of radius {rho}"
        )));
    }
    let quarter = std::f64::consts::FRAC_PI_2 * rho;
    // Counterclockwise chart path, piece lengths in walk order:
    // bottom arm, corner, right cap, corner, top arm, corner, left
    // cap, corner.
    let pieces = [
        straight_y, quarter, straight_z, quarter, straight_y, quarter, straight_z, quarter,
    ];
    let perimeter: f64 = pieces.iter().sum();

    let chart_point = |s: f64| -> (f64, f64) {
        let mut s = s;
        // Bottom arm: Z = -w, Y from -l + rho to -1 - rho.
        if s < pieces[0] {
            return (-l + rho + s, -w);
        }
        s -= pieces[0];
        // Corner at (-1 - rho, -w + rho).
        if s < pieces[1] {
            let a = s / rho;
            return (-1.0 - rho + rho * a.sin(), -w + rho - rho * a.cos());
        }
        s -= pieces[1];
        // Right cap: Y = -1, Z from -w + rho to w - rho.
        if s < pieces[2] {
            return (-1.0, -w + rho + s);
        }
        s -= pieces[2];
        // Corner at (-1 - rho, w - rho).
        if s < pieces[3] {
            let a = s / rho;
            return (-1.0 - rho + rho * a.cos(), w - rho + rho * a.sin());
        }
        s -= pieces[3];
        // Top arm: Z = w, Y from -1 - rho to -l + rho.
        if s < pieces[4] {
            return (-1.0 - rho - s, w);
        }
        s -= pieces[4];
        // Corner at (-l + rho, w - rho).
        if s < pieces[5] {
            let a = s / rho;
            return (-l + rho - rho * a.sin(), w - rho + rho * a.cos());
        }
        s -= pieces[5];
        // Left cap: Y = -l, Z from w - rho to -w + rho.
        if s < pieces[6] {
            return (-l, w - rho - s);
        }
        s -= pieces[6];
        // Corner at (-l + rho, -w + rho).
        let a = (s / rho).min(std::f64::consts::FRAC_PI_2);
        (-l + rho - rho * a.cos(), -w + rho - rho * a.sin())
    };

    let nodes: Vec<ShapePoint> = (0..n)
        .map(|k| {
            // Reversed walk order: clockwise in the chart swims in +x.
            let s = perimeter * (n - k) as f64 / n as f64 % perimeter;
            let (y, z) = chart_point(s);
            ShapePoint::new((1.0 + y * y + z * z).sqrt(), y, z)
        })
        .collect();
    Stroke::new(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::SQRT2;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    const PI: f64 = std::f64::consts::PI;

    fn square_stroke(w0: f64, a: f64) -> Stroke {
        Stroke::new(vec![
            ShapePoint::new(w0, a, a),
            ShapePoint::new(w0, -a, a),
            ShapePoint::new(w0, -a, -a),
            ShapePoint::new(w0, a, -a),
        ])
        .unwrap()
    }

    #[test]
    fn length_examples() {
        assert_relative_eq!(square_stroke(2.0, 0.3).length(), 8.0 * 0.3, epsilon = 1e-14);
        let circle = circle_stroke(2.0, 0.1, 4096, 1).unwrap();
        assert_relative_eq!(circle.length(), 2.0 * PI * 0.1, max_relative = 1e-6);
        let scaled = square_stroke(2.0, 0.3).scale(2.5).unwrap();
        assert_relative_eq!(scaled.length(), 2.5 * 8.0 * 0.3, epsilon = 1e-13);
    }

    #[test]
    fn displacement_vanishes_without_z_or_y_motion() {
        let z0 = Stroke::new(vec![
            ShapePoint::new(2.0, 0.3, 0.0),
            ShapePoint::new(2.5, 0.0, 0.0),
            ShapePoint::new(2.0, -0.3, 0.0),
            ShapePoint::new(1.5, 0.0, 0.0),
        ])
        .unwrap();
        assert_eq!(z0.displacement(4).unwrap(), 0.0);

        let y_const = Stroke::new(vec![
            ShapePoint::new(2.0, 0.1, 0.2),
            ShapePoint::new(2.5, 0.1, 0.0),
            ShapePoint::new(2.0, 0.1, -0.2),
            ShapePoint::new(1.5, 0.1, 0.0),
        ])
        .unwrap();
        assert_eq!(y_const.displacement(4).unwrap(), 0.0);
    }

    #[test]
    fn small_circle_displacement_is_enclosed_flux() {
        // Flux of the curvature through a tiny disc at (1, 0, 0):
        // pi r^2 / (sqrt(2) W0).
        let s = circle_stroke(1.0, 0.01, 4096, -1).unwrap();
        let x = s.displacement(4).unwrap();
        assert_relative_eq!(x, PI * 1e-4 / SQRT2, max_relative = 1e-2);
        let flipped = circle_stroke(1.0, 0.01, 4096, 1).unwrap();
        assert_relative_eq!(flipped.displacement(4).unwrap(), -x, max_relative = 1e-12);
    }

    #[test]
    fn quadrature_order_insensitive_for_smooth_strokes() {
        let s = circle_stroke(1.0, 0.3, 256, -1).unwrap();
        let lo = s.displacement(2).unwrap();
        let hi = s.displacement(8).unwrap();
        assert!((lo - hi).abs() <= 1e-10, "order drift {:e}", (lo - hi).abs());
    }

    #[test]
    fn dissipation_examples() {
        let s = circle_stroke(1.0, 0.1, 4096, 1).unwrap();
        let cs = s.reparameterize_constant_speed(1.0).unwrap();
        let d = cs.dissipation(1.0).unwrap();
        assert_relative_eq!(d, 4.0 * PI * cs.length() * cs.length(), max_relative = 1e-12);
        assert_relative_eq!(d, 16.0 * PI.powi(3) * 0.01, max_relative = 1e-5);
        let slow = cs.reparameterize_constant_speed(2.0).unwrap();
        assert_relative_eq!(slow.dissipation(1.0).unwrap(), d / 2.0, max_relative = 1e-12);
        assert!(s.dissipation(1.0).is_err(), "untimed dissipation must fail");
    }

    #[test]
    fn drag_matches_squirmer_at_ten_percent() {
        let s = circle_stroke(1.0, 0.1, 1024, -1).unwrap();
        let d = s.drag(1.0).unwrap();
        assert_relative_eq!(d, 800.0, max_relative = 0.05);
        assert_relative_eq!(squirmer_drag_analytic(1.0, 0.1), 800.0, epsilon = 1e-12);
        assert_relative_eq!(squirmer_drag_analytic(2.0, 0.1), 3200.0, epsilon = 1e-9);
    }

    #[test]
    fn drag_is_scale_invariant() {
        let s = circle_stroke(1.0, 0.2, 512, -1).unwrap();
        let d = s.drag(1.0).unwrap();
        for lambda in [0.5, 2.0, 10.0] {
            let ds = s.scale(lambda).unwrap().drag(1.0).unwrap();
            assert_relative_eq!(ds, d, max_relative = 1e-12);
        }
        let x = s.displacement(4).unwrap();
        let xs = s.scale(3.0).unwrap().displacement(4).unwrap();
        assert_relative_eq!(xs, 3.0 * x, max_relative = 1e-12);
    }

    #[test]
    fn planar_loops_do_not_swim() {
        let z0 = Stroke::new(vec![
            ShapePoint::new(2.0, 0.3, 0.0),
            ShapePoint::new(2.5, 0.0, 0.0),
            ShapePoint::new(2.0, -0.3, 0.0),
            ShapePoint::new(1.5, 0.0, 0.0),
        ])
        .unwrap();
        match z0.drag(1.0) {
            Err(SwimError::NonSwimming { displacement }) => assert_eq!(displacement, 0.0),
            other => panic!("expected non-swimming error, got {other:?}"),
        }
        let m = z0.metrics(1.0).unwrap();
        assert_eq!(m.drag, None);
        assert_eq!(m.displacement, 0.0);
    }

    #[test]
    fn constant_speed_timing_is_uniform_in_arclength() {
        let s = square_stroke(2.0, 0.3).reparameterize_constant_speed(1.0).unwrap();
        let times = s.times().unwrap();
        assert_eq!(times, &[0.0, 0.25, 0.5, 0.75]);
        let again = s.reparameterize_constant_speed(1.0).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn constant_speed_is_the_best_timing() {
        let path = circle_stroke(1.0, 0.3, 64, -1).unwrap();
        let base = path.drag(1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut t = 0.0;
            let mut times = Vec::with_capacity(64);
            for _ in 0..64 {
                times.push(t);
                t += rng.gen_range(0.2..1.8);
            }
            let period = t;
            let timed = Stroke::with_times(path.nodes().to_vec(), times, period).unwrap();
            let d = timed.drag(1.0).unwrap();
            assert!(d >= base - 1e-9 * base, "timed {d} below constant-speed {base}");
        }
    }

    #[test]
    fn timed_and_untimed_drag_agree_at_constant_speed() {
        let path = circle_stroke(1.0, 0.25, 128, -1).unwrap();
        let cs = path.reparameterize_constant_speed(3.7).unwrap();
        assert_relative_eq!(
            cs.drag(1.0).unwrap(),
            path.drag(1.0).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn simulate_lands_on_the_displacement() {
        let s = circle_stroke(1.0, 0.2, 64, -1)
            .unwrap()
            .reparameterize_constant_speed(1.0)
            .unwrap();
        let trace = s.simulate(200).unwrap();
        assert_eq!(trace.samples.len(), 201);
        let x_final = trace.samples.last().unwrap().1.x;
        assert!((x_final - s.displacement(4).unwrap()).abs() <= 1e-10);
        assert_eq!(trace.samples[0].0, 0.0);
        assert_eq!(trace.samples.last().unwrap().0, 1.0);

        let z0 = Stroke::new(vec![
            ShapePoint::new(2.0, 0.3, 0.0),
            ShapePoint::new(2.5, 0.0, 0.0),
            ShapePoint::new(2.0, -0.3, 0.0),
        ])
        .unwrap()
        .reparameterize_constant_speed(1.0)
        .unwrap();
        for (_, located) in z0.simulate(12).unwrap().samples {
            assert_eq!(located.x, 0.0);
        }
    }

    #[test]
    fn reversal_negates_displacement_and_keeps_drag() {
        let s = circle_stroke(1.0, 0.2, 128, -1).unwrap();
        let r = s.reversed();
        assert_relative_eq!(
            r.displacement(4).unwrap(),
            -s.displacement(4).unwrap(),
            max_relative = 1e-12
        );
        assert_relative_eq!(r.drag(1.0).unwrap(), s.drag(1.0).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn metrics_are_cyclically_invariant() {
        let s = circle_stroke(1.0, 0.2, 64, -1).unwrap();
        let base = s.metrics(1.0).unwrap();
        for k in [1, 17, 63] {
            let m = s.rotated(k).metrics(1.0).unwrap();
            assert_relative_eq!(m.length, base.length, max_relative = 1e-13);
            assert_relative_eq!(m.displacement, base.displacement, max_relative = 1e-12);
        }
    }

    #[test]
    fn elongated_stroke_is_physical_and_swims() {
        let s = elongated_stroke(10.0, 0.5, 512).unwrap();
        let x = s.displacement(4).unwrap();
        assert!(x > 0.0, "oriented to swim forward, got {x}");
        let d = s.drag(1.0).unwrap();
        assert!(d.is_finite() && d > 0.0);
        // Leading-order estimate: length ~ 2l, displacement ~ sqrt(2) w log l.
        assert_relative_eq!(x, SQRT2 * 0.5 * 10.0f64.ln(), max_relative = 0.35);
        let d30 = elongated_stroke(30.0, 0.5, 512).unwrap().drag(1.0).unwrap();
        assert!(d30 > d, "drag must grow with elongation: {d} -> {d30}");
    }

    #[test]
    fn validation_rejects_bad_strokes() {
        assert!(Stroke::new(vec![
            ShapePoint::new(1.0, 0.0, 0.0),
            ShapePoint::new(1.1, 0.1, 0.0),
        ])
        .is_err());
        // Node outside the physical cone.
        assert!(matches!(
            Stroke::new(vec![
                ShapePoint::new(1.0, 0.0, 0.0),
                ShapePoint::new(1.0, 2.0, 0.0),
                ShapePoint::new(1.0, 0.0, 0.2),
            ]),
            Err(SwimError::NonPhysicalNode { index: 1, .. })
        ));
        // Duplicate consecutive node.
        assert!(Stroke::new(vec![
            ShapePoint::new(1.0, 0.0, 0.0),
            ShapePoint::new(1.0, 0.0, 0.0),
            ShapePoint::new(1.0, 0.1, 0.0),
        ])
        .is_err());
        // Bad times.
        let nodes = vec![
            ShapePoint::new(1.0, 0.1, 0.0),
            ShapePoint::new(1.0, 0.0, 0.1),
            ShapePoint::new(1.0, -0.1, 0.0),
        ];
        assert!(Stroke::with_times(nodes.clone(), vec![0.0, 0.5], 1.0).is_err());
        assert!(Stroke::with_times(nodes.clone(), vec![0.1, 0.5, 0.7], 1.0).is_err());
        assert!(Stroke::with_times(nodes.clone(), vec![0.0, 0.6, 0.5], 1.0).is_err());
        assert!(Stroke::with_times(nodes, vec![0.0, 0.5, 0.7], 0.7).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = circle_stroke(1.0, 0.2, 32, -1)
            .unwrap()
            .reparameterize_constant_speed(2.0)
            .unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: Stroke = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);

        let bare: Stroke =
            serde_json::from_str(r#"{"nodes":[[1,0.1,0],[1,0,0.1],[1,-0.1,0]]}"#).unwrap();
        assert!(bare.times().is_none());
        let with_period: Stroke = serde_json::from_str(
            r#"{"nodes":[[1,0.1,0],[1,0,0.1],[1,-0.1,0]],"period":2.0}"#,
        )
        .unwrap();
        assert_eq!(with_period.period(), Some(2.0));
        assert!(serde_json::from_str::<Stroke>(
            r#"{"nodes":[[1,0.1,0],[1,0,0.1],[1,-0.1,0]],"times":[0,0.5,0.9]}"#
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn drag_never_below_constant_speed(seed in 0u64..1000) {
            let path = circle_stroke(1.0, 0.25, 32, -1).unwrap();
            let base = path.drag(1.0).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut t = 0.0;
            let mut times = Vec::with_capacity(32);
            for _ in 0..32 {
                times.push(t);
                t += rng.gen_range(0.1..2.0);
            }
            let timed = Stroke::with_times(path.nodes().to_vec(), times, t).unwrap();
            prop_assert!(timed.drag(1.0).unwrap() >= base * (1.0 - 1e-12));
        }

        #[test]
        fn displacement_scales_linearly(lambda in 0.2f64..5.0) {
            let s = circle_stroke(1.0, 0.2, 48, -1).unwrap();
            let x = s.displacement(4).unwrap();
            let xs = s.scale(lambda).unwrap().displacement(4).unwrap();
            prop_assert!((xs - lambda * x).abs() <= 1e-12 * x.abs().max(1e-12));
        }
    }
}
