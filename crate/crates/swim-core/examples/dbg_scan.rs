//! Throwaway landscape probe: drag of parametric chart loops.

use swim_core::optimizer::{objective, ChartPoint};
use swim_core::shape::SQRT2;

fn margins(y: f64, z: f64) -> [f64; 3] {
    let w = (1.0 + y * y + z * z).sqrt();
    [
        w - y - SQRT2 * z,
        w - y + SQRT2 * z,
        w * w + w * y - 2.0 * z * z,
    ]
}

fn worst_violation(nodes: &[ChartPoint]) -> f64 {
    let mut worst = 0.0f64;
    for p in nodes {
        for g in margins(p.y, p.z) {
            worst = worst.max(-g);
        }
    }
    worst
}

fn ellipse(c: f64, a: f64, b: f64, n: usize) -> Vec<ChartPoint> {
    (0..n)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / n as f64;
            // Clockwise in the chart swims +x.
            ChartPoint::new(c + a * t.cos(), -b * t.sin())
        })
        .collect()
}

fn main() {
    let n = 128;
    let mut rows: Vec<(f64, f64, f64, f64, f64, f64)> = Vec::new();
    let mut c = -2.0;
    while c <= 1.01 {
        let mut a = 0.4;
        while a <= 3.61 {
            let mut b = 0.3;
            while b <= 1.51 {
                let nodes = ellipse(c, a, b, n);
                if let Ok(d) = objective(&nodes) {
                    rows.push((c, a, b, d, worst_violation(&nodes), 0.0));
                }
                b += 0.15;
            }
            a += 0.2;
        }
        c += 0.25;
    }
    rows.sort_by(|x, y| x.3.total_cmp(&y.3));
    println!("best ellipses by drag (c, a, b, drag, violation):");
    for r in rows.iter().take(18) {
        println!(
            "  c={:+.2} a={:.2} b={:.2} drag={:8.4} viol={:.3}",
            r.0, r.1, r.2, r.3, r.4
        );
    }
    println!("\nbest FEASIBLE ellipses:");
    for r in rows.iter().filter(|r| r.4 <= 1e-12).take(12) {
        println!(
            "  c={:+.2} a={:.2} b={:.2} drag={:8.4}",
            r.0, r.1, r.2, r.3
        );
    }
}
