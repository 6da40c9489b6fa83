//! Throwaway diagnostics for the optimizer (not part of the test suite).

use swim_core::optimizer::{optimize, OptimizationConfig};
use swim_core::shape::SQRT2;

fn main() {
    let mut cfg = OptimizationConfig {
        n_nodes: 64,
        refine_levels: 2,
        ..OptimizationConfig::default()
    };
    if let Some(n) = std::env::args().nth(1).and_then(|a| a.parse::<usize>().ok()) {
        cfg.n_nodes = n;
    }
    if let Some(l) = std::env::args().nth(2).and_then(|a| a.parse::<usize>().ok()) {
        cfg.refine_levels = l;
    }
    if let (Some(a), Some(b)) = (
        std::env::args().nth(3).and_then(|a| a.parse::<f64>().ok()),
        std::env::args().nth(4).and_then(|a| a.parse::<f64>().ok()),
    ) {
        cfg.init = swim_core::optimizer::InitSpec::Ellipse { a, b };
    }
    let res = optimize(&cfg).expect("optimize");
    println!(
        "converged={} drag={:.6} X={:.6} L={:.6} el={:.3e} q={:.4} contacts={} iters={}",
        res.converged,
        res.drag,
        res.displacement,
        res.length,
        res.el_residual,
        res.dual_q,
        res.contacts.len(),
        res.iterations
    );
    for c in &res.contacts {
        println!(
            "  contact {:?} nodes {}..{} ({}) angles {:.2e}/{:.2e}",
            c.constraint, c.start, c.end, c.node_count, c.entry_angle, c.exit_angle
        );
    }
    let mut worst = f64::INFINITY;
    for p in res.stroke.nodes() {
        let g = [
            p.w - p.y - SQRT2 * p.z,
            p.w - p.y + SQRT2 * p.z,
            p.w * p.w + p.w * p.y - 2.0 * p.z * p.z,
        ];
        for gi in g {
            worst = worst.min(gi);
        }
    }
    println!("worst node margin: {worst:.3e}");
    let tail = res.trace.len().saturating_sub(14);
    for e in &res.trace[tail..] {
        println!(
            "  [{} {} w={:.1e}] obj={:.8} merit={:.8} infeas={:.3e}",
            e.level, e.stage, e.penalty_weight, e.objective, e.merit, e.infeasibility
        );
    }
    println!("trace entries: {}", res.trace.len());
    if std::env::args().any(|a| a == "--dump") {
        println!("nodes (i, Y, Z, g1, g2, g3):");
        for (i, p) in res.stroke.nodes().iter().enumerate() {
            let g1 = p.w - p.y - SQRT2 * p.z;
            let g2 = p.w - p.y + SQRT2 * p.z;
            let g3 = p.w * p.w + p.w * p.y - 2.0 * p.z * p.z;
            println!("{i:4} {:+.4} {:+.4}  {:.2e} {:.2e} {:.2e}", p.y, p.z, g1, g2, g3);
        }
    }
}
