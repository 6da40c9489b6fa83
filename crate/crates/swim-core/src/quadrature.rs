//! Gauss-Legendre quadrature nodes and weights.
//!
//! Nodes are the roots of the Legendre polynomial P_n, found by Newton
//! iteration on the three-term recurrence; the classic asymptotic cosine
//! guess brackets every root, so a handful of iterations reaches machine
//! precision for any practical order.

/// Nodes and weights of the n-point rule on [-1, 1], in ascending node order.
///
/// Exact for polynomials of degree <= 2n - 1.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "quadrature order must be at least 1");
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        // Initial guess: Chebyshev-like angle, accurate to O(1/n).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_deriv(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() <= 1e-15 {
                let (_, d2) = legendre_with_deriv(n, x);
                dp = d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

/// Nodes and weights mapped to [0, 1]; weights sum to 1.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

/// Integrate `f` over [a, b] with the n-point rule.
pub fn integrate<F: FnMut(f64) -> f64>(n: usize, a: f64, b: f64, mut f: F) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    gauss_legendre(n)
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// P_n(x) and P_n'(x) via the three-term recurrence.
fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    // Derivative from the standard identity; the Newton nodes never reach
    // the endpoints so 1 - x^2 stays well away from zero.
    let d = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_rule_matches_reference() {
        let rule = gauss_legendre(2);
        let inv_sqrt3 = 1.0 / 3.0f64.sqrt();
        assert!((rule[0].0 + inv_sqrt3).abs() < 1e-15);
        assert!((rule[1].0 - inv_sqrt3).abs() < 1e-15);
        assert!((rule[0].1 - 1.0).abs() < 1e-15);
        assert!((rule[1].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn five_point_rule_matches_reference() {
        // Abramowitz & Stegun 25.4.29 values.
        let rule = gauss_legendre(5);
        let expect = [
            (-0.906_179_845_938_664, 0.236_926_885_056_189),
            (-0.538_469_310_105_683, 0.478_628_670_499_366),
            (0.0, 0.568_888_888_888_889),
            (0.538_469_310_105_683, 0.478_628_670_499_366),
            (0.906_179_845_938_664, 0.236_926_885_056_189),
        ];
        for (got, want) in rule.iter().zip(expect.iter()) {
            assert!((got.0 - want.0).abs() < 1e-13, "node {got:?} vs {want:?}");
            assert!((got.1 - want.1).abs() < 1e-13, "weight {got:?} vs {want:?}");
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        for n in 1..=8 {
            for deg in 0..(2 * n) {
                let got = integrate(n, -1.0, 1.0, |x| x.powi(deg as i32));
                let want = if deg % 2 == 0 {
                    2.0 / (deg as f64 + 1.0)
                } else {
                    0.0
                };
                assert!(
                    (got - want).abs() < 1e-13,
                    "n = {n}, degree {deg}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn unit_interval_weights_sum_to_one() {
        for n in [1, 2, 4, 8, 16] {
            let s: f64 = gauss_legendre_unit(n).iter().map(|&(_, w)| w).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn high_order_integrates_smooth_function() {
        let got = integrate(24, 0.0, 1.0, |x| (4.0 * x).sin() * x.exp());
        // Antiderivative of e^x sin(4x): e^x (sin 4x - 4 cos 4x)/17.
        let anti = |x: f64| x.exp() * ((4.0 * x).sin() - 4.0 * (4.0 * x).cos()) / 17.0;
        assert!((got - (anti(1.0) - anti(0.0))).abs() < 1e-14);
    }
}
