//! Numerics shared by the solver and backtester: stable log-sum-exp and
//! Gauss-Hermite quadrature for expectations over Gaussian increments.

/// log(exp(a) + exp(b)) without overflow.
#[inline]
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// log(sum_i exp(x_i)) over a slice.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    let sum: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Sum with pairwise recursion to bound floating-point drift on long arrays.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Gauss-Hermite rule rewritten for the standard normal measure:
/// sum_k weight[k] * f(node[k]) approximates E[f(Z)], Z ~ N(0, 1),
/// exact for polynomials up to degree 2n - 1. Weights sum to 1.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one node");
        let (x, w) = hermite_rule(n);
        let sqrt2 = std::f64::consts::SQRT_2;
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let nodes: Vec<f64> = x.iter().map(|xi| xi * sqrt2).collect();
        let weights: Vec<f64> = w.iter().map(|wi| wi / sqrt_pi).collect();
        GaussHermite { nodes, weights }
    }
}

/// Nodes and weights of the n-point physicists' Gauss-Hermite rule
/// (weight function exp(-x^2)), by Newton iteration on the Hermite
/// recurrence (Numerical Recipes "gauher").
fn hermite_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    const EPS: f64 = 1e-14;
    const MAX_IT: usize = 64;

    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    let nf = n as f64;
    let mut z = 0.0;

    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..MAX_IT {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= EPS {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // Center node of odd rules is exactly zero.
    if n % 2 == 1 {
        x[m - 1] = 0.0;
    }
    // Return in ascending order.
    x.reverse();
    w.reverse();
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn logaddexp_matches_direct() {
        assert_abs_diff_eq!(logaddexp(0.5, 2.0), (0.5f64.exp() + 2.0f64.exp()).ln(), epsilon = 1e-14);
        assert_eq!(logaddexp(f64::NEG_INFINITY, 3.0), 3.0);
    }

    #[test]
    fn logsumexp_handles_large_magnitudes() {
        let v = logsumexp(&[700.0, 700.0 + (2.0f64).ln()]);
        assert_abs_diff_eq!(v, 700.0 + (3.0f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn three_node_rule_is_exact() {
        let gh = GaussHermite::new(3);
        // Probabilists' 3-point rule: nodes -sqrt(3), 0, sqrt(3); weights 1/6, 2/3, 1/6.
        assert_abs_diff_eq!(gh.nodes[0], -(3.0f64).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(gh.nodes[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gh.weights[1], 2.0 / 3.0, epsilon = 1e-12);
        let total: f64 = gh.weights.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn seven_node_rule_integrates_moments() {
        let gh = GaussHermite::new(7);
        for (k, expect) in [(2usize, 1.0), (4, 3.0), (6, 15.0), (8, 105.0), (10, 945.0)] {
            let m: f64 = gh
                .nodes
                .iter()
                .zip(&gh.weights)
                .map(|(z, w)| w * z.powi(k as i32))
                .sum();
            // Degree 13 exactness covers moments up to z^12.
            if k <= 12 {
                assert_abs_diff_eq!(m, expect, epsilon = 1e-9 * f64::max(expect, 1.0));
            }
        }
    }

    #[test]
    fn mgf_of_gaussian_via_quadrature() {
        // E[e^{aZ}] = e^{a^2/2}; 7 nodes should be well under 1e-8 relative for small a.
        let gh = GaussHermite::new(7);
        let a = 0.4;
        let approx_val: f64 = gh.nodes.iter().zip(&gh.weights).map(|(z, w)| w * (a * z).exp()).sum();
        let exact = (a * a / 2.0f64).exp();
        assert!((approx_val - exact).abs() / exact < 1e-8);
    }
}
