//! Composite Gauss-Legendre quadrature.
//!
//! Node/weight pairs come from Newton iteration on the Legendre recurrence;
//! 16-point panels are exact for polynomial degree ≤ 31 and give spectral
//! accuracy on the smooth envelopes used throughout the pulse module.

/// A Gauss-Legendre rule on the reference interval [−1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi-style initial guess, then Newton on P_n(x) = 0
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_and_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
            let (_, d) = legendre_and_derivative(n, 0.0);
            weights[n / 2] = 2.0 / (d * d);
        }
        Self { nodes, weights }
    }

    /// ∫_a^b f(t) dt with this rule on a single panel.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Physical nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, w * half))
    }
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
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
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// ∫_a^b f with `panels` equal Gauss-Legendre panels.
pub fn composite<F: FnMut(f64) -> f64>(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    panels: usize,
    mut f: F,
) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| rule.integrate(a + p as f64 * h, a + (p + 1) as f64 * h, &mut f))
        .sum()
}

/// Cumulative integration matrix on [−1, 1]: given values f(x_j) at the rule's
/// nodes, `S·f` gives ∫_{−1}^{x_i} of the degree-(n−1) interpolant, which is
/// spectrally accurate for smooth integrands. Built through the Legendre
/// expansion of the interpolant.
pub fn cumulative_matrix(rule: &GaussLegendre) -> Vec<Vec<f64>> {
    let n = rule.nodes.len();
    // P_0..P_n at every node
    let legendre_at = |x: f64| -> Vec<f64> {
        let mut p = Vec::with_capacity(n + 1);
        p.push(1.0);
        if n >= 1 {
            p.push(x);
        }
        for k in 2..=n {
            let kf = k as f64;
            let next = ((2.0 * kf - 1.0) * x * p[k - 1] - (kf - 1.0) * p[k - 2]) / kf;
            p.push(next);
        }
        p
    };
    let p_at_nodes: Vec<Vec<f64>> = rule.nodes.iter().map(|&x| legendre_at(x)).collect();
    let mut s = vec![vec![0.0; n]; n];
    for m in 0..n {
        let gamma = (2.0 * m as f64 + 1.0) / 2.0;
        for i in 0..n {
            // ∫_{−1}^{x_i} P_m
            let q = if m == 0 {
                rule.nodes[i] + 1.0
            } else {
                (p_at_nodes[i][m + 1] - p_at_nodes[i][m - 1]) / (2.0 * m as f64 + 1.0)
            };
            for j in 0..n {
                s[i][j] += q * gamma * rule.weights[j] * p_at_nodes[j][m];
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_symmetric_and_weights_sum_to_two() {
        for n in [1, 2, 5, 16, 33, 64] {
            let gl = GaussLegendre::new(n);
            let wsum: f64 = gl.weights.iter().sum();
            assert!((wsum - 2.0).abs() < 1e-13, "n={n} wsum={wsum}");
            for i in 0..n {
                assert!((gl.nodes[i] + gl.nodes[n - 1 - i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn exact_for_high_degree_polynomials() {
        let gl = GaussLegendre::new(8);
        // degree 15 is the highest exact degree for n=8
        let val = gl.integrate(0.0, 1.0, |x| x.powi(15));
        assert!((val - 1.0 / 16.0).abs() < 1e-14);
    }

    #[test]
    fn composite_integrates_oscillatory_function() {
        let gl = GaussLegendre::new(16);
        let val = composite(&gl, 0.0, std::f64::consts::PI, 8, f64::sin);
        assert!((val - 2.0).abs() < 1e-13);
    }

    #[test]
    fn cumulative_matrix_exact_for_polynomials() {
        let gl = GaussLegendre::new(8);
        let s = cumulative_matrix(&gl);
        // f = x^5, exact cumulative (x^6 - 1)/6
        let f: Vec<f64> = gl.nodes.iter().map(|&x| x.powi(5)).collect();
        for i in 0..8 {
            let got: f64 = (0..8).map(|j| s[i][j] * f[j]).sum();
            let want = (gl.nodes[i].powi(6) - 1.0) / 6.0;
            assert!((got - want).abs() < 1e-14, "i={i}: {got} vs {want}");
        }
    }

    #[test]
    fn cumulative_matrix_spectral_on_smooth_function() {
        let gl = GaussLegendre::new(16);
        let s = cumulative_matrix(&gl);
        let f: Vec<f64> = gl.nodes.iter().map(|&x| (2.0 * x).sin()).collect();
        for i in 0..16 {
            let got: f64 = (0..16).map(|j| s[i][j] * f[j]).sum();
            let want = ((-2.0f64).cos() - (2.0 * gl.nodes[i]).cos()) / 2.0;
            assert!((got - want).abs() < 1e-13, "i={i}");
        }
    }
}
