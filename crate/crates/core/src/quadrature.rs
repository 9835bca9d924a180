//! Gauss rules and Legendre polynomial helpers.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn legendre(n: usize) -> GaussRule {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = (n + 1) / 2;
        for i in 0..half {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_deriv(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    let (_, d) = legendre_with_deriv(n, x);
                    dp = d;
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
        }
        GaussRule { nodes, weights }
    }

    /// Rule mapped to [a, b].
    pub fn on_interval(&self, a: f64, b: f64) -> GaussRule {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        GaussRule {
            nodes: self.nodes.iter().map(|x| mid + half * x).collect(),
            weights: self.weights.iter().map(|w| half * w).collect(),
        }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss-Laguerre rule for weight e^{-x} on [0, inf).
pub fn gauss_laguerre(n: usize) -> GaussRule {
    assert!(n >= 1);
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut z: f64 = 0.0;
    for i in 0..n {
        z = match i {
            0 => 3.0 / (1.0 + 2.4 * nf),
            1 => z + 15.0 / (1.0 + 2.5 * nf),
            _ => {
                let ai = (i - 1) as f64;
                z + (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2])
            }
        };
        for _ in 0..200 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0 - z) * p2 - jf * p3) / (jf + 1.0);
            }
            let pp = nf * (p1 - p2) / z;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs() {
                break;
            }
        }
        // Recompute at the converged node for the weight.
        let mut p1 = 1.0;
        let mut p2 = 0.0;
        for j in 0..n {
            let p3 = p2;
            p2 = p1;
            let jf = j as f64;
            p1 = ((2.0 * jf + 1.0 - z) * p2 - jf * p3) / (jf + 1.0);
        }
        // w_i = x_i / ((n+1)^2 L_{n+1}(x_i)^2)
        let pn1 = ((2.0 * nf + 1.0 - z) * p1 - nf * p2) / (nf + 1.0);
        nodes[i] = z;
        weights[i] = z / ((nf + 1.0) * (nf + 1.0) * pn1 * pn1);
    }
    GaussRule { nodes, weights }
}

/// P_n(x) and P_n'(x).
pub fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    let mut d0 = 0.0;
    let mut d1 = 1.0;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        let d2 = d0 + (2.0 * kf + 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

/// Sum of c_j P_{2j}(x) and its x-derivative by forward recurrence.
pub fn even_legendre_series(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut val = coeffs.first().copied().unwrap_or(0.0);
    let mut der = 0.0;
    let nmax = 2 * coeffs.len().saturating_sub(1);
    let (mut p0, mut p1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    for k in 1..nmax {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        let d2 = d0 + (2.0 * kf + 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
        let n = k + 1;
        if n % 2 == 0 {
            val += coeffs[n / 2] * p1;
            der += coeffs[n / 2] * d1;
        }
    }
    (val, der)
}

/// Clenshaw evaluation of sum_n c_n P_n(x), all degrees.
pub fn legendre_clenshaw(coeffs: &[f64], x: f64) -> f64 {
    let n = coeffs.len();
    if n == 0 {
        return 0.0;
    }
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for k in (1..n).rev() {
        let kf = k as f64;
        // alpha_k = (2k+1)x/(k+1), beta_{k+1} = -(k+1)/(k+2)
        let alpha = (2.0 * kf + 1.0) * x / (kf + 1.0);
        let beta = -(kf + 1.0) / (kf + 2.0);
        let b0 = coeffs[k] + alpha * b1 + beta * b2;
        b2 = b1;
        b1 = b0;
    }
    coeffs[0] + x * b1 - 0.5 * b2
}
