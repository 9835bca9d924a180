#![allow(dead_code)]

use num_complex::Complex64;
use prolate_ewald::ewald::{index_set, EwaldPlan, ParticleSystem};
use prolate_ewald::quadrature::GaussRule;
use std::f64::consts::PI;

/// Dense Gaussian elimination with partial pivoting; solves a x = b in place.
pub fn lu_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Chebyshev collocation of the prolate operator on N+1 Lobatto points.
/// The singular endpoints need no boundary rows: (1 - x^2) vanishes there,
/// which enforces regularity. Returns (nodes, psi values, chi).
pub struct Collocation {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub chi: f64,
}

pub fn prolate_collocation(c: f64, n: usize) -> Collocation {
    let x: Vec<f64> = (0..=n).map(|j| (PI * j as f64 / n as f64).cos()).collect();
    let cw: Vec<f64> = (0..=n)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n { 2.0 * s } else { s }
        })
        .collect();
    let mut d = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                d[i][j] = cw[i] / cw[j] / (x[i] - x[j]);
            }
        }
        let s: f64 = d[i].iter().sum();
        d[i][i] = -s;
    }
    // op = -(D diag(1-x^2) D) + c^2 diag(x^2); eigenvalue chi
    let mut op = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..=n {
        for j in 0..=n {
            let mut s = 0.0;
            for k in 0..=n {
                s += d[i][k] * (1.0 - x[k] * x[k]) * d[k][j];
            }
            op[i][j] = -s;
        }
        op[i][i] += c * c * x[i] * x[i];
    }
    let mut v = vec![1.0; n + 1];
    let mut chi = 0.0;
    for _ in 0..80 {
        let w = lu_solve(op.clone(), v.clone());
        let norm = w.iter().map(|t| t * t).sum::<f64>().sqrt();
        let wn: Vec<f64> = w.iter().map(|t| t / norm).collect();
        let num: f64 = (0..=n)
            .map(|i| wn[i] * op[i].iter().zip(&wn).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        chi = num;
        v = wn;
    }
    // Clenshaw-Curtis normalisation, then sign psi(0) > 0.
    let w = clenshaw_curtis(n);
    let l2: f64 = v.iter().zip(&w).map(|(a, b)| a * a * b).sum::<f64>().sqrt();
    let mut values: Vec<f64> = v.iter().map(|t| t / l2).collect();
    let coll = Collocation { nodes: x.clone(), values: values.clone(), chi };
    if coll.eval(0.0) < 0.0 {
        values.iter_mut().for_each(|t| *t = -*t);
    }
    Collocation { nodes: x, values, chi }
}

impl Collocation {
    /// Barycentric interpolation on the Lobatto nodes.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.nodes.len() - 1;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..=n {
            let dx = t - self.nodes[j];
            if dx == 0.0 {
                return self.values[j];
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                w *= 0.5;
            }
            num += w / dx * self.values[j];
            den += w / dx;
        }
        num / den
    }
}

pub fn clenshaw_curtis(n: usize) -> Vec<f64> {
    assert!(n % 2 == 0);
    (0..=n)
        .map(|j| {
            let cj = if j == 0 || j == n { 1.0 } else { 2.0 };
            let mut s = 0.0;
            for k in 1..=n / 2 {
                let b = if k == n / 2 { 1.0 } else { 2.0 };
                s += b / (4.0 * (k * k) as f64 - 1.0) * (2.0 * PI * (k * j) as f64 / n as f64).cos();
            }
            cj / n as f64 * (1.0 - s)
        })
        .collect()
}

/// Adaptive Simpson quadrature.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Composite Gauss-Legendre with `panels` panels of a 20-point rule.
pub fn composite_gauss<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    // 20-point nodes and weights by Newton on P_20, independent of the crate.
    let n = 20;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 1..n {
                let kf = k as f64;
                let p2 = ((2.0 * kf + 1.0) * z * p1 - kf * p0) / (kf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(z);
        weights.push(2.0 / ((1.0 - z * z) * dp * dp));
    }
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let lo = a + h * p as f64;
        for (&x, &w) in nodes.iter().zip(&weights) {
            s += 0.5 * h * w * f(lo + 0.5 * h * (x + 1.0));
        }
    }
    s
}

/// Minimum-image-free brute force: sum over the 27 neighbouring images.
pub fn brute_force_images<F: Fn(f64) -> f64>(pos: &[[f64; 3]], q: &[f64], l: f64, kernel: F) -> Vec<f64> {
    let n = pos.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            for a in -1..=1 {
                for b in -1..=1 {
                    for c in -1..=1 {
                        if i == j && a == 0 && b == 0 && c == 0 {
                            continue;
                        }
                        let d = [
                            pos[i][0] - pos[j][0] + l * a as f64,
                            pos[i][1] - pos[j][1] + l * b as f64,
                            pos[i][2] - pos[j][2] + l * c as f64,
                        ];
                        let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                        out[i] += kernel(r) * q[j];
                    }
                }
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Spherical Bessel j_0..=j_nmax at x > 0: upward recurrence when x > nmax,
/// otherwise Miller's backward recurrence normalised by sum (2n+1) j_n^2 = 1.
pub fn sph_bessel(nmax: usize, x: f64) -> Vec<f64> {
    let mut j = vec![0.0; nmax + 1];
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    if x > nmax as f64 {
        j[0] = j0;
        if nmax >= 1 {
            j[1] = j1;
        }
        for n in 1..nmax {
            j[n + 1] = (2 * n + 1) as f64 / x * j[n] - j[n - 1];
        }
        return j;
    }
    let start = nmax + 60 + x as usize;
    let mut tmp = vec![0.0; start + 1];
    let (mut up, mut cur) = (0.0f64, 1.0f64);
    tmp[start] = cur;
    for n in (1..=start).rev() {
        let down = (2 * n + 1) as f64 / x * cur - up;
        up = cur;
        cur = down;
        tmp[n - 1] = cur;
        if cur.abs() > 1e100 {
            up *= 1e-100;
            cur *= 1e-100;
            tmp.iter_mut().for_each(|t| *t *= 1e-100);
        }
    }
    let norm: f64 = tmp.iter().enumerate().map(|(n, t)| (2 * n + 1) as f64 * t * t).sum::<f64>().sqrt();
    // fix the sign from whichever of j0, j1 is better conditioned
    let sign = if j0.abs() > j1.abs() {
        (tmp[0] * j0).signum()
    } else {
        (tmp[1] * j1).signum()
    };
    for n in 0..=nmax {
        j[n] = sign * tmp[n] / norm;
    }
    j
}

/// Fourier transform of psi(x/alpha)/psi(0) on [-alpha, alpha] from the
/// Legendre coefficients: int P_2j(t) cos(s t) dt = 2 (-1)^j j_2j(s).
pub fn truncated_pswf_hat(coeffs: &[f64], psi0: f64, alpha: f64, omega: f64) -> f64 {
    let x = alpha * omega.abs();
    if x < 1e-8 {
        return 2.0 * alpha * coeffs[0] / psi0;
    }
    let jb = sph_bessel(2 * coeffs.len(), x);
    let s: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(j, a)| if j % 2 == 0 { 2.0 * a * jb[2 * j] } else { -2.0 * a * jb[2 * j] })
        .sum();
    alpha * s / psi0
}

/// Classical Gaussian Ewald potential with sigma = 0.1 L, written out with
/// 125 real-space images and a full Fourier cube; independent of the crate.
pub fn gaussian_ewald_oracle(pos: &[[f64; 3]], q: &[f64], l: f64) -> Vec<f64> {
    let sigma = 0.1 * l;
    let n = pos.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            for a in -2i32..=2 {
                for b in -2i32..=2 {
                    for c in -2i32..=2 {
                        if i == j && a == 0 && b == 0 && c == 0 {
                            continue;
                        }
                        let d = [
                            pos[i][0] - pos[j][0] + l * a as f64,
                            pos[i][1] - pos[j][1] + l * b as f64,
                            pos[i][2] - pos[j][2] + l * c as f64,
                        ];
                        let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                        out[i] += q[j] * libm::erfc(r / sigma) / r;
                    }
                }
            }
        }
        out[i] -= 2.0 / (sigma * PI.sqrt()) * q[i];
    }
    let kmax = 22i64;
    let v = l * l * l;
    for ka in -kmax..=kmax {
        for kb in -kmax..=kmax {
            for kc in -kmax..=kmax {
                let k2 = ka * ka + kb * kb + kc * kc;
                if k2 == 0 {
                    continue;
                }
                let w2 = (2.0 * PI / l).powi(2) * k2 as f64;
                let weight = 4.0 * PI / (w2 * v) * (-0.25 * sigma * sigma * w2).exp();
                if weight < 1e-30 {
                    continue;
                }
                let phase: Vec<f64> = pos
                    .iter()
                    .map(|p| 2.0 * PI / l * (ka as f64 * p[0] + kb as f64 * p[1] + kc as f64 * p[2]))
                    .collect();
                let (mut re, mut im) = (0.0, 0.0);
                for (t, qj) in phase.iter().zip(q) {
                    re += qj * t.cos();
                    im += qj * t.sin();
                }
                for i in 0..n {
                    out[i] += weight * (re * phase[i].cos() + im * phase[i].sin());
                }
            }
        }
    }
    out
}

pub fn structure_factor(sys: &ParticleSystem, k: [i64; 3]) -> Complex64 {
    let l = sys.box_length();
    sys.positions()
        .iter()
        .zip(sys.charges())
        .map(|(x, q)| {
            let t = 2.0 * PI / l * (k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2]);
            q * Complex64::from_polar(1.0, t)
        })
        .sum()
}

/// Far-field coefficients F_k = M_hat(k) rho_hat(k)/V over I_m, band-limited.
pub fn far_coefficients(sys: &ParticleSystem, plan: &EwaldPlan) -> Vec<([i64; 3], Complex64)> {
    let m = plan.grid_size();
    let l = plan.box_length();
    let split = plan.split();
    let mut out = Vec::new();
    for ka in index_set(m) {
        for kb in index_set(m) {
            for kc in index_set(m) {
                let k2 = (ka * ka + kb * kb + kc * kc) as f64;
                let om = 2.0 * PI / l * k2.sqrt();
                if k2 == 0.0 || om > split.band_limit() {
                    continue;
                }
                let f = split.mollified_hat(om).unwrap() / l.powi(3) * structure_factor(sys, [ka, kb, kc]);
                out.push(([ka, kb, kc], f));
            }
        }
    }
    out
}

/// (1/V) ||f - f_h||^2 where f_h interpolates the deconvolved grid of f.
/// Expanding the square, (1/V) ||f_h||^2 is a real-space Gram sum over window
/// autocorrelations, each integrated piecewise with Gauss-Legendre.
pub fn measured_interpolation_error(sys: &ParticleSystem, plan: &EwaldPlan) -> f64 {
    let m = plan.grid_size();
    let l = plan.box_length();
    let h = plan.spacing();
    let w = plan.window();
    let coeffs = far_coefficients(sys, plan);
    let m3 = m * m * m;
    let mut g = vec![0.0; m3];
    for (idx, gl) in g.iter_mut().enumerate() {
        let lv = [idx / (m * m), (idx / m) % m, idx % m];
        let mut s = Complex64::new(0.0, 0.0);
        for (k, f) in &coeffs {
            let ck = w.fourier_coeff(*k).unwrap();
            let t = -2.0 * PI * (k[0] * lv[0] as i64 + k[1] * lv[1] as i64 + k[2] * lv[2] as i64) as f64 / m as f64;
            s += f / ck * Complex64::from_polar(1.0, t);
        }
        *gl = s.re / m3 as f64;
    }
    let a = w.alpha();
    let auto: Vec<f64> = (0..m)
        .map(|d| {
            let mut acc = 0.0;
            for img in -2i64..=2 {
                let sh = d as f64 * h - img as f64 * l;
                let (lo, hi) = ((-a).max(sh - a), a.min(sh + a));
                if hi > lo {
                    let rule = GaussRule::legendre(60).on_interval(lo, hi);
                    acc += rule.integrate(|x| w.window_1d(x) * w.window_1d(x - sh));
                }
            }
            acc / l
        })
        .collect();
    let split3 = |i: usize| [i / (m * m), (i / m) % m, i % m];
    let mut fh2 = 0.0;
    for i in 0..m3 {
        let a3 = split3(i);
        for j in 0..m3 {
            let b3 = split3(j);
            fh2 += g[i] * g[j] * auto[(a3[0] + m - b3[0]) % m] * auto[(a3[1] + m - b3[1]) % m] * auto[(a3[2] + m - b3[2]) % m];
        }
    }
    let f2: f64 = coeffs.iter().map(|(_, f)| f.norm_sqr()).sum();
    fh2 - f2
}

/// Alias sum with |r_i| <= r_max per axis using Bessel-series transforms.
pub fn bessel_alias_sum(sys: &ParticleSystem, plan: &EwaldPlan, r_max: i64) -> f64 {
    let w = plan.window();
    let b = w.basis().unwrap();
    let l = plan.box_length();
    let m = plan.grid_size() as i64;
    let hat = |j: i64| truncated_pswf_hat(b.coeffs(), b.psi_at_zero(), w.alpha(), 2.0 * PI * j as f64 / l);
    let axis = |k: i64| {
        let h0 = hat(k);
        (-r_max..=r_max).map(|r| (hat(k + m * r) / h0).powi(2)).sum::<f64>()
    };
    far_coefficients(sys, plan)
        .iter()
        .map(|(k, f)| f.norm_sqr() * (axis(k[0]) * axis(k[1]) * axis(k[2]) - 1.0))
        .sum()
}
