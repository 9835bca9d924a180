//! Prolate spheroidal wave function psi_0^c of order zero.
//!
//! psi is expanded in even Legendre polynomials; the coefficient vector is the
//! lowest eigenvector of a symmetric tridiagonal matrix obtained from the
//! prolate differential equation
//! `((1 - x^2) psi')' + (chi - c^2 x^2) psi = 0`.

use crate::error::{EwaldError, Result};
use crate::quadrature::{even_legendre_series, gauss_laguerre, GaussRule};
use std::f64::consts::PI;

const MAX_INVERSE_ITERS: usize = 50;

#[derive(Debug, Clone)]
pub struct PswfBasis {
    c: f64,
    coeffs: Vec<f64>,
    chi0: f64,
    lambda0: f64,
    k: usize,
    psi_zero: f64,
    psi_one: f64,
}

impl PswfBasis {
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Coefficients a_{2j} of P_{2j}, j = 0..=K.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn chi0(&self) -> f64 {
        self.chi0
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn truncation(&self) -> usize {
        self.k
    }

    pub fn psi_at_zero(&self) -> f64 {
        self.psi_zero
    }

    /// psi(1) computed from a series about the endpoint. Accurate in the
    /// relative sense even when psi(1)/psi(0) is near machine epsilon.
    pub fn psi_at_one(&self) -> f64 {
        self.psi_one
    }

    /// Concentration c lambda^2 / (2 pi).
    pub fn concentration(&self) -> f64 {
        self.c * self.lambda0 * self.lambda0 / (2.0 * PI)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.value(x))
    }

    pub fn eval_deriv(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.value_and_deriv(x).1)
    }

    /// Unchecked evaluation for hot loops; caller guarantees |x| <= 1.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        even_legendre_series(&self.coeffs, x).0
    }

    #[inline]
    pub fn value_and_deriv(&self, x: f64) -> (f64, f64) {
        even_legendre_series(&self.coeffs, x)
    }

    /// Gauss-Legendre rule of the order used for all integrals of psi.
    pub fn quadrature(&self) -> GaussRule {
        GaussRule::legendre(quad_order(self.k))
    }

    /// Evaluator of psi on the whole real line through
    /// psi(s) = (1/lambda) int_{-1}^{1} psi(t) cos(c s t) dt,
    /// accurate for |s| <= s_max.
    pub fn transform(&self, s_max: f64) -> PswfTransform {
        let n = self.k + (0.5 * self.c * s_max.abs()).ceil() as usize + 32;
        let rule = GaussRule::legendre(n).on_interval(0.0, 1.0);
        let weights = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&t, &w)| 2.0 * w * self.value(t) / self.lambda0)
            .collect();
        PswfTransform {
            basis: self.clone(),
            nodes: rule.nodes,
            weights,
            s_max: s_max.abs(),
        }
    }
}

/// psi_0^c extended beyond [-1, 1] by its own Fourier integral.
#[derive(Debug, Clone)]
pub struct PswfTransform {
    basis: PswfBasis,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    s_max: f64,
}

impl PswfTransform {
    pub fn basis(&self) -> &PswfBasis {
        &self.basis
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s.abs() <= 1.0 {
            return self.basis.value(s);
        }
        let cs = self.basis.c * s;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * (cs * t).cos())
            .sum()
    }
}

fn check_unit(x: f64) -> Result<()> {
    if x.abs() > 1.0 || x.is_nan() {
        return Err(EwaldError::Domain(format!("|x| = {} exceeds 1", x.abs())));
    }
    Ok(())
}

pub fn truncation_for(c: f64) -> usize {
    ((1.2 * c).ceil() as usize).max(20)
}

fn quad_order(k: usize) -> usize {
    (2 * k).max(64)
}

/// Build psi_0^c for 0.1 <= c <= 60.
pub fn build_pswf(c: f64, tol: f64) -> Result<PswfBasis> {
    if !(0.1..=60.0).contains(&c) {
        return Err(EwaldError::Domain(format!("bandlimit c = {c} outside [0.1, 60]")));
    }
    if !(tol >= 1e-14) {
        return Err(EwaldError::Domain(format!("tolerance {tol} below 1e-14")));
    }
    build_unchecked(c, tol)
}

pub(crate) fn build_unchecked(c: f64, tol: f64) -> Result<PswfBasis> {
    let k = truncation_for(c);
    let (diag, off) = tridiagonal(c, k + 1);
    let mut chi = smallest_eigenvalue(&diag, &off, tol.min(1e-13));
    let mut b = inverse_iteration(&diag, &off, chi)?;
    chi = rayleigh(&diag, &off, &b);

    // Orthonormal Legendre basis has norm sqrt(k + 1/2); rescale.
    let mut coeffs: Vec<f64> = b
        .iter_mut()
        .enumerate()
        .map(|(i, bi)| *bi * (2.0 * i as f64 + 0.5).sqrt())
        .collect();
    let mut psi_zero = even_legendre_series(&coeffs, 0.0).0;
    if psi_zero < 0.0 {
        coeffs.iter_mut().for_each(|a| *a = -*a);
        psi_zero = -psi_zero;
    }
    let rule = GaussRule::legendre(quad_order(k));
    let integral = rule.integrate(|x| even_legendre_series(&coeffs, x).0);
    let lambda0 = integral / psi_zero;
    let psi_one = endpoint_value(c, chi, &coeffs);
    Ok(PswfBasis {
        c,
        coeffs,
        chi0: chi,
        lambda0,
        k,
        psi_zero,
        psi_one,
    })
}

/// Tridiagonal matrix of the prolate operator in the orthonormal even-Legendre
/// basis, degrees 0, 2, ..., 2(n-1).
fn tridiagonal(c: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let c2 = c * c;
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n {
        let k = 2.0 * i as f64;
        diag.push(k * (k + 1.0) + c2 * (2.0 * k * (k + 1.0) - 1.0) / ((2.0 * k + 3.0) * (2.0 * k - 1.0)));
        if i + 1 < n {
            off.push(
                c2 * (k + 1.0) * (k + 2.0)
                    / ((2.0 * k + 3.0) * ((2.0 * k + 1.0) * (2.0 * k + 5.0)).sqrt()),
            );
        }
    }
    (diag, off)
}

/// Number of eigenvalues strictly below x (Sturm count via LDL^T pivots).
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = diag[0] - x;
    if d < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let denom = if d == 0.0 { f64::EPSILON * (1.0 + x.abs()) } else { d };
        d = diag[i] - x - off[i - 1] * off[i - 1] / denom;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

fn smallest_eigenvalue(diag: &[f64], off: &[f64], tol: f64) -> f64 {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let scale = hi.abs().max(lo.abs()).max(1.0);
    while hi - lo > tol * scale {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Solve (T - mu I) y = r for symmetric tridiagonal T (Thomas algorithm;
/// the shift sits just below the spectrum so the system is positive definite).
fn shifted_solve(diag: &[f64], off: &[f64], mu: f64, r: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut piv = diag[0] - mu;
    cp[0] = if n > 1 { off[0] / piv } else { 0.0 };
    dp[0] = r[0] / piv;
    for i in 1..n {
        piv = diag[i] - mu - off[i - 1] * cp[i - 1];
        if i + 1 < n {
            cp[i] = off[i] / piv;
        }
        dp[i] = (r[i] - off[i - 1] * dp[i - 1]) / piv;
    }
    let mut y = vec![0.0; n];
    y[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        y[i] = dp[i] - cp[i] * y[i + 1];
    }
    y
}

fn inverse_iteration(diag: &[f64], off: &[f64], chi: f64) -> Result<Vec<f64>> {
    let n = diag.len();
    let scale = chi.abs().max(1.0);
    let mut shifts = [1e-10, 1e-8, 1e-6].iter();
    while let Some(rel) = shifts.next() {
        let mu = chi - rel * scale;
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        normalize(&mut v);
        for _ in 0..MAX_INVERSE_ITERS {
            let mut w = shifted_solve(diag, off, mu, &v);
            if w.iter().any(|x| !x.is_finite()) {
                break;
            }
            normalize(&mut w);
            let dot: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
            if dot < 0.0 {
                w.iter_mut().for_each(|x| *x = -*x);
            }
            // ||w - v|| equals the angle to first order and, unlike
            // sqrt(1 - dot^2), does not bottom out at sqrt(eps).
            let angle = w.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            v = w;
            if angle < 1e-14 {
                return Ok(v);
            }
        }
    }
    Err(EwaldError::NoConvergence(format!(
        "inverse iteration for chi = {chi} failed after retries"
    )))
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

fn rayleigh(diag: &[f64], off: &[f64], v: &[f64]) -> f64 {
    let n = diag.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut tv = diag[i] * v[i];
        if i > 0 {
            tv += off[i - 1] * v[i - 1];
        }
        if i + 1 < n {
            tv += off[i] * v[i + 1];
        }
        acc += v[i] * tv;
    }
    acc
}

/// psi(1) from the Frobenius series about x = 1 matched at x = 1/2.
fn endpoint_value(c: f64, chi: f64, coeffs: &[f64]) -> f64 {
    let c2 = c * c;
    let t = 0.5;
    let mut d = [0.0f64; 3]; // d_n, d_{n-1}, d_{n-2}
    d[0] = 1.0;
    let mut sum = 1.0;
    let mut tn = 1.0;
    for n in 0..4000usize {
        let nf = n as f64;
        let next = (nf * (nf + 1.0) * d[0] - (chi - c2) * d[0] - 2.0 * c2 * d[1] + c2 * d[2])
            / (2.0 * (nf + 1.0) * (nf + 1.0));
        d = [next, d[0], d[1]];
        tn *= t;
        let term = next * tn;
        sum += term;
        if n > 8 && term.abs() < 1e-18 * sum.abs() && (d[1] * tn / t).abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    even_legendre_series(coeffs, 1.0 - t).0 / sum
}

/// 1 - mu_0(c) with mu_0 = c lambda_0^2 / (2 pi), free of cancellation.
///
/// Uses d mu/dc = 2 mu psi_c(1)^2 / c, so 1 - mu(c) = int_c^inf 2 mu psi_t(1)^2/t dt.
pub fn concentration_deficit(c: f64) -> Result<f64> {
    if !(0.1..=60.0).contains(&c) {
        return Err(EwaldError::Domain(format!("bandlimit c = {c} outside [0.1, 60]")));
    }
    let rule = gauss_laguerre(24);
    let mut acc = 0.0;
    for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
        let t = c + 0.5 * s;
        let b = build_unchecked(t, 1e-14)?;
        let p1 = b.psi_at_one();
        // ln of mu psi^2 / t * e^{s}
        let log_term = b.concentration().ln() + 2.0 * p1.abs().ln() - t.ln() + s;
        acc += w * log_term.exp();
    }
    Ok(acc)
}

/// E(c) = (2/(c psi(0))) sqrt(2 pi/lambda^2 - c) evaluated as written.
/// Loses all accuracy for c above roughly 17.
pub fn exact_e_direct(basis: &PswfBasis) -> f64 {
    let c = basis.c;
    let l = basis.lambda0;
    let inner = (2.0 * PI / (l * l) - c).max(0.0);
    2.0 / (c * basis.psi_zero) * inner.sqrt()
}

/// E(c) through the concentration deficit; accurate on the whole range.
pub fn exact_e(basis: &PswfBasis) -> Result<f64> {
    let c = basis.c;
    let deficit = concentration_deficit(c)?;
    let mu = 1.0 - deficit;
    Ok(2.0 / (c * basis.psi_zero) * (c * deficit / mu).sqrt())
}

/// Curve-fit constants; one source of truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveFitConstants {
    pub a_s: f64,
    pub a_w: f64,
    pub psi0_at0: (f64, f64),
    pub psi0_at1: (f64, f64),
    pub ratio10: (f64, f64),
    pub efit: (f64, f64),
}

pub const CURVE_FITS: CurveFitConstants = CurveFitConstants {
    a_s: 6.91,
    a_w: 2.78,
    psi0_at0: (0.736, 0.2548),
    psi0_at1: (2.540, 0.75),
    ratio10: (3.424, 0.5),
    efit: (6.906, -0.5),
};

pub const FIT_WINDOW: (f64, f64) = (7.0, 35.0);

/// Fitted value plus a flag set when c lies outside the fitted window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitValue {
    pub value: f64,
    pub extrapolated: bool,
}

fn fitted(value: f64, c: f64) -> FitValue {
    FitValue {
        value,
        extrapolated: !(FIT_WINDOW.0..=FIT_WINDOW.1).contains(&c),
    }
}

pub fn fit_psi0_at0(c: f64) -> FitValue {
    let (a, p) = CURVE_FITS.psi0_at0;
    fitted(a * c.powf(p), c)
}

pub fn fit_psi0_at1(c: f64) -> FitValue {
    let (a, p) = CURVE_FITS.psi0_at1;
    fitted(a * c.powf(p) * (-c).exp(), c)
}

pub fn fit_ratio10(c: f64) -> FitValue {
    let (a, p) = CURVE_FITS.ratio10;
    fitted(a * c.powf(p) * (-c).exp(), c)
}

pub fn fit_e(c: f64) -> FitValue {
    let (a, p) = CURVE_FITS.efit;
    fitted(a * c.powf(p) * (-c).exp(), c)
}

/// c^{-1/2} e^{-c} scaled by A_s: split-error amplitude.
pub fn fit_split_amp(c: f64) -> FitValue {
    fitted(CURVE_FITS.a_s * c.powf(-0.5) * (-c).exp(), c)
}

/// c^{1/2} e^{-c} scaled by A_w: window aliasing amplitude.
pub fn fit_alias_amp(c: f64) -> FitValue {
    fitted(CURVE_FITS.a_w * c.sqrt() * (-c).exp(), c)
}
