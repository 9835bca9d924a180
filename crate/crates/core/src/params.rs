//! Error models, rigorous bounds and automatic parameter selection for the
//! PSWF/PSWF method.

use crate::error::{EwaldError, Result};
use crate::ewald::fast::EwaldPlan;
use crate::ewald::system::ParticleSystem;
use crate::ewald::index_set;
use crate::pswf::{build_pswf, concentration_deficit, fit_alias_amp, fit_e, fit_split_amp, FitValue, CURVE_FITS};
use crate::split::make_pswf_split;
use crate::window::WindowSpec;
use num_complex::Complex64;
use std::f64::consts::{E, PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambertBranch {
    W0,
    Wm1,
}

/// Real branches of the Lambert W function, w e^w = x.
pub fn lambert_w(branch: LambertBranch, x: f64) -> Result<f64> {
    let branch_pt = -1.0 / E;
    if !x.is_finite() || x < branch_pt - 1e-16 {
        return Err(EwaldError::Domain(format!("Lambert W undefined at x = {x}")));
    }
    if branch == LambertBranch::Wm1 && x >= 0.0 {
        return Err(EwaldError::Domain(format!("W_-1 needs -1/e <= x < 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let p2 = 2.0 * (E * x + 1.0);
    if p2 <= 0.0 {
        return Ok(-1.0);
    }
    let p = p2.sqrt();
    let mut w = match branch {
        LambertBranch::W0 if p < 0.5 => -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p,
        LambertBranch::W0 if x < 3.0 => x.ln_1p() * (1.0 - x.ln_1p() / (2.0 + x.ln_1p())),
        LambertBranch::W0 => {
            let l1 = x.ln();
            let l2 = l1.ln();
            l1 - l2 + l2 / l1
        }
        LambertBranch::Wm1 if p < 0.5 => -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p * p * p,
        LambertBranch::Wm1 => {
            let l1 = (-x).ln();
            let l2 = (-l1).ln();
            l1 - l2 + l2 / l1
        }
    };
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= dw;
        if dw.abs() <= 4.0 * f64::EPSILON * w.abs().max(1e-300) {
            break;
        }
    }
    Ok(w)
}

/// Inputs shared by the error models: tolerance, cutoff, box and charge norm.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ErrorModelInput {
    pub eps: f64,
    pub r_c: f64,
    pub l: f64,
    pub rho_norm: f64,
    /// Clustering constant with |rho_hat(k)|^2 <= C_rho ||rho||^2.
    pub c_rho: f64,
}

impl ErrorModelInput {
    pub fn new(eps: f64, r_c: f64, l: f64, rho_norm: f64) -> Result<ErrorModelInput> {
        let inp = ErrorModelInput {
            eps,
            r_c,
            l,
            rho_norm,
            c_rho: 1.0,
        };
        inp.validate()?;
        Ok(inp)
    }

    pub fn for_system(eps: f64, r_c: f64, sys: &ParticleSystem) -> Result<ErrorModelInput> {
        ErrorModelInput::new(eps, r_c, sys.box_length(), sys.charge_norm())
    }

    pub fn with_c_rho(mut self, c_rho: f64) -> Result<ErrorModelInput> {
        self.c_rho = c_rho;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(EwaldError::Config(format!("tolerance {} must lie in (0, 1)", self.eps)));
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(EwaldError::Config(format!("box length {} must be positive", self.l)));
        }
        if !(self.r_c > 0.0 && self.r_c < 0.5 * self.l) {
            return Err(EwaldError::Config(format!(
                "cutoff {} must lie in (0, L/2) with L = {}",
                self.r_c, self.l
            )));
        }
        if !(self.rho_norm > 0.0 && self.rho_norm.is_finite()) {
            return Err(EwaldError::Config(format!("charge norm {} must be positive", self.rho_norm)));
        }
        if !(self.c_rho > 0.0 && self.c_rho.is_finite()) {
            return Err(EwaldError::Config(format!("C_rho = {} must be positive", self.c_rho)));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.l.powi(3)
    }

    fn b_s(&self) -> f64 {
        CURVE_FITS.a_s * self.rho_norm * self.r_c.sqrt() / self.volume().sqrt()
    }
}

/// Predicted RMS split error, ||rho|| sqrt(r_c/V) A_s c^{-1/2} e^{-c}.
pub fn split_error_model(c_s: f64, inp: &ErrorModelInput) -> FitValue {
    let amp = fit_split_amp(c_s);
    FitValue {
        value: inp.rho_norm * (inp.r_c / inp.volume()).sqrt() * amp.value,
        extrapolated: amp.extrapolated,
    }
}

/// Predicted RMS aliasing error, ||rho|| sqrt(L/V) A_w c^{1/2} e^{-c}.
pub fn alias_error_model(c_w: f64, inp: &ErrorModelInput) -> FitValue {
    let amp = fit_alias_amp(c_w);
    FitValue {
        value: inp.rho_norm * (inp.l / inp.volume()).sqrt() * amp.value,
        extrapolated: amp.extrapolated,
    }
}

/// Inverse of [`split_error_model`]: the c_s whose predicted error is `err`.
pub fn select_cs(err: f64, inp: &ErrorModelInput) -> Result<f64> {
    let x = 2.0 * (inp.b_s() / err).powi(2);
    Ok(0.5 * lambert_w(LambertBranch::W0, x)?)
}

/// c_w balancing the window model against the split model at c_s.
pub fn select_cw(c_s: f64, inp: &ErrorModelInput) -> Result<f64> {
    let b_w = CURVE_FITS.a_s / CURVE_FITS.a_w * (inp.r_c / inp.l).sqrt();
    let x = -2.0 * b_w * b_w * (-2.0 * c_s).exp() / c_s;
    if x < -1.0 / E {
        return Err(EwaldError::Config(format!(
            "no window shape balances the split error at c_s = {c_s}; tighten the tolerance or reduce r_c"
        )));
    }
    Ok(-0.5 * lambert_w(LambertBranch::Wm1, x)?)
}

/// Which evaluation of 2 pi/lambda^2 - c_s a bound used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundPath {
    Exact,
    CurveFit,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SplitBound {
    /// Bound on the squared RMS error.
    pub value: f64,
    pub c_star: f64,
    pub path: BoundPath,
}

/// Above this c_s the eigenvalue expression is replaced by the E(c) fit.
pub const EXACT_BOUND_MAX_CS: f64 = 17.0;

/// Rigorous bound on the squared RMS split error of the band-truncated far
/// field on an m-grid.
pub fn rigorous_split_bound(c_s: f64, r_c: f64, m: usize, l: f64, inp: &ErrorModelInput) -> Result<SplitBound> {
    let w_max = c_s / r_c;
    let w_star = w_max - 3f64.sqrt() * PI / l;
    if !(w_star > 0.0) {
        return Err(EwaldError::Domain(format!(
            "omega_* = {w_star} must be positive; c_s/r_c is too small for L = {l}"
        )));
    }
    if PI * m as f64 / l < w_max * (1.0 - 1e-12) {
        return Err(EwaldError::Domain(format!(
            "grid m = {m} does not resolve the split band {w_max}"
        )));
    }
    let basis = build_pswf(c_s, 1e-14)?;
    let psi0 = basis.psi_at_zero();
    let lam2 = basis.lambda0().powi(2);
    // tail = 2 pi/lambda^2 - c_s and ratio = c_s lambda^2 / (2 pi - c_s lambda^2)
    let (tail, ratio, path) = if c_s <= EXACT_BOUND_MAX_CS {
        let deficit = concentration_deficit(c_s)?;
        let tail = 2.0 * PI * deficit / lam2;
        (tail, (1.0 - deficit) / deficit, BoundPath::Exact)
    } else {
        let e = fit_e(c_s).value;
        let tail = (0.5 * e * c_s * psi0).powi(2);
        (tail, c_s / tail, BoundPath::CurveFit)
    };
    let c_star = 1.0 + (w_max / w_star).powi(2) * ratio;
    let value = 4.0 * inp.c_rho * c_star * r_c * inp.rho_norm.powi(2) / (inp.volume() * c_s * c_s * psi0 * psi0) * tail;
    Ok(SplitBound { value, c_star, path })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AliasBound {
    /// Bound on the squared RMS interpolation error, |r| <= r_max.
    pub value: f64,
    /// Contribution of the outermost shell |r|_inf = r_max, a remainder estimate.
    pub last_shell: f64,
}

/// Largest grid for which the double sum is evaluated.
pub const ALIAS_BOUND_MAX_M: usize = 32;

/// Aliasing bound with the clustering constant in place of |rho_hat|^2.
pub fn rigorous_alias_bound(plan: &EwaldPlan, inp: &ErrorModelInput) -> Result<AliasBound> {
    rigorous_alias_bound_truncated(plan, inp, 3)
}

pub fn rigorous_alias_bound_truncated(plan: &EwaldPlan, inp: &ErrorModelInput, r_max: i64) -> Result<AliasBound> {
    let weight = inp.c_rho * inp.rho_norm.powi(2);
    alias_sum(plan, r_max, |_| weight)
}

/// Exact aliasing error of the interpolation step for a given system:
/// sum_k |f_k|^2 sum_{r != 0} c_{k+mr}^2 / c_k^2, truncated at |r| <= r_max.
pub fn aliasing_error_sum(sys: &ParticleSystem, plan: &EwaldPlan, r_max: i64) -> Result<AliasBound> {
    let m = plan.grid_size();
    let ks = index_set(m);
    let l = plan.box_length();
    // separable phases for the structure factor
    let phases: Vec<[Vec<Complex64>; 3]> = sys
        .positions()
        .iter()
        .map(|p| p.map(|x| ks.iter().map(|&k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 * x / l)).collect()))
        .collect();
    let half = (m / 2) as i64;
    let q = sys.charges();
    alias_sum(plan, r_max, |k| {
        let idx = k.map(|ki| (ki + half) as usize);
        let mut s = Complex64::new(0.0, 0.0);
        for (j, ph) in phases.iter().enumerate() {
            s += q[j] * ph[0][idx[0]] * ph[1][idx[1]] * ph[2][idx[2]];
        }
        s.norm_sqr()
    })
}

fn alias_sum<F: FnMut([i64; 3]) -> f64>(plan: &EwaldPlan, r_max: i64, mut rho2: F) -> Result<AliasBound> {
    let m = plan.grid_size();
    if m > ALIAS_BOUND_MAX_M {
        return Err(EwaldError::Domain(format!(
            "aliasing sum limited to m <= {ALIAS_BOUND_MAX_M}, got {m}"
        )));
    }
    let l = plan.box_length();
    let v = l.powi(3);
    let split = plan.split();
    let window = plan.window();
    let band = split.band_limit();
    let ks = index_set(m);
    let mi = m as i64;
    // ratio[k][r] = (phi_hat(k + m r) / phi_hat(k))^2, r in -r_max..=r_max
    let nr = (2 * r_max + 1) as usize;
    let ratio: Vec<Vec<f64>> = ks
        .iter()
        .map(|&k| {
            let ck = window.window_hat_extended(2.0 * PI * k as f64 / l);
            (-r_max..=r_max)
                .map(|r| (window.window_hat_extended(2.0 * PI * (k + mi * r) as f64 / l) / ck).powi(2))
                .collect()
        })
        .collect();
    let (mut total, mut shell) = (0.0, 0.0);
    for (a, &ka) in ks.iter().enumerate() {
        for (b, &kb) in ks.iter().enumerate() {
            for (c, &kc) in ks.iter().enumerate() {
                let k2 = (ka * ka + kb * kb + kc * kc) as f64;
                if k2 == 0.0 {
                    continue;
                }
                let omega = 2.0 * PI / l * k2.sqrt();
                if omega > band * (1.0 + 1e-12) {
                    continue;
                }
                let mh = split.mollified_hat(omega.min(band))?;
                let f2 = (mh / v).powi(2) * rho2([ka, kb, kc]);
                let (mut s, mut outer) = (0.0, 0.0);
                for i in 0..nr {
                    for j in 0..nr {
                        for t in 0..nr {
                            if i as i64 == r_max && j as i64 == r_max && t as i64 == r_max {
                                continue;
                            }
                            let term = ratio[a][i] * ratio[b][j] * ratio[c][t];
                            s += term;
                            let edge = [i, j, t].iter().any(|&x| x == 0 || x == nr - 1);
                            if edge {
                                outer += term;
                            }
                        }
                    }
                }
                total += f2 * s;
                shell += f2 * outer;
            }
        }
    }
    Ok(AliasBound {
        value: total,
        last_shell: shell,
    })
}

/// Largest |rho_hat(k)|^2 / ||rho||^2 over k in I_m \ {0}.
pub fn empirical_c_rho(sys: &ParticleSystem, m: usize) -> f64 {
    let ks = index_set(m);
    let l = sys.box_length();
    let phases: Vec<[Vec<Complex64>; 3]> = sys
        .positions()
        .iter()
        .map(|p| p.map(|x| ks.iter().map(|&k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 * x / l)).collect()))
        .collect();
    let q = sys.charges();
    let norm2 = sys.charge_norm().powi(2);
    let mut best: f64 = 0.0;
    for a in 0..ks.len() {
        for b in 0..ks.len() {
            for c in 0..ks.len() {
                if ks[a] == 0 && ks[b] == 0 && ks[c] == 0 {
                    continue;
                }
                let mut s = Complex64::new(0.0, 0.0);
                for (j, ph) in phases.iter().enumerate() {
                    s += q[j] * ph[0][a] * ph[1][b] * ph[2][c];
                }
                best = best.max(s.norm_sqr() / norm2);
            }
        }
    }
    best
}

/// Output of the automatic parameter selection.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EwaldParameters {
    pub c_s: f64,
    pub c_w: f64,
    pub m: usize,
    #[serde(rename = "P")]
    pub p: usize,
    pub alpha: f64,
    pub r_c: f64,
    pub l: f64,
    pub predicted_split_err: f64,
    pub predicted_alias_err: f64,
    /// Set when c_s or c_w lies outside the range the models were fitted on.
    pub extrapolated: bool,
}

/// Parameters for the PSWF/PSWF method meeting the RMS tolerance `inp.eps`.
pub fn select_parameters(inp: &ErrorModelInput) -> Result<EwaldParameters> {
    inp.validate()?;
    let c_s = select_cs(inp.eps, inp)?;
    if c_s < 1.0 {
        return Err(EwaldError::Config(format!(
            "tolerance {} is loose enough that c_s = {c_s:.3} < 1; request a smaller tolerance",
            inp.eps
        )));
    }
    let c_w = select_cw(c_s, inp)?;
    let alpha = inp.r_c * c_w / c_s;
    let m = (inp.l * c_s / (PI * inp.r_c) - 1e-9).ceil() as usize;
    let p = (2.0 * alpha * m as f64 / inp.l - 1e-9).ceil() as usize;
    if p > m {
        return Err(EwaldError::Config(format!(
            "selected window support P = {p} exceeds grid size m = {m}; increase r_c relative to L"
        )));
    }
    let se = split_error_model(c_s, inp);
    let ae = alias_error_model(c_w, inp);
    Ok(EwaldParameters {
        c_s,
        c_w,
        m,
        p,
        alpha,
        r_c: inp.r_c,
        l: inp.l,
        predicted_split_err: se.value,
        predicted_alias_err: ae.value,
        extrapolated: se.extrapolated || ae.extrapolated,
    })
}

impl EwaldPlan {
    /// Build the PSWF/PSWF plan for selected parameters. The grid must agree
    /// with c_s L/(pi r_c) to within one point.
    pub fn for_parameters(params: &EwaldParameters) -> Result<EwaldPlan> {
        let target = params.l * params.c_s / (PI * params.r_c);
        if (target - params.m as f64).abs() > 1.0 {
            return Err(EwaldError::Config(format!(
                "grid m = {} inconsistent with c_s L/(pi r_c) = {target:.3}",
                params.m
            )));
        }
        let split = make_pswf_split(params.c_s, params.r_c)?;
        let window = WindowSpec::pswf_with(params.c_w, params.alpha, params.m, params.l)?;
        EwaldPlan::new(split, window)
    }
}

/// Map a system onto the unit box. Potentials computed there with cutoff
/// r_c / L are multiplied by the returned factor 1/L.
pub fn nondimensionalize(sys: &ParticleSystem) -> (ParticleSystem, f64) {
    let l = sys.box_length();
    (sys.rescaled(1.0), 1.0 / l)
}
