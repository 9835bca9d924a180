//! Spreading/interpolation windows: PSWF, truncated Gaussian and B-spline.

use crate::error::{EwaldError, Result};
use crate::pswf::{build_pswf, PswfBasis, PswfTransform};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowFamily {
    Pswf,
    Gaussian,
    Bspline,
}

#[derive(Debug, Clone)]
pub struct WindowSpec {
    family: WindowFamily,
    alpha: f64,
    p: usize,
    shape: f64,
    m: usize,
    l: f64,
    h: f64,
    transform: Option<PswfTransform>,
}

/// Default Gaussian shape for support P (bench tuning, not a derived value).
pub fn default_gaussian_shape(p: usize) -> f64 {
    0.95 * 0.95 * PI * p as f64 / 2.0
}

fn check_grid(p: usize, m: usize, l: f64) -> Result<()> {
    if p == 0 || m == 0 {
        return Err(EwaldError::Config(format!("support P = {p} and grid m = {m} must be positive")));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(EwaldError::Config(format!("box length {l} must be positive")));
    }
    Ok(())
}

impl WindowSpec {
    /// PSWF window with c_w = pi P/2 and alpha = P h/2, so c_w/alpha = pi m/L.
    pub fn pswf(p: usize, m: usize, l: f64) -> Result<WindowSpec> {
        check_grid(p, m, l)?;
        let h = l / m as f64;
        Self::pswf_with(PI * p as f64 / 2.0, p as f64 * h / 2.0, m, l)
    }

    /// PSWF window with explicit shape and half-width.
    pub fn pswf_with(c_w: f64, alpha: f64, m: usize, l: f64) -> Result<WindowSpec> {
        let h = l / m as f64;
        let p = ((2.0 * alpha / h) - 1e-9).ceil().max(1.0) as usize;
        check_grid(p, m, l)?;
        let basis = build_pswf(c_w, 1e-14)?;
        // Arguments alpha omega / c_w for |omega| up to sqrt(3) * 4 pi m / L cover
        // every alias the analysis code asks for.
        let s_max = alpha * (8.0 * PI * m as f64 / l) / c_w;
        Ok(WindowSpec {
            family: WindowFamily::Pswf,
            alpha,
            p,
            shape: c_w,
            m,
            l,
            h,
            transform: Some(basis.transform(s_max.max(1.0))),
        })
    }

    pub fn gaussian(p: usize, m: usize, l: f64, c_g: f64) -> Result<WindowSpec> {
        check_grid(p, m, l)?;
        if !(c_g > 0.0) {
            return Err(EwaldError::Config(format!("Gaussian shape {c_g} must be positive")));
        }
        let h = l / m as f64;
        Ok(WindowSpec {
            family: WindowFamily::Gaussian,
            alpha: p as f64 * h / 2.0,
            p,
            shape: c_g,
            m,
            l,
            h,
            transform: None,
        })
    }

    pub fn bspline(p: usize, m: usize, l: f64) -> Result<WindowSpec> {
        check_grid(p, m, l)?;
        let h = l / m as f64;
        Ok(WindowSpec {
            family: WindowFamily::Bspline,
            alpha: p as f64 * h / 2.0,
            p,
            shape: p as f64,
            m,
            l,
            h,
            transform: None,
        })
    }

    pub fn new(family: WindowFamily, p: usize, m: usize, l: f64) -> Result<WindowSpec> {
        match family {
            WindowFamily::Pswf => Self::pswf(p, m, l),
            WindowFamily::Gaussian => Self::gaussian(p, m, l, default_gaussian_shape(p)),
            WindowFamily::Bspline => Self::bspline(p, m, l),
        }
    }

    pub fn family(&self) -> WindowFamily {
        self.family
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn support(&self) -> usize {
        self.p
    }
    pub fn shape(&self) -> f64 {
        self.shape
    }
    pub fn grid_size(&self) -> usize {
        self.m
    }
    pub fn box_length(&self) -> f64 {
        self.l
    }
    pub fn spacing(&self) -> f64 {
        self.h
    }
    pub fn basis(&self) -> Option<&PswfBasis> {
        self.transform.as_ref().map(|t| t.basis())
    }

    /// Band edge c_w/alpha of the PSWF window (infinite otherwise).
    pub fn band_limit(&self) -> f64 {
        match self.family {
            WindowFamily::Pswf => self.shape / self.alpha,
            _ => f64::INFINITY,
        }
    }

    pub fn window_1d(&self, x: f64) -> f64 {
        let x = x.abs();
        if x > self.alpha {
            return 0.0;
        }
        match self.family {
            WindowFamily::Pswf => {
                let b = self.basis().unwrap();
                b.value(x / self.alpha) / b.psi_at_zero()
            }
            WindowFamily::Gaussian => {
                let u = x / self.alpha;
                (-self.shape * u * u).exp()
            }
            WindowFamily::Bspline => cardinal_bspline(self.p, x / self.h + 0.5 * self.p as f64),
        }
    }

    pub fn window_deriv_1d(&self, x: f64) -> f64 {
        let sign = if x < 0.0 { -1.0 } else { 1.0 };
        let x = x.abs();
        if x > self.alpha {
            return 0.0;
        }
        let d = match self.family {
            WindowFamily::Pswf => {
                let b = self.basis().unwrap();
                b.value_and_deriv(x / self.alpha).1 / (self.alpha * b.psi_at_zero())
            }
            WindowFamily::Gaussian => {
                let u = x / self.alpha;
                -2.0 * self.shape * u / self.alpha * (-self.shape * u * u).exp()
            }
            WindowFamily::Bspline => {
                let u = x / self.h + 0.5 * self.p as f64;
                (cardinal_bspline(self.p - 1, u) - cardinal_bspline(self.p - 1, u - 1.0)) / self.h
            }
        };
        sign * d
    }

    /// Value and derivative together (shared Legendre recurrence for PSWF).
    #[inline]
    pub fn window_and_deriv_1d(&self, x: f64) -> (f64, f64) {
        match self.family {
            WindowFamily::Pswf => {
                let ax = x.abs();
                if ax > self.alpha {
                    return (0.0, 0.0);
                }
                let b = self.basis().unwrap();
                let (v, d) = b.value_and_deriv(ax / self.alpha);
                let s = if x < 0.0 { -1.0 } else { 1.0 };
                (v / b.psi_at_zero(), s * d / (self.alpha * b.psi_at_zero()))
            }
            _ => (self.window_1d(x), self.window_deriv_1d(x)),
        }
    }

    /// Free-space Fourier transform of the 1D window. In-band only for PSWF.
    pub fn window_hat_1d(&self, omega: f64) -> Result<f64> {
        if self.family == WindowFamily::Pswf {
            let band = self.band_limit();
            if omega.abs() > band * (1.0 + 1e-12) {
                return Err(EwaldError::OutOfBand { omega: omega.abs(), band });
            }
        }
        Ok(self.window_hat_extended(omega))
    }

    /// Fourier transform at any frequency (PSWF beyond the band via quadrature).
    pub fn window_hat_extended(&self, omega: f64) -> f64 {
        let w = omega.abs();
        match self.family {
            WindowFamily::Pswf => {
                let t = self.transform.as_ref().unwrap();
                let b = t.basis();
                self.alpha * b.lambda0() * t.eval(self.alpha * w / self.shape) / b.psi_at_zero()
            }
            WindowFamily::Gaussian => {
                let a = self.alpha;
                a * (PI / self.shape).sqrt() * (-w * w * a * a / (4.0 * self.shape)).exp()
            }
            WindowFamily::Bspline => {
                let z = 0.5 * w * self.h;
                let sinc = if z == 0.0 { 1.0 } else { z.sin() / z };
                self.h * sinc.powi(self.p as i32)
            }
        }
    }

    /// Per-dimension deconvolution weight for index k: phi_hat(2 pi k/L)/h for
    /// PSWF and Gaussian, the DFT of the grid samples of B_P for B-spline.
    pub fn deconvolution_1d(&self, k: i64) -> f64 {
        match self.family {
            WindowFamily::Bspline => {
                let half = self.p as i64 / 2 + 1;
                let mut acc = 0.0;
                for l in -half..=half {
                    let b = self.window_1d(l as f64 * self.h);
                    acc += b * (2.0 * PI * (k * l) as f64 / self.m as f64).cos();
                }
                acc
            }
            _ => self.window_hat_extended(2.0 * PI * k as f64 / self.l) / self.h,
        }
    }

    pub fn window_3d(&self, x: [f64; 3]) -> f64 {
        x.iter().map(|&xi| self.window_1d(xi)).product()
    }

    pub fn window_grad_3d(&self, x: [f64; 3]) -> [f64; 3] {
        let v: Vec<(f64, f64)> = x.iter().map(|&xi| self.window_and_deriv_1d(xi)).collect();
        [
            v[0].1 * v[1].0 * v[2].0,
            v[0].0 * v[1].1 * v[2].0,
            v[0].0 * v[1].0 * v[2].1,
        ]
    }

    /// Fourier series coefficient of the periodised window,
    /// (1/V) prod_i phi_hat(2 pi k_i / L). For B-spline the SPME coefficient
    /// (1/V) prod_i h sigma(k_i) is returned instead.
    pub fn fourier_coeff(&self, k: [i64; 3]) -> Result<f64> {
        let v = self.l.powi(3);
        let mut prod = 1.0 / v;
        for &ki in &k {
            prod *= match self.family {
                WindowFamily::Bspline => self.h * self.deconvolution_1d(ki),
                _ => self.window_hat_1d(2.0 * PI * ki as f64 / self.l)?,
            };
        }
        Ok(prod)
    }

    /// Same as `fourier_coeff` but for any integer k (aliases included).
    pub fn fourier_coeff_extended(&self, k: [i64; 3]) -> f64 {
        let v = self.l.powi(3);
        k.iter()
            .map(|&ki| self.window_hat_extended(2.0 * PI * ki as f64 / self.l))
            .product::<f64>()
            / v
    }

    /// Grid indices l (unwrapped) with |x - h l| <= alpha.
    #[inline]
    pub fn support_range(&self, x: f64) -> (i64, i64) {
        let lo = ((x - self.alpha) / self.h).ceil() as i64;
        let hi = ((x + self.alpha) / self.h).floor() as i64;
        (lo, hi)
    }
}

/// Cardinal B-spline M_n supported on [0, n], by the Cox-de Boor recursion.
pub fn cardinal_bspline(n: usize, u: f64) -> f64 {
    if n == 0 || u <= 0.0 || u >= n as f64 {
        return 0.0;
    }
    // vals[j] = M_1(u - j)
    let mut vals: Vec<f64> = (0..n)
        .map(|j| {
            let t = u - j as f64;
            if (0.0..1.0).contains(&t) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for order in 2..=n {
        let of = order as f64;
        for j in 0..=(n - order) {
            let t = u - j as f64;
            vals[j] = (t * vals[j] + (of - t) * vals[j + 1]) / (of - 1.0);
        }
    }
    vals[0]
}
