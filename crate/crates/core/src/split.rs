//! Ewald splits 1/r = M(r) + R(r) generated by a mollifier gamma.
//!
//! M(r) = Phi(r)/r where Phi(r) = int_{-r}^{r} gamma is the split function,
//! and M_hat(omega) = 4 pi gamma_hat(omega) / omega^2.

use crate::error::{EwaldError, Result};
use crate::pswf::{build_pswf, PswfBasis, PswfTransform};
use crate::quadrature::legendre_clenshaw;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitFamily {
    Pswf,
    Gaussian,
}

#[derive(Debug, Clone)]
pub struct SplitSpec {
    family: SplitFamily,
    r_c: f64,
    shape: f64,
    basis: Option<PswfBasis>,
    // Legendre coefficients (all degrees) of Phi(r_c y) on y in [0, 1].
    phi_series: Vec<f64>,
}

pub fn make_pswf_split(c_s: f64, r_c: f64) -> Result<SplitSpec> {
    if !(r_c > 0.0 && r_c.is_finite()) {
        return Err(EwaldError::Domain(format!("cutoff r_c = {r_c} must be positive")));
    }
    let basis = build_pswf(c_s, 1e-14)?;
    let scale = 2.0 / (basis.lambda0() * basis.psi_at_zero());
    let a = basis.coeffs();
    let mut series = vec![0.0; 2 * a.len() + 1];
    series[1] += scale * a[0];
    for (j, &aj) in a.iter().enumerate().skip(1) {
        let n = 2 * j;
        let w = scale * aj / (2.0 * n as f64 + 1.0);
        series[n + 1] += w;
        series[n - 1] -= w;
    }
    let rule = basis.quadrature();
    // Values near x = 1 sit at the rounding level of the Legendre sum for large c.
    let floor = -1e-13 * basis.psi_at_zero();
    if rule.nodes.iter().any(|&x| basis.value(x) < floor) {
        return Err(EwaldError::Domain(format!(
            "psi_0 with c = {c_s} is not positive on [-1, 1]; mollifier would change sign"
        )));
    }
    Ok(SplitSpec {
        family: SplitFamily::Pswf,
        r_c,
        shape: c_s,
        basis: Some(basis),
        phi_series: series,
    })
}

/// Classical Gaussian split with width sigma; `r_c` only matters for the
/// real-space truncation and is set separately with [`SplitSpec::with_cutoff`].
pub fn make_gaussian_split(sigma: f64) -> Result<SplitSpec> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(EwaldError::Domain(format!("sigma = {sigma} must be positive")));
    }
    Ok(SplitSpec {
        family: SplitFamily::Gaussian,
        r_c: f64::INFINITY,
        shape: sigma,
        basis: None,
        phi_series: Vec::new(),
    })
}

/// sigma with (r_c/sigma)^2 = log(1/eps).
pub fn gaussian_sigma_for(r_c: f64, eps: f64) -> f64 {
    r_c / (1.0 / eps).ln().sqrt()
}

impl SplitSpec {
    pub fn family(&self) -> SplitFamily {
        self.family
    }

    pub fn cutoff(&self) -> f64 {
        self.r_c
    }

    /// c_s for PSWF, sigma for Gaussian.
    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn basis(&self) -> Option<&PswfBasis> {
        self.basis.as_ref()
    }

    pub fn with_cutoff(mut self, r_c: f64) -> Self {
        if self.family == SplitFamily::Gaussian {
            self.r_c = r_c;
        }
        self
    }

    /// Band edge c_s/r_c of the PSWF mollifier; infinite for Gaussian.
    pub fn band_limit(&self) -> f64 {
        match self.family {
            SplitFamily::Pswf => self.shape / self.r_c,
            SplitFamily::Gaussian => f64::INFINITY,
        }
    }

    /// Mollifier gamma(x).
    pub fn gamma(&self, x: f64) -> f64 {
        match self.family {
            SplitFamily::Pswf => {
                let b = self.basis.as_ref().unwrap();
                let y = x.abs() / self.r_c;
                if y > 1.0 {
                    0.0
                } else {
                    b.value(y) / (self.r_c * b.lambda0() * b.psi_at_zero())
                }
            }
            SplitFamily::Gaussian => {
                let s = self.shape;
                (-(x * x) / (s * s)).exp() / (s * PI.sqrt())
            }
        }
    }

    /// Split function Phi(r) = int_{-r}^{r} gamma.
    pub fn phi(&self, r: f64) -> f64 {
        match self.family {
            SplitFamily::Pswf => {
                let y = r.abs() / self.r_c;
                if y >= 1.0 {
                    1.0
                } else {
                    legendre_clenshaw(&self.phi_series, y)
                }
            }
            SplitFamily::Gaussian => libm::erf(r.abs() / self.shape),
        }
    }

    /// 1 - Phi(r) without cancellation for the Gaussian tail.
    fn phi_complement(&self, r: f64) -> f64 {
        match self.family {
            SplitFamily::Pswf => 1.0 - self.phi(r),
            SplitFamily::Gaussian => libm::erfc(r.abs() / self.shape),
        }
    }

    /// Long-range part M(r) = Phi(r)/r; r = 0 gives the self limit.
    pub fn mollified(&self, r: f64) -> f64 {
        if r == 0.0 {
            return self.self_term();
        }
        self.phi(r) / r
    }

    /// Short-range residual R(r) = (1 - Phi(r))/r.
    pub fn residual(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(EwaldError::Domain(format!(
                "residual requested at r = {r}; self pairs are excluded"
            )));
        }
        Ok(self.residual_unchecked(r))
    }

    #[inline]
    pub fn residual_unchecked(&self, r: f64) -> f64 {
        if r >= self.r_c && self.family == SplitFamily::Pswf {
            return 0.0;
        }
        self.phi_complement(r) / r
    }

    /// lim_{r->0} M(r) = 2 gamma(0).
    pub fn self_term(&self) -> f64 {
        match self.family {
            SplitFamily::Pswf => 2.0 / (self.r_c * self.basis.as_ref().unwrap().lambda0()),
            SplitFamily::Gaussian => 2.0 / (self.shape * PI.sqrt()),
        }
    }

    /// gamma_hat(omega), normalised so gamma_hat(0) = 1. In-band only for PSWF.
    pub fn gamma_hat(&self, omega: f64) -> Result<f64> {
        let w = omega.abs();
        match self.family {
            SplitFamily::Pswf => {
                let band = self.band_limit();
                if w > band * (1.0 + 1e-12) {
                    return Err(EwaldError::OutOfBand { omega: w, band });
                }
                let b = self.basis.as_ref().unwrap();
                Ok(b.value((w / band).min(1.0)) / b.psi_at_zero())
            }
            SplitFamily::Gaussian => Ok((-0.25 * self.shape * self.shape * w * w).exp()),
        }
    }

    /// M_hat(omega) = 4 pi gamma_hat(omega)/omega^2 for omega > 0.
    pub fn mollified_hat(&self, omega: f64) -> Result<f64> {
        if omega == 0.0 {
            return Err(EwaldError::Domain("M_hat is singular at omega = 0".into()));
        }
        Ok(4.0 * PI * self.gamma_hat(omega)? / (omega * omega))
    }

    /// Spectrum evaluator valid on [0, omega_max], including beyond the PSWF
    /// band edge, where gamma_hat is evaluated from its Fourier integral.
    pub fn spectrum(&self, omega_max: f64) -> SplitSpectrum {
        let transform = self.basis.as_ref().map(|b| {
            let band = self.band_limit();
            b.transform((omega_max / band).max(1.0))
        });
        SplitSpectrum {
            family: self.family,
            shape: self.shape,
            band: self.band_limit(),
            transform,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitSpectrum {
    family: SplitFamily,
    shape: f64,
    band: f64,
    transform: Option<PswfTransform>,
}

impl SplitSpectrum {
    pub fn gamma_hat(&self, omega: f64) -> f64 {
        let w = omega.abs();
        match self.family {
            SplitFamily::Pswf => {
                let t = self.transform.as_ref().unwrap();
                t.eval(w / self.band) / t.basis().psi_at_zero()
            }
            SplitFamily::Gaussian => (-0.25 * self.shape * self.shape * w * w).exp(),
        }
    }

    pub fn mollified_hat(&self, omega: f64) -> f64 {
        4.0 * PI * self.gamma_hat(omega) / (omega * omega)
    }
}
