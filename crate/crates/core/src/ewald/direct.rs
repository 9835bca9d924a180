//! Direct Fourier-space sum over the centred index set I_m.

use super::system::ParticleSystem;
use super::index_set;
use crate::error::{EwaldError, Result};
use crate::split::{SplitFamily, SplitSpec};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Far-field potential with the in-band precondition pi m/L <= c_s/r_c.
pub fn direct_fourier_sum(sys: &ParticleSystem, split: &SplitSpec, m: usize) -> Result<Vec<f64>> {
    if split.family() == SplitFamily::Pswf {
        let nyquist = PI * m as f64 / sys.box_length();
        let band = split.band_limit();
        if nyquist > band * (1.0 + 1e-12) {
            return Err(EwaldError::OutOfBand { omega: nyquist, band });
        }
    }
    direct_fourier_sum_any(sys, split, m)
}

/// Far-field potential for any m. For the PSWF split the modes outside the
/// band are dropped, so grids finer than the band edge reproduce the
/// band-limited sum.
pub fn direct_fourier_sum_any(sys: &ParticleSystem, split: &SplitSpec, m: usize) -> Result<Vec<f64>> {
    Ok(direct_fourier_complex(sys, split, m)?.into_iter().map(|z| z.re).collect())
}

/// Table of (1/V) M_hat indexed by the integer |k|^2. For the PSWF split only
/// modes inside the band |omega| <= c_s/r_c are kept (ball truncation); the
/// closed form is never evaluated outside it.
pub(crate) fn radial_table(split: &SplitSpec, m: usize, l: f64) -> Vec<f64> {
    let kmax = (m / 2) as f64;
    let nmax = (3.0 * kmax * kmax) as usize;
    let band = split.band_limit();
    let v = l * l * l;
    (0..=nmax)
        .map(|n2| {
            let omega = 2.0 * PI / l * (n2 as f64).sqrt();
            if n2 == 0 || omega > band * (1.0 + 1e-12) {
                0.0
            } else {
                split.mollified_hat(omega.min(band)).unwrap_or(0.0) / v
            }
        })
        .collect()
}

pub(crate) fn direct_fourier_complex(
    sys: &ParticleSystem,
    split: &SplitSpec,
    m: usize,
) -> Result<Vec<Complex64>> {
    if m == 0 {
        return Err(EwaldError::Config("grid size must be positive".into()));
    }
    let l = sys.box_length();
    let ks = index_set(m);
    let table = radial_table(split, m, l);
    let phases = phase_factors(sys, &ks);
    let q = sys.charges();
    let n = sys.len();
    let idx = |a: usize, b: usize, c: usize| (a * m + b) * m + c;

    // Scaled structure factor G(k) = (1/V) M_hat(k) sum_j rho_j e^{+i k.x_j}.
    let g: Vec<Complex64> = (0..m)
        .into_par_iter()
        .flat_map_iter(|a| {
            let mut plane = vec![Complex64::new(0.0, 0.0); m * m];
            for j in 0..n {
                let ex = phases[j][0][a] * q[j];
                for b in 0..m {
                    let exy = ex * phases[j][1][b];
                    let row = &mut plane[b * m..(b + 1) * m];
                    for (c, z) in row.iter_mut().enumerate() {
                        *z += exy * phases[j][2][c];
                    }
                }
            }
            for b in 0..m {
                for c in 0..m {
                    let n2 = (ks[a] * ks[a] + ks[b] * ks[b] + ks[c] * ks[c]) as usize;
                    plane[b * m + c] *= table[n2];
                }
            }
            plane.into_iter()
        })
        .collect();

    let out = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..m {
                let mut sa = Complex64::new(0.0, 0.0);
                for b in 0..m {
                    let mut sb = Complex64::new(0.0, 0.0);
                    for c in 0..m {
                        sb += g[idx(a, b, c)] * phases[i][2][c].conj();
                    }
                    sa += sb * phases[i][1][b].conj();
                }
                acc += sa * phases[i][0][a].conj();
            }
            acc
        })
        .collect();
    Ok(out)
}

/// e^{+2 pi i k x_d / L} for every particle, dimension and k in `ks`.
fn phase_factors(sys: &ParticleSystem, ks: &[i64]) -> Vec<[Vec<Complex64>; 3]> {
    let l = sys.box_length();
    sys.positions()
        .iter()
        .map(|p| {
            p.map(|x| {
                ks.iter()
                    .map(|&k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 * x / l))
                    .collect()
            })
        })
        .collect()
}
