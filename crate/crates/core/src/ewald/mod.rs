//! Triply periodic Coulomb potentials: real-space, direct and fast Fourier sums.

pub mod direct;
pub mod fast;
pub mod metrics;
pub mod realspace;
pub mod reference;
pub mod system;

pub use direct::{direct_fourier_sum, direct_fourier_sum_any};
pub use fast::{fast_fourier_gradient, fast_fourier_sum, EwaldPlan};
pub use metrics::{rel_l2_error, rms_error};
pub use realspace::{real_space_sum, real_space_sum_within};
pub use reference::{exact_potential, reference_far_field, ReferenceCache};
pub use system::{gen_system, ParticleSystem};

use crate::error::Result;
use crate::split::SplitSpec;

/// Centred index set I_m: -floor(m/2), ..., ceil(m/2) - 1.
pub fn index_set(m: usize) -> Vec<i64> {
    let lo = -((m / 2) as i64);
    (0..m as i64).map(|i| lo + i).collect()
}

/// Wavenumber of FFT slot i (0..m) in the centred convention.
#[inline]
pub fn fft_wavenumber(i: usize, m: usize) -> i64 {
    if i < m - m / 2 {
        i as i64
    } else {
        i as i64 - m as i64
    }
}

/// How the Fourier-space part is computed.
pub enum FarField<'a> {
    Direct(usize),
    Fast(&'a EwaldPlan),
}

/// phi_i = phi_i^local + phi_i^far - self_term * rho_i.
pub fn total_potential(sys: &ParticleSystem, split: &SplitSpec, far: FarField<'_>) -> Result<Vec<f64>> {
    let local = real_space_sum(sys, split)?;
    let far = match far {
        FarField::Direct(m) => direct_fourier_sum_any(sys, split, m)?,
        FarField::Fast(plan) => fast_fourier_sum(sys, plan)?,
    };
    let s = split.self_term();
    Ok(local
        .iter()
        .zip(&far)
        .zip(sys.charges())
        .map(|((a, b), q)| a + b - s * q)
        .collect())
}

/// E = 1/2 sum_i rho_i phi_i.
pub fn total_energy(sys: &ParticleSystem, phi: &[f64]) -> f64 {
    0.5 * sys.charges().iter().zip(phi).map(|(q, p)| q * p).sum::<f64>()
}
