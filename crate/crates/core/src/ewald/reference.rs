//! Machine-precision reference potentials.
//!
//! The exact periodic potential comes from a classical Gaussian Ewald sum
//! whose width is chosen so that both the real-space and the Fourier-space
//! truncation are below double precision. Reference far fields of any other
//! split follow from phi_exact - local(split) + self(split) rho.

use super::realspace::{min_image, real_space_sum_within};
use super::system::ParticleSystem;
use crate::error::{EwaldError, Result};
use crate::split::{make_gaussian_split, SplitFamily, SplitSpec};
use num_complex::Complex64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

// sigma/L and the erfc argument at the real-space cutoff (erfc(6.1) ~ 1e-18).
const SIGMA_FRAC: f64 = 0.08;
const TAIL: f64 = 6.1;

/// Full periodic Coulomb potential at each particle (self pair excluded).
pub fn exact_potential(sys: &ParticleSystem) -> Result<Vec<f64>> {
    let l = sys.box_length();
    let sigma = SIGMA_FRAC * l;
    let r_cut = TAIL * sigma;
    let q = sys.charges();
    let pos = sys.positions();
    let n = sys.len();

    let real: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = min_image(pos[i], pos[j], l);
                let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if r < r_cut {
                    acc += q[j] * libm::erfc(r / sigma) / r;
                }
            }
            acc
        })
        .collect();

    // Fourier sphere: e^{-sigma^2 w^2/4} below 1e-20 outside it.
    let kmax = ((2.0 * 46.0f64.sqrt() / sigma) * l / (2.0 * PI)).ceil() as i64;
    let ks: Vec<i64> = (-kmax..=kmax).collect();
    let nk = ks.len();
    let phase: Vec<[Vec<Complex64>; 3]> = pos
        .iter()
        .map(|p| p.map(|x| ks.iter().map(|&k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 * x / l)).collect()))
        .collect();
    let v = l * l * l;
    let weight = |k2: i64| {
        let w2 = (2.0 * PI / l).powi(2) * k2 as f64;
        4.0 * PI / w2 * (-0.25 * sigma * sigma * w2).exp() / v
    };
    // half space a >= 0 suffices by conjugate symmetry; weight the a > 0 planes twice
    let far: Vec<f64> = (kmax as usize..nk)
        .into_par_iter()
        .map(|a| {
            let mut out = vec![0.0; n];
            let ka = ks[a];
            for b in 0..nk {
                let kb = ks[b];
                for c in 0..nk {
                    let kc = ks[c];
                    let k2 = ka * ka + kb * kb + kc * kc;
                    if k2 == 0 || k2 > kmax * kmax {
                        continue;
                    }
                    if ka == 0 && (kb < 0 || (kb == 0 && kc < 0)) {
                        continue;
                    }
                    let mut s = Complex64::new(0.0, 0.0);
                    for j in 0..n {
                        s += q[j] * phase[j][0][a] * phase[j][1][b] * phase[j][2][c];
                    }
                    let w = 2.0 * weight(k2);
                    for i in 0..n {
                        let e = phase[i][0][a] * phase[i][1][b] * phase[i][2][c];
                        out[i] += w * (s * e.conj()).re;
                    }
                }
            }
            out
        })
        .collect::<Vec<_>>()
        .into_iter()
        // ordered sum keeps reruns bit-identical
        .fold(vec![0.0; n], |mut x, y| {
            x.iter_mut().zip(&y).for_each(|(a, b)| *a += b);
            x
        });
    let self_term = 2.0 / (sigma * PI.sqrt());
    Ok((0..n).map(|i| real[i] + far[i] - self_term * q[i]).collect())
}

/// phi_local computed without truncation for the given split.
pub fn local_untruncated(sys: &ParticleSystem, split: &SplitSpec) -> Result<Vec<f64>> {
    match split.family() {
        SplitFamily::Pswf => super::realspace::real_space_sum(sys, split),
        SplitFamily::Gaussian => {
            let r_cut = 6.6 * split.shape();
            let g = make_gaussian_split(split.shape())?;
            real_space_sum_within(sys, &g, r_cut).map_err(|_| {
                EwaldError::Config(format!(
                    "Gaussian width {} too wide for an untruncated residual in box {}",
                    split.shape(),
                    sys.box_length()
                ))
            })
        }
    }
}

/// Exact far field of `split`: phi_exact - local + self_term * rho.
pub fn reference_far_field(sys: &ParticleSystem, split: &SplitSpec, exact: &[f64]) -> Result<Vec<f64>> {
    let local = local_untruncated(sys, split)?;
    let s = split.self_term();
    Ok(exact
        .iter()
        .zip(&local)
        .zip(sys.charges())
        .map(|((e, loc), q)| e - loc + s * q)
        .collect())
}

/// On-disk cache of exact potentials keyed by (seed, n, L) and validated by a
/// SHA-256 of the system bytes.
#[derive(Debug, Clone)]
pub struct ReferenceCache {
    dir: Option<PathBuf>,
}

impl ReferenceCache {
    pub fn new<P: AsRef<Path>>(dir: P) -> ReferenceCache {
        ReferenceCache {
            dir: Some(dir.as_ref().to_path_buf()),
        }
    }

    /// A cache that always recomputes.
    pub fn disabled() -> ReferenceCache {
        ReferenceCache { dir: None }
    }

    pub fn path_for(&self, seed: u64, sys: &ParticleSystem) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| {
            d.join(format!(
                "ref-s{seed}-n{}-L{:e}.bin",
                sys.len(),
                sys.box_length()
            ))
        })
    }

    pub fn exact_potential(&self, seed: u64, sys: &ParticleSystem) -> Result<Vec<f64>> {
        let digest: [u8; 32] = Sha256::digest(sys.to_bytes()).into();
        let Some(path) = self.path_for(seed, sys) else {
            return exact_potential(sys);
        };
        if let Ok(bytes) = std::fs::read(&path) {
            if let Some(phi) = decode(&bytes, &digest, sys.len()) {
                return Ok(phi);
            }
        }
        let phi = exact_potential(sys)?;
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut out = digest.to_vec();
        for v in &phi {
            out.extend_from_slice(&v.to_le_bytes());
        }
        // write-then-rename so concurrent readers never see a partial file
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        std::fs::write(&tmp, out)?;
        std::fs::rename(&tmp, &path)?;
        Ok(phi)
    }
}

fn decode(bytes: &[u8], digest: &[u8; 32], n: usize) -> Option<Vec<f64>> {
    if bytes.len() != 32 + 8 * n || &bytes[..32] != digest {
        return None;
    }
    Some(
        bytes[32..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ewald::system::gen_system;

    #[test]
    fn madelung_constant_of_rock_salt() {
        // 8-ion NaCl cell in a unit box: phi_i = -q_i M / (L/2) with M = 1.747564594633...
        let mut pos = Vec::new();
        let mut q = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    pos.push([a as f64 * 0.5, b as f64 * 0.5, c as f64 * 0.5]);
                    q.push(if (a + b + c) % 2 == 0 { 1.0 } else { -1.0 });
                }
            }
        }
        let sys = ParticleSystem::new(pos, q, 1.0).unwrap();
        let phi = exact_potential(&sys).unwrap();
        let madelung = 1.747_564_594_633_182;
        for (p, qi) in phi.iter().zip(sys.charges()) {
            assert!((p + qi * madelung / 0.5).abs() < 1e-13, "{p}");
        }
    }

    #[test]
    fn cache_roundtrip_and_invalidation() {
        let dir = std::env::temp_dir().join(format!("pe-ref-{}", std::process::id()));
        let cache = ReferenceCache::new(&dir);
        let sys = gen_system(3, 10, 1.0).unwrap();
        let a = cache.exact_potential(3, &sys).unwrap();
        let b = cache.exact_potential(3, &sys).unwrap();
        assert_eq!(a, b);
        // a different system under the same key is not served from the cache
        let other = gen_system(4, 10, 1.0).unwrap();
        let c = cache.exact_potential(3, &other).unwrap();
        assert_eq!(c, exact_potential(&other).unwrap());
        std::fs::remove_dir_all(&dir).ok();
    }
}
