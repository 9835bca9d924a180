//! FFT-accelerated Fourier-space sum: spread, transform, scale, transform
//! back, interpolate.

use super::direct::radial_table;
use super::fft_wavenumber;
use super::system::ParticleSystem;
use crate::error::{EwaldError, Result};
use crate::split::{SplitFamily, SplitSpec};
use crate::window::{WindowFamily, WindowSpec};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

pub struct EwaldPlan {
    split: SplitSpec,
    window: WindowSpec,
    m: usize,
    l: f64,
    scaling: Vec<f64>,
    // e^{+i} and e^{-i} unnormalised transforms
    fft_plus: Arc<dyn Fft<f64>>,
    fft_minus: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for EwaldPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EwaldPlan")
            .field("split", &self.split.family())
            .field("shape", &self.split.shape())
            .field("window", &self.window.family())
            .field("m", &self.m)
            .field("P", &self.window.support())
            .finish()
    }
}

impl EwaldPlan {
    /// Grid size and box length are taken from the window.
    pub fn new(split: SplitSpec, window: WindowSpec) -> Result<EwaldPlan> {
        let m = window.grid_size();
        let l = window.box_length();
        if window.support() > m {
            return Err(EwaldError::Config(format!(
                "window support P = {} exceeds grid size m = {m}",
                window.support()
            )));
        }
        if split.family() == SplitFamily::Pswf && split.cutoff() >= 0.5 * l {
            return Err(EwaldError::Config(format!(
                "cutoff {} must be below L/2 = {}",
                split.cutoff(),
                0.5 * l
            )));
        }
        if window.family() == WindowFamily::Pswf {
            // only modes inside the split band carry weight
            let needed = (PI * m as f64 / l).min(split.band_limit());
            if window.band_limit() < needed * (1.0 - 1e-9) {
                return Err(EwaldError::Config(format!(
                    "PSWF window band {} below the highest used frequency {needed}",
                    window.band_limit()
                )));
            }
        }
        let deconv: Vec<f64> = (0..m).map(|i| window.deconvolution_1d(fft_wavenumber(i, m))).collect();
        if let Some(bad) = deconv.iter().position(|w| !(w.abs() > 0.0) || !w.is_finite()) {
            return Err(EwaldError::Config(format!(
                "window coefficient vanishes at k = {}",
                fft_wavenumber(bad, m)
            )));
        }
        let table = radial_table(&split, m, l);
        let mut scaling = vec![0.0; m * m * m];
        for a in 0..m {
            let ka = fft_wavenumber(a, m);
            for b in 0..m {
                let kb = fft_wavenumber(b, m);
                for c in 0..m {
                    let kc = fft_wavenumber(c, m);
                    let n2 = (ka * ka + kb * kb + kc * kc) as usize;
                    let w = deconv[a] * deconv[b] * deconv[c];
                    scaling[(a * m + b) * m + c] = table[n2] / (w * w);
                }
            }
        }
        scaling[0] = 0.0;
        if let Some(i) = scaling.iter().position(|s| !s.is_finite()) {
            return Err(EwaldError::Config(format!("non-finite scaling at slot {i}")));
        }
        let mut planner = FftPlanner::new();
        let fft_plus = planner.plan_fft_inverse(m);
        let fft_minus = planner.plan_fft_forward(m);
        Ok(EwaldPlan {
            split,
            window,
            m,
            l,
            scaling,
            fft_plus,
            fft_minus,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.m
    }
    pub fn spacing(&self) -> f64 {
        self.l / self.m as f64
    }
    pub fn box_length(&self) -> f64 {
        self.l
    }
    pub fn split(&self) -> &SplitSpec {
        &self.split
    }
    pub fn window(&self) -> &WindowSpec {
        &self.window
    }

    /// Diagonal scaling in FFT slot order, k = 0 entry zero.
    pub fn scaling(&self) -> &[f64] {
        &self.scaling
    }

    fn check_system(&self, sys: &ParticleSystem) -> Result<()> {
        if (sys.box_length() - self.l).abs() > 1e-12 * self.l {
            return Err(EwaldError::Config(format!(
                "system box {} does not match plan box {}",
                sys.box_length(),
                self.l
            )));
        }
        Ok(())
    }

    fn stencils(&self, sys: &ParticleSystem, with_deriv: bool) -> Vec<Stencil> {
        let h = self.spacing();
        sys.positions()
            .iter()
            .map(|p| {
                let mut st = Stencil::default();
                for d in 0..3 {
                    let (lo, hi) = self.window.support_range(p[d]);
                    st.start[d] = lo;
                    for l in lo..=hi {
                        let x = p[d] - h * l as f64;
                        if with_deriv {
                            let (v, dv) = self.window.window_and_deriv_1d(x);
                            st.w[d].push(v);
                            st.dw[d].push(dv);
                        } else {
                            st.w[d].push(self.window.window_1d(x));
                        }
                    }
                }
                st
            })
            .collect()
    }

    /// Grid values a_l = sum_j rho_j phi~(h l - x_j), layout (x*m + y)*m + z.
    pub fn spread(&self, sys: &ParticleSystem) -> Result<Vec<f64>> {
        self.check_system(sys)?;
        let m = self.m;
        let st = self.stencils(sys, false);
        let q = sys.charges();
        // Per-plane particle lists make every plane single-writer.
        let mut planes: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m];
        for (j, s) in st.iter().enumerate() {
            for t in 0..s.w[0].len() {
                planes[wrap_index(s.start[0] + t as i64, m)].push((j, t));
            }
        }
        let mut grid = vec![0.0; m * m * m];
        grid.par_chunks_mut(m * m)
            .zip(planes.par_iter())
            .for_each(|(plane, list)| {
                for &(j, t) in list {
                    let s = &st[j];
                    let vx = q[j] * s.w[0][t];
                    for (u, wy) in s.w[1].iter().enumerate() {
                        let b = wrap_index(s.start[1] + u as i64, m);
                        let vxy = vx * wy;
                        let row = &mut plane[b * m..(b + 1) * m];
                        for (v, wz) in s.w[2].iter().enumerate() {
                            row[wrap_index(s.start[2] + v as i64, m)] += vxy * wz;
                        }
                    }
                }
            });
        Ok(grid)
    }

    /// phi_i = sum_l g_l phi~(x_i - h l).
    pub fn interpolate(&self, sys: &ParticleSystem, grid: &[f64]) -> Result<Vec<f64>> {
        self.check_system(sys)?;
        self.check_grid(grid)?;
        let m = self.m;
        let st = self.stencils(sys, false);
        Ok(st
            .par_iter()
            .map(|s| {
                let mut acc = 0.0;
                for (t, wx) in s.w[0].iter().enumerate() {
                    let a = wrap_index(s.start[0] + t as i64, m);
                    let mut sy = 0.0;
                    for (u, wy) in s.w[1].iter().enumerate() {
                        let b = wrap_index(s.start[1] + u as i64, m);
                        let row = &grid[(a * m + b) * m..(a * m + b + 1) * m];
                        let mut sz = 0.0;
                        for (v, wz) in s.w[2].iter().enumerate() {
                            sz += row[wrap_index(s.start[2] + v as i64, m)] * wz;
                        }
                        sy += sz * wy;
                    }
                    acc += sy * wx;
                }
                acc
            })
            .collect())
    }

    /// grad phi_i = sum_l g_l grad phi~(x_i - h l).
    pub fn interpolate_gradient(&self, sys: &ParticleSystem, grid: &[f64]) -> Result<Vec<[f64; 3]>> {
        self.check_system(sys)?;
        self.check_grid(grid)?;
        let m = self.m;
        let st = self.stencils(sys, true);
        Ok(st
            .par_iter()
            .map(|s| {
                let mut g = [0.0; 3];
                for t in 0..s.w[0].len() {
                    let a = wrap_index(s.start[0] + t as i64, m);
                    let (wx, dx) = (s.w[0][t], s.dw[0][t]);
                    for u in 0..s.w[1].len() {
                        let b = wrap_index(s.start[1] + u as i64, m);
                        let (wy, dy) = (s.w[1][u], s.dw[1][u]);
                        let row = &grid[(a * m + b) * m..(a * m + b + 1) * m];
                        let (mut sz, mut dz) = (0.0, 0.0);
                        for v in 0..s.w[2].len() {
                            let val = row[wrap_index(s.start[2] + v as i64, m)];
                            sz += val * s.w[2][v];
                            dz += val * s.dw[2][v];
                        }
                        g[0] += dx * wy * sz;
                        g[1] += wx * dy * sz;
                        g[2] += wx * wy * dz;
                    }
                }
                g
            })
            .collect())
    }

    /// Forward transform (e^{+i}), multiply by the scaling, backward (e^{-i}).
    pub fn apply_scaling(&self, grid: &[f64]) -> Result<Vec<f64>> {
        self.check_grid(grid)?;
        let mut data: Vec<Complex64> = grid.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fft3d(&mut data, self.m, &self.fft_plus);
        data.par_iter_mut()
            .zip(self.scaling.par_iter())
            .for_each(|(z, s)| *z *= s);
        fft3d(&mut data, self.m, &self.fft_minus);
        Ok(data.into_iter().map(|z| z.re).collect())
    }

    fn check_grid(&self, grid: &[f64]) -> Result<()> {
        if grid.len() != self.m * self.m * self.m {
            return Err(EwaldError::Config(format!(
                "grid has {} values, expected {}",
                grid.len(),
                self.m.pow(3)
            )));
        }
        Ok(())
    }
}

#[derive(Default)]
struct Stencil {
    start: [i64; 3],
    w: [Vec<f64>; 3],
    dw: [Vec<f64>; 3],
}

#[inline]
fn wrap_index(i: i64, m: usize) -> usize {
    i.rem_euclid(m as i64) as usize
}

/// In-place 3D transform by 1D passes along z, y and x.
fn fft3d(data: &mut [Complex64], m: usize, fft: &Arc<dyn Fft<f64>>) {
    let plane = m * m;
    // z: contiguous rows
    data.par_chunks_mut(plane).for_each(|p| fft.process(p));
    // y: transpose each x-plane, transform, transpose back
    data.par_chunks_mut(plane).for_each(|p| {
        let mut t = vec![Complex64::new(0.0, 0.0); plane];
        for b in 0..m {
            for c in 0..m {
                t[c * m + b] = p[b * m + c];
            }
        }
        fft.process(&mut t);
        for b in 0..m {
            for c in 0..m {
                p[b * m + c] = t[c * m + b];
            }
        }
    });
    // x: gather y-slabs, transform, scatter
    let slabs: Vec<Vec<Complex64>> = (0..m)
        .into_par_iter()
        .map(|b| {
            let mut t = vec![Complex64::new(0.0, 0.0); plane];
            for a in 0..m {
                for c in 0..m {
                    t[c * m + a] = data[(a * m + b) * m + c];
                }
            }
            fft.process(&mut t);
            t
        })
        .collect();
    for (b, t) in slabs.iter().enumerate() {
        for a in 0..m {
            for c in 0..m {
                data[(a * m + b) * m + c] = t[c * m + a];
            }
        }
    }
}

/// Far-field potential by spreading, FFTs and interpolation.
pub fn fast_fourier_sum(sys: &ParticleSystem, plan: &EwaldPlan) -> Result<Vec<f64>> {
    let grid = plan.spread(sys)?;
    let g = plan.apply_scaling(&grid)?;
    plan.interpolate(sys, &g)
}

/// Gradient of the far-field potential at the particles.
pub fn fast_fourier_gradient(sys: &ParticleSystem, plan: &EwaldPlan) -> Result<Vec<[f64; 3]>> {
    let grid = plan.spread(sys)?;
    let g = plan.apply_scaling(&grid)?;
    plan.interpolate_gradient(sys, &g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ewald::direct::direct_fourier_sum_any;
    use crate::ewald::system::gen_system;
    use crate::split::make_pswf_split;

    #[test]
    fn fft3d_matches_naive_dft() {
        let m = 5;
        let data: Vec<Complex64> = (0..m * m * m)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut out = data.clone();
        let fft = FftPlanner::new().plan_fft_inverse(m);
        fft3d(&mut out, m, &fft);
        let k = (1usize, 3usize, 4usize);
        let mut want = Complex64::new(0.0, 0.0);
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let ph = 2.0 * PI * ((k.0 * a + k.1 * b + k.2 * c) as f64) / m as f64;
                    want += data[(a * m + b) * m + c] * Complex64::from_polar(1.0, ph);
                }
            }
        }
        assert!((out[(k.0 * m + k.1) * m + k.2] - want).norm() < 1e-12);
    }

    fn full_support_diff(m: usize) -> f64 {
        let sys = gen_system(5, 12, 1.0).unwrap();
        let split = make_pswf_split(PI * 0.3 * m as f64, 0.3).unwrap();
        let plan = EwaldPlan::new(split.clone(), WindowSpec::pswf(m, m, 1.0).unwrap()).unwrap();
        let fast = fast_fourier_sum(&sys, &plan).unwrap();
        let direct = direct_fourier_sum_any(&sys, &split, m).unwrap();
        fast.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    // With P = m the window bandlimit is at most pi m / 2, so the aliasing floor
    // is ~psi_w(1), about 1e-3 here. The equivalence needs a larger grid.
    #[test]
    #[ignore = "aliasing floor of a P = 8 window is ~1e-3, far above 1e-11"]
    fn full_support_matches_direct_sum_m8() {
        let diff = full_support_diff(8);
        assert!(diff < 1e-11, "max diff {diff:e}");
    }

    #[test]
    fn full_support_m8_sits_at_alias_floor() {
        let diff = full_support_diff(8);
        assert!(diff < 5e-3, "max diff {diff:e}");
    }

    #[test]
    fn full_support_matches_direct_sum_m28() {
        let diff = full_support_diff(28);
        assert!(diff < 1e-11, "max diff {diff:e}");
    }

    #[test]
    fn plan_rejects_oversized_support() {
        let split = make_pswf_split(6.0, 0.2).unwrap();
        assert!(EwaldPlan::new(split, WindowSpec::pswf(9, 8, 1.0).unwrap()).is_err());
    }

    #[test]
    fn scaling_zero_mode() {
        let split = make_pswf_split(6.0, 0.2).unwrap();
        let plan = EwaldPlan::new(split, WindowSpec::pswf(4, 8, 1.0).unwrap()).unwrap();
        assert_eq!(plan.scaling()[0], 0.0);
        assert!(plan.scaling().iter().all(|s| s.is_finite()));
    }
}
