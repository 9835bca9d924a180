//! Real-space residual sum over a cell list.

use super::system::ParticleSystem;
use crate::error::{EwaldError, Result};
use crate::split::SplitSpec;
use rayon::prelude::*;

/// phi_i^local = sum'_{j, images} R(|x_i - x_j + L r|) rho_j over pairs within r_c.
pub fn real_space_sum(sys: &ParticleSystem, split: &SplitSpec) -> Result<Vec<f64>> {
    real_space_sum_within(sys, split, split.cutoff())
}

/// Same sum with an explicit cutoff (used for untruncated Gaussian residuals).
pub fn real_space_sum_within(sys: &ParticleSystem, split: &SplitSpec, r_cut: f64) -> Result<Vec<f64>> {
    let l = sys.box_length();
    if !(r_cut > 0.0 && r_cut < 0.5 * l) {
        return Err(EwaldError::Config(format!(
            "cutoff {r_cut} must satisfy 0 < r_c < L/2 = {}",
            0.5 * l
        )));
    }
    let cells = CellList::new(sys, r_cut);
    let pos = sys.positions();
    let q = sys.charges();
    let rc2 = r_cut * r_cut;
    let out = (0..sys.len())
        .into_par_iter()
        .map(|i| {
            let xi = pos[i];
            let mut acc = 0.0;
            cells.for_each_neighbor(xi, |j| {
                if j == i {
                    return;
                }
                let d = min_image(xi, pos[j], l);
                let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                if r2 < rc2 {
                    acc += q[j] * split.residual_unchecked(r2.sqrt());
                }
            });
            acc
        })
        .collect();
    Ok(out)
}

#[inline]
pub(crate) fn min_image(a: [f64; 3], b: [f64; 3], l: f64) -> [f64; 3] {
    let mut d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    for x in d.iter_mut() {
        *x -= l * (*x / l).round();
    }
    d
}

/// Cubic cells of edge L/floor(L/r_c) >= r_c.
struct CellList {
    nc: usize,
    edge: f64,
    start: Vec<usize>,
    members: Vec<usize>,
}

impl CellList {
    fn new(sys: &ParticleSystem, r_cut: f64) -> CellList {
        let l = sys.box_length();
        let nc = ((l / r_cut).floor() as usize).max(1);
        let edge = l / nc as f64;
        let ncell = nc * nc * nc;
        let cell_of: Vec<usize> = sys.positions().iter().map(|p| Self::index(p, edge, nc)).collect();
        let mut counts = vec![0usize; ncell + 1];
        for &c in &cell_of {
            counts[c + 1] += 1;
        }
        for c in 0..ncell {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut members = vec![0; cell_of.len()];
        for (i, &c) in cell_of.iter().enumerate() {
            members[fill[c]] = i;
            fill[c] += 1;
        }
        CellList { nc, edge, start: counts, members }
    }

    fn index(p: &[f64; 3], edge: f64, nc: usize) -> usize {
        let c = p.map(|x| ((x / edge) as usize).min(nc - 1));
        (c[0] * nc + c[1]) * nc + c[2]
    }

    /// Visits every particle in the (deduplicated) 27 neighbouring cells.
    fn for_each_neighbor<F: FnMut(usize)>(&self, p: [f64; 3], mut f: F) {
        let nc = self.nc as i64;
        let c = p.map(|x| ((x / self.edge) as i64).min(nc - 1));
        let span: Vec<i64> = if nc >= 3 { vec![-1, 0, 1] } else { (0..nc).collect() };
        let wrap = |v: i64| v.rem_euclid(nc) as usize;
        for &dx in &span {
            for &dy in &span {
                for &dz in &span {
                    let (a, b, d) = if nc >= 3 {
                        (wrap(c[0] + dx), wrap(c[1] + dy), wrap(c[2] + dz))
                    } else {
                        (dx as usize, dy as usize, dz as usize)
                    };
                    let cell = (a * self.nc + b) * self.nc + d;
                    for &j in &self.members[self.start[cell]..self.start[cell + 1]] {
                        f(j);
                    }
                }
            }
        }
    }
}
