//! Particle systems, deterministic generation and file formats.

use crate::error::{EwaldError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    positions: Vec<[f64; 3]>,
    charges: Vec<f64>,
    l: f64,
}

impl ParticleSystem {
    /// Wraps positions into [0, L)^3 and checks charge neutrality.
    pub fn new(positions: Vec<[f64; 3]>, charges: Vec<f64>, l: f64) -> Result<ParticleSystem> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(EwaldError::Config(format!("box length {l} must be positive")));
        }
        if positions.len() != charges.len() {
            return Err(EwaldError::Config(format!(
                "{} positions but {} charges",
                positions.len(),
                charges.len()
            )));
        }
        if positions.iter().flatten().chain(&charges).any(|v| !v.is_finite()) {
            return Err(EwaldError::Config("non-finite coordinate or charge".into()));
        }
        let norm = charges.iter().map(|q| q * q).sum::<f64>().sqrt();
        let total: f64 = charges.iter().sum();
        if total.abs() > 1e-12 * norm.max(f64::MIN_POSITIVE) && total != 0.0 {
            return Err(EwaldError::Config(format!("system is not neutral: total charge {total:e}")));
        }
        let positions = positions
            .into_iter()
            .map(|p| p.map(|x| wrap(x, l)))
            .collect();
        Ok(ParticleSystem { positions, charges, l })
    }

    pub fn len(&self) -> usize {
        self.charges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charges.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn charges(&self) -> &[f64] {
        &self.charges
    }

    pub fn box_length(&self) -> f64 {
        self.l
    }

    pub fn volume(&self) -> f64 {
        self.l * self.l * self.l
    }

    /// ||rho||_2
    pub fn charge_norm(&self) -> f64 {
        self.charges.iter().map(|q| q * q).sum::<f64>().sqrt()
    }

    pub fn with_charges(&self, charges: Vec<f64>) -> Result<ParticleSystem> {
        ParticleSystem::new(self.positions.clone(), charges, self.l)
    }

    pub fn translated(&self, shift: [f64; 3]) -> ParticleSystem {
        let positions = self
            .positions
            .iter()
            .map(|p| [0, 1, 2].map(|d| wrap(p[d] + shift[d], self.l)))
            .collect();
        ParticleSystem {
            positions,
            charges: self.charges.clone(),
            l: self.l,
        }
    }

    /// Same particles in a box of a different length (positions scaled).
    pub fn rescaled(&self, new_l: f64) -> ParticleSystem {
        let f = new_l / self.l;
        ParticleSystem {
            positions: self.positions.iter().map(|p| p.map(|x| wrap(x * f, new_l))).collect(),
            charges: self.charges.clone(),
            l: new_l,
        }
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }

    pub fn write_csv_to<W: std::io::Write>(&self, mut f: W) -> Result<()> {
        writeln!(f, "# prolate-ewald v1 box={:e}", self.l)?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["x", "y", "z", "q"]).map_err(csv_err)?;
        for (p, q) in self.positions.iter().zip(&self.charges) {
            w.write_record([p[0], p[1], p[2], *q].map(|v| format!("{v:e}")))
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV layout written by `write_csv`. `box_length` overrides or
    /// supplies L when the comment line is absent.
    pub fn read_csv<P: AsRef<Path>>(path: P, box_length: Option<f64>) -> Result<ParticleSystem> {
        let text = std::fs::read_to_string(path)?;
        let mut l = box_length;
        for line in text.lines().take_while(|s| s.starts_with('#')) {
            if let Some(v) = line.split("box=").nth(1) {
                if l.is_none() {
                    l = v.trim().parse().ok();
                }
            }
        }
        let l = l.ok_or_else(|| EwaldError::Config("box length missing from CSV".into()))?;
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut positions = Vec::new();
        let mut charges = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| EwaldError::Config(format!("bad number in CSV: {e}")))?;
            if vals.len() != 4 {
                return Err(EwaldError::Config(format!("expected 4 columns, got {}", vals.len())));
            }
            positions.push([vals[0], vals[1], vals[2]]);
            charges.push(vals[3]);
        }
        ParticleSystem::new(positions, charges, l)
    }

    /// Little-endian float64 layout: n (as f64), L, 3n coordinates, n charges.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * (2 + 4 * self.len()));
        out.extend_from_slice(&(self.len() as f64).to_le_bytes());
        out.extend_from_slice(&self.l.to_le_bytes());
        for p in &self.positions {
            for x in p {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        for q in &self.charges {
            out.extend_from_slice(&q.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ParticleSystem> {
        let vals: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if bytes.len() % 8 != 0 || vals.len() < 2 {
            return Err(EwaldError::Config("truncated binary system".into()));
        }
        let n = vals[0] as usize;
        if vals[0] != n as f64 || vals.len() != 2 + 4 * n {
            return Err(EwaldError::Config(format!("binary system size mismatch for n = {}", vals[0])));
        }
        let l = vals[1];
        let positions = (0..n).map(|i| [vals[2 + 3 * i], vals[3 + 3 * i], vals[4 + 3 * i]]).collect();
        let charges = vals[2 + 3 * n..].to_vec();
        ParticleSystem::new(positions, charges, l)
    }

    pub fn write_binary<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_binary<P: AsRef<Path>>(path: P) -> Result<ParticleSystem> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        ParticleSystem::from_bytes(&buf)
    }
}

fn csv_err(e: csv::Error) -> EwaldError {
    EwaldError::Io(e.to_string())
}

#[inline]
pub(crate) fn wrap(x: f64, l: f64) -> f64 {
    let y = x.rem_euclid(l);
    if y >= l {
        0.0
    } else {
        y
    }
}

/// Uniform positions and standard-normal charges shifted to zero mean.
pub fn gen_system(seed: u64, n: usize, l: f64) -> Result<ParticleSystem> {
    if n < 2 {
        return Err(EwaldError::Config(format!("need at least 2 particles, got {n}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let positions: Vec<[f64; 3]> = (0..n)
        .map(|_| [rng.gen::<f64>() * l, rng.gen::<f64>() * l, rng.gen::<f64>() * l])
        .collect();
    let mut charges: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mean = charges.iter().sum::<f64>() / n as f64;
    charges.iter_mut().for_each(|q| *q -= mean);
    ParticleSystem::new(positions, charges, l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_systems_are_neutral_and_reproducible() {
        let a = gen_system(7, 100, 1.0).unwrap();
        let b = gen_system(7, 100, 1.0).unwrap();
        assert_eq!(a, b);
        let total: f64 = a.charges().iter().sum();
        assert!(total.abs() < 1e-12 * a.charge_norm());
        assert!(a.positions().iter().flatten().all(|&x| (0.0..1.0).contains(&x)));
        assert_ne!(a, gen_system(8, 100, 1.0).unwrap());
        assert!(gen_system(1, 1, 1.0).is_err());
    }

    #[test]
    fn rejects_charged_system() {
        assert!(ParticleSystem::new(vec![[0.0; 3], [0.5; 3]], vec![1.0, 0.5], 1.0).is_err());
    }

    #[test]
    fn wraps_positions() {
        let s = ParticleSystem::new(vec![[-0.25, 1.0, 2.5], [0.1; 3]], vec![1.0, -1.0], 1.0).unwrap();
        assert_eq!(s.positions()[0], [0.75, 0.0, 0.5]);
    }

    #[test]
    fn binary_roundtrip() {
        let a = gen_system(3, 17, 2.0).unwrap();
        let b = ParticleSystem::from_bytes(&a.to_bytes()).unwrap();
        assert_eq!(a, b);
        assert!(ParticleSystem::from_bytes(&a.to_bytes()[..20]).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let a = gen_system(3, 9, 1.5).unwrap();
        let dir = std::env::temp_dir().join(format!("pe-sys-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("s.csv");
        a.write_csv(&path).unwrap();
        let b = ParticleSystem::read_csv(&path, None).unwrap();
        assert_eq!(a, b);
        std::fs::remove_dir_all(&dir).ok();
    }
}
