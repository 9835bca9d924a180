//! Sweeps over grids, supports and tolerances, measured against the exact
//! periodic potential. These produce the CSV data behind the resolution
//! tables and error plots.

use crate::error::{EwaldError, Result};
use crate::ewald::{
    direct_fourier_sum_any, fast_fourier_sum, gen_system, reference_far_field, rel_l2_error, rms_error,
    EwaldPlan, ParticleSystem, ReferenceCache,
};
use crate::params::{select_parameters, ErrorModelInput};
use crate::split::{gaussian_sigma_for, make_gaussian_split, make_pswf_split, SplitFamily, SplitSpec};
use crate::window::{WindowFamily, WindowSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

pub const CSV_VERSION: &str = "# prolate-ewald v1";

/// Largest window support tried when P is searched for.
pub const MAX_SUPPORT: usize = 32;

/// Gaussian/Gaussian and Gaussian/PSWF grids are the direct-sum grid times this.
pub const GAUSSIAN_GRID_FACTOR: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferencePolicy {
    #[default]
    Compute,
    Cache,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sweep {
    Tolerances { eps: Vec<f64> },
    Grid { m: Vec<usize>, p: Vec<usize> },
    Shapes { c_s: Vec<f64>, c_w: Vec<f64> },
}

fn one() -> usize {
    1
}
fn unit() -> f64 {
    1.0
}
fn default_m_max() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Number of consecutive seeds starting at `seed`; results are medians.
    #[serde(default = "one")]
    pub seeds: usize,
    pub n: usize,
    #[serde(rename = "box", default = "unit")]
    pub l: f64,
    pub r_c: f64,
    pub split_family: SplitFamily,
    /// `None` runs the direct Fourier sum.
    pub window_family: Option<WindowFamily>,
    /// Fixed window support; searched for when absent.
    #[serde(default)]
    pub support: Option<usize>,
    /// c_s or sigma; derived from each tolerance when absent.
    #[serde(default)]
    pub split_shape: Option<f64>,
    pub sweep: Sweep,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub reference_policy: ReferencePolicy,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_m_max")]
    pub m_max: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            seeds: 1,
            n: 100,
            l: 1.0,
            r_c: 0.1,
            split_family: SplitFamily::Pswf,
            window_family: Some(WindowFamily::Pswf),
            support: None,
            split_shape: None,
            sweep: Sweep::Tolerances { eps: vec![1e-6] },
            output_dir: None,
            reference_policy: ReferencePolicy::Compute,
            cache_dir: None,
            m_max: default_m_max(),
        }
    }
}

fn bad(msg: String) -> EwaldError {
    EwaldError::Config(msg)
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| bad(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(bad(format!("n = {} must be at least 2", self.n)));
        }
        if self.seeds == 0 {
            return Err(bad("seeds must be at least 1".into()));
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(bad(format!("box length {} must be positive", self.l)));
        }
        if !(self.r_c > 0.0 && self.r_c < 0.5 * self.l) {
            return Err(bad(format!("r_c = {} must lie in (0, L/2)", self.r_c)));
        }
        if let Some(s) = self.split_shape {
            if !(s > 0.0 && s.is_finite()) {
                return Err(bad(format!("split shape {s} must be positive")));
            }
        }
        if let Some(p) = self.support {
            if p == 0 || p > self.m_max {
                return Err(bad(format!("support {p} must lie in 1..=m_max")));
            }
        }
        if self.m_max < 2 {
            return Err(bad("m_max must be at least 2".into()));
        }
        match &self.sweep {
            Sweep::Tolerances { eps } => {
                if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
                    return Err(bad(format!("tolerances must be a nonempty list in (0, 1): {eps:?}")));
                }
            }
            Sweep::Grid { m, p } => {
                if m.is_empty() || p.is_empty() || m.iter().chain(p).any(|&x| x == 0) {
                    return Err(bad("grid sweep needs nonempty positive m and P lists".into()));
                }
            }
            Sweep::Shapes { c_s, c_w } => {
                if c_s.is_empty() || c_w.is_empty() || c_s.iter().chain(c_w).any(|c| !(*c > 0.0 && c.is_finite())) {
                    return Err(bad("shape sweep needs nonempty positive c_s and c_w lists".into()));
                }
            }
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        Sha256::digest(json).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    fn cache(&self) -> ReferenceCache {
        match self.reference_policy {
            ReferencePolicy::Compute => ReferenceCache::disabled(),
            ReferencePolicy::Cache => {
                let dir = self
                    .cache_dir
                    .clone()
                    .or_else(|| self.output_dir.as_ref().map(|d| d.join("cache")))
                    .unwrap_or_else(|| PathBuf::from("ref-cache"));
                ReferenceCache::new(dir)
            }
        }
    }

    fn split_for(&self, eps: Option<f64>) -> Result<SplitSpec> {
        let shape = match (self.split_shape, eps) {
            (Some(s), _) => s,
            (None, Some(e)) => match self.split_family {
                SplitFamily::Pswf => (1.0 / e).ln(),
                SplitFamily::Gaussian => gaussian_sigma_for(self.r_c, e),
            },
            (None, None) => return Err(bad("split shape required for this sweep".into())),
        };
        match self.split_family {
            SplitFamily::Pswf => make_pswf_split(shape, self.r_c),
            SplitFamily::Gaussian => Ok(make_gaussian_split(shape)?.with_cutoff(self.r_c)),
        }
    }
}

/// One random system with its exact potential.
pub struct Trial {
    pub seed: u64,
    pub sys: ParticleSystem,
    pub exact: Vec<f64>,
}

impl Trial {
    pub fn new(seed: u64, n: usize, l: f64, cache: &ReferenceCache) -> Result<Trial> {
        let sys = gen_system(seed, n, l)?;
        let exact = cache.exact_potential(seed, &sys)?;
        Ok(Trial { seed, sys, exact })
    }

    pub fn reference_far(&self, split: &SplitSpec) -> Result<Vec<f64>> {
        reference_far_field(&self.sys, split, &self.exact)
    }
}

fn trials(cfg: &RunConfig) -> Result<Vec<Trial>> {
    let cache = cfg.cache();
    (0..cfg.seeds as u64)
        .into_par_iter()
        .map(|i| Trial::new(cfg.seed + i, cfg.n, cfg.l, &cache))
        .collect()
}

/// Far field by the direct sum (`window = None`) or the fast method.
pub fn far_field(
    sys: &ParticleSystem,
    split: &SplitSpec,
    window: Option<WindowFamily>,
    m: usize,
    p: usize,
) -> Result<Vec<f64>> {
    match window {
        None => direct_fourier_sum_any(sys, split, m),
        Some(w) => {
            let plan = EwaldPlan::new(split.clone(), WindowSpec::new(w, p, m, sys.box_length())?)?;
            fast_fourier_sum(sys, &plan)
        }
    }
}

/// Smallest m in [lo, m_max] with err(m) < eps, assuming err decreases in m:
/// doubling from `guess`, then bisection.
pub fn minimal_grid<F>(lo: usize, guess: usize, m_max: usize, eps: f64, mut err: F) -> Result<Option<(usize, f64)>>
where
    F: FnMut(usize) -> Result<f64>,
{
    let mut seen = BTreeMap::new();
    let mut eval = |m: usize, seen: &mut BTreeMap<usize, f64>| -> Result<f64> {
        if let Some(&e) = seen.get(&m) {
            return Ok(e);
        }
        let e = err(m)?;
        seen.insert(m, e);
        Ok(e)
    };
    let lo = lo.max(1);
    if lo > m_max {
        return Ok(None);
    }
    let mut fail = lo - 1;
    let mut m = guess.clamp(lo, m_max);
    let mut pass = loop {
        if eval(m, &mut seen)? < eps {
            break m;
        }
        fail = m;
        if m >= m_max {
            return Ok(None);
        }
        m = (2 * m).min(m_max);
    };
    while pass - fail > 1 {
        let mid = fail + (pass - fail) / 2;
        if eval(mid, &mut seen)? < eps {
            pass = mid;
        } else {
            fail = mid;
        }
    }
    Ok(Some((pass, seen[&pass])))
}

fn median_usize(mut v: Vec<usize>) -> usize {
    v.sort_unstable();
    v[v.len() / 2]
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolutionRow {
    pub split: SplitFamily,
    pub window: Option<WindowFamily>,
    pub eps: f64,
    pub shape: f64,
    pub m: usize,
    #[serde(rename = "P")]
    pub p: Option<usize>,
    pub measured_error: f64,
    pub converged: bool,
}

struct SeedResult {
    m: usize,
    p: Option<usize>,
    err: f64,
}

fn resolve_seed(cfg: &RunConfig, trial: &Trial, split: &SplitSpec, eps: f64) -> Result<Option<SeedResult>> {
    let reference = trial.reference_far(split)?;
    let sys = &trial.sys;
    let rel = |window: Option<WindowFamily>, m: usize, p: usize| -> Result<f64> {
        rel_l2_error(&far_field(sys, split, window, m, p)?, &reference)
    };
    let l = cfg.l;
    // starting guess from the band edge (PSWF) or twice it (Gaussian)
    let band_m = ((1.0 / eps).ln() * l / (PI * cfg.r_c)).ceil() as usize;
    let guess = match split.family() {
        SplitFamily::Pswf => (split.shape() * l / (PI * cfg.r_c)).floor() as usize,
        SplitFamily::Gaussian => 2 * band_m * 4 / 5,
    }
    .max(2);
    let m_max = cfg.m_max;

    let Some(window) = cfg.window_family else {
        return Ok(minimal_grid(2, guess, m_max, eps, |m| rel(None, m, 0))?.map(|(m, err)| SeedResult {
            m,
            p: None,
            err,
        }));
    };
    if let Some(p) = cfg.support {
        return Ok(minimal_grid(p.max(2), guess.max(p), m_max, eps, |m| rel(Some(window), m, p))?
            .map(|(m, err)| SeedResult { m, p: Some(p), err }));
    }
    match split.family() {
        SplitFamily::Pswf => {
            // smallest P whose plateau, at the band-edge grid, is below eps
            let m_b = (split.band_limit() * l / PI).ceil() as usize;
            let m_b = m_b.min(m_max);
            let mut chosen = None;
            for p in 2..=MAX_SUPPORT.min(m_b) {
                if rel(Some(window), m_b, p)? < eps {
                    chosen = Some(p);
                    break;
                }
            }
            let Some(p) = chosen else { return Ok(None) };
            Ok(minimal_grid(p, guess.max(p), m_b, eps, |m| rel(Some(window), m, p))?
                .map(|(m, err)| SeedResult { m, p: Some(p), err }))
        }
        SplitFamily::Gaussian => {
            let Some((m_d, _)) = minimal_grid(2, guess, m_max, eps, |m| rel(None, m, 0))? else {
                return Ok(None);
            };
            let m = ((GAUSSIAN_GRID_FACTOR * m_d as f64).ceil() as usize).min(m_max);
            for p in 2..=MAX_SUPPORT.min(m) {
                let err = rel(Some(window), m, p)?;
                if err < eps {
                    return Ok(Some(SeedResult { m, p: Some(p), err }));
                }
            }
            Ok(None)
        }
    }
}

/// Minimal grid (and support) reaching each tolerance, as a median over seeds.
pub fn sweep_resolution(cfg: &RunConfig) -> Result<Vec<ResolutionRow>> {
    cfg.validate()?;
    let Sweep::Tolerances { eps } = &cfg.sweep else {
        return Err(bad("sweep-resolution needs a tolerance list".into()));
    };
    let trials = trials(cfg)?;
    let mut rows = Vec::new();
    for &e in eps {
        let split = cfg.split_for(Some(e))?;
        let per_seed: Vec<Option<SeedResult>> = trials
            .par_iter()
            .map(|t| resolve_seed(cfg, t, &split, e))
            .collect::<Result<_>>()?;
        let converged = per_seed.iter().all(Option::is_some);
        let done: Vec<&SeedResult> = per_seed.iter().flatten().collect();
        let row = if done.is_empty() {
            ResolutionRow {
                split: cfg.split_family,
                window: cfg.window_family,
                eps: e,
                shape: split.shape(),
                m: cfg.m_max,
                p: cfg.support,
                measured_error: f64::NAN,
                converged: false,
            }
        } else {
            ResolutionRow {
                split: cfg.split_family,
                window: cfg.window_family,
                eps: e,
                shape: split.shape(),
                m: median_usize(done.iter().map(|r| r.m).collect()),
                p: done[0].p.map(|_| median_usize(done.iter().filter_map(|r| r.p).collect())),
                measured_error: median(done.iter().map(|r| r.err).collect()),
                converged,
            }
        };
        rows.push(row);
    }
    rows.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceRow {
    pub c_s: f64,
    pub c_w: f64,
    pub m: usize,
    #[serde(rename = "P")]
    pub p: usize,
    pub rms_error: f64,
}

/// Absolute RMS error of the fast far field over an (m, P) grid or over
/// PSWF shape pairs (c_s, c_w), median over seeds.
pub fn sweep_error_surface(cfg: &RunConfig) -> Result<Vec<SurfaceRow>> {
    cfg.validate()?;
    let trials = trials(cfg)?;
    let l = cfg.l;
    let mut points: Vec<(SplitSpec, WindowSpec)> = Vec::new();
    match &cfg.sweep {
        Sweep::Grid { m, p } => {
            let window = cfg
                .window_family
                .ok_or_else(|| bad("sweep-surface needs a window family".into()))?;
            for &mm in m {
                let split = match (cfg.split_family, cfg.split_shape) {
                    (_, Some(_)) => cfg.split_for(None)?,
                    (SplitFamily::Pswf, None) => make_pswf_split(PI * cfg.r_c * mm as f64 / l, cfg.r_c)?,
                    (SplitFamily::Gaussian, None) => return Err(bad("Gaussian split needs --split-shape".into())),
                };
                for &pp in p {
                    if pp <= mm {
                        points.push((split.clone(), WindowSpec::new(window, pp, mm, l)?));
                    }
                }
            }
        }
        Sweep::Shapes { c_s, c_w } => {
            if cfg.split_family != SplitFamily::Pswf || cfg.window_family != Some(WindowFamily::Pswf) {
                return Err(bad("shape sweeps are defined for the PSWF split and window".into()));
            }
            for &cs in c_s {
                let split = make_pswf_split(cs, cfg.r_c)?;
                let m = (l * cs / (PI * cfg.r_c) - 1e-9).ceil() as usize;
                for &cw in c_w {
                    let alpha = cfg.r_c * cw / cs;
                    let w = WindowSpec::pswf_with(cw, alpha, m, l)?;
                    if w.support() <= m {
                        points.push((split.clone(), w));
                    }
                }
            }
        }
        Sweep::Tolerances { .. } => return Err(bad("sweep-surface needs a grid or shape sweep".into())),
    }
    let mut rows = Vec::new();
    for (split, window) in points {
        let (m, p) = (window.grid_size(), window.support());
        let c_w = window.shape();
        let plan = EwaldPlan::new(split.clone(), window)?;
        let errs: Vec<f64> = trials
            .par_iter()
            .map(|t| rms_error(&fast_fourier_sum(&t.sys, &plan)?, &t.reference_far(&split)?))
            .collect::<Result<_>>()?;
        rows.push(SurfaceRow {
            c_s: split.shape(),
            c_w,
            m,
            p,
            rms_error: median(errs),
        });
    }
    rows.sort_by(|a, b| (a.c_s, a.c_w, a.m, a.p).partial_cmp(&(b.c_s, b.c_w, b.m, b.p)).unwrap());
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToleranceRow {
    pub eps: f64,
    pub seed: u64,
    pub n: usize,
    pub r_c: f64,
    pub c_s: f64,
    pub c_w: f64,
    pub m: usize,
    #[serde(rename = "P")]
    pub p: usize,
    pub predicted_error: f64,
    pub measured_error: f64,
}

/// Run the automatic parameter selection per tolerance and measure the
/// absolute RMS error of the resulting fast far field.
pub fn tolerance_check(cfg: &RunConfig) -> Result<Vec<ToleranceRow>> {
    cfg.validate()?;
    let Sweep::Tolerances { eps } = &cfg.sweep else {
        return Err(bad("tolerance-check needs a tolerance list".into()));
    };
    let trials = trials(cfg)?;
    let mut rows = Vec::new();
    for &e in eps {
        let per: Vec<ToleranceRow> = trials
            .par_iter()
            .map(|t| {
                let inp = ErrorModelInput::for_system(e, cfg.r_c, &t.sys)?;
                let params = select_parameters(&inp)?;
                let plan = EwaldPlan::for_parameters(&params)?;
                let far = fast_fourier_sum(&t.sys, &plan)?;
                let measured = rms_error(&far, &t.reference_far(plan.split())?)?;
                Ok(ToleranceRow {
                    eps: e,
                    seed: t.seed,
                    n: cfg.n,
                    r_c: cfg.r_c,
                    c_s: params.c_s,
                    c_w: params.c_w,
                    m: params.m,
                    p: params.p,
                    predicted_error: params.predicted_split_err.hypot(params.predicted_alias_err),
                    measured_error: measured,
                })
            })
            .collect::<Result<_>>()?;
        rows.extend(per);
    }
    rows.sort_by(|a, b| b.eps.total_cmp(&a.eps).then(a.seed.cmp(&b.seed)));
    Ok(rows)
}

/// A row of one of the sweep CSV files.
pub trait CsvRecord {
    fn header() -> &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn split_name(f: SplitFamily) -> &'static str {
    match f {
        SplitFamily::Pswf => "pswf",
        SplitFamily::Gaussian => "gaussian",
    }
}

fn window_name(f: Option<WindowFamily>) -> &'static str {
    match f {
        None => "direct",
        Some(WindowFamily::Pswf) => "pswf",
        Some(WindowFamily::Gaussian) => "gaussian",
        Some(WindowFamily::Bspline) => "bspline",
    }
}

impl CsvRecord for ResolutionRow {
    fn header() -> &'static [&'static str] {
        &["split", "window", "eps", "shape", "m", "P", "measured_error", "converged"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            split_name(self.split).into(),
            window_name(self.window).into(),
            self.eps.to_string(),
            self.shape.to_string(),
            self.m.to_string(),
            opt(self.p),
            self.measured_error.to_string(),
            self.converged.to_string(),
        ]
    }
}

impl CsvRecord for SurfaceRow {
    fn header() -> &'static [&'static str] {
        &["c_s", "c_w", "m", "P", "rms_error"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.c_s.to_string(),
            self.c_w.to_string(),
            self.m.to_string(),
            self.p.to_string(),
            self.rms_error.to_string(),
        ]
    }
}

impl CsvRecord for ToleranceRow {
    fn header() -> &'static [&'static str] {
        &["eps", "seed", "n", "r_c", "c_s", "c_w", "m", "P", "predicted_error", "measured_error"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.eps.to_string(),
            self.seed.to_string(),
            self.n.to_string(),
            self.r_c.to_string(),
            self.c_s.to_string(),
            self.c_w.to_string(),
            self.m.to_string(),
            self.p.to_string(),
            self.predicted_error.to_string(),
            self.measured_error.to_string(),
        ]
    }
}

/// CSV text under a version comment; every row carries the config hash.
pub fn rows_to_csv<R: CsvRecord>(hash: &str, rows: &[R]) -> Result<String> {
    let mut out = format!("{CSV_VERSION} config={hash}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let io = |e: csv::Error| EwaldError::Io(e.to_string());
        w.write_record(std::iter::once("config").chain(R::header().iter().copied())).map_err(io)?;
        for r in rows {
            w.write_record(std::iter::once(hash.to_string()).chain(r.fields())).map_err(io)?;
        }
        w.flush()?;
    }
    Ok(String::from_utf8(out).expect("csv output is utf-8"))
}

pub fn write_rows<P: AsRef<Path>, R: CsvRecord>(path: P, hash: &str, rows: &[R]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, rows_to_csv(hash, rows)?)?;
    Ok(())
}
