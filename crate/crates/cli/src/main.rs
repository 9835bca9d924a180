use clap::{Args, Parser, Subcommand, ValueEnum};
use prolate_ewald::error::EwaldError;
use prolate_ewald::ewald::{
    exact_potential, fast_fourier_sum, gen_system, real_space_sum, rms_error, total_energy, EwaldPlan,
    ParticleSystem,
};
use prolate_ewald::harness::{
    rows_to_csv, sweep_error_surface, sweep_resolution, tolerance_check, ReferencePolicy, RunConfig, Sweep,
};
use prolate_ewald::params::{select_parameters, ErrorModelInput, EwaldParameters};
use prolate_ewald::split::{make_pswf_split, SplitFamily};
use prolate_ewald::window::{WindowFamily, WindowSpec};
use serde::Deserialize;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "prolate-ewald", version, about = "Fast Ewald summation with prolate spheroidal splits")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Select c_s, c_w, m, P for a tolerance.
    Plan(Settings),
    /// Compute potentials for one system.
    Solve(Settings),
    /// Minimal grid (and support) per tolerance.
    SweepResolution(Settings),
    /// Error over an (m, P) grid or (c_s, c_w) pairs.
    SweepSurface(Settings),
    /// Measured error of the automatic parameters per tolerance.
    ToleranceCheck(Settings),
    /// Write a random neutral system.
    GenSystem(Settings),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SplitArg {
    Pswf,
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum WindowArg {
    Pswf,
    Gaussian,
    Bspline,
    /// Direct Fourier sum, no window.
    Direct,
}

/// Flags; the JSON config file uses the same names.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct Settings {
    /// JSON file with any of these settings; flags win.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeds; sweep results are medians.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "box")]
    #[serde(rename = "box")]
    box_length: Option<f64>,
    #[arg(long)]
    rc: Option<f64>,
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
    #[arg(long, value_enum)]
    window: Option<WindowArg>,
    /// Tolerances, comma separated.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    /// Grid sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    m: Vec<usize>,
    /// Window supports, comma separated.
    #[arg(long, value_delimiter = ',')]
    support: Vec<usize>,
    /// c_s (PSWF) or sigma (Gaussian); otherwise derived from each tolerance.
    #[arg(long)]
    split_shape: Option<f64>,
    /// Split shapes for a (c_s, c_w) sweep.
    #[arg(long, value_delimiter = ',')]
    cs: Vec<f64>,
    /// Window shapes for a (c_s, c_w) sweep.
    #[arg(long, value_delimiter = ',')]
    cw: Vec<f64>,
    #[arg(long)]
    m_max: Option<usize>,
    /// Charge norm for `plan`; taken from the generated system otherwise.
    #[arg(long)]
    rho_norm: Option<f64>,
    /// System file (CSV, or binary with a .bin extension) for `solve`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Compare `solve` output with the exact reference.
    #[arg(long)]
    #[serde(skip)]
    check: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

macro_rules! take {
    ($base:ident, $over:ident; $($f:ident),*) => {
        $( if $over.$f.is_some() { $base.$f = $over.$f.clone(); } )*
    };
}
macro_rules! take_vec {
    ($base:ident, $over:ident; $($f:ident),*) => {
        $( if !$over.$f.is_empty() { $base.$f = $over.$f.clone(); } )*
    };
}

impl Settings {
    fn resolve(self) -> Result<Settings, EwaldError> {
        let Some(path) = &self.config else { return Ok(self) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| EwaldError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut base: Settings =
            serde_json::from_str(&text).map_err(|e| EwaldError::Config(format!("{}: {e}", path.display())))?;
        let over = &self;
        take!(base, over; seed, seeds, n, box_length, rc, split, window, split_shape, m_max, rho_norm, input, out, cache_dir);
        take_vec!(base, over; eps, m, support, cs, cw);
        base.check = self.check;
        Ok(base)
    }

    fn box_len(&self) -> f64 {
        self.box_length.unwrap_or(1.0)
    }

    fn rc(&self) -> f64 {
        self.rc.unwrap_or(0.1 * self.box_len())
    }

    fn system(&self) -> Result<ParticleSystem, EwaldError> {
        match &self.input {
            Some(p) if p.extension().is_some_and(|e| e == "bin") => ParticleSystem::read_binary(p),
            Some(p) => ParticleSystem::read_csv(p, self.box_length),
            None => gen_system(self.seed.unwrap_or(1), self.n.unwrap_or(100), self.box_len()),
        }
    }

    fn run_config(&self, sweep: Sweep) -> Result<RunConfig, EwaldError> {
        let d = RunConfig::default();
        let support = match self.support.as_slice() {
            [] => None,
            [p] => Some(*p),
            _ if matches!(sweep, Sweep::Grid { .. }) => None,
            many => return Err(EwaldError::Config(format!("expected one support, got {many:?}"))),
        };
        let cfg = RunConfig {
            seed: self.seed.unwrap_or(d.seed),
            seeds: self.seeds.unwrap_or(d.seeds),
            n: self.n.unwrap_or(d.n),
            l: self.box_len(),
            r_c: self.rc(),
            split_family: match self.split.unwrap_or(SplitArg::Pswf) {
                SplitArg::Pswf => SplitFamily::Pswf,
                SplitArg::Gaussian => SplitFamily::Gaussian,
            },
            window_family: match self.window.unwrap_or(WindowArg::Pswf) {
                WindowArg::Pswf => Some(WindowFamily::Pswf),
                WindowArg::Gaussian => Some(WindowFamily::Gaussian),
                WindowArg::Bspline => Some(WindowFamily::Bspline),
                WindowArg::Direct => None,
            },
            support,
            split_shape: self.split_shape,
            sweep,
            output_dir: self.out.as_ref().and_then(|p| p.parent().map(Path::to_path_buf)),
            reference_policy: if self.cache_dir.is_some() {
                ReferencePolicy::Cache
            } else {
                ReferencePolicy::Compute
            },
            cache_dir: self.cache_dir.clone(),
            m_max: self.m_max.unwrap_or(d.m_max),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn tolerances(&self) -> Sweep {
        let eps = if self.eps.is_empty() { vec![1e-6] } else { self.eps.clone() };
        Sweep::Tolerances { eps }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), EwaldError> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn plan_table(p: &EwaldParameters) -> String {
    let rows = [
        ("c_s", format!("{:.6}", p.c_s)),
        ("c_w", format!("{:.6}", p.c_w)),
        ("alpha", format!("{:.6}", p.alpha)),
        ("m", p.m.to_string()),
        ("P", p.p.to_string()),
        ("split error", format!("{:.3e}", p.predicted_split_err)),
        ("alias error", format!("{:.3e}", p.predicted_alias_err)),
        ("extrapolated", p.extrapolated.to_string()),
    ];
    rows.iter().map(|(k, v)| format!("{k:<14}{v:>14}\n")).collect()
}

fn cmd_plan(s: &Settings) -> Result<u8, EwaldError> {
    let eps = s.eps.first().copied().unwrap_or(1e-6);
    let rho = match s.rho_norm {
        Some(r) => r,
        None => s.system()?.charge_norm(),
    };
    let inp = ErrorModelInput::new(eps, s.rc(), s.box_len(), rho)?;
    let params = select_parameters(&inp)?;
    let json = serde_json::to_string_pretty(&params).expect("parameters serialise");
    emit(&s.out, &format!("{}{json}\n", plan_table(&params)))?;
    Ok(0)
}

fn cmd_solve(s: &Settings) -> Result<u8, EwaldError> {
    let sys = s.system()?;
    let l = sys.box_length();
    let r_c = s.rc();
    let plan = match (s.m.first(), s.support.first()) {
        (Some(&m), Some(&p)) => {
            let c_s = s.split_shape.unwrap_or(PI * r_c * m as f64 / l);
            EwaldPlan::new(make_pswf_split(c_s, r_c)?, WindowSpec::pswf(p, m, l)?)?
        }
        (None, None) => {
            let eps = s.eps.first().copied().unwrap_or(1e-6);
            let params = select_parameters(&ErrorModelInput::for_system(eps, r_c, &sys)?)?;
            EwaldPlan::for_parameters(&params)?
        }
        _ => return Err(EwaldError::Config("solve needs both --m and --support, or neither".into())),
    };
    let split = plan.split().clone();
    let local = real_space_sum(&sys, &split)?;
    let far = fast_fourier_sum(&sys, &plan)?;
    let self_term = split.self_term();
    let phi: Vec<f64> = (0..sys.len())
        .map(|i| local[i] + far[i] - self_term * sys.charges()[i])
        .collect();
    eprintln!(
        "m = {}, P = {}, c_s = {:.4}, energy = {:.12e}",
        plan.grid_size(),
        plan.window().support(),
        split.shape(),
        total_energy(&sys, &phi)
    );
    if s.check {
        let exact = exact_potential(&sys)?;
        eprintln!("rms error vs reference = {:.3e}", rms_error(&phi, &exact)?);
    }
    let mut text = String::from("# prolate-ewald v1\nx,y,z,q,phi\n");
    for ((p, q), f) in sys.positions().iter().zip(sys.charges()).zip(&phi) {
        text.push_str(&format!("{},{},{},{},{}\n", p[0], p[1], p[2], q, f));
    }
    emit(&s.out, &text)?;
    Ok(0)
}

fn cmd_gen(s: &Settings) -> Result<u8, EwaldError> {
    let sys = gen_system(s.seed.unwrap_or(1), s.n.unwrap_or(100), s.box_len())?;
    match &s.out {
        Some(p) if p.extension().is_some_and(|e| e == "bin") => sys.write_binary(p)?,
        Some(p) => sys.write_csv(p)?,
        None => sys.write_csv_to(std::io::stdout().lock())?,
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, EwaldError> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| EwaldError::Config(e.to_string()))?;
    }
    match cli.cmd {
        Cmd::Plan(s) => cmd_plan(&s.resolve()?),
        Cmd::Solve(s) => cmd_solve(&s.resolve()?),
        Cmd::GenSystem(s) => cmd_gen(&s.resolve()?),
        Cmd::SweepResolution(s) => {
            let s = s.resolve()?;
            let cfg = s.run_config(s.tolerances())?;
            let rows = sweep_resolution(&cfg)?;
            emit(&s.out, &rows_to_csv(&cfg.hash(), &rows)?)?;
            Ok(if rows.iter().all(|r| r.converged) { 0 } else { 3 })
        }
        Cmd::SweepSurface(s) => {
            let s = s.resolve()?;
            let sweep = if !s.cs.is_empty() || !s.cw.is_empty() {
                Sweep::Shapes {
                    c_s: s.cs.clone(),
                    c_w: s.cw.clone(),
                }
            } else {
                Sweep::Grid {
                    m: s.m.clone(),
                    p: s.support.clone(),
                }
            };
            let cfg = s.run_config(sweep)?;
            let rows = sweep_error_surface(&cfg)?;
            emit(&s.out, &rows_to_csv(&cfg.hash(), &rows)?)?;
            Ok(0)
        }
        Cmd::ToleranceCheck(s) => {
            let s = s.resolve()?;
            let cfg = s.run_config(s.tolerances())?;
            let rows = tolerance_check(&cfg)?;
            emit(&s.out, &rows_to_csv(&cfg.hash(), &rows)?)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                EwaldError::Config(_) | EwaldError::Domain(_) | EwaldError::OutOfBand { .. } => 2,
                _ => 1,
            })
        }
    }
}
