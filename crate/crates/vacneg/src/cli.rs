//! Command-line front end: correlator/curve/radius/beta/wavefunction
//! subcommands plus the `validate` harness that replays the published
//! reference tables.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical error.

use crate::analysis::{
    curve_to_csv, default_window, extrapolate_beta, fit_beta, radius_slope, sphere_radius,
    sweep_curve, DiameterNorm, FitModel,
};
use crate::correlators::{
    correlator_finite, load_cache, save_cache, CorrelatorKernel, Dispersion, Kind, LatticeConfig,
};
use crate::geometry::{build_region, place_pair, place_pair_1d, Boundary};
use crate::mpnum::PrecisionContext;
use crate::negativity::{evaluate_pair, EvalOptions};
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "vacneg", version, about = "Lattice scalar-field vacuum negativity calculator")]
pub struct CliArgs {
    #[command(subcommand)]
    pub command: Command,

    /// Decimal digits of working precision
    #[arg(long, global = true)]
    pub digits: Option<u32>,

    /// Worker pool size for sweeps (default: available parallelism)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Flat key=value config file; flags override file values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Correlator cache directory (env VACNEG_CACHE_DIR overrides)
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct PhysicsOpts {
    /// Spatial dimension (1 or 2)
    #[arg(long)]
    pub dim: Option<usize>,

    /// Scalar mass in lattice units
    #[arg(long)]
    pub mass: Option<f64>,

    /// IR regulator for the 1D massless case
    #[arg(long)]
    pub mu: Option<f64>,

    /// Dispersion: standard | continuum-p
    #[arg(long)]
    pub dispersion: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print a two-point function value
    Correlator {
        #[command(flatten)]
        phys: PhysicsOpts,
        /// phiphi | pipi
        #[arg(long)]
        kind: String,
        /// displacement, e.g. "3" (1D) or "3,0" (2D)
        #[arg(long)]
        r: Option<String>,
        /// finite-volume extent; omitted = infinite volume
        #[arg(long = "finite-L")]
        finite_l: Option<usize>,
    },
    /// Negativity-vs-separation sweep, CSV output
    Curve {
        #[command(flatten)]
        phys: PhysicsOpts,
        #[arg(long)]
        dlat: usize,
        #[arg(long, default_value = "N")]
        boundary: String,
        #[arg(long, default_value_t = 1)]
        rmin: i64,
        #[arg(long)]
        rmax: i64,
        #[arg(long, default_value_t = 1)]
        rstep: i64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// write data to standard output
        #[arg(long)]
        stdout: bool,
    },
    /// Negativity-sphere radius
    Radius {
        #[command(flatten)]
        phys: PhysicsOpts,
        #[arg(long)]
        dlat: usize,
        #[arg(long, default_value = "N")]
        boundary: String,
    },
    /// Decay-constant fit over a freshly computed curve
    Beta {
        #[command(flatten)]
        phys: PhysicsOpts,
        #[arg(long)]
        dlat: usize,
        #[arg(long, default_value = "N")]
        boundary: String,
        #[arg(long)]
        rmin: i64,
        #[arg(long)]
        rmax: i64,
        #[arg(long, default_value_t = 1)]
        rstep: i64,
        /// normalization: dlat | davg
        #[arg(long, default_value = "dlat")]
        norm: String,
        /// include the power-law term in the fit model
        #[arg(long)]
        power_term: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        stdout: bool,
    },
    /// Ground-state wavefunction of G H^Gamma as (x, y, psi) triples
    Wavefunction {
        #[command(flatten)]
        phys: PhysicsOpts,
        #[arg(long)]
        dlat: usize,
        #[arg(long, default_value = "N")]
        boundary: String,
        #[arg(long)]
        rtilde: i64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        stdout: bool,
    },
    /// Replay the published reference tables; nonzero exit on any failure
    Validate {
        /// quick | full
        #[arg(default_value = "quick")]
        suite: String,
        /// write the machine-readable report here
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

pub fn run() -> i32 {
    let args = match CliArgs::try_parse() {
        Ok(a) => a,
        Err(e) => {
            // help/version requests are success, anything else is usage error
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_parsed(args) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            1
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("numerical error: {msg}");
            2
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
}

impl<E: std::fmt::Display> From<E> for CliError
where
    E: std::error::Error,
{
    fn from(e: E) -> Self {
        CliError::Numeric(format!("{e}"))
    }
}

fn parse_config_file(path: &Path) -> Result<std::collections::HashMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("config file {path:?}: {e}")))?;
    let mut map = std::collections::HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line without '=': {line}")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Effective run parameters after merging flags over config-file values.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub digits: u32,
    pub dim: usize,
    pub mass: f64,
    pub mu: f64,
    pub dispersion: Dispersion,
    pub cache_dir: Option<PathBuf>,
}

impl RunConfig {
    fn resolve(
        args_digits: Option<u32>,
        phys: Option<&PhysicsOpts>,
        cache_dir: Option<&PathBuf>,
        file: &std::collections::HashMap<String, String>,
        default_dim: usize,
    ) -> Result<Self, CliError> {
        let get = |k: &str| file.get(k).cloned();
        let digits = args_digits
            .or_else(|| get("digits").and_then(|v| v.parse().ok()))
            .unwrap_or(PrecisionContext::DEFAULT_DIGITS);
        let dim = phys
            .and_then(|p| p.dim)
            .or_else(|| get("dim").and_then(|v| v.parse().ok()))
            .unwrap_or(default_dim);
        let mass = phys
            .and_then(|p| p.mass)
            .or_else(|| get("mass").and_then(|v| v.parse().ok()))
            .unwrap_or(0.0);
        let mu = phys
            .and_then(|p| p.mu)
            .or_else(|| get("mu").and_then(|v| v.parse().ok()))
            .unwrap_or(1e-5);
        let disp_str = phys
            .and_then(|p| p.dispersion.clone())
            .or_else(|| get("dispersion"))
            .unwrap_or_else(|| "standard".to_string());
        let dispersion = match disp_str.as_str() {
            "standard" => Dispersion::Standard,
            "continuum-p" | "continuum_p" => Dispersion::ContinuumP,
            other => return Err(CliError::Usage(format!("unknown dispersion: {other}"))),
        };
        let cache_dir = std::env::var("VACNEG_CACHE_DIR")
            .ok()
            .map(PathBuf::from)
            .or_else(|| cache_dir.cloned())
            .or_else(|| get("cache_dir").map(PathBuf::from));
        Ok(Self {
            digits,
            dim,
            mass,
            mu,
            dispersion,
            cache_dir,
        })
    }

    pub fn context(&self) -> Result<PrecisionContext, CliError> {
        PrecisionContext::new(self.digits).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn lattice(&self) -> Result<LatticeConfig, CliError> {
        let cfg = LatticeConfig::new(self.dim, self.mass, self.dispersion)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if self.dim == 1 && self.mass == 0.0 {
            cfg.with_ir_regulator(self.mu)
                .map_err(|e| CliError::Usage(e.to_string()))
        } else {
            Ok(cfg)
        }
    }

    fn cache_path(&self) -> Option<PathBuf> {
        self.cache_dir.as_ref().map(|d| {
            d.join(format!(
                "corr_d{}_m{}_{}_{}.bin",
                self.dim,
                self.mass,
                match self.dispersion {
                    Dispersion::Standard => "standard",
                    Dispersion::ContinuumP => "continuum_p",
                },
                self.digits
            ))
        })
    }

    pub fn kernel(&self, ctx: &PrecisionContext) -> Result<CorrelatorKernel, CliError> {
        let kernel = CorrelatorKernel::new(self.lattice()?, ctx);
        if let Some(path) = self.cache_path() {
            if path.exists() {
                match load_cache(&kernel, &path) {
                    Ok(n) => eprintln!("loaded {n} cached correlators from {path:?}"),
                    Err(e) => eprintln!("ignoring cache {path:?}: {e}"),
                }
            }
        }
        Ok(kernel)
    }

    pub fn persist_kernel(&self, kernel: &CorrelatorKernel) {
        if let Some(path) = self.cache_path() {
            if let Some(dir) = path.parent() {
                let _ = std::fs::create_dir_all(dir);
            }
            match save_cache(kernel, &path) {
                Ok(()) => eprintln!("saved correlator cache to {path:?}"),
                Err(e) => eprintln!("failed to save cache: {e}"),
            }
        }
    }
}

fn parse_boundary(s: &str) -> Result<Boundary, CliError> {
    match s {
        "N" | "n" => Ok(Boundary::N),
        "S" | "s" => Ok(Boundary::S),
        other => Err(CliError::Usage(format!("unknown boundary: {other}"))),
    }
}

/// Write atomically: temp file in the same directory, then rename.
fn atomic_write(path: &Path, data: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, data).map_err(|e| CliError::Numeric(format!("write {tmp:?}: {e}")))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::Numeric(format!("rename to {path:?}: {e}")))?;
    Ok(())
}

fn emit(data: &str, out: Option<&PathBuf>, stdout: bool) -> Result<(), CliError> {
    if let Some(path) = out {
        atomic_write(path, data)?;
        eprintln!("wrote {path:?}");
    }
    if stdout || out.is_none() {
        print!("{data}");
        std::io::stdout().flush().ok();
    }
    Ok(())
}

fn run_parsed(args: CliArgs) -> Result<(), CliError> {
    if let Some(jobs) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .ok();
    }
    let file_cfg = match &args.config {
        Some(p) => parse_config_file(p)?,
        None => Default::default(),
    };

    match &args.command {
        Command::Correlator {
            phys,
            kind,
            r,
            finite_l,
        } => {
            let rc = RunConfig::resolve(args.digits, Some(phys), args.cache_dir.as_ref(), &file_cfg, 1)?;
            let ctx = rc.context()?;
            let lattice = rc.lattice()?;
            let kind = match kind.as_str() {
                "phiphi" => Kind::PhiPhi,
                "pipi" => Kind::PiPi,
                other => return Err(CliError::Usage(format!("unknown kind: {other}"))),
            };
            let r = r
                .as_ref()
                .ok_or_else(|| CliError::Usage("--r is required".into()))?;
            let disp: Vec<i64> = r
                .split(',')
                .map(|t| t.trim().parse::<i64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Usage(format!("bad --r: {e}")))?;
            if disp.len() != rc.dim {
                return Err(CliError::Usage(format!(
                    "--r has {} components but dim = {}",
                    disp.len(),
                    rc.dim
                )));
            }
            let v = match finite_l {
                Some(l) => correlator_finite(kind, &disp, *l, &lattice, &ctx)
                    .map_err(|e| CliError::Numeric(e.to_string()))?,
                None => {
                    let kernel = rc.kernel(&ctx)?;
                    let val = kernel
                        .get(kind, &disp)
                        .map_err(|e| CliError::Numeric(e.to_string()))?;
                    rc.persist_kernel(&kernel);
                    val
                }
            };
            println!("{}", ctx.to_decimal(&v));
            Ok(())
        }
        Command::Curve {
            phys,
            dlat,
            boundary,
            rmin,
            rmax,
            rstep,
            out,
            stdout,
        } => {
            let rc = RunConfig::resolve(args.digits, Some(phys), args.cache_dir.as_ref(), &file_cfg, 2)?;
            let ctx = rc.context()?;
            let kernel = rc.kernel(&ctx)?;
            let boundary = parse_boundary(boundary)?;
            if *rmin < 1 || *rmax < *rmin || *rstep < 1 {
                return Err(CliError::Usage("need 1 <= rmin <= rmax, rstep >= 1".into()));
            }
            let rts: Vec<i64> = (*rmin..=*rmax).step_by(*rstep as usize).collect();
            eprintln!(
                "sweeping d_lat={dlat} {b} dim={d} over {n} separations...",
                b = boundary.tag(),
                d = rc.dim,
                n = rts.len()
            );
            let curve = sweep_curve(*dlat, boundary, rc.dim, &rts, &kernel, &ctx)
                .map_err(|e| CliError::Numeric(e.to_string()))?;
            rc.persist_kernel(&kernel);
            emit(&curve_to_csv(&curve, &ctx), out.as_ref(), *stdout)
        }
        Command::Radius {
            phys,
            dlat,
            boundary,
        } => {
            let rc = RunConfig::resolve(args.digits, Some(phys), args.cache_dir.as_ref(), &file_cfg, 2)?;
            let ctx = rc.context()?;
            let kernel = rc.kernel(&ctx)?;
            let boundary = parse_boundary(boundary)?;
            let r = sphere_radius(*dlat, boundary, rc.dim, &kernel, &ctx)
                .map_err(|e| CliError::Numeric(e.to_string()))?;
            rc.persist_kernel(&kernel);
            println!("rtilde_ns={} ratio={:.3}", r.rtilde_ns, r.ratio);
            Ok(())
        }
        Command::Beta {
            phys,
            dlat,
            boundary,
            rmin,
            rmax,
            rstep,
            norm,
            power_term,
            out,
            stdout,
        } => {
            let rc = RunConfig::resolve(args.digits, Some(phys), args.cache_dir.as_ref(), &file_cfg, 2)?;
            let ctx = rc.context()?;
            let kernel = rc.kernel(&ctx)?;
            let boundary = parse_boundary(boundary)?;
            let norm = match norm.as_str() {
                "dlat" => DiameterNorm::DLat,
                "davg" => DiameterNorm::DAvg,
                other => return Err(CliError::Usage(format!("unknown norm: {other}"))),
            };
            let rts: Vec<i64> = (*rmin..=*rmax).step_by(*rstep as usize).collect();
            let curve = sweep_curve(*dlat, boundary, rc.dim, &rts, &kernel, &ctx)
                .map_err(|e| CliError::Numeric(e.to_string()))?;
            rc.persist_kernel(&kernel);
            let window = default_window(&curve, None);
            let model = if *power_term {
                FitModel::PowerLawExp
            } else {
                FitModel::ExpOnly
            };
            let fit = fit_beta(&curve, norm, &window, model)
                .map_err(|e| CliError::Numeric(e.to_string()))?;
            let report = serde_json::to_string_pretty(&fit).unwrap();
            emit(&format!("{report}\n"), out.as_ref(), *stdout)
        }
        Command::Wavefunction {
            phys,
            dlat,
            boundary,
            rtilde,
            out,
            stdout,
        } => {
            let rc = RunConfig::resolve(args.digits, Some(phys), args.cache_dir.as_ref(), &file_cfg, 2)?;
            let ctx = rc.context()?;
            let kernel = rc.kernel(&ctx)?;
            let boundary = parse_boundary(boundary)?;
            let pair = if rc.dim == 1 {
                place_pair_1d(*dlat, *rtilde)
            } else {
                let region = build_region(*dlat, boundary)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                place_pair(&region, *rtilde)
            };
            eprintln!(
                "solving {n}-site pair ground state...",
                n = pair.union_sites().len()
            );
            let res = evaluate_pair(&pair, &kernel, &ctx, EvalOptions { want_ground: true })
                .map_err(|e| CliError::Numeric(e.to_string()))?;
            rc.persist_kernel(&kernel);
            let gs = res.ground_state.as_ref().expect("requested ground state");
            let mut data = String::from("x,y,psi\n");
            for (x, y, amp) in &gs.amplitudes {
                data.push_str(&format!("{x},{y},{}\n", format_amp(amp)));
            }
            emit(&data, out.as_ref(), *stdout)
        }
        Command::Validate { suite, json } => {
            let quick = match suite.as_str() {
                "quick" => true,
                "full" => false,
                other => return Err(CliError::Usage(format!("unknown suite: {other}"))),
            };
            let report = crate::cli::validate::run_suite(quick, args.digits);
            let passed = report.iter().filter(|c| c.pass).count();
            for c in &report {
                println!(
                    "[{}] {} ({}): expected {}, got {}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.id,
                    c.paper_ref,
                    c.expected,
                    c.got
                );
            }
            println!("{passed}/{} checks passed", report.len());
            if let Some(path) = json {
                let doc = serde_json::to_string_pretty(&report).unwrap();
                atomic_write(path, &doc)?;
            }
            if passed == report.len() {
                Ok(())
            } else {
                Err(CliError::Numeric(format!(
                    "{} validation checks failed",
                    report.len() - passed
                )))
            }
        }
    }
}

fn format_amp(v: &crate::mpnum::MpReal) -> String {
    // fixed-size scientific form, enough digits for table comparisons
    let f = v.to_f64();
    format!("{f:+.10e}")
}

pub mod validate;
