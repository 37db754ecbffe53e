//! Command-line front end. Inputs are the dimensionless ratios of the
//! figure captions (gamma_over_omega0, Omega_over_omega0, kT_over_omega0,
//! dt_omega0, t_max_omega0), supplied as a JSON config file and/or flag
//! overrides. Outputs are RFC-4180-style CSV with a header row and
//! 17-significant-digit floats (lossless f64 round trips), plus JSON for
//! the measure command and sweep sidecars.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::driving::{DrivingSpec, Force, SampledFunction};
use crate::model::{PhysParams, TimeGrid};
use crate::nonmarkov::{
    self, AxisSpec, Backend, PairSpec, SweepParam, SweepRequest, SweepResult, Trajectory,
};
use crate::spectral::{self, NoiseConfig};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Worker-count override read when neither flag nor config set it.
pub const WORKERS_ENV: &str = "QBM_WORKERS";

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScaleKind {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisConfig {
    pub param: SweepParam,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: ScaleKind,
}

impl AxisConfig {
    pub fn values(&self) -> Result<Vec<f64>> {
        grid_values(self.min, self.max, self.points, self.scale)
    }
}

pub fn grid_values(min: f64, max: f64, points: usize, scale: ScaleKind) -> Result<Vec<f64>> {
    if points == 0 {
        return Err(Error::Config("a grid needs at least one point".into()));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    if !(max > min) {
        return Err(Error::Config(format!("grid needs max > min, got [{min}, {max}]")));
    }
    match scale {
        ScaleKind::Linear => Ok((0..points)
            .map(|i| min + (max - min) * i as f64 / (points - 1) as f64)
            .collect()),
        ScaleKind::Log => {
            if !(min > 0.0) {
                return Err(Error::Config("log grid needs min > 0".into()));
            }
            let (la, lb) = (min.ln(), max.ln());
            Ok((0..points)
                .map(|i| (la + (lb - la) * i as f64 / (points - 1) as f64).exp())
                .collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxesConfig {
    pub axis1: AxisConfig,
    pub axis2: AxisConfig,
}

/// Force in config form; the sampled variant points at a CSV of (t, F) rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ForceConfig {
    Constant { value: f64 },
    Sinusoid {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    GaussianPulse { amplitude: f64, center: f64, width: f64 },
    Csv { path: PathBuf },
}

impl ForceConfig {
    fn to_force(&self) -> Result<Force> {
        Ok(match self {
            ForceConfig::Constant { value } => Force::Constant { value: *value },
            ForceConfig::Sinusoid {
                amplitude,
                omega,
                phase,
            } => Force::Sinusoid {
                amplitude: *amplitude,
                omega: *omega,
                phase: *phase,
            },
            ForceConfig::GaussianPulse {
                amplitude,
                center,
                width,
            } => Force::GaussianPulse {
                amplitude: *amplitude,
                center: *center,
                width: *width,
            },
            ForceConfig::Csv { path } => Force::Sampled {
                samples: read_samples_csv(path)?,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingConfig {
    pub d0: f64,
    pub force: ForceConfig,
    /// Bath-mediated memory kernel Lambda(t), sampled as a CSV of (t, value).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bath_kernel_csv: Option<PathBuf>,
}

impl DrivingConfig {
    fn to_spec(&self) -> Result<DrivingSpec> {
        let kernel = match &self.bath_kernel_csv {
            Some(p) => Some(read_samples_csv(p)?),
            None => None,
        };
        DrivingSpec::new(self.d0, self.force.to_force()?, kernel)
    }
}

/// Complete run configuration. `measure` echoes it, sweeps write it as a
/// sidecar, and re-running from the echo reproduces the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub m: f64,
    pub omega0: f64,
    pub gamma_over_omega0: f64,
    #[serde(rename = "Omega_over_omega0")]
    pub cutoff_over_omega0: f64,
    #[serde(rename = "kT_over_omega0")]
    pub kt_over_omega0: f64,
    pub dt_omega0: f64,
    pub t_max_omega0: f64,
    pub pair: PairSpec,
    pub backend: Backend,
    pub series_tol: f64,
    pub n_cap: usize,
    pub increment_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub driving: Option<DrivingConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepAxesConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            m: 1.0,
            omega0: 1.0,
            gamma_over_omega0: 0.1,
            cutoff_over_omega0: 100.0,
            kt_over_omega0: 1.0,
            dt_omega0: 0.01,
            t_max_omega0: 40.0,
            pair: PairSpec::symmetric(3.0),
            backend: Backend::Exact,
            series_tol: 1e-3,
            n_cap: 1_000_000,
            increment_tol: nonmarkov::INCREMENT_TOL,
            driving: None,
            sweep: None,
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn params(&self) -> Result<PhysParams> {
        PhysParams::new(
            self.m,
            self.omega0,
            self.gamma_over_omega0 * self.omega0,
            self.cutoff_over_omega0 * self.omega0,
            self.kt_over_omega0 * self.omega0,
        )
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::from_t_max(self.dt_omega0 / self.omega0, self.t_max_omega0 / self.omega0)
    }

    pub fn noise(&self) -> Result<NoiseConfig> {
        NoiseConfig::new(self.series_tol, self.n_cap)
    }

    fn validate(&self) -> Result<()> {
        if self.backend == Backend::ClLimit && self.gamma_over_omega0 >= 1.0 {
            return Err(Error::Config(
                "cl_limit backend requires gamma < omega0".into(),
            ));
        }
        if self.backend == Backend::ClLimit && self.driving.is_some() {
            return Err(Error::Config("driving is supported on the exact backend only".into()));
        }
        Ok(())
    }
}

fn read_samples_csv(path: &Path) -> Result<SampledFunction> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let a = cols.next().unwrap_or("").trim();
        let b = cols.next().unwrap_or("").trim();
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(t), Ok(v)) => {
                ts.push(t);
                vs.push(v);
            }
            _ if lineno == 0 => continue, // header row
            _ => {
                return Err(Error::Config(format!(
                    "{}:{}: expected two comma-separated numbers",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    SampledFunction::new(ts, vs)
}

// ---------------------------------------------------------------------------
// argument parsing

#[derive(Parser, Debug)]
#[command(
    name = "qbm",
    about = "Exact quantum Brownian motion dynamics and its non-Markovianity measure",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Propagate a coherent-state pair and write per-time moments, the Bures
    /// distance and its finite-difference rate as CSV
    Evolve(CommonArgs),
    /// Compute the non-Markovianity measure for one configuration (JSON)
    Measure(CommonArgs),
    /// Map the measure over a 2-D parameter grid (CSV + JSON config sidecar)
    Sweep(SweepArgs),
    /// Tabulate the resonance curve Omega*(kT) (CSV)
    Resonance(ResonanceArgs),
    /// Dump spectral density, effective density, damping and noise kernels
    /// on a common grid (CSV; the column x is frequency for the densities
    /// and time for the kernels)
    Kernels(KernelsArgs),
    /// Propagate the same pair with the exact solution and the
    /// master-equation limit and write both side by side (CSV)
    CompareMastereq(CommonArgs),
}

#[derive(Args, Debug, Default, Clone)]
struct CommonArgs {
    /// JSON config file; explicit flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long = "gamma_over_omega0")]
    gamma_over_omega0: Option<f64>,
    #[arg(long = "Omega_over_omega0")]
    cutoff_over_omega0: Option<f64>,
    #[arg(long = "kT_over_omega0")]
    kt_over_omega0: Option<f64>,
    #[arg(long = "dt_omega0")]
    dt_omega0: Option<f64>,
    #[arg(long = "t_max_omega0")]
    t_max_omega0: Option<f64>,

    /// Mass (natural units)
    #[arg(long)]
    m: Option<f64>,
    /// System frequency omega0 (natural units)
    #[arg(long)]
    omega0: Option<f64>,

    /// Displacement <x1> sqrt(2 m omega0)
    #[arg(long)]
    x1: Option<f64>,
    /// Displacement <p1> sqrt(2/(m omega0))
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    x2: Option<f64>,
    #[arg(long)]
    p2: Option<f64>,

    /// exact | cl_limit
    #[arg(long)]
    backend: Option<String>,

    /// Absolute truncation threshold of the Matsubara series
    #[arg(long)]
    series_tol: Option<f64>,
    #[arg(long)]
    n_cap: Option<usize>,
    #[arg(long)]
    increment_tol: Option<f64>,

    /// Worker threads for parallel evaluation (env QBM_WORKERS also applies)
    #[arg(long)]
    workers: Option<usize>,

    /// System driving strength d0
    #[arg(long)]
    drive_d0: Option<f64>,
    /// constant:V | sinusoid:A,W[,PH] | pulse:A,C,W | csv:PATH
    #[arg(long)]
    drive_force: Option<String>,
    /// CSV of (t, Lambda) samples for the bath-mediated kernel
    #[arg(long)]
    drive_kernel_csv: Option<PathBuf>,

    /// Output file (stdout when omitted)
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// First swept parameter: gamma | Omega | kT
    #[arg(long)]
    axis1: Option<String>,
    /// min,max,points[,log|lin]
    #[arg(long)]
    axis1_range: Option<String>,
    #[arg(long)]
    axis2: Option<String>,
    #[arg(long)]
    axis2_range: Option<String>,

    /// Append the resonance curve value Omega*(kT) per row (needs a kT axis)
    #[arg(long)]
    with_resonance: bool,
}

#[derive(Args, Debug, Clone)]
struct ResonanceArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// kT grid as min,max,points[,log|lin]
    #[arg(long, default_value = "0.1,100,60,log")]
    range: String,
}

#[derive(Args, Debug, Clone)]
struct KernelsArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Common grid (frequency for densities, time for kernels) as
    /// min,max,points[,log|lin]
    #[arg(long, default_value = "0.02,20,400,lin")]
    range: String,
}

fn parse_backend(s: &str) -> Result<Backend> {
    match s {
        "exact" => Ok(Backend::Exact),
        "cl_limit" => Ok(Backend::ClLimit),
        other => Err(Error::Config(format!("unknown backend '{other}' (exact | cl_limit)"))),
    }
}

fn parse_param(s: &str) -> Result<SweepParam> {
    match s {
        "gamma" => Ok(SweepParam::Gamma),
        "Omega" => Ok(SweepParam::Cutoff),
        "kT" => Ok(SweepParam::Temperature),
        other => Err(Error::Config(format!("unknown sweep parameter '{other}' (gamma | Omega | kT)"))),
    }
}

fn parse_range(s: &str) -> Result<(f64, f64, usize, ScaleKind)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() < 3 || parts.len() > 4 {
        return Err(Error::Config(format!("range '{s}' must be min,max,points[,log|lin]")));
    }
    let min: f64 = parts[0].parse().map_err(|_| Error::Config(format!("bad range min '{}'", parts[0])))?;
    let max: f64 = parts[1].parse().map_err(|_| Error::Config(format!("bad range max '{}'", parts[1])))?;
    let points: usize = parts[2].parse().map_err(|_| Error::Config(format!("bad range points '{}'", parts[2])))?;
    let scale = match parts.get(3).copied() {
        None | Some("lin") | Some("linear") => ScaleKind::Linear,
        Some("log") => ScaleKind::Log,
        Some(other) => return Err(Error::Config(format!("bad range scale '{other}' (log | lin)"))),
    };
    Ok((min, max, points, scale))
}

fn parse_force(s: &str) -> Result<ForceConfig> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let nums = || -> Result<Vec<f64>> {
        rest.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad force spec '{s}'"))))
            .collect()
    };
    match kind {
        "constant" => {
            let v = nums()?;
            if v.len() != 1 {
                return Err(Error::Config("constant force takes one value".into()));
            }
            Ok(ForceConfig::Constant { value: v[0] })
        }
        "sinusoid" => {
            let v = nums()?;
            if v.len() < 2 || v.len() > 3 {
                return Err(Error::Config("sinusoid takes amplitude,omega[,phase]".into()));
            }
            Ok(ForceConfig::Sinusoid {
                amplitude: v[0],
                omega: v[1],
                phase: v.get(2).copied().unwrap_or(0.0),
            })
        }
        "pulse" => {
            let v = nums()?;
            if v.len() != 3 {
                return Err(Error::Config("pulse takes amplitude,center,width".into()));
            }
            Ok(ForceConfig::GaussianPulse {
                amplitude: v[0],
                center: v[1],
                width: v[2],
            })
        }
        "csv" => Ok(ForceConfig::Csv { path: PathBuf::from(rest) }),
        other => Err(Error::Config(format!(
            "unknown force '{other}' (constant | sinusoid | pulse | csv)"
        ))),
    }
}

fn resolve_config(args: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    macro_rules! over {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field { cfg.$field = v; })*
        };
    }
    over!(
        gamma_over_omega0,
        cutoff_over_omega0,
        kt_over_omega0,
        dt_omega0,
        t_max_omega0,
        m,
        omega0
    );
    if let Some(v) = args.x1 {
        cfg.pair.x1 = v;
    }
    if let Some(v) = args.p1 {
        cfg.pair.p1 = v;
    }
    if let Some(v) = args.x2 {
        cfg.pair.x2 = v;
    }
    if let Some(v) = args.p2 {
        cfg.pair.p2 = v;
    }
    if let Some(b) = &args.backend {
        cfg.backend = parse_backend(b)?;
    }
    if let Some(v) = args.series_tol {
        cfg.series_tol = v;
    }
    if let Some(v) = args.n_cap {
        cfg.n_cap = v;
    }
    if let Some(v) = args.increment_tol {
        cfg.increment_tol = v;
    }
    if args.drive_force.is_some() || args.drive_d0.is_some() || args.drive_kernel_csv.is_some() {
        let force = match &args.drive_force {
            Some(s) => parse_force(s)?,
            None => cfg
                .driving
                .as_ref()
                .map(|d| d.force.clone())
                .ok_or_else(|| Error::Config("--drive-d0/--drive-kernel-csv need --drive-force or a config driving block".into()))?,
        };
        let d0 = args.drive_d0.or(cfg.driving.as_ref().map(|d| d.d0)).unwrap_or(0.0);
        let kernel = args
            .drive_kernel_csv
            .clone()
            .or_else(|| cfg.driving.as_ref().and_then(|d| d.bath_kernel_csv.clone()));
        cfg.driving = Some(DrivingConfig {
            d0,
            force,
            bath_kernel_csv: kernel,
        });
    }
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    } else if cfg.workers.is_none() {
        if let Ok(s) = std::env::var(WORKERS_ENV) {
            let w: usize = s
                .parse()
                .map_err(|_| Error::Config(format!("{WORKERS_ENV} must be an integer, got '{s}'")))?;
            cfg.workers = Some(w);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// output writers

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            Ok(Box::new(std::io::BufWriter::new(f)))
        }
        None => Ok(Box::new(std::io::BufWriter::new(std::io::stdout()))),
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

fn run_trajectory(cfg: &RunConfig) -> Result<Trajectory> {
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let (s1, s2) = cfg.pair.states(&params)?;
    let driving = match &cfg.driving {
        Some(d) => Some(d.to_spec()?),
        None => None,
    };
    let run = || {
        nonmarkov::trajectory(
            &s1,
            &s2,
            &params,
            &grid,
            &cfg.noise()?,
            cfg.backend,
            driving.as_ref(),
        )
    };
    match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

fn cmd_evolve(args: &CommonArgs) -> Result<()> {
    let cfg = resolve_config(args)?;
    let traj = run_trajectory(&cfg)?;
    let mut out = open_output(&args.output)?;
    writeln!(out, "t,x1,p1,sxx1,sxp1,spp1,x2,p2,sxx2,sxp2,spp2,bures,sigma").map_err(io_err)?;
    let n = traj.points.len();
    for (l, p) in traj.points.iter().enumerate() {
        // centred finite-difference rate of the Bures distance
        let sigma = if n < 2 {
            0.0
        } else if l == 0 {
            (traj.points[1].bures - traj.points[0].bures) / (traj.points[1].t - traj.points[0].t)
        } else if l == n - 1 {
            (traj.points[l].bures - traj.points[l - 1].bures) / (traj.points[l].t - traj.points[l - 1].t)
        } else {
            (traj.points[l + 1].bures - traj.points[l - 1].bures) / (traj.points[l + 1].t - traj.points[l - 1].t)
        };
        let row = [
            p.t,
            p.state1.mean_x,
            p.state1.mean_p,
            p.state1.cov.xx,
            p.state1.cov.xp,
            p.state1.cov.pp,
            p.state2.mean_x,
            p.state2.mean_p,
            p.state2.cov.xx,
            p.state2.cov.xp,
            p.state2.cov.pp,
            p.bures,
            sigma,
        ];
        let line: Vec<String> = row.iter().map(|v| fmt(*v)).collect();
        writeln!(out, "{}", line.join(",")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

#[derive(Serialize)]
struct MeasureOutput<'a> {
    config: &'a RunConfig,
    #[serde(rename = "N")]
    n: f64,
    t_max: f64,
    dt: f64,
    backend: Backend,
}

fn cmd_measure(args: &CommonArgs) -> Result<()> {
    let cfg = resolve_config(args)?;
    let traj = run_trajectory(&cfg)?;
    let series = traj.bures_series();
    let n = nonmarkov::nonmarkovianity_measure_with_tol(&series, cfg.increment_tol);
    let grid = cfg.grid()?;
    let out_doc = MeasureOutput {
        config: &cfg,
        n,
        t_max: grid.t_max(),
        dt: grid.dt(),
        backend: cfg.backend,
    };
    let mut out = open_output(&args.output)?;
    writeln!(out, "{}", serde_json::to_string_pretty(&out_doc).expect("serialize")).map_err(io_err)?;
    out.flush().map_err(io_err)
}

#[derive(Serialize)]
struct SweepSidecar<'a> {
    config: &'a RunConfig,
    result: SidecarResult<'a>,
}

#[derive(Serialize)]
struct SidecarResult<'a> {
    axis1: &'a AxisSpec,
    axis2: &'a AxisSpec,
    failures: &'a [nonmarkov::CellFailure],
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let mut cfg = resolve_config(&args.common)?;
    // flag-level axis overrides
    let flag_axis = |name: &Option<String>, range: &Option<String>, which: &str| -> Result<Option<AxisConfig>> {
        match (name, range) {
            (Some(n), Some(r)) => {
                let (min, max, points, scale) = parse_range(r)?;
                Ok(Some(AxisConfig {
                    param: parse_param(n)?,
                    min,
                    max,
                    points,
                    scale,
                }))
            }
            (None, None) => Ok(None),
            _ => Err(Error::Config(format!("--{which} and --{which}-range must be given together"))),
        }
    };
    if let Some(a) = flag_axis(&args.axis1, &args.axis1_range, "axis1")? {
        let axis2 = cfg.sweep.as_ref().map(|s| s.axis2);
        cfg.sweep = Some(SweepAxesConfig {
            axis1: a,
            axis2: axis2.unwrap_or(a),
        });
    }
    if let Some(a) = flag_axis(&args.axis2, &args.axis2_range, "axis2")? {
        let axis1 = cfg
            .sweep
            .as_ref()
            .map(|s| s.axis1)
            .ok_or_else(|| Error::Config("sweep needs axis1 (flag or config)".into()))?;
        cfg.sweep = Some(SweepAxesConfig { axis1, axis2: a });
    }
    let axes = cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("sweep needs axis1/axis2 (flags or config.sweep)".into()))?;

    let output = args
        .common
        .output
        .clone()
        .ok_or_else(|| Error::Config("sweep requires -o/--output for the CSV (a JSON sidecar is written next to it)".into()))?;

    let request = SweepRequest {
        axis1: AxisSpec {
            param: axes.axis1.param,
            values: axes.axis1.values()?,
        },
        axis2: AxisSpec {
            param: axes.axis2.param,
            values: axes.axis2.values()?,
        },
        base: cfg.params()?,
        pair: cfg.pair,
        grid: cfg.grid()?,
        noise: cfg.noise()?,
        backend: cfg.backend,
        increment_tol: cfg.increment_tol,
        workers: cfg.workers,
    };
    if args.with_resonance
        && request.axis1.param != SweepParam::Temperature
        && request.axis2.param != SweepParam::Temperature
    {
        return Err(Error::Config("--with-resonance needs a kT axis".into()));
    }
    let result = nonmarkov::sweep(&request)?;

    let mut out = open_output(&Some(output.clone()))?;
    write_sweep_csv(&mut out, &result, args.with_resonance, cfg.omega0)?;
    out.flush().map_err(io_err)?;

    let sidecar_path = output.with_extension("config.json");
    let sidecar = SweepSidecar {
        config: &cfg,
        result: SidecarResult {
            axis1: &result.axis1,
            axis2: &result.axis2,
            failures: &result.failures,
        },
    };
    fs::write(
        &sidecar_path,
        serde_json::to_string_pretty(&sidecar).expect("serialize") + "\n",
    )
    .map_err(|e| Error::Io(format!("{}: {e}", sidecar_path.display())))?;
    Ok(())
}

fn write_sweep_csv(out: &mut dyn Write, result: &SweepResult, with_resonance: bool, omega0: f64) -> Result<()> {
    let header = if with_resonance {
        "axis1,axis2,N,Omega_star"
    } else {
        "axis1,axis2,N"
    };
    writeln!(out, "{header}").map_err(io_err)?;
    for (i, &v1) in result.axis1.values.iter().enumerate() {
        for (j, &v2) in result.axis2.values.iter().enumerate() {
            let n = match result.measure[i][j] {
                Some(v) => fmt(v),
                None => String::new(),
            };
            if with_resonance {
                let kt = if result.axis1.param == SweepParam::Temperature {
                    v1
                } else {
                    v2
                };
                let star = spectral::resonance_cutoff(kt, omega0)?;
                writeln!(out, "{},{},{},{}", fmt(v1), fmt(v2), n, fmt(star)).map_err(io_err)?;
            } else {
                writeln!(out, "{},{},{}", fmt(v1), fmt(v2), n).map_err(io_err)?;
            }
        }
    }
    Ok(())
}

fn cmd_resonance(args: &ResonanceArgs) -> Result<()> {
    let cfg = resolve_config(&args.common)?;
    let (min, max, points, scale) = parse_range(&args.range)?;
    let kts = grid_values(min, max, points, scale)?;
    let mut out = open_output(&args.common.output)?;
    writeln!(out, "kT,Omega_star").map_err(io_err)?;
    for kt in kts {
        writeln!(
            out,
            "{},{}",
            fmt(kt),
            fmt(spectral::resonance_cutoff(kt, cfg.omega0)?)
        )
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

fn cmd_kernels(args: &KernelsArgs) -> Result<()> {
    let cfg = resolve_config(&args.common)?;
    let params = cfg.params()?;
    let noise_cfg = cfg.noise()?;
    let (min, max, points, scale) = parse_range(&args.range)?;
    let grid = grid_values(min, max, points, scale)?;
    let mut out = open_output(&args.common.output)?;
    writeln!(out, "x,J,J_eff,damping_kernel,noise_kernel").map_err(io_err)?;
    for x in grid {
        let j = spectral::density(x, &params)?;
        let jeff = spectral::effective_density(x, &params)?;
        let damp = spectral::damping_kernel(x, &params)?;
        let noise = spectral::noise_kernel(x, &params, &noise_cfg)?;
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt(x),
            fmt(j),
            fmt(jeff),
            fmt(damp),
            fmt(noise)
        )
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

fn cmd_compare_mastereq(args: &CommonArgs) -> Result<()> {
    let cfg = resolve_config(args)?;
    if cfg.driving.is_some() {
        return Err(Error::Config("compare-mastereq does not take driving".into()));
    }
    let mut exact_cfg = cfg.clone();
    exact_cfg.backend = Backend::Exact;
    let mut cl_cfg = cfg.clone();
    cl_cfg.backend = Backend::ClLimit;
    cl_cfg.validate()?;
    let exact = run_trajectory(&exact_cfg)?;
    let cl = run_trajectory(&cl_cfg)?;
    let mut out = open_output(&args.output)?;
    writeln!(
        out,
        "t,bures_exact,bures_cl,x1_exact,p1_exact,sxx1_exact,sxp1_exact,spp1_exact,x1_cl,p1_cl,sxx1_cl,sxp1_cl,spp1_cl"
    )
    .map_err(io_err)?;
    for (a, b) in exact.points.iter().zip(&cl.points) {
        let row = [
            a.t,
            a.bures,
            b.bures,
            a.state1.mean_x,
            a.state1.mean_p,
            a.state1.cov.xx,
            a.state1.cov.xp,
            a.state1.cov.pp,
            b.state1.mean_x,
            b.state1.mean_p,
            b.state1.cov.xx,
            b.state1.cov.xp,
            b.state1.cov.pp,
        ];
        let line: Vec<String> = row.iter().map(|v| fmt(*v)).collect();
        writeln!(out, "{}", line.join(",")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

// ---------------------------------------------------------------------------
// entry point

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::SeriesDiverged { .. }
        | Error::Quadrature(_)
        | Error::RepeatedRoots
        | Error::HeisenbergViolation { .. }
        | Error::ImaginaryResidual { .. } => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

/// Parse argv, run the command, and map errors onto exit codes:
/// 0 success, 2 configuration errors, 3 numerical non-convergence.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap prints help/version on stdout with success
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Evolve(a) => cmd_evolve(a),
        Command::Measure(a) => cmd_measure(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Resonance(a) => cmd_resonance(a),
        Command::Kernels(a) => cmd_kernels(a),
        Command::CompareMastereq(a) => cmd_compare_mastereq(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("qbm: {e}");
            exit_code_for(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        let (a, b, n, s) = parse_range("0.01,10,15,log").unwrap();
        assert_eq!((a, b, n, s), (0.01, 10.0, 15, ScaleKind::Log));
        assert!(parse_range("1,2").is_err());
        assert!(parse_range("1,2,3,weird").is_err());
        let v = grid_values(1.0, 100.0, 3, ScaleKind::Log).unwrap();
        assert!((v[1] - 10.0).abs() < 1e-12);
        let v = grid_values(0.0, 1.0, 5, ScaleKind::Linear).unwrap();
        assert_eq!(v, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn force_parsing() {
        assert_eq!(parse_force("constant:2.5").unwrap(), ForceConfig::Constant { value: 2.5 });
        assert_eq!(
            parse_force("sinusoid:1.0,2.0").unwrap(),
            ForceConfig::Sinusoid {
                amplitude: 1.0,
                omega: 2.0,
                phase: 0.0
            }
        );
        assert!(parse_force("sinusoid:1.0").is_err());
        assert!(parse_force("banana:1").is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        // caption-style field names are on the wire
        assert!(text.contains("\"Omega_over_omega0\""));
        assert!(text.contains("\"kT_over_omega0\""));
        assert!(text.contains("\"gamma_over_omega0\""));
    }

    #[test]
    fn unknown_config_fields_are_rejected() {
        let r: std::result::Result<RunConfig, _> = serde_json::from_str("{\"gamma_over_omega\": 1.0}");
        assert!(r.is_err());
    }

    #[test]
    fn cl_limit_overdamped_is_config_error() {
        let mut cfg = RunConfig::default();
        cfg.backend = Backend::ClLimit;
        cfg.gamma_over_omega0 = 2.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn float_format_is_17_significant_digits() {
        let s = fmt(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        let x = 0.1 + 0.2;
        assert_eq!(s.parse::<f64>().unwrap(), std::f64::consts::PI);
        assert_eq!(fmt(x).parse::<f64>().unwrap(), x);
    }
}
