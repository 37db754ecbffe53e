//! Bures-distance trajectories for state pairs, the discretized
//! information-backflow measure, and 2-D parameter sweeps.
//!
//! The measure is the accumulated positive increment of the Bures distance
//! over a time grid; it vanishes exactly for divisible (memoryless)
//! dynamics and grows with every episode of information backflow.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driving::DrivingSpec;
use crate::greens::build_greens;
use crate::mastereq::{self, ClParams};
use crate::metrics::{bures_distance, QuadratureState};
use crate::model::{coherent_state, to_quadratures, GaussianState, PhysParams, TimeGrid};
use crate::propagation::{evolve_covariance, noise_matrix, propagate_mean, PROPAGATION_HEISENBERG_TOL};
use crate::spectral::NoiseConfig;
use crate::{Error, Result};

/// Increments smaller than this are treated as grid noise and ignored by
/// the measure.
pub const INCREMENT_TOL: f64 = 1e-12;

/// Which solution propagates the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Exact,
    ClLimit,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Exact => write!(f, "exact"),
            Backend::ClLimit => write!(f, "cl_limit"),
        }
    }
}

/// Two coherent initial states given by their displacements in the caption
/// convention: x in units of 1/sqrt(2 m omega0), p in units of
/// sqrt(m omega0 / 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub x1: f64,
    pub p1: f64,
    pub x2: f64,
    pub p2: f64,
}

impl PairSpec {
    pub fn symmetric(displacement: f64) -> Self {
        Self {
            x1: -displacement,
            p1: 0.0,
            x2: displacement,
            p2: 0.0,
        }
    }

    pub fn states(&self, params: &PhysParams) -> Result<(GaussianState, GaussianState)> {
        let xs = 1.0 / (2.0 * params.m * params.omega0).sqrt();
        let ps = (params.m * params.omega0 / 2.0).sqrt();
        Ok((
            coherent_state(self.x1 * xs, self.p1 * ps, params)?,
            coherent_state(self.x2 * xs, self.p2 * ps, params)?,
        ))
    }
}

/// Time grid plus Bures-distance values for one state pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuresSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl BuresSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidParams("times and values must have equal length".into()));
        }
        if !times.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidParams("times must be increasing".into()));
        }
        let max = std::f64::consts::SQRT_2 + 1e-9;
        if !values.iter().all(|v| (0.0..=max).contains(v)) {
            return Err(Error::InvalidState("Bures values must lie in [0, sqrt(2)]".into()));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One time slice of a propagated pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub state1: GaussianState,
    pub state2: GaussianState,
    pub bures: f64,
}

/// Full pair trajectory; the Bures series is a projection of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    /// Grid indices where the master-equation limit dipped below the
    /// Heisenberg bound (empty for the exact backend, which treats a
    /// violation as an error).
    pub heisenberg_violations: Vec<usize>,
}

impl Trajectory {
    pub fn bures_series(&self) -> BuresSeries {
        BuresSeries {
            times: self.points.iter().map(|p| p.t).collect(),
            values: self.points.iter().map(|p| p.bures).collect(),
        }
    }
}

fn bures_of_pair(s1: &GaussianState, s2: &GaussianState, params: &PhysParams) -> Result<f64> {
    let q1: QuadratureState = to_quadratures(s1, params);
    let q2: QuadratureState = to_quadratures(s2, params);
    bures_distance(&q1, &q2)
}

/// Propagate a state pair on a grid and record means, covariances and the
/// Bures distance at every step. Both states share the Green's solution and
/// the per-time noise matrix. `driving` displaces both means identically and
/// is supported on the exact backend.
pub fn trajectory(
    s1: &GaussianState,
    s2: &GaussianState,
    params: &PhysParams,
    grid: &TimeGrid,
    cfg: &NoiseConfig,
    backend: Backend,
    driving: Option<&DrivingSpec>,
) -> Result<Trajectory> {
    match backend {
        Backend::Exact => {
            let sol = build_greens(params)?;
            let displacements = match driving {
                Some(spec) => Some(crate::driving::displacement_series(&sol, spec, grid)?),
                None => None,
            };
            let times: Vec<(usize, f64)> = grid.times().enumerate().collect();
            let points: Vec<TrajectoryPoint> = times
                .par_iter()
                .map(|&(l, t)| -> Result<TrajectoryPoint> {
                    let noise = noise_matrix(&sol, t, cfg)?;
                    let g = sol.eval(t)?;
                    let m = params.m;
                    let (mut x1, mut p1) = propagate_mean(s1, &sol, t)?;
                    let (mut x2, mut p2) = propagate_mean(s2, &sol, t)?;
                    if let Some(d) = &displacements {
                        let (xd, pd) = d[l];
                        x1 += xd;
                        p1 += pd;
                        x2 += xd;
                        p2 += pd;
                    }
                    let cov1 = evolve_covariance(&s1.cov, &g, m, &noise);
                    let cov2 = evolve_covariance(&s2.cov, &g, m, &noise);
                    for cov in [&cov1, &cov2] {
                        if cov.det() < 0.25 - PROPAGATION_HEISENBERG_TOL {
                            return Err(Error::HeisenbergViolation {
                                det: cov.det(),
                                t,
                                tol: PROPAGATION_HEISENBERG_TOL,
                            });
                        }
                    }
                    let out1 = GaussianState {
                        mean_x: x1,
                        mean_p: p1,
                        cov: cov1,
                    };
                    let out2 = GaussianState {
                        mean_x: x2,
                        mean_p: p2,
                        cov: cov2,
                    };
                    let bures = bures_of_pair(&out1, &out2, params)?;
                    Ok(TrajectoryPoint {
                        t,
                        state1: out1,
                        state2: out2,
                        bures,
                    })
                })
                .collect::<Result<_>>()?;
            Ok(Trajectory {
                points,
                heisenberg_violations: Vec::new(),
            })
        }
        Backend::ClLimit => {
            if driving.is_some() {
                return Err(Error::InvalidParams(
                    "driving is supported on the exact backend only".into(),
                ));
            }
            let p = ClParams::from_phys(params)?;
            let t1 = mastereq::propagate(s1, &p, grid)?;
            let t2 = mastereq::propagate(s2, &p, grid)?;
            let mut points = Vec::with_capacity(grid.len());
            for ((t, a), b) in grid.times().zip(t1.states).zip(t2.states) {
                let bures = bures_of_pair(&a, &b, params)?;
                points.push(TrajectoryPoint {
                    t,
                    state1: a,
                    state2: b,
                    bures,
                });
            }
            let mut violations = t1.heisenberg_violations;
            violations.extend(t2.heisenberg_violations);
            violations.sort_unstable();
            violations.dedup();
            Ok(Trajectory {
                points,
                heisenberg_violations: violations,
            })
        }
    }
}

/// Bures-distance time series for a state pair (the spec-level operation;
/// no driving, since driving provably does not change it).
pub fn bures_trajectory(
    s1: &GaussianState,
    s2: &GaussianState,
    params: &PhysParams,
    grid: &TimeGrid,
    cfg: &NoiseConfig,
    backend: Backend,
) -> Result<BuresSeries> {
    Ok(trajectory(s1, s2, params, grid, cfg, backend, None)?.bures_series())
}

/// Discretized backflow measure: the sum of positive Bures increments,
/// ignoring increments below `increment_tol`.
pub fn nonmarkovianity_measure_with_tol(series: &BuresSeries, increment_tol: f64) -> f64 {
    series
        .values
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > increment_tol)
        .sum()
}

pub fn nonmarkovianity_measure(series: &BuresSeries) -> f64 {
    nonmarkovianity_measure_with_tol(series, INCREMENT_TOL)
}

/// Parameter swept by an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "Omega")]
    Cutoff,
    #[serde(rename = "kT")]
    Temperature,
}

impl SweepParam {
    pub fn apply(&self, base: &PhysParams, value: f64) -> PhysParams {
        let mut p = *base;
        match self {
            SweepParam::Gamma => p.gamma = value,
            SweepParam::Cutoff => p.cutoff = value,
            SweepParam::Temperature => p.kt = value,
        }
        p
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Gamma => "gamma",
            SweepParam::Cutoff => "Omega",
            SweepParam::Temperature => "kT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// A cell that failed, with its diagnostic; sweeps never abort on a single
/// degenerate cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub i: usize,
    pub j: usize,
    pub message: String,
}

/// Rectangular grid of measure values over two swept parameters, with the
/// provenance needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis1: AxisSpec,
    pub axis2: AxisSpec,
    /// Row-major: measure[i][j] belongs to (axis1.values[i], axis2.values[j]).
    pub measure: Vec<Vec<Option<f64>>>,
    pub failures: Vec<CellFailure>,
    pub base: PhysParams,
    pub pair: PairSpec,
    pub dt: f64,
    pub t_max: f64,
    pub backend: Backend,
}

pub struct SweepRequest {
    pub axis1: AxisSpec,
    pub axis2: AxisSpec,
    pub base: PhysParams,
    pub pair: PairSpec,
    pub grid: TimeGrid,
    pub noise: NoiseConfig,
    pub backend: Backend,
    pub increment_tol: f64,
    /// Worker threads for cell evaluation; `None` uses the global pool.
    pub workers: Option<usize>,
}

fn measure_cell(req: &SweepRequest, params: &PhysParams) -> Result<f64> {
    let (s1, s2) = req.pair.states(params)?;
    let series = bures_trajectory(&s1, &s2, params, &req.grid, &req.noise, req.backend)?;
    Ok(nonmarkovianity_measure_with_tol(&series, req.increment_tol))
}

/// Evaluate the measure over the axis grid. Cells are independent pure
/// computations evaluated in parallel; assembly is deterministic and
/// independent of the worker count.
pub fn sweep(req: &SweepRequest) -> Result<SweepResult> {
    if req.axis1.param == req.axis2.param {
        return Err(Error::InvalidParams("sweep axes must be distinct".into()));
    }
    if req.axis1.values.is_empty() || req.axis2.values.is_empty() {
        return Err(Error::InvalidParams("sweep axes must be non-empty".into()));
    }
    let n2 = req.axis2.values.len();
    let cells: Vec<(usize, usize)> = (0..req.axis1.values.len())
        .flat_map(|i| (0..n2).map(move |j| (i, j)))
        .collect();

    let run = || -> Vec<((usize, usize), Result<f64>)> {
        cells
            .par_iter()
            .map(|&(i, j)| {
                let params = req
                    .axis2
                    .param
                    .apply(&req.axis1.param.apply(&req.base, req.axis1.values[i]), req.axis2.values[j]);
                ((i, j), measure_cell(req, &params))
            })
            .collect()
    };
    let results = match req.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };

    let mut measure = vec![vec![None; n2]; req.axis1.values.len()];
    let mut failures = Vec::new();
    for ((i, j), r) in results {
        match r {
            Ok(v) => measure[i][j] = Some(v),
            Err(e) => failures.push(CellFailure {
                i,
                j,
                message: e.to_string(),
            }),
        }
    }
    failures.sort_by_key(|f| (f.i, f.j));
    Ok(SweepResult {
        axis1: req.axis1.clone(),
        axis2: req.axis2.clone(),
        measure,
        failures,
        base: req.base,
        pair: req.pair,
        dt: req.grid.dt(),
        t_max: req.grid.t_max(),
        backend: req.backend,
    })
}
