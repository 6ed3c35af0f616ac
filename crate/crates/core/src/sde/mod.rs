//! Monte Carlo simulation of two Bessel processes driven by one Brownian motion,
//!
//! ```text
//! dR = dB + (d-1)/(2R) dt,    dS = -dB + (d-1)/(2S) dt,
//! ```
//!
//! stopped when the pair reaches a ray `S = rho R`.
//!
//! Every path draws its normals from its own ChaCha stream keyed by
//! `(seed, path_index)` and the per-path records are reduced in index order,
//! so results do not depend on the number of worker threads.

mod hardy;
mod stats;

pub use hardy::{hp_demo, hp_norm, HpPair, HpReport, DEFAULT_RADII};
pub use stats::{pairwise_sum, Estimate};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::burkfun::{eval_w, BurkholderFamily};
use crate::error::{Error, Result};
use crate::specfun::Params;

pub const BATCHES: usize = 100;
/// Paths whose `S` falls below this level count as having reached zero.
pub const ZERO_LEVEL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Explicit Euler on `(R, S)` followed by `R <- |R|`, `S <- |S|`.
    EulerReflect,
    /// Explicit Euler on `(R^2, S^2)` with the squares clamped at zero.
    EulerSquared,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler_reflect" => Ok(Scheme::EulerReflect),
            "euler_squared" => Ok(Scheme::EulerSquared),
            other => Err(Error::InvalidInput(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Ray `S = (1+a)/(1-a) R`, i.e. `(S-R)/(S+R) = a`.
pub fn ray_slope(a: f64) -> f64 {
    (1.0 + a) / (1.0 - a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: Params,
    pub x0: f64,
    pub y0: f64,
    /// Barrier parameter; the pair stops on `S >= (1+a)/(1-a) R`.
    pub a: f64,
    pub dt: f64,
    pub t_max: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl SimConfig {
    /// Rejects malformed configurations and returns warnings for legal but unusual ones.
    pub fn validate(&self) -> Result<Vec<String>> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.x0 > 0.0 && self.y0 > 0.0) {
            return bad(format!("x0, y0 must be > 0, got ({}, {})", self.x0, self.y0));
        }
        if !(self.a > -1.0 && self.a < 1.0) {
            return bad(format!("a must lie in (-1, 1), got {}", self.a));
        }
        if !(self.dt > 0.0 && self.t_max > 0.0) {
            return bad(format!("dt and t_max must be > 0, got {} and {}", self.dt, self.t_max));
        }
        if self.dt > 1e-3 * self.t_max {
            return bad(format!("dt = {} exceeds 1e-3 * t_max = {}", self.dt, 1e-3 * self.t_max));
        }
        if self.n_paths == 0 {
            return bad("n_paths must be >= 1".to_string());
        }
        Ok(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub n_paths: usize,
    pub n_stopped: usize,
    pub frac_stopped: f64,
    pub n_diverged: usize,
    pub mean_tau: Estimate,
    pub p_norm_r: Estimate,
    pub p_norm_s: Estimate,
    /// `p_norm_s / p_norm_r` for single-barrier runs, `p_norm_r / p_norm_s` for two-step runs.
    pub ratio: Estimate,
    pub ratio_kind: String,
    /// Mean of `W(R, S)` at the stopped time minus `W(x0, y0)`; absent for two-step runs.
    pub martingale_gap: Option<Estimate>,
    /// `W(x0, y0)`, the reference value of the martingale check.
    pub w_start: Option<f64>,
    /// Largest `|S - rho R| / (R + S)` over stopped paths.
    pub max_stop_defect: f64,
    pub paths_near_zero: usize,
    pub zero_boundary: String,
    pub seed: u64,
    pub scheme: Scheme,
    pub dt: f64,
    pub t_max: f64,
    pub warnings: Vec<String>,
}

impl SimResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("SimResult serialises")
    }
}

/// Which side of a ray ends a run.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Barrier {
    /// Stop once `S >= slope R`.
    Rise(f64),
    /// Stop once `S <= slope R`.
    Drop(f64),
}

impl Barrier {
    fn slope(&self) -> f64 {
        match *self {
            Barrier::Rise(k) | Barrier::Drop(k) => k,
        }
    }

    fn reached(&self, r: f64, s: f64) -> bool {
        match *self {
            Barrier::Rise(k) => s >= k * r,
            Barrier::Drop(k) => s <= k * r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PathState {
    r: f64,
    s: f64,
    t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RunEnd {
    Stopped,
    Horizon,
    Diverged,
}

/// Stepping engine shared by every experiment.
struct Stepper {
    drift: f64,
    d: f64,
    scheme: Scheme,
    dt: f64,
}

#[derive(Debug, Default, Clone, Copy)]
struct PathTrace {
    monotone_violations: usize,
    worst_dip: f64,
    min_s: f64,
}

impl Stepper {
    fn new(d: f64, scheme: Scheme, dt: f64) -> Self {
        Stepper { drift: 0.5 * (d - 1.0), d, scheme, dt }
    }

    fn step(&self, r: f64, s: f64, h: f64, z: f64) -> (f64, f64) {
        let db = h.sqrt() * z;
        match self.scheme {
            Scheme::EulerReflect => (
                (r + db + self.drift / r * h).abs(),
                (s - db + self.drift / s * h).abs(),
            ),
            Scheme::EulerSquared => {
                let r2 = (r * r + 2.0 * r * db + self.d * h).max(0.0);
                let s2 = (s * s - 2.0 * s * db + self.d * h).max(0.0);
                (r2.sqrt(), s2.sqrt())
            }
        }
    }

    /// Advances until the barrier is reached or `t_end`; the final step is shortened to land on `t_end`.
    fn run(
        &self,
        state: &mut PathState,
        barrier: Barrier,
        t_end: f64,
        rng: &mut ChaCha8Rng,
        trace: &mut PathTrace,
    ) -> RunEnd {
        if barrier.reached(state.r, state.s) {
            return RunEnd::Stopped;
        }
        let slope = barrier.slope();
        while state.t < t_end {
            let h = self.dt.min(t_end - state.t);
            let z: f64 = StandardNormal.sample(rng);
            let (r1, s1) = self.step(state.r, state.s, h, z);
            if !(r1.is_finite() && s1.is_finite()) || r1 == 0.0 && self.scheme == Scheme::EulerReflect {
                return RunEnd::Diverged;
            }
            let before = state.r + state.s;
            if barrier.reached(r1, s1) {
                // Place the state exactly on the ray, linearly within the step.
                let phi0 = state.s - slope * state.r;
                let phi1 = s1 - slope * r1;
                let theta = if phi0 == phi1 { 1.0 } else { (phi0 / (phi0 - phi1)).clamp(0.0, 1.0) };
                let r = state.r + theta * (r1 - state.r);
                *state = PathState { r, s: slope * r, t: state.t + theta * h };
                trace.observe(before, state.r + state.s, state.s);
                return RunEnd::Stopped;
            }
            *state = PathState { r: r1, s: s1, t: if h < self.dt { t_end } else { state.t + h } };
            trace.observe(before, r1 + s1, s1);
        }
        RunEnd::Horizon
    }
}

impl PathTrace {
    fn new() -> Self {
        PathTrace { monotone_violations: 0, worst_dip: 0.0, min_s: f64::INFINITY }
    }

    fn observe(&mut self, before: f64, after: f64, s: f64) {
        let dip = after - before;
        if dip < self.worst_dip {
            self.worst_dip = dip;
        }
        if dip < -1e-9 * before.max(1.0) {
            self.monotone_violations += 1;
        }
        self.min_s = self.min_s.min(s);
    }
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

#[derive(Debug, Clone, Copy)]
struct PathRecord {
    r: f64,
    s: f64,
    tau: f64,
    end: RunEnd,
    trace: PathTrace,
}

fn run_paths<F>(n_paths: usize, threads: Option<usize>, f: F) -> Result<Vec<PathRecord>>
where
    F: Fn(usize) -> PathRecord + Sync + Send,
{
    let work = || (0..n_paths).into_par_iter().map(&f).collect::<Vec<_>>();
    match threads {
        None => Ok(work()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
            Ok(pool.install(work))
        }
    }
}

/// Aggregates per-path records; `swap` reports `||R|| / ||S||` instead of `||S|| / ||R||`.
fn summarise(
    config: &SimConfig,
    records: &[PathRecord],
    w_values: Option<(&[f64], f64)>,
    slope: f64,
    swap: bool,
    warnings: Vec<String>,
) -> SimResult {
    let p = config.params.p;
    let kept: Vec<usize> = (0..records.len()).filter(|&i| records[i].end != RunEnd::Diverged).collect();
    let n_diverged = records.len() - kept.len();
    let col = |f: &dyn Fn(&PathRecord) -> f64| -> Vec<f64> { kept.iter().map(|&i| f(&records[i])).collect() };

    let rp = col(&|rec| rec.r.powf(p));
    let sp = col(&|rec| rec.s.powf(p));
    let taus = col(&|rec| rec.tau);
    let n_stopped = kept.iter().filter(|&&i| records[i].end == RunEnd::Stopped).count();

    let mean_rp = Estimate::batch_mean(&rp, BATCHES);
    let mean_sp = Estimate::batch_mean(&sp, BATCHES);
    let cov = stats::batch_covariance(&rp, &sp, BATCHES);

    let (num, den, var_num, var_den) = if swap {
        (mean_rp.value, mean_sp.value, mean_rp.stderr.powi(2), mean_sp.stderr.powi(2))
    } else {
        (mean_sp.value, mean_rp.value, mean_sp.stderr.powi(2), mean_rp.stderr.powi(2))
    };
    let ratio = (num / den).powf(1.0 / p);
    let rel_var = var_num / (num * num) + var_den / (den * den) - 2.0 * cov / (num * den);
    let ratio_se = ratio / p * rel_var.max(0.0).sqrt();

    let martingale_gap = w_values.map(|(ws, w0)| {
        let kept_w: Vec<f64> = kept.iter().map(|&i| ws[i]).collect();
        let m = Estimate::batch_mean(&kept_w, BATCHES);
        Estimate { value: m.value - w0, stderr: m.stderr }
    });

    let max_stop_defect = kept
        .iter()
        .filter(|&&i| records[i].end == RunEnd::Stopped)
        .map(|&i| (records[i].s - slope * records[i].r).abs() / (records[i].r + records[i].s))
        .fold(0.0, f64::max);
    let paths_near_zero = kept.iter().filter(|&&i| records[i].trace.min_s < ZERO_LEVEL).count();

    let n = kept.len().max(1) as f64;
    SimResult {
        n_paths: records.len(),
        n_stopped,
        frac_stopped: n_stopped as f64 / n,
        n_diverged,
        mean_tau: Estimate::batch_mean(&taus, BATCHES),
        p_norm_r: mean_rp.pth_root(p),
        p_norm_s: mean_sp.pth_root(p),
        ratio: Estimate { value: ratio, stderr: ratio_se },
        ratio_kind: if swap { "R/S" } else { "S/R" }.to_string(),
        martingale_gap,
        w_start: w_values.map(|(_, w0)| w0),
        max_stop_defect,
        paths_near_zero,
        zero_boundary: match config.scheme {
            Scheme::EulerReflect => "reflect",
            Scheme::EulerSquared => "clamp-squared",
        }
        .to_string(),
        seed: config.seed,
        scheme: config.scheme,
        dt: config.dt,
        t_max: config.t_max,
        warnings,
    }
}

fn barrier_warnings(config: &SimConfig, family: &BurkholderFamily) -> Vec<String> {
    let mut warnings = config.validate().unwrap_or_default();
    if let Some(z0) = family.bundle.z0 {
        if config.a >= z0 {
            warnings.push(format!("a = {} is not below z0 = {z0}", config.a));
        }
    }
    warnings
}

pub fn simulate_pair(config: &SimConfig, family: &BurkholderFamily) -> Result<SimResult> {
    simulate_pair_with_threads(config, family, None)
}

/// Runs the single-barrier experiment `tau^a ∧ t_max` from `(x0, y0)`.
pub fn simulate_pair_with_threads(
    config: &SimConfig,
    family: &BurkholderFamily,
    threads: Option<usize>,
) -> Result<SimResult> {
    config.validate()?;
    if config.params != *family.params() {
        return Err(Error::InvalidInput("config and family disagree on (p, d)".to_string()));
    }
    if config.a > family.series.s_max_certified() {
        return Err(Error::Range { s: config.a, s_max_certified: family.series.s_max_certified() });
    }
    let warnings = barrier_warnings(config, family);
    let slope = ray_slope(config.a);
    let stepper = Stepper::new(config.params.d, config.scheme, config.dt);

    let records = run_paths(config.n_paths, threads, |i| {
        let mut rng = path_rng(config.seed, i);
        let mut state = PathState { r: config.x0, s: config.y0, t: 0.0 };
        let mut trace = PathTrace::new();
        let end = stepper.run(&mut state, Barrier::Rise(slope), config.t_max, &mut rng, &mut trace);
        PathRecord { r: state.r, s: state.s, tau: state.t, end, trace }
    })?;

    let ws: Vec<f64> = records
        .iter()
        .map(|rec| match rec.end {
            RunEnd::Diverged => f64::NAN,
            _ => eval_w(&family.series, rec.r, rec.s).unwrap_or(f64::NAN),
        })
        .collect();
    let w0 = eval_w(&family.series, config.x0, config.y0)?;
    Ok(summarise(config, &records, Some((&ws, w0)), slope, false, warnings))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub n_paths: usize,
    pub violations: usize,
    pub worst_dip: f64,
    pub paths_near_zero: usize,
}

/// Checks that `R + S` never decreases (beyond `1e-9` rounding) along simulated paths.
pub fn path_monotonicity_check(config: &SimConfig) -> Result<MonotonicityReport> {
    config.validate()?;
    let stepper = Stepper::new(config.params.d, config.scheme, config.dt);
    let slope = ray_slope(config.a);
    let records = run_paths(config.n_paths, None, |i| {
        let mut rng = path_rng(config.seed, i);
        let mut state = PathState { r: config.x0, s: config.y0, t: 0.0 };
        let mut trace = PathTrace::new();
        let end = stepper.run(&mut state, Barrier::Rise(slope), config.t_max, &mut rng, &mut trace);
        PathRecord { r: state.r, s: state.s, tau: state.t, end, trace }
    })?;
    Ok(MonotonicityReport {
        n_paths: records.len(),
        violations: records.iter().map(|r| r.trace.monotone_violations).sum(),
        worst_dip: records.iter().map(|r| r.trace.worst_dip).fold(0.0, f64::min),
        paths_near_zero: records.iter().filter(|r| r.trace.min_s < ZERO_LEVEL).count(),
    })
}

/// Horizon of the first phase of the two-step experiment.
pub const PHASE_ONE_HORIZON: f64 = 1.0;

pub fn two_step_experiment(
    family: &BurkholderFamily,
    b: f64,
    config: &SimConfig,
) -> Result<SimResult> {
    two_step_experiment_with_threads(family, b, config, None)
}

/// Two-phase stopping rule for `p > 2`: first let `(R, S)` drop to the ray with
/// parameter `b` (giving up at time 1), then let it rise to the ray with parameter
/// `config.a`. Reports `||R_tau||_p / ||S_tau||_p`.
pub fn two_step_experiment_with_threads(
    family: &BurkholderFamily,
    b: f64,
    config: &SimConfig,
    threads: Option<usize>,
) -> Result<SimResult> {
    config.validate()?;
    let params = *family.params();
    if params.p <= 2.0 {
        return Err(Error::InvalidInput(format!("two-step experiment needs p > 2, got {}", params.p)));
    }
    let z0 = family.bundle.z0.unwrap_or(1.0);
    let a = config.a;
    if !(-1.0 < b && b < a && a < z0) {
        return Err(Error::InvalidInput(format!("need -1 < b < a < z0, got b = {b}, a = {a}, z0 = {z0}")));
    }
    if config.t_max < PHASE_ONE_HORIZON {
        return Err(Error::InvalidInput(format!("t_max must be >= {PHASE_ONE_HORIZON}")));
    }
    let (slope_b, slope_a) = (ray_slope(b), ray_slope(a));
    let stepper = Stepper::new(params.d, config.scheme, config.dt);

    let records = run_paths(config.n_paths, threads, |i| {
        let mut rng = path_rng(config.seed, i);
        let mut state = PathState { r: config.x0, s: config.y0, t: 0.0 };
        let mut trace = PathTrace::new();
        let first = stepper.run(&mut state, Barrier::Drop(slope_b), PHASE_ONE_HORIZON, &mut rng, &mut trace);
        let end = match first {
            RunEnd::Stopped => {
                stepper.run(&mut state, Barrier::Rise(slope_a), config.t_max, &mut rng, &mut trace)
            }
            // tau = 1 when the lower ray is not reached in time; counts as not stopped.
            other => other,
        };
        PathRecord { r: state.r, s: state.s, tau: state.t, end, trace }
    })?;
    Ok(summarise(config, &records, None, slope_a, true, Vec::new()))
}
