//! The first root `z0` of `g_{p,d}`, the sharp constant `C_{p,d}` and the
//! auxiliary numbers `c`, `s1`, `z1` entering the Burkholder function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{linspace, par_map, GridReport, Region, Verdict, WorstPoint};
use crate::specfun::{build_series, Branch, Params, SeriesSolution, S_MAX_CAP};

pub const ROOT_SCAN_POINTS: usize = 4096;
pub const ROOT_TOL: f64 = 1e-14;
pub const TANGENCY_GRID: usize = 4001;
pub const NEAR_CRITICAL_GAP: f64 = 1e-4;
/// Abscissae tried in turn by [`solve`] until the first root is inside the certified range.
pub const S_MAX_LADDER: [f64; 4] = [0.99, 0.999, 0.99999, S_MAX_CAP];
pub const SERIES_TAIL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    NearCritical,
    NoFiniteConstant,
    InvalidParams,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::NearCritical => "near-critical",
            Status::NoFiniteConstant => "no-finite-constant",
            Status::InvalidParams => "invalid-params",
        }
    }
}

/// Everything derived from the first root of `g` for one `(p, d)`.
///
/// `c_pd == None` encodes an infinite constant (`p + d <= 2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsBundle {
    pub params: Params,
    pub status: Status,
    pub z0: Option<f64>,
    #[serde(rename = "C_pd")]
    pub c_pd: Option<f64>,
    pub c: Option<f64>,
    pub s1: Option<f64>,
    pub z1: Option<f64>,
    pub gprime_z0: Option<f64>,
    /// Every contact point of `c g = v` found on `[-1, z0]` (only populated for `p < 1`).
    pub z1_candidates: Vec<f64>,
    pub s_max_certified: f64,
}

impl ConstantsBundle {
    pub fn to_csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(fmt17).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            fmt17(self.params.p),
            fmt17(self.params.d),
            opt(self.z0),
            opt(self.c_pd),
            opt(self.c),
            opt(self.s1),
            opt(self.z1),
            self.status.as_str()
        )
    }
}

pub const CSV_HEADER: &str = "p,d,z0,C_pd,c,s1,z1,status";

/// 17 significant digits, `.` as decimal separator, plain notation for
/// exponents in `[-5, 16]` and `d.ddde±x` otherwise.
pub fn fmt17(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.16e}", x.abs());
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if x < 0.0 { "-" } else { "" };
    let trim = |s: String| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    let body = if (-5..=16).contains(&exp) {
        if exp < 0 {
            trim(format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits))
        } else {
            let split = exp as usize + 1;
            trim(format!("{}.{}", &digits[..split], &digits[split..]))
        }
    } else {
        format!("{}e{}", trim(format!("{}.{}", &digits[..1], &digits[1..])), exp)
    };
    format!("{sign}{body}")
}

/// The payoff profile `v(s) = ((1+s)/2)^p - K^p ((1-s)/2)^p`, `K = (1+z0)/(1-z0)`.
#[derive(Debug, Clone, Copy)]
pub struct Payoff {
    p: f64,
    k_pow: f64,
}

impl Payoff {
    pub fn new(p: f64, z0: f64) -> Self {
        Payoff { p, k_pow: ((1.0 + z0) / (1.0 - z0)).powf(p) }
    }

    pub fn v(&self, s: f64) -> f64 {
        ((1.0 + s) / 2.0).powf(self.p) - self.k_pow * ((1.0 - s) / 2.0).powf(self.p)
    }

    pub fn d1(&self, s: f64) -> f64 {
        let p = self.p;
        0.5 * p * (((1.0 + s) / 2.0).powf(p - 1.0) + self.k_pow * ((1.0 - s) / 2.0).powf(p - 1.0))
    }

    pub fn d2(&self, s: f64) -> f64 {
        let p = self.p;
        p * (p - 1.0) / 2f64.powf(p)
            * ((1.0 + s).powf(p - 2.0) - self.k_pow * (1.0 - s).powf(p - 2.0))
    }
}

/// First sign change of `g` on `[-1, s_max_certified]`, refined by bisection.
pub fn find_z0(series: &SeriesSolution) -> Result<Option<f64>> {
    let params = series.params();
    let hi = series.s_max_certified();
    let grid = linspace(-1.0, hi, ROOT_SCAN_POINTS);
    let g = |s: f64| series.eval(s, 0);

    let mut bracket = None;
    let mut prev = grid[0];
    for &s in &grid[1..] {
        let gs = g(s)?;
        if gs >= 0.0 {
            bracket = Some((prev, s, gs == 0.0));
            break;
        }
        prev = s;
    }

    let root = match bracket {
        None => {
            return if params.supercritical {
                Err(Error::RootBeyondRange { s_max_certified: hi })
            } else {
                Ok(None)
            };
        }
        Some((_, s, true)) => s,
        Some((mut lo, mut up, false)) => {
            // Bisect until the bracket stops shrinking (width well below ROOT_TOL).
            let mut root = None;
            loop {
                let mid = 0.5 * (lo + up);
                if mid <= lo || mid >= up {
                    break;
                }
                let gm = g(mid)?;
                if gm == 0.0 {
                    root = Some(mid);
                    break;
                }
                if gm < 0.0 {
                    lo = mid;
                } else {
                    up = mid;
                }
            }
            root.unwrap_or(0.5 * (lo + up))
        }
    };

    if !params.supercritical {
        return Err(Error::InternalInconsistency(format!(
            "g changes sign at {root} although p + d = {} <= 2",
            params.p + params.d
        )));
    }
    let slope = series.eval(root, 1)?;
    if !(slope > 0.0) {
        return Err(Error::InternalInconsistency(format!("g'(z0) = {slope} is not positive")));
    }
    Ok(Some(root))
}

/// `C_{p,d}` from the first root: `(1+z0)/(1-z0)` for `p <= 2`, its reciprocal for `p > 2`.
pub fn compute_c_pd(params: &Params, z0: f64) -> f64 {
    if params.p <= 2.0 {
        (1.0 + z0) / (1.0 - z0)
    } else {
        (1.0 - z0) / (1.0 + z0)
    }
}

/// `c` matching slopes at `z0`: `2p(1+z0)^(p-1) / (2^p g'(z0) (1-z0))`.
pub fn slope_matching_c(p: f64, z0: f64, gprime_z0: f64) -> f64 {
    2.0 * p * (1.0 + z0).powf(p - 1.0) / (2f64.powf(p) * gprime_z0 * (1.0 - z0))
}

/// Result of minimising `v/g` over `[-1, z0)` for `p < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangencySearch {
    pub c: f64,
    pub z1: f64,
    pub candidates: Vec<f64>,
    pub boundary_limit: f64,
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}

/// Largest `c` with `c g >= v` on `[-1, z0]` and the contact point(s), for `p < 1`.
pub fn tangency_search(series: &SeriesSolution, z0: f64) -> Result<TangencySearch> {
    let p = series.params().p;
    let payoff = Payoff::new(p, z0);
    let gprime_z0 = series.eval(z0, 1)?;
    let boundary_limit = slope_matching_c(p, z0, gprime_z0);

    let ratio = |s: f64| -> f64 {
        let g = series.eval(s, 0).unwrap_or(f64::NAN);
        payoff.v(s) / g
    };
    let grid = linspace(-1.0, z0, TANGENCY_GRID);
    let interior = &grid[..grid.len() - 1];
    let values = par_map(interior, ratio);
    if let Some(bad) = values.iter().position(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::InternalInconsistency(format!(
            "v/g is not a finite nonnegative number at s = {}",
            interior[bad]
        )));
    }

    // Refine every interior local minimum of the grid ratio.
    let n = values.len();
    let mut minima: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        let left_ok = i == 0 || values[i] <= values[i - 1];
        let right_ok = i + 1 < n && values[i] <= values[i + 1];
        if left_ok && right_ok {
            let lo = if i == 0 { grid[0] } else { grid[i - 1] };
            let s = golden_min(ratio, lo, grid[i + 1]);
            let r = ratio(s);
            let (s, r) = if r <= values[i] { (s, r) } else { (grid[i], values[i]) };
            minima.push((s, r));
        }
    }

    let best_interior = minima.iter().copied().fold(None, |acc: Option<(f64, f64)>, m| match acc {
        Some(a) if a.1 <= m.1 => Some(a),
        _ => Some(m),
    });
    let c = best_interior.map_or(boundary_limit, |(_, r)| r.min(boundary_limit));
    let close = |r: f64| (r - c).abs() <= 1e-9 * c;

    let mut candidates: Vec<f64> = minima.iter().filter(|m| close(m.1)).map(|m| m.0).collect();
    if close(boundary_limit) {
        candidates.push(z0);
    }
    // A boundary contact means the slope-matching constant is attained at z0.
    let z1 = if close(boundary_limit) {
        z0
    } else {
        candidates.iter().copied().fold(f64::INFINITY, f64::min)
    };
    Ok(TangencySearch { c, z1, candidates, boundary_limit })
}

/// Constant `c` of the Burkholder function.
pub fn compute_c(series: &SeriesSolution, z0: f64) -> Result<f64> {
    let p = series.params().p;
    if p >= 1.0 {
        let gp = series.eval(z0, 1)?;
        let c = slope_matching_c(p, z0, gp);
        if !c.is_finite() {
            return Err(Error::InternalInconsistency(format!("c = {c} is not finite")));
        }
        Ok(c)
    } else {
        Ok(tangency_search(series, z0)?.c)
    }
}

/// Root of `(1+s)^(p-2) - K^p (1-s)^(p-2)`, absent for `p = 2`.
pub fn compute_s1(params: &Params, z0: f64) -> Option<f64> {
    if params.branch == Branch::PEquals2 {
        return None;
    }
    let p = params.p;
    let k = (1.0 + z0) / (1.0 - z0);
    let t = k.powf(p / (p - 2.0));
    Some((t - 1.0) / (t + 1.0))
}

/// Tangency point `z1`: `z0` for `p >= 1`, the validated contact point for `p < 1`.
pub fn compute_z1(series: &SeriesSolution, z0: f64, c: f64) -> Result<f64> {
    let p = series.params().p;
    if p >= 1.0 {
        return Ok(z0);
    }
    let search = tangency_search(series, z0)?;
    let z1 = search.z1;
    let payoff = Payoff::new(p, z0);
    let jet = series.jet(z1)?;
    let scale = jet.scale();
    let gap0 = (c * jet.value - payoff.v(z1)).abs();
    let gap1 = (c * jet.d1 - payoff.d1(z1)).abs();
    if gap0 > 1e-10 * scale || gap1 > 1e-8 * scale {
        return Err(Error::Z1NotFound(format!(
            "contact at z1 = {z1}: |c g - v| = {gap0:e}, |c g' - v'| = {gap1:e}, scale {scale}"
        )));
    }
    let hi = S_MAX_CAP;
    for s in linspace(z1, hi, 2001) {
        let v2 = payoff.d2(s);
        if v2 < -1e-10 * (1.0 + v2.abs()) {
            return Err(Error::Z1NotFound(format!("v''({s}) = {v2:e} < 0 beyond z1 = {z1}")));
        }
    }
    Ok(z1)
}

impl ConstantsBundle {
    /// Derives every constant from an already built series.
    pub fn from_series(series: &SeriesSolution) -> Result<Self> {
        let params = *series.params();
        let s_max_certified = series.s_max_certified();
        let Some(z0) = find_z0(series)? else {
            return Ok(ConstantsBundle {
                params,
                status: Status::NoFiniteConstant,
                z0: None,
                c_pd: None,
                c: None,
                s1: None,
                z1: None,
                gprime_z0: None,
                z1_candidates: Vec::new(),
                s_max_certified,
            });
        };
        let c_pd = compute_c_pd(&params, z0);
        let gprime_z0 = series.eval(z0, 1)?;
        let (c, z1, z1_candidates) = if params.p < 1.0 {
            let search = tangency_search(series, z0)?;
            let z1 = compute_z1(series, z0, search.c)?;
            (search.c, z1, search.candidates)
        } else {
            (compute_c(series, z0)?, z0, Vec::new())
        };
        let status = if z0 > 1.0 - NEAR_CRITICAL_GAP { Status::NearCritical } else { Status::Ok };
        Ok(ConstantsBundle {
            params,
            status,
            z0: Some(z0),
            c_pd: Some(c_pd),
            c: Some(c),
            s1: compute_s1(&params, z0),
            z1: Some(z1),
            gprime_z0: Some(gprime_z0),
            z1_candidates,
            s_max_certified,
        })
    }

    /// Bundle for parameters outside `p > 0, d > 1`.
    pub fn invalid(p: f64, d: f64) -> Self {
        ConstantsBundle {
            params: Params { p, d, supercritical: p + d > 2.0, branch: Branch::PGreater2 },
            status: Status::InvalidParams,
            z0: None,
            c_pd: None,
            c: None,
            s1: None,
            z1: None,
            gprime_z0: None,
            z1_candidates: Vec::new(),
            s_max_certified: f64::NAN,
        }
    }
}

/// Builds the series, widening its certified range until the first root is inside it.
pub fn solve(params: Params) -> Result<(SeriesSolution, ConstantsBundle)> {
    let mut last_err = None;
    for &s_max in &S_MAX_LADDER {
        let series = match build_series(params, SERIES_TAIL_TOL, s_max) {
            Ok(series) => series,
            Err(e) => return Err(last_err.unwrap_or(e)),
        };
        match ConstantsBundle::from_series(&series) {
            Ok(bundle) => return Ok((series, bundle)),
            Err(e @ Error::RootBeyondRange { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
        if !params.supercritical {
            break;
        }
    }
    Err(last_err.expect("ladder is nonempty"))
}

/// One-dimensional checks of `g` and the constants on `[-1, z0]`.
///
/// Covers monotonicity, convexity and root sign of `g`, the four auxiliary
/// differential inequalities, majorisation of `v` by `c g`, and, for `p < 1`,
/// tangency at `z1`, maximality of `c` and the sign of `v''` beyond `z1`.
pub fn certify_constants(
    series: &SeriesSolution,
    bundle: &ConstantsBundle,
    grid_n: usize,
    tol: f64,
) -> Result<Vec<GridReport>> {
    let params = *series.params();
    let (p, d) = (params.p, params.d);
    let (Some(z0), Some(c), Some(z1)) = (bundle.z0, bundle.c, bundle.z1) else {
        return Ok(Vec::new());
    };
    let payoff = Payoff::new(p, z0);
    let pt = |s: f64| WorstPoint::on_section(s, Region::Inner);
    let mut reports = Vec::new();

    let grid = linspace(-1.0 + 1e-6, z0, grid_n);
    let jets = par_map(&grid, |s| series.jet(s));
    let jets: Vec<_> = jets.into_iter().collect::<Result<_>>()?;
    let samples = |f: &dyn Fn(f64, &crate::specfun::Jet) -> f64| -> Vec<(f64, WorstPoint)> {
        grid.iter().zip(&jets).map(|(&s, j)| (f(s, j) / j.scale(), pt(s))).collect()
    };
    let report = |id: &str, verdict: Verdict, samples: Vec<(f64, WorstPoint)>| {
        GridReport::from_samples(id, &params, grid_n, tol, verdict, samples)
    };

    reports.push(report("lem1_i", Verdict::Strict, samples(&|_, j| j.d1)));
    reports.push(report("lem1_ii", Verdict::Tolerant, samples(&|_, j| (2.0 - p) * j.d2)));

    let sign_margin = match params.branch {
        Branch::PEquals2 => 1e-12 - z0.abs(),
        _ if p < 2.0 => z0,
        _ => -z0,
    };
    reports.push(report("lem1_iii", Verdict::Strict, vec![(sign_margin, pt(z0))]));

    reports.push(report(
        "diffin1",
        Verdict::Tolerant,
        samples(&|s, j| {
            (2.0 - p) * (1.0 - s * s) * j.d2 - 2.0 * (p - 1.0) * (p - 2.0) * s * j.d1
                + p * (p - 1.0) * (p - 2.0) * j.value
        }),
    ));
    reports.push(report(
        "diffin2",
        Verdict::Tolerant,
        samples(&|s, j| {
            -(s * (1.0 - s * s) * j.d2 - (p + d - 2.0 + (d - p) * s * s) * j.d1
                + p * (d - 1.0) * s * j.value)
        }),
    ));
    if p <= 2.0 {
        reports.push(report(
            "diffin3",
            Verdict::Tolerant,
            samples(&|s, j| p * j.value + (1.0 - s) * j.d1),
        ));
    }
    if p >= 2.0 {
        reports.push(report(
            "diffin4",
            Verdict::Tolerant,
            samples(&|s, j| -(p * j.value - (1.0 + s) * j.d1)),
        ));
    }

    // Majorisation on [-1, z0], including the left endpoint.
    let maj_grid_n = if p < 1.0 { TANGENCY_GRID } else { grid_n };
    let maj_grid = linspace(-1.0, z0, maj_grid_n);
    let maj_jets: Vec<_> = par_map(&maj_grid, |s| series.jet(s)).into_iter().collect::<Result<_>>()?;
    let gap = |factor: f64| -> Vec<(f64, WorstPoint)> {
        maj_grid
            .iter()
            .zip(&maj_jets)
            .map(|(&s, j)| ((factor * c * j.value - payoff.v(s)) / j.scale(), pt(s)))
            .collect()
    };
    let maj_report = |id: &str, sign: f64| {
        let samples: Vec<_> = gap(1.0).into_iter().map(|(m, w)| (sign * m, w)).collect();
        GridReport::from_samples(id, &params, maj_grid_n, tol, Verdict::Tolerant, samples)
    };
    if p < 1.0 {
        reports.push(maj_report("maj_lt1", 1.0));
    } else {
        if p <= 2.0 {
            reports.push(maj_report("maj_lt2", 1.0));
        }
        if p >= 2.0 {
            reports.push(maj_report("maj_gt2", -1.0));
        }
    }

    if p < 1.0 {
        let jet = series.jet(z1)?;
        let scale = jet.scale();
        let gap0 = (c * jet.value - payoff.v(z1)).abs() / scale;
        let gap1 = (c * jet.d1 - payoff.d1(z1)).abs() / scale;
        let ok = gap0 <= 1e-10 && gap1 <= 1e-8;
        let mut r = report("z1_tangency", Verdict::Tolerant, vec![(-gap0.max(1e-2 * gap1), pt(z1))]);
        r.pass = ok;
        reports.push(r);

        // Raising c by 1e-6 (relative) must break majorisation somewhere near the contact.
        let bumped = c * (1.0 + 1e-6);
        let probes: Vec<f64> = maj_grid
            .iter()
            .copied()
            .chain((3..=10).map(|k| z1 - 10f64.powi(-k)).filter(|&s| s > -1.0))
            .chain((3..=10).map(|k| z1 + 10f64.powi(-k)).filter(|&s| s < z0))
            .collect();
        let worst_bumped = probes
            .iter()
            .map(|&s| {
                let g = series.eval(s, 0).unwrap_or(f64::NAN);
                (bumped * g - payoff.v(s), s)
            })
            .fold((f64::INFINITY, z1), |a, b| if b.0 < a.0 { b } else { a });
        reports.push(report(
            "c_maximal",
            Verdict::Strict,
            vec![(-worst_bumped.0, pt(worst_bumped.1))],
        ));

        let v2_grid = linspace(z1, S_MAX_CAP, grid_n);
        reports.push(report(
            "boundv2",
            Verdict::Tolerant,
            v2_grid.iter().map(|&s| {
                let v2 = payoff.d2(s);
                (v2 / (1.0 + v2.abs()), pt(s))
            }).collect(),
        ));
    }

    if d == 2.0 {
        // g(-s) solves the same equation when d = 2.
        let hi = series.s_max_certified();
        let refl_grid = linspace(-hi, 1.0 - 1e-6, grid_n);
        let samples = par_map(&refl_grid, |s| -> Result<(f64, WorstPoint)> {
            let j = series.jet(-s)?;
            let raw = (1.0 - s * s) * j.d2 + 2.0 * (d - 1.0) * s * j.d1 + p * (d - 1.0) * j.value;
            Ok((-(raw / j.scale()).abs(), pt(s)))
        });
        let samples: Vec<_> = samples.into_iter().collect::<Result<_>>()?;
        let mut r = GridReport::from_samples("reflection", &params, grid_n, 1e-8, Verdict::Tolerant, samples);
        r.tol = 1e-8;
        reports.push(r);
    }

    Ok(reports)
}
