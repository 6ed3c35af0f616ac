//! The full verification suite for one `(p, d)`: series residuals, constant
//! invariants and the differential inequalities of `U`.

use crate::burkfun::{certify_inequalities, generator_residual_w, inner_generator_report, BurkholderFamily};
use crate::constants::{certify_constants, solve, Status};
use crate::error::Result;
use crate::report::{linspace, par_map, GridReport, Region, Verdict, WorstPoint};
use crate::specfun::{rk4_crosscheck, Params, SeriesSolution};

pub const ODE_RESIDUAL_TOL: f64 = 1e-8;
pub const RK4_TOL: f64 = 1e-6;
pub const RK4_STEPS: usize = 16_000;
pub const GENERATOR_TOL: f64 = 1e-8;

/// Scaled ODE residual on a uniform grid of `[-1, min(0.99, certified range)]`.
pub fn ode_residual_report(series: &SeriesSolution, grid_n: usize) -> Result<GridReport> {
    let s_hi = 0.99f64.min(series.s_max_certified());
    let grid = linspace(-1.0, s_hi, grid_n);
    let res: Vec<f64> = par_map(&grid, |s| series.ode_residual(s)).into_iter().collect::<Result<_>>()?;
    let samples = grid.iter().zip(&res).map(|(&s, r)| (-r.abs(), WorstPoint::on_section(s, Region::Inner)));
    Ok(GridReport::from_samples(
        "ode_residual",
        series.params(),
        grid_n,
        ODE_RESIDUAL_TOL,
        Verdict::Tolerant,
        samples,
    ))
}

/// Relative agreement between the series and an independent RK4 integration.
pub fn rk4_report(series: &SeriesSolution) -> Result<GridReport> {
    let params = *series.params();
    let s_hi = 0.9f64.min(series.s_max_certified());
    let ends = [-0.5, 0.0, 0.5 * s_hi, s_hi];
    let mut samples = Vec::with_capacity(ends.len());
    for s in ends {
        let want = series.eval(s, 0)?;
        let got = rk4_crosscheck(params, s, RK4_STEPS)?;
        samples.push((-(got - want).abs() / want.abs().max(1.0), WorstPoint::on_section(s, Region::Inner)));
    }
    Ok(GridReport::from_samples("rk4_agreement", &params, ends.len(), RK4_TOL, Verdict::Tolerant, samples))
}

/// Drift of `W` along the Bessel pair on an `n x n` log-spaced grid of `[lo, hi]^2`.
pub fn generator_report(series: &SeriesSolution, n: usize, lo: f64, hi: f64) -> Result<GridReport> {
    let axis: Vec<f64> = linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect();
    let mut samples = Vec::with_capacity(n * n);
    for &x in &axis {
        let row = par_map(&axis, |y| generator_residual_w(series, x, y));
        for (&y, r) in axis.iter().zip(row) {
            let s = (y - x) / (x + y);
            samples.push((-r?.abs(), WorstPoint { x, y, s, region: Region::Inner }));
        }
    }
    Ok(GridReport::from_samples(
        "w_generator",
        series.params(),
        n,
        GENERATOR_TOL,
        Verdict::Tolerant,
        samples,
    ))
}

/// Outcome of [`run_suite`].
#[derive(Debug, Clone)]
pub struct Suite {
    pub status: Status,
    pub reports: Vec<GridReport>,
}

impl Suite {
    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

/// Runs every check for `params`; the constant and `U` checks are skipped
/// when there is no finite constant.
pub fn run_suite(params: Params, grid_n: usize, tol: f64) -> Result<Suite> {
    let (series, bundle) = solve(params)?;
    let mut reports = vec![ode_residual_report(&series, grid_n)?, rk4_report(&series)?];
    if bundle.status == Status::NoFiniteConstant {
        return Ok(Suite { status: bundle.status, reports });
    }
    reports.extend(certify_constants(&series, &bundle, grid_n, tol)?);
    let family = BurkholderFamily::new(series, bundle)?;
    reports.extend(certify_inequalities(&family, grid_n, tol)?);
    if (1.0..=2.0).contains(&params.p) {
        reports.push(inner_generator_report(&family, grid_n, 1e-8)?);
    }
    Ok(Suite { status: family.bundle.status, reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p2_suite_passes() {
        let suite = run_suite(Params::new(2.0, 2.0).unwrap(), 201, 1e-9).unwrap();
        for r in &suite.reports {
            assert!(r.pass, "{}", r.to_json_line());
        }
        assert!(suite.reports.iter().any(|r| r.check_id == "maj"));
    }

    #[test]
    fn subcritical_suite_stops_after_series_checks() {
        let suite = run_suite(Params::new(0.4, 1.5).unwrap(), 201, 1e-9).unwrap();
        assert_eq!(suite.status, Status::NoFiniteConstant);
        assert_eq!(suite.reports.len(), 2);
    }

    #[test]
    fn generator_vanishes_for_p3_d2() {
        let (series, _) = solve(Params::new(3.0, 2.0).unwrap()).unwrap();
        let r = generator_report(&series, 21, 0.1, 10.0).unwrap();
        assert!(r.pass, "{}", r.to_json_line());
    }
}
