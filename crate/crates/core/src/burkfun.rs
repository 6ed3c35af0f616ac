//! Special functions built from `g`: the harmonic profile `W`, the payoff `V`
//! and the Burkholder function `U`, plus grid certification of the
//! differential inequalities `U` has to satisfy.

use crate::constants::{solve, ConstantsBundle};
use crate::error::{Error, Result};
use crate::report::{linspace, par_map, GridReport, Region, Verdict, WorstPoint};
use crate::specfun::{Jet, Params, SeriesSolution};

/// Value, gradient and Hessian of `U` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEval {
    pub region: Region,
    pub value: f64,
    /// `(U_x, U_y)`
    pub grad: (f64, f64),
    /// `(U_xx, U_xy, U_yy)`
    pub hessian: (f64, f64, f64),
}

impl PointEval {
    /// `L = U_xx + (d-1) U_x / x`
    pub fn l(&self, d: f64, x: f64) -> f64 {
        self.hessian.0 + (d - 1.0) * self.grad.0 / x
    }

    /// `R = U_yy + (d-1) U_y / y`
    pub fn r(&self, d: f64, y: f64) -> f64 {
        self.hessian.2 + (d - 1.0) * self.grad.1 / y
    }

    /// `1 + |U| + |x U_x| + |y U_y| + x^2 |U_xx| + y^2 |U_yy|`
    pub fn scale(&self, x: f64, y: f64) -> f64 {
        1.0 + self.value.abs()
            + (x * self.grad.0).abs()
            + (y * self.grad.1).abs()
            + x * x * self.hessian.0.abs()
            + y * y * self.hessian.2.abs()
    }
}

/// `k (x+y)^p h(sigma)` with `sigma = orient (y-x)/(x+y)`, differentiated by the chain rule.
fn homogeneous(p: f64, k: f64, orient: f64, x: f64, y: f64, h: &Jet, region: Region) -> PointEval {
    let r = x + y;
    let r2 = r * r;
    let r3 = r2 * r;
    let sx = orient * (-2.0 * y / r2);
    let sy = orient * (2.0 * x / r2);
    let sxx = orient * (4.0 * y / r3);
    let syy = orient * (-4.0 * x / r3);
    let sxy = orient * (2.0 * (y - x) / r3);

    let rp = r.powf(p);
    let rp1 = rp / r;
    let rp2 = rp1 / r;
    let base = p * (p - 1.0) * rp2 * h.value;

    PointEval {
        region,
        value: k * rp * h.value,
        grad: (
            k * (p * rp1 * h.value + rp * h.d1 * sx),
            k * (p * rp1 * h.value + rp * h.d1 * sy),
        ),
        hessian: (
            k * (base + 2.0 * p * rp1 * h.d1 * sx + rp * (h.d2 * sx * sx + h.d1 * sxx)),
            k * (base + p * rp1 * h.d1 * (sx + sy) + rp * (h.d2 * sx * sy + h.d1 * sxy)),
            k * (base + 2.0 * p * rp1 * h.d1 * sy + rp * (h.d2 * sy * sy + h.d1 * syy)),
        ),
    }
}

fn check_point(x: f64, y: f64) -> Result<()> {
    if !(x > 0.0 && y >= 0.0 && x.is_finite() && y.is_finite()) {
        return Err(Error::InvalidInput(format!("need x > 0 and y >= 0, got ({x}, {y})")));
    }
    Ok(())
}

/// `W(x, y) = (x+y)^p g((y-x)/(x+y))` with all partials up to order two.
pub fn w_jet(series: &SeriesSolution, x: f64, y: f64) -> Result<PointEval> {
    check_point(x, y)?;
    let s = (y - x) / (x + y);
    let h = series.jet(s)?;
    Ok(homogeneous(series.params().p, 1.0, 1.0, x, y, &h, Region::Inner))
}

pub fn eval_w(series: &SeriesSolution, x: f64, y: f64) -> Result<f64> {
    check_point(x, y)?;
    let s = (y - x) / (x + y);
    Ok((x + y).powf(series.params().p) * series.eval(s, 0)?)
}

/// Drift of `W` along the coupled Bessel pair, scaled by `(x+y)^(p-2) (1+|g|+|g'|+|g''|)`.
pub fn generator_residual_w(series: &SeriesSolution, x: f64, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::InvalidInput(format!("need y > 0, got {y}")));
    }
    let w = w_jet(series, x, y)?;
    let d = series.params().d;
    let (wx, wy) = w.grad;
    let (wxx, wxy, wyy) = w.hessian;
    let raw = (d - 1.0) / (2.0 * x) * wx + (d - 1.0) / (2.0 * y) * wy + 0.5 * (wxx - 2.0 * wxy + wyy);
    let jet = series.jet((y - x) / (x + y))?;
    Ok(raw / ((x + y).powf(series.params().p - 2.0) * jet.scale()))
}

/// `V(x, y) = y^p - C^p x^p`.
pub fn eval_v(bundle: &ConstantsBundle, x: f64, y: f64) -> f64 {
    let p = bundle.params.p;
    let c_pd = bundle.c_pd.unwrap_or(f64::INFINITY);
    y.powf(p) - c_pd.powf(p) * x.powf(p)
}

/// `U`, `V` and the region split for one `(p, d)` with `p + d > 2`.
#[derive(Debug, Clone)]
pub struct BurkholderFamily {
    pub bundle: ConstantsBundle,
    pub series: SeriesSolution,
    /// Slope of the line `y = boundary_ratio * x` separating the two branches of `U`.
    pub boundary_ratio: f64,
    z0: f64,
    z1: f64,
    c: f64,
    c_pd: f64,
}

impl BurkholderFamily {
    pub fn new(series: SeriesSolution, bundle: ConstantsBundle) -> Result<Self> {
        let (Some(z0), Some(z1), Some(c), Some(c_pd)) = (bundle.z0, bundle.z1, bundle.c, bundle.c_pd)
        else {
            return Err(Error::InvalidParams(format!(
                "no finite constant for p = {}, d = {}",
                bundle.params.p, bundle.params.d
            )));
        };
        let p = bundle.params.p;
        let boundary_ratio = if p < 1.0 {
            (1.0 + z1) / (1.0 - z1)
        } else if p <= 2.0 {
            (1.0 + z0) / (1.0 - z0)
        } else {
            (1.0 - z0) / (1.0 + z0)
        };
        Ok(BurkholderFamily { bundle, series, boundary_ratio, z0, z1, c, c_pd })
    }

    pub fn from_params(params: Params) -> Result<Self> {
        let (series, bundle) = solve(params)?;
        Self::new(series, bundle)
    }

    pub fn params(&self) -> &Params {
        &self.bundle.params
    }

    /// Section abscissa `s = (y-x)/(x+y)` of the boundary line.
    pub fn boundary_s(&self) -> f64 {
        if self.params().p <= 2.0 {
            self.z1
        } else {
            -self.z0
        }
    }

    pub fn region(&self, x: f64, y: f64) -> Region {
        let inner = if self.params().p <= 2.0 {
            y <= self.boundary_ratio * x
        } else {
            y >= self.boundary_ratio * x
        };
        if inner {
            Region::Inner
        } else {
            Region::Outer
        }
    }

    fn outer(&self, x: f64, y: f64) -> PointEval {
        let p = self.params().p;
        let cp = self.c_pd.powf(p);
        PointEval {
            region: Region::Outer,
            value: y.powf(p) - cp * x.powf(p),
            grad: (-p * cp * x.powf(p - 1.0), p * y.powf(p - 1.0)),
            hessian: (
                -p * (p - 1.0) * cp * x.powf(p - 2.0),
                0.0,
                p * (p - 1.0) * y.powf(p - 2.0),
            ),
        }
    }

    fn inner(&self, x: f64, y: f64) -> Result<PointEval> {
        let p = self.params().p;
        if p <= 2.0 {
            let h = self.series.jet((y - x) / (x + y))?;
            Ok(homogeneous(p, self.c, 1.0, x, y, &h, Region::Inner))
        } else {
            let h = self.series.jet((x - y) / (x + y))?;
            let k = -self.c * self.c_pd.powf(p);
            Ok(homogeneous(p, k, -1.0, x, y, &h, Region::Inner))
        }
    }

    pub fn eval_u(&self, x: f64, y: f64) -> Result<PointEval> {
        check_point(x, y)?;
        match self.region(x, y) {
            Region::Inner => self.inner(x, y),
            Region::Outer => Ok(self.outer(x, y)),
        }
    }

    /// Evaluates one branch regardless of the region test (used for straddle checks).
    pub fn eval_branch(&self, x: f64, y: f64, region: Region) -> Result<PointEval> {
        check_point(x, y)?;
        match region {
            Region::Inner => self.inner(x, y),
            Region::Outer => Ok(self.outer(x, y)),
        }
    }

    pub fn eval_v(&self, x: f64, y: f64) -> f64 {
        eval_v(&self.bundle, x, y)
    }
}

pub const BOUNDARY_BAND: f64 = 1e-6;

/// Checks `U >= V`, `L + R - 2U_xy <= 0`, `L - R <= 0`, `U_xy <= 0`,
/// `U_x <= 0 <= U_y` on the section `x + y = 2`.
///
/// Second-order checks skip a `BOUNDARY_BAND` neighbourhood of the line where
/// `U` is only `C^1`.
pub fn certify_inequalities(family: &BurkholderFamily, grid_n: usize, tol: f64) -> Result<Vec<GridReport>> {
    if grid_n < 101 {
        return Err(Error::InvalidInput(format!("grid_n must be >= 101, got {grid_n}")));
    }
    let params = *family.params();
    let d = params.d;
    let s_hi = 0.999f64.min(family.series.s_max_certified());
    let grid = linspace(-1.0 + 1e-4, s_hi, grid_n);
    let sb = family.boundary_s();

    let evals = par_map(&grid, |s| family.eval_u(1.0 - s, 1.0 + s));
    let evals: Vec<PointEval> = evals.into_iter().collect::<Result<_>>()?;

    let first_order = |f: &dyn Fn(f64, f64, &PointEval) -> f64| -> Vec<(f64, WorstPoint)> {
        grid.iter()
            .zip(&evals)
            .map(|(&s, e)| {
                let (x, y) = (1.0 - s, 1.0 + s);
                (f(x, y, e) / e.scale(x, y), WorstPoint::on_section(s, e.region))
            })
            .collect()
    };
    let second_order = |f: &dyn Fn(f64, f64, &PointEval) -> f64| -> Vec<(f64, WorstPoint)> {
        grid.iter()
            .zip(&evals)
            .filter(|(&s, _)| (s - sb).abs() >= BOUNDARY_BAND)
            .map(|(&s, e)| {
                let (x, y) = (1.0 - s, 1.0 + s);
                (f(x, y, e) / e.scale(x, y), WorstPoint::on_section(s, e.region))
            })
            .collect()
    };
    let report = |id: &str, samples| GridReport::from_samples(id, &params, grid_n, tol, Verdict::Tolerant, samples);

    Ok(vec![
        report("maj", first_order(&|x, y, e| e.value - family.eval_v(x, y))),
        report(
            "part1",
            second_order(&|x, y, e| -(e.l(d, x) + e.r(d, y) - 2.0 * e.hessian.1)),
        ),
        report("part1.5", second_order(&|x, y, e| -(e.l(d, x) - e.r(d, y)))),
        report("part2", second_order(&|_, _, e| -e.hessian.1)),
        report("part3", first_order(&|_, _, e| (-e.grad.0).min(e.grad.1))),
    ])
}

/// `|L + R - 2U_xy|` on the inner region, which vanishes because `g` solves the ODE.
pub fn inner_generator_report(family: &BurkholderFamily, grid_n: usize, tol: f64) -> Result<GridReport> {
    let params = *family.params();
    let d = params.d;
    let s_hi = 0.999f64.min(family.series.s_max_certified());
    let sb = family.boundary_s();
    let grid: Vec<f64> = linspace(-1.0 + 1e-4, s_hi, grid_n)
        .into_iter()
        .filter(|&s| (s - sb).abs() >= BOUNDARY_BAND && family.region(1.0 - s, 1.0 + s) == Region::Inner)
        .collect();
    let samples = par_map(&grid, |s| -> Result<(f64, WorstPoint)> {
        let (x, y) = (1.0 - s, 1.0 + s);
        let e = family.eval_u(x, y)?;
        let gap = (e.l(d, x) + e.r(d, y) - 2.0 * e.hessian.1).abs() / e.scale(x, y);
        Ok((-gap, WorstPoint::on_section(s, Region::Inner)))
    });
    let samples: Vec<_> = samples.into_iter().collect::<Result<_>>()?;
    Ok(GridReport::from_samples("part1_equality", &params, grid_n, tol, Verdict::Tolerant, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn family(p: f64, d: f64) -> BurkholderFamily {
        BurkholderFamily::from_params(Params::new(p, d).unwrap()).unwrap()
    }

    #[test]
    fn w_closed_forms() {
        let f2 = family(2.0, 3.0);
        assert!((eval_w(&f2.series, 1.0, 2.0).unwrap() - 3.0).abs() < 1e-14);
        let f6 = family(6.0, 2.0);
        assert!((eval_w(&f6.series, 2.0, 1.0).unwrap() - 243.0).abs() < 1e-10);
        let f = family(1.3, 2.4);
        let w11 = eval_w(&f.series, 1.0, 1.0).unwrap();
        assert!((w11 - 2f64.powf(1.3) * f.series.eval(0.0, 0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn generator_vanishes() {
        assert!(generator_residual_w(&family(2.0, 3.0).series, 1.3, 0.7).unwrap().abs() < 1e-12);
        assert!(generator_residual_w(&family(6.0, 2.0).series, 2.0, 1.0).unwrap().abs() < 1e-10);
        assert!(generator_residual_w(&family(1.3, 2.4).series, 1.7, 0.4).unwrap().abs() < 1e-8);
    }

    #[test]
    fn w_y_vanishes_on_axis() {
        let f = family(1.5, 2.5);
        let w = w_jet(&f.series, 1.3, 0.0).unwrap();
        assert!(w.grad.1.abs() < 1e-14);
    }

    #[test]
    fn u_closed_form_at_p2() {
        let f = family(2.0, 2.0);
        for (x, y) in [(1.0, 2.0), (2.0, 1.0), (0.3, 0.3)] {
            let u = f.eval_u(x, y).unwrap();
            assert!((u.value - (y * y - x * x)).abs() < 1e-13);
        }
        assert!((f.eval_u(1.0, 2.0).unwrap().value - 3.0).abs() < 1e-13);
    }

    #[test]
    fn v_values() {
        let f = family(6.0, 2.0);
        let c = f.bundle.c_pd.unwrap();
        assert!((f.eval_v(1.0, 1.0) - (1.0 - c.powi(6))).abs() < 1e-9);
        assert_eq!(f.eval_v(0.0, 1.7), 1.7f64.powi(6));
        assert!(f.eval_v(1.0, 2.0 + 3f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn boundary_consistency_above_two() {
        let f = family(3.0, 2.0);
        let x = 1.0;
        let y = f.boundary_ratio * x;
        let inner = f.eval_branch(x, y, Region::Inner).unwrap().value;
        let outer = f.eval_branch(x, y, Region::Outer).unwrap().value;
        assert!(inner.abs() < 1e-11 && outer.abs() < 1e-11, "{inner} {outer}");
    }

    #[test]
    fn c1_across_boundary() {
        for (p, d) in [(0.9, 2.0), (1.5, 3.0), (3.0, 2.0), (6.0, 5.0)] {
            let f = family(p, d);
            let x = 0.8;
            let y = f.boundary_ratio * x;
            let a = f.eval_branch(x, y, Region::Inner).unwrap();
            let b = f.eval_branch(x, y, Region::Outer).unwrap();
            let tol = 1e-8 * (1.0 + a.value.abs() + a.grad.0.abs() + a.grad.1.abs());
            assert!((a.value - b.value).abs() < tol, "{p} {d} value");
            assert!((a.grad.0 - b.grad.0).abs() < tol, "{p} {d} U_x {a:?} {b:?}");
            assert!((a.grad.1 - b.grad.1).abs() < tol, "{p} {d} U_y");
        }
    }

    #[test]
    fn partials_match_finite_differences() {
        for (p, d) in [(0.9, 2.0), (1.5, 3.0), (3.0, 2.0)] {
            let f = family(p, d);
            for (x, y) in [(1.0, 0.3), (0.4, 1.9), (1.2, 1.1), (0.2, 2.5)] {
                let e = f.eval_u(x, y).unwrap();
                let h = 1e-5 * (x + y);
                let val = |x: f64, y: f64| f.eval_branch(x, y, e.region).unwrap();
                let fx = (val(x + h, y).value - val(x - h, y).value) / (2.0 * h);
                let fy = (val(x, y + h).value - val(x, y - h).value) / (2.0 * h);
                let fxx = (val(x + h, y).grad.0 - val(x - h, y).grad.0) / (2.0 * h);
                let fxy = (val(x, y + h).grad.0 - val(x, y - h).grad.0) / (2.0 * h);
                let fyy = (val(x, y + h).grad.1 - val(x, y - h).grad.1) / (2.0 * h);
                let close = |a: f64, b: f64, mag: f64| (a - b).abs() <= 1e-6 * mag.max(1.0);
                let mag1 = e.grad.0.abs() + e.grad.1.abs();
                let mag2 = e.hessian.0.abs() + e.hessian.1.abs() + e.hessian.2.abs();
                assert!(close(fx, e.grad.0, mag1), "{p} {x} {y} U_x");
                assert!(close(fy, e.grad.1, mag1), "{p} {x} {y} U_y");
                assert!(close(fxx, e.hessian.0, mag2), "{p} {x} {y} U_xx");
                assert!(close(fxy, e.hessian.1, mag2), "{p} {x} {y} U_xy");
                assert!(close(fyy, e.hessian.2, mag2), "{p} {x} {y} U_yy");
            }
        }
    }

    #[test]
    fn u_nonpositive_below_diagonal() {
        for (p, d) in [(0.9, 2.0), (1.5, 3.0), (2.0, 2.0), (3.0, 2.0)] {
            let f = family(p, d);
            for s in linspace(-0.999, 0.0, 201) {
                let u = f.eval_u(1.0 - s, 1.0 + s).unwrap();
                assert!(u.value <= 1e-12, "{p} {s} {}", u.value);
            }
        }
    }

    #[test]
    fn certify_p2_and_p3() {
        for r in certify_inequalities(&family(2.0, 2.0), 201, 1e-12).unwrap() {
            assert!(r.pass, "{r:?}");
        }
        for r in certify_inequalities(&family(3.0, 2.0), 2001, 1e-9).unwrap() {
            assert!(r.pass, "{r:?}");
        }
        assert!(certify_inequalities(&family(3.0, 2.0), 50, 1e-9).is_err());
    }

    static HOMOGENEITY_FAMILIES: std::sync::LazyLock<[BurkholderFamily; 2]> =
        std::sync::LazyLock::new(|| [family(0.9, 2.0), family(3.0, 3.0)]);

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn homogeneity(lambda in 0.05f64..20.0, x in 0.05f64..5.0, y in 0.0f64..5.0) {
            for f in HOMOGENEITY_FAMILIES.iter() {
                let p = f.params().p;
                let a = f.eval_u(lambda * x, lambda * y).unwrap().value;
                let b = f.eval_u(x, y).unwrap().value;
                let lp = lambda.powf(p);
                prop_assert!((a - lp * b).abs() <= 1e-11 * lp * (1.0 + b.abs()));
            }
        }
    }
}
