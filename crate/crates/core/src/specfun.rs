//! The bounded power-series solution `g_{p,d}` of
//!
//! ```text
//! (1 - s^2) g''(s) - 2(d - 1) s g'(s) + p(d - 1) g(s) = 0,   g(-1) = -1,
//! ```
//!
//! expanded around `s = -1` as `g(s) = sum a_n (1 + s)^n`.
//!
//! Internally the coefficients are kept in the rescaled variable
//! `w = (1 + s) / 2`, i.e. `b_n = 2^n a_n`, which behave like `n^(d-3)`
//! and therefore never underflow even for very long expansions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on the number of series terms.
pub const DEFAULT_TERM_BUDGET: usize = 200_000;
/// Largest abscissa a series may be certified up to.
pub const S_MAX_CAP: f64 = 1.0 - 1e-6;
/// Relative threshold below which a numerator factor counts as an exact zero.
pub const TERMINATION_THRESHOLD: f64 = 1e-14;
/// Offset from the singular endpoint used to seed the ODE integrator.
pub const RK4_OFFSET: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Branch {
    PLess1,
    PIn1to2,
    PEquals2,
    PGreater2,
}

/// Exponent `p` and (possibly fractional) dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub p: f64,
    pub d: f64,
    pub supercritical: bool,
    pub branch: Branch,
}

impl Params {
    pub fn new(p: f64, d: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidParams(format!("p must be a finite number > 0, got {p}")));
        }
        if !(d.is_finite() && d > 1.0) {
            return Err(Error::InvalidParams(format!("d must be a finite number > 1, got {d}")));
        }
        let branch = if p < 1.0 {
            Branch::PLess1
        } else if p < 2.0 {
            Branch::PIn1to2
        } else if p == 2.0 {
            Branch::PEquals2
        } else {
            Branch::PGreater2
        };
        Ok(Params { p, d, supercritical: p + d > 2.0, branch })
    }

    /// Numerator factor `k(k-1) + 2(d-1)k - p(d-1)` of the coefficient recursion.
    pub fn numerator_factor(&self, k: usize) -> f64 {
        let k = k as f64;
        k * (k - 1.0) + 2.0 * (self.d - 1.0) * k - self.p * (self.d - 1.0)
    }

    fn numerator_scale(&self, k: usize) -> f64 {
        let k = k as f64;
        k * k + (2.0 * self.d - 3.0).abs() * k + self.p * (self.d - 1.0)
    }

    /// Denominator `2(k+1)(k+d-1)` of the coefficient recursion.
    pub fn denominator_factor(&self, k: usize) -> f64 {
        let k = k as f64;
        2.0 * (k + 1.0) * (k + self.d - 1.0)
    }
}

/// Truncated expansion of `g_{p,d}` together with the metadata needed to
/// certify evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSolution {
    params: Params,
    /// `b_n = 2^n a_n`.
    scaled: Vec<f64>,
    polynomial_degree: Option<usize>,
    s_max_certified: f64,
    tail_tol: f64,
    /// First index from which every later numerator factor is positive.
    envelope_start: usize,
}

/// Evaluation of `g`, `g'` and `g''` at one abscissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub fn scale(&self) -> f64 {
        1.0 + self.value.abs() + self.d1.abs() + self.d2.abs()
    }
}

/// Bound on `|b_{n+1} / b_n|` valid for every `n >= m >= envelope_start`.
fn ratio_envelope(d: f64, m: usize) -> f64 {
    1.0 + (d - 3.0).max(0.0) / m as f64
}

/// Tail bound for the `k`-th `s`-derivative when the series is cut after index `m`,
/// given `b_abs = |b_m|`. Returns `None` when the geometric envelope diverges.
fn tail_bound(d: f64, m: usize, w: f64, b_abs: f64, k: usize) -> Option<f64> {
    let mf = m as f64;
    let kf = k as f64;
    if mf + 1.0 - kf <= 0.0 {
        return None;
    }
    let q = ratio_envelope(d, m) * w * (mf + 1.0) / (mf + 1.0 - kf);
    if q >= 1.0 {
        return None;
    }
    // m^k |b_m| w^(m-k) bounds the k-th w-derivative of the last kept term.
    let lead = b_abs * w.powi((m - k) as i32) * mf.powi(k as i32);
    Some(lead * q / (1.0 - q) * 0.5f64.powi(k as i32))
}

pub fn build_series(params: Params, tail_tol: f64, s_max: f64) -> Result<SeriesSolution> {
    build_series_with_budget(params, tail_tol, s_max, DEFAULT_TERM_BUDGET)
}

pub fn build_series_with_budget(
    params: Params,
    tail_tol: f64,
    s_max: f64,
    budget: usize,
) -> Result<SeriesSolution> {
    if !(tail_tol.is_finite() && tail_tol > 0.0) {
        return Err(Error::InvalidInput(format!("tail_tol must be > 0, got {tail_tol}")));
    }
    if !(s_max > -1.0 && s_max < 1.0) {
        return Err(Error::InvalidInput(format!("s_max must lie in (-1, 1), got {s_max}")));
    }
    let s_max = s_max.min(S_MAX_CAP);
    let w_max = 0.5 * (1.0 + s_max);
    let d = params.d;

    let mut scaled: Vec<f64> = vec![-1.0];
    let mut envelope_start: Option<usize> = None;
    let mut polynomial_degree = None;

    let mut n = 0usize;
    loop {
        let f = params.numerator_factor(n);
        if f.abs() < TERMINATION_THRESHOLD * params.numerator_scale(n) {
            polynomial_degree = Some(n);
            break;
        }
        if n >= 1 && f > 0.0 && envelope_start.is_none() {
            envelope_start = Some(n);
        }
        if let Some(start) = envelope_start {
            if n >= start.max(2) {
                let b_abs = scaled[n].abs();
                let certified = (0..=2).all(|k| {
                    tail_bound(d, n, w_max, b_abs, k).is_some_and(|t| t < tail_tol)
                });
                if certified {
                    break;
                }
            }
        }
        if n >= budget {
            return Err(Error::SeriesBudgetExceeded { terms: n, tail_tol, s_max });
        }
        // b_{n+1} = b_n * f_n / ((n+1)(n+d-1))
        let next = scaled[n] * 2.0 * f / params.denominator_factor(n);
        scaled.push(next);
        n += 1;
    }

    if let Some(deg) = polynomial_degree {
        scaled.truncate(deg + 1);
        while scaled.len() < deg.max(1) + 2 {
            scaled.push(0.0);
        }
    }

    Ok(SeriesSolution {
        params,
        scaled,
        polynomial_degree,
        s_max_certified: s_max,
        tail_tol,
        envelope_start: envelope_start.unwrap_or(1),
    })
}

impl SeriesSolution {
    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Index of the last stored coefficient.
    pub fn n_terms(&self) -> usize {
        self.scaled.len() - 1
    }

    pub fn polynomial_degree(&self) -> Option<usize> {
        self.polynomial_degree
    }

    pub fn s_max_certified(&self) -> f64 {
        self.s_max_certified
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    /// Coefficient `a_n` of `(1 + s)^n` (zero when it underflows).
    pub fn coeff(&self, n: usize) -> f64 {
        self.scaled.get(n).map_or(0.0, |b| b * 0.5f64.powi(n as i32))
    }

    pub fn coeffs(&self) -> Vec<f64> {
        (0..self.scaled.len()).map(|n| self.coeff(n)).collect()
    }

    /// Coefficients in the variable `w = (1 + s) / 2`.
    pub fn scaled_coeffs(&self) -> &[f64] {
        &self.scaled
    }

    fn check_range(&self, s: f64) -> Result<()> {
        if !(s >= -1.0 && s <= self.s_max_certified) {
            return Err(Error::Range { s, s_max_certified: self.s_max_certified });
        }
        Ok(())
    }

    /// Last index needed so that every derivative up to `order` is within `tail_tol` at `w`.
    fn cut_index(&self, w: f64, order: usize) -> usize {
        let last = self.scaled.len() - 1;
        if self.polynomial_degree.is_some() || w == 0.0 {
            return last;
        }
        let start = self.envelope_start.max(2);
        for m in start..=last {
            let b_abs = self.scaled[m].abs();
            let ok = (0..=order).all(|k| {
                tail_bound(self.params.d, m, w, b_abs, k).is_some_and(|t| t < self.tail_tol)
            });
            if ok {
                return m;
            }
        }
        last
    }

    /// `g`, `g'`, `g''` at `s` by a single Horner sweep from the highest needed term.
    pub fn jet(&self, s: f64) -> Result<Jet> {
        self.check_range(s)?;
        Ok(self.jet_unchecked(s, 2))
    }

    fn jet_unchecked(&self, s: f64, order: usize) -> Jet {
        let w = 0.5 * (1.0 + s);
        if w == 0.0 {
            let b = &self.scaled;
            return Jet { value: b[0], d1: 0.5 * b[1], d2: 0.5 * b[2] };
        }
        let m = self.cut_index(w, order);
        let (mut p0, mut p1, mut p2) = (self.scaled[m], 0.0, 0.0);
        for b in self.scaled[..m].iter().rev() {
            p2 = p2 * w + p1;
            p1 = p1 * w + p0;
            p0 = p0 * w + b;
        }
        // p2 holds half the second w-derivative; d/ds = (1/2) d/dw.
        Jet { value: p0, d1: 0.5 * p1, d2: 0.5 * p2 }
    }

    pub fn eval(&self, s: f64, deriv_order: u8) -> Result<f64> {
        self.check_range(s)?;
        let jet = self.jet_unchecked(s, deriv_order as usize);
        match deriv_order {
            0 => Ok(jet.value),
            1 => Ok(jet.d1),
            2 => Ok(jet.d2),
            other => Err(Error::InvalidInput(format!("deriv_order must be 0, 1 or 2, got {other}"))),
        }
    }

    /// Scaled residual of the ODE at `s`.
    pub fn ode_residual(&self, s: f64) -> Result<f64> {
        let jet = self.jet(s)?;
        Ok(ode_residual_of(&self.params, s, &jet))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "params": self.params,
            "coeffs": self.coeffs(),
            "scaled_coeffs": self.scaled,
            "n_terms": self.n_terms(),
            "polynomial_degree": self.polynomial_degree,
            "s_max_certified": self.s_max_certified,
            "tail_tol": self.tail_tol,
        })
    }
}

/// `(1-s^2) g'' - 2(d-1) s g' + p(d-1) g` divided by `1 + |g| + |g'| + |g''|`.
pub fn ode_residual_of(params: &Params, s: f64, jet: &Jet) -> f64 {
    let (p, d) = (params.p, params.d);
    let raw = (1.0 - s * s) * jet.d2 - 2.0 * (d - 1.0) * s * jet.d1 + p * (d - 1.0) * jet.value;
    raw / jet.scale()
}

/// Integrates the ODE with classic fixed-step RK4 from `-1 + RK4_OFFSET` to `s_end`.
///
/// Steps are uniform in `t = ln(1 + s)`, which keeps the step-size restriction
/// bounded near the regular singular point `s = -1`. Initial data come from the
/// series.
pub fn rk4_crosscheck(params: Params, s_end: f64, steps: usize) -> Result<f64> {
    let s_start = -1.0 + RK4_OFFSET;
    if !(s_end > s_start && s_end < 1.0) {
        return Err(Error::InvalidInput(format!(
            "s_end must lie in ({s_start}, 1), got {s_end}"
        )));
    }
    if steps < 1000 {
        return Err(Error::InvalidInput(format!("steps must be >= 1000, got {steps}")));
    }
    let seed = build_series(params, 1e-16, -0.5)?;
    let init = seed.jet(s_start)?;

    let (t0, t1) = (RK4_OFFSET.ln(), (1.0 + s_end).ln());
    let h = (t1 - t0) / steps as f64;
    if !(h > f64::EPSILON * t1.abs().max(1.0)) {
        return Err(Error::IntegrationDiverged { s: s_start });
    }
    let (p, d) = (params.p, params.d);

    // State (g, g'); d/dt = (1 + s) d/ds with s = e^t - 1.
    let rhs = |t: f64, y: [f64; 2]| -> [f64; 2] {
        let u = t.exp();
        let s = u - 1.0;
        let g2 = (2.0 * (d - 1.0) * s * y[1] - p * (d - 1.0) * y[0]) / (u * (2.0 - u));
        [u * y[1], u * g2]
    };

    let mut y = [init.value, init.d1];
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let k1 = rhs(t, y);
        let k2 = rhs(t + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = rhs(t + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = rhs(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for j in 0..2 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if !(y[0].is_finite() && y[1].is_finite()) {
            return Err(Error::IntegrationDiverged { s: (t + h).exp() - 1.0 });
        }
    }
    Ok(y[0])
}
