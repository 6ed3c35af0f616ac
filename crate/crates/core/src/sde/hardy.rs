//! Hardy-space norms of analytic pairs `F2 ≺ F1` (`|F2'| <= |F1'|`, `F1(0) = F2(0) = 0`).

use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constants::solve;
use crate::error::{Error, Result};
use crate::specfun::Params;

/// Radii at which circular means are sampled; `1.0` stands for the boundary limit,
/// which is the supremum for functions continuous on the closed disc.
pub const DEFAULT_RADII: [f64; 5] = [0.5, 0.9, 0.99, 0.999, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HpPair {
    /// `(z, z)`
    Identity,
    /// `(z, z^2 / 2)`
    Z2Half,
    /// `(z, z^3 / 3)`
    Z3Third,
    /// `(z, lambda z)` with `|lambda| <= 1`
    Scaled(f64),
}

impl FromStr for HpPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(HpPair::Identity),
            "z2half" => Ok(HpPair::Z2Half),
            "z3third" => Ok(HpPair::Z3Third),
            _ => {
                let lambda = s
                    .strip_prefix("scaled:")
                    .and_then(|l| l.parse::<f64>().ok())
                    .ok_or_else(|| Error::UnknownPair(s.to_string()))?;
                if !(lambda.abs() <= 1.0) {
                    return Err(Error::UnknownPair(format!("{s}: need |lambda| <= 1")));
                }
                Ok(HpPair::Scaled(lambda))
            }
        }
    }
}

impl HpPair {
    pub fn id(&self) -> String {
        match self {
            HpPair::Identity => "identity".into(),
            HpPair::Z2Half => "z2half".into(),
            HpPair::Z3Third => "z3third".into(),
            HpPair::Scaled(l) => format!("scaled:{l}"),
        }
    }

    /// `(|F1(z)|, |F2(z)|)` at `z = r e^{i theta}`.
    fn moduli(&self, r: f64, theta: f64) -> (f64, f64) {
        let power = |k: i32| {
            let (s, c) = (k as f64 * theta).sin_cos();
            let rk = r.powi(k);
            (rk * c).hypot(rk * s)
        };
        let f1 = power(1);
        let f2 = match *self {
            HpPair::Identity => f1,
            HpPair::Z2Half => power(2) / 2.0,
            HpPair::Z3Third => power(3) / 3.0,
            HpPair::Scaled(l) => l.abs() * f1,
        };
        (f1, f2)
    }

    /// `(|F1'(z)|, |F2'(z)|)`.
    fn derivative_moduli(&self, r: f64) -> (f64, f64) {
        match *self {
            HpPair::Identity => (1.0, 1.0),
            HpPair::Z2Half => (1.0, r),
            HpPair::Z3Third => (1.0, r * r),
            HpPair::Scaled(l) => (1.0, l.abs()),
        }
    }
}

/// `sup_r ( (1/2pi) ∫ |F(r e^{i theta})|^p dtheta )^{1/p}` with an `n`-point periodic trapezoid rule.
pub fn hp_norm(f: impl Fn(f64, f64) -> f64, p: f64, radii: &[f64], n_quadrature: usize) -> f64 {
    radii
        .iter()
        .map(|&r| {
            let sum: f64 = (0..n_quadrature)
                .map(|j| f(r, 2.0 * PI * j as f64 / n_quadrature as f64).powf(p))
                .sum();
            (sum / n_quadrature as f64).powf(1.0 / p)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpReport {
    pub pair_id: String,
    pub p: f64,
    pub radii: Vec<f64>,
    pub n_quadrature: usize,
    pub norm_f1: f64,
    pub norm_f2: f64,
    pub ratio: f64,
    /// Two-dimensional constant `C_{p,2}` that bounds the ratio.
    pub c_p2: f64,
    pub subordinate: bool,
    pub pass: bool,
}

pub fn hp_demo(pair: HpPair, p: f64, radii: &[f64], n_quadrature: usize) -> Result<HpReport> {
    if n_quadrature < 16 || radii.is_empty() || radii.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::InvalidInput("need n_quadrature >= 16 and radii in (0, 1]".into()));
    }
    let (_, bundle) = solve(Params::new(p, 2.0)?)?;
    let c_p2 = bundle
        .c_pd
        .ok_or_else(|| Error::InvalidParams(format!("no finite constant for p = {p}, d = 2")))?;
    let norm_f1 = hp_norm(|r, t| pair.moduli(r, t).0, p, radii, n_quadrature);
    let norm_f2 = hp_norm(|r, t| pair.moduli(r, t).1, p, radii, n_quadrature);
    let ratio = norm_f2 / norm_f1;
    let subordinate = (0..=100).all(|i| {
        let (d1, d2) = pair.derivative_moduli(i as f64 / 100.0);
        d2 <= d1
    });
    Ok(HpReport {
        pair_id: pair.id(),
        p,
        radii: radii.to_vec(),
        n_quadrature,
        norm_f1,
        norm_f2,
        ratio,
        c_p2,
        subordinate,
        pass: subordinate && ratio <= c_p2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_parses() {
        assert_eq!("z2half".parse::<HpPair>().unwrap(), HpPair::Z2Half);
        assert_eq!("scaled:-0.5".parse::<HpPair>().unwrap(), HpPair::Scaled(-0.5));
        assert!("scaled:2".parse::<HpPair>().is_err());
        assert!(matches!("bogus".parse::<HpPair>(), Err(Error::UnknownPair(_))));
    }

    #[test]
    fn z2half_ratio_is_one_half() {
        for p in [1.0, 2.0, 4.0] {
            let rep = hp_demo(HpPair::Z2Half, p, &DEFAULT_RADII, 1024).unwrap();
            assert!((rep.ratio - 0.5).abs() <= 1e-10, "p = {p}: {}", rep.ratio);
            assert!(rep.pass);
        }
    }

    #[test]
    fn scaled_pair_ratio_is_lambda() {
        let rep = hp_demo(HpPair::Scaled(0.7), 3.0, &DEFAULT_RADII, 256).unwrap();
        assert!((rep.ratio - 0.7).abs() < 1e-12);
        assert!((rep.norm_f1 - 1.0).abs() < 1e-12);
    }
}
