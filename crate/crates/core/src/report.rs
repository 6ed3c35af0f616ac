//! Worst-margin reports for grid certification runs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::specfun::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Inner,
    Outer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstPoint {
    pub x: f64,
    pub y: f64,
    pub s: f64,
    pub region: Region,
}

impl WorstPoint {
    /// Point on the section `x + y = 2` with abscissa `s = (y - x) / (x + y)`.
    pub fn on_section(s: f64, region: Region) -> Self {
        WorstPoint { x: 1.0 - s, y: 1.0 + s, s, region }
    }
}

/// Outcome of checking one inequality on one grid.
///
/// Margins are signed and normalised by a local scale; a check passes when
/// `worst_margin >= -tol` (or `> 0` for strict checks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub check_id: String,
    pub p: f64,
    pub d: f64,
    pub grid_n: usize,
    pub tol: f64,
    pub worst_margin: f64,
    pub worst_point: WorstPoint,
    pub pass: bool,
}

/// How a worst margin is turned into a verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    /// `worst_margin >= -tol`
    Tolerant,
    /// `worst_margin > 0`
    Strict,
}

impl GridReport {
    /// Reduces `(margin, point)` samples in index order; the lowest index wins ties
    /// and NaN margins count as `-inf`.
    pub fn from_samples<I>(
        check_id: &str,
        params: &Params,
        grid_n: usize,
        tol: f64,
        verdict: Verdict,
        samples: I,
    ) -> Self
    where
        I: IntoIterator<Item = (f64, WorstPoint)>,
    {
        let mut worst: Option<(f64, WorstPoint)> = None;
        for (margin, point) in samples {
            let margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
            if worst.is_none_or(|(m, _)| margin < m) {
                worst = Some((margin, point));
            }
        }
        let (worst_margin, worst_point) =
            worst.unwrap_or((f64::NEG_INFINITY, WorstPoint::on_section(0.0, Region::Inner)));
        let pass = match verdict {
            Verdict::Tolerant => worst_margin >= -tol,
            Verdict::Strict => worst_margin > 0.0,
        };
        GridReport {
            check_id: check_id.to_string(),
            p: params.p,
            d: params.d,
            grid_n,
            tol,
            worst_margin,
            worst_point,
            pass,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("GridReport serialises")
    }
}

/// `n` equally spaced points on `[lo, hi]` (both ends included).
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let h = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| if i + 1 == n { hi } else { lo + h * i as f64 }).collect()
        }
    }
}

/// Maps `f` over `xs` in parallel, preserving order.
pub fn par_map<T, F>(xs: &[f64], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(f64) -> T + Sync + Send,
{
    xs.par_iter().map(|&x| f(x)).collect()
}
