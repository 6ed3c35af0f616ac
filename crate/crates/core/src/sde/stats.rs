use serde::{Deserialize, Serialize};

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Pairwise summation over the slice in index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn batch_means(xs: &[f64], batches: usize) -> Vec<f64> {
    let n = xs.len();
    let k = batches.min(n).max(1);
    (0..k)
        .map(|b| {
            let (lo, hi) = (b * n / k, (b + 1) * n / k);
            pairwise_sum(&xs[lo..hi]) / (hi - lo) as f64
        })
        .collect()
}

impl Estimate {
    /// Mean with a batch-means standard error.
    pub fn batch_mean(xs: &[f64], batches: usize) -> Self {
        if xs.is_empty() {
            return Estimate { value: f64::NAN, stderr: f64::NAN };
        }
        let value = pairwise_sum(xs) / xs.len() as f64;
        let means = batch_means(xs, batches);
        let k = means.len();
        let stderr = if k < 2 {
            0.0
        } else {
            let centred: Vec<f64> = means.iter().map(|m| (m - value).powi(2)).collect();
            (pairwise_sum(&centred) / ((k - 1) * k) as f64).sqrt()
        };
        Estimate { value, stderr }
    }

    /// `m^(1/p)` with a delta-method standard error.
    pub fn pth_root(&self, p: f64) -> Self {
        let value = self.value.powf(1.0 / p);
        Estimate { value, stderr: value / (p * self.value) * self.stderr }
    }
}

/// Covariance of the two sample means estimated from paired batch means.
pub fn batch_covariance(xs: &[f64], ys: &[f64], batches: usize) -> f64 {
    let (mx, my) = (batch_means(xs, batches), batch_means(ys, batches));
    let k = mx.len();
    if k < 2 {
        return 0.0;
    }
    let ax = pairwise_sum(&mx) / k as f64;
    let ay = pairwise_sum(&my) / k as f64;
    let prods: Vec<f64> = mx.iter().zip(&my).map(|(x, y)| (x - ax) * (y - ay)).collect();
    pairwise_sum(&prods) / ((k - 1) * k) as f64
}
