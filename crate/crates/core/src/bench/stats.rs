use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Summary of one metric across the runs of an environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub mean: f64,
    /// Sample standard deviation (`n - 1`); 0 when `n == 1`.
    pub std: f64,
    /// Mean of the values left after dropping the `n / 4` smallest and largest.
    pub iqm: f64,
    pub n: usize,
}

pub fn aggregate(values: &[f64]) -> Result<AggregateStats> {
    let n = values.len();
    if n == 0 {
        return Err(Error::Empty("cannot aggregate an empty sample"));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let trim = n / 4;
    let kept = &sorted[trim..n - trim];
    let iqm = kept.iter().sum::<f64>() / kept.len() as f64;
    Ok(AggregateStats { mean, std, iqm, n })
}
