use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qmath::{CMatrix, StateVector};

use super::counts::poisson;
use super::tomography::linear_from_values;
use super::{validate_records, CountRecord, MeasSetting};

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub sd: f64,
    pub mean: f64,
    pub used: usize,
    /// Resamples on which the statistic failed.
    pub excluded: usize,
}

/// Parametric bootstrap: each count is redrawn as Poisson(observed). Resample
/// `i` uses stream `i` of a ChaCha8 generator seeded with `seed`, so the
/// result does not depend on thread count.
pub fn monte_carlo_sd<F>(
    records: &[CountRecord],
    statistic: F,
    n_resamples: usize,
    seed: u64,
) -> Result<BootstrapResult>
where
    F: Fn(&[CountRecord]) -> Result<f64> + Sync,
{
    if n_resamples < 100 {
        return Err(Error::InvalidParameter(format!(
            "n_resamples must be at least 100, got {n_resamples}"
        )));
    }
    validate_records(records)?;
    let values: Vec<Option<f64>> = (0..n_resamples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let resample: Vec<CountRecord> = records
                .iter()
                .map(|r| CountRecord { count: poisson(r.count as f64, &mut rng), ..r.clone() })
                .collect();
            statistic(&resample).ok().filter(|v| v.is_finite())
        })
        .collect();
    let ok: Vec<f64> = values.iter().flatten().copied().collect();
    let excluded = n_resamples - ok.len();
    if ok.len() < 2 {
        return Err(Error::InvalidParameter("statistic failed on almost every resample".into()));
    }
    // Shifted by the first value so a constant statistic gives exactly zero.
    let n = ok.len() as f64;
    let shifted: Vec<f64> = ok.iter().map(|v| v - ok[0]).collect();
    let m = shifted.iter().sum::<f64>() / n;
    let var = shifted.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(BootstrapResult { sd: var.sqrt(), mean: ok[0] + m, used: ok.len(), excluded })
}

/// tr(O ρ_lin) for the linear estimate, with Poisson propagation. The
/// estimate is a ratio of two linear functionals of the rates, so the
/// derivative is exact.
pub fn linear_functional_sd(records: &[CountRecord], observable: &CMatrix) -> Result<(f64, f64)> {
    validate_records(records)?;
    let settings: Vec<MeasSetting> = records.iter().map(|r| r.setting.clone()).collect();
    let rates: Vec<f64> = records.iter().map(|r| r.rate()).collect();
    let n = records.len();
    // Response of (tr(O X), tr X) to a unit rate on each setting.
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    for k in 0..n {
        let mut unit = vec![0.0; n];
        unit[k] = 1.0;
        let x = linear_from_values(&settings, &unit)?;
        num[k] = (observable * &x).trace().re;
        den[k] = x.trace().re;
    }
    let top: f64 = num.iter().zip(&rates).map(|(a, y)| a * y).sum();
    let bottom: f64 = den.iter().zip(&rates).map(|(b, y)| b * y).sum();
    if bottom <= 0.0 {
        return Err(Error::ZeroCounts("tomography".into()));
    }
    let value = top / bottom;
    let var: f64 = records
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let d = (num[k] - value * den[k]) / bottom / r.duration_s;
            d * d * r.count as f64
        })
        .sum();
    Ok((value, var.sqrt()))
}

/// Fidelity of the linear estimate to `target`, with its Poisson s.d.
pub fn fidelity_from_counts(records: &[CountRecord], target: &StateVector) -> Result<(f64, f64)> {
    let v = target.vector();
    linear_functional_sd(records, &(v * v.adjoint()))
}
