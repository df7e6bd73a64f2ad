use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::qmath::DensityOperator;

use super::{require_two_qubits, CountRecord, MeasSetting};

/// One measurement setting held for `duration_s`; `scale` is the expected
/// count for a projector of unit probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Exposure {
    pub setting: MeasSetting,
    pub scale: f64,
    pub duration_s: f64,
}

/// Equal exposures whose expected counts on `rho` sum to `total`.
pub fn exposures_for_total(
    rho: &DensityOperator,
    settings: &[MeasSetting],
    total: f64,
    duration_s: f64,
) -> Result<Vec<Exposure>> {
    require_two_qubits(rho.dim())?;
    if !(total > 0.0) {
        return Err(Error::InvalidParameter("total counts must be positive".into()));
    }
    let mut sum = 0.0;
    for s in settings {
        sum += rho.expectation(&s.projector())?;
    }
    if sum <= 0.0 {
        return Err(Error::ZeroProbability);
    }
    Ok(settings
        .iter()
        .map(|s| Exposure { setting: s.clone(), scale: total / sum, duration_s })
        .collect())
}

/// Poisson counts with mean `scale · ⟨P⟩`; one ChaCha8 stream per seed,
/// consumed in exposure order.
pub fn simulate_counts(
    rho: &DensityOperator,
    exposures: &[Exposure],
    seed: u64,
) -> Result<Vec<CountRecord>> {
    require_two_qubits(rho.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    exposures
        .iter()
        .map(|e| {
            if !(e.scale > 0.0) || !(e.duration_s > 0.0) {
                return Err(Error::InvalidParameter("exposure totals must be positive".into()));
            }
            let mean = e.scale * rho.expectation(&e.setting.projector())?.max(0.0);
            Ok(CountRecord { setting: e.setting.clone(), count: poisson(mean, &mut rng), duration_s: e.duration_s })
        })
        .collect()
}

pub(crate) fn poisson<R: rand::Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}
