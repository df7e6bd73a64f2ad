use crate::error::{Error, Result};
use crate::qmath::{DensityOperator, Operator, Tensor, C64};

use super::{require_two_qubits, validate_records, Analyzer, CountRecord, MeasSetting};

/// Analyzer angles (a, a′, b, b′) in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshAngles {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

impl Default for ChshAngles {
    /// Optimal for |φ⁻⟩.
    fn default() -> Self {
        Self { a: 0.0, a_prime: 45.0, b: -22.5, b_prime: -67.5 }
    }
}

impl ChshAngles {
    /// (θ_a, θ_b, sign) for the four correlators.
    fn terms(&self) -> [(f64, f64, f64); 4] {
        [
            (self.a, self.b, 1.0),
            (self.a, self.b_prime, -1.0),
            (self.a_prime, self.b, 1.0),
            (self.a_prime, self.b_prime, 1.0),
        ]
    }
}

/// cos 2θ Z + sin 2θ X
fn sigma(theta_deg: f64) -> Operator {
    let t = 2.0 * theta_deg.to_radians();
    let (c, s) = (C64::new(t.cos(), 0.0), C64::new(t.sin(), 0.0));
    Operator::from_rows(&[&[c, s], &[s, -c]])
}

pub fn chsh_value(rho: &DensityOperator, angles: &ChshAngles) -> Result<f64> {
    require_two_qubits(rho.dim())?;
    angles.terms().iter().try_fold(0.0, |acc, &(ta, tb, sign)| {
        Ok(acc + sign * rho.expectation(&sigma(ta).tensor(&sigma(tb)))?)
    })
}

/// The 16 settings {a, a⊥} × {b, b⊥} for each correlator pair.
pub fn chsh_settings(angles: &ChshAngles) -> Vec<MeasSetting> {
    angles
        .terms()
        .iter()
        .flat_map(|&(ta, tb, _)| {
            let (a, b) = (Analyzer::linear(ta), Analyzer::linear(tb));
            [
                MeasSetting::new(a, b),
                MeasSetting::new(a.orthogonal(), b.orthogonal()),
                MeasSetting::new(a, b.orthogonal()),
                MeasSetting::new(a.orthogonal(), b),
            ]
        })
        .collect()
}

/// Records for the CHSH settings, looked up in any order.
pub fn chsh_records<'a>(records: &'a [CountRecord], angles: &ChshAngles) -> Result<Vec<&'a CountRecord>> {
    chsh_settings(angles)
        .iter()
        .map(|s| {
            records
                .iter()
                .find(|r| r.setting.matches(&s.a, &s.b))
                .ok_or_else(|| Error::IncompleteRecords(format!("missing setting {}", s.label)))
        })
        .collect()
}

/// S from rates on the 16 CHSH settings, ordered as `chsh_settings`.
pub fn chsh_from_rates(rates: &[f64]) -> Result<f64> {
    if rates.len() != 16 {
        return Err(Error::IncompleteRecords(format!("expected 16 rates, got {}", rates.len())));
    }
    let signs = [1.0, -1.0, 1.0, 1.0];
    rates.chunks(4).zip(signs).try_fold(0.0, |acc, (r, sign)| {
        let total: f64 = r.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroCounts("CHSH correlator".into()));
        }
        Ok(acc + sign * (r[0] + r[1] - r[2] - r[3]) / total)
    })
}

/// S and its Poisson standard deviation.
pub fn chsh_from_counts(records: &[CountRecord], angles: &ChshAngles) -> Result<(f64, f64)> {
    validate_records(records)?;
    let picked = chsh_records(records, angles)?;
    let rates: Vec<f64> = picked.iter().map(|r| r.rate()).collect();
    let s = chsh_from_rates(&rates)?;
    let parity = [1.0, 1.0, -1.0, -1.0];
    let mut var = 0.0;
    for group in picked.chunks(4) {
        let total: f64 = group.iter().map(|r| r.rate()).sum();
        let e: f64 = group.iter().zip(parity).map(|(r, p)| p * r.rate()).sum::<f64>() / total;
        for (r, p) in group.iter().zip(parity) {
            let d = (p - e) / (r.duration_s * total);
            var += d * d * r.count as f64;
        }
    }
    Ok((s, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::random::{random_density, random_separable, random_unitary};
    use crate::qmath::{CMatrix, StateVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn phi_minus() -> DensityOperator {
        StateVector::from_real(&[1.0, 0.0, 0.0, -1.0]).unwrap().to_density()
    }

    fn dephased() -> DensityOperator {
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = C64::new(0.5, 0.0);
        m[(3, 3)] = C64::new(0.5, 0.0);
        DensityOperator::new(m).unwrap()
    }

    fn exact_records(rho: &DensityOperator, settings: &[MeasSetting], n: f64) -> Vec<CountRecord> {
        settings
            .iter()
            .map(|s| CountRecord {
                setting: s.clone(),
                count: (n * rho.expectation(&s.projector()).unwrap()).round() as u64,
                duration_s: 1.0,
            })
            .collect()
    }

    #[test]
    fn correlator_closed_form() {
        // E(θa, θb) = cos 2(θa + θb) for |φ⁻⟩.
        let rho = phi_minus();
        for (ta, tb) in [(0.0, 0.0), (10.0, 35.0), (-40.0, 70.0)] {
            let e = rho.expectation(&sigma(ta).tensor(&sigma(tb))).unwrap();
            assert!((e - (2.0 * (ta + tb) as f64).to_radians().cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn spec_values() {
        let d = ChshAngles::default();
        assert!((chsh_value(&phi_minus(), &d).unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-10);
        assert!((chsh_value(&dephased(), &d).unwrap() - 2f64.sqrt()).abs() < 1e-10);
        assert!(chsh_value(&DensityOperator::maximally_mixed(4), &d).unwrap().abs() < 1e-15);
        assert!(chsh_value(&DensityOperator::maximally_mixed(2), &d).is_err());
    }

    #[test]
    fn counts_of_ideal_state() {
        let angles = ChshAngles::default();
        let recs = exact_records(&phi_minus(), &chsh_settings(&angles), 1e6);
        let (s, sd) = chsh_from_counts(&recs, &angles).unwrap();
        assert!((s - 2.828).abs() < 0.01);
        assert!(sd > 0.0 && sd < 0.01);
    }

    #[test]
    fn uniform_counts_give_zero() {
        let angles = ChshAngles::default();
        let recs: Vec<CountRecord> = chsh_settings(&angles)
            .into_iter()
            .map(|setting| CountRecord { setting, count: 100, duration_s: 1.0 })
            .collect();
        let (s, sd) = chsh_from_counts(&recs, &angles).unwrap();
        assert_eq!(s, 0.0);
        assert!(sd.is_finite() && sd > 0.0);
    }

    #[test]
    fn incomplete_and_empty_sets() {
        let angles = ChshAngles::default();
        let mut recs = exact_records(&phi_minus(), &chsh_settings(&angles), 100.0);
        recs.pop();
        assert!(matches!(chsh_from_counts(&recs, &angles), Err(Error::IncompleteRecords(_))));
        let zeros: Vec<CountRecord> = chsh_settings(&angles)
            .into_iter()
            .map(|setting| CountRecord { setting, count: 0, duration_s: 1.0 })
            .collect();
        assert!(matches!(chsh_from_counts(&zeros, &angles), Err(Error::ZeroCounts(_))));
    }

    #[test]
    fn exact_rates_match_expectation_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let rho = random_density(4, &mut rng);
            let angles = random_angles(&mut rng);
            let rates: Vec<f64> = chsh_settings(&angles)
                .iter()
                .map(|s| rho.expectation(&s.projector()).unwrap())
                .collect();
            let from_rates = chsh_from_rates(&rates).unwrap();
            assert!((from_rates - chsh_value(&rho, &angles).unwrap()).abs() < 1e-9);
        }
    }

    fn random_angles(rng: &mut ChaCha8Rng) -> ChshAngles {
        ChshAngles {
            a: rng.random_range(-90.0..90.0),
            a_prime: rng.random_range(-90.0..90.0),
            b: rng.random_range(-90.0..90.0),
            b_prime: rng.random_range(-90.0..90.0),
        }
    }

    #[test]
    fn classical_bound_for_separable_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for i in 0..1000 {
            let rho = random_separable(1 + i % 5, &mut rng);
            let s = chsh_value(&rho, &random_angles(&mut rng)).unwrap();
            assert!(s.abs() <= 2.0 + 1e-9, "S = {s}");
        }
    }

    #[test]
    fn tsirelson_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let rho = random_density(4, &mut rng);
            let u = random_unitary(4, &mut rng);
            let rho = rho.conjugate(&u).unwrap();
            let s = chsh_value(&rho, &random_angles(&mut rng)).unwrap();
            assert!(s.abs() <= 2.0 * 2f64.sqrt() + 1e-9);
        }
    }
}
