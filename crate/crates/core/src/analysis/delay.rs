use std::f64::consts::{LN_2, PI};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Complementary-basis coincidence counts versus path delay. Lengths share
/// one unit (µm throughout the presets).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayScanModel {
    /// Summed counts C_DD + C_DD̄ per point.
    pub background: f64,
    pub visibility: f64,
    /// Envelope FWHM.
    pub coherence_fwhm: f64,
    pub wavelength: f64,
}

impl DelayScanModel {
    pub fn coherence_in_wavelengths(&self) -> f64 {
        self.coherence_fwhm / self.wavelength
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayCurves {
    pub dd: Vec<f64>,
    pub ddbar: Vec<f64>,
}

/// Gaussian envelope with unit peak and the given FWHM.
pub fn delay_envelope(delay: f64, fwhm: f64) -> f64 {
    (-4.0 * LN_2 * delay * delay / (fwhm * fwhm)).exp()
}

pub fn delay_scan(model: &DelayScanModel, delays: &[f64]) -> Result<DelayCurves> {
    if !(model.coherence_fwhm > 0.0) {
        return Err(Error::InvalidParameter("coherence length must be positive".into()));
    }
    let (dd, ddbar) = delays
        .iter()
        .map(|&d| {
            let vg = model.visibility * delay_envelope(d, model.coherence_fwhm);
            (model.background * (1.0 + vg) / 2.0, model.background * (1.0 - vg) / 2.0)
        })
        .unzip();
    Ok(DelayCurves { dd, ddbar })
}

/// Coherence length of a Gaussian spectrum with FWHM `bandwidth`.
pub fn transform_limit_fwhm(wavelength: f64, bandwidth: f64) -> f64 {
    2.0 * LN_2 / PI * wavelength * wavelength / bandwidth
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayFit {
    pub visibility: f64,
    pub coherence_fwhm: f64,
    pub background: f64,
    /// Observed minus fitted, per point.
    pub residuals_dd: Vec<f64>,
    pub residuals_ddbar: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

struct Data<'a> {
    delays: &'a [f64],
    dd: &'a [f64],
    ddbar: &'a [f64],
}

impl Data<'_> {
    // Poisson weights; zero counts keep unit variance.
    fn weight(y: f64) -> f64 {
        1.0 / y.max(1.0)
    }

    fn cost(&self, p: &Vector3<f64>) -> f64 {
        let (v, l, b) = (p[0], p[1], p[2]);
        self.delays
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let vg = v * delay_envelope(d, l);
                let m0 = b * (1.0 + vg) / 2.0;
                let m1 = b * (1.0 - vg) / 2.0;
                Self::weight(self.dd[i]) * (self.dd[i] - m0).powi(2)
                    + Self::weight(self.ddbar[i]) * (self.ddbar[i] - m1).powi(2)
            })
            .sum()
    }

    /// (JᵀWJ, JᵀWr) at `p`.
    fn normal_equations(&self, p: &Vector3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
        let (v, l, b) = (p[0], p[1], p[2]);
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (i, &d) in self.delays.iter().enumerate() {
            let g = delay_envelope(d, l);
            let dg_dl = g * 8.0 * LN_2 * d * d / (l * l * l);
            for (y, sign) in [(self.dd[i], 1.0), (self.ddbar[i], -1.0)] {
                let model = b * (1.0 + sign * v * g) / 2.0;
                let j = Vector3::new(sign * b * g / 2.0, sign * b * v * dg_dl / 2.0, (1.0 + sign * v * g) / 2.0);
                let w = Self::weight(y);
                jtj += j * j.transpose() * w;
                jtr += j * (w * (y - model));
            }
        }
        (jtj, jtr)
    }

    fn initial_guess(&self) -> Vector3<f64> {
        let n = self.delays.len() as f64;
        let b = self.dd.iter().zip(self.ddbar).map(|(a, c)| a + c).sum::<f64>() / n;
        let (lo, hi) = self.delays.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        let span = (hi - lo).max(f64::MIN_POSITIVE);
        let mut best = (f64::MAX, Vector3::new(0.0, span / 4.0, b));
        for k in 0..400 {
            let l = span * 0.01 * (200.0f64).powf(k as f64 / 399.0);
            let (mut num, mut den) = (0.0, 0.0);
            for (i, &d) in self.delays.iter().enumerate() {
                let g = delay_envelope(d, l);
                num += (self.dd[i] - self.ddbar[i]) * g;
                den += b * g * g;
            }
            let v = if den > 0.0 { (num / den).clamp(-1.0, 1.0) } else { 0.0 };
            let p = Vector3::new(v, l, b);
            let c = self.cost(&p);
            if c < best.0 {
                best = (c, p);
            }
        }
        best.1
    }
}

/// Weighted least squares of the delay-scan model by Levenberg-Marquardt.
pub fn gaussian_fit(delays: &[f64], counts_dd: &[f64], counts_ddbar: &[f64]) -> Result<DelayFit> {
    if delays.len() != counts_dd.len() || delays.len() != counts_ddbar.len() {
        return Err(Error::DimensionMismatch { expected: delays.len(), got: counts_dd.len().min(counts_ddbar.len()) });
    }
    if delays.len() < 5 {
        return Err(Error::InvalidParameter("delay scan needs at least 5 points".into()));
    }
    let data = Data { delays, dd: counts_dd, ddbar: counts_ddbar };
    let mut p = data.initial_guess();
    let mut cost = data.cost(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < 1000 {
        iterations += 1;
        let (jtj, jtr) = data.normal_equations(&p);
        let mut damped = jtj;
        for i in 0..3 {
            damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
        }
        let Some(step) = damped.lu().solve(&jtr) else {
            lambda *= 10.0;
            continue;
        };
        let trial = p + step;
        let trial_cost = if trial[1] > 0.0 { data.cost(&trial) } else { f64::INFINITY };
        if trial_cost <= cost {
            let rel = (0..3).map(|i| (step[i] / p[i].abs().max(1e-12)).abs()).fold(0.0, f64::max);
            p = trial;
            let gain = cost - trial_cost;
            cost = trial_cost;
            lambda = (lambda / 10.0).max(1e-15);
            if rel < 1e-13 || gain <= 1e-15 * cost.max(1e-300) && rel < 1e-9 {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e16 {
                // Already at the minimum to working precision.
                converged = true;
                break;
            }
        }
    }
    if !p.iter().all(|v| v.is_finite()) {
        return Err(Error::NoConvergence("delay-scan fit diverged".into()));
    }
    let model = DelayScanModel { background: p[2], visibility: p[0], coherence_fwhm: p[1], wavelength: 1.0 };
    let fitted = delay_scan(&model, delays)?;
    Ok(DelayFit {
        visibility: p[0],
        coherence_fwhm: p[1],
        background: p[2],
        residuals_dd: counts_dd.iter().zip(&fitted.dd).map(|(y, m)| y - m).collect(),
        residuals_ddbar: counts_ddbar.iter().zip(&fitted.ddbar).map(|(y, m)| y - m).collect(),
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::counts::poisson;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn delays() -> Vec<f64> {
        (0..21).map(|i| -300.0 + 30.0 * i as f64).collect()
    }

    fn model() -> DelayScanModel {
        DelayScanModel { background: 175.0, visibility: 0.85, coherence_fwhm: 130.0, wavelength: 0.79 }
    }

    #[test]
    fn curve_properties() {
        let m = model();
        let c = delay_scan(&m, &[0.0, 1e5]).unwrap();
        assert!(((c.dd[0] - c.ddbar[0]) / (c.dd[0] + c.ddbar[0]) - 0.85).abs() < 1e-15);
        assert!((c.dd[1] - m.background / 2.0).abs() < 1e-12);
        assert!((c.ddbar[1] - m.background / 2.0).abs() < 1e-12);
        assert_eq!(delay_envelope(65.0, 130.0), 0.5);
        let c = delay_scan(&m, &delays()).unwrap();
        for (a, b) in c.dd.iter().zip(&c.ddbar) {
            assert!((a + b - m.background).abs() < 1e-12);
        }
        let bad = DelayScanModel { coherence_fwhm: 0.0, ..m };
        assert!(delay_scan(&bad, &[0.0]).is_err());
    }

    #[test]
    fn noiseless_round_trip() {
        let c = delay_scan(&model(), &delays()).unwrap();
        let fit = gaussian_fit(&delays(), &c.dd, &c.ddbar).unwrap();
        assert!(fit.converged);
        assert!((fit.visibility / 0.85 - 1.0).abs() < 1e-6);
        assert!((fit.coherence_fwhm / 130.0 - 1.0).abs() < 1e-6);
        assert!((fit.background / 175.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn noisy_fits_recover_coherence_length() {
        let c = delay_scan(&model(), &delays()).unwrap();
        let mut good = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dd: Vec<f64> = c.dd.iter().map(|&m| poisson(m, &mut rng) as f64).collect();
            let db: Vec<f64> = c.ddbar.iter().map(|&m| poisson(m, &mut rng) as f64).collect();
            let fit = gaussian_fit(&delays(), &dd, &db).unwrap();
            if (fit.coherence_fwhm / 130.0 - 1.0).abs() <= 0.15 {
                good += 1;
            }
        }
        assert!(good >= 90, "{good}/100");
    }

    #[test]
    fn transform_limit() {
        let l = transform_limit_fwhm(0.79, 0.0027);
        assert!((l - 102.0).abs() < 0.5, "{l}");
        assert!((model().coherence_in_wavelengths() - 164.6).abs() < 0.1);
    }

    #[test]
    fn too_few_points() {
        assert!(gaussian_fit(&[0.0; 4], &[1.0; 4], &[1.0; 4]).is_err());
        assert!(gaussian_fit(&[0.0; 5], &[1.0; 4], &[1.0; 5]).is_err());
    }
}
