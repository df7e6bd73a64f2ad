use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::qmath::{CMatrix, DensityOperator, Operator, Tensor, C64};

use super::{validate_records, CountRecord, MeasSetting};

fn pauli_basis() -> Vec<CMatrix> {
    let single = [
        Operator::identity(2),
        Operator::pauli_x(),
        Operator::pauli_y(),
        Operator::pauli_z(),
    ];
    single
        .iter()
        .flat_map(|a| single.iter().map(move |b| a.tensor(b).into_matrix()))
        .collect()
}

/// Least-squares inversion of `values[k] = tr(X P_k)` for Hermitian X.
/// X carries whatever scale the values do.
pub fn linear_from_values(settings: &[MeasSetting], values: &[f64]) -> Result<CMatrix> {
    if settings.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: settings.len(), got: values.len() });
    }
    let basis = pauli_basis();
    let projectors: Vec<CMatrix> = settings.iter().map(|s| s.projector().into_matrix()).collect();
    let design = DMatrix::<f64>::from_fn(settings.len(), 16, |k, m| {
        (&projectors[k] * &basis[m]).trace().re / 4.0
    });
    if settings.len() < 16 || design.rank(1e-10) < 16 {
        return Err(Error::SingularDesign);
    }
    let qr = design.qr();
    let rhs = qr.q().transpose() * DVector::from_column_slice(values);
    let x = qr.r().solve_upper_triangular(&rhs).ok_or(Error::SingularDesign)?;
    let mut out = CMatrix::zeros(4, 4);
    for (m, b) in basis.iter().enumerate() {
        out += b * C64::new(x[m] / 4.0, 0.0);
    }
    Ok(out)
}

/// Linear inversion of count rates; Hermitian with unit trace, not
/// necessarily positive.
pub fn tomo_linear(records: &[CountRecord]) -> Result<Operator> {
    validate_records(records)?;
    let settings: Vec<MeasSetting> = records.iter().map(|r| r.setting.clone()).collect();
    let rates: Vec<f64> = records.iter().map(|r| r.rate()).collect();
    let x = linear_from_values(&settings, &rates)?;
    let t = x.trace().re;
    if t <= 0.0 {
        return Err(Error::ZeroCounts("tomography".into()));
    }
    Ok(Operator::new(x / C64::new(t, 0.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleOptions {
    /// Stop when one accepted step improves the log-likelihood by less.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Starting point; defaults to the physical projection of the linear
    /// estimate.
    pub init: Option<DensityOperator>,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { tolerance: 1e-9, max_iterations: 10_000, init: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomographyResult {
    pub rho_hat: DensityOperator,
    /// Σ_k [n_k ln μ_k − μ_k] at the best-fit count rate.
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after every accepted step, starting at the initial point.
    pub history: Vec<f64>,
}

struct Problem {
    projectors: Vec<CMatrix>,
    counts: Vec<f64>,
    durations: Vec<f64>,
    weight: CMatrix,
    total: f64,
}

impl Problem {
    fn new(records: &[CountRecord]) -> Self {
        let projectors: Vec<CMatrix> =
            records.iter().map(|r| r.setting.projector().into_matrix()).collect();
        let durations: Vec<f64> = records.iter().map(|r| r.duration_s).collect();
        let mut weight = CMatrix::zeros(4, 4);
        for (p, d) in projectors.iter().zip(&durations) {
            weight += p * C64::new(*d, 0.0);
        }
        let counts: Vec<f64> = records.iter().map(|r| r.count as f64).collect();
        let total = counts.iter().sum();
        Self { projectors, counts, durations, weight, total }
    }

    /// Σ n_k ln tr(A P_k) − N ln tr(A W): scale-free in A.
    fn objective(&self, a: &CMatrix) -> f64 {
        let mut l = 0.0;
        for (p, &n) in self.projectors.iter().zip(&self.counts) {
            if n > 0.0 {
                let q = (a * p).trace().re;
                if q <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                l += n * q.ln();
            }
        }
        l - self.total * (a * &self.weight).trace().re.ln()
    }

    /// dL = tr(G dA) for Hermitian dA.
    fn gradient_matrix(&self, a: &CMatrix) -> CMatrix {
        let mut g = &self.weight * C64::new(-self.total / (a * &self.weight).trace().re, 0.0);
        for (p, &n) in self.projectors.iter().zip(&self.counts) {
            if n > 0.0 {
                g += p * C64::new(n / (a * p).trace().re, 0.0);
            }
        }
        g
    }

    /// Σ n_k ln d_k + N ln N − N, the gap between `objective` and the profiled likelihood.
    fn likelihood_offset(&self) -> f64 {
        let logs: f64 = self.counts.iter().zip(&self.durations).filter(|(n, _)| **n > 0.0).map(|(n, d)| n * d.ln()).sum();
        logs + self.total * self.total.ln() - self.total
    }

    /// Full Poisson log-likelihood of a unit-trace ρ with the rate profiled out.
    fn poisson_log_likelihood(&self, rho: &CMatrix) -> f64 {
        let probs: Vec<f64> = self.projectors.iter().map(|p| (rho * p).trace().re).collect();
        let exposure: f64 = probs.iter().zip(&self.durations).map(|(p, d)| p * d).sum();
        if exposure <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let rate = self.total / exposure;
        let mut l = 0.0;
        for ((p, d), &n) in probs.iter().zip(&self.durations).zip(&self.counts) {
            let mu = rate * d * p;
            if n > 0.0 {
                if mu <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                l += n * mu.ln();
            }
            l -= mu;
        }
        l
    }
}

/// Poisson log-likelihood of `rho` with the overall count rate fitted.
pub fn log_likelihood(records: &[CountRecord], rho: &DensityOperator) -> Result<f64> {
    validate_records(records)?;
    Ok(Problem::new(records).poisson_log_likelihood(&rho.normalized()?.matrix().clone()))
}

// T is lower triangular: 4 real diagonal entries, then (re, im) per strictly
// lower entry in row-major order.
const LOWER: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

fn t_from_params(x: &[f64]) -> CMatrix {
    let mut t = CMatrix::zeros(4, 4);
    for i in 0..4 {
        t[(i, i)] = C64::new(x[i], 0.0);
    }
    for (k, &(i, j)) in LOWER.iter().enumerate() {
        t[(i, j)] = C64::new(x[4 + 2 * k], x[5 + 2 * k]);
    }
    t
}

fn params_from_t(t: &CMatrix) -> Vec<f64> {
    let mut x = vec![0.0; 16];
    for i in 0..4 {
        x[i] = t[(i, i)].re;
    }
    for (k, &(i, j)) in LOWER.iter().enumerate() {
        x[4 + 2 * k] = t[(i, j)].re;
        x[5 + 2 * k] = t[(i, j)].im;
    }
    x
}

fn a_from_t(t: &CMatrix) -> CMatrix {
    t.adjoint() * t
}

/// Lower-triangular T with T†T = ρ (Cholesky in reversed index order).
fn t_from_density(rho: &CMatrix) -> Result<CMatrix> {
    let n = rho.nrows();
    let flip = CMatrix::from_fn(n, n, |i, j| {
        if i + j == n - 1 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }
    });
    let chol = (&flip * rho * &flip)
        .cholesky()
        .ok_or_else(|| Error::NotPositive(0.0))?;
    let l = chol.l();
    Ok(&flip * l.adjoint() * &flip)
}

/// Maximum-likelihood state under the T†T/tr parametrization, found by BFGS
/// with backtracking. Only steps that increase the likelihood are accepted.
pub fn tomo_mle(records: &[CountRecord], options: &MleOptions) -> Result<TomographyResult> {
    validate_records(records)?;
    let problem = Problem::new(records);
    if problem.total <= 0.0 {
        return Err(Error::ZeroCounts("tomography".into()));
    }
    let projected = match &options.init {
        Some(rho) => rho.normalized()?,
        None => DensityOperator::project_physical(tomo_linear(records)?.matrix())?,
    };
    // Full-rank start keeps every positive-count probability away from zero.
    let eps = 1e-3;
    let start = projected.matrix() * C64::new(1.0 - eps, 0.0)
        + CMatrix::identity(4, 4) * C64::new(eps / 4.0, 0.0);

    let f = |x: &[f64]| -problem.objective(&a_from_t(&t_from_params(x)));
    let grad = |x: &[f64]| -> DVector<f64> {
        let t = t_from_params(x);
        let tg = &t * problem.gradient_matrix(&a_from_t(&t));
        let mut g = DVector::zeros(16);
        for i in 0..4 {
            g[i] = -2.0 * tg[(i, i)].re;
        }
        for (k, &(i, j)) in LOWER.iter().enumerate() {
            g[4 + 2 * k] = -2.0 * tg[(i, j)].re;
            g[5 + 2 * k] = -2.0 * tg[(i, j)].im;
        }
        g
    };

    let mut x = DVector::from_vec(params_from_t(&t_from_density(&start)?));
    let mut fx = f(x.as_slice());
    let mut gx = grad(x.as_slice());
    let mut h = DMatrix::<f64>::identity(16, 16);
    let mut fresh_h = true;
    let to_rho = |x: &DVector<f64>| {
        let a = a_from_t(&t_from_params(x.as_slice()));
        let t = a.trace().re;
        a / C64::new(t, 0.0)
    };
    // objective + offset is the profiled Poisson log-likelihood; tracking the
    // optimized value keeps the history monotone at working precision.
    let offset = problem.likelihood_offset();
    let mut history = vec![offset - fx];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        let mut d = -(&h * &gx);
        if d.dot(&gx) >= 0.0 {
            h = DMatrix::identity(16, 16);
            fresh_h = true;
            d = -gx.clone();
        }
        let step = match line_search(&f, &x, fx, &gx, &d) {
            Some(s) => Some(s),
            None if !fresh_h => {
                h = DMatrix::identity(16, 16);
                fresh_h = true;
                d = -gx.clone();
                line_search(&f, &x, fx, &gx, &d)
            }
            None => None,
        };
        let Some((x_new, f_new)) = step else {
            // No ascent direction left at working precision.
            converged = true;
            break;
        };
        let g_new = grad(x_new.as_slice());
        let s = &x_new - &x;
        let y = &g_new - &gx;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            if fresh_h {
                h *= sy / y.dot(&y);
            }
            let rho_k = 1.0 / sy;
            let i = DMatrix::<f64>::identity(16, 16);
            let left = &i - (&s * y.transpose()) * rho_k;
            let right = &i - (&y * s.transpose()) * rho_k;
            h = &left * &h * &right + (&s * s.transpose()) * rho_k;
            fresh_h = false;
        }
        let improvement = fx - f_new;
        x = x_new;
        fx = f_new;
        gx = g_new;
        history.push(offset - fx);
        if improvement < options.tolerance {
            converged = true;
            break;
        }
    }

    let mut rho_hat = to_rho(&x);
    let mut best = problem.poisson_log_likelihood(&rho_hat);
    let baseline = problem.poisson_log_likelihood(projected.matrix());
    if baseline > best {
        rho_hat = projected.matrix().clone();
        best = baseline;
    }
    Ok(TomographyResult {
        rho_hat: DensityOperator::project_physical(&rho_hat)?,
        log_likelihood: best,
        iterations,
        converged,
        history,
    })
}

fn line_search<F: Fn(&[f64]) -> f64>(
    f: &F,
    x: &DVector<f64>,
    fx: f64,
    g: &DVector<f64>,
    d: &DVector<f64>,
) -> Option<(DVector<f64>, f64)> {
    let slope = g.dot(d);
    let mut alpha = 1.0;
    for _ in 0..80 {
        let trial = x + d * alpha;
        let ft = f(trial.as_slice());
        if ft.is_finite() && ft < fx && ft <= fx + 1e-4 * alpha * slope {
            return Some((trial, ft));
        }
        alpha *= 0.5;
    }
    None
}
