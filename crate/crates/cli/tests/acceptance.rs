//! Acceptance checklist. Runs without the libtest harness so every criterion
//! prints one `[PASS]`/`[FAIL] criterion N: …` line; the process exits
//! non-zero when any criterion fails. Arguments filter by criterion number.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::time::{Duration, Instant};

use dfs_cli::config::Config;
use dfs_cli::experiments::{
    calibrated_setup, chsh_counts, exact_records, execute, tomography_counts,
};
use dfs_cli::{preset, PRESETS};
use dfs_core::analysis::{
    chsh_from_counts, chsh_value, concurrence, delay_scan, entanglement_of_formation, gaussian_fit,
    tomo_mle, transform_limit_fwhm, ChshAngles, DelayScanModel, MleOptions,
};
use dfs_core::channels::{DephasingBasis, DephasingSpec};
use dfs_core::fock::{
    multiphoton_budget, simulate_setup, EmissionCase, PairAmplitudes, SetupConfig,
};
use dfs_core::protocol::{baseline_direct, distribute, prepare_phi_minus, ProtocolInput};
use dfs_core::qmath::random::random_pure;
use dfs_core::qmath::{fidelity_with_pure, trace_distance, DensityOperator, StateVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn phi_minus() -> StateVector {
    prepare_phi_minus()
}

fn dephased() -> DensityOperator {
    baseline_direct(&ProtocolInput::from_pure(&phi_minus(), DephasingSpec::uniform()).unwrap())
        .unwrap()
}

fn werner(p: f64) -> DensityOperator {
    DensityOperator::mixture(&[
        (p, &phi_minus().to_density()),
        (1.0 - p, &DensityOperator::maximally_mixed(4)),
    ])
    .unwrap()
}

fn preset_config(name: &str) -> Config {
    Config::parse(preset(name).unwrap()).unwrap()
}

/// Log-log slope of `y` against `x` by least squares.
fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn criterion_01_ideal_protocol() -> Outcome {
    let t = Instant::now();
    let out =
        distribute(&ProtocolInput::from_pure(&phi_minus(), DephasingSpec::uniform()).unwrap())
            .unwrap();
    let elapsed = t.elapsed();
    let f = fidelity_with_pure(&out.state, &phi_minus()).unwrap();
    let p = out.success_probability;
    let pass =
        (f - 1.0).abs() < 1e-10 && (p - 0.25).abs() < 1e-10 && elapsed < Duration::from_secs(1);
    (
        pass,
        format!("F = {f:.12}, success = {p:.12}, {:.3} s", secs(elapsed)),
    )
}

fn criterion_02_baseline_degradation() -> Outcome {
    let t = Instant::now();
    let rho = dephased();
    let f = fidelity_with_pure(&rho, &phi_minus()).unwrap();
    let e = entanglement_of_formation(&rho).unwrap();
    let exact = (f - 0.5).abs() < 1e-10 && e.abs() < 1e-8;
    // Reference values: F = 0.46 ± 0.03, E = 0.020 ± 0.017 at 8076 counts.
    // The statistic is the seed average; the per-seed tally is informational.
    let (mut sum_f, mut sum_e) = (0.0, 0.0);
    let mut inside = 0;
    for seed in 0..100 {
        let records = tomography_counts(&rho, 8076.0, 5.0, seed).unwrap();
        let r = tomo_mle(&records, &MleOptions::default()).unwrap();
        let fs = fidelity_with_pure(&r.rho_hat, &phi_minus()).unwrap();
        let es = entanglement_of_formation(&r.rho_hat).unwrap();
        sum_f += fs;
        sum_e += es;
        if (fs - 0.46).abs() <= 3.0 * 0.03 && (es - 0.020).abs() <= 3.0 * 0.017 {
            inside += 1;
        }
    }
    let (mean_f, mean_e) = (sum_f / 100.0, sum_e / 100.0);
    let elapsed = t.elapsed();
    let pass = exact
        && (mean_f - 0.46).abs() <= 3.0 * 0.03
        && (mean_e - 0.020).abs() <= 3.0 * 0.017
        && elapsed < Duration::from_secs(60);
    (pass, format!(
            "F = {f:.12}, E = {e:.2e}; 100-seed mean F = {mean_f:.4}, E = {mean_e:.4} against 0.46 ± 0.03, 0.020 ± 0.017 ({inside}/100 single seeds inside 3 s.d.), {:.1} s",
            secs(elapsed)
        ),
    )
}

fn criterion_03_chsh_values() -> Outcome {
    let angles = ChshAngles::default();
    let ideal = chsh_value(&phi_minus().to_density(), &angles).unwrap();
    let flat = chsh_value(&dephased(), &angles).unwrap();
    let exact = (ideal - 2.0 * SQRT_2).abs() < 1e-9 && (flat - SQRT_2).abs() < 1e-9;
    let cfg = preset_config("chsh");
    let rho = phi_minus().to_density();
    let mut inside = 0;
    let mut above = 0;
    for seed in 0..100 {
        let (s, _) = chsh_from_counts(
            &chsh_counts(&cfg, &rho, 7404.0, 5.0, seed).unwrap(),
            &angles,
        )
        .unwrap();
        if (2.70..=2.83).contains(&s) {
            inside += 1;
        } else if s > 2.83 {
            above += 1;
        }
    }
    let pass = exact && inside >= 95;
    (pass, format!("S(ideal) = {ideal:.10}, S(dephased) = {flat:.10}; finite counts in [2.70, 2.83] for {inside}/100 seeds ({above} above 2.83)"),
    )
}

fn criterion_04_distributed_state() -> Outcome {
    let t = Instant::now();
    let cfg = preset_config("state-table");
    let (setup, r) = calibrated_setup(&cfg).unwrap();
    let mu = setup.source.mode_overlap;
    let f = fidelity_with_pure(&r.rho_ay, &phi_minus()).unwrap();
    let e = entanglement_of_formation(&r.rho_ay).unwrap();
    let records = chsh_counts(&cfg, &r.rho_ay, 1025.0, 800.0, cfg.seed).unwrap();
    let (s, sd) = chsh_from_counts(&records, &cfg.chsh_angles()).unwrap();
    let elapsed = t.elapsed();
    // Reference CHSH 2.36 ± 0.09.
    let pass = (0.85..=1.0).contains(&mu)
        && (0.80..=0.94).contains(&f)
        && (0.49..=0.71).contains(&e)
        && (s - 2.36).abs() <= 3.0 * 0.09
        && elapsed < Duration::from_secs(600);
    (
        pass,
        format!(
            "mu = {mu:.4}, F = {f:.4}, E = {e:.4}, S = {s:.3} ± {sd:.3} from 1025 counts, {:.2} s",
            secs(elapsed)
        ),
    )
}

fn criterion_05_multiphoton_scaling() -> Outcome {
    let gammas = [5e-4, 1e-3, 2e-3];
    let nus = [0.05, 0.1, 0.2];
    let mut ii_vs_nu = Vec::new();
    let mut iii_vs_gamma = Vec::new();
    let mut iii_vs_nu = Vec::new();
    let mut worst_eta = 0.0f64;
    let mut worst_case = EmissionCase::SpdcWcp;
    for &g in &gammas {
        for &nu in &nus {
            let full = multiphoton_budget(g, nu, 1.0).unwrap();
            let half = multiphoton_budget(g, nu, 0.5).unwrap();
            let pi = full[&EmissionCase::SpdcWcp];
            ii_vs_nu.push((g, nu, full[&EmissionCase::WcpWcp] / pi));
            iii_vs_gamma.push((g, nu, full[&EmissionCase::SpdcSpdc] / pi));
            iii_vs_nu.push((g, nu, full[&EmissionCase::SpdcSpdc] / pi));
            // Every case should shrink by η² = 1/4.
            for case in [
                EmissionCase::SpdcWcp,
                EmissionCase::WcpWcp,
                EmissionCase::SpdcSpdc,
            ] {
                let dev = (half[&case] / full[&case] / 0.25 - 1.0).abs();
                if dev > worst_eta {
                    worst_eta = dev;
                    worst_case = case;
                }
            }
        }
    }
    let slopes = |pts: &[(f64, f64, f64)], by_gamma: bool| -> Vec<f64> {
        let fixed: Vec<f64> = if by_gamma {
            nus.to_vec()
        } else {
            gammas.to_vec()
        };
        fixed
            .iter()
            .map(|&k| {
                let line: Vec<(f64, f64)> = pts
                    .iter()
                    .filter(|(g, nu, _)| if by_gamma { *nu == k } else { *g == k })
                    .map(|(g, nu, r)| (if by_gamma { *g } else { *nu }, *r))
                    .collect();
                slope(&line)
            })
            .collect()
    };
    let s_ii_nu = slopes(&ii_vs_nu, false);
    let s_iii_g = slopes(&iii_vs_gamma, true);
    let s_iii_nu = slopes(&iii_vs_nu, false);
    let err = |s: &[f64], want: f64| {
        s.iter()
            .map(|x| (x - want).abs() / want.abs())
            .fold(0.0, f64::max)
    };
    let slope_err = err(&s_ii_nu, 1.0)
        .max(err(&s_iii_g, 1.0))
        .max(err(&s_iii_nu, -1.0));
    let pass = slope_err < 0.10 && worst_eta < 1e-6;
    (pass, format!(
            "max slope error {slope_err:.2e} (ii/i vs nu {:.4}, iii/i vs gamma {:.4}, iii/i vs nu {:.4}); eta^2 invariance worst {worst_eta:.3e} in case {}",
            s_ii_nu[0],
            s_iii_g[0],
            s_iii_nu[0],
            worst_case.label()
        ),
    )
}

fn criterion_06_tomography_self_consistency() -> Outcome {
    let states = [
        ("phi-", phi_minus().to_density()),
        ("dephased", dephased()),
        ("werner(0.7)", werner(0.7)),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, rho) in &states {
        let t = Instant::now();
        let r = tomo_mle(&exact_records(rho, 1e6).unwrap(), &MleOptions::default()).unwrap();
        let elapsed = t.elapsed();
        let d = trace_distance(&r.rho_hat, rho).unwrap();
        let psd = r.rho_hat.min_eigenvalue() >= -1e-12;
        let unit = (r.rho_hat.trace() - 1.0).abs() < 1e-12;
        let monotone = r.history.windows(2).all(|w| w[1] >= w[0]);
        pass &= d < 0.01 && psd && unit && monotone && elapsed < Duration::from_secs(30);
        parts.push(format!(
            "{name}: D = {d:.1e}, psd {psd}, tr1 {unit}, monotone {monotone}, {} it, {:.2} s",
            r.iterations,
            secs(elapsed)
        ));
    }
    (pass, parts.join("; "))
}

fn criterion_07_entanglement_metrics() -> Outcome {
    let mut worst = 0.0f64;
    for k in 0..=4 {
        let p = 0.25 * k as f64;
        let c = concurrence(&werner(p)).unwrap();
        worst = worst.max((c - (0.0f64).max((3.0 * p - 1.0) / 2.0)).abs());
    }
    let e_bell = entanglement_of_formation(&phi_minus().to_density()).unwrap();
    let product = StateVector::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0, 0.0])
        .unwrap()
        .to_density();
    let e_sep = entanglement_of_formation(&dephased())
        .unwrap()
        .max(entanglement_of_formation(&product).unwrap());
    let pass = worst < 1e-10 && e_bell == 1.0 && e_sep == 0.0;
    (pass, format!("Werner concurrence max error {worst:.1e}; EoF(phi-) = {e_bell}, EoF(separable) = {e_sep}"))
}

fn criterion_08_delay_scan() -> Outcome {
    let model = DelayScanModel {
        background: 175.0,
        visibility: 0.85,
        coherence_fwhm: 130.0,
        wavelength: 0.79,
    };
    let cfg = preset_config("scan-delay");
    let x = dfs_cli::experiments::delays(&cfg);
    let clean = delay_scan(&model, &x).unwrap();
    let fit = gaussian_fit(&x, &clean.dd, &clean.ddbar).unwrap();
    let rel_v = (fit.visibility / 0.85 - 1.0).abs();
    let rel_l = (fit.coherence_fwhm / 130.0 - 1.0).abs();
    let mut within = 0;
    for seed in 0..100 {
        let mut c = cfg.clone();
        c.seed = seed;
        let r = execute(&c).unwrap();
        let l = r.results["fit"]["coherence_fwhm_um"]["value"]
            .as_f64()
            .unwrap();
        if (l / 130.0 - 1.0).abs() <= 0.15 {
            within += 1;
        }
    }
    let limit = transform_limit_fwhm(0.79, 2.7e-3);
    let ratio = model.coherence_in_wavelengths();
    let pass = rel_v < 1e-6
        && rel_l < 1e-6
        && within >= 90
        && (limit - 102.0).abs() < 1.0
        && (ratio / 160.0 - 1.0).abs() < 0.05;
    (pass, format!(
            "noiseless rel. errors V0 {rel_v:.1e}, l_c {rel_l:.1e}; noisy l_c within 15% for {within}/100 seeds; transform limit {limit:.1} um next to 130 um; l_c/lambda = {ratio:.1}"
        ),
    )
}

fn criterion_09_cross_layer_equivalence() -> Outcome {
    let specs = [
        DephasingSpec::uniform(),
        DephasingSpec::gaussian(0.3, 0.9).with_delta_sigma(0.4),
        DephasingSpec::uniform().with_basis(DephasingBasis::circular()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for draw in 0..20 {
        let psi = random_pure(4, &mut rng);
        let spec = specs[draw % specs.len()];
        let qubit = distribute(&ProtocolInput::from_pure(&psi, spec).unwrap()).unwrap();
        let mut cfg = SetupConfig {
            channel: spec,
            emissions: Some(vec![(1, 1)]),
            ..SetupConfig::default()
        };
        cfg.source.pair = PairAmplitudes::from_state(&psi).unwrap();
        let optics = simulate_setup(&cfg).unwrap();
        worst = worst.max(trace_distance(&qubit.state, &optics.rho_ay).unwrap());
    }
    (
        worst < 1e-8,
        format!("max trace distance over 20 random inputs {worst:.2e}"),
    )
}

fn criterion_10_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut identical = 0;
    for (name, _) in PRESETS {
        let texts: Vec<Vec<u8>> = ["a", "b"]
            .iter()
            .map(|sub| {
                let out = dir.path().join(name).join(sub);
                let inv = dfs_cli::Invocation {
                    config: name.to_string(),
                    out: Some(out.clone()),
                    ..Default::default()
                };
                let (cfg, _, _) = dfs_cli::run(&inv).unwrap();
                std::fs::read(out.join(format!("result.{}.txt", cfg.run))).unwrap()
            })
            .collect();
        if texts[0] == texts[1] {
            identical += 1;
        }
    }
    (
        identical == PRESETS.len(),
        format!(
            "{identical}/{} presets byte-identical on repeat",
            PRESETS.len()
        ),
    )
}

fn main() {
    let criteria: [fn() -> Outcome; 10] = [
        criterion_01_ideal_protocol,
        criterion_02_baseline_degradation,
        criterion_03_chsh_values,
        criterion_04_distributed_state,
        criterion_05_multiphoton_scaling,
        criterion_06_tomography_self_consistency,
        criterion_07_entanglement_metrics,
        criterion_08_delay_scan,
        criterion_09_cross_layer_equivalence,
        criterion_10_determinism,
    ];
    let wanted: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = Vec::new();
    for (i, check) in criteria.iter().enumerate() {
        let n = i + 1;
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let (pass, detail) = std::panic::catch_unwind(check)
            .unwrap_or_else(|e| (false, format!("panicked: {}", panic_text(&e))));
        println!(
            "[{}] criterion {n}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

fn panic_text(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| e.downcast_ref::<String>().cloned())
        .unwrap_or_default()
}
