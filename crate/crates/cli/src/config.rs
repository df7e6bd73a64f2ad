//! Experiment configuration: a TOML tree read section by section so that
//! every violation is reported at once.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use dfs_core::analysis::ChshAngles;
use dfs_core::channels::{DephasingBasis, DephasingSpec};
use dfs_core::fock::{DetectorSpec, PairAmplitudes, SetupConfig, SourceSpec};
use dfs_core::qmath::{StateVector, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    RunProtocol,
    Baseline,
    Tomography,
    Chsh,
    ScanDelay,
    MultiphotonBudget,
    StateTable,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::RunProtocol,
        Experiment::Baseline,
        Experiment::Tomography,
        Experiment::Chsh,
        Experiment::ScanDelay,
        Experiment::MultiphotonBudget,
        Experiment::StateTable,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::RunProtocol => "run-protocol",
            Experiment::Baseline => "baseline",
            Experiment::Tomography => "tomography",
            Experiment::Chsh => "chsh",
            Experiment::ScanDelay => "scan-delay",
            Experiment::MultiphotonBudget => "multiphoton-budget",
            Experiment::StateTable => "state-table",
        }
    }
}

impl FromStr for Experiment {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or(())
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Two-photon state fed to the statistics experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateChoice {
    /// The source pair as emitted.
    Source,
    /// Source pair with S sent straight through the channel.
    Baseline,
    /// Qubit-layer protocol output.
    Distributed,
    /// Full optical model of the apparatus.
    Setup,
    Werner,
}

impl StateChoice {
    const NAMES: [(&'static str, StateChoice); 5] = [
        ("source", StateChoice::Source),
        ("baseline", StateChoice::Baseline),
        ("distributed", StateChoice::Distributed),
        ("setup", StateChoice::Setup),
        ("werner", StateChoice::Werner),
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceSection {
    pub gamma: f64,
    pub nu: f64,
    pub spdc_order: usize,
    pub wcp_order: usize,
    pub mode_overlap: f64,
    /// Target fidelity for tuning the mode overlap; `None` keeps it fixed.
    pub calibrate_fidelity: Option<f64>,
    /// Interval searched by the calibration.
    pub calibrate_range: [f64; 2],
    /// Pair amplitudes over HH, HV, VH, VV as (re, im).
    pub pair: [(f64, f64); 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelSection {
    pub eta: f64,
    pub distribution: String,
    pub mean_phase: f64,
    pub sigma: f64,
    pub delta_sigma: f64,
    pub basis: String,
    pub group_delay: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorSection {
    pub efficiency: f64,
    pub dark_count_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpticsSection {
    pub n_max: usize,
    pub keep_dbar: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisSection {
    pub state: StateChoice,
    pub werner_p: f64,
    pub total_counts: f64,
    pub duration_s: f64,
    /// (a, a′, b, b′) in degrees.
    pub chsh_angles: [f64; 4],
    pub mle_tolerance: f64,
    pub mle_max_iterations: usize,
    pub bootstrap_resamples: usize,
    /// Count totals for the source, baseline and distributed rows.
    pub table_totals: [f64; 3],
    pub table_durations: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSection {
    pub points: usize,
    pub delay_min_um: f64,
    pub delay_max_um: f64,
    pub visibility: f64,
    pub coherence_fwhm_um: f64,
    /// Mean total count per delay point over both curves.
    pub background: f64,
    pub wavelength_um: f64,
    pub bandwidth_nm: f64,
    pub noise: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetSection {
    pub gammas: Vec<f64>,
    pub nus: Vec<f64>,
    pub etas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSection {
    pub dir: String,
}

/// Fully resolved configuration; every field has a value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub experiment: Experiment,
    pub run: String,
    pub seed: u64,
    pub source: SourceSection,
    pub channel: ChannelSection,
    pub detector: DetectorSection,
    pub optics: OpticsSection,
    pub analysis: AnalysisSection,
    pub scan: ScanSection,
    pub budget: BudgetSection,
    #[serde(skip)]
    pub output: OutputSection,
}

/// Every problem found in a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics(pub Vec<String>);

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostics {}

const SECTIONS: [&str; 8] = ["source", "channel", "detector", "optics", "analysis", "scan", "budget", "output"];
const TOP_KEYS: [&str; 3] = ["experiment", "run", "seed"];

/// Reads one table, remembering which keys were consumed.
struct Section<'a> {
    name: &'a str,
    table: Option<&'a Table>,
    used: BTreeSet<&'static str>,
    diags: &'a mut Vec<String>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'a str, diags: &'a mut Vec<String>) -> Self {
        let table = match root.get(name) {
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                diags.push(format!("[{name}] must be a table"));
                None
            }
            None => None,
        };
        Self { name, table, used: BTreeSet::new(), diags }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.insert(key);
        self.table.and_then(|t| t.get(key))
    }

    fn type_error(&mut self, key: &str, want: &str) {
        self.diags.push(format!("{key} in [{}] must be {want}", self.name));
    }

    fn number(&mut self, key: &'static str) -> Option<f64> {
        match self.raw(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.type_error(key, "a number");
                None
            }
        }
    }

    /// Number with a range check; `range` is shown in the diagnostic.
    fn f64_in(&mut self, key: &'static str, default: f64, range: &str, ok: impl Fn(f64) -> bool) -> f64 {
        match self.number(key) {
            Some(x) if ok(x) => x,
            Some(x) => {
                self.diags.push(format!("{key} out of range {range}: got {x} in [{}]", self.name));
                default
            }
            None => default,
        }
    }

    fn usize_in(&mut self, key: &'static str, default: usize, range: &str, ok: impl Fn(usize) -> bool) -> usize {
        match self.raw(key) {
            None => default,
            Some(Value::Integer(i)) if *i >= 0 && ok(*i as usize) => *i as usize,
            Some(Value::Integer(i)) => {
                self.diags.push(format!("{key} out of range {range}: got {i} in [{}]", self.name));
                default
            }
            Some(_) => {
                self.type_error(key, "an integer");
                default
            }
        }
    }

    fn bool(&mut self, key: &'static str, default: bool) -> bool {
        match self.raw(key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(_) => {
                self.type_error(key, "a boolean");
                default
            }
        }
    }

    fn choice(&mut self, key: &'static str, default: &str, allowed: &[&str]) -> String {
        match self.raw(key) {
            None => default.to_string(),
            Some(Value::String(s)) if allowed.contains(&s.as_str()) => s.clone(),
            Some(_) => {
                self.type_error(key, &format!("one of {}", allowed.join(", ")));
                default.to_string()
            }
        }
    }

    fn string(&mut self, key: &'static str, default: &str) -> String {
        match self.raw(key) {
            None => default.to_string(),
            Some(Value::String(s)) => s.clone(),
            Some(_) => {
                self.type_error(key, "a string");
                default.to_string()
            }
        }
    }

    fn numbers(&mut self, key: &'static str) -> Option<Vec<f64>> {
        let v = self.raw(key)?;
        let parsed = v.as_array().and_then(|a| {
            a.iter()
                .map(|x| x.as_float().or_else(|| x.as_integer().map(|i| i as f64)))
                .collect::<Option<Vec<f64>>>()
        });
        if parsed.is_none() {
            self.type_error(key, "an array of numbers");
        }
        parsed
    }

    fn fixed<const N: usize>(&mut self, key: &'static str, default: [f64; N], ok: impl Fn(f64) -> bool, range: &str) -> [f64; N] {
        let Some(v) = self.numbers(key) else { return default };
        if v.len() != N {
            self.diags.push(format!("{key} in [{}] must have {N} entries, got {}", self.name, v.len()));
            return default;
        }
        if let Some(bad) = v.iter().find(|x| !ok(**x)) {
            self.diags.push(format!("{key} out of range {range}: got {bad} in [{}]", self.name));
            return default;
        }
        let mut out = default;
        out.copy_from_slice(&v);
        out
    }

    fn list(&mut self, key: &'static str, default: &[f64], ok: impl Fn(f64) -> bool, range: &str) -> Vec<f64> {
        let Some(v) = self.numbers(key) else { return default.to_vec() };
        if v.is_empty() {
            self.diags.push(format!("{key} in [{}] must not be empty", self.name));
            return default.to_vec();
        }
        if let Some(bad) = v.iter().find(|x| !ok(**x)) {
            self.diags.push(format!("{key} out of range {range}: got {bad} in [{}]", self.name));
            return default.to_vec();
        }
        v
    }

    fn finish(self) {
        let Some(t) = self.table else { return };
        for key in t.keys() {
            if !self.used.contains(key.as_str()) {
                self.diags.push(format!("unknown key {key} in [{}]", self.name));
            }
        }
    }
}

fn finite(x: f64) -> bool {
    x.is_finite()
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

fn unit_closed(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

fn unit_open(x: f64) -> bool {
    (0.0..1.0).contains(&x)
}

fn phi_minus_pair() -> [(f64, f64); 4] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [(s, 0.0), (0.0, 0.0), (0.0, 0.0), (-s, 0.0)]
}

fn read_pair(sec: &mut Section<'_>) -> [(f64, f64); 4] {
    let Some(v) = sec.raw("pair") else { return phi_minus_pair() };
    let entry = |x: &Value| -> Option<(f64, f64)> {
        let num = |y: &Value| y.as_float().or_else(|| y.as_integer().map(|i| i as f64));
        match x {
            Value::Array(p) if p.len() == 2 => Some((num(&p[0])?, num(&p[1])?)),
            other => Some((num(other)?, 0.0)),
        }
    };
    let parsed = v
        .as_array()
        .filter(|a| a.len() == 4)
        .and_then(|a| a.iter().map(entry).collect::<Option<Vec<_>>>());
    let Some(p) = parsed else {
        sec.type_error("pair", "4 amplitudes (numbers or [re, im] pairs)");
        return phi_minus_pair();
    };
    let norm: f64 = p.iter().map(|(r, i)| r * r + i * i).sum();
    if !(norm > 0.0 && norm.is_finite()) {
        sec.diags.push("pair in [source] must have nonzero norm".into());
        return phi_minus_pair();
    }
    let s = norm.sqrt();
    [0, 1, 2, 3].map(|k| (p[k].0 / s, p[k].1 / s))
}

impl Config {
    /// Parses TOML text; see [`Config::from_table`].
    pub fn parse(text: &str) -> Result<Config, Diagnostics> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| Diagnostics(vec![format!("parse error: {}", e.message())]))?;
        Config::from_table(&table)
    }

    /// Schema and range validation; collects every violation.
    pub fn from_table(root: &Table) -> Result<Config, Diagnostics> {
        let mut diags = Vec::new();
        for key in root.keys() {
            if !SECTIONS.contains(&key.as_str()) && !TOP_KEYS.contains(&key.as_str()) {
                diags.push(format!("unknown key {key}"));
            }
        }
        let experiment = match root.get("experiment") {
            None => {
                diags.push("missing required field experiment".into());
                Experiment::StateTable
            }
            Some(Value::String(s)) => s.parse().unwrap_or_else(|_| {
                let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                diags.push(format!("experiment must be one of {}: got {s}", names.join(", ")));
                Experiment::StateTable
            }),
            Some(_) => {
                diags.push("experiment must be a string".into());
                Experiment::StateTable
            }
        };
        let seed = match root.get("seed") {
            None => {
                diags.push("missing required field seed".into());
                0
            }
            Some(Value::Integer(i)) if *i >= 0 => *i as u64,
            Some(_) => {
                diags.push("seed must be a non-negative integer".into());
                0
            }
        };
        let run = match root.get("run") {
            None => experiment.name().to_string(),
            Some(Value::String(s)) if !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "-_".contains(c)) => s.clone(),
            Some(_) => {
                diags.push("run must be a non-empty name of letters, digits, '-' or '_'".into());
                experiment.name().to_string()
            }
        };

        let src_default = SourceSpec::default();
        let mut sec = Section::new(root, "source", &mut diags);
        let source = SourceSection {
            gamma: sec.f64_in("gamma", src_default.gamma, "[0,1)", unit_open),
            nu: sec.f64_in("nu", src_default.nu, "[0,1)", unit_open),
            spdc_order: sec.usize_in("spdc_order", src_default.spdc_order, "[1,2]", |n| (1..=2).contains(&n)),
            wcp_order: sec.usize_in("wcp_order", src_default.wcp_order, "[1,4]", |n| (1..=4).contains(&n)),
            mode_overlap: sec.f64_in("mode_overlap", 1.0, "[0,1]", unit_closed),
            calibrate_fidelity: sec.number("calibrate_fidelity").and_then(|f| {
                if (0.25..=1.0).contains(&f) {
                    Some(f)
                } else {
                    sec.diags.push(format!("calibrate_fidelity out of range [0.25,1]: got {f} in [source]"));
                    None
                }
            }),
            calibrate_range: sec.fixed("calibrate_range", [0.85, 1.0], unit_closed, "[0,1]"),
            pair: read_pair(&mut sec),
        };
        sec.finish();
        if source.calibrate_range[0] > source.calibrate_range[1] {
            diags.push("calibrate_range in [source] must be increasing".into());
        }

        let mut sec = Section::new(root, "channel", &mut diags);
        let channel = ChannelSection {
            eta: sec.f64_in("eta", 1.0, "[0,1]", unit_closed),
            distribution: sec.choice("distribution", "uniform", &["uniform", "gaussian"]),
            mean_phase: sec.f64_in("mean_phase", 0.0, "(finite)", finite),
            sigma: sec.f64_in("sigma", 0.0, "[0,inf)", |x| x.is_finite() && x >= 0.0),
            delta_sigma: sec.f64_in("delta_sigma", 0.0, "[0,inf)", |x| x.is_finite() && x >= 0.0),
            basis: sec.choice("basis", "linear", &["linear", "circular"]),
            group_delay: sec.bool("group_delay", false),
        };
        sec.finish();

        let mut sec = Section::new(root, "detector", &mut diags);
        let detector = DetectorSection {
            efficiency: sec.f64_in("efficiency", 1.0, "(0,1]", |x| x > 0.0 && x <= 1.0),
            dark_count_prob: sec.f64_in("dark_count_prob", 0.0, "[0,1]", unit_closed),
        };
        sec.finish();

        let mut sec = Section::new(root, "optics", &mut diags);
        let optics = OpticsSection {
            n_max: sec.usize_in("n_max", 4, "[3,6]", |n| (3..=6).contains(&n)),
            keep_dbar: sec.bool("keep_dbar", false),
        };
        sec.finish();

        let mut sec = Section::new(root, "analysis", &mut diags);
        let state_names: Vec<&str> = StateChoice::NAMES.iter().map(|(n, _)| *n).collect();
        let state_name = sec.choice("state", "source", &state_names);
        let analysis = AnalysisSection {
            state: StateChoice::NAMES.iter().find(|(n, _)| *n == state_name).map(|(_, s)| *s).expect("validated choice"),
            werner_p: sec.f64_in("werner_p", 0.7, "[0,1]", unit_closed),
            total_counts: sec.f64_in("total_counts", 1025.0, "(0,inf)", positive),
            duration_s: sec.f64_in("duration_s", 800.0, "(0,inf)", positive),
            chsh_angles: sec.fixed("chsh_angles", [0.0, 45.0, -22.5, -67.5], finite, "(finite)"),
            mle_tolerance: sec.f64_in("mle_tolerance", 1e-9, "(0,inf)", positive),
            mle_max_iterations: sec.usize_in("mle_max_iterations", 10_000, "[1,1e6]", |n| (1..=1_000_000).contains(&n)),
            bootstrap_resamples: sec.usize_in("bootstrap_resamples", 200, "[100,1e5]", |n| (100..=100_000).contains(&n)),
            table_totals: sec.fixed("table_totals", [7404.0, 8076.0, 1025.0], positive, "(0,inf)"),
            table_durations: sec.fixed("table_durations", [5.0, 5.0, 800.0], positive, "(0,inf)"),
        };
        sec.finish();

        let mut sec = Section::new(root, "scan", &mut diags);
        let scan = ScanSection {
            points: sec.usize_in("points", 21, "[5,10000]", |n| (5..=10_000).contains(&n)),
            delay_min_um: sec.f64_in("delay_min_um", -300.0, "(finite)", finite),
            delay_max_um: sec.f64_in("delay_max_um", 300.0, "(finite)", finite),
            visibility: sec.f64_in("visibility", 0.85, "[0,1]", unit_closed),
            coherence_fwhm_um: sec.f64_in("coherence_fwhm_um", 130.0, "(0,inf)", positive),
            background: sec.f64_in("background", 175.0, "(0,inf)", positive),
            wavelength_um: sec.f64_in("wavelength_um", 0.79, "(0,inf)", positive),
            bandwidth_nm: sec.f64_in("bandwidth_nm", 2.7, "(0,inf)", positive),
            noise: sec.bool("noise", true),
        };
        sec.finish();
        if scan.delay_max_um <= scan.delay_min_um {
            diags.push("delay_max_um must exceed delay_min_um in [scan]".into());
        }

        let mut sec = Section::new(root, "budget", &mut diags);
        let budget = BudgetSection {
            gammas: sec.list("gammas", &[5e-4, 1e-3, 2e-3], unit_open, "[0,1)"),
            nus: sec.list("nus", &[0.05, 0.1, 0.2], unit_open, "[0,1)"),
            etas: sec.list("etas", &[1.0, 0.5], |x| x > 0.0 && x <= 1.0, "(0,1]"),
        };
        sec.finish();

        let mut sec = Section::new(root, "output", &mut diags);
        let output = OutputSection { dir: sec.string("dir", "out") };
        sec.finish();

        if 2 * source.spdc_order > optics.n_max || source.wcp_order > optics.n_max {
            diags.push(format!(
                "source orders (spdc {}, wcp {}) need n_max >= {} in [optics]",
                source.spdc_order,
                source.wcp_order,
                (2 * source.spdc_order).max(source.wcp_order)
            ));
        }

        if diags.is_empty() {
            Ok(Config { experiment, run, seed, source, channel, detector, optics, analysis, scan, budget, output })
        } else {
            Err(Diagnostics(diags))
        }
    }

    /// SHA-256 of the resolved configuration, output location excluded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn dephasing(&self) -> DephasingSpec {
        let c = &self.channel;
        let spec = match c.distribution.as_str() {
            "gaussian" => DephasingSpec::gaussian(c.mean_phase, c.sigma),
            _ => DephasingSpec { mean_phase: c.mean_phase, ..DephasingSpec::uniform() },
        };
        let spec = spec.with_delta_sigma(c.delta_sigma);
        match c.basis.as_str() {
            "circular" => spec.with_basis(DephasingBasis::circular()),
            _ => spec,
        }
    }

    pub fn pair_state(&self) -> StateVector {
        StateVector::new(self.source.pair.iter().map(|&(r, i)| C64::new(r, i)).collect()).expect("normalized at parse time")
    }

    pub fn setup(&self) -> SetupConfig {
        let s = &self.source;
        let source = SourceSpec {
            gamma: s.gamma,
            nu: s.nu,
            spdc_order: s.spdc_order,
            wcp_order: s.wcp_order,
            pair: PairAmplitudes::from_state(&self.pair_state()).expect("two-qubit pair"),
            mode_overlap: s.mode_overlap,
            ..SourceSpec::default()
        };
        SetupConfig {
            source,
            channel: self.dephasing(),
            eta: self.channel.eta,
            detector: DetectorSpec { efficiency: self.detector.efficiency, dark_count_prob: self.detector.dark_count_prob },
            n_max: self.optics.n_max,
            keep_dbar: self.optics.keep_dbar,
            group_delay: self.channel.group_delay,
            emissions: None,
        }
    }

    pub fn chsh_angles(&self) -> ChshAngles {
        let [a, a_prime, b, b_prime] = self.analysis.chsh_angles;
        ChshAngles { a, a_prime, b, b_prime }
    }
}

/// Applies `section.key=value` overrides to a raw tree. Values are read as
/// TOML literals, falling back to bare strings.
pub fn apply_overrides(root: &mut Table, overrides: &[String]) -> Result<(), Diagnostics> {
    let mut diags = Vec::new();
    for o in overrides {
        let Some((path, raw)) = o.split_once('=') else {
            diags.push(format!("override {o} must look like key=value"));
            continue;
        };
        let value = format!("v = {raw}")
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        let parts: Vec<&str> = path.trim().split('.').collect();
        if parts.iter().any(|p| p.is_empty()) || parts.len() > 2 {
            diags.push(format!("override key {path} must be key or section.key"));
            continue;
        }
        let target = match parts.as_slice() {
            [key] => Some((&mut *root, *key)),
            [section, key] => match root.entry(section.to_string()).or_insert_with(|| Value::Table(Table::new())) {
                Value::Table(t) => Some((t, *key)),
                _ => {
                    diags.push(format!("override {path}: {section} is not a table"));
                    None
                }
            },
            _ => unreachable!("checked above"),
        };
        if let Some((table, key)) = target {
            table.insert(key.to_string(), value);
        }
    }
    if diags.is_empty() {
        Ok(())
    } else {
        Err(Diagnostics(diags))
    }
}
