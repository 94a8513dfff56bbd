//! Declarative experiment scenarios, artifact manifests and verification
//! against tolerance-tagged expectations.
//!
//! A scenario either stabilizes a single prepared state (optionally alongside
//! an unstabilized control run that sees the same drift), or measures a list
//! of prepared states ("arms") under stabilization and reduces each arrival
//! record to a protective-measurement table row.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{
    analyze_arrivals, count_stability, fidelity_stats, fidelity_stats_against, AnalysisError, ArrivalHistogram,
    HistogramConfig, PmResult,
};
use crate::io::{self, IoError};
use crate::plant::{
    DetectionConfig, DriftConfig, Plant, PlantConfig, PlantError, PointerConfig, SqueezerBank, StateAngles,
};
use crate::polarization::PolarizationState;
use crate::spgd::{run_stabilized, SpgdConfig, SpgdError, StabilizationOptions, StabilizationRun};
use crate::zeno::{pointer_moments, propagate, ZenoConfig, ZenoError};

pub const MANIFEST_FILE: &str = "manifest.json";

const BUNDLED: &[(&str, &str, &str)] = &[
    (
        "table2_13loops",
        include_str!("../scenarios/table2_13loops.toml"),
        include_str!("../scenarios/table2_13loops.expect.toml"),
    ),
    (
        "table2_8loops",
        include_str!("../scenarios/table2_8loops.toml"),
        include_str!("../scenarios/table2_8loops.expect.toml"),
    ),
    (
        "fig3_stab_onoff",
        include_str!("../scenarios/fig3_stab_onoff.toml"),
        include_str!("../scenarios/fig3_stab_onoff.expect.toml"),
    ),
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot parse {what}: {source}")]
    Parse { what: String, source: toml::de::Error },
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Spgd(#[from] SpgdError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Zeno(#[from] ZenoError),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl ScenarioError {
    /// Whether the failure stems from the inputs rather than from running them.
    pub fn is_config(&self) -> bool {
        matches!(self, Self::Config(_) | Self::Parse { .. } | Self::Plant(PlantError::InvalidConfig(_)))
            || matches!(self, Self::Spgd(SpgdError::InvalidConfig(_)))
    }
}

fn config_err(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Config(msg.into())
}

/// One prepared state to measure; give either `theta_rad` or `expectation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    pub label: String,
    #[serde(default)]
    pub theta_rad: Option<f64>,
    #[serde(default)]
    pub expectation: Option<f64>,
    #[serde(default)]
    pub phi_rad: f64,
}

impl ArmSpec {
    pub fn angles(&self) -> Result<StateAngles, ScenarioError> {
        let theta = match (self.theta_rad, self.expectation) {
            (Some(t), None) => t,
            (None, Some(o)) if (-1.0..=1.0).contains(&o) => 0.5 * o.acos(),
            (None, Some(o)) => return Err(config_err(format!("arm {}: expectation {o} outside [-1, 1]", self.label))),
            _ => return Err(config_err(format!("arm {}: give exactly one of theta_rad, expectation", self.label))),
        };
        Ok(StateAngles { theta_rad: theta, phi_rad: self.phi_rad })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZenoSection {
    pub loops: usize,
    pub tau_loop_ns: f64,
    pub pulse_fwhm_ns: f64,
    pub arms: Vec<ArmSpec>,
}

impl Default for ZenoSection {
    fn default() -> Self {
        let p = PointerConfig::default();
        Self { loops: p.loops, tau_loop_ns: p.tau_loop_ns, pulse_fwhm_ns: p.pulse_fwhm_ns, arms: Vec::new() }
    }
}

impl ZenoSection {
    pub fn pointer(&self) -> PointerConfig {
        PointerConfig { loops: self.loops, tau_loop_ns: self.tau_loop_ns, pulse_fwhm_ns: self.pulse_fwhm_ns }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilizationSection {
    /// Also run with the voltages held fixed, under the same drift.
    pub compare_unstabilized: bool,
    /// Bin width for count-stability statistics.
    pub bin_s: f64,
}

impl Default for StabilizationSection {
    fn default() -> Self {
        Self { compare_unstabilized: false, bin_s: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    pub squeezers: SqueezerBank,
    pub drift: DriftConfig,
    pub detection: DetectionConfig,
    pub prepared: StateAngles,
    pub polarizer: StateAngles,
}

impl Default for PlantSection {
    fn default() -> Self {
        let p = PlantConfig::default();
        Self {
            squeezers: p.squeezers,
            drift: p.drift,
            detection: p.detection,
            prepared: p.prepared,
            polarizer: p.polarizer,
        }
    }
}

/// A complete, serializable experiment description.
///
/// The `[spgd]` voltage limits and wrap span are taken from the squeezer bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    /// Simulated time per arm (or per stabilization run).
    pub duration_s: f64,
    #[serde(default = "default_full_duration")]
    pub full_duration_s: f64,
    #[serde(default)]
    pub zeno: ZenoSection,
    #[serde(default)]
    pub stabilization: StabilizationSection,
    #[serde(default)]
    pub analysis: HistogramConfig,
    #[serde(default)]
    pub plant: PlantSection,
    #[serde(default)]
    pub spgd: SpgdConfig,
}

fn default_full_duration() -> f64 {
    150.0
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario =
            toml::from_str(text).map_err(|source| ScenarioError::Parse { what: "scenario".into(), source })?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read scenario {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn bundled(name: &str) -> Result<Self, ScenarioError> {
        let (_, text, _) = BUNDLED
            .iter()
            .find(|(n, _, _)| *n == name)
            .ok_or_else(|| config_err(format!("no bundled scenario named {name}")))?;
        Self::from_toml_str(text)
    }

    /// A bundled scenario name, or else a path to a scenario file.
    pub fn load(name_or_path: &str) -> Result<Self, ScenarioError> {
        if bundled_names().contains(&name_or_path) {
            Self::bundled(name_or_path)
        } else {
            Self::from_path(Path::new(name_or_path))
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.trim().is_empty() {
            return Err(config_err("scenario name is empty"));
        }
        if !(self.duration_s > 0.0 && self.full_duration_s > 0.0) {
            return Err(config_err("durations must be > 0"));
        }
        if !(self.stabilization.bin_s > 0.0) {
            return Err(config_err("stabilization.bin_s must be > 0"));
        }
        let mut labels = std::collections::BTreeSet::new();
        for arm in &self.zeno.arms {
            arm.angles()?;
            let ok = !arm.label.is_empty()
                && arm.label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !ok {
                return Err(config_err(format!("arm label {:?} must be non-empty [A-Za-z0-9_-]", arm.label)));
            }
            if !labels.insert(arm.label.as_str()) {
                return Err(config_err(format!("duplicate arm label {}", arm.label)));
            }
        }
        self.plant_config(0, None)?.validate()?;
        self.spgd_config(0).validate()?;
        Ok(())
    }

    pub fn plant_config(&self, seed: u64, prepared: Option<StateAngles>) -> Result<PlantConfig, ScenarioError> {
        Ok(PlantConfig {
            squeezers: self.plant.squeezers,
            drift: self.plant.drift,
            detection: self.plant.detection,
            pointer: self.zeno.pointer(),
            prepared: prepared.unwrap_or(self.plant.prepared),
            polarizer: self.plant.polarizer,
            seed,
        })
    }

    pub fn spgd_config(&self, seed: u64) -> SpgdConfig {
        SpgdConfig { seed, ..self.spgd }.for_bank(&self.plant.squeezers)
    }
}

pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _, _)| *n).collect()
}

/// Expectations shipped with a bundled scenario.
pub fn bundled_expectations(name: &str) -> Result<Expectations, ScenarioError> {
    let (_, _, text) = BUNDLED
        .iter()
        .find(|(n, _, _)| *n == name)
        .ok_or_else(|| config_err(format!("no bundled scenario named {name}")))?;
    Expectations::from_toml_str(text)
}

/// Mixes a base seed with a stream index and role into an independent seed.
pub fn derive_seed(base: u64, stream: u64, role: u64) -> u64 {
    let mut z = base
        ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ role.wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const ROLE_PLANT: u64 = 0;
const ROLE_CONTROL: u64 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub full: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: String,
    pub seed: u64,
    pub full: bool,
    pub duration_s: f64,
    pub loops: usize,
    pub files: Vec<FileEntry>,
    pub summary: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Ok(io::read_json(path)?)
    }

    /// Digest of the canonical JSON form.
    pub fn checksum(&self) -> String {
        let json = serde_json::to_vec(self).expect("manifest serializes");
        hex::encode(Sha256::digest(json))
    }
}

struct Collector {
    dir: PathBuf,
    files: Vec<FileEntry>,
    summary: BTreeMap<String, f64>,
    warnings: Vec<String>,
}

impl Collector {
    fn record(&mut self, name: &str) -> Result<(), ScenarioError> {
        let path = self.dir.join(name);
        let bytes = std::fs::metadata(&path)
            .map_err(|source| IoError::Io { path: path.clone(), source })?
            .len();
        self.files.push(FileEntry { path: name.to_string(), sha256: io::sha256_file(&path)?, bytes });
        Ok(())
    }

    fn put(&mut self, key: String, value: f64) {
        if value.is_finite() {
            self.summary.insert(key, value);
        } else {
            self.warnings.push(format!("{key} is not finite ({value}); omitted"));
        }
    }
}

/// Runs a scenario, writing artifacts and `manifest.json` into `options.out_dir`.
pub fn run_scenario(scenario: &Scenario, options: &RunOptions) -> Result<Manifest, ScenarioError> {
    scenario.validate()?;
    let seed = options.seed.unwrap_or(scenario.seed);
    let duration = if options.full { scenario.full_duration_s } else { scenario.duration_s };
    std::fs::create_dir_all(&options.out_dir)
        .map_err(|source| IoError::Io { path: options.out_dir.clone(), source })?;
    let mut out = Collector {
        dir: options.out_dir.clone(),
        files: Vec::new(),
        summary: BTreeMap::new(),
        warnings: Vec::new(),
    };

    let budget = Plant::new(scenario.plant_config(0, None)?)?.loss_budget();
    out.put("budget.count_rate_hz".into(), budget.count_rate_hz);
    out.put("budget.attenuation_db".into(), budget.attenuation_db);
    if !budget.meets_minimum_rate() {
        let msg = format!(
            "detected rate {:.0} counts/s is below the ~500 counts/s needed for stabilization",
            budget.count_rate_hz
        );
        log::warn!("{msg}");
        out.warnings.push(msg);
    }

    if scenario.zeno.arms.is_empty() {
        run_stabilization(scenario, seed, duration, &mut out)?;
    } else {
        run_arms(scenario, seed, duration, &mut out)?;
    }

    out.files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        scenario: scenario.name.clone(),
        seed,
        full: options.full,
        duration_s: duration,
        loops: scenario.zeno.loops,
        files: out.files,
        summary: out.summary,
        warnings: out.warnings,
    };
    io::write_json(&options.out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

fn run_stabilization(scenario: &Scenario, seed: u64, duration: f64, out: &mut Collector) -> Result<(), ScenarioError> {
    let modes: Vec<bool> = if scenario.stabilization.compare_unstabilized { vec![true, false] } else { vec![true] };
    let plant_cfg = scenario.plant_config(derive_seed(seed, 0, ROLE_PLANT), None)?;
    let spgd_cfg = scenario.spgd_config(derive_seed(seed, 0, ROLE_CONTROL));
    let runs = modes
        .par_iter()
        .map(|&on| -> Result<StabilizationRun, ScenarioError> {
            let mut plant = Plant::new(plant_cfg.clone())?;
            Ok(run_stabilized(&mut plant, &spgd_cfg, &StabilizationOptions::new(duration, on))?)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut ratios = Vec::new();
    for run in &runs {
        let tag = if run.stabilized { "on" } else { "off" };
        let trace_name = format!("trace_{tag}.csv");
        let stokes_name = format!("stokes_{tag}.csv");
        io::write_trace(&out.dir.join(&trace_name), &run.trace)?;
        io::write_stokes(&out.dir.join(&stokes_name), &run.stokes, &run.target)?;
        out.record(&trace_name)?;
        out.record(&stokes_name)?;

        let samples: Vec<(f64, u64)> = run.trace.iter().map(|s| (s.time_s, s.counts)).collect();
        let stability = count_stability(&samples, scenario.stabilization.bin_s)?;
        out.put(format!("{tag}.std_over_mean"), stability.std_over_mean);
        out.put(format!("{tag}.mean_counts_per_bin"), stability.mean);
        ratios.push(stability.std_over_mean);

        let stokes: Vec<_> = run.stokes.iter().map(|s| s.stokes).collect();
        let vs_target = fidelity_stats_against(&stokes, &run.target)?;
        out.put(format!("{tag}.fidelity_mean"), vs_target.mean);
        out.put(format!("{tag}.fidelity_frac_099"), vs_target.fraction_above_099);
        out.put(format!("{tag}.fidelity_frac_098"), vs_target.fraction_above_098);
        match fidelity_stats(&stokes) {
            Ok(vs_mean) => {
                out.put(format!("{tag}.scatter_fidelity_mean"), vs_mean.mean);
                out.put(format!("{tag}.scatter_fidelity_frac_099"), vs_mean.fraction_above_099);
            }
            Err(e) => out.warnings.push(format!("{tag}: scatter fidelity unavailable: {e}")),
        }
        out.put(format!("{tag}.steps"), run.steps as f64);
    }
    if let [on, off] = ratios[..] {
        out.put("off_on_ratio".into(), off / on);
    }
    Ok(())
}

fn run_arms(scenario: &Scenario, seed: u64, duration: f64, out: &mut Collector) -> Result<(), ScenarioError> {
    let pointer = scenario.zeno.pointer();
    let results = scenario
        .zeno
        .arms
        .par_iter()
        .enumerate()
        .map(|(i, arm)| -> Result<(StabilizationRun, PmResult), ScenarioError> {
            let stream = i as u64 + 1;
            let plant_cfg = scenario.plant_config(derive_seed(seed, stream, ROLE_PLANT), Some(arm.angles()?))?;
            let spgd_cfg = scenario.spgd_config(derive_seed(seed, stream, ROLE_CONTROL));
            let mut plant = Plant::new(plant_cfg)?;
            let options = StabilizationOptions { record_arrivals: true, ..StabilizationOptions::new(duration, true) };
            let run = run_stabilized(&mut plant, &spgd_cfg, &options)?;
            let pm = analyze_arrivals(&arm.label, &run.arrivals, pointer.loops, pointer.tau_loop_ns, &scenario.analysis)?;
            Ok((run, pm))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Vec::new();
    for (arm, (run, pm)) in scenario.zeno.arms.iter().zip(results) {
        let arrivals_name = format!("arrivals_{}.csv", arm.label);
        let trace_name = format!("trace_{}.csv", arm.label);
        io::write_arrivals(&out.dir.join(&arrivals_name), &run.arrivals)?;
        io::write_trace(&out.dir.join(&trace_name), &run.trace)?;
        out.record(&arrivals_name)?;
        out.record(&trace_name)?;

        let angles = arm.angles()?;
        let l = &arm.label;
        out.put(format!("{l}.theta_rad"), angles.theta_rad);
        out.put(format!("{l}.set_expectation"), (2.0 * angles.theta_rad).cos());
        out.put(format!("{l}.photons"), run.arrivals.len() as f64);
        out.put(format!("{l}.window_counts"), pm.counts);
        out.put(format!("{l}.mean_ns"), pm.mean_ns);
        out.put(format!("{l}.std_ns"), pm.std_ns);
        out.put(format!("{l}.expectation"), pm.expectation);
        out.put(format!("{l}.sigma_pm"), pm.sigma_pm);
        out.put(format!("{l}.sigma_sm"), pm.sigma_sm);
        out.put(format!("{l}.ratio"), pm.ratio);
        let low = run.trace.iter().map(|s| s.transmission).fold(f64::INFINITY, f64::min);
        out.put(format!("{l}.min_transmission"), low);
        table.push(pm);
    }
    io::write_pm_table(&out.dir.join("pm_table.csv"), &table)?;
    io::write_json(&out.dir.join("pm_results.json"), &table)?;
    out.record("pm_table.csv")?;
    out.record("pm_results.json")?;
    Ok(())
}

/// One tolerance-tagged expectation on a manifest summary value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub key: String,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
    #[serde(default)]
    pub note: Option<String>,
}

impl Check {
    fn validate(&self) -> Result<(), ScenarioError> {
        match (self.value, self.tolerance) {
            (Some(_), Some(t)) if t >= 0.0 => {}
            (None, None) if self.min.is_some() || self.max.is_some() => {}
            (Some(_), None) | (None, Some(_)) => {
                return Err(config_err(format!("{}: value and tolerance go together", self.key)))
            }
            (Some(_), Some(t)) => return Err(config_err(format!("{}: negative tolerance {t}", self.key))),
            (None, None) => return Err(config_err(format!("{}: no criterion given", self.key))),
        }
        Ok(())
    }

    pub fn passes(&self, observed: f64) -> bool {
        let near = match (self.value, self.tolerance) {
            // decimal tolerances are not exact in binary; allow rounding slack
            (Some(v), Some(t)) => (observed - v).abs() <= t + 1e-12 * (1.0 + v.abs()),
            _ => true,
        };
        near && self.min.is_none_or(|m| observed >= m) && self.max.is_none_or(|m| observed <= m)
    }

    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if let (Some(v), Some(t)) = (self.value, self.tolerance) {
            parts.push(format!("{v} ± {t}"));
        }
        if let Some(m) = self.min {
            parts.push(format!(">= {m}"));
        }
        if let Some(m) = self.max {
            parts.push(format!("<= {m}"));
        }
        parts.join(", ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    pub scenario: String,
    #[serde(default, rename = "check")]
    pub checks: Vec<Check>,
}

impl Expectations {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let e: Expectations =
            toml::from_str(text).map_err(|source| ScenarioError::Parse { what: "expectations".into(), source })?;
        for c in &e.checks {
            c.validate()?;
        }
        Ok(e)
    }

    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read expectations {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub key: String,
    pub observed: Option<f64>,
    pub expected: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub scenario: String,
    pub outcomes: Vec<CheckOutcome>,
    pub diagnostics: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.diagnostics.is_empty() && self.outcomes.iter().all(|o| o.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.diagnostics {
            writeln!(f, "FAIL  {d}")?;
        }
        for o in &self.outcomes {
            let observed = o.observed.map_or("missing".to_string(), |v| format!("{v:.6}"));
            let tag = if o.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag}  {:<32} {observed:>14}   expected {}", o.key, o.expected)?;
        }
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{verdict}  {}", self.scenario)
    }
}

/// Checks a manifest's artifacts and summary against expectations.
///
/// A missing or unreadable manifest, a scenario name mismatch, and missing or
/// altered artifacts are all reported as failures, not errors.
pub fn verify(manifest_path: &Path, expectations: &Expectations) -> VerifyReport {
    let mut report = VerifyReport {
        scenario: expectations.scenario.clone(),
        outcomes: Vec::new(),
        diagnostics: Vec::new(),
    };
    let manifest = match Manifest::load(manifest_path) {
        Ok(m) => m,
        Err(e) => {
            report.diagnostics.push(format!("cannot load manifest: {e}"));
            return report;
        }
    };
    if manifest.scenario != expectations.scenario {
        report.diagnostics.push(format!(
            "manifest is for scenario {:?}, expectations are for {:?}",
            manifest.scenario, expectations.scenario
        ));
        return report;
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    for entry in &manifest.files {
        match io::sha256_file(&dir.join(&entry.path)) {
            Ok(sum) if sum == entry.sha256 => {}
            Ok(_) => report.diagnostics.push(format!("{}: checksum mismatch", entry.path)),
            Err(e) => report.diagnostics.push(format!("missing artifact: {e}")),
        }
    }
    for check in &expectations.checks {
        let observed = manifest.summary.get(&check.key).copied();
        report.outcomes.push(CheckOutcome {
            key: check.key.clone(),
            observed,
            expected: check.describe(),
            passed: observed.is_some_and(|v| check.passes(v)),
        });
    }
    report
}

/// Noise-free prediction for one prepared state and loop count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub theta_rad: f64,
    pub loops: usize,
    pub set_expectation: f64,
    pub survival: f64,
    pub mean_ns: f64,
    pub std_ns: f64,
    pub expectation: f64,
    pub sigma_pm: f64,
    pub sigma_sm: f64,
    pub ratio: f64,
}

pub fn predict(pointer: &PointerConfig, theta_rad: f64, loops: usize) -> Result<SweepPoint, ScenarioError> {
    let timing = pointer.timing();
    let tau = pointer.tau_tilde();
    let state = PolarizationState::from_angles(theta_rad, 0.0);
    let p = propagate(&ZenoConfig::new(tau, loops, state)?);
    let m = pointer_moments(&p)?;
    let moments = crate::analysis::ArrivalMoments {
        mean_ns: timing.to_ns(m.mean) + 0.5 * loops as f64 * pointer.tau_loop_ns,
        std_ns: timing.to_ns(m.std),
        counts: p.norm_sqr(),
    };
    let pm = PmResult::from_moments("", loops, pointer.tau_loop_ns, &moments)?;
    Ok(SweepPoint {
        theta_rad,
        loops,
        set_expectation: state.expectation(),
        survival: p.norm_sqr(),
        mean_ns: pm.mean_ns,
        std_ns: pm.std_ns,
        expectation: pm.expectation,
        sigma_pm: pm.sigma_pm,
        sigma_sm: pm.sigma_sm,
        ratio: pm.ratio,
    })
}

/// Predictions over `steps` evenly spaced angles in `[0, π/2]`.
pub fn sweep_theta(pointer: &PointerConfig, steps: usize) -> Result<Vec<SweepPoint>, ScenarioError> {
    if steps < 2 {
        return Err(config_err("a theta sweep needs at least 2 points"));
    }
    (0..steps)
        .map(|i| predict(pointer, std::f64::consts::FRAC_PI_2 * i as f64 / (steps - 1) as f64, pointer.loops))
        .collect()
}

/// Predictions for loop counts `1..=max_loops` at a fixed angle.
pub fn sweep_loops(pointer: &PointerConfig, theta_rad: f64, max_loops: usize) -> Result<Vec<SweepPoint>, ScenarioError> {
    if max_loops == 0 {
        return Err(config_err("max_loops must be >= 1"));
    }
    (1..=max_loops).map(|l| predict(pointer, theta_rad, l)).collect()
}

pub fn write_sweep(path: &Path, points: &[SweepPoint]) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
    for p in points {
        w.serialize(p).map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
    }
    w.flush().map_err(|source| IoError::Io { path: path.to_path_buf(), source })?;
    Ok(())
}

/// Rebinning factor applied to arrival histograms for plotting (20 ps → 100 ps).
pub const PLOT_REBIN: usize = 5;

/// Writes plot-ready CSV files derived from a run directory; returns their names.
pub fn emit_plots(run_dir: &Path, out_dir: &Path) -> Result<Vec<String>, ScenarioError> {
    let manifest = Manifest::load(&run_dir.join(MANIFEST_FILE))?;
    std::fs::create_dir_all(out_dir).map_err(|source| IoError::Io { path: out_dir.to_path_buf(), source })?;
    let mut written = Vec::new();
    let has = |name: &str| manifest.files.iter().any(|f| f.path == name);

    if has("trace_on.csv") {
        let mut columns: Vec<(&str, Vec<f64>)> = Vec::new();
        for tag in ["on", "off"] {
            let name = format!("trace_{tag}.csv");
            if has(&name) {
                let rows = io::read_trace(&run_dir.join(&name))?;
                let samples: Vec<(f64, u64)> = rows.iter().map(|r| (r.time_s, r.counts)).collect();
                columns.push((tag, crate::analysis::bin_counts(&samples, 10.0)));
            }
        }
        let path = out_dir.join("fig3_counts.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|source| IoError::Csv { path: path.clone(), source })?;
        let mut header = vec!["bin_start_s".to_string()];
        header.extend(columns.iter().map(|(t, _)| format!("counts_{t}")));
        w.write_record(&header).map_err(|source| IoError::Csv { path: path.clone(), source })?;
        let n = columns.iter().map(|(_, c)| c.len()).min().unwrap_or(0);
        for i in 0..n {
            let mut rec = vec![format!("{}", i as f64 * 10.0)];
            rec.extend(columns.iter().map(|(_, c)| format!("{}", c[i])));
            w.write_record(&rec).map_err(|source| IoError::Csv { path: path.clone(), source })?;
        }
        w.flush().map_err(|source| IoError::Io { path: path.clone(), source })?;
        written.push("fig3_counts.csv".to_string());

        let rows = io::read_stokes(&run_dir.join("stokes_on.csv"))?;
        let stokes: Vec<_> = rows.iter().map(|r| crate::polarization::StokesVector::new(r.s1, r.s2, r.s3)).collect();
        let stats = fidelity_stats(&stokes)?;
        let path = out_dir.join("fig4_fidelity.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|source| IoError::Csv { path: path.clone(), source })?;
        w.write_record(["lower_edge", "samples"]).map_err(|source| IoError::Csv { path: path.clone(), source })?;
        for (edge, n) in &stats.histogram {
            w.write_record([format!("{edge:.3}"), n.to_string()])
                .map_err(|source| IoError::Csv { path: path.clone(), source })?;
        }
        w.flush().map_err(|source| IoError::Io { path: path.clone(), source })?;
        written.push("fig4_fidelity.csv".to_string());
    }

    let arrival_files: Vec<&FileEntry> = manifest.files.iter().filter(|f| f.path.starts_with("arrivals_")).collect();
    if !arrival_files.is_empty() {
        let cfg = HistogramConfig::default();
        let raw_path = out_dir.join("fig5_raw_arrivals.csv");
        let prob_path = out_dir.join("fig6_probabilities.csv");
        let mut raw = csv::Writer::from_path(&raw_path).map_err(|source| IoError::Csv { path: raw_path.clone(), source })?;
        let mut prob = csv::Writer::from_path(&prob_path).map_err(|source| IoError::Csv { path: prob_path.clone(), source })?;
        raw.write_record(["label", "center_ns", "counts"]).map_err(|source| IoError::Csv { path: raw_path.clone(), source })?;
        prob.write_record(["label", "center_ns", "probability"]).map_err(|source| IoError::Csv { path: prob_path.clone(), source })?;
        for f in arrival_files {
            let label = f.path.trim_start_matches("arrivals_").trim_end_matches(".csv");
            let arrivals = io::read_arrivals(&run_dir.join(&f.path))?;
            let h = ArrivalHistogram::from_arrivals(&arrivals, cfg.start_ns, cfg.end_ns, cfg.bin_ns)?.rebin(PLOT_REBIN);
            for (i, c) in h.counts.iter().enumerate() {
                raw.write_record([label.to_string(), format!("{:.3}", h.center(i)), c.to_string()])
                    .map_err(|source| IoError::Csv { path: raw_path.clone(), source })?;
            }
            let w = h.window(cfg.window_fraction)?;
            for (i, p) in w.normalized()?.iter().enumerate() {
                prob.write_record([label.to_string(), format!("{:.3}", w.center(i)), format!("{p:.6e}")])
                    .map_err(|source| IoError::Csv { path: prob_path.clone(), source })?;
            }
        }
        raw.flush().map_err(|source| IoError::Io { path: raw_path.clone(), source })?;
        prob.flush().map_err(|source| IoError::Io { path: prob_path.clone(), source })?;
        written.push("fig5_raw_arrivals.csv".to_string());
        written.push("fig6_probabilities.csv".to_string());
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_stab() -> Scenario {
        Scenario::from_toml_str(
            r#"
            name = "tiny"
            seed = 3
            duration_s = 20.0
            [stabilization]
            compare_unstabilized = true
            bin_s = 2.0
            "#,
        )
        .unwrap()
    }

    #[test]
    fn bundled_scenarios_parse() {
        for name in bundled_names() {
            let s = Scenario::bundled(name).unwrap();
            assert_eq!(s.name, name);
            let e = bundled_expectations(name).unwrap();
            assert_eq!(e.scenario, name);
            assert!(!e.checks.is_empty());
        }
    }

    #[test]
    fn toml_round_trip() {
        for name in bundled_names() {
            let s = Scenario::bundled(name).unwrap();
            let again = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
            assert_eq!(s, again);
        }
    }

    #[test]
    fn arm_angle_from_expectation() {
        let arm = ArmSpec { label: "x".into(), theta_rad: None, expectation: Some(0.0), phi_rad: 0.0 };
        assert!((arm.angles().unwrap().theta_rad - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        let both = ArmSpec { theta_rad: Some(0.1), ..arm.clone() };
        assert!(both.angles().is_err());
        let bad = ArmSpec { expectation: Some(1.5), ..arm };
        assert!(bad.angles().is_err());
    }

    #[test]
    fn invalid_scenarios_are_config_errors() {
        for text in [
            "name = \"x\"\nduration_s = -1.0",
            "name = \"x\"\nduration_s = 1.0\nunknown = 3",
            "name = \"x\"\nduration_s = 1.0\n[spgd]\ndither_v = 0.0",
            "name = \"x\"\nduration_s = 1.0\n[[zeno.arms]]\nlabel = \"a\"\n[[zeno.arms]]\nlabel = \"a\"\ntheta_rad = 0.1",
        ] {
            let err = Scenario::from_toml_str(text).unwrap_err();
            assert!(err.is_config(), "{err}");
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(1, 0, ROLE_PLANT);
        assert_ne!(a, derive_seed(1, 0, ROLE_CONTROL));
        assert_ne!(a, derive_seed(1, 1, ROLE_PLANT));
        assert_ne!(a, derive_seed(2, 0, ROLE_PLANT));
        assert_eq!(a, derive_seed(1, 0, ROLE_PLANT));
    }

    #[test]
    fn stabilization_only_run_and_verify() {
        let dir = tempfile::tempdir().unwrap();
        let s = tiny_stab();
        let m = run_scenario(&s, &RunOptions { out_dir: dir.path().into(), ..RunOptions::default() }).unwrap();
        assert!(m.summary.contains_key("on.std_over_mean"));
        assert!(m.summary.contains_key("off_on_ratio"));
        assert!(!m.files.iter().any(|f| f.path == "pm_table.csv"));

        let exp = Expectations::from_toml_str(
            "scenario = \"tiny\"\n[[check]]\nkey = \"on.fidelity_mean\"\nmin = 0.9\n",
        )
        .unwrap();
        let report = verify(&dir.path().join(MANIFEST_FILE), &exp);
        assert!(report.passed(), "{report}");

        let exact = Expectations::from_toml_str(
            "scenario = \"tiny\"\n[[check]]\nkey = \"on.std_over_mean\"\nvalue = 0.0123\ntolerance = 0.0\n",
        )
        .unwrap();
        assert!(!verify(&dir.path().join(MANIFEST_FILE), &exact).passed());

        let other = Expectations { scenario: "other".into(), checks: vec![] };
        let report = verify(&dir.path().join(MANIFEST_FILE), &other);
        assert!(!report.passed());
        assert!(report.diagnostics[0].contains("other"));

        std::fs::remove_file(dir.path().join("trace_off.csv")).unwrap();
        let report = verify(&dir.path().join(MANIFEST_FILE), &exp);
        assert!(!report.passed());
        assert!(report.diagnostics[0].contains("trace_off.csv"));
    }

    #[test]
    fn missing_manifest_fails_verification() {
        let exp = Expectations { scenario: "x".into(), checks: vec![] };
        let report = verify(Path::new("/nonexistent/manifest.json"), &exp);
        assert!(!report.passed());
    }

    #[test]
    fn check_rules() {
        let c = Check { key: "k".into(), value: Some(1.0), tolerance: Some(0.1), min: None, max: None, note: None };
        assert!(c.passes(1.1) && c.passes(0.9) && !c.passes(1.2));
        let bound = Check { value: None, tolerance: None, min: Some(0.5), ..c.clone() };
        assert!(bound.passes(0.5) && !bound.passes(0.4));
        let empty = Check { value: None, tolerance: None, ..c };
        assert!(empty.validate().is_err());
    }

    #[test]
    fn prediction_matches_linear_delay_for_eigenstates() {
        let pointer = PointerConfig { loops: 13, ..PointerConfig::default() };
        let h = predict(&pointer, 0.0, 13).unwrap();
        let v = predict(&pointer, std::f64::consts::FRAC_PI_2, 13).unwrap();
        assert!((h.mean_ns - 13.0 * 0.483).abs() < 1e-9);
        assert!(v.mean_ns.abs() < 1e-9);
        assert!((h.expectation - 1.0).abs() < 1e-9 && (v.expectation + 1.0).abs() < 1e-9);
        assert_eq!(sweep_loops(&pointer, 0.3, 13).unwrap().len(), 13);
        assert_eq!(sweep_theta(&pointer, 7).unwrap().len(), 7);
    }
}
