//! Simulated loop apparatus: polarizer, EPC, DGD fiber with a drifting
//! birefringent phase, the voltage-driven polarization stabilizer (PS),
//! per-loop loss, attenuation and photon-counting detection.
//!
//! The plant owns the hidden truth the controller never sees directly. The
//! controller only observes photon counts; analysis code may additionally
//! read the true transmission and Stokes vectors for validation.
//!
//! Per loop the polarization amplitude is `⟨L| R_PS(V) R_drift(t) R_EPC |L⟩`
//! where `|L⟩` is the polarizer state and `R_EPC |L⟩ = |ψ0⟩` is the prepared
//! state. The drift rotation is about S1, so it commutes with the DGD and the
//! analyzer state seen by the Zeno stage is `χ = (R_PS R_drift)† |L⟩`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polarization::{
    projector_overlap, Jones, PolRotation, PolarizationError, PolarizationState, StokesVector,
};
use crate::zeno::{propagate_projected, PointerSampler, PulseTiming};

pub const NUM_SQUEEZERS: usize = 4;
/// Physical ceiling on detected photons per pulse.
pub const MAX_DETECTED_PER_PULSE: f64 = 0.1;
/// Below this detected rate the count-based stabilizer is too noisy to work.
pub const MIN_STABILIZATION_RATE_HZ: f64 = 500.0;

pub type Voltages = [f64; NUM_SQUEEZERS];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("squeezer {channel}: {volts} V outside [{min}, {max}] V")]
    VoltageOutOfRange { channel: usize, volts: f64, min: f64, max: f64 },
    #[error("invalid plant configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Polarization(#[from] PolarizationError),
}

fn invalid(msg: impl Into<String>) -> PlantError {
    PlantError::InvalidConfig(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Squeezer {
    /// Retardance axis on the Poincaré sphere.
    pub axis: [f64; 3],
    pub gain_rad_per_v: f64,
    pub offset_rad: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl Squeezer {
    pub fn retardance(&self, volts: f64) -> f64 {
        self.gain_rad_per_v * volts + self.offset_rad
    }

    /// Voltage step equivalent to a 2π retardance change.
    pub fn wrap_span(&self) -> f64 {
        2.0 * PI / self.gain_rad_per_v.abs()
    }

    /// Brings `volts` into range by whole 2π steps.
    pub fn wrap(&self, volts: f64) -> f64 {
        wrap_into(volts, self.v_min, self.v_max, self.wrap_span())
    }
}

/// Subtracts (adds) `span` while `v` is above (below) the limits.
pub fn wrap_into(v: f64, min: f64, max: f64, span: f64) -> f64 {
    if v > max {
        let n = ((v - max) / span).ceil();
        let w = v - n * span;
        if w < min { w + span } else { w }
    } else if v < min {
        let n = ((min - v) / span).ceil();
        let w = v + n * span;
        if w > max { w - span } else { w }
    } else {
        v
    }
}

/// Four fiber squeezers whose axes alternate between two orthogonal axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezerBank {
    pub squeezers: [Squeezer; NUM_SQUEEZERS],
}

impl Default for SqueezerBank {
    fn default() -> Self {
        let make = |axis| Squeezer {
            axis,
            gain_rad_per_v: PI / 10.0,
            offset_rad: 0.0,
            v_min: 0.0,
            v_max: 150.0,
        };
        let s1 = [1.0, 0.0, 0.0];
        let s2 = [0.0, 1.0, 0.0];
        Self { squeezers: [make(s1), make(s2), make(s1), make(s2)] }
    }
}

impl SqueezerBank {
    pub fn validate(&self) -> Result<(), PlantError> {
        for (j, s) in self.squeezers.iter().enumerate() {
            if !(s.gain_rad_per_v.is_finite() && s.gain_rad_per_v != 0.0) {
                return Err(invalid(format!("squeezer {j}: gain must be finite and nonzero")));
            }
            if !(s.v_min.is_finite() && s.v_max.is_finite() && s.v_max - s.v_min >= s.wrap_span()) {
                return Err(invalid(format!(
                    "squeezer {j}: voltage range must span at least one 2π step ({:.3} V)",
                    s.wrap_span()
                )));
            }
            PolRotation::new(s.axis, 0.0)?;
        }
        let unit = |a: [f64; 3]| StokesVector::from_array(a).normalized().unwrap();
        let a = unit(self.squeezers[0].axis);
        let b = unit(self.squeezers[1].axis);
        let same = |x: StokesVector, y: StokesVector| x.cross(&y).norm() < 1e-9 && x.dot(&y) > 0.0;
        if !same(a, unit(self.squeezers[2].axis)) || !same(b, unit(self.squeezers[3].axis)) {
            return Err(invalid("squeezer axes must alternate between two axes"));
        }
        if a.dot(&b).abs() > 1e-9 {
            return Err(invalid("the two squeezer axes must be orthogonal"));
        }
        Ok(())
    }

    pub fn check_range(&self, v: &Voltages) -> Result<(), PlantError> {
        for (channel, (s, &volts)) in self.squeezers.iter().zip(v).enumerate() {
            if !(volts >= s.v_min && volts <= s.v_max) {
                return Err(PlantError::VoltageOutOfRange {
                    channel,
                    volts,
                    min: s.v_min,
                    max: s.v_max,
                });
            }
        }
        Ok(())
    }

    pub fn retardances(&self, v: &Voltages) -> Result<[f64; NUM_SQUEEZERS], PlantError> {
        self.check_range(v)?;
        Ok(std::array::from_fn(|j| self.squeezers[j].retardance(v[j])))
    }

    /// Squeezer 1 acts first: `R_4 R_3 R_2 R_1`.
    pub fn jones(&self, v: &Voltages) -> Result<Jones, PlantError> {
        let ret = self.retardances(v)?;
        let mut m = Jones::identity();
        for (s, r) in self.squeezers.iter().zip(ret) {
            m = PolRotation::new(s.axis, r)?.jones() * m;
        }
        Ok(m)
    }

    /// Voltages at which every squeezer has zero retardance (mod 2π).
    pub fn neutral_voltages(&self) -> Voltages {
        std::array::from_fn(|j| self.voltage_for(j, 0.0))
    }

    pub fn wrap(&self, v: &Voltages) -> Voltages {
        std::array::from_fn(|j| self.squeezers[j].wrap(v[j]))
    }

    fn voltage_for(&self, j: usize, retardance: f64) -> f64 {
        let s = &self.squeezers[j];
        s.wrap((retardance - s.offset_rad) / s.gain_rad_per_v)
    }

    /// Voltages realizing the Stokes-space rotation `target` (row-major SO(3)).
    ///
    /// Squeezers 1–3 implement a proper Euler decomposition about the
    /// alternating axes; squeezer 4 is parked at zero retardance.
    pub fn solve(&self, target: &[[f64; 3]; 3]) -> Voltages {
        let unit = |a: [f64; 3]| StokesVector::from_array(a).normalized().unwrap();
        let a = unit(self.squeezers[0].axis);
        let b = unit(self.squeezers[1].axis);
        // right-handed frame (b, a×b, a): rotations about a are Rz, about b are Rx
        let basis = [b.to_array(), a.cross(&b).to_array(), a.to_array()];
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3)
                    .flat_map(|k| (0..3).map(move |l| (k, l)))
                    .map(|(k, l)| basis[i][k] * target[k][l] * basis[j][l])
                    .sum();
            }
        }
        // m = Rz(alpha) Rx(beta) Rz(gamma)
        let beta = m[2][2].clamp(-1.0, 1.0).acos();
        let (alpha, gamma) = if m[2][0].hypot(m[2][1]) < 1e-12 {
            (m[1][0].atan2(m[0][0]), 0.0)
        } else {
            (m[0][2].atan2(-m[1][2]), m[2][0].atan2(m[2][1]))
        };
        [
            self.voltage_for(0, gamma),
            self.voltage_for(1, beta),
            self.voltage_for(2, alpha),
            self.voltage_for(3, 0.0),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftKind {
    RandomWalk,
    OrnsteinUhlenbeck,
}

/// Environmental drift of the DGD birefringent phase (a rotation about S1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftConfig {
    pub kind: DriftKind,
    /// Drift updates per second.
    pub rate_hz: f64,
    /// Diffusion scale in rad/√s.
    pub scale_rad_per_sqrt_s: f64,
    /// Relaxation time of the Ornstein–Uhlenbeck variant.
    pub relaxation_s: f64,
    pub initial_phase_rad: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            kind: DriftKind::RandomWalk,
            rate_hz: 20.0,
            scale_rad_per_sqrt_s: 0.1,
            relaxation_s: 60.0,
            initial_phase_rad: 0.0,
        }
    }
}

impl DriftConfig {
    pub fn disabled() -> Self {
        Self { scale_rad_per_sqrt_s: 0.0, ..Self::default() }
    }

    fn is_static(&self) -> bool {
        self.scale_rad_per_sqrt_s == 0.0 || self.rate_hz == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    pub photons_per_pulse: f64,
    pub loss_db_per_loop: f64,
    pub rep_rate_hz: f64,
    /// Detected photons per pulse the attenuator aims for at unit polarization overlap.
    pub attenuator_target: f64,
    /// Gaussian timing jitter of the detector (σ).
    pub jitter_sigma_ps: f64,
    pub tdc_bin_ps: f64,
    pub dark_rate_hz: f64,
    pub counter_integration_s: f64,
    /// Dark counts are spread uniformly over this TDC window.
    pub tdc_window_start_ns: f64,
    pub tdc_window_end_ns: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            photons_per_pulse: 1e9,
            loss_db_per_loop: 7.0,
            rep_rate_hz: 50e3,
            attenuator_target: 0.09,
            // 100 ps FWHM resolution
            jitter_sigma_ps: 100.0 / (8.0 * std::f64::consts::LN_2).sqrt(),
            tdc_bin_ps: 20.0,
            dark_rate_hz: 20.0,
            counter_integration_s: 0.2,
            tdc_window_start_ns: -20.0,
            tdc_window_end_ns: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointerConfig {
    pub loops: usize,
    pub tau_loop_ns: f64,
    pub pulse_fwhm_ns: f64,
}

impl Default for PointerConfig {
    fn default() -> Self {
        Self { loops: 5, tau_loop_ns: 0.483, pulse_fwhm_ns: 2.5 }
    }
}

impl PointerConfig {
    pub fn timing(&self) -> PulseTiming {
        PulseTiming::new(self.pulse_fwhm_ns)
    }

    pub fn tau_tilde(&self) -> f64 {
        self.timing().normalize(self.tau_loop_ns)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateAngles {
    pub theta_rad: f64,
    #[serde(default)]
    pub phi_rad: f64,
}

impl StateAngles {
    pub fn state(&self) -> PolarizationState {
        PolarizationState::from_angles(self.theta_rad, self.phi_rad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub squeezers: SqueezerBank,
    pub drift: DriftConfig,
    pub detection: DetectionConfig,
    pub pointer: PointerConfig,
    pub prepared: StateAngles,
    pub polarizer: StateAngles,
    pub seed: u64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            squeezers: SqueezerBank::default(),
            drift: DriftConfig::default(),
            detection: DetectionConfig::default(),
            pointer: PointerConfig::default(),
            prepared: StateAngles { theta_rad: PI / 4.0, phi_rad: 0.0 },
            polarizer: StateAngles { theta_rad: 0.0, phi_rad: 0.0 },
            seed: 0,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<(), PlantError> {
        self.squeezers.validate()?;
        let d = &self.detection;
        let nonneg = [
            ("photons_per_pulse", d.photons_per_pulse),
            ("loss_db_per_loop", d.loss_db_per_loop),
            ("rep_rate_hz", d.rep_rate_hz),
            ("jitter_sigma_ps", d.jitter_sigma_ps),
            ("dark_rate_hz", d.dark_rate_hz),
            ("drift.rate_hz", self.drift.rate_hz),
            ("drift.scale_rad_per_sqrt_s", self.drift.scale_rad_per_sqrt_s),
        ];
        for (name, x) in nonneg {
            if !(x.is_finite() && x >= 0.0) {
                return Err(invalid(format!("{name} must be finite and >= 0, got {x}")));
            }
        }
        if !(d.attenuator_target > 0.0 && d.attenuator_target <= MAX_DETECTED_PER_PULSE) {
            return Err(invalid(format!(
                "attenuator_target must be in (0, {MAX_DETECTED_PER_PULSE}]"
            )));
        }
        if !(d.tdc_bin_ps > 0.0 && d.counter_integration_s > 0.0) {
            return Err(invalid("tdc_bin_ps and counter_integration_s must be > 0"));
        }
        if !(d.tdc_window_end_ns > d.tdc_window_start_ns) {
            return Err(invalid("TDC window end must follow its start"));
        }
        if self.drift.kind == DriftKind::OrnsteinUhlenbeck && !(self.drift.relaxation_s > 0.0) {
            return Err(invalid("OU drift needs relaxation_s > 0"));
        }
        let p = &self.pointer;
        if !(p.tau_loop_ns > 0.0 && p.pulse_fwhm_ns > 0.0) {
            return Err(invalid("tau_loop_ns and pulse_fwhm_ns must be > 0"));
        }
        if p.loops == 0 {
            return Err(invalid("at least one loop is required"));
        }
        Ok(())
    }
}

/// One detected photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub pulse_index: u64,
    pub time_ns: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Detection {
    pub counts: u64,
    pub arrivals: Vec<Arrival>,
}

/// Photon budget from source to detector at unit polarization overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBudget {
    pub loops: usize,
    pub loop_loss_db: f64,
    pub photons_before_attenuator: f64,
    pub attenuation: f64,
    pub attenuation_db: f64,
    pub detected_per_pulse: f64,
    pub count_rate_hz: f64,
}

impl LossBudget {
    pub fn meets_minimum_rate(&self) -> bool {
        self.count_rate_hz >= MIN_STABILIZATION_RATE_HZ
    }
}

#[derive(Debug, Clone)]
pub struct Plant {
    config: PlantConfig,
    time_s: f64,
    drift_phase: f64,
    drift_steps: u64,
    drift_rng: ChaCha8Rng,
    shot_rng: ChaCha8Rng,
    prepared: PolarizationState,
    polarizer: PolarizationState,
    epc: Jones,
    attenuation: f64,
}

impl Plant {
    pub fn new(config: PlantConfig) -> Result<Self, PlantError> {
        config.validate()?;
        let prepared = config.prepared.state();
        let polarizer = config.polarizer.state();
        let epc = PolRotation::between(&polarizer.to_stokes(), &prepared.to_stokes())?.jones();
        let d = &config.detection;
        let before = d.photons_per_pulse * loss_factor(d.loss_db_per_loop).powi(config.pointer.loops as i32);
        let attenuation = if before > d.attenuator_target { d.attenuator_target / before } else { 1.0 };
        Ok(Self {
            time_s: 0.0,
            drift_phase: config.drift.initial_phase_rad,
            drift_steps: 0,
            drift_rng: ChaCha8Rng::seed_from_u64(config.seed),
            shot_rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5A5A_D1CE_0F0F_7E57),
            prepared,
            polarizer,
            epc,
            attenuation,
            config,
        })
    }

    pub fn config(&self) -> &PlantConfig {
        &self.config
    }

    pub fn bank(&self) -> &SqueezerBank {
        &self.config.squeezers
    }

    pub fn time_s(&self) -> f64 {
        self.time_s
    }

    pub fn drift_phase(&self) -> f64 {
        self.drift_phase
    }

    pub fn set_drift_phase(&mut self, phase: f64) {
        self.drift_phase = phase;
    }

    pub fn prepared_state(&self) -> PolarizationState {
        self.prepared
    }

    pub fn loops(&self) -> usize {
        self.config.pointer.loops
    }

    fn drift_jones(&self) -> Jones {
        PolRotation::about_s1(self.drift_phase).jones()
    }

    /// `R_PS R_drift R_EPC` at the current drift phase.
    fn loop_jones(&self, v: &Voltages) -> Result<Jones, PlantError> {
        Ok(self.bank().jones(v)? * self.drift_jones() * self.epc)
    }

    /// `|⟨L| R_PS R_drift R_EPC |L⟩|²`.
    pub fn polarization_overlap(&self, v: &Voltages) -> Result<f64, PlantError> {
        let out = self.loop_jones(v)?.apply(&self.polarizer);
        Ok(projector_overlap(&self.polarizer, &out).norm_sqr().min(1.0))
    }

    /// Single-loop transmission including the loop loss.
    pub fn loop_transmission(&self, v: &Voltages) -> Result<f64, PlantError> {
        Ok(loss_factor(self.config.detection.loss_db_per_loop) * self.polarization_overlap(v)?)
    }

    /// Stokes vector of the light arriving at the second polarizer.
    pub fn output_stokes(&self, v: &Voltages) -> Result<StokesVector, PlantError> {
        Ok(self.loop_jones(v)?.apply(&self.polarizer).to_stokes())
    }

    /// Stokes vector of the polarizer, i.e. the stabilization target.
    pub fn target_stokes(&self) -> StokesVector {
        self.polarizer.to_stokes()
    }

    /// Prepared state and the analyzer state the loop actually projects onto.
    pub fn effective_states(&self, v: &Voltages) -> Result<(PolarizationState, PolarizationState), PlantError> {
        let back = (self.bank().jones(v)? * self.drift_jones()).adjoint();
        Ok((self.prepared, back.apply(&self.polarizer)))
    }

    /// Voltages that exactly undo the current drift and EPC.
    pub fn compensation_voltages(&self) -> Voltages {
        let m = (self.drift_jones() * self.epc).rotation_matrix();
        let inverse: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| m[j][i]));
        self.bank().solve(&inverse)
    }

    fn signal_per_pulse(&self, v: &Voltages) -> Result<f64, PlantError> {
        let t = self.loop_transmission(v)?;
        let mu = self.config.detection.photons_per_pulse * t.powi(self.loops() as i32) * self.attenuation;
        Ok(mu.min(MAX_DETECTED_PER_PULSE))
    }

    /// Expected detected rate (signal + dark) at the current drift phase.
    pub fn expected_rate_hz(&self, v: &Voltages) -> Result<f64, PlantError> {
        let d = &self.config.detection;
        Ok(d.rep_rate_hz * self.signal_per_pulse(v)? + d.dark_rate_hz)
    }

    pub fn loss_budget(&self) -> LossBudget {
        let d = &self.config.detection;
        let loops = self.loops();
        let before = d.photons_per_pulse * loss_factor(d.loss_db_per_loop).powi(loops as i32);
        let detected = (before * self.attenuation).min(MAX_DETECTED_PER_PULSE);
        LossBudget {
            loops,
            loop_loss_db: d.loss_db_per_loop * loops as f64,
            photons_before_attenuator: before,
            attenuation: self.attenuation,
            attenuation_db: -10.0 * self.attenuation.log10(),
            detected_per_pulse: detected,
            count_rate_hz: detected * d.rep_rate_hz,
        }
    }

    /// Advances time without detecting anything.
    pub fn advance(&mut self, dt: f64) {
        self.for_each_segment(dt, |_, _| {});
    }

    /// Photon count over an interval of length `t`; advances time and drift.
    pub fn count_interval(&mut self, v: &Voltages, t: f64) -> Result<u64, PlantError> {
        Ok(self.detect_impl(v, t, false)?.counts)
    }

    /// Time-tagged detections over an interval of length `t`.
    pub fn arrival_record(&mut self, v: &Voltages, t: f64) -> Result<Vec<Arrival>, PlantError> {
        Ok(self.detect_impl(v, t, true)?.arrivals)
    }

    /// Counts and arrival times from the same photons.
    pub fn detect(&mut self, v: &Voltages, t: f64) -> Result<Detection, PlantError> {
        self.detect_impl(v, t, true)
    }

    fn detect_impl(&mut self, v: &Voltages, t: f64, tag: bool) -> Result<Detection, PlantError> {
        self.bank().check_range(v)?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid(format!("interval must be finite and >= 0, got {t}")));
        }
        let mut out = Detection::default();
        let mut failure = None;
        self.for_each_segment(t, |plant, len| {
            if failure.is_none() {
                if let Err(e) = plant.detect_segment(v, len, tag, &mut out) {
                    failure = Some(e);
                }
            }
        });
        match failure {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    fn detect_segment(&mut self, v: &Voltages, len: f64, tag: bool, out: &mut Detection) -> Result<(), PlantError> {
        let d = self.config.detection;
        let signal_mean = d.rep_rate_hz * len * self.signal_per_pulse(v)?;
        let dark_mean = d.dark_rate_hz * len;
        let mut n_signal = poisson(&mut self.shot_rng, signal_mean);
        let n_dark = poisson(&mut self.shot_rng, dark_mean);
        if tag {
            let first_pulse = (self.time_s * d.rep_rate_hz).floor() as u64;
            let last_pulse = ((self.time_s + len) * d.rep_rate_hz).floor() as u64;
            let sampler = if n_signal > 0 {
                let (prep, analyzer) = self.effective_states(v)?;
                let p = propagate_projected(&prep, &analyzer, self.config.pointer.tau_tilde(), self.loops());
                PointerSampler::new(&p).ok()
            } else {
                None
            };
            if sampler.is_none() {
                n_signal = 0;
            }
            let timing = self.config.pointer.timing();
            let origin = 0.5 * self.loops() as f64 * self.config.pointer.tau_loop_ns;
            let jitter = d.jitter_sigma_ps * 1e-3;
            let bin = d.tdc_bin_ps * 1e-3;
            let mut batch = Vec::with_capacity((n_signal + n_dark) as usize);
            if let Some(sampler) = &sampler {
                for _ in 0..n_signal {
                    let t_tilde = sampler.sample(&mut self.shot_rng);
                    let z: f64 = StandardNormal.sample(&mut self.shot_rng);
                    let t = timing.to_ns(t_tilde) + origin + jitter * z;
                    let pulse = pulse_in(&mut self.shot_rng, first_pulse, last_pulse);
                    batch.push(Arrival { pulse_index: pulse, time_ns: quantize(t, bin) });
                }
            }
            for _ in 0..n_dark {
                let u: f64 = self.shot_rng.random();
                let t = d.tdc_window_start_ns + u * (d.tdc_window_end_ns - d.tdc_window_start_ns);
                let pulse = pulse_in(&mut self.shot_rng, first_pulse, last_pulse);
                batch.push(Arrival { pulse_index: pulse, time_ns: quantize(t, bin) });
            }
            batch.sort_by(|a, b| a.pulse_index.cmp(&b.pulse_index).then(a.time_ns.total_cmp(&b.time_ns)));
            out.arrivals.extend(batch);
        }
        out.counts += n_signal + n_dark;
        Ok(())
    }

    fn next_drift_time(&self) -> f64 {
        if self.config.drift.is_static() {
            f64::INFINITY
        } else {
            (self.drift_steps + 1) as f64 / self.config.drift.rate_hz
        }
    }

    fn step_drift(&mut self) {
        let cfg = self.config.drift;
        let dt = 1.0 / cfg.rate_hz;
        let z: f64 = StandardNormal.sample(&mut self.drift_rng);
        self.drift_phase = match cfg.kind {
            DriftKind::RandomWalk => self.drift_phase + cfg.scale_rad_per_sqrt_s * dt.sqrt() * z,
            DriftKind::OrnsteinUhlenbeck => {
                let decay = (-dt / cfg.relaxation_s).exp();
                let sd = cfg.scale_rad_per_sqrt_s * (0.5 * cfg.relaxation_s * (1.0 - decay * decay)).sqrt();
                cfg.initial_phase_rad + (self.drift_phase - cfg.initial_phase_rad) * decay + sd * z
            }
        };
        self.drift_steps += 1;
    }

    /// Splits `[now, now + duration)` at drift updates; the drift phase is
    /// constant within each visited segment.
    fn for_each_segment(&mut self, duration: f64, mut visit: impl FnMut(&mut Plant, f64)) {
        let end = self.time_s + duration;
        while self.time_s < end {
            let next = self.next_drift_time();
            let reaches_next = next <= end + 1e-12;
            let seg_end = if reaches_next { next.max(self.time_s) } else { end };
            let len = seg_end - self.time_s;
            if len > 0.0 {
                visit(self, len);
            }
            self.time_s = seg_end;
            if reaches_next {
                self.step_drift();
            }
        }
    }
}

/// Power transmission for a loss in dB.
pub fn loss_factor(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

fn quantize(t: f64, bin: f64) -> f64 {
    (t / bin).round() * bin
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

fn pulse_in(rng: &mut ChaCha8Rng, first: u64, last: u64) -> u64 {
    if last > first { rng.random_range(first..last) } else { first }
}
