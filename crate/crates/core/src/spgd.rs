//! Stochastic parallel gradient descent (ascent) on photon counts, and the
//! closed-loop driver that runs it against the simulated [`Plant`].
//!
//! Each step draws fresh random ±1 signs for every channel, measures the
//! objective at `V + C·s` and `V − C·s`, and moves along `s` by
//! `clamp(γ·δf, ±G_max)·C`. Any voltage that leaves the limits is wrapped by
//! whole 2π steps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::{wrap_into, Arrival, Plant, PlantError, SqueezerBank, Voltages};
use crate::polarization::StokesVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpgdError {
    #[error("invalid SPGD configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Plant(#[from] PlantError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpgdConfig {
    /// Dither amplitude `C` in volts.
    pub dither_v: f64,
    /// Gain coefficient `γ` per count of objective difference.
    pub gain: f64,
    pub max_gain: f64,
    /// Counter integration per probe.
    pub integration_s: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Voltage equivalent of a 2π retardance.
    pub wrap_v: f64,
    pub seed: u64,
}

impl Default for SpgdConfig {
    fn default() -> Self {
        Self {
            dither_v: 0.3,
            gain: 0.005,
            max_gain: 3.0,
            integration_s: 0.2,
            v_min: 0.0,
            v_max: 150.0,
            wrap_v: 20.0,
            seed: 0,
        }
    }
}

impl SpgdConfig {
    /// Copies limits and wrap span from the first squeezer of `bank`.
    pub fn for_bank(self, bank: &SqueezerBank) -> Self {
        let s = &bank.squeezers[0];
        Self { v_min: s.v_min, v_max: s.v_max, wrap_v: s.wrap_span(), ..self }
    }

    pub fn validate(&self) -> Result<(), SpgdError> {
        let positive = [
            ("dither_v", self.dither_v),
            ("gain", self.gain),
            ("max_gain", self.max_gain),
            ("integration_s", self.integration_s),
            ("wrap_v", self.wrap_v),
        ];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return Err(SpgdError::InvalidConfig(format!("{name} must be finite and > 0, got {x}")));
            }
        }
        if !(self.v_max - self.v_min >= self.wrap_v) {
            return Err(SpgdError::InvalidConfig("voltage range narrower than the wrap span".into()));
        }
        if 2.0 * self.dither_v >= self.wrap_v {
            return Err(SpgdError::InvalidConfig("dither must be smaller than half the wrap span".into()));
        }
        Ok(())
    }

    pub fn wrap(&self, v: f64) -> f64 {
        wrap_into(v, self.v_min, self.v_max, self.wrap_v)
    }
}

/// Something SPGD can maximize.
pub trait Objective {
    type Error;
    fn evaluate(&mut self, v: &[f64]) -> Result<f64, Self::Error>;
}

impl<F, E> Objective for F
where
    F: FnMut(&[f64]) -> Result<f64, E>,
{
    type Error = E;
    fn evaluate(&mut self, v: &[f64]) -> Result<f64, E> {
        self(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub signs: Vec<f64>,
    pub f_plus: f64,
    pub f_minus: f64,
    pub gain: f64,
    pub voltages: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SpgdState {
    config: SpgdConfig,
    voltages: Vec<f64>,
    rng: ChaCha8Rng,
    steps: u64,
    history: Vec<StepRecord>,
    keep_history: bool,
}

impl SpgdState {
    pub fn new(config: SpgdConfig, initial: &[f64]) -> Result<Self, SpgdError> {
        config.validate()?;
        Ok(Self {
            voltages: initial.iter().map(|&v| config.wrap(v)).collect(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            steps: 0,
            history: Vec::new(),
            keep_history: false,
        })
    }

    pub fn with_history(mut self) -> Self {
        self.keep_history = true;
        self
    }

    pub fn config(&self) -> &SpgdConfig {
        &self.config
    }

    pub fn voltages(&self) -> &[f64] {
        &self.voltages
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn history(&self) -> &[StepRecord] {
        &self.history
    }

    /// One iteration: exactly two objective evaluations, `f⁺` then `f⁻`.
    /// On error the state, including the sign generator, is left untouched.
    pub fn step<O: Objective + ?Sized>(&mut self, objective: &mut O) -> Result<StepRecord, O::Error> {
        let saved_rng = self.rng.clone();
        let c = self.config.dither_v;
        let signs: Vec<f64> = (0..self.voltages.len())
            .map(|_| if self.rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let probe = |sign: f64| -> Vec<f64> {
            self.voltages.iter().zip(&signs).map(|(v, s)| self.config.wrap(v + sign * c * s)).collect()
        };
        let plus = probe(1.0);
        let minus = probe(-1.0);
        let evaluated = objective
            .evaluate(&plus)
            .and_then(|fp| objective.evaluate(&minus).map(|fm| (fp, fm)));
        let (f_plus, f_minus) = match evaluated {
            Ok(pair) => pair,
            Err(e) => {
                self.rng = saved_rng;
                return Err(e);
            }
        };
        let gain = (self.config.gain * (f_plus - f_minus)).clamp(-self.config.max_gain, self.config.max_gain);
        for (v, s) in self.voltages.iter_mut().zip(&signs) {
            *v = self.config.wrap(*v + gain * c * s);
        }
        self.steps += 1;
        let record = StepRecord { signs, f_plus, f_minus, gain, voltages: self.voltages.clone() };
        if self.keep_history {
            self.history.push(record.clone());
        }
        Ok(record)
    }
}

/// One counter interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceSample {
    pub time_s: f64,
    pub counts: u64,
    pub voltages: Voltages,
    /// True single-loop transmission at the start of the interval.
    pub transmission: f64,
}

/// Output polarization, one per SPGD step (or per pair of intervals when idle).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StokesSample {
    pub time_s: f64,
    pub stokes: StokesVector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizationOptions {
    pub duration_s: f64,
    pub stabilize: bool,
    pub record_arrivals: bool,
    /// Starting voltages; the compensation point at t = 0 when absent.
    pub start: Option<Voltages>,
}

impl StabilizationOptions {
    pub fn new(duration_s: f64, stabilize: bool) -> Self {
        Self { duration_s, stabilize, record_arrivals: false, start: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilizationRun {
    pub stabilized: bool,
    pub target: StokesVector,
    pub trace: Vec<TraceSample>,
    pub stokes: Vec<StokesSample>,
    pub arrivals: Vec<Arrival>,
    pub final_voltages: Voltages,
    pub steps: u64,
}

impl StabilizationRun {
    pub fn total_counts(&self) -> u64 {
        self.trace.iter().map(|s| s.counts).sum()
    }
}

/// Runs the plant for `duration_s`, either under SPGD control or with the
/// voltages held fixed. The counter integrates `integration_s` per sample in
/// both modes, so the traces are directly comparable.
pub fn run_stabilized(
    plant: &mut Plant,
    config: &SpgdConfig,
    options: &StabilizationOptions,
) -> Result<StabilizationRun, SpgdError> {
    config.validate()?;
    let t = config.integration_s;
    let start = options.start.unwrap_or_else(|| plant.compensation_voltages());
    plant.bank().check_range(&start)?;
    let mut run = StabilizationRun {
        stabilized: options.stabilize,
        target: plant.target_stokes(),
        trace: Vec::new(),
        stokes: Vec::new(),
        arrivals: Vec::new(),
        final_voltages: start,
        steps: 0,
    };
    let end = options.duration_s + 1e-9;
    let mut pending: Vec<(f64, StokesVector)> = Vec::with_capacity(2);

    let mut measure = |plant: &mut Plant, v: &Voltages, run: &mut StabilizationRun| -> Result<f64, PlantError> {
        let time_s = plant.time_s();
        let transmission = plant.loop_transmission(v)?;
        pending.push((time_s, plant.output_stokes(v)?));
        let counts = if options.record_arrivals {
            let d = plant.detect(v, t)?;
            run.arrivals.extend(d.arrivals);
            d.counts
        } else {
            plant.count_interval(v, t)?
        };
        run.trace.push(TraceSample { time_s, counts, voltages: *v, transmission });
        if pending.len() == 2 {
            let mean = pending[0].1.add(&pending[1].1);
            let stokes = mean.normalized().unwrap_or(pending[1].1);
            run.stokes.push(StokesSample { time_s: pending[0].0, stokes });
            pending.clear();
        }
        Ok(counts as f64)
    };

    if options.stabilize {
        let mut state = SpgdState::new(*config, &start)?;
        while plant.time_s() + 2.0 * t <= end {
            let mut objective = |v: &[f64]| -> Result<f64, PlantError> {
                let v: Voltages = v.try_into().expect("four channels");
                measure(plant, &v, &mut run)
            };
            state.step(&mut objective)?;
        }
        run.steps = state.steps();
        run.final_voltages = state.voltages().try_into().expect("four channels");
    } else {
        while plant.time_s() + t <= end {
            measure(plant, &start, &mut run)?;
        }
    }
    Ok(run)
}
