//! Exact propagation of the joint polarization ⊗ arrival-time pointer state
//! through repeated weak-coupling + projection stages.
//!
//! Times are normalized to the pulse time scale `τ_G`, with the initial
//! pointer amplitude `φ(t̃) = π^{−1/4} exp(−t̃²/2)`. A DGD pass of strength
//! `τ̃` delays the `H` component by `+τ̃/2` and advances `V` by `−τ̃/2`;
//! projecting back onto the polarization analyzer turns every Gaussian term
//! into two shifted copies. The pointer therefore stays a finite sum of
//! shifted unit-width Gaussians, and all moments have closed forms.
//!
//! Weights are complex so that a mismatched analyzer (imperfect
//! stabilization) can be propagated with the same engine; with matched
//! preparation and analyzer they are real and the relative phase `φ` of the
//! state drops out.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polarization::PolarizationState;

/// Centers closer than this are merged into one term.
pub const MERGE_TOLERANCE: f64 = 1e-12;
/// Terms with smaller weight magnitude are dropped.
pub const PRUNE_TOLERANCE: f64 = 1e-15;
/// Smallest norm² for which moments are still reported.
pub const MIN_NORM_SQR: f64 = 1e-30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZenoError {
    #[error("pointer state has been filtered out (norm² = {0:e})")]
    Extinguished(f64),
    #[error("invalid coupling strength τ̃ = {0}")]
    InvalidTau(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTerm {
    pub weight: Complex64,
    pub center: f64,
}

impl GaussianTerm {
    pub fn real(weight: f64, center: f64) -> Self {
        Self { weight: Complex64::new(weight, 0.0), center }
    }
}

/// Unnormalized pointer amplitude `ψ(t̃) = Σ_k w_k π^{−1/4} exp(−(t̃ − c_k)²/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointerState {
    terms: Vec<GaussianTerm>,
}

impl Default for PointerState {
    fn default() -> Self {
        Self::initial()
    }
}

impl PointerState {
    pub fn initial() -> Self {
        Self { terms: vec![GaussianTerm::real(1.0, 0.0)] }
    }

    /// Builds a state from arbitrary terms, merging and pruning them.
    pub fn from_terms(terms: Vec<GaussianTerm>) -> Self {
        let mut s = Self { terms };
        s.canonicalize();
        s
    }

    /// Terms sorted by center.
    pub fn terms(&self) -> &[GaussianTerm] {
        &self.terms
    }

    fn canonicalize(&mut self) {
        self.terms.sort_by(|a, b| a.center.total_cmp(&b.center));
        let mut merged: Vec<GaussianTerm> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if (t.center - last.center).abs() <= MERGE_TOLERANCE => {
                    last.weight += t.weight;
                }
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.weight.norm() >= PRUNE_TOLERANCE);
        self.terms = merged;
    }

    /// Pair sums `Re(w_j* w_k) exp(−(c_j − c_k)²/4)` with their midpoints.
    fn cross_terms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.terms.iter().flat_map(move |a| {
            self.terms.iter().map(move |b| {
                let d = a.center - b.center;
                let w = (a.weight.conj() * b.weight).re * (-0.25 * d * d).exp();
                (w, 0.5 * (a.center + b.center))
            })
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.cross_terms().map(|(w, _)| w).sum::<f64>().max(0.0)
    }

    pub fn amplitude(&self, t: f64) -> Complex64 {
        let k = PI.powf(-0.25);
        self.terms
            .iter()
            .map(|g| g.weight * (k * (-0.5 * (t - g.center).powi(2)).exp()))
            .sum()
    }

    pub fn intensity(&self, t: f64) -> f64 {
        self.amplitude(t).norm_sqr()
    }

    pub fn moments(&self) -> Result<PointerMoments, ZenoError> {
        pointer_moments(self)
    }
}

/// Mean and standard deviation of the normalized pointer intensity, in units of `τ_G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointerMoments {
    pub mean: f64,
    pub std: f64,
}

/// One stage with identical preparation and analyzer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZenoConfig {
    pub tau_tilde: f64,
    pub stages: usize,
    pub state: PolarizationState,
}

impl ZenoConfig {
    pub fn new(tau_tilde: f64, stages: usize, state: PolarizationState) -> Result<Self, ZenoError> {
        if !(tau_tilde.is_finite() && tau_tilde > 0.0) {
            return Err(ZenoError::InvalidTau(tau_tilde));
        }
        Ok(Self { tau_tilde, stages, state })
    }

    /// True when the DGD per stage is shorter than the pulse time scale.
    pub fn is_weak(&self) -> bool {
        self.tau_tilde < 1.0
    }
}

/// Conversion between physical times and the normalized pointer time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseTiming {
    /// Intensity full width at half maximum of the input pulse, ns.
    pub fwhm_ns: f64,
}

impl PulseTiming {
    pub fn new(fwhm_ns: f64) -> Self {
        Self { fwhm_ns }
    }

    /// `τ_G` such that the unit-width amplitude has the configured intensity FWHM.
    pub fn tau_g_ns(&self) -> f64 {
        self.fwhm_ns / (2.0 * LN_2.sqrt())
    }

    pub fn normalize(&self, t_ns: f64) -> f64 {
        t_ns / self.tau_g_ns()
    }

    pub fn to_ns(&self, t_tilde: f64) -> f64 {
        t_tilde * self.tau_g_ns()
    }
}

/// One DGD pass followed by projection onto the analyzer state.
///
/// Each term `(w, c)` becomes `(w ⟨χ|H⟩⟨H|ψ⟩, c + τ̃/2)` and
/// `(w ⟨χ|V⟩⟨V|ψ⟩, c − τ̃/2)` for preparation `ψ` and analyzer `χ`.
pub fn zeno_stage_projected(
    p: &PointerState,
    prepared: &PolarizationState,
    analyzer: &PolarizationState,
    tau_tilde: f64,
) -> PointerState {
    let (ph, pv) = prepared.amplitudes();
    let (ah, av) = analyzer.amplitudes();
    let slow = ah.conj() * ph;
    let fast = av.conj() * pv;
    let half = 0.5 * tau_tilde;
    let mut terms = Vec::with_capacity(2 * p.terms.len());
    for t in &p.terms {
        terms.push(GaussianTerm { weight: t.weight * slow, center: t.center + half });
        terms.push(GaussianTerm { weight: t.weight * fast, center: t.center - half });
    }
    PointerState::from_terms(terms)
}

/// One Zeno stage with the analyzer matched to the prepared state.
///
/// For `|ψ0⟩ = cos θ|H⟩ + e^{iφ} sin θ|V⟩` the split weights are `cos²θ` and
/// `sin²θ`; they are formed from moduli so no trace of `φ` survives.
pub fn zeno_stage_exact(p: &PointerState, cfg: &ZenoConfig) -> PointerState {
    let (h, v) = cfg.state.amplitudes();
    let slow = Complex64::new(h.norm_sqr(), 0.0);
    let fast = Complex64::new(v.norm_sqr(), 0.0);
    let half = 0.5 * cfg.tau_tilde;
    let mut terms = Vec::with_capacity(2 * p.terms.len());
    for t in &p.terms {
        terms.push(GaussianTerm { weight: t.weight * slow, center: t.center + half });
        terms.push(GaussianTerm { weight: t.weight * fast, center: t.center - half });
    }
    PointerState::from_terms(terms)
}

pub fn propagate(cfg: &ZenoConfig) -> PointerState {
    (0..cfg.stages).fold(PointerState::initial(), |p, _| zeno_stage_exact(&p, cfg))
}

pub fn propagate_projected(
    prepared: &PolarizationState,
    analyzer: &PolarizationState,
    tau_tilde: f64,
    stages: usize,
) -> PointerState {
    (0..stages).fold(PointerState::initial(), |p, _| {
        zeno_stage_projected(&p, prepared, analyzer, tau_tilde)
    })
}

/// Probability that the photon survives all projections (the pointer norm²).
pub fn survival_probability(p: &PointerState) -> f64 {
    p.norm_sqr()
}

pub fn pointer_moments(p: &PointerState) -> Result<PointerMoments, ZenoError> {
    let (mut n, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (w, mid) in p.cross_terms() {
        n += w;
        m1 += w * mid;
        // each cross term is a Gaussian of variance 1/2 about its midpoint
        m2 += w * (mid * mid + 0.5);
    }
    if n < MIN_NORM_SQR {
        return Err(ZenoError::Extinguished(n));
    }
    let mean = m1 / n;
    let var = (m2 / n - mean * mean).max(0.0);
    Ok(PointerMoments { mean, std: var.sqrt() })
}

/// Weak-coupling estimate of the pointer shift and survival probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakPrediction {
    pub shift: f64,
    pub survival: f64,
}

/// `shift = ℓ τ̃ ⟨Ô⟩ / 2`, `survival = (1 − τ̃² ΔO² / 8)^ℓ` with `ΔO² = 1 − ⟨Ô⟩²`.
pub fn weak_prediction(cfg: &ZenoConfig) -> WeakPrediction {
    let o = cfg.state.expectation();
    let delta_o_sqr = (1.0 - o * o).max(0.0);
    let per_stage = 1.0 - cfg.tau_tilde * cfg.tau_tilde * delta_o_sqr / 8.0;
    let stages = cfg.stages as f64;
    WeakPrediction {
        shift: stages * cfg.tau_tilde * o / 2.0,
        survival: per_stage.powi(cfg.stages as i32),
    }
}

/// Exact sampler for the normalized intensity `|ψ(t̃)|² / norm²`.
///
/// Draws from the all-positive envelope `(Σ_k |w_k| g_k(t̃))²`, which is itself
/// a Gaussian mixture, and accepts with the ratio of the true intensity to
/// the envelope.
#[derive(Debug, Clone)]
pub struct PointerSampler {
    state: PointerState,
    abs_state: PointerState,
    cumulative: Vec<f64>,
    midpoints: Vec<f64>,
}

impl PointerSampler {
    pub fn new(state: &PointerState) -> Result<Self, ZenoError> {
        let n = state.norm_sqr();
        if n < MIN_NORM_SQR {
            return Err(ZenoError::Extinguished(n));
        }
        let abs_state = PointerState {
            terms: state
                .terms
                .iter()
                .map(|t| GaussianTerm::real(t.weight.norm(), t.center))
                .collect(),
        };
        let mut cumulative = Vec::new();
        let mut midpoints = Vec::new();
        let mut acc = 0.0;
        for (w, mid) in abs_state.cross_terms() {
            acc += w;
            cumulative.push(acc);
            midpoints.push(mid);
        }
        Ok(Self { state: state.clone(), abs_state, cumulative, midpoints })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = *self.cumulative.last().expect("sampler has at least one term");
        loop {
            let u = rng.random::<f64>() * total;
            let idx = self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1);
            let z: f64 = StandardNormal.sample(rng);
            let t = self.midpoints[idx] + z * std::f64::consts::FRAC_1_SQRT_2;
            let envelope = self.abs_state.intensity(t);
            if envelope <= 0.0 {
                continue;
            }
            let accept = self.state.intensity(t) / envelope;
            if rng.random::<f64>() < accept {
                return t;
            }
        }
    }
}
