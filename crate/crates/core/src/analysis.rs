//! Reduction of arrival-time records and polarization logs: histogram
//! windowing and moments, protective-measurement estimates, fidelity and
//! count-stability statistics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::Arrival;
use crate::polarization::{fidelity, PolarizationError, StokesVector};

/// Bins below this fraction of the peak end the analysis window.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.005;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("histogram has no counts")]
    Empty,
    #[error("loop count must be positive")]
    ZeroLoops,
    #[error("loop delay must be positive, got {0}")]
    InvalidDelay(f64),
    #[error("need at least {0} samples")]
    TooFewSamples(usize),
    #[error("mean Stokes vector has zero length")]
    DegenerateScatter,
    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),
    #[error(transparent)]
    Polarization(#[from] PolarizationError),
}

/// Counts on a uniform grid; bin `i` is centered at `origin_ns + i·bin_ns`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalHistogram {
    pub origin_ns: f64,
    pub bin_ns: f64,
    pub counts: Vec<f64>,
}

impl ArrivalHistogram {
    pub fn from_counts(origin_ns: f64, bin_ns: f64, counts: Vec<f64>) -> Result<Self, AnalysisError> {
        if !(bin_ns > 0.0 && bin_ns.is_finite() && origin_ns.is_finite()) {
            return Err(AnalysisError::InvalidHistogram(format!("bin width {bin_ns}")));
        }
        if counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(AnalysisError::InvalidHistogram("counts must be finite and >= 0".into()));
        }
        Ok(Self { origin_ns, bin_ns, counts })
    }

    /// Bins arrival times over `[start_ns, end_ns]`; times outside are dropped.
    pub fn from_arrivals(arrivals: &[Arrival], start_ns: f64, end_ns: f64, bin_ns: f64) -> Result<Self, AnalysisError> {
        if !(end_ns > start_ns) {
            return Err(AnalysisError::InvalidHistogram("empty time range".into()));
        }
        let n = ((end_ns - start_ns) / bin_ns).round() as usize + 1;
        let mut h = Self::from_counts(start_ns, bin_ns, vec![0.0; n])?;
        for a in arrivals {
            let i = ((a.time_ns - start_ns) / bin_ns).round();
            if i >= 0.0 && (i as usize) < n {
                h.counts[i as usize] += 1.0;
            }
        }
        Ok(h)
    }

    pub fn center(&self, i: usize) -> f64 {
        self.origin_ns + i as f64 * self.bin_ns
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn peak_index(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &c) in self.counts.iter().enumerate() {
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((i, c));
            }
        }
        best.filter(|&(_, c)| c > 0.0).map(|(i, _)| i)
    }

    /// Contiguous run of bins around the peak; each side stops before the
    /// first bin below `fraction·peak`. Ties for the peak go to the earlier bin.
    pub fn window(&self, fraction: f64) -> Result<Self, AnalysisError> {
        let peak = self.peak_index().ok_or(AnalysisError::Empty)?;
        let threshold = self.counts[peak] * fraction;
        let mut lo = peak;
        while lo > 0 && self.counts[lo - 1] >= threshold {
            lo -= 1;
        }
        let mut hi = peak;
        while hi + 1 < self.counts.len() && self.counts[hi + 1] >= threshold {
            hi += 1;
        }
        Ok(Self {
            origin_ns: self.center(lo),
            bin_ns: self.bin_ns,
            counts: self.counts[lo..=hi].to_vec(),
        })
    }

    pub fn normalized(&self) -> Result<Vec<f64>, AnalysisError> {
        let total = self.total();
        if total <= 0.0 {
            return Err(AnalysisError::Empty);
        }
        Ok(self.counts.iter().map(|c| c / total).collect())
    }

    /// Mean and standard deviation of the arrival time over bin centers.
    pub fn moments(&self) -> Result<ArrivalMoments, AnalysisError> {
        let p = self.normalized()?;
        let mean: f64 = p.iter().enumerate().map(|(i, w)| w * self.center(i)).sum();
        // second moment about the mean avoids cancellation at large offsets
        let var: f64 = p.iter().enumerate().map(|(i, w)| w * (self.center(i) - mean).powi(2)).sum();
        Ok(ArrivalMoments { mean_ns: mean, std_ns: var.max(0.0).sqrt(), counts: self.total() })
    }

    /// Splits every bin into `k` equal bins sharing its counts.
    pub fn subdivide(&self, k: usize) -> Self {
        let k = k.max(1);
        let w = self.bin_ns / k as f64;
        let counts = self.counts.iter().flat_map(|&c| std::iter::repeat_n(c / k as f64, k)).collect();
        Self { origin_ns: self.origin_ns - 0.5 * self.bin_ns + 0.5 * w, bin_ns: w, counts }
    }

    /// Merges runs of `k` bins; a short trailing run is kept.
    pub fn rebin(&self, k: usize) -> Self {
        let k = k.max(1);
        let counts = self.counts.chunks(k).map(|c| c.iter().sum()).collect();
        let first_edge = self.origin_ns - 0.5 * self.bin_ns;
        let w = self.bin_ns * k as f64;
        Self { origin_ns: first_edge + 0.5 * w, bin_ns: w, counts }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalMoments {
    pub mean_ns: f64,
    pub std_ns: f64,
    pub counts: f64,
}

fn check_loops(loops: usize, tau_loop_ns: f64) -> Result<f64, AnalysisError> {
    if loops == 0 {
        return Err(AnalysisError::ZeroLoops);
    }
    if !(tau_loop_ns > 0.0 && tau_loop_ns.is_finite()) {
        return Err(AnalysisError::InvalidDelay(tau_loop_ns));
    }
    Ok(loops as f64 * tau_loop_ns)
}

/// Expectation value from the mean delay relative to the fast-axis arrival.
pub fn expectation(mean_ns: f64, loops: usize, tau_loop_ns: f64) -> Result<f64, AnalysisError> {
    Ok(2.0 * mean_ns / check_loops(loops, tau_loop_ns)? - 1.0)
}

/// Protective-measurement uncertainty from the pointer spread.
pub fn sigma_pm(std_ns: f64, loops: usize, tau_loop_ns: f64) -> Result<f64, AnalysisError> {
    Ok(2.0 * std_ns / check_loops(loops, tau_loop_ns)?)
}

/// Strong-measurement uncertainty `√(1 − ⟨O⟩²)`; `|⟨O⟩| > 1` is clipped.
pub fn sigma_sm(expectation: f64) -> f64 {
    if expectation.abs() > 1.0 {
        log::warn!("expectation {expectation:.4} outside [-1, 1]; clipped");
    }
    let o = expectation.clamp(-1.0, 1.0);
    (1.0 - o * o).sqrt()
}

/// `σ_SM / σ_PM`, defined as 0 when both vanish.
pub fn relative_performance(sigma_sm: f64, sigma_pm: f64) -> f64 {
    if sigma_pm == 0.0 {
        if sigma_sm == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        sigma_sm / sigma_pm
    }
}

/// One row of the protective-measurement table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmResult {
    pub label: String,
    pub loops: usize,
    pub counts: f64,
    pub mean_ns: f64,
    pub std_ns: f64,
    pub expectation: f64,
    pub sigma_pm: f64,
    pub sigma_sm: f64,
    pub ratio: f64,
}

impl PmResult {
    /// Derives every estimate from the pointer moments.
    pub fn from_moments(
        label: impl Into<String>,
        loops: usize,
        tau_loop_ns: f64,
        m: &ArrivalMoments,
    ) -> Result<Self, AnalysisError> {
        let o = expectation(m.mean_ns, loops, tau_loop_ns)?;
        let spm = sigma_pm(m.std_ns, loops, tau_loop_ns)?;
        let ssm = sigma_sm(o);
        Ok(Self {
            label: label.into(),
            loops,
            counts: m.counts,
            mean_ns: m.mean_ns,
            std_ns: m.std_ns,
            expectation: o,
            sigma_pm: spm,
            sigma_sm: ssm,
            ratio: relative_performance(ssm, spm),
        })
    }
}

/// Histogram settings used to reduce an arrival record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramConfig {
    pub start_ns: f64,
    pub end_ns: f64,
    pub bin_ns: f64,
    pub window_fraction: f64,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self { start_ns: -20.0, end_ns: 30.0, bin_ns: 0.02, window_fraction: DEFAULT_WINDOW_FRACTION }
    }
}

pub fn analyze_arrivals(
    label: impl Into<String>,
    arrivals: &[Arrival],
    loops: usize,
    tau_loop_ns: f64,
    config: &HistogramConfig,
) -> Result<PmResult, AnalysisError> {
    let h = ArrivalHistogram::from_arrivals(arrivals, config.start_ns, config.end_ns, config.bin_ns)?;
    let m = h.window(config.window_fraction)?.moments()?;
    PmResult::from_moments(label, loops, tau_loop_ns, &m)
}

/// Normalized mean of a set of Stokes vectors.
pub fn mean_stokes(samples: &[StokesVector]) -> Option<StokesVector> {
    let sum = samples.iter().fold(StokesVector::new(0.0, 0.0, 0.0), |acc, s| acc.add(s));
    sum.normalized()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityStats {
    pub samples: usize,
    pub mean: f64,
    pub min: f64,
    pub fraction_above_099: f64,
    pub fraction_above_098: f64,
    /// Lower bin edges and counts over `[0.9, 1]` in steps of 0.005;
    /// samples below 0.9 land in the first bin.
    pub histogram: Vec<(f64, u64)>,
}

/// Fidelity of each sample to the normalized mean of all samples.
pub fn fidelity_stats(samples: &[StokesVector]) -> Result<FidelityStats, AnalysisError> {
    if samples.len() < 2 {
        return Err(AnalysisError::TooFewSamples(2));
    }
    let mean = mean_stokes(samples).ok_or(AnalysisError::DegenerateScatter)?;
    fidelity_stats_against(samples, &mean)
}

/// Fidelity of each sample to a fixed reference, such as the target state.
pub fn fidelity_stats_against(samples: &[StokesVector], reference: &StokesVector) -> Result<FidelityStats, AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let f = samples.iter().map(|s| fidelity(s, reference)).collect::<Result<Vec<_>, _>>()?;
    let n = f.len() as f64;
    let frac = |x: f64| f.iter().filter(|&&v| v >= x).count() as f64 / n;
    let step = 0.005;
    let bins = 20;
    let mut histogram: Vec<(f64, u64)> = (0..bins).map(|i| (0.9 + i as f64 * step, 0)).collect();
    for &v in &f {
        let i = (((v - 0.9) / step).floor().max(0.0) as usize).min(bins - 1);
        histogram[i].1 += 1;
    }
    Ok(FidelityStats {
        samples: f.len(),
        mean: f.iter().sum::<f64>() / n,
        min: f.iter().copied().fold(f64::INFINITY, f64::min),
        fraction_above_099: frac(0.99),
        fraction_above_098: frac(0.98),
        histogram,
    })
}

/// Sums `(time, counts)` samples into consecutive bins of `bin_s`; a trailing
/// partial bin is dropped.
pub fn bin_counts(samples: &[(f64, u64)], bin_s: f64) -> Vec<f64> {
    let Some(&(t0, _)) = samples.first() else { return Vec::new() };
    let mut bins: Vec<f64> = Vec::new();
    let mut filled: Vec<usize> = Vec::new();
    for &(t, c) in samples {
        let i = ((t - t0) / bin_s + 1e-9).floor() as usize;
        if bins.len() <= i {
            bins.resize(i + 1, 0.0);
            filled.resize(i + 1, 0);
        }
        bins[i] += c as f64;
        filled[i] += 1;
    }
    let full = filled.iter().copied().max().unwrap_or(0);
    while filled.last().is_some_and(|&n| n < full) {
        filled.pop();
        bins.pop();
    }
    bins
}

/// Sample standard deviation over mean.
pub fn std_over_mean(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return None;
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some(var.sqrt() / mean)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountStability {
    pub bin_s: f64,
    pub bins: Vec<f64>,
    pub mean: f64,
    pub std_over_mean: f64,
}

pub fn count_stability(samples: &[(f64, u64)], bin_s: f64) -> Result<CountStability, AnalysisError> {
    let bins = bin_counts(samples, bin_s);
    let ratio = std_over_mean(&bins).ok_or(AnalysisError::Empty)?;
    let mean = bins.iter().sum::<f64>() / bins.len() as f64;
    Ok(CountStability { bin_s, bins, mean, std_over_mean: ratio })
}
