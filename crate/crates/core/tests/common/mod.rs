//! Shared oracles and reference data for the integration tests.

#![allow(dead_code)]

use num_complex::Complex64;

/// Moments of a pointer computed on a time grid, in units of the pulse time scale.
#[derive(Debug, Clone, Copy)]
pub struct GridMoments {
    pub norm_sqr: f64,
    pub mean: f64,
    pub std: f64,
}

/// Brute-force pointer propagation on a uniform grid.
///
/// The polarization-resolved amplitude is stored as two complex arrays. Each
/// stage delays the H array by `τ̃/2` and advances the V array by `τ̃/2` (an
/// exact shift of `m` samples), then projects onto `analyzer` and re-prepares
/// `prepared`. Nothing here shares code with the closed-form propagation.
pub fn grid_propagate(
    prepared: (Complex64, Complex64),
    analyzer: (Complex64, Complex64),
    tau_tilde: f64,
    stages: usize,
    samples_per_half_delay: usize,
) -> GridMoments {
    let m = samples_per_half_delay;
    let dt = tau_tilde / (2.0 * m as f64);
    let reach = 0.5 * stages as f64 * tau_tilde + 8.0;
    let half_n = (reach / dt).ceil() as usize;
    let n = 2 * half_n + 1;
    let t = |i: usize| (i as f64 - half_n as f64) * dt;
    let norm = std::f64::consts::PI.powf(-0.25);
    let mut pointer: Vec<Complex64> =
        (0..n).map(|i| Complex64::new(norm * (-0.5 * t(i) * t(i)).exp(), 0.0)).collect();
    let mut h = vec![Complex64::new(0.0, 0.0); n];
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    for _ in 0..stages {
        h.iter_mut().chain(v.iter_mut()).for_each(|z| *z = Complex64::new(0.0, 0.0));
        for i in 0..n {
            if i + m < n {
                h[i + m] = prepared.0 * pointer[i];
            }
            if i >= m {
                v[i - m] = prepared.1 * pointer[i];
            }
        }
        for i in 0..n {
            pointer[i] = analyzer.0.conj() * h[i] + analyzer.1.conj() * v[i];
        }
    }
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (i, a) in pointer.iter().enumerate() {
        let p = a.norm_sqr() * dt;
        s0 += p;
        s1 += p * t(i);
        s2 += p * t(i) * t(i);
    }
    let mean = s1 / s0;
    GridMoments { norm_sqr: s0, mean, std: (s2 / s0 - mean * mean).max(0.0).sqrt() }
}

pub fn amplitudes(theta: f64, phi: f64) -> (Complex64, Complex64) {
    (Complex64::new(theta.cos(), 0.0), Complex64::from_polar(theta.sin(), phi))
}

/// One printed row of the arrival-time table: mean delay and spread (ns),
/// then the printed expectation, σ_PM, σ_SM and R.
pub struct TableRow {
    pub label: &'static str,
    pub loops: usize,
    pub mean_ns: f64,
    pub std_ns: f64,
    pub expectation: f64,
    pub sigma_pm: f64,
    pub sigma_sm: f64,
    pub ratio: f64,
}

pub const TAU_LOOP_NS: f64 = 0.483;

#[allow(clippy::too_many_arguments)]
const fn row(
    label: &'static str,
    loops: usize,
    mean_ns: f64,
    std_ns: f64,
    expectation: f64,
    sigma_pm: f64,
    sigma_sm: f64,
    ratio: f64,
) -> TableRow {
    TableRow { label, loops, mean_ns, std_ns, expectation, sigma_pm, sigma_sm, ratio }
}

pub const PUBLISHED_TABLE: [TableRow; 10] = [
    row("a", 8, 0.00, 0.82, -1.00, 0.42, 0.0, 0.0),
    row("b", 8, 0.99, 0.89, -0.49, 0.46, 0.87, 1.9),
    row("c", 8, 1.95, 0.92, 0.01, 0.47, 1.00, 2.1),
    row("d", 8, 2.90, 0.88, 0.50, 0.46, 0.87, 1.9),
    row("e", 8, 3.87, 0.81, 1.00, 0.42, 0.0, 0.0),
    row("f", 13, 0.00, 0.84, -1.00, 0.27, 0.0, 0.0),
    row("g", 13, 1.67, 0.97, -0.47, 0.31, 0.88, 2.8),
    row("h", 13, 3.13, 1.00, 0.00, 0.32, 1.00, 3.1),
    row("i", 13, 4.65, 0.95, 0.48, 0.30, 0.88, 2.9),
    row("j", 13, 6.25, 0.83, 0.99, 0.26, 0.14, 0.5),
];
