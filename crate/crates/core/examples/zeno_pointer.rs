// Pointer shift and spread after repeated protective projections, compared
// with the weak-coupling formula.

use std::f64::consts::FRAC_PI_2;
use zenopm::plant::PointerConfig;
use zenopm::polarization::PolarizationState;
use zenopm::zeno::{pointer_moments, propagate, survival_probability, weak_prediction, ZenoConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pointer = PointerConfig { loops: 13, ..PointerConfig::default() };
    let timing = pointer.timing();
    let tau = pointer.tau_tilde();
    println!("τ̃ = {tau:.4}");
    println!("{:>6} {:>8} {:>9} {:>9} {:>9} {:>9}", "θ", "⟨O⟩", "t_M ns", "weak ns", "std ns", "survive");
    for i in 0..=8 {
        let theta = FRAC_PI_2 * i as f64 / 8.0;
        let cfg = ZenoConfig::new(tau, pointer.loops, PolarizationState::from_angles(theta, 0.0))?;
        let state = propagate(&cfg);
        let m = pointer_moments(&state)?;
        let weak = weak_prediction(&cfg);
        println!(
            "{theta:>6.3} {:>8.3} {:>9.3} {:>9.3} {:>9.3} {:>9.4}",
            cfg.state.expectation(),
            timing.to_ns(m.mean),
            timing.to_ns(weak.shift),
            timing.to_ns(m.std),
            survival_probability(&state),
        );
    }
    Ok(())
}
