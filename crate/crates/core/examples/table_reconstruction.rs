// Simulated arrival records for five prepared states after eight loops,
// reduced to expectation values and uncertainties.

use zenopm::analysis::{analyze_arrivals, HistogramConfig};
use zenopm::plant::{Plant, PlantConfig, PointerConfig, StateAngles};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pointer = PointerConfig { loops: 8, ..PointerConfig::default() };
    println!("{:>6} {:>8} {:>8} {:>8} {:>7} {:>7} {:>6}", "set", "t_M ns", "std ns", "⟨O⟩", "σ_PM", "σ_SM", "R");
    for (k, set) in [-1.0, -0.5, 0.0, 0.5, 1.0f64].into_iter().enumerate() {
        let prepared = StateAngles { theta_rad: set.acos() / 2.0, phi_rad: 0.0 };
        let mut plant = Plant::new(PlantConfig { pointer, prepared, seed: 100 + k as u64, ..PlantConfig::default() })?;
        let v = plant.compensation_voltages();
        let arrivals = plant.arrival_record(&v, 1.0)?;
        let row = analyze_arrivals("", &arrivals, pointer.loops, pointer.tau_loop_ns, &HistogramConfig::default())?;
        println!(
            "{set:>6.2} {:>8.3} {:>8.3} {:>+8.3} {:>7.3} {:>7.3} {:>6.2}",
            row.mean_ns, row.std_ns, row.expectation, row.sigma_pm, row.sigma_sm, row.ratio
        );
    }
    Ok(())
}
