// One minute of the drifting plant with and without the SPGD loop.

use zenopm::analysis::{count_stability, fidelity_stats_against};
use zenopm::plant::{Plant, PlantConfig};
use zenopm::spgd::{run_stabilized, SpgdConfig, StabilizationOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plant_config = PlantConfig { seed: 21, ..PlantConfig::default() };
    let budget = Plant::new(plant_config.clone())?.loss_budget();
    println!(
        "{} loops: attenuate {:.1} dB for {:.0} counts/s",
        budget.loops, budget.attenuation_db, budget.count_rate_hz
    );

    for stabilize in [true, false] {
        let mut plant = Plant::new(plant_config.clone())?;
        let spgd = SpgdConfig { seed: 22, ..SpgdConfig::default() };
        let run = run_stabilized(&mut plant, &spgd, &StabilizationOptions::new(60.0, stabilize))?;
        let samples: Vec<(f64, u64)> = run.trace.iter().map(|s| (s.time_s, s.counts)).collect();
        let counts = count_stability(&samples, 10.0)?;
        let stokes: Vec<_> = run.stokes.iter().map(|s| s.stokes).collect();
        let f = fidelity_stats_against(&stokes, &run.target)?;
        println!(
            "{:<4} std/mean {:.4}  mean F {:.4}  min F {:.4}",
            if stabilize { "on" } else { "off" },
            counts.std_over_mean,
            f.mean,
            f.min
        );
    }
    Ok(())
}
