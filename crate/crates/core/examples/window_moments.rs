use zenopm::analysis::{ArrivalHistogram, PmResult};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // two-peak record with a flat dark-count floor
    let counts: Vec<f64> = (0..400)
        .map(|i| {
            let t = i as f64 * 0.05 - 5.0;
            1.0 + 800.0 * (-(t - 2.0).powi(2) / 1.2).exp() + 40.0 * (-(t - 9.0).powi(2) / 0.2).exp()
        })
        .collect();
    let raw = ArrivalHistogram::from_counts(-5.0, 0.05, counts)?;

    for fraction in [0.0, 0.005, 0.05, 0.2] {
        let w = raw.window(fraction)?;
        let m = w.moments()?;
        let row = PmResult::from_moments("x", 8, 0.483, &m)?;
        println!(
            "fraction {fraction:<6} bins {:>3}  t_M {:.3} ns  std {:.3} ns  ⟨O⟩ {:+.3}  σ_PM {:.3}",
            w.counts.len(),
            m.mean_ns,
            m.std_ns,
            row.expectation,
            row.sigma_pm
        );
    }
    Ok(())
}
