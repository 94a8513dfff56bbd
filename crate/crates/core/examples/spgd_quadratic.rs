use std::convert::Infallible;
use zenopm::spgd::{SpgdConfig, SpgdState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let peak = [30.0, 55.0, 80.0, 105.0];
    let config = SpgdConfig { gain: 0.2, seed: 1, ..SpgdConfig::default() };
    let mut spgd = SpgdState::new(config, &[20.0, 70.0, 60.0, 120.0])?;
    let mut objective = |v: &[f64]| -> Result<f64, Infallible> {
        Ok(1000.0 - v.iter().zip(&peak).map(|(x, p)| (x - p).powi(2)).sum::<f64>())
    };

    for step in 0..=400 {
        if step % 50 == 0 {
            let v = spgd.voltages();
            println!("{step:>4}  [{:7.2} {:7.2} {:7.2} {:7.2}]", v[0], v[1], v[2], v[3]);
        }
        spgd.step(&mut objective)?;
    }
    Ok(())
}
