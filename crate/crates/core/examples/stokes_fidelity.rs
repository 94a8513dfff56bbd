// Stokes vectors, sphere rotations and the fidelity between two outputs.

use std::f64::consts::FRAC_PI_2;
use zenopm::polarization::{fidelity, PolRotation, PolarizationState, StokesVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let diagonal = PolarizationState::diagonal().to_stokes();
    println!("diagonal        {:.3?}", diagonal.to_array());

    let quarter = PolRotation::about_s3(FRAC_PI_2);
    let turned = diagonal.rotated(&quarter);
    println!("after S3 turn   {:.3?}", turned.to_array());

    for angle in [0.0, 0.05, 0.14, 0.3f64] {
        let nearby = StokesVector::new(angle.cos(), angle.sin(), 0.0);
        let f = fidelity(&StokesVector::new(1.0, 0.0, 0.0), &nearby)?;
        println!("{angle:>5.2} rad apart  F = {f:.5}");
    }
    Ok(())
}
