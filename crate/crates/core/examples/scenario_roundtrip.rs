// Loads a bundled scenario, shrinks it, runs it into a temporary directory
// and verifies the manifest against its own numbers.

use zenopm::scenario::{self, Expectations, RunOptions, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut s = Scenario::bundled("table2_8loops")?;
    s.duration_s = 0.5;
    s.zeno.arms.truncate(2);
    let text = s.to_toml_string();
    assert_eq!(Scenario::from_toml_str(&text)?, s);

    let out_dir = std::env::temp_dir().join(format!("zenopm-roundtrip-{}", std::process::id()));
    let manifest = scenario::run_scenario(&s, &RunOptions { out_dir: out_dir.clone(), seed: None, full: false })?;
    println!("manifest checksum {}", manifest.checksum());
    for f in &manifest.files {
        println!("  {:<20} {}", f.path, &f.sha256[..16]);
    }

    let a_mean = manifest.summary["a.mean_ns"];
    let expectations = Expectations::from_toml_str(&format!(
        "scenario = \"{}\"\n[[check]]\nkey = \"a.mean_ns\"\nvalue = {a_mean}\ntolerance = 1e-9\n",
        s.name
    ))?;
    let report = scenario::verify(&out_dir.join(scenario::MANIFEST_FILE), &expectations);
    println!("{report}");
    std::fs::remove_dir_all(&out_dir)?;
    Ok(())
}
