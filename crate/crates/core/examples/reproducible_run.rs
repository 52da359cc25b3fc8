//! Drives the same run the `nbfc` binary does from a config text, writing
//! a CSV and its metadata sidecar.

use std::io;

use nbfc::cli::{parse_config_text, run, sidecar_path, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = "
        mode = scan
        phase-preset = center
        epsilon = 0.05
        scan = -15, 15
        points = 301
        derivative = true
        channels = absorption, dichroism
    ";
    let dir = std::env::temp_dir().join("nbfc-example");
    let mut cfg = RunConfig::default();
    let pairs = parse_config_text(text)?;
    cfg.apply(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    cfg.output = Some(dir.join("center_scan.csv"));

    let outcome = run(&cfg, &mut io::stdout())?;
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    let meta = std::fs::read_to_string(sidecar_path(cfg.output.as_ref().unwrap()))?;
    print!("{meta}");
    Ok(())
}
