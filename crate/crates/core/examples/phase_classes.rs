//! Which consecutive tooth triples look like the comb center and which
//! like its wings.

use nbfc::comb::{classify_phase_triple, teeth_spectrum, PhaseClass};

fn main() -> nbfc::Result<()> {
    let (index, omega_m) = (50.0, 12.0);
    let spectrum = teeth_spectrum(omega_m, index * omega_m, 80)?;
    let mut runs: Vec<(PhaseClass, i64, i64)> = Vec::new();
    for n in -70..=70 {
        let class = classify_phase_triple(&spectrum, n)?;
        match runs.last_mut() {
            Some((c, _, end)) if *c == class => *end = n,
            _ => runs.push((class, n, n)),
        }
    }
    println!("I_m = {index}: phase class of the triple centered on tooth n");
    for (class, lo, hi) in runs {
        println!("  n in [{lo:>4}, {hi:>4}]  {class:?}");
    }
    Ok(())
}
