//! Birefringence and dichroism versus ellipticity on and off resonance.

use nbfc::atomfield::{EllipticityAngle, PhasePreset, RelaxationRates, TrichromaticField};
use nbfc::observables::{scan_larmor, Detection, ScanGrid};

fn main() -> nbfc::Result<()> {
    let rates = RelaxationRates::new(5600.0, 1.0)?;
    let grid = ScanGrid::new(-20.0, 20.0, 9)?;
    for delta in [0.0, 5600.0] {
        let field = TrichromaticField::symmetric(5.0, PhasePreset::WingLike, 12.0, delta)?;
        println!("delta = {delta} kHz");
        println!("{:>7} {:>8} {:>13} {:>13} {:>13}", "eps", "omega_L", "A", "B", "D");
        for eps in [-0.1, 0.0, 0.1] {
            let scan = scan_larmor(&field, EllipticityAngle::new(eps)?, &rates, 2, &grid, Detection::Carrier)?;
            for (w, r) in scan.grid.iter().zip(&scan.responses).step_by(2) {
                println!(
                    "{eps:>7} {w:>8} {:>13.5e} {:>13.5e} {:>13.5e}",
                    r.absorption, r.birefringence, r.dichroism
                );
            }
        }
    }
    Ok(())
}
