//! How the observables converge with the number of retained harmonics.

use nbfc::atomfield::{AtomParams, EllipticityAngle, PhasePreset, RelaxationRates, TrichromaticField};
use nbfc::floquet::truncation_check;
use nbfc::observables::Detection;

fn main() -> nbfc::Result<()> {
    for omega_l in [0.0, 6.0, 12.0] {
        let params = AtomParams {
            field: TrichromaticField::symmetric(5.0, PhasePreset::WingLike, 12.0, 0.0)?,
            eps: EllipticityAngle::new(0.1)?,
            omega_l,
            rates: RelaxationRates::new(5600.0, 1.0)?,
        };
        print!("omega_L = {omega_l:>4}:");
        for order in 1..=4 {
            for detection in [Detection::Carrier, Detection::AllTeeth] {
                let r = truncation_check(&params, order, 1e-6, detection)?;
                print!("  N={order} {}: {:.1e}", &detection.name()[..3], r.max_relative_difference);
            }
        }
        println!();
    }
    Ok(())
}
