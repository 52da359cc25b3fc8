//! Periodic steady state at one parameter point: harmonic populations,
//! coherences and the optical observables.

use nbfc::atomfield::{AtomParams, EllipticityAngle, Level, PhasePreset, RelaxationRates, TrichromaticField};
use nbfc::floquet::{steady_state, Element};
use nbfc::observables::{observables_with, Detection};

fn main() -> nbfc::Result<()> {
    let params = AtomParams {
        field: TrichromaticField::symmetric(5.0, PhasePreset::WingLike, 12.0, 0.0)?,
        eps: EllipticityAngle::new(0.1)?,
        omega_l: 6.0,
        rates: RelaxationRates::new(5600.0, 1.0)?,
    };
    let state = steady_state(&params, 2)?;
    println!("order {}, residual {:.2e}, hermiticity defect {:.2e}", state.order(), state.residual(), state.hermiticity_defect());

    println!("DC populations");
    for level in [Level::Minus, Level::Zero, Level::Plus, Level::Excited] {
        println!("  {level:?}: {:.9}", state.population(0, level).re);
    }
    println!("harmonics of the Zeeman coherence rho(-1,+1)");
    for n in state.harmonics() {
        println!("  n = {n:+}: {:.4e}", state.coefficient(n, Element::ZeemanMinusPlus));
    }

    for detection in [Detection::Carrier, Detection::AllTeeth] {
        let r = observables_with(&state, params.eps, &params.field, detection)?;
        println!(
            "{:>9}: A = {:.6e}  B = {:.6e}  D = {:.6e}",
            detection.name(),
            r.absorption,
            r.birefringence,
            r.dichroism
        );
    }
    Ok(())
}
