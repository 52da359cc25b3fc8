//! Larmor scans for the two phase classes, lock-in detected, with the
//! feature heights at the expected resonances.

use nbfc::atomfield::{EllipticityAngle, PhasePreset, RelaxationRates, TrichromaticField};
use nbfc::observables::{feature_extract, lockin_derivative, scan_larmor, Channel, Detection, ScanGrid, Trace};

fn main() -> nbfc::Result<()> {
    let rates = RelaxationRates::new(5600.0, 1.0)?;
    let grid = ScanGrid::new(-20.0, 20.0, 801)?;
    let expected = [-12.0, -6.0, 0.0, 6.0, 12.0];

    for preset in [PhasePreset::Center, PhasePreset::WingLike] {
        let field = TrichromaticField::symmetric(5.0, preset, 12.0, 0.0)?;
        for detection in [Detection::Carrier, Detection::AllTeeth] {
            let scan = scan_larmor(&field, EllipticityAngle::new(0.0)?, &rates, 2, &grid, detection)?;
            let scan = lockin_derivative(scan)?;
            let features = feature_extract(&scan, Trace::Derivative(Channel::Absorption), &expected)?;
            println!("{preset:?}, {} detection", detection.name());
            for (x, f) in expected.iter().zip(features) {
                println!("  expected {x:+5.1}: found {:+7.3}, height {:+.3e}", f.position, f.amplitude);
            }
        }
    }
    Ok(())
}
