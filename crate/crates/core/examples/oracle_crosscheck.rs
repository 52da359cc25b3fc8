//! Time-domain Lindblad integration against the Floquet solution.
//!
//! Runs at a reduced excited-state width by default so it finishes in a
//! fraction of a second; pass `5600` for the full linewidth.

use nbfc::atomfield::{AtomParams, EllipticityAngle, PhasePreset, RelaxationRates, TrichromaticField};
use nbfc::oracle::{compare_with_floquet, IntegrationOptions, SNAPSHOT_ELEMENTS};

fn main() -> nbfc::Result<()> {
    let gamma: f64 = std::env::args().nth(1).map(|a| a.parse().expect("numeric width")).unwrap_or(50.0);
    let order = if gamma < 500.0 { 6 } else { 2 };
    let params = AtomParams {
        field: TrichromaticField::symmetric(5.0, PhasePreset::WingLike, 12.0, 0.0)?,
        eps: EllipticityAngle::new(0.1)?,
        omega_l: 3.0,
        rates: RelaxationRates::new(gamma, 1.0)?,
    };
    let opts = IntegrationOptions::for_params(&params);
    println!("dt = {:.3e}, t_end = {}, Floquet order {order}", opts.dt, opts.t_end);

    let cmp = compare_with_floquet(&params, order, &opts)?;
    for ((el, (o, f)), d) in SNAPSHOT_ELEMENTS.iter().zip(cmp.oracle.iter().zip(&cmp.floquet)).zip(cmp.deviations()) {
        println!("  {:>16} oracle {:+.6e}{:+.6e}i  floquet {:+.6e}{:+.6e}i  |dev| {d:.1e}", format!("{el:?}"), o.re, o.im, f.re, f.im);
    }
    println!(
        "trace drift {:.1e}, periodicity defect {:.1e}: {}",
        cmp.max_trace_drift,
        cmp.periodicity_defect,
        if cmp.pass() { "agree" } else { "DISAGREE" }
    );
    Ok(())
}
