//! Bessel tooth spectrum of an FM laser and the teeth inside a Doppler
//! window.
//!
//! cargo run --example comb_spectrum -- [modulation_index] [omega_m]

use nbfc::comb::{doppler_window, teeth_spectrum, DopplerWindow};

fn main() -> nbfc::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>().expect("numeric argument"));
    let index = args.next().unwrap_or(50.0);
    let omega_m = args.next().unwrap_or(12.0);

    let spectrum = teeth_spectrum(omega_m, index * omega_m, (index + 20.0) as u64)?;
    println!("I_m = {index}, omega_m = {omega_m} kHz, total power {:.12}", spectrum.total_power());
    println!("{:>5} {:>12} {:>12} {:>5}", "n", "offset_khz", "|J|^2", "sign");
    let edge = index as i64;
    for t in spectrum.teeth.iter().filter(|t| t.n.abs() <= 4 || (t.n.abs() - edge).abs() <= 3) {
        println!("{:>5} {:>12.1} {:>12.4e} {:>5}", t.n, t.frequency_offset(omega_m), t.amplitude, t.sign);
    }

    let window = DopplerWindow::new(0.0, 40.0 * omega_m)?;
    let seen = doppler_window(&spectrum, &window);
    println!(
        "a {} kHz Doppler window around the comb center holds {} teeth carrying {:.3} of the power",
        window.width,
        seen.teeth.len(),
        seen.total_power() / spectrum.total_power()
    );
    Ok(())
}
