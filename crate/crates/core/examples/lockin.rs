//! Lock-in detection of a Lorentzian: the derivative turns the peak into a
//! dispersive shape crossing zero at the line center.

use nbfc::observables::negative_derivative;

fn main() -> nbfc::Result<()> {
    let (center, width) = (2.0, 1.5);
    let grid: Vec<f64> = (0..=40).map(|i| -8.0 + 0.5 * i as f64).collect();
    let line: Vec<f64> = grid.iter().map(|x| 1.0 / (1.0 + ((x - center) / width).powi(2))).collect();
    let d = negative_derivative(&grid, &line)?;
    for ((x, f), g) in grid.iter().zip(&line).zip(&d) {
        let bar = "#".repeat((20.0 * g.abs()) as usize);
        println!("{x:>6.1} {f:>8.4} {g:>+9.4} {}{bar}", if *g < 0.0 { "-" } else { "+" });
    }
    Ok(())
}
