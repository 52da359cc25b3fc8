//! Absorption, circular birefringence and circular dichroism from the
//! optical coherences, Larmor scans, and the lock-in derivative transform.

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::atomfield::{AtomParams, EllipticityAngle, RelaxationRates, TrichromaticField};
use crate::error::{Error, Result};
use crate::floquet::{steady_state, Element, HarmonicState};

/// Smallest allowed distance of |ε| from π/4.
pub const ELLIPTICITY_GUARD: f64 = 1e-6;

/// Half-width of the window searched around an expected resonance (kHz).
pub const FEATURE_WINDOW: f64 = 1.5;

/// Fraction of failed points above which a scan is aborted.
pub const MAX_FAILED_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OpticalResponse {
    pub absorption: f64,
    pub birefringence: f64,
    pub dichroism: f64,
}

impl OpticalResponse {
    pub const NAN: OpticalResponse = OpticalResponse {
        absorption: f64::NAN,
        birefringence: f64::NAN,
        dichroism: f64::NAN,
    };

    pub fn channels(&self) -> [f64; 3] {
        [self.absorption, self.birefringence, self.dichroism]
    }

    pub fn get(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Absorption => self.absorption,
            Channel::Birefringence => self.birefringence,
            Channel::Dichroism => self.dichroism,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.channels().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Absorption,
    Birefringence,
    Dichroism,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Absorption, Channel::Birefringence, Channel::Dichroism];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Absorption => "absorption",
            Channel::Birefringence => "birefringence",
            Channel::Dichroism => "dichroism",
        }
    }
}

/// A scan column: either a response channel or its negative derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trace {
    Response(Channel),
    Derivative(Channel),
}

/// Which polarization components enter the observables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Detection {
    /// Only the DC coherences, normalized by the carrier Rabi frequency.
    #[default]
    Carrier,
    /// Every tooth sees the coherence harmonic oscillating at its own
    /// frequency, normalized by its own Rabi frequency; teeth are combined
    /// with intensity weights, as a photodiode would. Resolves the
    /// outer-teeth Raman resonance at ±ωm, but converges more slowly in
    /// the truncation order.
    AllTeeth,
}

impl Detection {
    pub fn name(self) -> &'static str {
        match self {
            Detection::AllTeeth => "all-teeth",
            Detection::Carrier => "carrier",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "all-teeth" => Some(Detection::AllTeeth),
            "carrier" => Some(Detection::Carrier),
            _ => None,
        }
    }
}

/// The three channels for one tooth. `a`, `b` are the coherences
/// `ρ̃(-1,e)`, `ρ̃(+1,e)` divided by the tooth's complex Rabi amplitude.
fn channels(a: Complex64, b: Complex64, c: f64, s: f64) -> [f64; 3] {
    [
        a.im / (c + s) + b.im / (s - c),
        a.re / (c + s) - b.re / (c - s),
        a.im / (c + s) - b.im / (s - c),
    ]
}

/// Observables with the default [`Detection::Carrier`].
pub fn observables_from_state(
    state: &HarmonicState,
    eps: EllipticityAngle,
    field: &TrichromaticField,
) -> Result<OpticalResponse> {
    observables_with(state, eps, field, Detection::default())
}

/// Observables from the optical coherences `a = ρ̃(-1,e)`, `b = ρ̃(+1,e)`:
///
/// ```text
/// A = Im a / ((cos ε + sin ε) Ω) + Im b / ((sin ε - cos ε) Ω)
/// B = Re a / ((cos ε + sin ε) Ω) - Re b / ((cos ε - sin ε) Ω)
/// D = Im a / ((cos ε + sin ε) Ω) - Im b / ((sin ε - cos ε) Ω)
/// ```
///
/// A tooth entering `Ω(t)` at harmonic `n` polarizes the medium through
/// the coherence harmonic `-n`. With [`Detection::Carrier`] only `n = 0`
/// is used, with `Ω` the complex carrier Rabi amplitude `e^{iφ1} Ω0` (or
/// the strongest sideband if the carrier is off).
pub fn observables_with(
    state: &HarmonicState,
    eps: EllipticityAngle,
    field: &TrichromaticField,
    detection: Detection,
) -> Result<OpticalResponse> {
    let e = eps.radians();
    if e.abs() > FRAC_PI_4 - ELLIPTICITY_GUARD {
        return Err(Error::DegenerateEllipticity(e));
    }
    let (c, s) = (e.cos(), e.sin());
    let a = |n| state.coefficient(n, Element::OpticalMinusE);
    let b = |n| state.coefficient(n, Element::OpticalPlusE);

    let out = match detection {
        Detection::Carrier => {
            let h = field.harmonics();
            let rabi = if h.dc.norm() > 0.0 {
                h.dc
            } else if h.up.norm() >= h.down.norm() {
                h.up
            } else {
                h.down
            };
            if rabi.norm() == 0.0 {
                return Ok(OpticalResponse::default());
            }
            channels(a(0) / rabi, b(0) / rabi, c, s)
        }
        Detection::AllTeeth => {
            let h = field.harmonics();
            let mut acc = [0.0; 3];
            let mut weight = 0.0;
            for (n, amp) in [(0i64, h.dc), (1, h.up), (-1, h.down)] {
                let w = amp.norm_sqr();
                if w == 0.0 || state.order() == 0 && n != 0 {
                    continue;
                }
                let t = channels(a(-n) / amp, b(-n) / amp, c, s);
                for (x, v) in acc.iter_mut().zip(t) {
                    *x += w * v;
                }
                weight += w;
            }
            if weight == 0.0 {
                return Ok(OpticalResponse::default());
            }
            acc.map(|v| v / weight)
        }
    };
    Ok(OpticalResponse {
        absorption: out[0],
        birefringence: out[1],
        dichroism: out[2],
    })
}

/// Solve and evaluate the observables at one parameter point.
pub fn response_at(params: &AtomParams, order: usize, detection: Detection) -> Result<OpticalResponse> {
    let state = steady_state(params, order)?;
    observables_with(&state, params.eps, &params.field, detection)
}

/// Uniform grid of Larmor frequencies, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl ScanGrid {
    pub fn new(start: f64, stop: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidParameter {
                name: "points",
                reason: format!("a scan needs at least 2 points, got {count}"),
            });
        }
        if !(start.is_finite() && stop.is_finite()) || start >= stop {
            return Err(Error::InvalidParameter {
                name: "scan",
                reason: format!("need start < stop, got {start}..{stop}"),
            });
        }
        Ok(Self { start, stop, count })
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.count - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.stop
                } else {
                    self.start + i as f64 * step
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub index: usize,
    pub omega_l: f64,
    pub message: String,
}

/// Response curves over a Larmor grid. Failed points hold NaN and are
/// listed in `failures`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineShapeScan {
    pub grid: Vec<f64>,
    pub responses: Vec<OpticalResponse>,
    /// Negative first derivative of each channel, when computed.
    pub derivatives: Option<Vec<OpticalResponse>>,
    pub failures: Vec<PointFailure>,
}

impl LineShapeScan {
    pub fn column(&self, trace: Trace) -> Result<Vec<f64>> {
        match trace {
            Trace::Response(ch) => Ok(self.responses.iter().map(|r| r.get(ch)).collect()),
            Trace::Derivative(ch) => self
                .derivatives
                .as_ref()
                .map(|d| d.iter().map(|r| r.get(ch)).collect())
                .ok_or_else(|| Error::InvalidParameter {
                    name: "channel",
                    reason: "derivative columns have not been computed".into(),
                }),
        }
    }

    pub fn step(&self) -> f64 {
        (self.grid[self.grid.len() - 1] - self.grid[0]) / (self.grid.len() - 1) as f64
    }
}

/// Larmor scan; points are independent and solved in parallel on the
/// current rayon pool, results keep grid order.
pub fn scan_larmor(
    field: &TrichromaticField,
    eps: EllipticityAngle,
    rates: &RelaxationRates,
    order: usize,
    grid: &ScanGrid,
    detection: Detection,
) -> Result<LineShapeScan> {
    let values = grid.values();
    let base = AtomParams {
        field: *field,
        eps,
        omega_l: 0.0,
        rates: *rates,
    };
    let results: Vec<Result<OpticalResponse>> = values
        .par_iter()
        .map(|&w| response_at(&base.with_larmor(w), order, detection))
        .collect();

    let mut responses = Vec::with_capacity(values.len());
    let mut failures = Vec::new();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => responses.push(v),
            Err(e) => {
                failures.push(PointFailure {
                    index,
                    omega_l: values[index],
                    message: e.to_string(),
                });
                responses.push(OpticalResponse::NAN);
            }
        }
    }
    if failures.len() as f64 > MAX_FAILED_FRACTION * values.len() as f64 {
        return Err(Error::ScanFailed {
            failed: failures.len(),
            total: values.len(),
            first: failures[0].index,
        });
    }
    Ok(LineShapeScan {
        grid: values,
        responses,
        derivatives: None,
        failures,
    })
}

fn check_uniform(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::NonUniformGrid("fewer than two points".into()));
    }
    let step = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    if step <= 0.0 {
        return Err(Error::NonUniformGrid("grid is not increasing".into()));
    }
    for (i, w) in grid.windows(2).enumerate() {
        let d = w[1] - w[0];
        if (d - step).abs() > 1e-12 * step.abs().max(w[0].abs().max(w[1].abs())) {
            return Err(Error::NonUniformGrid(format!(
                "spacing {d} at index {i} differs from {step}"
            )));
        }
    }
    Ok(step)
}

/// `-f'` on a uniform grid: central differences inside, one-sided
/// second-order differences at the ends.
pub fn negative_derivative(grid: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    let h = check_uniform(grid)?;
    if values.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "{} values on a {}-point grid",
            values.len(),
            grid.len()
        )));
    }
    let n = values.len();
    let mut out = vec![0.0; n];
    if n == 2 {
        let d = -(values[1] - values[0]) / h;
        return Ok(vec![d, d]);
    }
    let two_h = 2.0 * h;
    out[0] = -(-3.0 * values[0] + 4.0 * values[1] - values[2]) / two_h;
    out[n - 1] = -(3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / two_h;
    for i in 1..n - 1 {
        out[i] = -(values[i + 1] - values[i - 1]) / two_h;
    }
    Ok(out)
}

/// Emulates phase-sensitive detection with a 180° reference shift: every
/// channel is replaced by its negative first derivative along Ω_L.
pub fn lockin_derivative(mut scan: LineShapeScan) -> Result<LineShapeScan> {
    let cols: Vec<Vec<f64>> = Channel::ALL
        .iter()
        .map(|&ch| {
            let v: Vec<f64> = scan.responses.iter().map(|r| r.get(ch)).collect();
            negative_derivative(&scan.grid, &v)
        })
        .collect::<Result<_>>()?;
    scan.derivatives = Some(
        (0..scan.grid.len())
            .map(|i| OpticalResponse {
                absorption: cols[0][i],
                birefringence: cols[1][i],
                dichroism: cols[2][i],
            })
            .collect(),
    );
    Ok(scan)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    /// Location of the line-shape extremum (kHz).
    pub position: f64,
    /// Peak value relative to the scan median, signed.
    pub amplitude: f64,
}

fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Locates the resonance features near each expected Larmor frequency.
///
/// For a response column the feature is its largest excursion from the
/// scan median inside `±FEATURE_WINDOW`. For a derivative column the
/// amplitude is the largest excursion of the derivative, and the position
/// is the zero crossing between its two lobes, i.e. the extremum of the
/// underlying line shape.
pub fn feature_extract(scan: &LineShapeScan, trace: Trace, expected: &[f64]) -> Result<Vec<Feature>> {
    let column = scan.column(trace)?;
    let start = scan.grid[0];
    let stop = scan.grid[scan.grid.len() - 1];
    let baseline = median(&column);
    let tol = 1e-9 * scan.step();

    expected
        .iter()
        .map(|&pos| {
            if pos < start - tol || pos > stop + tol {
                return Err(Error::OutsideGrid {
                    position: pos,
                    start,
                    stop,
                });
            }
            let idx: Vec<usize> = (0..scan.grid.len())
                .filter(|&i| (scan.grid[i] - pos).abs() <= FEATURE_WINDOW + tol && column[i].is_finite())
                .collect();
            let &peak = idx
                .iter()
                .max_by(|&&a, &&b| (column[a] - baseline).abs().total_cmp(&(column[b] - baseline).abs()))
                .ok_or(Error::OutsideGrid {
                    position: pos,
                    start,
                    stop,
                })?;
            let amplitude = column[peak] - baseline;

            let position = match trace {
                Trace::Response(_) => scan.grid[peak],
                Trace::Derivative(_) => {
                    let hi = *idx.iter().max_by(|&&a, &&b| column[a].total_cmp(&column[b])).unwrap();
                    let lo = *idx.iter().min_by(|&&a, &&b| column[a].total_cmp(&column[b])).unwrap();
                    zero_crossing(&scan.grid, &column, hi.min(lo), hi.max(lo))
                        .unwrap_or(scan.grid[peak])
                }
            };
            Ok(Feature { position, amplitude })
        })
        .collect()
}

/// Linear interpolation of the first sign change of `v` in `[from, to]`.
fn zero_crossing(x: &[f64], v: &[f64], from: usize, to: usize) -> Option<f64> {
    for i in from..to {
        let (a, b) = (v[i], v[i + 1]);
        if a == 0.0 {
            return Some(x[i]);
        }
        if a.signum() != b.signum() {
            return Some(x[i] + (x[i + 1] - x[i]) * a / (a - b));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(grid: &[f64], f: impl Fn(f64) -> f64) -> LineShapeScan {
        LineShapeScan {
            grid: grid.to_vec(),
            responses: grid
                .iter()
                .map(|&x| OpticalResponse {
                    absorption: f(x),
                    birefringence: 0.0,
                    dichroism: 0.0,
                })
                .collect(),
            derivatives: None,
            failures: vec![],
        }
    }

    #[test]
    fn grid_values() {
        let g = ScanGrid::new(-20.0, 20.0, 801).unwrap();
        let v = g.values();
        assert_eq!(v.len(), 801);
        assert_eq!(v[0], -20.0);
        assert_eq!(v[800], 20.0);
        assert!((v[400]).abs() < 1e-12);
        assert!(ScanGrid::new(0.0, 1.0, 1).is_err());
        assert!(ScanGrid::new(1.0, 0.0, 10).is_err());
    }

    #[test]
    fn derivative_of_constant_and_ramp() {
        let grid = ScanGrid::new(-3.0, 5.0, 33).unwrap().values();
        let c = negative_derivative(&grid, &vec![2.5; grid.len()]).unwrap();
        assert!(c.iter().all(|&d| d == 0.0));
        let ramp: Vec<f64> = grid.iter().map(|x| 0.75 * x - 1.0).collect();
        for d in negative_derivative(&grid, &ramp).unwrap() {
            assert!((d + 0.75).abs() < 1e-12, "{d}");
        }
    }

    #[test]
    fn derivative_rejects_nonuniform_grid() {
        let grid = vec![0.0, 1.0, 2.5, 3.0];
        assert!(matches!(
            negative_derivative(&grid, &[0.0; 4]),
            Err(Error::NonUniformGrid(_))
        ));
    }

    #[test]
    fn lorentzian_becomes_dispersive() {
        let w = 0.8;
        let grid = ScanGrid::new(-10.0, 10.0, 2001).unwrap().values();
        let lor = |x: f64| 1.0 / (1.0 + (x / w).powi(2));
        // analytic -d/dx
        let exact = |x: f64| 2.0 * x / (w * w) / (1.0 + (x / w).powi(2)).powi(2);
        let scan = lockin_derivative(synthetic(&grid, lor)).unwrap();
        let d = scan.column(Trace::Derivative(Channel::Absorption)).unwrap();
        let n = grid.len();
        for i in 0..n {
            assert!((d[i] - exact(grid[i])).abs() < 2e-4, "at {}", grid[i]);
            assert!((d[i] + d[n - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn features_of_lorentzian_comb() {
        let grid = ScanGrid::new(-20.0, 20.0, 801).unwrap().values();
        let f = |x: f64| {
            [-12.0, -6.0, 0.0, 6.0, 12.0]
                .iter()
                .map(|c| 1.0 / (1.0 + ((x - c) / 0.7).powi(2)))
                .sum::<f64>()
        };
        let scan = lockin_derivative(synthetic(&grid, f)).unwrap();
        let expected = [-12.0, -6.0, 0.0, 6.0, 12.0];
        for trace in [
            Trace::Response(Channel::Absorption),
            Trace::Derivative(Channel::Absorption),
        ] {
            for (feat, want) in feature_extract(&scan, trace, &expected).unwrap().iter().zip(expected) {
                assert!((feat.position - want).abs() <= 0.05, "{trace:?}: {feat:?}");
                assert!(feat.amplitude.abs() > 0.1);
            }
        }
        assert!(matches!(
            feature_extract(&scan, Trace::Response(Channel::Absorption), &[25.0]),
            Err(Error::OutsideGrid { .. })
        ));
    }

    #[test]
    fn flat_scan_has_no_features() {
        let grid = ScanGrid::new(-20.0, 20.0, 81).unwrap().values();
        let scan = lockin_derivative(synthetic(&grid, |_| 0.0)).unwrap();
        for trace in [
            Trace::Response(Channel::Absorption),
            Trace::Derivative(Channel::Dichroism),
        ] {
            for f in feature_extract(&scan, trace, &[-6.0, 0.0, 6.0]).unwrap() {
                assert_eq!(f.amplitude, 0.0);
            }
        }
    }

    #[test]
    fn missing_derivatives_is_an_error() {
        let grid = ScanGrid::new(0.0, 1.0, 3).unwrap().values();
        let scan = synthetic(&grid, |x| x);
        assert!(scan.column(Trace::Derivative(Channel::Absorption)).is_err());
    }

    #[test]
    fn degenerate_ellipticity_rejected() {
        use crate::atomfield::PhasePreset;
        let field = TrichromaticField::symmetric(5.0, PhasePreset::WingLike, 12.0, 0.0).unwrap();
        let params = AtomParams {
            field,
            eps: EllipticityAngle::new(FRAC_PI_4).unwrap(),
            omega_l: 1.0,
            rates: RelaxationRates::new(5600.0, 1.0).unwrap(),
        };
        assert!(matches!(response_at(&params, 2, Detection::Carrier), Err(Error::DegenerateEllipticity(_))));
    }

    #[test]
    fn detection_modes_agree_for_a_single_tooth() {
        use crate::atomfield::{Phase, PhasePreset};
        let rates = RelaxationRates::new(5600.0, 1.0).unwrap();
        let field = TrichromaticField::new([5.0, 0.0, 0.0], (Phase::Pi, Phase::Zero, Phase::Zero), 12.0, 300.0).unwrap();
        let params = AtomParams {
            field,
            eps: EllipticityAngle::new(0.2).unwrap(),
            omega_l: 2.0,
            rates,
        };
        let a = response_at(&params, 2, Detection::Carrier).unwrap();
        let b = response_at(&params, 2, Detection::AllTeeth).unwrap();
        for (x, y) in a.channels().iter().zip(b.channels()) {
            assert!((x - y).abs() <= 1e-15 * x.abs().max(1e-30), "{a:?} {b:?}");
        }

        // linear light on resonance: no circular response in either mode
        let field = TrichromaticField::symmetric(5.0, PhasePreset::WingLike, 12.0, 0.0).unwrap();
        for det in [Detection::Carrier, Detection::AllTeeth] {
            for w in [0.0, 3.0, 12.0] {
                let r = response_at(
                    &AtomParams {
                        field,
                        eps: EllipticityAngle::linear(),
                        omega_l: w,
                        rates,
                    },
                    2,
                    det,
                )
                .unwrap();
                assert!(r.birefringence.abs() < 1e-12 && r.dichroism.abs() < 1e-12, "{det:?} {r:?}");
            }
        }
        assert_eq!(Detection::parse("all-teeth"), Some(Detection::AllTeeth));
        assert_eq!(Detection::parse(Detection::Carrier.name()), Some(Detection::Carrier));
    }

    proptest::proptest! {
        #[test]
        fn derivative_is_linear(
            vals in proptest::collection::vec(-1.0f64..1.0, 5..40),
            k in -8i32..8,
            c in -3.0f64..3.0,
        ) {
            let grid: Vec<f64> = (0..vals.len()).map(|i| -1.0 + 0.25 * i as f64).collect();
            let base = negative_derivative(&grid, &vals).unwrap();
            let p = 2f64.powi(k);
            let scaled: Vec<f64> = vals.iter().map(|v| p * v).collect();
            for (a, b) in negative_derivative(&grid, &scaled).unwrap().iter().zip(&base) {
                proptest::prop_assert_eq!(*a, p * b);
            }
            let scaled: Vec<f64> = vals.iter().map(|v| c * v).collect();
            for (a, b) in negative_derivative(&grid, &scaled).unwrap().iter().zip(&base) {
                proptest::prop_assert!((a - c * b).abs() <= 1e-14 * (1.0 + (c * b).abs()) * 8.0);
            }
        }
    }
}
