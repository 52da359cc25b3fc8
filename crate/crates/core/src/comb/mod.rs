//! Narrow-bandwidth frequency comb produced by sinusoidal frequency
//! modulation of a CW laser.
//!
//! Tooth `n` sits at `n·ωm` from the carrier with field amplitude
//! `J_{-n}(I_m)`, where `I_m = A_m / ωm` is the modulation index. The
//! relative phases of neighbouring teeth decide which quantum interference
//! a trichromatic slice of the comb produces.

pub mod bessel;

pub use bessel::{bessel_j, bessel_j_orders};

use crate::error::{Error, Result};

/// Default zero threshold for [`classify_phase_triple`], relative to the
/// strongest tooth.
pub const DEGENERATE_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tooth {
    pub n: i64,
    /// `|J_{-n}(I_m)|²`
    pub amplitude: f64,
    /// Sign of `J_{-n}(I_m)`; `+1` for a vanishing tooth.
    pub sign: i8,
}

impl Tooth {
    pub fn frequency_offset(&self, omega_m: f64) -> f64 {
        self.n as f64 * omega_m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombSpectrum {
    pub omega_m: f64,
    pub mod_index: f64,
    /// Ordered by increasing `n`.
    pub teeth: Vec<Tooth>,
}

impl CombSpectrum {
    pub fn tooth(&self, n: i64) -> Option<&Tooth> {
        self.teeth
            .binary_search_by_key(&n, |t| t.n)
            .ok()
            .map(|i| &self.teeth[i])
    }

    pub fn max_amplitude(&self) -> f64 {
        self.teeth.iter().map(|t| t.amplitude).fold(0.0, f64::max)
    }

    pub fn total_power(&self) -> f64 {
        self.teeth.iter().map(|t| t.amplitude).sum()
    }

    /// Same spectrum with every tooth's sign flipped.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        for t in &mut out.teeth {
            t.sign = -t.sign;
        }
        out
    }
}

/// Comb teeth for `n ∈ [-n_max, n_max]` with modulation amplitude `a_m`
/// (kHz); the modulation index is `a_m / omega_m`.
pub fn teeth_spectrum(omega_m: f64, a_m: f64, n_max: u64) -> Result<CombSpectrum> {
    if !omega_m.is_finite() || omega_m <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "omega_m",
            reason: format!("must be > 0, got {omega_m}"),
        });
    }
    if !a_m.is_finite() || a_m < 0.0 {
        return Err(Error::InvalidParameter {
            name: "mod_amplitude",
            reason: format!("must be >= 0, got {a_m}"),
        });
    }
    let x = a_m / omega_m;
    let j = bessel_j_orders(n_max, x)?;

    let n_max = n_max as i64;
    let teeth = (-n_max..=n_max)
        .map(|n| {
            // tooth n carries J_{-n} = (-1)^n J_n
            let k = n.unsigned_abs() as usize;
            let value = if n > 0 && n % 2 != 0 { -j[k] } else { j[k] };
            Tooth {
                n,
                amplitude: value * value,
                sign: if value < 0.0 { -1 } else { 1 },
            }
        })
        .collect();
    Ok(CombSpectrum {
        omega_m,
        mod_index: x,
        teeth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseClass {
    CenterLike,
    WingLike,
    Degenerate,
}

pub fn classify_phase_triple(spectrum: &CombSpectrum, n_center: i64) -> Result<PhaseClass> {
    classify_phase_triple_with(spectrum, n_center, DEGENERATE_THRESHOLD)
}

/// Classifies the teeth `n_center - 1, n_center, n_center + 1` by the
/// relative sign of the outer pair. Neighbours weaker than `threshold`
/// times the strongest tooth make the triple degenerate.
pub fn classify_phase_triple_with(
    spectrum: &CombSpectrum,
    n_center: i64,
    threshold: f64,
) -> Result<PhaseClass> {
    let get = |n| spectrum.tooth(n).ok_or(Error::MissingTooth(n));
    let lower = get(n_center - 1)?;
    get(n_center)?;
    let upper = get(n_center + 1)?;

    let floor = threshold * spectrum.max_amplitude();
    if lower.amplitude < floor || upper.amplitude < floor || spectrum.max_amplitude() == 0.0 {
        return Ok(PhaseClass::Degenerate);
    }
    Ok(if lower.sign == upper.sign {
        PhaseClass::WingLike
    } else {
        PhaseClass::CenterLike
    })
}

/// Portion of the Doppler profile that the comb sees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerWindow {
    /// Detuning Δ of the comb center from the atomic resonance (kHz).
    pub delta_laser: f64,
    /// Doppler width (kHz).
    pub width: f64,
}

impl DopplerWindow {
    pub fn new(delta_laser: f64, width: f64) -> Result<Self> {
        if !width.is_finite() || width <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "doppler_width",
                reason: format!("must be > 0, got {width}"),
            });
        }
        if !delta_laser.is_finite() {
            return Err(Error::InvalidParameter {
                name: "delta_laser",
                reason: "must be finite".into(),
            });
        }
        Ok(Self { delta_laser, width })
    }

    fn contains(&self, offset: f64) -> bool {
        let half = 0.5 * self.width;
        (offset - self.delta_laser).abs() <= half * (1.0 + 1e-12) + 1e-12
    }

    /// Tooth indices inside the window, or `None` if it falls between teeth.
    pub fn tooth_range(&self, omega_m: f64) -> Option<(i64, i64)> {
        let half = 0.5 * self.width;
        let mut lo = ((self.delta_laser - half) / omega_m).ceil() as i64;
        let mut hi = ((self.delta_laser + half) / omega_m).floor() as i64;
        // interval ends that round to the wrong side of a tooth
        if !self.contains(lo as f64 * omega_m) {
            lo += 1;
        }
        if self.contains((lo - 1) as f64 * omega_m) {
            lo -= 1;
        }
        if !self.contains(hi as f64 * omega_m) {
            hi -= 1;
        }
        if self.contains((hi + 1) as f64 * omega_m) {
            hi += 1;
        }
        (lo <= hi).then_some((lo, hi))
    }
}

/// Teeth resonant with the Doppler window, amplitudes and signs unchanged.
pub fn doppler_window(spectrum: &CombSpectrum, window: &DopplerWindow) -> CombSpectrum {
    let teeth = spectrum
        .teeth
        .iter()
        .filter(|t| window.contains(t.frequency_offset(spectrum.omega_m)))
        .copied()
        .collect();
    CombSpectrum {
        omega_m: spectrum.omega_m,
        mod_index: spectrum.mod_index,
        teeth,
    }
}
