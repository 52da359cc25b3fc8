//! Level scheme, field and relaxation types for the J=1 -> J'=0 system.
//!
//! Everything here is plain data plus a few pure functions. Rates and
//! frequencies are bare numbers in kHz and enter the equations of motion
//! without any factor of 2π.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Magnetic sublevels of the J=1 -> J'=0 scheme.
///
/// `Minus` (m=-1) couples to the excited state through the σ+ component,
/// `Plus` (m=+1) through the σ- component, and `Zero` (m=0) is dark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    Minus,
    Plus,
    Zero,
    Excited,
}

impl Level {
    pub const GROUND: [Level; 3] = [Level::Minus, Level::Plus, Level::Zero];
    pub const COUPLED: [Level; 2] = [Level::Minus, Level::Plus];

    /// Magnetic quantum number; the excited state has m'=0.
    pub fn m(self) -> i32 {
        match self {
            Level::Minus => -1,
            Level::Plus => 1,
            Level::Zero | Level::Excited => 0,
        }
    }

    /// Index into a 4x4 density matrix: (m=-1, m=+1, m=0, e).
    pub fn index(self) -> usize {
        match self {
            Level::Minus => 0,
            Level::Plus => 1,
            Level::Zero => 2,
            Level::Excited => 3,
        }
    }

    /// Signed dipole factor of the optical transition from this sublevel,
    /// taken from the spherical decomposition of the elliptical field:
    /// σ+ enters with `-(cos ε + sin ε)`, σ- with `+(cos ε - sin ε)`.
    /// Zero for the dark sublevel and the excited state.
    pub fn dipole_factor(self, eps: EllipticityAngle) -> f64 {
        match self {
            Level::Minus => -coupling_amplitude_branch(eps, Branch::SigmaPlus),
            Level::Plus => coupling_amplitude_branch(eps, Branch::SigmaMinus),
            Level::Zero | Level::Excited => 0.0,
        }
    }
}

/// Optical branch of the J=1 -> J'=0 transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// m=-1 -> e
    SigmaPlus,
    /// m=+1 -> e
    SigmaMinus,
}

impl Branch {
    pub fn sign(self) -> i32 {
        match self {
            Branch::SigmaPlus => 1,
            Branch::SigmaMinus => -1,
        }
    }

    pub fn ground(self) -> Level {
        match self {
            Branch::SigmaPlus => Level::Minus,
            Branch::SigmaMinus => Level::Plus,
        }
    }
}

/// Ellipticity ε of the optical field, |ε| ≤ π/4.
///
/// ε = 0 is linear, ε = +π/4 pure σ+, ε = -π/4 pure σ-. The quarter-wave
/// plate angle θ is used interchangeably with ε.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EllipticityAngle(f64);

impl EllipticityAngle {
    pub fn new(eps: f64) -> Result<Self> {
        if !eps.is_finite() || eps.abs() > FRAC_PI_4 + 1e-15 {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("{eps} is outside [-π/4, π/4]"),
            });
        }
        Ok(Self(eps))
    }

    pub const fn linear() -> Self {
        Self(0.0)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn reversed(self) -> Self {
        Self(-self.0)
    }
}

/// Amplitude factor `cos ε + g sin ε` of an optical branch.
///
/// `g = +1` selects σ+ (m=-1 -> e), `g = -1` selects σ- (m=+1 -> e).
pub fn coupling_amplitude(eps: EllipticityAngle, g: i32) -> Result<f64> {
    match g {
        1 => Ok(coupling_amplitude_branch(eps, Branch::SigmaPlus)),
        -1 => Ok(coupling_amplitude_branch(eps, Branch::SigmaMinus)),
        _ => Err(Error::InvalidSublevel(g)),
    }
}

pub fn coupling_amplitude_branch(eps: EllipticityAngle, branch: Branch) -> f64 {
    let e = eps.radians();
    e.cos() + f64::from(branch.sign()) * e.sin()
}

/// Phase of one trichromatic component. Only in-phase and anti-phase
/// components occur in a sinusoidally modulated comb.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Zero,
    Pi,
}

impl Phase {
    pub fn radians(self) -> f64 {
        match self {
            Phase::Zero => 0.0,
            Phase::Pi => PI,
        }
    }

    /// `e^{iφ}`, which is exactly ±1.
    pub fn factor(self) -> f64 {
        match self {
            Phase::Zero => 1.0,
            Phase::Pi => -1.0,
        }
    }

    pub fn from_sign(sign: i32) -> Self {
        if sign < 0 {
            Phase::Pi
        } else {
            Phase::Zero
        }
    }

    /// Accepts `0`, `pi`/`π` and the numeric values 0 and π (to 1e-9).
    pub fn parse(s: &str) -> Option<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "0" | "+" => return Some(Phase::Zero),
            "pi" | "π" | "-" => return Some(Phase::Pi),
            _ => {}
        }
        let v: f64 = t.parse().ok()?;
        if v.abs() < 1e-9 {
            Some(Phase::Zero)
        } else if (v - PI).abs() < 1e-9 {
            Some(Phase::Pi)
        } else {
            None
        }
    }
}

/// Phase classes of three consecutive comb teeth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhasePreset {
    /// Outer teeth in opposite phase, as near the comb center.
    Center,
    /// Outer teeth in the same phase, as in the comb wings.
    WingLike,
}

/// Phases `(φ1, φ2, φ3)` for the components at (ω0, ω0-ωm, ω0+ωm).
///
/// The triple is read along the frequency axis (lower, central, upper),
/// so the center form (+,+,-) gives φ2=0, φ1=0, φ3=π.
pub fn phase_preset(region: PhasePreset) -> (Phase, Phase, Phase) {
    match region {
        PhasePreset::Center => (Phase::Zero, Phase::Zero, Phase::Pi),
        PhasePreset::WingLike => (Phase::Zero, Phase::Zero, Phase::Zero),
    }
}

/// Three phase-locked components at ω0 and ω0 ± ωm in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrichromaticField {
    /// Rabi frequency of the central component (kHz).
    pub rabi_0: f64,
    /// Rabi frequency of the component at ω0 - ωm (kHz).
    pub rabi_minus: f64,
    /// Rabi frequency of the component at ω0 + ωm (kHz).
    pub rabi_plus: f64,
    pub phi_1: Phase,
    pub phi_2: Phase,
    pub phi_3: Phase,
    /// Modulation frequency (kHz).
    pub omega_m: f64,
    /// Detuning of the central component (kHz).
    pub delta: f64,
}

impl TrichromaticField {
    pub fn new(
        rabi: [f64; 3],
        phases: (Phase, Phase, Phase),
        omega_m: f64,
        delta: f64,
    ) -> Result<Self> {
        let field = Self {
            rabi_0: rabi[0],
            rabi_minus: rabi[1],
            rabi_plus: rabi[2],
            phi_1: phases.0,
            phi_2: phases.1,
            phi_3: phases.2,
            omega_m,
            delta,
        };
        field.validate()?;
        Ok(field)
    }

    /// Equal Rabi frequencies on all three teeth with the phases of `preset`.
    pub fn symmetric(rabi: f64, preset: PhasePreset, omega_m: f64, delta: f64) -> Result<Self> {
        Self::new([rabi; 3], phase_preset(preset), omega_m, delta)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rabi_0", self.rabi_0),
            ("rabi_minus", self.rabi_minus),
            ("rabi_plus", self.rabi_plus),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("Rabi frequency must be finite and >= 0, got {v}"),
                });
            }
        }
        if !self.omega_m.is_finite() || self.omega_m <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "omega_m",
                reason: format!("modulation frequency must be > 0, got {}", self.omega_m),
            });
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: "detuning must be finite".into(),
            });
        }
        Ok(())
    }

    pub fn phases(&self) -> (Phase, Phase, Phase) {
        (self.phi_1, self.phi_2, self.phi_3)
    }

    /// Complex Fourier amplitudes of Ω(t) at harmonics (0, +1, -1) of ωm:
    /// `Ω(t) = a0 + a_up e^{iωm t} + a_down e^{-iωm t}`.
    pub fn harmonics(&self) -> RabiHarmonics {
        RabiHarmonics {
            dc: Complex64::new(self.phi_1.factor() * self.rabi_0, 0.0),
            up: Complex64::new(self.phi_2.factor() * self.rabi_minus, 0.0),
            down: Complex64::new(self.phi_3.factor() * self.rabi_plus, 0.0),
        }
    }

    pub fn is_dark(&self) -> bool {
        self.rabi_0 == 0.0 && self.rabi_minus == 0.0 && self.rabi_plus == 0.0
    }
}

/// Fourier decomposition of the total Rabi frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiHarmonics {
    pub dc: Complex64,
    /// Coefficient of `e^{+iωm t}`.
    pub up: Complex64,
    /// Coefficient of `e^{-iωm t}`.
    pub down: Complex64,
}

/// Total Rabi frequency
/// `Ω(t) = e^{iφ1}Ω0 + e^{iφ2}Ω₋₁e^{iωm t} + e^{iφ3}Ω₊₁e^{-iωm t}`.
pub fn total_rabi(field: &TrichromaticField, t: f64) -> Complex64 {
    let h = field.harmonics();
    let rot = Complex64::from_polar(1.0, field.omega_m * t);
    h.dc + h.up * rot + h.down * rot.conj()
}

/// Excited-state decay Γ and ground-state redistribution γ, in kHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationRates {
    pub gamma_excited: f64,
    pub gamma_ground: f64,
}

impl RelaxationRates {
    pub fn new(gamma_excited: f64, gamma_ground: f64) -> Result<Self> {
        for (name, v) in [("gamma_excited", gamma_excited), ("gamma_ground", gamma_ground)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("relaxation rate must be > 0, got {v}"),
                });
            }
        }
        Ok(Self {
            gamma_excited,
            gamma_ground,
        })
    }
}

/// Full parameter point of the model: field, ellipticity, Larmor frequency
/// and relaxation rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomParams {
    pub field: TrichromaticField,
    pub eps: EllipticityAngle,
    /// Larmor frequency Ω_L (kHz); sublevel m is shifted by m·Ω_L.
    pub omega_l: f64,
    pub rates: RelaxationRates,
}

impl AtomParams {
    pub fn with_larmor(mut self, omega_l: f64) -> Self {
        self.omega_l = omega_l;
        self
    }
}
