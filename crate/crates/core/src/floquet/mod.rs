//! Harmonic-balance steady state of the periodically driven density matrix.
//!
//! Every element is expanded as `ρ_jk(t) = Σ_n ρ_jk^(n) e^{inωm t}` with
//! `|n| ≤ N`. The trichromatic drive couples harmonic `n` to `n ± 1`, so the
//! steady state satisfies a linear system `Q ρ = R` of dimension
//! `9(2N+1)`.
//!
//! Per harmonic the unknowns are, in this order,
//!
//! | k | element        |
//! |---|----------------|
//! | 0 | ρ(-1,-1)       |
//! | 1 | ρ(+1,+1)       |
//! | 2 | ρ(e,e)         |
//! | 3 | ρ(-1,+1)       |
//! | 4 | ρ(+1,-1)       |
//! | 5 | ρ̃(-1,e)        |
//! | 6 | ρ̃(e,-1)        |
//! | 7 | ρ̃(+1,e)        |
//! | 8 | ρ̃(e,+1)        |
//!
//! The dark sublevel population is eliminated with the trace condition,
//! `ρ(0,0)^(n) = δ_n0 - ρ(-1,-1)^(n) - ρ(+1,+1)^(n) - ρ(e,e)^(n)`, which
//! turns the redistribution into m=0 into the inhomogeneous term `R`.
//! Coherences involving m=0 are never sourced and vanish in steady state.

pub mod linalg;

use num_complex::Complex64;

use crate::atomfield::{AtomParams, Level};
use crate::error::{Error, Result};
use crate::observables::{observables_with, Detection, OpticalResponse};

pub use linalg::ComplexMatrix;

pub const ELEMENTS: usize = 9;

/// Unknowns of one harmonic block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(usize)]
pub enum Element {
    PopMinus = 0,
    PopPlus = 1,
    PopExcited = 2,
    ZeemanMinusPlus = 3,
    ZeemanPlusMinus = 4,
    OpticalMinusE = 5,
    OpticalEMinus = 6,
    OpticalPlusE = 7,
    OpticalEPlus = 8,
}

impl Element {
    pub const ALL: [Element; ELEMENTS] = [
        Element::PopMinus,
        Element::PopPlus,
        Element::PopExcited,
        Element::ZeemanMinusPlus,
        Element::ZeemanPlusMinus,
        Element::OpticalMinusE,
        Element::OpticalEMinus,
        Element::OpticalPlusE,
        Element::OpticalEPlus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Matrix position `(row, col)` of the element.
    pub fn levels(self) -> (Level, Level) {
        use Level::*;
        match self {
            Element::PopMinus => (Minus, Minus),
            Element::PopPlus => (Plus, Plus),
            Element::PopExcited => (Excited, Excited),
            Element::ZeemanMinusPlus => (Minus, Plus),
            Element::ZeemanPlusMinus => (Plus, Minus),
            Element::OpticalMinusE => (Minus, Excited),
            Element::OpticalEMinus => (Excited, Minus),
            Element::OpticalPlusE => (Plus, Excited),
            Element::OpticalEPlus => (Excited, Plus),
        }
    }

    pub fn from_levels(row: Level, col: Level) -> Option<Element> {
        Element::ALL.into_iter().find(|e| e.levels() == (row, col))
    }

    pub fn is_population(self) -> bool {
        matches!(self, Element::PopMinus | Element::PopPlus | Element::PopExcited)
    }
}

/// `Q ρ = R` for truncation order `order`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix {
    pub order: usize,
    pub q: ComplexMatrix,
    pub r: Vec<Complex64>,
}

impl SystemMatrix {
    pub fn dimension(&self) -> usize {
        self.r.len()
    }

    pub fn residual(&self, x: &[Complex64]) -> f64 {
        linalg::residual_inf(&self.q, x, &self.r)
    }
}

fn slot(order: usize, n: i64, k: usize) -> usize {
    (n + order as i64) as usize * ELEMENTS + k
}

#[derive(Clone, Copy)]
enum Drive {
    /// Ω(t)
    Rabi,
    /// Ω*(t)
    RabiConj,
}

struct Assembler {
    order: usize,
    omega: [Complex64; 3],
    q: ComplexMatrix,
}

impl Assembler {
    fn add(&mut self, n: i64, row: Element, m: i64, col: Element, v: Complex64) {
        let top = self.order as i64;
        if m.abs() <= top {
            self.q[(slot(self.order, n, row.index()), slot(self.order, m, col.index()))] += v;
        }
    }

    /// Adds `coeff · [Ω(t) X(t)]^(n)` or `coeff · [Ω*(t) X(t)]^(n)` to row `row`.
    fn add_driven(&mut self, n: i64, row: Element, col: Element, coeff: Complex64, drive: Drive) {
        let [dc, up, down] = self.omega;
        // (amplitude, harmonic of X it multiplies)
        let terms = match drive {
            Drive::Rabi => [(dc, n), (up, n - 1), (down, n + 1)],
            Drive::RabiConj => [(dc.conj(), n), (down.conj(), n - 1), (up.conj(), n + 1)],
        };
        for (amp, m) in terms {
            if amp != Complex64::new(0.0, 0.0) {
                self.add(n, row, m, col, coeff * amp);
            }
        }
    }
}

/// Builds `Q` and `R` for the steady state at truncation order `order`.
///
/// Rows read `(L - i n ωm) ρ^(n) = -S^(n)`, where `L` is the generator of
/// the equations of motion and `S` the source left over from eliminating
/// the dark-state population.
pub fn assemble_system(params: &AtomParams, order: usize) -> Result<SystemMatrix> {
    if order < 1 {
        return Err(Error::InvalidParameter {
            name: "order",
            reason: "truncation order must be >= 1".into(),
        });
    }
    let field = &params.field;
    field.validate()?;
    let h = field.harmonics();
    let dim = ELEMENTS * (2 * order + 1);
    let mut asm = Assembler {
        order,
        omega: [h.dc, h.up, h.down],
        q: ComplexMatrix::zeros(dim, dim),
    };
    let mut r = vec![Complex64::new(0.0, 0.0); dim];

    let i = Complex64::new(0.0, 1.0);
    let re = |x: f64| Complex64::new(x, 0.0);
    let big_gamma = params.rates.gamma_excited;
    let gamma = params.rates.gamma_ground;
    let omega_l = params.omega_l;
    let delta = field.delta;

    // H_int = Σ_g κ_g (Ω|e⟩⟨g| + Ω*|g⟩⟨e|) with κ_g = -(signed dipole factor)
    let k_minus = -Level::Minus.dipole_factor(params.eps);
    let k_plus = -Level::Plus.dipole_factor(params.eps);
    let energy = |l: Level| match l {
        Level::Excited => -delta,
        g => f64::from(g.m()) * omega_l,
    };
    let opt_decay = 0.5 * big_gamma + gamma;

    use Element::*;
    for n in -(order as i64)..=(order as i64) {
        let nw = re(0.0) - i * (n as f64 * field.omega_m);

        for el in Element::ALL {
            asm.add(n, el, n, el, nw);
        }

        // ground populations of the coupled sublevels
        for (pop, coh_ge, coh_eg, k) in [
            (PopMinus, OpticalMinusE, OpticalEMinus, k_minus),
            (PopPlus, OpticalPlusE, OpticalEPlus, k_plus),
        ] {
            asm.add_driven(n, pop, coh_eg, -i * k, Drive::RabiConj);
            asm.add_driven(n, pop, coh_ge, i * k, Drive::Rabi);
            asm.add(n, pop, n, pop, re(-3.0 * gamma));
            asm.add(n, pop, n, PopExcited, re(big_gamma / 3.0 - gamma));
            if n == 0 {
                r[slot(order, 0, pop.index())] -= re(gamma);
            }
        }

        // excited population
        for (coh_ge, coh_eg, k) in [
            (OpticalMinusE, OpticalEMinus, k_minus),
            (OpticalPlusE, OpticalEPlus, k_plus),
        ] {
            asm.add_driven(n, PopExcited, coh_ge, -i * k, Drive::Rabi);
            asm.add_driven(n, PopExcited, coh_eg, i * k, Drive::RabiConj);
        }
        asm.add(n, PopExcited, n, PopExcited, re(-big_gamma));

        // ground Zeeman coherences ρ(g,g')
        for (row, g, gp, coh_eg_p, coh_ge, kg, kgp) in [
            (ZeemanMinusPlus, Level::Minus, Level::Plus, OpticalEPlus, OpticalMinusE, k_minus, k_plus),
            (ZeemanPlusMinus, Level::Plus, Level::Minus, OpticalEMinus, OpticalPlusE, k_plus, k_minus),
        ] {
            asm.add(n, row, n, row, re(-2.0 * gamma) - i * (energy(g) - energy(gp)));
            asm.add_driven(n, row, coh_eg_p, -i * kg, Drive::RabiConj);
            asm.add_driven(n, row, coh_ge, i * kgp, Drive::Rabi);
        }

        // optical coherences ρ̃(g,e) and ρ̃(e,g)
        for (ge, eg, g, pop, zeeman_gg_other, zeeman_other_g, kg, k_other) in [
            (
                OpticalMinusE, OpticalEMinus, Level::Minus, PopMinus,
                ZeemanMinusPlus, ZeemanPlusMinus, k_minus, k_plus,
            ),
            (
                OpticalPlusE, OpticalEPlus, Level::Plus, PopPlus,
                ZeemanPlusMinus, ZeemanMinusPlus, k_plus, k_minus,
            ),
        ] {
            let detune = energy(g) - energy(Level::Excited);
            asm.add(n, ge, n, ge, re(-opt_decay) - i * detune);
            asm.add_driven(n, ge, PopExcited, -i * kg, Drive::RabiConj);
            asm.add_driven(n, ge, pop, i * kg, Drive::RabiConj);
            asm.add_driven(n, ge, zeeman_gg_other, i * k_other, Drive::RabiConj);

            asm.add(n, eg, n, eg, re(-opt_decay) + i * detune);
            asm.add_driven(n, eg, PopExcited, i * kg, Drive::Rabi);
            asm.add_driven(n, eg, pop, -i * kg, Drive::Rabi);
            asm.add_driven(n, eg, zeeman_other_g, -i * k_other, Drive::Rabi);
        }
    }

    Ok(SystemMatrix {
        order,
        q: asm.q,
        r,
    })
}

/// Fourier coefficients of the steady-state density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicState {
    order: usize,
    coefficients: Vec<Complex64>,
    residual: f64,
}

impl HarmonicState {
    pub fn order(&self) -> usize {
        self.order
    }

    /// `‖Qρ - R‖∞` of the solve that produced this state.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn harmonics(&self) -> std::ops::RangeInclusive<i64> {
        -(self.order as i64)..=(self.order as i64)
    }

    /// Coefficient of a basis element; zero outside the truncation.
    pub fn coefficient(&self, n: i64, el: Element) -> Complex64 {
        if n.unsigned_abs() as usize > self.order {
            return Complex64::new(0.0, 0.0);
        }
        self.coefficients[slot(self.order, n, el.index())]
    }

    /// Any density-matrix element, including the reconstructed dark-state
    /// population and the identically vanishing m=0 coherences.
    pub fn element(&self, n: i64, row: Level, col: Level) -> Complex64 {
        if let Some(el) = Element::from_levels(row, col) {
            return self.coefficient(n, el);
        }
        if row == Level::Zero && col == Level::Zero {
            return self.population(n, Level::Zero);
        }
        Complex64::new(0.0, 0.0)
    }

    pub fn population(&self, n: i64, level: Level) -> Complex64 {
        match level {
            Level::Minus => self.coefficient(n, Element::PopMinus),
            Level::Plus => self.coefficient(n, Element::PopPlus),
            Level::Excited => self.coefficient(n, Element::PopExcited),
            Level::Zero => {
                let unit = if n == 0 { 1.0 } else { 0.0 };
                Complex64::new(unit, 0.0)
                    - self.coefficient(n, Element::PopMinus)
                    - self.coefficient(n, Element::PopPlus)
                    - self.coefficient(n, Element::PopExcited)
            }
        }
    }

    /// Sum of all four populations at harmonic `n`.
    pub fn trace(&self, n: i64) -> Complex64 {
        [Level::Minus, Level::Plus, Level::Zero, Level::Excited]
            .into_iter()
            .map(|l| self.population(n, l))
            .sum()
    }

    /// `max |ρ^(n)_jk - conj(ρ^(-n)_kj)|` over all retained elements.
    pub fn hermiticity_defect(&self) -> f64 {
        let levels = [Level::Minus, Level::Plus, Level::Zero, Level::Excited];
        let mut worst = 0.0f64;
        for n in self.harmonics() {
            for a in levels {
                for b in levels {
                    let d = self.element(n, a, b) - self.element(-n, b, a).conj();
                    worst = worst.max(d.norm());
                }
            }
        }
        worst
    }

    /// Period-averaged 4x4 density matrix (the n=0 block).
    pub fn dc_matrix(&self) -> [[Complex64; 4]; 4] {
        let levels = [Level::Minus, Level::Plus, Level::Zero, Level::Excited];
        let mut out = [[Complex64::new(0.0, 0.0); 4]; 4];
        for a in levels {
            for b in levels {
                out[a.index()][b.index()] = self.element(0, a, b);
            }
        }
        out
    }
}

pub fn solve_steady_state(sys: &SystemMatrix) -> Result<HarmonicState> {
    let dim = sys.q.rows();
    if dim != sys.r.len() || dim % ELEMENTS != 0 || (dim / ELEMENTS) % 2 == 0 {
        return Err(Error::Dimension(format!(
            "{}x{} system with {}-entry right-hand side",
            sys.q.rows(),
            sys.q.cols(),
            sys.r.len()
        )));
    }
    let order = (dim / ELEMENTS - 1) / 2;
    let coefficients = linalg::solve(&sys.q, &sys.r)?;
    let residual = sys.residual(&coefficients);
    Ok(HarmonicState {
        order,
        coefficients,
        residual,
    })
}

pub fn steady_state(params: &AtomParams, order: usize) -> Result<HarmonicState> {
    solve_steady_state(&assemble_system(params, order)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationReport {
    pub order: usize,
    pub low: OpticalResponse,
    pub high: OpticalResponse,
    pub max_relative_difference: f64,
    pub pass: bool,
}

/// Compares the observables at orders `order` and `order + 1`.
///
/// The difference of each channel is taken relative to the largest
/// magnitude among the three channels at the two orders, so a channel that
/// vanishes by symmetry does not blow up the ratio.
pub fn truncation_check(
    params: &AtomParams,
    order: usize,
    tol: f64,
    detection: Detection,
) -> Result<TruncationReport> {
    let low = observables_with(&steady_state(params, order)?, params.eps, &params.field, detection)?;
    let high = observables_with(&steady_state(params, order + 1)?, params.eps, &params.field, detection)?;
    let a = low.channels();
    let b = high.channels();
    let scale = a.iter().chain(&b).map(|v| v.abs()).fold(0.0, f64::max);
    let diff = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let max_relative_difference = if scale > 0.0 { diff / scale } else { diff };
    Ok(TruncationReport {
        order,
        low,
        high,
        max_relative_difference,
        pass: max_relative_difference < tol,
    })
}
