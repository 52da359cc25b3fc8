//! Time-domain reference solution: fixed-step classical RK4 integration of
//! the full 4x4 Lindblad master equation, with the drive evaluated as an
//! explicit function of time. Nothing here uses the harmonic expansion, so
//! the period average of the late-time trajectory is an independent check
//! of the Floquet steady state.
//!
//! The step is shortened until a whole number of steps fits in one
//! modulation period, which keeps the period sampling exact.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::atomfield::{total_rabi, AtomParams, Level};
use crate::error::{Error, Result};
use crate::floquet::steady_state;

pub type Matrix = [[Complex64; 4]; 4];

/// Snapshot element order: four populations, the coupled ground Zeeman
/// pair, then the four rotating-frame optical coherences.
pub const SNAPSHOT_ELEMENTS: [(Level, Level); 10] = [
    (Level::Minus, Level::Minus),
    (Level::Plus, Level::Plus),
    (Level::Zero, Level::Zero),
    (Level::Excited, Level::Excited),
    (Level::Minus, Level::Plus),
    (Level::Plus, Level::Minus),
    (Level::Minus, Level::Excited),
    (Level::Excited, Level::Minus),
    (Level::Plus, Level::Excited),
    (Level::Excited, Level::Plus),
];

pub const STEP_DIVISOR: f64 = 50.0;
/// Minimum horizon in units of the ground relaxation time `1/γ`.
pub const HORIZON_LIFETIMES: f64 = 5.0;
pub const MIN_SAMPLES: usize = 64;
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;
pub const PERIODICITY_LIMIT: f64 = 1e-6;
pub const DEFAULT_SAMPLES: usize = 128;

/// Agreement bound between oracle and Floquet DC elements.
pub const COMPARE_RELATIVE: f64 = 1e-3;
pub const COMPARE_ABSOLUTE: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrixSnapshot {
    /// 1/kHz
    pub time: f64,
    /// Ordered as [`SNAPSHOT_ELEMENTS`].
    pub elements: [Complex64; 10],
}

impl DensityMatrixSnapshot {
    pub fn from_matrix(time: f64, rho: &Matrix) -> Self {
        let mut elements = [ZERO; 10];
        for (e, (r, c)) in elements.iter_mut().zip(SNAPSHOT_ELEMENTS) {
            *e = rho[r.index()][c.index()];
        }
        Self { time, elements }
    }

    pub fn get(&self, row: Level, col: Level) -> Option<Complex64> {
        SNAPSHOT_ELEMENTS
            .iter()
            .position(|&p| p == (row, col))
            .map(|k| self.elements[k])
    }

    pub fn trace(&self) -> Complex64 {
        self.elements[..4].iter().sum()
    }

    /// Largest violation of `ρ_jk = conj(ρ_kj)` and of real populations.
    pub fn hermiticity_defect(&self) -> f64 {
        let e = &self.elements;
        let pops = e[..4].iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        [(4, 5), (6, 7), (8, 9)]
            .iter()
            .map(|&(a, b)| (e[a] - e[b].conj()).norm())
            .fold(pops, f64::max)
    }
}

/// Equal populations in the three ground sublevels, nothing else.
pub fn unpolarized() -> Matrix {
    let mut rho = [[ZERO; 4]; 4];
    for g in Level::GROUND {
        rho[g.index()][g.index()] = Complex64::new(1.0 / 3.0, 0.0);
    }
    rho
}

/// Largest step allowed for `params`: the shortest of the modulation
/// period, the Larmor period and the excited lifetime, over 50.
pub fn max_step(params: &AtomParams) -> f64 {
    let mut shortest = (TAU / params.field.omega_m).min(1.0 / params.rates.gamma_excited);
    if params.omega_l != 0.0 {
        shortest = shortest.min(TAU / params.omega_l.abs());
    }
    shortest / STEP_DIVISOR
}

pub fn min_horizon(params: &AtomParams) -> f64 {
    HORIZON_LIFETIMES / params.rates.gamma_ground
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationOptions {
    pub t_end: f64,
    /// Upper bound on the step; the actual step divides the period.
    pub dt: f64,
    /// Snapshots kept over the final period, excluding the closing one.
    pub samples_per_period: usize,
    pub initial: Matrix,
}

impl IntegrationOptions {
    /// Shortest admissible horizon, largest admissible step.
    pub fn for_params(params: &AtomParams) -> Self {
        Self {
            t_end: min_horizon(params),
            dt: max_step(params),
            samples_per_period: DEFAULT_SAMPLES,
            initial: unpolarized(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub step: f64,
    pub steps_per_period: usize,
    pub periods: usize,
    /// Uniform samples over the last modulation period, both ends included.
    pub final_period: Vec<DensityMatrixSnapshot>,
    pub max_trace_drift: f64,
    /// `‖ρ(t_f) - ρ(t_f - T)‖∞`
    pub periodicity_defect: f64,
}

impl Trajectory {
    pub fn dc(&self) -> Result<[Complex64; 10]> {
        dc_extract(&self.final_period)
    }
}

/// Integrates from equal ground populations up to at least `t_end`.
pub fn integrate_lindblad(params: &AtomParams, t_end: f64, dt: f64) -> Result<Trajectory> {
    integrate_with(
        params,
        &IntegrationOptions {
            t_end,
            dt,
            ..IntegrationOptions::for_params(params)
        },
    )
}

pub fn integrate_with(params: &AtomParams, opts: &IntegrationOptions) -> Result<Trajectory> {
    params.field.validate()?;
    let bound = max_step(params);
    if !(opts.dt > 0.0 && opts.dt <= bound * (1.0 + 1e-12)) {
        return Err(Error::StepSize(format!("dt = {} must be in (0, {bound}]", opts.dt)));
    }
    let horizon = min_horizon(params);
    if !(opts.t_end >= horizon * (1.0 - 1e-12)) {
        return Err(Error::StepSize(format!(
            "t_end = {} is shorter than 5/γ = {horizon}",
            opts.t_end
        )));
    }
    if opts.samples_per_period < MIN_SAMPLES {
        return Err(Error::Sampling(format!(
            "{} samples per period, need at least {MIN_SAMPLES}",
            opts.samples_per_period
        )));
    }
    let trace: Complex64 = (0..4).map(|k| opts.initial[k][k]).sum();
    if (trace - 1.0).norm() > 1e-12 {
        return Err(Error::InvalidParameter {
            name: "initial",
            reason: format!("initial state has trace {trace}"),
        });
    }

    let period = TAU / params.field.omega_m;
    let m = opts.samples_per_period;
    let stride = (period / (opts.dt * m as f64)).ceil() as usize;
    let per_period = stride * m;
    let h = period / per_period as f64;
    let periods = (opts.t_end / period).ceil().max(1.0) as usize;

    let model = Model::new(params, per_period, h);
    let mut rho = opts.initial;
    let mut final_period = Vec::with_capacity(m + 1);
    let mut max_drift = 0.0f64;
    let mut period_start = rho;

    for p in 0..periods {
        let last = p + 1 == periods;
        if last {
            period_start = rho;
        }
        for k in 0..per_period {
            if last && k % stride == 0 {
                let t = (p * per_period + k) as f64 * h;
                final_period.push(DensityMatrixSnapshot::from_matrix(t, &rho));
            }
            model.rk4(&mut rho, k);
            let drift = (rho[0][0] + rho[1][1] + rho[2][2] + rho[3][3] - 1.0).norm();
            max_drift = max_drift.max(drift);
            if !(drift <= TRACE_DRIFT_LIMIT) {
                return Err(Error::TraceDrift {
                    drift,
                    time: (p * per_period + k + 1) as f64 * h,
                });
            }
        }
    }
    final_period.push(DensityMatrixSnapshot::from_matrix(
        (periods * per_period) as f64 * h,
        &rho,
    ));

    let mut defect = 0.0f64;
    for j in 0..4 {
        for k in 0..4 {
            defect = defect.max((rho[j][k] - period_start[j][k]).norm());
        }
    }
    if !(defect < PERIODICITY_LIMIT) {
        return Err(Error::NotPeriodic { defect });
    }

    Ok(Trajectory {
        step: h,
        steps_per_period: per_period,
        periods,
        final_period,
        max_trace_drift: max_drift,
        periodicity_defect: defect,
    })
}

/// Right-hand side of the master equation with the drive tabulated on the
/// half-step grid of one period.
struct Model {
    energy: [f64; 4],
    kappa: [f64; 2],
    /// `Ω(j h / 2)` for `j ∈ [0, 2P)`
    rabi: Vec<Complex64>,
    decay: [[f64; 4]; 4],
    gamma_excited: f64,
    gamma_ground: f64,
    h: f64,
}

const E: usize = 3;

impl Model {
    fn new(params: &AtomParams, per_period: usize, h: f64) -> Self {
        let big = params.rates.gamma_excited;
        let small = params.rates.gamma_ground;
        let mut energy = [0.0; 4];
        for g in Level::COUPLED {
            energy[g.index()] = f64::from(g.m()) * params.omega_l;
        }
        energy[E] = -params.field.delta;

        // jump operators sqrt(Γ/3)|g⟩⟨e| and sqrt(γ)|g'⟩⟨g| (g ≠ g')
        // leave these anticommutator rates on each element
        let leave = [2.0 * small, 2.0 * small, 2.0 * small, big];
        let mut decay = [[0.0; 4]; 4];
        for (j, row) in decay.iter_mut().enumerate() {
            for (k, d) in row.iter_mut().enumerate() {
                *d = 0.5 * (leave[j] + leave[k]);
            }
        }

        let rabi = (0..2 * per_period)
            .map(|j| total_rabi(&params.field, j as f64 * 0.5 * h))
            .collect();
        Self {
            energy,
            kappa: [
                -Level::Minus.dipole_factor(params.eps),
                -Level::Plus.dipole_factor(params.eps),
            ],
            rabi,
            decay,
            gamma_excited: big,
            gamma_ground: small,
            h,
        }
    }

    fn derivative(&self, rho: &Matrix, rabi: Complex64) -> Matrix {
        // H = diag(energy) + V, V(e,g) = κ_g Ω, V(g,e) = κ_g Ω*
        let v = [self.kappa[0] * rabi, self.kappa[1] * rabi];
        let mut out = [[ZERO; 4]; 4];
        for j in 0..4 {
            for k in 0..4 {
                let mut comm = (self.energy[j] - self.energy[k]) * rho[j][k];
                // (Vρ)_jk
                if j == E {
                    comm += v[0] * rho[0][k] + v[1] * rho[1][k];
                } else if j < 2 {
                    comm += v[j].conj() * rho[E][k];
                }
                // (ρV)_jk
                if k == E {
                    comm -= rho[j][0] * v[0].conj() + rho[j][1] * v[1].conj();
                } else if k < 2 {
                    comm -= rho[j][E] * v[k];
                }
                out[j][k] = -I * comm - self.decay[j][k] * rho[j][k];
            }
        }
        let pops = [rho[0][0], rho[1][1], rho[2][2]];
        let total: Complex64 = pops.iter().sum();
        let fed = self.gamma_excited / 3.0 * rho[E][E];
        for g in 0..3 {
            out[g][g] += fed + self.gamma_ground * (total - pops[g]);
        }
        out
    }

    /// One step from grid point `k` of the period.
    fn rk4(&self, rho: &mut Matrix, k: usize) {
        let n = self.rabi.len();
        let at = |j: usize| self.rabi[j % n];
        let h = self.h;
        let k1 = self.derivative(rho, at(2 * k));
        let k2 = self.derivative(&axpy(rho, 0.5 * h, &k1), at(2 * k + 1));
        let k3 = self.derivative(&axpy(rho, 0.5 * h, &k2), at(2 * k + 1));
        let k4 = self.derivative(&axpy(rho, h, &k3), at(2 * k + 2));
        let w = h / 6.0;
        for j in 0..4 {
            for c in 0..4 {
                rho[j][c] += w * (k1[j][c] + 2.0 * (k2[j][c] + k3[j][c]) + k4[j][c]);
            }
        }
    }
}

fn axpy(x: &Matrix, a: f64, y: &Matrix) -> Matrix {
    let mut out = *x;
    for j in 0..4 {
        for k in 0..4 {
            out[j][k] += a * y[j][k];
        }
    }
    out
}

/// Period average of every element by the periodic trapezoid rule.
///
/// `series` must sample exactly one modulation period uniformly, with the
/// closing sample at `t0 + T` included.
pub fn dc_extract(series: &[DensityMatrixSnapshot]) -> Result<[Complex64; 10]> {
    if series.len() < MIN_SAMPLES + 1 {
        return Err(Error::Sampling(format!(
            "{} samples over the period, need at least {}",
            series.len(),
            MIN_SAMPLES + 1
        )));
    }
    let intervals = series.len() - 1;
    let span = series[intervals].time - series[0].time;
    let h = span / intervals as f64;
    if !(h > 0.0) {
        return Err(Error::Sampling("sample times do not increase".into()));
    }
    for (i, w) in series.windows(2).enumerate() {
        let d = w[1].time - w[0].time;
        if (d - h).abs() > 1e-9 * h {
            return Err(Error::Sampling(format!(
                "spacing {d} at sample {i} differs from {h}"
            )));
        }
    }
    let mut out = [ZERO; 10];
    for (i, s) in series.iter().enumerate() {
        let w = if i == 0 || i == intervals { 0.5 } else { 1.0 };
        for (o, e) in out.iter_mut().zip(&s.elements) {
            *o += w * e;
        }
    }
    Ok(out.map(|v| v / intervals as f64))
}

pub fn element_agrees(oracle: Complex64, floquet: Complex64) -> bool {
    (oracle - floquet).norm() <= COMPARE_ABSOLUTE.max(COMPARE_RELATIVE * floquet.norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    pub params: AtomParams,
    pub oracle: [Complex64; 10],
    pub floquet: [Complex64; 10],
    pub periodicity_defect: f64,
    pub max_trace_drift: f64,
}

impl OracleComparison {
    pub fn deviations(&self) -> [f64; 10] {
        let mut out = [0.0; 10];
        for (k, d) in out.iter_mut().enumerate() {
            *d = (self.oracle[k] - self.floquet[k]).norm();
        }
        out
    }

    pub fn max_deviation(&self) -> f64 {
        self.deviations().into_iter().fold(0.0, f64::max)
    }

    pub fn pass(&self) -> bool {
        self.oracle
            .iter()
            .zip(&self.floquet)
            .all(|(o, f)| element_agrees(*o, *f))
    }
}

/// Oracle DC elements next to the Floquet `n = 0` coefficients.
pub fn compare_with_floquet(
    params: &AtomParams,
    order: usize,
    opts: &IntegrationOptions,
) -> Result<OracleComparison> {
    let state = steady_state(params, order)?;
    let traj = integrate_with(params, opts)?;
    let mut floquet = [ZERO; 10];
    for (f, (r, c)) in floquet.iter_mut().zip(SNAPSHOT_ELEMENTS) {
        *f = state.element(0, r, c);
    }
    Ok(OracleComparison {
        params: *params,
        oracle: traj.dc()?,
        floquet,
        periodicity_defect: traj.periodicity_defect,
        max_trace_drift: traj.max_trace_drift,
    })
}

/// [`compare_with_floquet`] over several points on the current rayon pool,
/// each with its default options.
pub fn compare_many(points: &[AtomParams], order: usize) -> Vec<Result<OracleComparison>> {
    points
        .par_iter()
        .map(|p| compare_with_floquet(p, order, &IntegrationOptions::for_params(p)))
        .collect()
}

/// Debug dump: `time`, then real and imaginary part of each element.
pub fn write_trajectory_csv<W: Write>(mut w: W, series: &[DensityMatrixSnapshot]) -> std::io::Result<()> {
    let name = |l: Level| match l {
        Level::Minus => "m",
        Level::Plus => "p",
        Level::Zero => "0",
        Level::Excited => "e",
    };
    write!(w, "time")?;
    for (r, c) in SNAPSHOT_ELEMENTS {
        write!(w, ",re_{}{},im_{}{}", name(r), name(c), name(r), name(c))?;
    }
    writeln!(w)?;
    for s in series {
        write!(w, "{:?}", s.time)?;
        for e in &s.elements {
            write!(w, ",{:?},{:?}", e.re, e.im)?;
        }
        writeln!(w)?;
    }
    Ok(())
}
