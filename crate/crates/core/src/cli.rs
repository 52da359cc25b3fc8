//! Command-line front end behind the `nbfc` binary.
//!
//! Settings are layered: built-in defaults, then a flat `key = value` file
//! given with `--config`, then flags. File keys are the long flag names
//! without the dashes. Every CSV starts with the effective configuration as
//! `# key = value` lines, so a run can be reproduced from its output.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;

use crate::atomfield::{
    phase_preset, AtomParams, EllipticityAngle, Phase, PhasePreset, RelaxationRates, TrichromaticField,
};
use crate::comb::{bessel, teeth_spectrum};
use crate::floquet::truncation_check;
use crate::observables::{
    feature_extract, lockin_derivative, scan_larmor, Channel, Detection, LineShapeScan, ScanGrid, Trace,
    ELLIPTICITY_GUARD,
};
use crate::oracle;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_THRESHOLD: i32 = 4;

/// Every key accepted in a config file, in echo order.
pub const KEYS: [&str; 22] = [
    "mode",
    "gamma-excited",
    "gamma-ground",
    "rabi",
    "omega-m",
    "delta",
    "epsilon",
    "phases",
    "phase-preset",
    "order",
    "scan",
    "points",
    "derivative",
    "detection",
    "channels",
    "output",
    "workers",
    "mod-amplitude",
    "teeth",
    "larmor",
    "tolerance",
    "figure",
];

const MAX_ORDER: usize = 40;

#[derive(Parser, Debug, Default, Clone)]
#[command(
    name = "nbfc",
    version,
    about = "Magneto-optical line shapes of a J=1 -> J'=0 atom in a trichromatic comb field"
)]
pub struct Args {
    /// scan | comb | oracle-check | truncation-check | figure-preset
    #[arg(long)]
    pub mode: Option<String>,
    /// Excited-state decay rate Γ (kHz)
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_excited: Option<String>,
    /// Ground-state relaxation rate γ (kHz)
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_ground: Option<String>,
    /// One Rabi frequency for all teeth, or `rabi_0,rabi_minus,rabi_plus` (kHz)
    #[arg(long, allow_hyphen_values = true)]
    pub rabi: Option<String>,
    /// Modulation frequency ωm (kHz)
    #[arg(long, allow_hyphen_values = true)]
    pub omega_m: Option<String>,
    /// Detuning δ of the central component (kHz)
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<String>,
    /// Ellipticity angle ε (rad), |ε| < π/4
    #[arg(long, allow_hyphen_values = true)]
    pub epsilon: Option<String>,
    /// Explicit phases `φ1,φ2,φ3`, each 0 or pi
    #[arg(long, conflicts_with = "phase_preset")]
    pub phases: Option<String>,
    /// center | wing-like
    #[arg(long)]
    pub phase_preset: Option<String>,
    /// Harmonic truncation order N
    #[arg(long)]
    pub order: Option<String>,
    /// Larmor scan range `start,stop` (kHz)
    #[arg(long, allow_hyphen_values = true)]
    pub scan: Option<String>,
    /// Number of scan points, endpoints included
    #[arg(long)]
    pub points: Option<String>,
    /// Append negative-derivative (lock-in) columns
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub derivative: Option<String>,
    /// carrier | all-teeth
    #[arg(long)]
    pub detection: Option<String>,
    /// Comma-separated subset of absorption,birefringence,dichroism
    #[arg(long)]
    pub channels: Option<String>,
    /// Output file (scan, comb, checks) or directory (figure-preset)
    #[arg(long)]
    pub output: Option<String>,
    /// Worker threads for scans, 0 = all cores
    #[arg(long)]
    pub workers: Option<String>,
    /// Frequency-modulation amplitude A_m for comb mode (kHz)
    #[arg(long, allow_hyphen_values = true)]
    pub mod_amplitude: Option<String>,
    /// Highest tooth index |n| for comb mode
    #[arg(long)]
    pub teeth: Option<String>,
    /// Larmor frequencies for the check modes (kHz), comma-separated
    #[arg(long, allow_hyphen_values = true)]
    pub larmor: Option<String>,
    /// Pass threshold for truncation-check
    #[arg(long)]
    pub tolerance: Option<String>,
    /// fig3 | fig4 | all
    #[arg(long)]
    pub figure: Option<String>,
    /// Config file with `key = value` lines
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Args {
    /// Flags that were given, as `(key, value)` pairs.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let all = [
            ("mode", &self.mode),
            ("gamma-excited", &self.gamma_excited),
            ("gamma-ground", &self.gamma_ground),
            ("rabi", &self.rabi),
            ("omega-m", &self.omega_m),
            ("delta", &self.delta),
            ("epsilon", &self.epsilon),
            ("phases", &self.phases),
            ("phase-preset", &self.phase_preset),
            ("order", &self.order),
            ("scan", &self.scan),
            ("points", &self.points),
            ("derivative", &self.derivative),
            ("detection", &self.detection),
            ("channels", &self.channels),
            ("output", &self.output),
            ("workers", &self.workers),
            ("mod-amplitude", &self.mod_amplitude),
            ("teeth", &self.teeth),
            ("larmor", &self.larmor),
            ("tolerance", &self.tolerance),
            ("figure", &self.figure),
        ];
        all.into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    fn new(key: &str, reason: impl Into<String>) -> Self {
        Self {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error in `{}`: {}", self.key, self.reason)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Solver(crate::Error),
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => e.fmt(f),
            CliError::Solver(e) => write!(f, "solver failure: {e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Solver(e)
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Scan,
    Comb,
    OracleCheck,
    TruncationCheck,
    FigurePreset,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Scan => "scan",
            Mode::Comb => "comb",
            Mode::OracleCheck => "oracle-check",
            Mode::TruncationCheck => "truncation-check",
            Mode::FigurePreset => "figure-preset",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Mode::Scan,
            Mode::Comb,
            Mode::OracleCheck,
            Mode::TruncationCheck,
            Mode::FigurePreset,
        ]
        .into_iter()
        .find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig3,
    Fig4,
    All,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::All => "all",
        }
    }
}

fn preset_name(p: PhasePreset) -> &'static str {
    match p {
        PhasePreset::Center => "center",
        PhasePreset::WingLike => "wing-like",
    }
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Zero => "0",
        Phase::Pi => "pi",
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub gamma_excited: f64,
    pub gamma_ground: f64,
    /// `[rabi_0, rabi_minus, rabi_plus]`
    pub rabi: [f64; 3],
    pub omega_m: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub phases: (Phase, Phase, Phase),
    pub order: usize,
    pub scan: (f64, f64),
    pub points: usize,
    pub derivative: bool,
    pub detection: Detection,
    pub channels: Vec<Channel>,
    pub output: Option<PathBuf>,
    pub workers: usize,
    pub mod_amplitude: f64,
    pub teeth: u64,
    pub larmor: Vec<f64>,
    pub tolerance: f64,
    pub figure: Figure,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Scan,
            gamma_excited: 5600.0,
            gamma_ground: 1.0,
            rabi: [5.0; 3],
            omega_m: 12.0,
            delta: 0.0,
            epsilon: 0.0,
            phases: phase_preset(PhasePreset::WingLike),
            order: 2,
            scan: (-20.0, 20.0),
            points: 801,
            derivative: false,
            detection: Detection::Carrier,
            channels: Channel::ALL.to_vec(),
            output: None,
            workers: 0,
            mod_amplitude: 0.0,
            teeth: 5,
            larmor: vec![0.0, 3.0, 6.0, 12.0],
            tolerance: 1e-6,
            figure: Figure::All,
        }
    }
}

fn number(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| ConfigError::new(key, format!("`{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(ConfigError::new(key, "must be finite"));
    }
    Ok(x)
}

fn positive(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x = number(key, v)?;
    if x <= 0.0 {
        return Err(ConfigError::new(key, format!("must be > 0, got {x}")));
    }
    Ok(x)
}

fn non_negative(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x = number(key, v)?;
    if x < 0.0 {
        return Err(ConfigError::new(key, format!("must be >= 0, got {x}")));
    }
    Ok(x)
}

fn integer(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.trim()
        .parse()
        .map_err(|_| ConfigError::new(key, format!("`{v}` is not a non-negative integer")))
}

fn list(v: &str) -> Vec<&str> {
    v.split(',').map(str::trim).collect()
}

fn boolean(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.trim() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(ConfigError::new(key, format!("`{v}` is not a boolean"))),
    }
}

impl RunConfig {
    /// Applies one setting. The value is parsed and range-checked here;
    /// checks that involve several keys happen in [`RunConfig::validate`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "mode" => {
                self.mode = Mode::parse(value.trim()).ok_or_else(|| {
                    ConfigError::new(
                        key,
                        format!("unknown mode `{value}`, expected scan, comb, oracle-check, truncation-check or figure-preset"),
                    )
                })?
            }
            "gamma-excited" => self.gamma_excited = positive(key, value)?,
            "gamma-ground" => self.gamma_ground = positive(key, value)?,
            "rabi" => {
                let parts = list(value);
                let v: Vec<f64> = parts
                    .iter()
                    .map(|p| non_negative(key, p))
                    .collect::<Result<_, _>>()?;
                self.rabi = match v.as_slice() {
                    [x] => [*x; 3],
                    [a, b, c] => [*a, *b, *c],
                    _ => return Err(ConfigError::new(key, "expected one value or three (rabi_0,rabi_minus,rabi_plus)")),
                };
            }
            "omega-m" => self.omega_m = positive(key, value)?,
            "delta" => self.delta = number(key, value)?,
            "epsilon" => {
                let e = number(key, value)?;
                if e.abs() > FRAC_PI_4 - ELLIPTICITY_GUARD {
                    return Err(ConfigError::new(
                        key,
                        format!("|ε| = {} must stay below π/4 by at least {ELLIPTICITY_GUARD:e}", e.abs()),
                    ));
                }
                self.epsilon = e;
            }
            "phases" => {
                let parts = list(value);
                let ph: Vec<Phase> = parts
                    .iter()
                    .map(|p| Phase::parse(p).ok_or_else(|| ConfigError::new(key, format!("phase `{p}` must be 0 or pi"))))
                    .collect::<Result<_, _>>()?;
                match ph.as_slice() {
                    [a, b, c] => self.phases = (*a, *b, *c),
                    _ => return Err(ConfigError::new(key, "expected three phases φ1,φ2,φ3")),
                }
            }
            "phase-preset" => {
                let p = match value.trim() {
                    "center" => PhasePreset::Center,
                    "wing-like" => PhasePreset::WingLike,
                    other => {
                        return Err(ConfigError::new(
                            key,
                            format!("unknown preset `{other}`, expected center or wing-like"),
                        ))
                    }
                };
                self.phases = phase_preset(p);
            }
            "order" => {
                let n = integer(key, value)?;
                if !(1..=MAX_ORDER).contains(&n) {
                    return Err(ConfigError::new(key, format!("must be in 1..={MAX_ORDER}, got {n}")));
                }
                self.order = n;
            }
            "scan" => match list(value).as_slice() {
                [a, b] => {
                    let (a, b) = (number(key, a)?, number(key, b)?);
                    if a >= b {
                        return Err(ConfigError::new(key, format!("need start < stop, got {a},{b}")));
                    }
                    self.scan = (a, b);
                }
                _ => return Err(ConfigError::new(key, "expected start,stop")),
            },
            "points" => {
                let n = integer(key, value)?;
                if n < 2 {
                    return Err(ConfigError::new(key, format!("a scan needs at least 2 points, got {n}")));
                }
                self.points = n;
            }
            "derivative" => self.derivative = boolean(key, value)?,
            "detection" => {
                self.detection = Detection::parse(value)
                    .ok_or_else(|| ConfigError::new(key, format!("unknown detection `{value}`, expected carrier or all-teeth")))?
            }
            "channels" => {
                let mut chans = Vec::new();
                for p in list(value) {
                    let ch = Channel::ALL
                        .into_iter()
                        .find(|c| c.name() == p)
                        .ok_or_else(|| ConfigError::new(key, format!("unknown channel `{p}`")))?;
                    if !chans.contains(&ch) {
                        chans.push(ch);
                    }
                }
                // keep column order fixed whatever the input order
                chans.sort_by_key(|c| Channel::ALL.iter().position(|x| x == c));
                self.channels = chans;
            }
            "output" => {
                let v = value.trim();
                self.output = if v.is_empty() || v == "-" { None } else { Some(PathBuf::from(v)) };
            }
            "workers" => self.workers = integer(key, value)?,
            "mod-amplitude" => self.mod_amplitude = non_negative(key, value)?,
            "teeth" => self.teeth = integer(key, value)? as u64,
            "larmor" => {
                let v: Vec<f64> = list(value)
                    .iter()
                    .map(|p| number(key, p))
                    .collect::<Result<_, _>>()?;
                self.larmor = v;
            }
            "tolerance" => self.tolerance = positive(key, value)?,
            "figure" => {
                self.figure = match value.trim() {
                    "fig3" => Figure::Fig3,
                    "fig4" => Figure::Fig4,
                    "all" => Figure::All,
                    other => return Err(ConfigError::new(key, format!("unknown figure `{other}`, expected fig3, fig4 or all"))),
                }
            }
            "config" => return Err(ConfigError::new(key, "config files cannot include other config files")),
            other => return Err(ConfigError::new(other, "unknown key")),
        }
        Ok(())
    }

    /// Applies one layer of settings. Setting both `phases` and
    /// `phase-preset` in the same layer is ambiguous and rejected.
    pub fn apply<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<(), ConfigError> {
        let mut seen_phases = false;
        let mut seen_preset = false;
        for (k, v) in pairs {
            seen_phases |= k == "phases";
            seen_preset |= k == "phase-preset";
            if seen_phases && seen_preset {
                return Err(ConfigError::new(k, "`phases` and `phase-preset` are mutually exclusive"));
            }
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.field().map_err(|e| ConfigError::new("rabi", e.to_string()))?;
        if self.channels.is_empty() {
            return Err(ConfigError::new("channels", "select at least one channel"));
        }
        if self.larmor.is_empty() {
            return Err(ConfigError::new("larmor", "need at least one Larmor frequency"));
        }
        if self.mode == Mode::Comb {
            let x = self.mod_amplitude / self.omega_m;
            if !bessel::is_supported(self.teeth as i64, x) {
                return Err(ConfigError::new(
                    "teeth",
                    format!(
                        "modulation index {x} with {} teeth is outside the Bessel range (index <= {}, teeth <= index + {})",
                        self.teeth,
                        bessel::MAX_ARGUMENT,
                        bessel::ORDER_MARGIN
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn field(&self) -> crate::Result<TrichromaticField> {
        TrichromaticField::new(self.rabi, self.phases, self.omega_m, self.delta)
    }

    pub fn rates(&self) -> crate::Result<RelaxationRates> {
        RelaxationRates::new(self.gamma_excited, self.gamma_ground)
    }

    pub fn params(&self, omega_l: f64) -> crate::Result<AtomParams> {
        Ok(AtomParams {
            field: self.field()?,
            eps: EllipticityAngle::new(self.epsilon)?,
            omega_l,
            rates: self.rates()?,
        })
    }

    pub fn grid(&self) -> crate::Result<ScanGrid> {
        ScanGrid::new(self.scan.0, self.scan.1, self.points)
    }

    /// The effective configuration, one entry per key except `phase-preset`,
    /// which is folded into `phases`.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let (p1, p2, p3) = self.phases;
        vec![
            ("mode", self.mode.name().to_string()),
            ("gamma-excited", fmt_num(self.gamma_excited)),
            ("gamma-ground", fmt_num(self.gamma_ground)),
            ("rabi", fmt_list(&self.rabi)),
            ("omega-m", fmt_num(self.omega_m)),
            ("delta", fmt_num(self.delta)),
            ("epsilon", fmt_num(self.epsilon)),
            ("phases", format!("{},{},{}", phase_name(p1), phase_name(p2), phase_name(p3))),
            ("order", self.order.to_string()),
            ("scan", format!("{},{}", fmt_num(self.scan.0), fmt_num(self.scan.1))),
            ("points", self.points.to_string()),
            ("derivative", self.derivative.to_string()),
            ("detection", self.detection.name().to_string()),
            (
                "channels",
                self.channels.iter().map(|c| c.name()).collect::<Vec<_>>().join(","),
            ),
            (
                "output",
                self.output
                    .as_ref()
                    .map_or_else(|| "-".to_string(), |p| p.display().to_string()),
            ),
            ("workers", self.workers.to_string()),
            ("mod-amplitude", fmt_num(self.mod_amplitude)),
            ("teeth", self.teeth.to_string()),
            ("larmor", fmt_list(&self.larmor)),
            ("tolerance", fmt_num(self.tolerance)),
            ("figure", self.figure.name().to_string()),
        ]
    }

    fn header(&self) -> String {
        let mut s = format!("# nbfc {VERSION}\n");
        for (k, v) in self.pairs() {
            s.push_str(&format!("# {k} = {v}\n"));
        }
        s
    }
}

/// Parses a flat `key = value` file. Blank lines and `#` comments are
/// skipped; a `#` after a value starts a comment too.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::new(&format!("line {}", i + 1), format!("expected `key = value`, got `{line}`")))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(ConfigError::new(k, format!("unknown key on line {}", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Defaults, then the config file, then flags.
pub fn parse_config(args: &Args) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Config(ConfigError::new("config", format!("cannot read {}: {e}", path.display())))
        })?;
        let pairs = parse_config_text(&text)?;
        cfg.apply(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    }
    let flags = args.pairs();
    cfg.apply(flags.iter().map(|(k, v)| (*k, v.as_str())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Files written and whether every check passed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub passed: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            EXIT_OK
        } else {
            EXIT_THRESHOLD
        }
    }
}

/// Runs `cfg`; reports go to `out`, which also receives CSV data when no
/// output path is configured.
pub fn run(cfg: &RunConfig, out: &mut (dyn Write + Send)) -> Result<Outcome, CliError> {
    if cfg.workers == 0 {
        return dispatch(cfg, out);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config(ConfigError::new("workers", e.to_string())))?;
    pool.install(|| dispatch(cfg, out))
}

fn dispatch(cfg: &RunConfig, out: &mut (dyn Write + Send)) -> Result<Outcome, CliError> {
    match cfg.mode {
        Mode::Scan => run_scan(cfg, out),
        Mode::Comb => run_comb(cfg, out),
        Mode::OracleCheck => run_oracle_check(cfg, out),
        Mode::TruncationCheck => run_truncation_check(cfg, out),
        Mode::FigurePreset => run_figures(cfg, out),
    }
}

fn stdout_err(e: io::Error) -> CliError {
    CliError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

/// Solves the Larmor scan described by `cfg`, with derivative columns if
/// requested.
pub fn compute_scan(cfg: &RunConfig) -> Result<LineShapeScan, CliError> {
    let field = cfg.field()?;
    let eps = EllipticityAngle::new(cfg.epsilon)?;
    let scan = scan_larmor(&field, eps, &cfg.rates()?, cfg.order, &cfg.grid()?, cfg.detection)?;
    Ok(if cfg.derivative { lockin_derivative(scan)? } else { scan })
}

/// CSV text of a scan: configuration comments, header, one row per point.
pub fn scan_csv(cfg: &RunConfig, scan: &LineShapeScan) -> String {
    let mut s = cfg.header();
    let mut cols = vec!["omega_L_khz".to_string()];
    cols.extend(cfg.channels.iter().map(|c| c.name().to_string()));
    if scan.derivatives.is_some() {
        cols.extend(cfg.channels.iter().map(|c| format!("d_{}", c.name())));
    }
    s.push_str(&cols.join(","));
    s.push('\n');
    for (i, w) in scan.grid.iter().enumerate() {
        let mut row = vec![fmt_num(*w)];
        row.extend(cfg.channels.iter().map(|&c| fmt_num(scan.responses[i].get(c))));
        if let Some(d) = &scan.derivatives {
            row.extend(cfg.channels.iter().map(|&c| fmt_num(d[i].get(c))));
        }
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Path of the metadata file next to `csv`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta")
}

fn sidecar_text(cfg: &RunConfig, csv: &Path) -> String {
    let mut s = String::from("# nbfc run metadata\n");
    for (k, v) in cfg.pairs() {
        s.push_str(&format!("{k} = {v}\n"));
    }
    s.push_str(&format!("version = {VERSION}\n"));
    for m in ["atomfield", "comb", "floquet", "observables", "oracle", "cli"] {
        s.push_str(&format!("version.{m} = {VERSION}\n"));
    }
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    s.push_str(&format!("timestamp_unix = {now}\n"));
    s.push_str(&format!(
        "data = {}\n",
        csv.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    ));
    s
}

/// Writes `text` to `path` and the metadata sidecar next to it.
fn write_with_sidecar(cfg: &RunConfig, path: &Path, text: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))?;
    let meta = sidecar_path(path);
    fs::write(&meta, sidecar_text(cfg, path)).map_err(io_err(&meta))?;
    files.push(path.to_path_buf());
    files.push(meta);
    Ok(())
}

fn report_failures(scan: &LineShapeScan, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    for f in &scan.failures {
        writeln!(out, "warning: point {} (omega_L = {}) failed: {}", f.index, f.omega_l, f.message).map_err(stdout_err)?;
    }
    Ok(())
}

fn run_scan(cfg: &RunConfig, out: &mut (dyn Write + Send)) -> Result<Outcome, CliError> {
    let scan = compute_scan(cfg)?;
    let text = scan_csv(cfg, &scan);
    let mut outcome = Outcome {
        files: Vec::new(),
        passed: true,
    };
    match &cfg.output {
        Some(path) => {
            write_with_sidecar(cfg, path, &text, &mut outcome.files)?;
            report_failures(&scan, out)?;
            writeln!(out, "wrote {} points to {}", scan.grid.len(), path.display()).map_err(stdout_err)?;
        }
        None => {
            out.write_all(text.as_bytes()).map_err(stdout_err)?;
            report_failures(&scan, &mut io::stderr())?;
        }
    }
    Ok(outcome)
}

/// CSV of the comb teeth: `n, frequency_offset_khz, amplitude, sign`.
pub fn comb_csv(cfg: &RunConfig) -> Result<String, CliError> {
    let spectrum = teeth_spectrum(cfg.omega_m, cfg.mod_amplitude, cfg.teeth)?;
    let mut s = cfg.header();
    s.push_str("n,frequency_offset_khz,amplitude,sign\n");
    for t in &spectrum.teeth {
        s.push_str(&format!(
            "{},{},{},{}\n",
            t.n,
            fmt_num(t.frequency_offset(cfg.omega_m)),
            fmt_num(t.amplitude),
            t.sign
        ));
    }
    Ok(s)
}

fn run_comb(cfg: &RunConfig, out: &mut (dyn Write + Send)) -> Result<Outcome, CliError> {
    let text = comb_csv(cfg)?;
    let mut outcome = Outcome {
        files: Vec::new(),
        passed: true,
    };
    match &cfg.output {
        Some(path) => {
            write_with_sidecar(cfg, path, &text, &mut outcome.files)?;
            writeln!(out, "wrote {} teeth to {}", 2 * cfg.teeth + 1, path.display()).map_err(stdout_err)?;
        }
        None => out.write_all(text.as_bytes()).map_err(stdout_err)?,
    }
    Ok(outcome)
}

fn run_oracle_check(cfg: &RunConfig, out: &mut (dyn Write + Send)) -> Result<Outcome, CliError> {
    let points: Vec<AtomParams> = cfg
        .larmor
        .iter()
        .map(|&w| cfg.params(w))
        .collect::<crate::Result<_>>()?;
    let results = oracle::compare_many(&points, cfg.order);
    let mut passed = true;
    let mut csv = cfg.header();
    csv.push_str("omega_L_khz,max_deviation,periodicity_defect,pass\n");
    writeln!(out, "{:>12} {:>14} {:>14}  result", "omega_L_khz", "max_deviation", "periodicity").map_err(stdout_err)?;
    for (p, r) in points.iter().zip(results) {
        let cmp = r?;
        let ok = cmp.pass();
        passed &= ok;
        let verdict = if ok { "pass" } else { "FAIL" };
        writeln!(
            out,
            "{:>12} {:>14.3e} {:>14.3e}  {verdict}",
            p.omega_l,
            cmp.max_deviation(),
            cmp.periodicity_defect
        )
        .map_err(stdout_err)?;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            fmt_num(p.omega_l),
            fmt_num(cmp.max_deviation()),
            fmt_num(cmp.periodicity_defect),
            ok
        ));
    }
    let mut files = Vec::new();
    if let Some(path) = &cfg.output {
        write_with_sidecar(cfg, path, &csv, &mut files)?;
    }
    writeln!(
        out,
        "oracle check {} (per element: {:e} relative or {:e} absolute)",
        if passed { "passed" } else { "FAILED" },
        oracle::COMPARE_RELATIVE,
        oracle::COMPARE_ABSOLUTE
    )
    .map_err(stdout_err)?;
    Ok(Outcome { files, passed })
}

fn run_truncation_check(cfg: &RunConfig, out: &mut (dyn Write + Send)) -> Result<Outcome, CliError> {
    let mut passed = true;
    let mut csv = cfg.header();
    csv.push_str("omega_L_khz,max_relative_difference,pass\n");
    writeln!(out, "{:>12} {:>24}  result", "omega_L_khz", format!("N={} vs N={}", cfg.order, cfg.order + 1)).map_err(stdout_err)?;
    for &w in &cfg.larmor {
        let rep = truncation_check(&cfg.params(w)?, cfg.order, cfg.tolerance, cfg.detection)?;
        passed &= rep.pass;
        let verdict = if rep.pass { "pass" } else { "FAIL" };
        writeln!(out, "{:>12} {:>24.3e}  {verdict}", w, rep.max_relative_difference).map_err(stdout_err)?;
        csv.push_str(&format!("{},{},{}\n", fmt_num(w), fmt_num(rep.max_relative_difference), rep.pass));
    }
    let mut files = Vec::new();
    if let Some(path) = &cfg.output {
        write_with_sidecar(cfg, path, &csv, &mut files)?;
    }
    writeln!(
        out,
        "truncation check {} (tolerance {:e})",
        if passed { "passed" } else { "FAILED" },
        cfg.tolerance
    )
    .map_err(stdout_err)?;
    Ok(Outcome { files, passed })
}

/// Ellipticities of the fig4 curves (rad).
pub const FIG4_EPSILONS: [f64; 5] = [-0.1, -0.05, 0.0, 0.05, 0.1];

/// One curve of a figure preset: file stem and its configuration.
pub fn figure_curves(cfg: &RunConfig) -> Vec<(String, RunConfig)> {
    let mut curves = Vec::new();
    let base = RunConfig {
        mode: Mode::Scan,
        derivative: true,
        output: None,
        ..cfg.clone()
    };
    if matches!(cfg.figure, Figure::Fig3 | Figure::All) {
        for preset in [PhasePreset::Center, PhasePreset::WingLike] {
            let c = RunConfig {
                epsilon: 0.0,
                phases: phase_preset(preset),
                ..base.clone()
            };
            curves.push((format!("fig3_{}", preset_name(preset)), c));
        }
    }
    if matches!(cfg.figure, Figure::Fig4 | Figure::All) {
        for (tag, delta) in [("resonant", 0.0), ("offresonant", cfg.gamma_excited)] {
            for eps in FIG4_EPSILONS {
                let c = RunConfig {
                    epsilon: eps,
                    delta,
                    ..base.clone()
                };
                curves.push((format!("fig4_{tag}_eps_{}", fmt_num(eps)), c));
            }
        }
    }
    curves
}

fn run_figures(cfg: &RunConfig, out: &mut (dyn Write + Send)) -> Result<Outcome, CliError> {
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("figures"));
    let mut outcome = Outcome {
        files: Vec::new(),
        passed: true,
    };
    let mut fig3: Vec<(String, LineShapeScan)> = Vec::new();
    for (stem, curve) in figure_curves(cfg) {
        let path = dir.join(format!("{stem}.csv"));
        let curve = RunConfig {
            output: Some(path.clone()),
            ..curve
        };
        let scan = compute_scan(&curve)?;
        report_failures(&scan, out)?;
        write_with_sidecar(&curve, &path, &scan_csv(&curve, &scan), &mut outcome.files)?;
        writeln!(out, "wrote {}", path.display()).map_err(stdout_err)?;
        if stem.starts_with("fig3") {
            fig3.push((stem, scan));
        }
    }
    if fig3.len() == 2 {
        let wm = cfg.omega_m;
        let expected = [-wm, -wm / 2.0, 0.0, wm / 2.0, wm];
        let in_range: Vec<f64> = expected
            .into_iter()
            .filter(|x| (cfg.scan.0..=cfg.scan.1).contains(x))
            .collect();
        let trace = Trace::Derivative(Channel::Absorption);
        for (stem, scan) in &fig3 {
            let feats = feature_extract(scan, trace, &in_range)?;
            writeln!(out, "{stem}: absorption-derivative features").map_err(stdout_err)?;
            for (x, f) in in_range.iter().zip(&feats) {
                writeln!(out, "  near {x:>7}: position {:>9.4}, amplitude {:.4e}", f.position, f.amplitude).map_err(stdout_err)?;
            }
        }
    }
    Ok(outcome)
}

/// Parses `args`, runs, and maps the result to an exit status. Messages go
/// to stdout and stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match parse_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("nbfc: {e}");
            return e.exit_code();
        }
    };
    match run(&cfg, &mut io::stdout()) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("nbfc: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Args {
        let mut v = vec!["nbfc"];
        v.extend_from_slice(list);
        Args::try_parse_from(v).unwrap()
    }

    #[test]
    fn defaults() {
        let cfg = parse_config(&args(&[])).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.gamma_excited, 5600.0);
        assert_eq!(cfg.rabi, [5.0; 3]);
        assert_eq!(cfg.phases, phase_preset(PhasePreset::WingLike));
        assert_eq!((cfg.scan, cfg.points, cfg.order), ((-20.0, 20.0), 801, 2));
    }

    #[test]
    fn flag_examples() {
        let err = parse_config(&args(&["--epsilon", "0.9"])).unwrap_err();
        match err {
            CliError::Config(e) => assert_eq!(e.key, "epsilon"),
            other => panic!("{other:?}"),
        }
        let cfg = parse_config(&args(&["--phases", "0,0,pi"])).unwrap();
        assert_eq!(cfg.phases, (Phase::Zero, Phase::Zero, Phase::Pi));
        let cfg = parse_config(&args(&["--delta", "-5600", "--scan", "-3,3", "--rabi", "1,2,3"])).unwrap();
        assert_eq!(cfg.delta, -5600.0);
        assert_eq!(cfg.scan, (-3.0, 3.0));
        assert_eq!(cfg.rabi, [1.0, 2.0, 3.0]);
        assert!(parse_config(&args(&["--derivative"])).unwrap().derivative);
        assert!(Args::try_parse_from(["nbfc", "--phases", "0,0,0", "--phase-preset", "center"]).is_err());
    }

    #[test]
    fn config_text_parsing() {
        let pairs = parse_config_text("# comment\n\nrabi = 4 # trailing\nmode=comb\n").unwrap();
        assert_eq!(
            pairs,
            vec![("rabi".into(), "4".into()), ("mode".into(), "comb".into())]
        );
        assert_eq!(parse_config_text("bogus = 1\n").unwrap_err().key, "bogus");
        assert!(parse_config_text("just words\n").is_err());
    }

    #[test]
    fn layer_conflicts_and_echo_round_trip() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply([("phases", "0,0,pi"), ("phase-preset", "center")]).is_err());

        let mut cfg = RunConfig::default();
        cfg.apply([("epsilon", "0.1"), ("channels", "dichroism,absorption"), ("larmor", "1,2")]).unwrap();
        let echoed: Vec<(String, String)> = cfg.pairs().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        let mut again = RunConfig::default();
        again.apply(echoed.iter().map(|(k, v)| (k.as_str(), v.as_str()))).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(cfg.channels, vec![Channel::Absorption, Channel::Dichroism]);
    }

    #[test]
    fn comb_with_zero_modulation_is_one_tooth() {
        let mut cfg = RunConfig::default();
        cfg.apply([("mode", "comb"), ("teeth", "2")]).unwrap();
        let csv = comb_csv(&cfg).unwrap();
        let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "n,frequency_offset_khz,amplitude,sign");
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[3], "0,0.0,1.0,1");
        assert_eq!(rows[1], "-2,-24.0,0.0,1");
    }

    #[test]
    fn comb_range_is_checked() {
        let mut cfg = RunConfig::default();
        cfg.apply([("mode", "comb"), ("mod-amplitude", "1e9")]).unwrap();
        assert_eq!(cfg.validate().unwrap_err().key, "teeth");
    }

    #[test]
    fn figure_curve_set() {
        let cfg = RunConfig::default();
        let curves = figure_curves(&cfg);
        assert_eq!(curves.len(), 2 + 2 * FIG4_EPSILONS.len());
        assert_eq!(curves[0].0, "fig3_center");
        assert_eq!(curves[1].1.phases, phase_preset(PhasePreset::WingLike));
        assert!(curves.iter().all(|(_, c)| c.derivative));
        assert!(curves.iter().any(|(s, c)| s == "fig4_offresonant_eps_-0.05" && c.delta == 5600.0));
    }

    #[test]
    fn number_format_round_trips() {
        for v in [0.1, -20.0, 1e-20, 2.302260e-4, std::f64::consts::PI] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
    }
}
