//! Acceptance suite. Prints one PASS/FAIL line per criterion, with details
//! underneath, and exits non-zero if any criterion fails.

use std::panic;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nbfc::atomfield::{
    AtomParams, EllipticityAngle, Phase, PhasePreset, RelaxationRates, TrichromaticField,
};
use nbfc::cli::{self, RunConfig};
use nbfc::comb::{bessel_j, classify_phase_triple, teeth_spectrum, PhaseClass};
use nbfc::floquet::{assemble_system, solve_steady_state, truncation_check, Element};
use nbfc::observables::{
    feature_extract, lockin_derivative, scan_larmor, Channel, Detection, LineShapeScan, ScanGrid, Trace,
};
use nbfc::oracle::{self, compare_many};

const BIG_GAMMA: f64 = 5600.0;
const SMALL_GAMMA: f64 = 1.0;
const RABI: f64 = 5.0;
const OMEGA_M: f64 = 12.0;
const ORDER: usize = 2;

struct Report {
    pass: bool,
    details: Vec<String>,
}

impl Report {
    fn new() -> Self {
        Self {
            pass: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.details.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, line: String) {
        self.details.push(format!("     {line}"));
    }

    fn timed(&mut self, elapsed: Duration, limit: Duration) {
        self.check(
            elapsed < limit,
            format!("runtime {:.2} s (limit {} s)", elapsed.as_secs_f64(), limit.as_secs()),
        );
    }
}

fn paper(preset: PhasePreset, eps: f64, delta: f64, omega_l: f64) -> AtomParams {
    AtomParams {
        field: TrichromaticField::symmetric(RABI, preset, OMEGA_M, delta).unwrap(),
        eps: EllipticityAngle::new(eps).unwrap(),
        omega_l,
        rates: RelaxationRates::new(BIG_GAMMA, SMALL_GAMMA).unwrap(),
    }
}

fn grid() -> ScanGrid {
    ScanGrid::new(-20.0, 20.0, 801).unwrap()
}

fn scan(preset: PhasePreset, eps: f64, delta: f64, detection: Detection) -> LineShapeScan {
    let p = paper(preset, eps, delta, 0.0);
    let s = scan_larmor(&p.field, p.eps, &p.rates, ORDER, &grid(), detection).unwrap();
    assert!(s.failures.is_empty(), "scan had failed points: {:?}", s.failures);
    lockin_derivative(s).unwrap()
}

fn conservation() -> Report {
    let mut r = Report::new();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_2024);
    let (mut trace0, mut trace_n, mut herm, mut neg, mut imag, mut resid) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let pick = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { Phase::Pi } else { Phase::Zero };
    for _ in 0..100 {
        let rabi = [rng.gen_range(0.0..=20.0), rng.gen_range(0.0..=20.0), rng.gen_range(0.0..=20.0)];
        let phases = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        let delta = rng.gen_range(-2.0 * BIG_GAMMA..=2.0 * BIG_GAMMA);
        let params = AtomParams {
            field: TrichromaticField::new(rabi, phases, OMEGA_M, delta).unwrap(),
            eps: EllipticityAngle::new(rng.gen_range(-0.6..=0.6)).unwrap(),
            omega_l: rng.gen_range(-30.0..=30.0),
            rates: RelaxationRates::new(BIG_GAMMA, SMALL_GAMMA).unwrap(),
        };
        let sys = assemble_system(&params, ORDER).unwrap();
        let state = solve_steady_state(&sys).unwrap();
        let x = state.coefficients();

        let ax = sys.q.mul_vec(x);
        let rnorm = sys.r.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let res = ax.iter().zip(&sys.r).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        resid = resid.max(res / rnorm.max(1.0));

        let c = |n: i64, e: Element| state.coefficient(n, e);
        for n in -(ORDER as i64)..=(ORDER as i64) {
            let rho00 = state.population(n, nbfc::atomfield::Level::Zero);
            let tr = c(n, Element::PopMinus) + c(n, Element::PopPlus) + c(n, Element::PopExcited) + rho00;
            if n == 0 {
                trace0 = trace0.max((tr - 1.0).norm());
            } else {
                trace_n = trace_n.max(tr.norm());
            }
            let pairs = [
                (Element::PopMinus, Element::PopMinus),
                (Element::PopPlus, Element::PopPlus),
                (Element::PopExcited, Element::PopExcited),
                (Element::ZeemanMinusPlus, Element::ZeemanPlusMinus),
                (Element::OpticalMinusE, Element::OpticalEMinus),
                (Element::OpticalPlusE, Element::OpticalEPlus),
            ];
            for (a, b) in pairs {
                herm = herm.max((c(n, a) - c(-n, b).conj()).norm());
            }
        }
        let pops: [Complex64; 4] = [
            c(0, Element::PopMinus),
            c(0, Element::PopPlus),
            c(0, Element::PopExcited),
            state.population(0, nbfc::atomfield::Level::Zero),
        ];
        for p in pops {
            neg = neg.max(-p.re).max(p.re - 1.0);
            imag = imag.max(p.im.abs());
        }
    }
    let elapsed = start.elapsed();
    r.check(trace0 < 1e-10, format!("DC trace error {trace0:.2e} (< 1e-10)"));
    r.check(trace_n < 1e-10, format!("n != 0 trace {trace_n:.2e} (< 1e-10)"));
    r.check(herm < 1e-9, format!("Hermiticity pairing {herm:.2e} (< 1e-9)"));
    r.check(neg <= 1e-10, format!("DC populations outside [0, 1] by {neg:.2e} (<= 1e-10)"));
    r.check(imag <= 1e-10, format!("imaginary part of DC populations {imag:.2e} (<= 1e-10)"));
    r.check(resid < 1e-9, format!("relative linear residual {resid:.2e} (< 1e-9)"));
    r.timed(elapsed, Duration::from_secs(10));
    r
}

fn oracle_equivalence() -> Report {
    let mut r = Report::new();
    let start = Instant::now();
    let mut points = Vec::new();
    for eps in [0.0, 0.1] {
        for delta in [0.0, BIG_GAMMA] {
            for w in [0.0, 3.0, 6.0, 12.0] {
                points.push(paper(PhasePreset::WingLike, eps, delta, w));
            }
        }
    }
    for (p, res) in points.iter().zip(compare_many(&points, ORDER)) {
        let label = format!("eps={} delta={} omega_L={}", p.eps.radians(), p.field.delta, p.omega_l);
        match res {
            Ok(cmp) => {
                let margin = cmp
                    .oracle
                    .iter()
                    .zip(&cmp.floquet)
                    .map(|(o, f)| (o - f).norm() / oracle::COMPARE_ABSOLUTE.max(oracle::COMPARE_RELATIVE * f.norm()))
                    .fold(0.0, f64::max);
                r.check(
                    cmp.pass(),
                    format!("{label}: max |dev| {:.2e}, worst element at {:.3} of its bound", cmp.max_deviation(), margin),
                );
            }
            Err(e) => r.check(false, format!("{label}: {e}")),
        }
    }
    r.timed(start.elapsed(), Duration::from_secs(120));
    r
}

const EXPECTED: [f64; 5] = [-12.0, -6.0, 0.0, 6.0, 12.0];

fn resonance_positions() -> Report {
    let mut r = Report::new();
    let start = Instant::now();
    let s = scan(PhasePreset::WingLike, 0.0, 0.0, Detection::Carrier);
    let elapsed = start.elapsed();
    let step = s.step();
    let feats = feature_extract(&s, Trace::Derivative(Channel::Absorption), &EXPECTED).unwrap();
    for (x, f) in EXPECTED.iter().zip(&feats) {
        let off = (f.position - x).abs();
        r.check(
            off <= step * (1.0 + 1e-9),
            format!("feature near {x:+}: found at {:+.4} (|offset| {off:.4}, one step = {step})", f.position),
        );
    }
    r.timed(elapsed, Duration::from_secs(5));

    let all = scan(PhasePreset::WingLike, 0.0, 0.0, Detection::AllTeeth);
    let feats = feature_extract(&all, Trace::Derivative(Channel::Absorption), &EXPECTED).unwrap();
    let pos: Vec<String> = feats.iter().map(|f| format!("{:+.3}", f.position)).collect();
    r.note(format!("for comparison, all-teeth detection puts the features at [{}]", pos.join(", ")));
    r
}

fn phase_class_suppression() -> Report {
    let mut r = Report::new();
    let trace = Trace::Derivative(Channel::Absorption);
    let wing = scan(PhasePreset::WingLike, 0.0, 0.0, Detection::Carrier);
    let center = scan(PhasePreset::Center, 0.0, 0.0, Detection::Carrier);
    let fw = feature_extract(&wing, trace, &[-6.0, 6.0]).unwrap();
    let fc = feature_extract(&center, trace, &[-6.0, 6.0]).unwrap();
    for ((x, w), c) in [-6.0, 6.0].iter().zip(&fw).zip(&fc) {
        let ratio = c.amplitude.abs() / w.amplitude.abs();
        r.check(
            ratio <= 0.05,
            format!(
                "at {x:+}: center {:.3e} / wing-like {:.3e} = {:.2}% (<= 5%)",
                c.amplitude.abs(),
                w.amplitude.abs(),
                100.0 * ratio
            ),
        );
    }
    r
}

fn max_pointwise(a: &LineShapeScan, b: &LineShapeScan, ch: Channel, f: impl Fn(f64, f64) -> f64) -> f64 {
    a.responses
        .iter()
        .zip(&b.responses)
        .map(|(x, y)| f(x.get(ch), y.get(ch)))
        .fold(0.0, f64::max)
}

fn ellipticity_symmetry() -> Report {
    let mut r = Report::new();
    let det = Detection::Carrier;

    for preset in [PhasePreset::WingLike, PhasePreset::Center] {
        let s = scan(preset, 0.0, 0.0, det);
        let b = s.responses.iter().map(|x| x.birefringence.abs()).fold(0.0, f64::max);
        let d = s.responses.iter().map(|x| x.dichroism.abs()).fold(0.0, f64::max);
        r.check(
            b < 1e-12 && d < 1e-12,
            format!("{preset:?}, eps=0, delta=0: max |B| {b:.1e}, max |D| {d:.1e} (< 1e-12)"),
        );
    }

    for eps in [0.05, 0.1] {
        let plus = scan(PhasePreset::WingLike, eps, 0.0, det);
        let minus = scan(PhasePreset::WingLike, -eps, 0.0, det);
        let b = max_pointwise(&plus, &minus, Channel::Birefringence, |x, y| (x + y).abs());
        let d = max_pointwise(&plus, &minus, Channel::Dichroism, |x, y| (x + y).abs());
        let a = max_pointwise(&plus, &minus, Channel::Absorption, |x, y| (x - y).abs());
        let bmax = plus.responses.iter().map(|x| x.birefringence.abs()).fold(0.0, f64::max);
        r.check(b < 1e-9, format!("delta=0, eps=±{eps}: max |B(ε)+B(-ε)| {b:.1e} (< 1e-9; max |B| {bmax:.1e})"));
        r.check(d < 1e-9, format!("delta=0, eps=±{eps}: max |D(ε)+D(-ε)| {d:.1e} (< 1e-9)"));
        r.check(a < 1e-9, format!("delta=0, eps=±{eps}: max |A(ε)-A(-ε)| {a:.1e} (< 1e-9)"));
    }

    for eps in [0.05, 0.1] {
        let plus = scan(PhasePreset::WingLike, eps, BIG_GAMMA, det);
        let minus = scan(PhasePreset::WingLike, -eps, BIG_GAMMA, det);
        // relative to the channel's largest magnitude over the scan
        let rel = |ch: Channel| {
            let peak = plus.responses.iter().map(|x| x.get(ch).abs()).fold(0.0, f64::max);
            max_pointwise(&plus, &minus, ch, |x, y| (x - y).abs()) / peak
        };
        let (b, d) = (rel(Channel::Birefringence), rel(Channel::Dichroism));
        let a = max_pointwise(&plus, &minus, Channel::Absorption, |x, y| (x - y).abs());
        r.check(b < 1e-6, format!("delta=+Γ, eps=±{eps}: max |B(ε)-B(-ε)| / max |B| = {b:.2e} (< 1e-6)"));
        r.check(d < 1e-6, format!("delta=+Γ, eps=±{eps}: max |D(ε)-D(-ε)| / max |D| = {d:.2e} (< 1e-6)"));
        r.check(a < 1e-9, format!("delta=+Γ, eps=±{eps}: max |A(ε)-A(-ε)| {a:.1e} (< 1e-9)"));

        // off resonance the exact symmetry also reverses the magnetic field
        let n = plus.grid.len();
        let mirrored = (0..n)
            .map(|i| {
                let (x, y) = (plus.responses[i], minus.responses[n - 1 - i]);
                (x.absorption - y.absorption)
                    .abs()
                    .max((x.birefringence - y.birefringence).abs())
                    .max((x.dichroism + y.dichroism).abs())
            })
            .fold(0.0, f64::max);
        r.note(format!(
            "delta=+Γ, eps=±{eps}: A, B even and D odd under (ε, Ω_L) -> (-ε, -Ω_L), max defect {mirrored:.1e}"
        ));
    }
    r
}

fn truncation() -> Report {
    let mut r = Report::new();
    let mut worst = (0.0f64, String::new());
    let mut failures = 0;
    let mut count = 0;
    for preset in [PhasePreset::WingLike, PhasePreset::Center] {
        for eps in [0.0, 0.1] {
            for delta in [0.0, BIG_GAMMA] {
                for w in [0.0, 3.0, 6.0, 12.0] {
                    let rep = truncation_check(&paper(preset, eps, delta, w), 2, 1e-6, Detection::Carrier).unwrap();
                    count += 1;
                    if !rep.pass {
                        failures += 1;
                    }
                    if rep.max_relative_difference > worst.0 {
                        worst = (
                            rep.max_relative_difference,
                            format!("{preset:?} eps={eps} delta={delta} omega_L={w}"),
                        );
                    }
                }
            }
        }
    }
    r.check(
        failures == 0,
        format!(
            "N=2 vs N=3 over {count} points: {failures} above 1e-6, worst {:.2e} at {}",
            worst.0, worst.1
        ),
    );
    r
}

/// J0 by its power series, independent of the library.
fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / (k as f64 * k as f64);
        sum += term;
    }
    sum
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sign of J_n(x) from Bessel's integral.
fn integral_sign(n: i64, x: f64) -> f64 {
    let panels = 20000;
    let h = std::f64::consts::PI / panels as f64;
    let f = |t: f64| (n as f64 * t - x * t.sin()).cos();
    let mut s = 0.5 * (f(0.0) + f(std::f64::consts::PI));
    for i in 1..panels {
        s += f(i as f64 * h);
    }
    (s * h).signum()
}

fn bessel_suite() -> Report {
    let mut r = Report::new();
    let xs: [f64; 19] = [
        0.0, 1e-3, 0.5, 1.0, 2.404825557695773, 5.0, 10.0, 14.9, 15.0, 15.1, 20.0, 50.0, 100.0, 333.3, 1000.0,
        2500.0, 5000.0, 9999.0, 1e4,
    ];
    let (mut parity, mut recur) = (0.0f64, 0.0f64);
    let mut evaluated = 0usize;
    for &x in &xs {
        let top = (x + 200.0).floor() as i64;
        let stride = if x > 500.0 { 7 } else { 1 };
        for n in (0..=top).step_by(stride) {
            let a = bessel_j(-n, x).unwrap();
            let b = bessel_j(n, x).unwrap();
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            parity = parity.max((a - sign * b).abs());
            evaluated += 1;
            if x > 0.0 && n >= 1 && n < top {
                let res = bessel_j(n - 1, x).unwrap() + bessel_j(n + 1, x).unwrap() - 2.0 * n as f64 / x * b;
                recur = recur.max(res.abs());
            }
        }
    }
    r.check(parity < 1e-12, format!("parity |J_-n - (-1)^n J_n| max {parity:.1e} over {evaluated} evaluations (< 1e-12)"));
    r.check(recur < 1e-9, format!("three-term recurrence residual max {recur:.1e} (< 1e-9)"));

    const J0_ZERO: f64 = 2.404825557695773;
    let oracle_zero = bisect(j0_series, 2.0, 3.0);
    let lib_zero = bisect(|x| bessel_j(0, x).unwrap(), 2.0, 3.0);
    r.check(
        (oracle_zero - J0_ZERO).abs() < 1e-8 && (lib_zero - J0_ZERO).abs() < 1e-8,
        format!(
            "J0 first zero: series+bisection {oracle_zero:.15}, library+bisection {lib_zero:.15} (target {J0_ZERO}, 1e-8)"
        ),
    );

    let s = teeth_spectrum(1.0, 50.0, 70).unwrap();
    for (n, want) in [(0i64, PhaseClass::CenterLike), (55, PhaseClass::WingLike)] {
        // tooth k carries J_{-k}, so compare the signs of J_{-(n-1)} and J_{-(n+1)}
        let direct = if integral_sign(-(n - 1), 50.0) == integral_sign(-(n + 1), 50.0) {
            PhaseClass::WingLike
        } else {
            PhaseClass::CenterLike
        };
        let got = classify_phase_triple(&s, n).unwrap();
        r.check(
            got == want && direct == want,
            format!("I_m=50, n={n}: classified {got:?}, direct sign evaluation {direct:?}, expected {want:?}"),
        );
    }
    r
}

fn determinism() -> Report {
    let mut r = Report::new();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.apply([("derivative", "true"), ("epsilon", "0.1")]).unwrap();
    cfg.output = Some(dir.path().join("scan.csv"));
    let mut texts = Vec::new();
    let mut best = Duration::MAX;
    for _ in 0..2 {
        let t = Instant::now();
        cli::run(&cfg, &mut std::io::sink()).unwrap();
        best = best.min(t.elapsed());
        texts.push(std::fs::read(dir.path().join("scan.csv")).unwrap());
    }
    r.check(
        texts[0] == texts[1] && !texts[0].is_empty(),
        format!("two identical scan runs wrote byte-identical CSVs ({} bytes)", texts[0].len()),
    );

    let start = Instant::now();
    let p = paper(PhasePreset::WingLike, 0.0, 0.0, 0.0);
    let s = scan_larmor(&p.field, p.eps, &p.rates, ORDER, &grid(), Detection::Carrier).unwrap();
    let elapsed = start.elapsed();
    r.check(s.grid.len() == 801 && s.failures.is_empty(), "801-point N=2 scan solved every point".to_string());
    r.timed(elapsed, Duration::from_secs(5));
    r.note(format!("full CLI scan run incl. derivative and file output: {:.3} s", best.as_secs_f64()));
    r
}

type Criterion = (&'static str, fn() -> Report);

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 conservation suite", conservation),
        ("2 oracle equivalence", oracle_equivalence),
        ("3 resonance positions", resonance_positions),
        ("4 phase-class suppression", phase_class_suppression),
        ("5 ellipticity symmetry suite", ellipticity_symmetry),
        ("6 truncation N=2 vs N=3", truncation),
        ("7 Bessel suite", bessel_suite),
        ("8 determinism and performance", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let report = panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Report {
                pass: false,
                details: vec![format!("FAIL panicked: {msg}")],
            }
        });
        println!("{} criterion {name}", if report.pass { "PASS" } else { "FAIL" });
        for d in &report.details {
            println!("    {d}");
        }
        if !report.pass {
            failed += 1;
        }
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
