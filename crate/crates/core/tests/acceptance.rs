//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use seqclass::idealnorm::default_exponents;
use seqclass::random::{derive_seed, gaussian, pick_exponent, rng, uniform_index, Rng};
use seqclass::seqnorm::{
    norm_cohen, norm_rad, norm_rad_mc, norm_rad_prefix_sup, norm_strong_p, weak_p_ascent, weak_p_sign_oracle,
};
use seqclass::suite::{run_suite, ExperimentConfig, SuiteReport};
use seqclass::{class_norm, growth_experiment, EstimatorConfig, SeqClassSpec, Space, VecSeq, Vector};

const CLASS_PS: [f64; 5] = [1.0, 4.0 / 3.0, 1.5, 2.0, 3.0];

/// Name, time budget in seconds, check.
type Criterion = (&'static str, u64, fn() -> Outcome);

struct Outcome {
    pass: bool,
    summary: String,
}

fn outcome(pass: bool, summary: impl Into<String>) -> Outcome {
    Outcome { pass, summary: summary.into() }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn random_space(g: &mut Rng, dim_max: usize) -> Space {
    Space::new(1 + uniform_index(g, dim_max), pick_exponent(g, &default_exponents())).unwrap()
}

fn random_seq(g: &mut Rng, space: Space, k: usize) -> VecSeq {
    VecSeq::new(space, (0..k).map(|_| gaussian(g, space.dim())).collect()).unwrap()
}

fn suite(name: &str) -> SuiteReport {
    let cfg = ExperimentConfig::for_suite(name).unwrap();
    run_suite(&cfg).unwrap()
}

fn failing_cases(r: &SuiteReport) -> String {
    let names: Vec<String> =
        r.cases.iter().filter(|c| !c.pass).take(3).map(|c| format!("{}#{}", c.name, c.trial)).collect();
    names.join(", ")
}

fn unit_sequence() -> Outcome {
    let cfg = EstimatorConfig::default();
    let mut g = rng(101);
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut cases = 0;
    for engine in 0..5 {
        for _ in 0..200 {
            let space = random_space(&mut g, 6);
            let x = Vector::new(space, gaussian(&mut g, space.dim())).unwrap();
            let pos = uniform_index(&mut g, 8);
            let len = pos + 1 + uniform_index(&mut g, 4);
            let p = CLASS_PS[uniform_index(&mut g, CLASS_PS.len())];
            let class = [
                SeqClassSpec::Sup,
                SeqClassSpec::StrongP(p),
                SeqClassSpec::WeakP(p),
                SeqClassSpec::Rad,
                SeqClassSpec::CohenP(p),
            ][engine];
            let s = VecSeq::unit_sequence(&x, pos, len).unwrap();
            let b = class_norm(&s, class, &cfg, cases as u64).unwrap();
            let tol = if b.exact { 1e-12 } else { 1e-9 };
            let dev = (b.lower - x.norm()).abs().max((b.upper - x.norm()).abs()) / x.norm().max(1.0);
            worst = worst.max(dev);
            failures += usize::from(dev > tol);
            cases += 1;
        }
    }
    outcome(
        failures == 0,
        format!("{cases} cases over 5 engines, {failures} failures, max relative deviation {worst:.2e}"),
    )
}

fn rad_exactness() -> Outcome {
    let cfg = EstimatorConfig::default();
    let mut g = rng(202);
    let (mut worst_hilbert, mut worst_scalar, mut worst_prefix) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..500 {
        let d = 1 + uniform_index(&mut g, 6);
        let k = 1 + uniform_index(&mut g, 12);
        let s = random_seq(&mut g, Space::lq(2.0, d).unwrap(), k);
        let rad = norm_rad(&s, &cfg).unwrap();
        let l2 = norm_strong_p(&s, 2.0).unwrap();
        worst_hilbert = worst_hilbert.max((rad - l2).abs() / l2.max(1.0));
        worst_prefix = worst_prefix.max((norm_rad_prefix_sup(&s, &cfg).unwrap() - rad).abs() / rad.max(1.0));
        let scalars = VecSeq::scalars(&s.vectors().iter().map(|x| x[0]).collect::<Vec<_>>());
        let r1 = norm_rad(&scalars, &cfg).unwrap();
        let e1 = norm_strong_p(&scalars, 2.0).unwrap();
        worst_scalar = worst_scalar.max((r1 - e1).abs() / e1.max(1.0));
    }
    let pass = worst_hilbert <= 1e-12 && worst_scalar <= 1e-12 && worst_prefix <= 1e-12;
    outcome(
        pass,
        format!("500 sequences; max deviation Hilbert {worst_hilbert:.2e}, scalars {worst_scalar:.2e}, prefix-sup {worst_prefix:.2e}"),
    )
}

fn decoupling() -> Outcome {
    let r = suite("decoupling");
    let worst = r.cases.iter().map(|c| c.lhs).fold(0.0, f64::max);
    outcome(r.passed() && worst <= 1e-10, format!("{} instances, max residual {worst:.2e}", r.cases.len()))
}

fn weak1_stability() -> Outcome {
    let r = suite("weak1-stability");
    let ratios = r.cases.iter().filter(|c| c.name.starts_with("ratio<=op")).count();
    let attain = r
        .cases
        .iter()
        .filter(|c| c.name.starts_with("search-attainment"))
        .map(|c| c.lhs / (c.rhs / 0.9))
        .fold(f64::INFINITY, f64::min);
    outcome(
        r.passed(),
        format!(
            "{ratios} operators, {} violations, max ratio/op {:.9}, min search attainment {attain:.4} {}",
            r.summary.violations,
            r.summary.max_ratio,
            failing_cases(&r)
        ),
    )
}

fn growth() -> Outcome {
    let cfg = EstimatorConfig::default();
    let mut worst = 0.0f64;
    let mut ok = true;
    for (p, n, ks, power) in [(2.0, 2, vec![1, 4, 9, 16, 25], 0.5), (4.0 / 3.0, 4, vec![1, 16], 0.75)] {
        match growth_experiment(p, n, &ks, &cfg) {
            Ok(points) => {
                for (k, r) in points {
                    let expected = (k as f64).powf(power);
                    worst = worst.max((r - expected).abs());
                    ok &= close(r, expected, 1e-6);
                }
            }
            Err(_) => ok = false,
        }
    }
    outcome(ok, format!("p=2,n=2 and p=4/3,n=4; max deviation from k^(1/p) {worst:.2e}"))
}

fn rad_stability() -> Outcome {
    let r = suite("rad-stability");
    let trials = r.cases.iter().filter(|c| c.name.starts_with("ratio<=op")).count();
    outcome(
        r.passed(),
        format!(
            "{trials} bilinear instances, {} violations, max ratio/op {:.9} {}",
            r.summary.violations,
            r.summary.max_ratio,
            failing_cases(&r)
        ),
    )
}

fn cohen() -> Outcome {
    let cfg = EstimatorConfig::default();
    let mut g = rng(707);
    let mut notes = Vec::new();
    let mut ok = true;

    let mut worst = 0.0f64;
    for i in 0..100 {
        let k = 1 + uniform_index(&mut g, 8);
        let p = CLASS_PS[uniform_index(&mut g, CLASS_PS.len())];
        let s = VecSeq::scalars(&gaussian(&mut g, k));
        let b = norm_cohen(&s, p, &cfg, i).unwrap();
        let lp = norm_strong_p(&s, p).unwrap();
        worst = worst.max((b.lower - lp).abs().max((b.upper - lp).abs()));
    }
    ok &= worst <= 1e-9;
    notes.push(format!("scalar collapse {worst:.1e}"));

    let mut worst = 0.0f64;
    for i in 0..100 {
        let space = random_space(&mut g, 4);
        let k = 1 + uniform_index(&mut g, 8);
        let s = random_seq(&mut g, space, k);
        let b = norm_cohen(&s, 1.0, &cfg, i).unwrap();
        let l1 = norm_strong_p(&s, 1.0).unwrap();
        worst = worst.max((b.lower - l1).abs().max((b.upper - l1).abs()));
    }
    ok &= worst <= 1e-9;
    notes.push(format!("p=1 collapse {worst:.1e}"));

    let mut sandwich_failures = 0;
    let mut widest = 0.0f64;
    let mut width_cases = 0;
    for i in 0..300 {
        let space = random_space(&mut g, 4);
        let k = 1 + uniform_index(&mut g, 6);
        let s = random_seq(&mut g, space, k);
        let p = CLASS_PS[1 + uniform_index(&mut g, CLASS_PS.len() - 1)];
        let b = norm_cohen(&s, p, &cfg, derive_seed(707, i)).unwrap();
        let lp = norm_strong_p(&s, p).unwrap();
        let l1 = norm_strong_p(&s, 1.0).unwrap();
        let consistent =
            b.lower <= b.upper && lp <= b.upper + 1e-9 * lp.max(1.0) && b.lower <= l1 + 1e-12 * l1.max(1.0);
        sandwich_failures += usize::from(!consistent);
        if space.dim() <= 3 && k <= 5 {
            widest = widest.max(b.relative_width());
            width_cases += 1;
        }
    }
    ok &= sandwich_failures == 0 && widest <= 0.10;
    notes.push(format!(
        "sandwich failures {sandwich_failures}/300, widest bracket {:.2}% over {width_cases}",
        100.0 * widest
    ));

    let r = suite("cohen-stability");
    ok &= r.passed();
    notes.push(format!("stability violations {}/{}", r.summary.violations, r.cases.len()));
    outcome(ok, notes.join("; "))
}

fn holder_identity() -> Outcome {
    let r = suite("holder-identity");
    let scalar: Vec<f64> = r.cases.iter().filter(|c| c.name.starts_with("scalar-product")).map(|c| c.lhs).collect();
    let min_frac = r
        .cases
        .iter()
        .filter(|c| c.name == "ideal>=0.95op")
        .map(|c| c.lhs / (c.rhs / 0.95))
        .fold(f64::INFINITY, f64::min);
    outcome(
        r.passed(),
        format!(
            "100 operators, min ideal/op {min_frac:.4}, scalar products {scalar:?}, {} violations {}",
            r.summary.violations,
            failing_cases(&r)
        ),
    )
}

fn ideal_axioms() -> Outcome {
    let a = suite("ideal-axioms");
    let l = suite("limit-stability");
    outcome(
        a.passed() && l.passed(),
        format!(
            "axioms {} cases / {} violations, limit families {} / {} violations {}{}",
            a.cases.len(),
            a.summary.violations,
            l.cases.len(),
            l.summary.violations,
            failing_cases(&a),
            failing_cases(&l)
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let cfg = EstimatorConfig::default();
    let mut g = rng(1010);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let space = random_space(&mut g, 4);
        let k = 1 + uniform_index(&mut g, 10);
        let s = random_seq(&mut g, space, k);
        let oracle = weak_p_sign_oracle(&s, &cfg).unwrap();
        let ascent = weak_p_ascent(&s, 1.0, &cfg, i).unwrap().value;
        worst = worst.max((oracle - ascent).abs() / oracle.max(1.0));
    }
    let mut covered = 0;
    for i in 0..1000 {
        let space = random_space(&mut g, 4);
        let s = random_seq(&mut g, space, 10);
        let exact = norm_rad(&s, &cfg).unwrap();
        covered += usize::from(norm_rad_mc(&s, 10_000, derive_seed(1010, i)).unwrap().contains(exact, 0.0));
    }
    outcome(
        worst <= 1e-6 && covered >= 990,
        format!("weak-1 oracle vs ascent max deviation {worst:.2e} over 200; Monte-Carlo coverage {covered}/1000"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("unit-sequence", 10, unit_sequence),
        ("rad-exactness", 30, rad_exactness),
        ("decoupling", 30, decoupling),
        ("weak1-stability", 120, weak1_stability),
        ("growth", 10, growth),
        ("rad-stability", 60, rad_stability),
        ("cohen", 180, cohen),
        ("holder-identity", 60, holder_identity),
        ("ideal-axioms", 60, ideal_axioms),
        ("oracle-equivalence", 60, oracle_equivalence),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let pass = out.pass && in_time;
        failed += usize::from(!pass);
        let verdict = if pass { "PASS" } else { "FAIL" };
        let timing = if in_time { String::new() } else { " (over time budget)".into() };
        println!(
            "{verdict} [{:>2}] {name}: {} [{:.2} s / {limit} s]{timing}",
            i + 1,
            out.summary,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
