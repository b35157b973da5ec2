use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use super::{CaseRecord, Curve, ExperimentConfig, Relation, SuiteReport};
use crate::error::{invalid, Result};
use crate::idealnorm::{
    growth_experiment, ideal_norm, ideal_norm_seeded, limit_stability_experiment, random_sequences,
    stability_report_for, witness_tuples, IdealSpec, StabilityOptions, StabilityReport,
};
use crate::multiop::{compose, decoupling_check, finite_type, op_norm, op_norm_with_starts, MultiOp};
use crate::random::{coin, derive_seed, gaussian, pick_exponent, rng, uniform_index, Rng};
use crate::seqnorm::{
    class_norm, norm_rad, norm_rad_mc, norm_rad_prefix_sup, norm_strong_p, norm_sup, truncate, weak_p_ascent,
    weak_p_sign_oracle, NormBracket, SeqClassSpec, VecSeq,
};
use crate::spaces::{Exponent, Space, Vector};

/// Runs the suite named in `config`. Numeric failures inside a trial are
/// recorded as failed cases; only an invalid config is an error.
pub fn run_suite(config: &ExperimentConfig) -> Result<SuiteReport> {
    config.validate()?;
    let start = Instant::now();
    let (cases, curves) = match config.suite.as_str() {
        "seqnorm-axioms" => (seqnorm_axioms(config), Vec::new()),
        "linear-stability" => (linear_stability(config), Vec::new()),
        "weak1-stability" => (stability(config, |_, _| Ok(SeqClassSpec::WeakP(1.0)), true)?, Vec::new()),
        "rad-stability" => (stability(config, |_, _| Ok(SeqClassSpec::Rad), false)?, Vec::new()),
        "cohen-stability" => (cohen_stability(config)?, Vec::new()),
        "growth" => growth(config)?,
        "decoupling" => (decoupling(config), Vec::new()),
        "holder-identity" => holder_identity(config),
        "ideal-axioms" => (ideal_axioms(config), Vec::new()),
        "limit-stability" => (limit_stability(config), Vec::new()),
        other => return Err(invalid(format!("unknown suite `{other}`"))),
    };
    Ok(SuiteReport::new(config, cases, curves, start.elapsed().as_secs_f64()))
}

/// Runs `f` on every trial in parallel, keeping trial order. A trial that
/// errors contributes one failed case.
fn per_trial<F>(cfg: &ExperimentConfig, name: &str, f: F) -> Vec<CaseRecord>
where
    F: Fn(usize, u64) -> Result<Vec<CaseRecord>> + Sync,
{
    let per: Vec<Vec<CaseRecord>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(cfg.seed, t as u64);
            f(t, seed).unwrap_or_else(|e| vec![CaseRecord::failed(name, t, &e)])
        })
        .collect();
    per.into_iter().flatten().collect()
}

fn pick<T: Copy>(g: &mut Rng, menu: &[T]) -> T {
    menu[uniform_index(g, menu.len())]
}

fn random_space(g: &mut Rng, cfg: &ExperimentConfig) -> Result<Space> {
    let d = pick(g, &cfg.dims);
    Space::new(d, pick_exponent(g, &cfg.exponents))
}

fn random_seq(g: &mut Rng, space: Space, k: usize) -> VecSeq {
    let sparse = coin(g);
    random_sequences(g, &[space], k, sparse).remove(0)
}

fn random_op(g: &mut Rng, n: usize, cfg: &ExperimentConfig) -> Result<MultiOp> {
    let domain: Vec<Space> = (0..n).map(|_| random_space(g, cfg)).collect::<Result<_>>()?;
    let codomain = random_space(g, cfg)?;
    let size = domain.iter().map(|s| s.dim()).product::<usize>() * codomain.dim();
    MultiOp::new(domain, codomain, gaussian(g, size))
}

fn random_linear(g: &mut Rng, domain: Space, codomain: Space) -> Result<MultiOp> {
    let rows: Vec<Vec<f64>> = (0..codomain.dim()).map(|_| gaussian(g, domain.dim())).collect();
    MultiOp::linear(domain, codomain, &rows)
}

/// Inputs drawn from the menu; the output exponent is any menu entry
/// satisfying `1/p ≤ Σ 1/p_m`.
fn holder_spec(g: &mut Rng, n: usize, menu: &[f64], class: fn(f64) -> SeqClassSpec) -> Result<IdealSpec> {
    let ps: Vec<f64> = (0..n).map(|_| pick(g, menu)).collect();
    let budget: f64 = ps.iter().map(|p| 1.0 / p).sum();
    let outputs: Vec<f64> = menu.iter().copied().filter(|p| 1.0 / p <= budget + 1e-12).collect();
    let out = if outputs.is_empty() { ps.iter().copied().fold(1.0, f64::max) } else { pick(g, &outputs) };
    IdealSpec::new(ps.into_iter().map(class).collect(), class(out))
}

fn tag(class: SeqClassSpec) -> &'static str {
    match class {
        SeqClassSpec::Sup => "sup",
        SeqClassSpec::StrongP(_) => "strong",
        SeqClassSpec::WeakP(_) => "weak",
        SeqClassSpec::Rad => "rad",
        SeqClassSpec::CohenP(_) => "cohen",
    }
}

fn seqnorm_axioms(cfg: &ExperimentConfig) -> Vec<CaseRecord> {
    let mut cases = per_trial(cfg, "seqnorm-axioms", |t, seed| seqnorm_trial(cfg, t, seed));
    cases.push(rad_mc_coverage(cfg));
    cases
}

fn seqnorm_trial(cfg: &ExperimentConfig, t: usize, seed: u64) -> Result<Vec<CaseRecord>> {
    let est = &cfg.estimator;
    let cheap = est.search();
    let tol = &cfg.tolerances;
    let mut g = rng(seed);
    let space = random_space(&mut g, cfg)?;
    let d = space.dim();
    let k = 1 + uniform_index(&mut g, cfg.k_max);
    let s = random_seq(&mut g, space, k);
    let other = random_seq(&mut g, space, k);
    let alpha = 2.0 * gaussian(&mut g, 1)[0];
    let m = uniform_index(&mut g, k + 1);
    let p = pick(&mut g, &cfg.class_exponents);
    let x = Vector::new(space, gaussian(&mut g, d))?;
    let pos = uniform_index(&mut g, cfg.k_max);
    let len = pos + 1 + uniform_index(&mut g, 3);
    let unit = VecSeq::unit_sequence(&x, pos, len)?;
    let mut cases = Vec::new();
    let base = json!({ "space": space, "p": p, "seq": s });

    let classes = [
        SeqClassSpec::Sup,
        SeqClassSpec::StrongP(p),
        SeqClassSpec::WeakP(p),
        SeqClassSpec::Rad,
        SeqClassSpec::CohenP(p),
    ];
    let mut brackets = Vec::new();
    for (c, class) in classes.into_iter().enumerate() {
        let name = tag(class);
        let cs = derive_seed(seed, c as u64);
        let b = class_norm(&s, class, est, cs)?;

        let u = class_norm(&unit, class, est, cs)?;
        let nx = x.norm();
        let worst = if (u.upper - nx).abs() > (u.lower - nx).abs() { u.upper } else { u.lower };
        let unit_tol = if u.exact { 1e-12 } else { tol.exact };
        let detail = json!({ "x": x.coords(), "position": pos, "length": len, "bracket": u });
        cases.push(CaseRecord::check(format!("unit-sequence:{name}"), t, Relation::Eq, worst, nx, unit_tol, detail));

        cases.push(CaseRecord::check(
            format!("bracket-order:{name}"),
            t,
            Relation::Le,
            b.lower,
            b.upper,
            0.0,
            json!({ "bracket": b }),
        ));
        let sup = norm_sup(&s);
        cases.push(CaseRecord::check(
            format!("sup-embedding:{name}"),
            t,
            Relation::Le,
            sup,
            b.upper,
            tol.exact,
            json!({ "bracket": b }),
        ));

        // the axiom checks below only need valid brackets, so the Cohen engine
        // runs with the cheaper search settings here
        let ax = if matches!(class, SeqClassSpec::CohenP(_)) { &cheap } else { est };
        let full = class_norm(&s, class, ax, cs)?;
        let tr = class_norm(&truncate(&s, m)?, class, ax, cs)?;
        cases.push(CaseRecord::check(
            format!("truncation:{name}"),
            t,
            Relation::Le,
            tr.lower,
            full.upper,
            tol.exact,
            json!({ "m": m, "truncated": tr, "full": full }),
        ));

        let sc = class_norm(&s.scaled(alpha), class, ax, cs)?;
        let a = alpha.abs();
        let detail = json!({ "alpha": alpha, "scaled": sc, "full": full });
        if sc.exact && full.exact {
            cases.push(CaseRecord::check(
                format!("homogeneity:{name}"),
                t,
                Relation::Eq,
                sc.upper,
                a * full.upper,
                1e-12,
                detail,
            ));
        } else {
            let name = format!("homogeneity-bracket:{name}");
            cases.push(CaseRecord::check(
                name.clone(),
                t,
                Relation::Le,
                sc.lower,
                a * full.upper,
                tol.exact,
                detail.clone(),
            ));
            cases.push(CaseRecord::check(name, t, Relation::Le, a * full.lower, sc.upper, tol.exact, detail));
        }

        let sum = class_norm(&s.add(&other)?, class, ax, cs)?;
        let ob = class_norm(&other, class, ax, cs)?;
        cases.push(CaseRecord::check(
            format!("triangle:{name}"),
            t,
            Relation::Le,
            sum.lower,
            full.upper + ob.upper,
            tol.exact,
            json!({ "other": other, "sum": sum, "first": full, "second": ob }),
        ));
        brackets.push(b);
    }

    let strong = norm_strong_p(&s, p)?;
    let strong1 = norm_strong_p(&s, 1.0)?;
    let (weak, cohen) = (&brackets[2], &brackets[4]);
    let detail = json!({ "base": base, "weak": weak, "cohen": cohen, "strong_p": strong, "strong_1": strong1 });
    cases.push(CaseRecord::check("order:weak<=strong", t, Relation::Le, weak.upper, strong, 1e-12, detail.clone()));
    cases.push(CaseRecord::check(
        "order:strong<=cohen",
        t,
        Relation::Le,
        strong,
        cohen.upper,
        tol.exact,
        detail.clone(),
    ));
    cases.push(CaseRecord::check("order:cohen<=l1", t, Relation::Le, cohen.lower, strong1, 1e-12, detail.clone()));
    cases.push(CaseRecord::check("order:cohen-upper<=l1", t, Relation::Le, cohen.upper, strong1, 1e-12, detail));
    if d <= 3 && k <= 5 {
        let detail = json!({ "base": base, "cohen": cohen });
        cases.push(CaseRecord::check("cohen-width", t, Relation::Le, cohen.relative_width(), 0.1, 0.0, detail));
    }

    let rad = brackets[3].upper;
    let prefix = norm_rad_prefix_sup(&s, est)?;
    cases.push(CaseRecord::check("rad:prefix-sup", t, Relation::Eq, prefix, rad, 1e-12, json!({ "base": base })));
    if space.exponent().is_two() {
        let l2 = norm_strong_p(&s, 2.0)?;
        cases.push(CaseRecord::check("rad:hilbert", t, Relation::Eq, rad, l2, 1e-12, json!({ "base": base })));
    }
    let scalars = VecSeq::scalars(&s.vectors().iter().map(|x| x[0]).collect::<Vec<_>>());
    let rad_k = norm_rad(&scalars, est)?;
    let l2 = norm_strong_p(&scalars, 2.0)?;
    cases.push(CaseRecord::check("rad:scalars", t, Relation::Eq, rad_k, l2, 1e-12, json!({ "scalars": scalars })));

    if d <= 4 && k <= 10 {
        let oracle = weak_p_sign_oracle(&s, est)?;
        let ascent = weak_p_ascent(&s, 1.0, est, seed)?.value;
        let detail = json!({ "base": base, "sign_oracle": oracle, "ascent": ascent });
        cases.push(CaseRecord::check("weak1:oracle-vs-ascent", t, Relation::Eq, ascent, oracle, tol.estimated, detail));
    }
    Ok(cases)
}

/// Fraction of Monte-Carlo Rademacher brackets (k = 10, 10^4 samples) that
/// contain the exact value, over `trials` seeded sequences.
fn rad_mc_coverage(cfg: &ExperimentConfig) -> CaseRecord {
    let seed = derive_seed(cfg.seed, 0x4D43);
    let hits: Vec<Result<bool>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let ts = derive_seed(seed, t as u64);
            let mut g = rng(ts);
            let space = random_space(&mut g, cfg)?;
            let s = VecSeq::new(space, (0..10).map(|_| gaussian(&mut g, space.dim())).collect())?;
            let exact = norm_rad(&s, &cfg.estimator)?;
            Ok(norm_rad_mc(&s, 10_000, ts)?.contains(exact, 0.0))
        })
        .collect();
    match hits.into_iter().collect::<Result<Vec<bool>>>() {
        Ok(h) => {
            let covered = h.iter().filter(|&&b| b).count();
            let frac = covered as f64 / h.len() as f64;
            let detail = json!({ "covered": covered, "runs": h.len() });
            CaseRecord::check("rad:monte-carlo-coverage", 0, Relation::Ge, frac, 0.99, 0.0, detail)
        }
        Err(e) => CaseRecord::failed("rad:monte-carlo-coverage", 0, &e),
    }
}

fn linear_stability(cfg: &ExperimentConfig) -> Vec<CaseRecord> {
    per_trial(cfg, "linear-stability", |t, seed| {
        let est = &cfg.estimator;
        let mut g = rng(seed);
        let (din, dout) = (random_space(&mut g, cfg)?, random_space(&mut g, cfg)?);
        let u = random_linear(&mut g, din, dout)?;
        let k = 1 + uniform_index(&mut g, cfg.k_max);
        let s = random_seq(&mut g, din, k);
        let p = pick(&mut g, &cfg.class_exponents);
        let image = u.apply_sequences(std::slice::from_ref(&s))?;
        let starts = witness_tuples(std::slice::from_ref(&s));
        let op = op_norm_with_starts(&u, est, seed, &starts).bracket;
        let classes = [
            SeqClassSpec::Sup,
            SeqClassSpec::StrongP(p),
            SeqClassSpec::WeakP(p),
            SeqClassSpec::Rad,
            SeqClassSpec::CohenP(p),
        ];
        let mut cases = Vec::new();
        for (c, class) in classes.into_iter().enumerate() {
            let cs = derive_seed(seed, c as u64);
            let out = class_norm(&image, class, est, cs)?;
            let inp = class_norm(&s, class, est, cs)?;
            let detail = json!({ "operator": u, "seq": s, "p": p, "output": out, "input": inp, "op": op });
            cases.push(CaseRecord::check(
                format!("linear:{}", tag(class)),
                t,
                Relation::Le,
                out.lower,
                op.upper * inp.upper,
                cfg.tolerances.exact,
                detail,
            ));
        }
        Ok(cases)
    })
}

/// Stability runs for each arity in the config; trials are split evenly.
fn stability<F>(cfg: &ExperimentConfig, class: F, attainment: bool) -> Result<Vec<CaseRecord>>
where
    F: Fn(&mut Rng, usize) -> Result<SeqClassSpec>,
{
    let mut cases = Vec::new();
    let arities = &cfg.arities;
    for (i, &n) in arities.iter().enumerate() {
        let trials = cfg.trials / arities.len() + usize::from(i < cfg.trials % arities.len());
        if trials == 0 {
            continue;
        }
        let mut g = rng(derive_seed(cfg.seed, 0x5EC + i as u64));
        let spec = IdealSpec::uniform(class(&mut g, n)?, n)?;
        let opts = StabilityOptions {
            trials,
            k_max: cfg.k_max,
            dim_max: cfg.dims.iter().copied().max().unwrap_or(1),
            exponents: cfg.exponents.clone(),
            search_every: 10,
            search_restarts: cfg.restarts,
            seed: derive_seed(cfg.seed, n as u64),
        };
        let report = stability_report_for(&spec, &opts, &cfg.estimator)?;
        cases.extend(stability_cases(cfg, &report, &format!("n={n}"), attainment));
    }
    Ok(cases)
}

fn stability_cases(cfg: &ExperimentConfig, report: &StabilityReport, label: &str, attainment: bool) -> Vec<CaseRecord> {
    let tol = cfg.tolerances.estimated;
    let mut cases = Vec::new();
    for tr in &report.trials {
        let detail = json!({
            "spec": report.spec,
            "seed": tr.seed,
            "operator": tr.operator,
            "inputs": tr.inputs,
            "ratio": tr.detail,
            "op": tr.op,
        });
        let name = format!("ratio<=op:{label}");
        cases.push(CaseRecord::check(name, tr.index, Relation::Le, tr.detail.ratio, tr.op.upper, tol, detail));
        if let Some(search) = tr.search_lower {
            let detail = json!({ "spec": report.spec, "seed": tr.seed, "search_lower": search, "op": tr.op });
            let name = format!("search<=op:{label}");
            cases.push(CaseRecord::check(name, tr.index, Relation::Le, search, tr.op.upper, tol, detail.clone()));
            if attainment {
                let name = format!("search-attainment:{label}");
                cases.push(CaseRecord::check(name, tr.index, Relation::Ge, search, 0.9 * tr.op.lower, 0.0, detail));
            }
        }
    }
    cases
}

/// Cohen classes with Hölder exponents; no k-sweep search since every
/// evaluation runs the decomposition search.
fn cohen_stability(cfg: &ExperimentConfig) -> Result<Vec<CaseRecord>> {
    let mut cases = Vec::new();
    let arities = &cfg.arities;
    let chunks = arities.len() * 2;
    for (i, &n) in arities.iter().enumerate() {
        for uniform in [true, false] {
            let c = 2 * i + usize::from(!uniform);
            let trials = cfg.trials / chunks + usize::from(c < cfg.trials % chunks);
            if trials == 0 {
                continue;
            }
            let mut g = rng(derive_seed(cfg.seed, 0xC0 + c as u64));
            let spec = if uniform {
                IdealSpec::uniform(SeqClassSpec::CohenP(pick(&mut g, &cfg.class_exponents)), n)?
            } else {
                holder_spec(&mut g, n, &cfg.class_exponents, SeqClassSpec::CohenP)?
            };
            let opts = StabilityOptions {
                trials,
                k_max: cfg.k_max,
                dim_max: cfg.dims.iter().copied().max().unwrap_or(1),
                exponents: cfg.exponents.clone(),
                search_every: 0,
                search_restarts: 0,
                seed: derive_seed(cfg.seed, c as u64),
            };
            let report = stability_report_for(&spec, &opts, &cfg.estimator)?;
            let label = format!("n={n},{}", if uniform { "uniform" } else { "holder" });
            cases.extend(stability_cases(cfg, &report, &label, false));
        }
    }
    Ok(cases)
}

fn growth(cfg: &ExperimentConfig) -> Result<(Vec<CaseRecord>, Vec<Curve>)> {
    let mut cases = Vec::new();
    let mut curves = Vec::new();
    let ks: Vec<usize> = (1..=cfg.k_max).collect();
    for &p in &cfg.class_exponents {
        if p <= 1.0 {
            return Err(invalid("the growth suite needs class exponents p > 1"));
        }
        let p_star = Exponent::new(p)?.conjugate().value();
        for &n in cfg.arities.iter().filter(|&&n| n as f64 >= p_star - 1e-12) {
            let label = format!("p={p},n={n}");
            match growth_experiment(p, n, &ks, &cfg.estimator) {
                Ok(points) => {
                    for &(k, r) in &points {
                        let expected = (k as f64).powf(1.0 / p);
                        let detail = json!({ "p": p, "n": n, "k": k });
                        cases.push(CaseRecord::check(
                            format!("growth:{label}"),
                            k,
                            Relation::Eq,
                            r,
                            expected,
                            cfg.tolerances.estimated,
                            detail,
                        ));
                    }
                    curves.push(Curve { label, points });
                }
                Err(e) => cases.push(CaseRecord::failed(format!("growth:{label}"), 0, &e)),
            }
        }
    }
    if cases.is_empty() {
        return Err(invalid("no arity satisfies n ≥ p* for the configured class exponents"));
    }
    Ok((cases, curves))
}

fn decoupling(cfg: &ExperimentConfig) -> Vec<CaseRecord> {
    per_trial(cfg, "decoupling", |t, seed| {
        let mut g = rng(seed);
        let n = pick(&mut g, &cfg.arities);
        let a = random_op(&mut g, n, cfg)?;
        let k = 1 + uniform_index(&mut g, cfg.k_max);
        let sparse = coin(&mut g);
        let seqs = random_sequences(&mut g, a.domain(), k, sparse);
        let residual = decoupling_check(&a, &seqs, &cfg.estimator)?;
        let detail = json!({ "operator": a, "inputs": seqs });
        Ok(vec![CaseRecord::check(
            format!("decoupling:n={n}"),
            t,
            Relation::Le,
            residual,
            0.0,
            cfg.tolerances.decoupling,
            detail,
        )])
    })
}

fn holder_identity(cfg: &ExperimentConfig) -> (Vec<CaseRecord>, Vec<Curve>) {
    let est = &cfg.estimator;
    let mut cases = per_trial(cfg, "holder-identity", |t, seed| {
        let mut g = rng(seed);
        let n = pick(&mut g, &cfg.arities);
        let a = random_op(&mut g, n, cfg)?;
        let spec = holder_spec(&mut g, n, &cfg.class_exponents, SeqClassSpec::StrongP)?;
        let ideal = ideal_norm(&a, &spec, cfg.k_max, cfg.restarts, seed, est)?;
        let op = op_norm_with_starts(&a, est, seed, &witness_tuples(&ideal.witness)).bracket;
        let lower = ideal.bracket.lower;
        let detail = json!({ "operator": a, "spec": spec, "ideal": ideal, "op": op });
        Ok(vec![
            CaseRecord::check("ideal>=0.95op", t, Relation::Ge, lower, 0.95 * op.lower, 0.0, detail.clone()),
            CaseRecord::check("ideal<=op", t, Relation::Le, lower, op.upper, cfg.tolerances.estimated, detail),
        ])
    });
    let mut curves = Vec::new();
    let mut g = rng(derive_seed(cfg.seed, 0x1D));
    for (i, &n) in cfg.arities.iter().enumerate() {
        let index = cfg.trials + i;
        let name = format!("scalar-product:n={n}");
        let mut run = || -> Result<(CaseRecord, Curve)> {
            let spec = holder_spec(&mut g, n, &cfg.class_exponents, SeqClassSpec::StrongP)?;
            let a = MultiOp::scalar_product(n)?;
            let ideal = ideal_norm(&a, &spec, cfg.k_max, cfg.restarts, cfg.seed, est)?;
            let curve = Curve { label: format!("I_{n} {}", describe(&spec)), points: ideal.ratio_by_k.clone() };
            let detail = json!({ "spec": spec, "ideal": ideal });
            Ok((
                CaseRecord::check(
                    name.clone(),
                    index,
                    Relation::Eq,
                    ideal.bracket.lower,
                    1.0,
                    cfg.tolerances.exact,
                    detail,
                ),
                curve,
            ))
        };
        match run() {
            Ok((c, curve)) => {
                cases.push(c);
                curves.push(curve);
            }
            Err(e) => cases.push(CaseRecord::failed(name, index, &e)),
        }
    }
    (cases, curves)
}

fn describe(spec: &IdealSpec) -> String {
    let inputs: Vec<String> = spec.inputs.iter().map(|s| s.to_string()).collect();
    format!("({}; {})", inputs.join(", "), spec.output)
}

fn ideal_axioms(cfg: &ExperimentConfig) -> Vec<CaseRecord> {
    per_trial(cfg, "ideal-axioms", |t, seed| {
        let est = &cfg.estimator;
        let tol = cfg.tolerances.estimated;
        let mut g = rng(seed);
        let n = pick(&mut g, &cfg.arities);
        let spec = if coin(&mut g) {
            IdealSpec::uniform(SeqClassSpec::WeakP(1.0), n)?
        } else {
            holder_spec(&mut g, n, &cfg.class_exponents, SeqClassSpec::StrongP)?
        };
        let mut cases = Vec::new();

        // v ∘ A ∘ (u_1, …, u_n)
        let a = random_op(&mut g, n, cfg)?;
        let target = random_space(&mut g, cfg)?;
        let v = random_linear(&mut g, a.codomain(), target)?;
        let mut us = Vec::with_capacity(n);
        for &e in a.domain() {
            let f = random_space(&mut g, cfg)?;
            us.push(random_linear(&mut g, f, e)?);
        }
        let c = compose(&v, &a, &us)?;
        let comp = ideal_norm(&c, &spec, cfg.k_max, cfg.restarts, seed, est)?;
        // the composite's witness, pushed through the u_m, is a candidate for A
        let pushed: Vec<VecSeq> = comp
            .witness
            .iter()
            .zip(&us)
            .map(|(s, u)| u.apply_sequences(std::slice::from_ref(s)))
            .collect::<Result<_>>()?;
        let inner = ideal_norm_seeded(&a, &spec, cfg.k_max, cfg.restarts, derive_seed(seed, 1), est, &[pushed])?;
        let op_v = op_norm(&v, est, derive_seed(seed, 2)).bracket;
        let op_us: Vec<NormBracket> =
            us.iter().enumerate().map(|(m, u)| op_norm(u, est, derive_seed(seed, 3 + m as u64)).bracket).collect();
        let rhs = op_v.upper * inner.bracket.upper * op_us.iter().map(|b| b.upper).product::<f64>();
        let detail = json!({
            "spec": spec, "operator": a, "left": v, "right": us,
            "composite": comp.bracket, "inner": inner.bracket, "op_left": op_v, "op_right": op_us,
        });
        cases.push(CaseRecord::check("composition", t, Relation::Le, comp.bracket.lower, rhs, tol, detail));

        // φ_1 ⊗ ⋯ ⊗ φ_n ⊗ b
        let mut phis = Vec::with_capacity(n);
        for _ in 0..n {
            let e = random_space(&mut g, cfg)?;
            phis.push(Vector::new(e.dual(), gaussian(&mut g, e.dim()))?);
        }
        let target = random_space(&mut g, cfg)?;
        let b = Vector::new(target, gaussian(&mut g, target.dim()))?;
        let ft = finite_type(&phis, &b)?;
        let est_ft = ideal_norm(&ft, &spec, cfg.k_max, cfg.restarts, derive_seed(seed, 9), est)?;
        let bound = phis.iter().map(|p| p.norm()).product::<f64>() * b.norm();
        let detail = json!({ "spec": spec, "functionals": phis, "vector": b, "ideal": est_ft.bracket });
        cases.push(CaseRecord::check("finite-type", t, Relation::Le, est_ft.bracket.lower, bound, tol, detail));
        Ok(cases)
    })
}

const LIMIT_INDICES: [f64; 5] = [1.0, 10.0, 100.0, 1000.0, 10000.0];

/// Families `A_m → A`: `(1 − 1/m)·A`, `A + B/m` or constant, under weak-1,
/// strong Hölder, sup and weak-2 specs.
fn limit_stability(cfg: &ExperimentConfig) -> Vec<CaseRecord> {
    per_trial(cfg, "limit-stability", |t, seed| {
        let mut g = rng(seed);
        let n = pick(&mut g, &cfg.arities);
        let spec = match t % 4 {
            0 => IdealSpec::uniform(SeqClassSpec::WeakP(1.0), n)?,
            1 => holder_spec(&mut g, n, &cfg.class_exponents, SeqClassSpec::StrongP)?,
            2 => IdealSpec::uniform(SeqClassSpec::Sup, n)?,
            _ => IdealSpec::uniform(SeqClassSpec::WeakP(pick(&mut g, &cfg.class_exponents)), n)?,
        };
        let a = random_op(&mut g, n, cfg)?;
        let b = MultiOp::new(a.domain().to_vec(), a.codomain(), gaussian(&mut g, a.coeffs().len()))?;
        let (kind, family): (&str, Vec<MultiOp>) = match t % 3 {
            0 => ("scaled", LIMIT_INDICES.iter().map(|m| a.scaled(1.0 - 1.0 / m)).collect()),
            1 => ("perturbed", LIMIT_INDICES.iter().map(|m| a.add(&b.scaled(1.0 / m))).collect::<Result<_>>()?),
            _ => ("constant", vec![a.clone(); LIMIT_INDICES.len()]),
        };
        let report = limit_stability_experiment(&family, &a, &spec, cfg.k_max, seed, &cfg.estimator)?;
        let detail = json!({ "spec": spec, "kind": kind, "operator": a, "perturbation": b, "report": report });
        Ok(vec![CaseRecord::check(
            format!("limit:{kind}"),
            t,
            Relation::Le,
            report.limit.bracket.lower,
            report.sup_upper,
            cfg.tolerances.estimated,
            detail,
        )])
    })
}
