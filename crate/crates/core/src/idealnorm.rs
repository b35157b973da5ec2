//! Summing norms of multilinear operators: the best constant `C` in
//! `‖(A(x_j^1, …, x_j^n))_j‖_Y ≤ C Π_m ‖(x_j^m)_j‖_{X_m}` over finite sequences.
//!
//! Everything here is a lower bound witnessed by explicit sequences; ceilings
//! on the supremum itself are heuristic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::multiop::{diag_operator, op_norm, op_norm_with_starts, MultiOp};
use crate::random::{coin, derive_seed, gaussian, pick_exponent, rng, uniform_index, Rng};
use crate::seqnorm::{class_norm, EstimatorConfig, NormBracket, SeqClassSpec, VecSeq};
use crate::spaces::{Exponent, Space};

/// Largest sequence length used with Rademacher classes.
pub const RAD_K_CAP: usize = 12;

/// Tolerance on theorem-backed inequalities.
pub const CEILING_TOL: f64 = 1e-6;

/// Classes `(X_1, …, X_n; Y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdealSpec {
    pub inputs: Vec<SeqClassSpec>,
    pub output: SeqClassSpec,
}

/// A family of specs for which every bounded operator has summing norm equal
/// to its operator norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StableFamily {
    WeakOne,
    Rad,
    CohenHolder,
    StrongHolder,
}

impl IdealSpec {
    pub fn new(inputs: Vec<SeqClassSpec>, output: SeqClassSpec) -> Result<IdealSpec> {
        if inputs.is_empty() {
            return Err(invalid("an ideal spec needs at least one input class"));
        }
        for s in inputs.iter().chain([&output]) {
            s.validate()?;
        }
        Ok(IdealSpec { inputs, output })
    }

    /// `(X, …, X; X)` with `n` inputs.
    pub fn uniform(class: SeqClassSpec, n: usize) -> Result<IdealSpec> {
        IdealSpec::new(vec![class; n], class)
    }

    pub fn arity(&self) -> usize {
        self.inputs.len()
    }

    pub fn uses_rad(&self) -> bool {
        self.inputs.iter().chain([&self.output]).any(|s| *s == SeqClassSpec::Rad)
    }

    /// `1/p ≤ Σ 1/p_m` for the given exponents.
    fn holder(inputs: &[f64], output: f64) -> bool {
        1.0 / output <= inputs.iter().map(|p| 1.0 / p).sum::<f64>() + 1e-12
    }

    pub fn stable_family(&self) -> Option<StableFamily> {
        use SeqClassSpec::*;
        let all = |f: &dyn Fn(&SeqClassSpec) -> bool| self.inputs.iter().chain([&self.output]).all(f);
        let params = || -> Vec<f64> { self.inputs.iter().filter_map(|s| s.parameter()).collect() };
        if all(&|s| *s == WeakP(1.0)) {
            Some(StableFamily::WeakOne)
        } else if all(&|s| *s == Rad) {
            Some(StableFamily::Rad)
        } else if all(&|s| matches!(s, CohenP(_))) && IdealSpec::holder(&params(), self.output.parameter()?) {
            Some(StableFamily::CohenHolder)
        } else if all(&|s| matches!(s, StrongP(_))) && IdealSpec::holder(&params(), self.output.parameter()?) {
            Some(StableFamily::StrongHolder)
        } else {
            None
        }
    }

    fn check_operator(&self, a: &MultiOp) -> Result<()> {
        if self.arity() != a.arity() {
            return Err(Error::DimensionMismatch { expected: a.arity(), got: self.arity() });
        }
        Ok(())
    }

    /// Longest sequences worth searching for this spec.
    pub fn k_cap(&self, k_max: usize, cfg: &EstimatorConfig) -> usize {
        if self.uses_rad() {
            k_max.min(RAD_K_CAP).min(cfg.sign_cutoff).max(1)
        } else {
            k_max
        }
    }
}

/// Brackets behind one ratio evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioDetail {
    pub ratio: f64,
    pub output: NormBracket,
    pub inputs: Vec<NormBracket>,
}

/// `Y-norm(A(x_j^1, …, x_j^n)).lower / Π X_m-norm(x^m).upper`.
pub fn ideal_ratio(a: &MultiOp, spec: &IdealSpec, seqs: &[VecSeq], cfg: &EstimatorConfig, seed: u64) -> Result<f64> {
    Ok(ratio_detail(a, spec, seqs, cfg, seed)?.ratio)
}

pub fn ratio_detail(
    a: &MultiOp,
    spec: &IdealSpec,
    seqs: &[VecSeq],
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<RatioDetail> {
    spec.check_operator(a)?;
    if seqs.first().is_none_or(|s| s.is_empty()) {
        return Err(invalid("ratio needs sequences of length at least 1"));
    }
    let out = a.apply_sequences(seqs)?;
    let mut inputs = Vec::with_capacity(seqs.len());
    let mut denom = 1.0;
    for (m, (s, class)) in seqs.iter().zip(&spec.inputs).enumerate() {
        let b = class_norm(s, *class, cfg, derive_seed(seed, m as u64))?;
        if b.upper == 0.0 {
            return Err(invalid(format!("input sequence {} has norm zero", m + 1)));
        }
        denom *= b.upper;
        inputs.push(b);
    }
    let output = class_norm(&out, spec.output, cfg, derive_seed(seed, seqs.len() as u64))?;
    Ok(RatioDetail { ratio: output.lower / denom, output, inputs })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdealNormEstimate {
    pub bracket: NormBracket,
    pub best_k: usize,
    pub witness: Vec<VecSeq>,
    pub ratio_by_k: Vec<(usize, f64)>,
}

pub fn ideal_norm(
    a: &MultiOp,
    spec: &IdealSpec,
    k_max: usize,
    restarts: usize,
    seed: u64,
    cfg: &EstimatorConfig,
) -> Result<IdealNormEstimate> {
    ideal_norm_seeded(a, spec, k_max, restarts, seed, cfg, &[])
}

/// [`ideal_norm`] with extra candidate sequence tuples (shorter ones are
/// zero-padded when they are used).
pub fn ideal_norm_seeded(
    a: &MultiOp,
    spec: &IdealSpec,
    k_max: usize,
    restarts: usize,
    seed: u64,
    cfg: &EstimatorConfig,
    starts: &[Vec<VecSeq>],
) -> Result<IdealNormEstimate> {
    spec.check_operator(a)?;
    if k_max == 0 {
        return Err(invalid("k_max must be at least 1"));
    }
    for s in spec.inputs.iter().chain([&spec.output]) {
        s.validate()?;
    }
    let k_cap = spec.k_cap(k_max, cfg);
    let op = op_norm(a, cfg, seed);
    let singletons: Vec<VecSeq> =
        op.witness.iter().map(|x| VecSeq::new(x.space(), vec![x.coords().to_vec()]).expect("unit witness")).collect();
    if a.is_zero() {
        return Ok(IdealNormEstimate {
            bracket: NormBracket::exact(0.0, "zero"),
            best_k: 1,
            witness: singletons,
            ratio_by_k: (1..=k_cap).map(|k| (k, 0.0)).collect(),
        });
    }
    let search = cfg.search();
    let eval = |seqs: &[VecSeq], c: &EstimatorConfig| ratio_detail(a, spec, seqs, c, seed).ok().map(|d| d.ratio);

    let r1 = eval(&singletons, cfg).unwrap_or(0.0);
    let mut ratio_by_k = vec![(1, r1)];
    let mut current = (r1, singletons);
    let mut best = (current.0, 1usize, current.1.clone());

    for k in 2..=k_cap {
        let mut g = rng(derive_seed(seed, 1000 + k as u64));
        let mut candidates: Vec<Vec<VecSeq>> = Vec::new();
        candidates.extend(starts.iter().filter(|s| s.first().is_some_and(|x| x.len() <= k)).map(|s| pad(s, k)));
        candidates.push(basis_sequences(a, k));
        let mut extended = pad(&current.1, k);
        for s in extended.iter_mut() {
            let v = gaussian(&mut g, s.space().dim());
            *s = VecSeq::new(s.space(), s.vectors()[..k - 1].iter().cloned().chain([v]).collect()).expect("dims");
        }
        candidates.push(extended);
        for _ in 0..restarts {
            candidates.push(random_sequences(&mut g, a.domain(), k, false));
        }

        let mut scored: Vec<(f64, Vec<VecSeq>)> =
            candidates.into_iter().filter_map(|c| eval(&c, &search).map(|r| (r, c))).collect();
        scored.sort_by(|x, y| y.0.total_cmp(&x.0));
        let mut top: Option<(f64, Vec<VecSeq>)> = None;
        for (_, cand) in scored.into_iter().take(2) {
            let refined = refine(cand, &|s: &[VecSeq]| eval(s, &search), 60);
            if let Some(r) = eval(&refined, cfg) {
                if top.as_ref().is_none_or(|t| r > t.0) {
                    top = Some((r, refined));
                }
            }
        }
        match top {
            Some((r, w)) if r > current.0 => current = (r, w),
            _ => current = (current.0, pad(&current.1, k)),
        }
        ratio_by_k.push((k, current.0));
        if current.0 > best.0 {
            best = (current.0, k, current.1.clone());
        }
    }
    let lower = best.0;
    Ok(IdealNormEstimate {
        bracket: NormBracket::estimated(lower, lower * (1.0 + cfg.ascent_slack), "k-sweep", seed),
        best_k: best.1,
        witness: best.2,
        ratio_by_k,
    })
}

fn pad(seqs: &[VecSeq], k: usize) -> Vec<VecSeq> {
    seqs.iter().map(|s| s.padded(k)).collect()
}

/// `(e_{j mod d_m})_{j<k}` in each slot.
fn basis_sequences(a: &MultiOp, k: usize) -> Vec<VecSeq> {
    a.domain()
        .iter()
        .map(|s| VecSeq::new(*s, (0..k).map(|j| s.basis(j % s.dim()).into_coords()).collect()).expect("dims"))
        .collect()
}

/// Gaussian sequences; with `sparse`, some vectors are zeroed (never all).
pub fn random_sequences(g: &mut Rng, domain: &[Space], k: usize, sparse: bool) -> Vec<VecSeq> {
    domain
        .iter()
        .map(|s| {
            let mut rows: Vec<Vec<f64>> = (0..k).map(|_| gaussian(g, s.dim())).collect();
            if sparse && k > 1 {
                let keep = uniform_index(g, k);
                for (j, r) in rows.iter_mut().enumerate() {
                    if j != keep && coin(g) && coin(g) {
                        r.iter_mut().for_each(|v| *v = 0.0);
                    }
                }
            }
            VecSeq::new(*s, rows).expect("dims")
        })
        .collect()
}

/// Coordinate ascent on the ratio with step halving; each block is rescaled
/// to unit max-coordinate after every pass since the ratio is invariant
/// under block scaling.
fn refine(mut seqs: Vec<VecSeq>, f: &dyn Fn(&[VecSeq]) -> Option<f64>, budget: usize) -> Vec<VecSeq> {
    let Some(mut value) = f(&seqs) else { return seqs };
    let mut h = 0.5;
    let mut evals = 0;
    while h > 1e-3 && evals < budget {
        let mut improved = false;
        for m in 0..seqs.len() {
            let (k, d) = (seqs[m].len(), seqs[m].space().dim());
            for j in 0..k {
                for i in 0..d {
                    for step in [h, -h] {
                        if evals >= budget {
                            break;
                        }
                        let mut rows = seqs[m].vectors().to_vec();
                        rows[j][i] += step;
                        let trial_seq = VecSeq::new(seqs[m].space(), rows).expect("dims");
                        let mut trial = seqs.clone();
                        trial[m] = trial_seq;
                        evals += 1;
                        if let Some(v) = f(&trial) {
                            if v > value * (1.0 + 1e-12) {
                                (value, seqs) = (v, trial);
                                improved = true;
                                break;
                            }
                        }
                    }
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
        for s in seqs.iter_mut() {
            let peak = s.vectors().iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if peak > 0.0 {
                *s = s.scaled(1.0 / peak);
            }
        }
    }
    seqs
}

/// The `j`-th tuple `(x_j^1, …, x_j^n)` of each nonzero position, as
/// starting points for the operator-norm search.
pub fn witness_tuples(seqs: &[VecSeq]) -> Vec<Vec<Vec<f64>>> {
    let k = seqs.first().map_or(0, |s| s.len());
    (0..k)
        .map(|j| seqs.iter().map(|s| s.get(j).to_vec()).collect::<Vec<_>>())
        .filter(|t: &Vec<Vec<f64>>| t.iter().all(|x| x.iter().any(|&v| v != 0.0)))
        .collect()
}

/// How random operators and sequences are drawn for a stability run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilityOptions {
    pub trials: usize,
    pub k_max: usize,
    pub dim_max: usize,
    /// Exponents the random domain and codomain spaces are drawn from.
    pub exponents: Vec<Exponent>,
    /// Run the k-sweep search on every `search_every`-th trial; 0 disables it.
    pub search_every: usize,
    pub search_restarts: usize,
    pub seed: u64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            trials: 100,
            k_max: 6,
            dim_max: 4,
            exponents: default_exponents(),
            search_every: 10,
            search_restarts: 4,
            seed: 0,
        }
    }
}

pub fn default_exponents() -> Vec<Exponent> {
    [1.0, 4.0 / 3.0, 1.5, 2.0, 3.0, f64::INFINITY].iter().map(|&q| Exponent::new(q).expect("valid")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityTrial {
    pub index: usize,
    pub seed: u64,
    pub operator: MultiOp,
    pub inputs: Vec<VecSeq>,
    pub detail: RatioDetail,
    pub op: NormBracket,
    /// Best ratio of the k-sweep search, when it ran.
    pub search_lower: Option<f64>,
    pub violation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub spec: IdealSpec,
    pub family: StableFamily,
    pub trials: Vec<StabilityTrial>,
    pub violations: usize,
    /// Largest `ratio / op.lower` seen.
    pub max_ratio_over_op: f64,
    /// Smallest `search_lower / op.lower` over the searched trials.
    pub min_search_attainment: Option<f64>,
}

/// Stability run for the uniform spec `(X, …, X; X)` of arity `n`.
pub fn stability_report(
    family: SeqClassSpec,
    n: usize,
    trials: usize,
    seed: u64,
    cfg: &EstimatorConfig,
) -> Result<StabilityReport> {
    let opts = StabilityOptions { trials, seed, ..Default::default() };
    stability_report_for(&IdealSpec::uniform(family, n)?, &opts, cfg)
}

/// Draws random operators and sequences and checks the certified ratio
/// against the operator-norm ceiling. Only declared-stable specs are accepted.
pub fn stability_report_for(
    spec: &IdealSpec,
    opts: &StabilityOptions,
    cfg: &EstimatorConfig,
) -> Result<StabilityReport> {
    let family =
        spec.stable_family().ok_or_else(|| invalid(format!("no stability theorem covers {}", describe(spec))))?;
    if opts.trials == 0 || opts.k_max == 0 || opts.dim_max == 0 || opts.exponents.is_empty() {
        return Err(invalid("stability runs need positive trials, k_max, dim_max and an exponent menu"));
    }
    let k_max = spec.k_cap(opts.k_max, cfg);
    let trials: Vec<StabilityTrial> =
        (0..opts.trials).into_par_iter().map(|t| stability_trial(spec, opts, k_max, t, cfg)).collect::<Result<_>>()?;
    let violations = trials.iter().filter(|t| t.violation).count();
    let max_ratio_over_op = trials
        .iter()
        .filter(|t| t.op.lower > 0.0)
        .map(|t| t.search_lower.unwrap_or(0.0).max(t.detail.ratio) / t.op.lower)
        .fold(0.0, f64::max);
    let min_search_attainment = trials
        .iter()
        .filter_map(|t| t.search_lower.filter(|_| t.op.lower > 0.0).map(|s| s / t.op.lower))
        .reduce(f64::min);
    Ok(StabilityReport { spec: spec.clone(), family, trials, violations, max_ratio_over_op, min_search_attainment })
}

fn stability_trial(
    spec: &IdealSpec,
    opts: &StabilityOptions,
    k_max: usize,
    index: usize,
    cfg: &EstimatorConfig,
) -> Result<StabilityTrial> {
    let seed = derive_seed(opts.seed, index as u64);
    let mut g = rng(seed);
    let a = random_operator(&mut g, spec.arity(), opts.dim_max, &opts.exponents)?;
    let k = 1 + uniform_index(&mut g, k_max);
    let sparse = coin(&mut g);
    let inputs = random_sequences(&mut g, a.domain(), k, sparse);
    let detail = ratio_detail(&a, spec, &inputs, cfg, seed)?;
    let mut starts = witness_tuples(&inputs);
    let search = if opts.search_every > 0 && index.is_multiple_of(opts.search_every) {
        let est = ideal_norm(&a, spec, k_max, opts.search_restarts, seed, cfg)?;
        starts.extend(witness_tuples(&est.witness));
        Some(est.bracket.lower)
    } else {
        None
    };
    let op = op_norm_with_starts(&a, cfg, seed, &starts).bracket;
    let ceiling = op.upper * (1.0 + CEILING_TOL);
    let violation = detail.ratio > ceiling || search.is_some_and(|s| s > ceiling);
    Ok(StabilityTrial { index, seed, operator: a, inputs, detail, op, search_lower: search, violation })
}

/// Gaussian `n`-linear operator between random `ℓ_q` spaces of dimension at most `dim_max`.
pub fn random_operator(g: &mut Rng, n: usize, dim_max: usize, exponents: &[Exponent]) -> Result<MultiOp> {
    let space = |g: &mut Rng| Space::new(1 + uniform_index(g, dim_max), pick_exponent(g, exponents));
    let domain: Vec<Space> = (0..n).map(|_| space(g)).collect::<Result<_>>()?;
    let codomain = space(g)?;
    let size = domain.iter().map(|s| s.dim()).product::<usize>() * codomain.dim();
    MultiOp::new(domain, codomain, gaussian(g, size))
}

fn describe(spec: &IdealSpec) -> String {
    let inputs: Vec<String> = spec.inputs.iter().map(|s| s.to_string()).collect();
    format!("({}; {})", inputs.join(", "), spec.output)
}

/// Ratios `k ↦ ‖(e_j)‖_{ℓ_p^w(ℓ_1^k)} / Π ‖(e_j)‖_{ℓ_p^w(ℓ_{p*}^k)}` for the
/// `n`-fold coordinatewise product, which is bounded with norm at most 1 once
/// `n ≥ p*`. The ratio equals `k^{1/p}`.
pub fn growth_experiment(p: f64, n: usize, k_list: &[usize], cfg: &EstimatorConfig) -> Result<Vec<(usize, f64)>> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidExponent(p));
    }
    let p_star = Exponent::finite(p)?.conjugate();
    if (n as f64) < p_star.value() - 1e-12 {
        return Err(invalid(format!("need n ≥ p* = {} for a bounded diagonal operator, got n = {n}", p_star)));
    }
    let spec = IdealSpec::uniform(SeqClassSpec::WeakP(p), n)?;
    k_list
        .iter()
        .map(|&k| {
            let a = diag_operator(n, k, p_star)?;
            let seqs = basis_sequences(&a, k);
            Ok((k, ideal_ratio(&a, &spec, &seqs, cfg, 0)?))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub limit: IdealNormEstimate,
    /// Summing-norm brackets of the approximating operators.
    pub members: Vec<NormBracket>,
    pub sup_upper: f64,
    /// Ratio of each approximant at the limit's witness.
    pub at_witness: Vec<f64>,
    pub witness_ratio: f64,
    pub holds: bool,
}

/// Checks `‖A‖_ideal ≤ sup_m ‖A_m‖_ideal` for operators `A_m → A`. Each `A_m`
/// search also starts from the limit's witness.
pub fn limit_stability_experiment(
    a_seq: &[MultiOp],
    a: &MultiOp,
    spec: &IdealSpec,
    k_max: usize,
    seed: u64,
    cfg: &EstimatorConfig,
) -> Result<LimitReport> {
    if spec.uses_rad() {
        return Err(invalid("limit experiments need finitely determined classes without Rad"));
    }
    if a_seq.is_empty() {
        return Err(invalid("limit experiments need at least one approximating operator"));
    }
    for am in a_seq {
        if am.domain() != a.domain() || am.codomain() != a.codomain() {
            return Err(invalid("approximating operators must share the limit's spaces"));
        }
    }
    let limit = ideal_norm(a, spec, k_max, 4, seed, cfg)?;
    let starts = [limit.witness.clone()];
    let mut members = Vec::with_capacity(a_seq.len());
    let mut at_witness = Vec::with_capacity(a_seq.len());
    for (m, am) in a_seq.iter().enumerate() {
        let s = derive_seed(seed, m as u64 + 1);
        members.push(ideal_norm_seeded(am, spec, k_max, 4, s, cfg, &starts)?.bracket);
        at_witness.push(ideal_ratio(am, spec, &limit.witness, cfg, seed).unwrap_or(0.0));
    }
    let sup_upper = members.iter().map(|b| b.upper).fold(0.0, f64::max);
    let witness_ratio = ideal_ratio(a, spec, &limit.witness, cfg, seed).unwrap_or(0.0);
    let holds = limit.bracket.lower <= sup_upper * (1.0 + CEILING_TOL);
    Ok(LimitReport { limit, members, sup_upper, at_witness, witness_ratio, holds })
}
