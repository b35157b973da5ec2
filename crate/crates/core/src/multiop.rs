//! Continuous `n`-linear operators `E_1 × ⋯ × E_n → F` between `ℓ_q` spaces.
//!
//! Coefficients are stored row-major in a tensor of shape
//! `d_1 × ⋯ × d_n × d_out`, so `A(x_1, …, x_n)_o = Σ t[i_1, …, i_n, o] x_1[i_1] ⋯ x_n[i_n]`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::random::{derive_seed, rng, unit_vector};
use crate::seqnorm::{max_signed_sum, EstimatorConfig, NormBracket, VecSeq};
use crate::spaces::{lq_norm, norming_coords, Exponent, Space, Vector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorLiteral", into = "OperatorLiteral")]
pub struct MultiOp {
    domain: Vec<Space>,
    codomain: Space,
    coeffs: Vec<f64>,
}

/// JSON form of an operator. `coeffs` may be flat or nested to any depth; it
/// is read in row-major order and must hold `Π shape` numbers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorLiteral {
    pub domain: Vec<Space>,
    pub codomain: Space,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Vec<usize>>,
    pub coeffs: serde_json::Value,
}

impl TryFrom<OperatorLiteral> for MultiOp {
    type Error = Error;

    fn try_from(lit: OperatorLiteral) -> Result<MultiOp> {
        let mut flat = Vec::new();
        flatten(&lit.coeffs, &mut flat)?;
        let op = MultiOp::new(lit.domain, lit.codomain, flat)?;
        if let Some(shape) = lit.shape {
            if shape != op.shape() {
                return Err(invalid(format!("declared shape {:?} does not match spaces {:?}", shape, op.shape())));
            }
        }
        Ok(op)
    }
}

impl From<MultiOp> for OperatorLiteral {
    fn from(op: MultiOp) -> OperatorLiteral {
        let shape = op.shape();
        OperatorLiteral { domain: op.domain, codomain: op.codomain, shape: Some(shape), coeffs: op.coeffs.into() }
    }
}

fn flatten(v: &serde_json::Value, out: &mut Vec<f64>) -> Result<()> {
    match v {
        serde_json::Value::Array(items) => items.iter().try_for_each(|item| flatten(item, out)),
        serde_json::Value::Number(n) => {
            out.push(n.as_f64().ok_or_else(|| invalid("coefficient out of range"))?);
            Ok(())
        }
        other => Err(invalid(format!("coefficient `{other}` is not a number"))),
    }
}

impl MultiOp {
    pub fn new(domain: Vec<Space>, codomain: Space, coeffs: Vec<f64>) -> Result<MultiOp> {
        if domain.is_empty() {
            return Err(invalid("an operator needs at least one argument"));
        }
        let size: usize = domain.iter().map(|s| s.dim()).product::<usize>() * codomain.dim();
        if coeffs.len() != size {
            return Err(Error::DimensionMismatch { expected: size, got: coeffs.len() });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("operator coefficients must be finite"));
        }
        Ok(MultiOp { domain, codomain, coeffs })
    }

    pub fn zero(domain: Vec<Space>, codomain: Space) -> Result<MultiOp> {
        let size = domain.iter().map(|s| s.dim()).product::<usize>() * codomain.dim();
        MultiOp::new(domain, codomain, vec![0.0; size])
    }

    /// The linear map `x ↦ m x` for a `d_out × d_in` matrix given by rows.
    pub fn linear(domain: Space, codomain: Space, rows: &[Vec<f64>]) -> Result<MultiOp> {
        if rows.len() != codomain.dim() || rows.iter().any(|r| r.len() != domain.dim()) {
            return Err(invalid(format!("matrix does not map {domain} to {codomain}")));
        }
        let (din, dout) = (domain.dim(), codomain.dim());
        let coeffs = (0..din * dout).map(|idx| rows[idx % dout][idx / dout]).collect();
        MultiOp::new(vec![domain], codomain, coeffs)
    }

    /// Formal identity between two spaces of the same dimension.
    pub fn identity(domain: Space, codomain: Space) -> Result<MultiOp> {
        if domain.dim() != codomain.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), got: codomain.dim() });
        }
        let d = domain.dim();
        let rows: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        MultiOp::linear(domain, codomain, &rows)
    }

    /// Scalar multiplication `I_n(λ_1, …, λ_n) = λ_1 ⋯ λ_n` on the field.
    pub fn scalar_product(n: usize) -> Result<MultiOp> {
        MultiOp::new(vec![Space::scalars(); n], Space::scalars(), vec![1.0])
    }

    pub fn arity(&self) -> usize {
        self.domain.len()
    }

    pub fn domain(&self) -> &[Space] {
        &self.domain
    }

    pub fn codomain(&self) -> Space {
        self.codomain
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `[d_1, …, d_n, d_out]`.
    pub fn shape(&self) -> Vec<usize> {
        let mut shape: Vec<usize> = self.domain.iter().map(|s| s.dim()).collect();
        shape.push(self.codomain.dim());
        shape
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn scaled(&self, alpha: f64) -> MultiOp {
        MultiOp { coeffs: self.coeffs.iter().map(|c| alpha * c).collect(), ..self.clone() }
    }

    pub fn add(&self, other: &MultiOp) -> Result<MultiOp> {
        if self.domain != other.domain || self.codomain != other.codomain {
            return Err(invalid("operators act between different spaces"));
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(MultiOp { coeffs, ..self.clone() })
    }

    /// The same coefficients read between other spaces of matching dimensions.
    pub fn with_spaces(&self, domain: Vec<Space>, codomain: Space) -> Result<MultiOp> {
        MultiOp::new(domain, codomain, self.coeffs.clone())
    }

    pub fn eval(&self, args: &[Vector]) -> Result<Vector> {
        if args.len() != self.arity() {
            return Err(Error::DimensionMismatch { expected: self.arity(), got: args.len() });
        }
        for (x, s) in args.iter().zip(&self.domain) {
            if x.space() != *s {
                return Err(invalid(format!("argument in {} where {} is expected", x.space(), s)));
            }
        }
        let coords: Vec<&[f64]> = args.iter().map(|x| x.coords()).collect();
        Vector::new(self.codomain, self.apply(&coords))
    }

    /// Evaluation on raw coordinates; lengths must match the domain.
    pub(crate) fn apply(&self, args: &[&[f64]]) -> Vec<f64> {
        let mut t = self.coeffs.clone();
        let mut shape = self.shape();
        for x in args {
            t = contract(&t, &shape, 0, x);
            shape.remove(0);
        }
        t
    }

    /// The matrix (`d_out × d_free`) of `x ↦ A(…, x, …)` with the other slots fixed.
    pub(crate) fn partial(&self, args: &[Vec<f64>], free: usize) -> DMatrix<f64> {
        let mut t = self.coeffs.clone();
        let mut shape = self.shape();
        for slot in (0..self.arity()).rev().filter(|&m| m != free) {
            t = contract(&t, &shape, slot, &args[slot]);
            shape.remove(slot);
        }
        let dout = self.codomain.dim();
        DMatrix::from_fn(dout, shape[0], |o, i| t[i * dout + o])
    }

    /// Matrix of a linear operator.
    pub(crate) fn matrix(&self) -> DMatrix<f64> {
        let dout = self.codomain.dim();
        let din: usize = self.domain.iter().map(|s| s.dim()).product();
        DMatrix::from_fn(dout, din, |o, i| self.coeffs[i * dout + o])
    }

    /// `A(x_j^1, …, x_j^n)` for each `j`.
    pub fn apply_sequences(&self, seqs: &[VecSeq]) -> Result<VecSeq> {
        if seqs.len() != self.arity() {
            return Err(Error::DimensionMismatch { expected: self.arity(), got: seqs.len() });
        }
        let k = seqs[0].len();
        for (s, space) in seqs.iter().zip(&self.domain) {
            if s.space() != *space {
                return Err(invalid(format!("sequence in {} where {} is expected", s.space(), space)));
            }
            if s.len() != k {
                return Err(invalid("input sequences differ in length"));
            }
        }
        let out = (0..k)
            .map(|j| {
                let args: Vec<&[f64]> = seqs.iter().map(|s| s.get(j)).collect();
                self.apply(&args)
            })
            .collect();
        VecSeq::new(self.codomain, out)
    }
}

/// Contracts axis `slot` of a row-major tensor with `x`.
fn contract(t: &[f64], shape: &[usize], slot: usize, x: &[f64]) -> Vec<f64> {
    let outer: usize = shape[..slot].iter().product();
    let inner: usize = shape[slot + 1..].iter().product();
    let n = shape[slot];
    let mut out = vec![0.0; outer * inner];
    for a in 0..outer {
        for (i, &xi) in x.iter().enumerate().take(n) {
            if xi == 0.0 {
                continue;
            }
            let base = (a * n + i) * inner;
            for c in 0..inner {
                out[a * inner + c] += xi * t[base + c];
            }
        }
    }
    out
}

/// Operator-norm bracket with the unit arguments attaining its lower end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpNormEstimate {
    pub bracket: NormBracket,
    pub witness: Vec<Vector>,
    /// Rigorous upper bound from coefficient estimates; the bracket's upper
    /// end is the smaller of this and the heuristic ceiling.
    pub certified_upper: f64,
}

pub(crate) struct LinearNorm {
    pub value: f64,
    pub arg: Vec<f64>,
    pub exact: bool,
}

/// `‖m : ℓ_{q_in} → ℓ_{q_out}‖` with a unit maximizer. Exact for `q_in = 1`,
/// `q_out = ∞`, `q_in = q_out = 2`, and by sign enumeration for `q_in = ∞` or
/// `q_out = 1` within the budget; otherwise a power iteration started from
/// `start` (if given), the top singular vector and the basis.
pub(crate) fn linear_norm(
    m: &DMatrix<f64>,
    q_in: Exponent,
    q_out: Exponent,
    cfg: &EstimatorConfig,
    start: Option<&[f64]>,
) -> LinearNorm {
    let (dout, din) = m.shape();
    let basis = |i: usize| {
        let mut e = vec![0.0; din];
        e[i] = 1.0;
        e
    };
    if m.iter().all(|&v| v == 0.0) {
        return LinearNorm { value: 0.0, arg: start.map(<[f64]>::to_vec).unwrap_or_else(|| basis(0)), exact: true };
    }
    let column = |i: usize| m.column(i).iter().copied().collect::<Vec<f64>>();
    let row = |o: usize| m.row(o).iter().copied().collect::<Vec<f64>>();
    if q_in.is_one() {
        let (i, value) =
            (0..din)
                .map(|i| (i, lq_norm(&column(i), q_out)))
                .fold((0, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        return LinearNorm { value, arg: basis(i), exact: true };
    }
    if q_out.is_infinite() {
        let q_in_star = q_in.conjugate();
        let (o, value) =
            (0..dout)
                .map(|o| (o, lq_norm(&row(o), q_in_star)))
                .fold((0, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        let arg = norming_coords(&row(o), q_in_star).expect("nonzero row");
        return LinearNorm { value, arg, exact: true };
    }
    if q_in.is_two() && q_out.is_two() {
        let (value, arg) = linalg::top_right_singular(m);
        return LinearNorm { value, arg, exact: true };
    }
    if q_in.is_infinite() && din <= cfg.sign_cutoff {
        let cols: Vec<Vec<f64>> = (0..din).map(column).collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let (value, _, signs) = max_signed_sum(&refs, q_out);
        return LinearNorm { value, arg: signs, exact: true };
    }
    if q_out.is_one() && dout <= cfg.sign_cutoff {
        let rows: Vec<Vec<f64>> = (0..dout).map(row).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let (value, sum, _) = max_signed_sum(&refs, q_in.conjugate());
        let arg = norming_coords(&sum, q_in.conjugate()).expect("nonzero operator");
        return LinearNorm { value, arg, exact: true };
    }

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(s) = start {
        starts.push(s.to_vec());
    }
    starts.push(linalg::top_right_singular(m).1);
    starts.extend((0..din).map(basis));
    let mut best = LinearNorm { value: -1.0, arg: basis(0), exact: false };
    for s in starts {
        let n = lq_norm(&s, q_in);
        if !(n > 0.0) {
            continue;
        }
        let mut x: Vec<f64> = s.iter().map(|v| v / n).collect();
        let mut value = lq_norm(&mat_vec(m, &x), q_out);
        for _ in 0..200 {
            let Some(psi) = norming_coords(&mat_vec(m, &x), q_out) else { break };
            let g = mat_t_vec(m, &psi);
            let Some(next) = norming_coords(&g, q_in.conjugate()) else { break };
            let v = lq_norm(&mat_vec(m, &next), q_out);
            if v <= value * (1.0 + 1e-14) {
                if v > value {
                    (x, value) = (next, v);
                }
                break;
            }
            (x, value) = (next, v);
        }
        if value > best.value {
            best = LinearNorm { value, arg: x, exact: false };
        }
    }
    best
}

/// A rigorous upper bound for `‖m : ℓ_{q_in} → ℓ_{q_out}‖`.
pub(crate) fn linear_upper(m: &DMatrix<f64>, q_in: Exponent, q_out: Exponent, cfg: &EstimatorConfig) -> f64 {
    let ln = linear_norm(m, q_in, q_out, cfg, None);
    if ln.exact {
        return ln.value;
    }
    let (dout, din) = m.shape();
    let cols: Vec<f64> = (0..din).map(|i| lq_norm(&m.column(i).iter().copied().collect::<Vec<_>>(), q_out)).collect();
    let rows: Vec<f64> =
        (0..dout).map(|o| lq_norm(&m.row(o).iter().copied().collect::<Vec<_>>(), q_in.conjugate())).collect();
    lq_norm(&cols, q_in.conjugate()).min(lq_norm(&rows, q_out)).max(ln.value)
}

fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|o| (0..m.ncols()).map(|i| m[(o, i)] * x[i]).sum()).collect()
}

fn mat_t_vec(m: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    (0..m.ncols()).map(|i| (0..m.nrows()).map(|o| m[(o, i)] * y[o]).sum()).collect()
}

pub fn op_norm(a: &MultiOp, cfg: &EstimatorConfig, seed: u64) -> OpNormEstimate {
    op_norm_with_starts(a, cfg, seed, &[])
}

/// [`op_norm`] with extra starting points for the alternating maximization.
pub fn op_norm_with_starts(a: &MultiOp, cfg: &EstimatorConfig, seed: u64, starts: &[Vec<Vec<f64>>]) -> OpNormEstimate {
    let to_witness =
        |args: &[Vec<f64>]| -> Vec<Vector> { args.iter().zip(&a.domain).map(|(x, s)| unit(s, x)).collect() };
    if a.is_zero() {
        let witness = a.domain.iter().map(|s| s.basis(0)).collect();
        return OpNormEstimate { bracket: NormBracket::exact(0.0, "zero"), witness, certified_upper: 0.0 };
    }
    let q_out = a.codomain.exponent();
    if a.arity() == 1 {
        let m = a.matrix();
        let q_in = a.domain[0].exponent();
        let ln = linear_norm(&m, q_in, q_out, cfg, None);
        let certified = linear_upper(&m, q_in, q_out, cfg);
        let witness = to_witness(&[ln.arg]);
        let lower = a.eval(&witness).expect("witness in domain").norm();
        let bracket = if ln.exact {
            NormBracket::exact(lower, "linear-exact")
        } else {
            NormBracket::estimated(lower, (lower * (1.0 + cfg.ascent_slack)).min(certified), "linear-power", seed)
        };
        return OpNormEstimate { bracket, witness, certified_upper: certified };
    }

    let mut candidates: Vec<Vec<Vec<f64>>> = starts.to_vec();
    for r in 0..cfg.op_restarts.max(1) {
        let mut g = rng(derive_seed(seed, r as u64));
        candidates.push(a.domain.iter().map(|s| unit_vector(&mut g, *s)).collect());
    }
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    for start in candidates {
        if start.len() != a.arity() || start.iter().zip(&a.domain).any(|(x, s)| x.len() != s.dim()) {
            continue;
        }
        let (value, args) = alternate(a, start, cfg);
        if best.as_ref().is_none_or(|b| value > b.0) {
            best = Some((value, args));
        }
    }
    let (_, args) = best.expect("at least one restart");
    let witness = to_witness(&args);
    let lower = a.eval(&witness).expect("witness in domain").norm();
    let certified = certified_bound(a, cfg).max(lower);
    let bracket = if certified <= lower * (1.0 + 1e-12) {
        NormBracket::exact(lower, "alternating-certified")
    } else {
        NormBracket::estimated(lower, (lower * (1.0 + cfg.ascent_slack)).min(certified), "alternating", seed)
    };
    OpNormEstimate { bracket, witness, certified_upper: certified }
}

fn unit(space: &Space, x: &[f64]) -> Vector {
    let n = space.norm(x);
    let coords = if n > 0.0 { x.iter().map(|v| v / n).collect() } else { space.basis(0).into_coords() };
    Vector::new(*space, coords).expect("dimension checked")
}

/// Block-coordinate ascent: each slot in turn is replaced by a maximizer of
/// the linear problem left when the other slots are fixed.
fn alternate(a: &MultiOp, mut args: Vec<Vec<f64>>, cfg: &EstimatorConfig) -> (f64, Vec<Vec<f64>>) {
    for (x, s) in args.iter_mut().zip(&a.domain) {
        *x = unit(s, x).into_coords();
    }
    let q_out = a.codomain.exponent();
    let refs: Vec<&[f64]> = args.iter().map(|x| x.as_slice()).collect();
    let mut value = lq_norm(&a.apply(&refs), q_out);
    for _ in 0..200 {
        let before = value;
        for m in 0..a.arity() {
            let mat = a.partial(&args, m);
            let ln = linear_norm(&mat, a.domain[m].exponent(), q_out, cfg, Some(&args[m]));
            if ln.value > value {
                args[m] = ln.arg;
                value = ln.value;
            }
        }
        if value <= before * (1.0 + 1e-13) {
            break;
        }
    }
    (value, args)
}

/// Rigorous upper bound on `‖A‖`: reduce to scalar forms through the extreme
/// points of `B_{F'}` when they are few, then bound forms (or vector-valued
/// maps) slot by slot with exact linear norms at the base.
pub fn certified_bound(a: &MultiOp, cfg: &EstimatorConfig) -> f64 {
    let dout = a.codomain.dim();
    let q_out = a.codomain.exponent();
    let dims: Vec<usize> = a.domain.iter().map(|s| s.dim()).collect();
    let exps: Vec<Exponent> = a.domain.iter().map(|s| s.exponent()).collect();
    let mut shape = dims.clone();
    shape.push(dout);
    let functionals: Option<Vec<Vec<f64>>> = if dout == 1 {
        Some(vec![vec![1.0]])
    } else if q_out.is_infinite() {
        Some((0..dout).map(|o| (0..dout).map(|i| if i == o { 1.0 } else { 0.0 }).collect()).collect())
    } else if q_out.is_one() && dout <= cfg.sign_cutoff.min(12) {
        Some(
            (0..1u32 << (dout - 1))
                .map(|mask| (0..dout).map(|o| if o > 0 && mask >> (o - 1) & 1 == 1 { -1.0 } else { 1.0 }).collect())
                .collect(),
        )
    } else {
        None
    };
    match functionals {
        Some(fs) => fs
            .iter()
            .map(|psi| form_bound(&contract(&a.coeffs, &shape, dims.len(), psi), &dims, &exps, cfg))
            .fold(0.0, f64::max),
        None => vector_bound(&a.coeffs, &dims, &exps, dout, q_out, cfg),
    }
}

fn form_bound(t: &[f64], dims: &[usize], exps: &[Exponent], cfg: &EstimatorConfig) -> f64 {
    match dims.len() {
        1 => lq_norm(t, exps[0].conjugate()),
        2 => {
            // B(x, y) = ⟨x, T y⟩, so ‖B‖ = ‖T : ℓ_{q_2} → ℓ_{q_1*}‖
            let m = DMatrix::from_fn(dims[0], dims[1], |i, j| t[i * dims[1] + j]);
            linear_upper(&m, exps[1], exps[0].conjugate(), cfg)
        }
        _ => {
            let sub: usize = dims[1..].iter().product();
            let parts: Vec<f64> =
                (0..dims[0]).map(|i| form_bound(&t[i * sub..(i + 1) * sub], &dims[1..], &exps[1..], cfg)).collect();
            lq_norm(&parts, exps[0].conjugate())
        }
    }
}

fn vector_bound(
    t: &[f64],
    dims: &[usize],
    exps: &[Exponent],
    dout: usize,
    q_out: Exponent,
    cfg: &EstimatorConfig,
) -> f64 {
    if dims.len() == 1 {
        let m = DMatrix::from_fn(dout, dims[0], |o, i| t[i * dout + o]);
        return linear_upper(&m, exps[0], q_out, cfg);
    }
    let sub: usize = dims[1..].iter().product::<usize>() * dout;
    let parts: Vec<f64> = (0..dims[0])
        .map(|i| vector_bound(&t[i * sub..(i + 1) * sub], &dims[1..], &exps[1..], dout, q_out, cfg))
        .collect();
    lq_norm(&parts, exps[0].conjugate())
}

/// `(x_1, …, x_n) ↦ φ_1(x_1) ⋯ φ_n(x_n) b`; each `φ_m` lives in the dual of
/// the corresponding domain space.
pub fn finite_type(phis: &[Vector], b: &Vector) -> Result<MultiOp> {
    if phis.is_empty() {
        return Err(invalid("finite-type operators need at least one functional"));
    }
    let domain: Vec<Space> = phis.iter().map(|phi| phi.space().dual()).collect();
    let mut coeffs = vec![1.0];
    for phi in phis {
        coeffs = coeffs.iter().flat_map(|c| phi.coords().iter().map(move |v| c * v)).collect();
    }
    let coeffs = coeffs.iter().flat_map(|c| b.coords().iter().map(move |v| c * v)).collect();
    MultiOp::new(domain, b.space(), coeffs)
}

/// `v ∘ A ∘ (u_1, …, u_n)` for linear `v` and `u_m`.
pub fn compose(v: &MultiOp, a: &MultiOp, us: &[MultiOp]) -> Result<MultiOp> {
    if v.arity() != 1 || us.iter().any(|u| u.arity() != 1) {
        return Err(invalid("the outer maps of a composition must be linear"));
    }
    if us.len() != a.arity() {
        return Err(Error::DimensionMismatch { expected: a.arity(), got: us.len() });
    }
    if v.domain[0] != a.codomain {
        return Err(invalid(format!("left factor acts on {}, operator lands in {}", v.domain[0], a.codomain)));
    }
    for (u, s) in us.iter().zip(&a.domain) {
        if u.codomain != *s {
            return Err(invalid(format!("right factor lands in {}, operator expects {}", u.codomain, s)));
        }
    }
    // mode products: replace axis m of A by u_m's input axis, then the output axis by v's
    let mut t = a.coeffs.clone();
    let mut shape = a.shape();
    for (m, u) in us.iter().enumerate() {
        let um = u.matrix();
        t = mode_product(&t, &shape, m, &um);
        shape[m] = um.ncols();
    }
    let last = shape.len() - 1;
    let vm = v.matrix().transpose();
    t = mode_product(&t, &shape, last, &vm);
    MultiOp::new(us.iter().map(|u| u.domain[0]).collect(), v.codomain, t)
}

/// Replaces axis `slot` (length `r`) by one of length `c`: `t'[…, j, …] = Σ_i t[…, i, …] w[i, j]`.
fn mode_product(t: &[f64], shape: &[usize], slot: usize, w: &DMatrix<f64>) -> Vec<f64> {
    let outer: usize = shape[..slot].iter().product();
    let inner: usize = shape[slot + 1..].iter().product();
    let (r, c) = w.shape();
    let mut out = vec![0.0; outer * c * inner];
    for a in 0..outer {
        for i in 0..r {
            for j in 0..c {
                let wij = w[(i, j)];
                if wij == 0.0 {
                    continue;
                }
                for z in 0..inner {
                    out[(a * c + j) * inner + z] += wij * t[(a * r + i) * inner + z];
                }
            }
        }
    }
    out
}

/// The coordinatewise product `(ℓ_{q_in}^k)^n → ℓ_1^k`.
pub fn diag_operator(n: usize, k: usize, q_in: Exponent) -> Result<MultiOp> {
    if n < 2 || k < 1 {
        return Err(invalid(format!("diagonal operator needs n ≥ 2 and k ≥ 1, got n = {n}, k = {k}")));
    }
    let space = Space::new(k, q_in)?;
    let size = k.pow(n as u32 + 1);
    let mut coeffs = vec![0.0; size];
    // index of (i, …, i): Σ_{m=0}^{n} i k^m
    let step: usize = (0..=n).map(|m| k.pow(m as u32)).sum();
    for i in 0..k {
        coeffs[i * step] = 1.0;
    }
    MultiOp::new(vec![space; n], Space::new(k, Exponent::ONE)?, coeffs)
}

/// `‖Σ_j A(x_j^1, …, x_j^n) − Avg_ε A(Σ_j ε_j^1 x_j^1, …, Σ_j (Π_l ε_j^l) x_j^n)‖`
/// with the average taken exactly over `({±1}^k)^{n−1}`.
pub fn decoupling_check(a: &MultiOp, seqs: &[VecSeq], cfg: &EstimatorConfig) -> Result<f64> {
    let direct = a.apply_sequences(seqs)?;
    let n = a.arity();
    let k = seqs[0].len();
    if n == 1 {
        return Ok(0.0);
    }
    let bits = k * (n - 1);
    if bits > cfg.sign_cutoff {
        return Err(Error::SignBudget { needed: bits, cutoff: cfg.sign_cutoff });
    }
    let dout = a.codomain.dim();
    let mut lhs = vec![0.0; dout];
    for y in direct.vectors() {
        for (s, v) in lhs.iter_mut().zip(y) {
            *s += v;
        }
    }
    let mut avg = vec![0.0; dout];
    let patterns: u64 = 1 << bits;
    let mut args: Vec<Vec<f64>> = a.domain.iter().map(|s| vec![0.0; s.dim()]).collect();
    for mask in 0..patterns {
        let sign = |l: usize, j: usize| if mask >> (l * k + j) & 1 == 1 { -1.0 } else { 1.0 };
        for (l, arg) in args.iter_mut().enumerate() {
            arg.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..k {
                let e = if l + 1 < n { sign(l, j) } else { (0..n - 1).map(|m| sign(m, j)).product() };
                for (v, x) in arg.iter_mut().zip(seqs[l].get(j)) {
                    *v += e * x;
                }
            }
        }
        let refs: Vec<&[f64]> = args.iter().map(|x| x.as_slice()).collect();
        for (s, v) in avg.iter_mut().zip(a.apply(&refs)) {
            *s += v;
        }
    }
    let diff: Vec<f64> = lhs.iter().zip(&avg).map(|(l, s)| l - s / patterns as f64).collect();
    Ok(a.codomain.norm(&diff))
}
