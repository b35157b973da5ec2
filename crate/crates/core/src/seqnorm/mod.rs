//! Sequence-class norms of finite vector sequences.
//!
//! Five engines are implemented: sup, strong `ℓ_p`, weak `ℓ_p^w`, Rademacher
//! and Cohen `ℓ_p⟨·⟩`. On finite sequences `c_0` agrees with `ℓ_∞`, `ℓ_p^u`
//! with `ℓ_p^w`, and the prefix-sup `RAD` norm with `Rad`, so those classes
//! need no engine of their own.
//!
//! Norms defined by a supremum that cannot be enumerated are returned as a
//! [`NormBracket`]; the lower end is always attained by an explicit feasible
//! point.

mod cohen;
mod rad;
mod weak;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spaces::{lq_norm, Exponent, Space, Vector};

pub use cohen::norm_cohen;
pub use rad::{norm_rad, norm_rad_mc, norm_rad_prefix_sup};
pub use weak::{norm_weak_p, weak_p_ascent, weak_p_sign_oracle, WeakAscent};

pub(crate) use weak::{max_signed_sum, weak_p_eval};

/// A finite sequence `(x_j)_{j=1}^k` of vectors in one space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VecSeq {
    space: Space,
    vectors: Vec<Vec<f64>>,
}

impl VecSeq {
    pub fn new(space: Space, vectors: Vec<Vec<f64>>) -> Result<VecSeq> {
        for v in &vectors {
            if v.len() != space.dim() {
                return Err(Error::DimensionMismatch { expected: space.dim(), got: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(invalid("sequence entries must be finite"));
            }
        }
        Ok(VecSeq { space, vectors })
    }

    pub fn empty(space: Space) -> VecSeq {
        VecSeq { space, vectors: Vec::new() }
    }

    pub fn from_vectors(space: Space, vectors: &[Vector]) -> Result<VecSeq> {
        if let Some(v) = vectors.iter().find(|v| v.space() != space) {
            return Err(invalid(format!("vector in {} does not belong to {}", v.space(), space)));
        }
        VecSeq::new(space, vectors.iter().map(|v| v.coords().to_vec()).collect())
    }

    /// Scalar sequence `(λ_j)` in the one-dimensional space.
    pub fn scalars(values: &[f64]) -> VecSeq {
        VecSeq { space: Space::scalars(), vectors: values.iter().map(|&v| vec![v]).collect() }
    }

    /// `x` at position `pos` (0-based) of an otherwise zero sequence of length `len`.
    pub fn unit_sequence(x: &Vector, pos: usize, len: usize) -> Result<VecSeq> {
        if pos >= len {
            return Err(invalid(format!("position {pos} outside a sequence of length {len}")));
        }
        let mut vectors = vec![vec![0.0; x.space().dim()]; len];
        vectors[pos] = x.coords().to_vec();
        Ok(VecSeq { space: x.space(), vectors })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn get(&self, j: usize) -> &[f64] {
        &self.vectors[j]
    }

    pub fn vector(&self, j: usize) -> Vector {
        Vector::new(self.space, self.vectors[j].clone()).expect("validated on construction")
    }

    pub fn push(&mut self, v: Vec<f64>) -> Result<()> {
        if v.len() != self.space.dim() {
            return Err(Error::DimensionMismatch { expected: self.space.dim(), got: v.len() });
        }
        self.vectors.push(v);
        Ok(())
    }

    /// Same vectors regarded in another space of the same dimension.
    pub fn in_space(&self, space: Space) -> Result<VecSeq> {
        VecSeq::new(space, self.vectors.clone())
    }

    pub fn scaled(&self, alpha: f64) -> VecSeq {
        VecSeq {
            space: self.space,
            vectors: self.vectors.iter().map(|v| v.iter().map(|x| alpha * x).collect()).collect(),
        }
    }

    /// Coordinatewise sum of two sequences of equal length.
    pub fn add(&self, other: &VecSeq) -> Result<VecSeq> {
        if self.space != other.space || self.len() != other.len() {
            return Err(invalid("sequences differ in space or length"));
        }
        let vectors = self
            .vectors
            .iter()
            .zip(&other.vectors)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Ok(VecSeq { space: self.space, vectors })
    }

    /// Appends zero vectors up to length `len`.
    pub fn padded(&self, len: usize) -> VecSeq {
        let mut out = self.clone();
        while out.vectors.len() < len {
            out.vectors.push(vec![0.0; self.space.dim()]);
        }
        out
    }

    pub fn norms(&self) -> Vec<f64> {
        self.vectors.iter().map(|v| lq_norm(v, self.space.exponent())).collect()
    }

    pub(crate) fn nonzero_rows(&self) -> Vec<&[f64]> {
        self.vectors.iter().filter(|v| v.iter().any(|&x| x != 0.0)).map(|v| v.as_slice()).collect()
    }
}

/// The prefix `(x_1, …, x_m)`.
pub fn truncate(s: &VecSeq, m: usize) -> Result<VecSeq> {
    if m > s.len() {
        return Err(invalid(format!("cannot truncate a sequence of length {} to {m}", s.len())));
    }
    Ok(VecSeq { space: s.space, vectors: s.vectors[..m].to_vec() })
}

/// Identifies one of the implemented sequence-class norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SeqClassSpec {
    /// `ℓ_∞(E)`; also `c_0(E)` and `c_0^w(E)` on finite data.
    Sup,
    StrongP(f64),
    /// `ℓ_p^w(E)`; also `ℓ_p^u(E)` on finite data.
    WeakP(f64),
    /// `Rad(E)`; also `RAD(E)` on finite data.
    Rad,
    CohenP(f64),
}

impl SeqClassSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SeqClassSpec::StrongP(p) | SeqClassSpec::WeakP(p) | SeqClassSpec::CohenP(p) => check_p(p).map(|_| ()),
            SeqClassSpec::Sup | SeqClassSpec::Rad => Ok(()),
        }
    }

    pub fn parameter(&self) -> Option<f64> {
        match *self {
            SeqClassSpec::StrongP(p) | SeqClassSpec::WeakP(p) | SeqClassSpec::CohenP(p) => Some(p),
            SeqClassSpec::Sup | SeqClassSpec::Rad => None,
        }
    }

    /// True when norms of this class are computed in closed form or by
    /// exhaustive enumeration for every input.
    pub fn always_exact(&self) -> bool {
        matches!(self, SeqClassSpec::Sup | SeqClassSpec::StrongP(_) | SeqClassSpec::Rad)
    }
}

impl fmt::Display for SeqClassSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeqClassSpec::Sup => write!(f, "sup"),
            SeqClassSpec::StrongP(p) => write!(f, "strong:{p}"),
            SeqClassSpec::WeakP(p) => write!(f, "weak:{p}"),
            SeqClassSpec::Rad => write!(f, "rad"),
            SeqClassSpec::CohenP(p) => write!(f, "cohen:{p}"),
        }
    }
}

impl FromStr for SeqClassSpec {
    type Err = Error;

    /// `sup`, `rad`, `strong:<p>`, `weak:<p>`, `cohen:<p>`; `p` may be a fraction.
    fn from_str(s: &str) -> Result<SeqClassSpec> {
        let s = s.trim();
        let (tag, p) = match s.split_once(':') {
            Some((tag, p)) => {
                let p = match p.parse::<Exponent>()? {
                    Exponent::Finite(f) => f.get(),
                    Exponent::Infinity => return Err(Error::Parse(format!("`{s}`: class parameter must be finite"))),
                };
                (tag, Some(p))
            }
            None => (s, None),
        };
        let spec = match (tag, p) {
            ("sup" | "linf" | "c0", None) => SeqClassSpec::Sup,
            ("rad", None) => SeqClassSpec::Rad,
            ("strong", Some(p)) => SeqClassSpec::StrongP(p),
            ("weak", Some(p)) => SeqClassSpec::WeakP(p),
            ("cohen", Some(p)) => SeqClassSpec::CohenP(p),
            _ => return Err(Error::Parse(format!("unknown sequence class `{s}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl TryFrom<String> for SeqClassSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<SeqClassSpec> {
        s.parse()
    }
}

impl From<SeqClassSpec> for String {
    fn from(spec: SeqClassSpec) -> String {
        spec.to_string()
    }
}

/// An enclosure `[lower, upper]` of a norm value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBracket {
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
    pub method: String,
    pub seed: u64,
}

impl NormBracket {
    pub fn exact(value: f64, method: impl Into<String>) -> NormBracket {
        NormBracket { lower: value, upper: value, exact: true, method: method.into(), seed: 0 }
    }

    pub fn estimated(lower: f64, upper: f64, method: impl Into<String>, seed: u64) -> NormBracket {
        let lower = lower.max(0.0);
        NormBracket { lower, upper: upper.max(lower), exact: false, method: method.into(), seed }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Width relative to the upper end; 0 for the zero bracket.
    pub fn relative_width(&self) -> f64 {
        if self.upper == 0.0 {
            0.0
        } else {
            self.width() / self.upper
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, value: f64, tol: f64) -> bool {
        self.lower - tol <= value && value <= self.upper + tol
    }
}

/// Tuning knobs shared by the estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// Largest number of signs (or sign-vector coordinates) enumerated exhaustively.
    pub sign_cutoff: usize,
    /// Random restarts of the dual-sphere ascent.
    pub restarts: usize,
    /// Relative slack put on heuristic upper ends.
    pub ascent_slack: f64,
    /// Relative step size below which an ascent stops.
    pub step_tol: f64,
    pub max_ascent_iters: usize,
    /// Column-generation rounds of the Cohen decomposition search.
    pub cohen_rounds: usize,
    /// Relative gap at which the Cohen search stops early.
    pub cohen_gap: f64,
    /// Restarts of the alternating operator-norm maximization.
    pub op_restarts: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            sign_cutoff: 20,
            restarts: 32,
            ascent_slack: 1e-3,
            step_tol: 1e-10,
            max_ascent_iters: 500,
            cohen_rounds: 50,
            cohen_gap: 1e-2,
            op_restarts: 16,
        }
    }
}

impl EstimatorConfig {
    /// A cheaper configuration for inner loops of searches; results are
    /// re-certified with the full configuration afterwards.
    pub fn search(&self) -> EstimatorConfig {
        EstimatorConfig {
            restarts: self.restarts.min(6),
            cohen_rounds: self.cohen_rounds.min(6),
            op_restarts: self.op_restarts.min(6),
            ..self.clone()
        }
    }
}

pub(crate) fn check_p(p: f64) -> Result<Exponent> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidExponent(p));
    }
    Exponent::finite(p)
}

/// `max_j ‖x_j‖`; 0 for the empty sequence.
pub fn norm_sup(s: &VecSeq) -> f64 {
    s.norms().into_iter().fold(0.0, f64::max)
}

/// `(Σ_j ‖x_j‖^p)^{1/p}`.
pub fn norm_strong_p(s: &VecSeq, p: f64) -> Result<f64> {
    let p = check_p(p)?;
    Ok(lq_norm(&s.norms(), p))
}

/// Dispatches to the engine for `spec`. Closed-form norms come back as exact
/// brackets.
pub fn class_norm(s: &VecSeq, spec: SeqClassSpec, cfg: &EstimatorConfig, seed: u64) -> Result<NormBracket> {
    spec.validate()?;
    match spec {
        SeqClassSpec::Sup => Ok(NormBracket::exact(norm_sup(s), "sup")),
        SeqClassSpec::StrongP(p) => Ok(NormBracket::exact(norm_strong_p(s, p)?, "strong")),
        SeqClassSpec::WeakP(p) => norm_weak_p(s, p, cfg, seed),
        SeqClassSpec::Rad => Ok(NormBracket::exact(norm_rad(s, cfg)?, "rad-exact")),
        SeqClassSpec::CohenP(p) => norm_cohen(s, p, cfg, seed),
    }
}
