//! Finite-dimensional real `ℓ_q^d` spaces, their duals and norming functionals.
//!
//! Every other module computes over these spaces. The exponent `∞` is its own
//! value rather than a large float, and a finite exponent carries its conjugate
//! so that `dual(dual(S)) == S` holds bit for bit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A finite exponent `p ∈ [1, ∞)` together with its conjugate.
#[derive(Clone, Copy, Debug)]
pub struct FiniteExponent {
    p: f64,
    // f64::INFINITY when p == 1; never escapes as an exponent value.
    conj: f64,
}

impl FiniteExponent {
    pub fn get(&self) -> f64 {
        self.p
    }
}

/// Exponent of an `ℓ_q` norm.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(try_from = "ExponentRepr", into = "ExponentRepr")]
pub enum Exponent {
    Finite(FiniteExponent),
    Infinity,
}

impl Exponent {
    pub const ONE: Exponent = Exponent::Finite(FiniteExponent { p: 1.0, conj: f64::INFINITY });
    pub const TWO: Exponent = Exponent::Finite(FiniteExponent { p: 2.0, conj: 2.0 });
    pub const INFINITY: Exponent = Exponent::Infinity;

    pub fn finite(p: f64) -> Result<Exponent> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidExponent(p));
        }
        let conj = if p == 1.0 {
            f64::INFINITY
        } else if p == 2.0 {
            2.0
        } else {
            p / (p - 1.0)
        };
        Ok(Exponent::Finite(FiniteExponent { p, conj }))
    }

    /// Accepts `f64::INFINITY` as the infinite exponent.
    pub fn new(p: f64) -> Result<Exponent> {
        if p == f64::INFINITY {
            Ok(Exponent::Infinity)
        } else {
            Exponent::finite(p)
        }
    }

    /// The exponent `q*` with `1/q + 1/q* = 1`.
    pub fn conjugate(self) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::ONE,
            Exponent::Finite(f) if f.conj == f64::INFINITY => Exponent::Infinity,
            Exponent::Finite(f) => Exponent::Finite(FiniteExponent { p: f.conj, conj: f.p }),
        }
    }

    /// Numeric value, `f64::INFINITY` for the infinite exponent.
    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(f) => f.p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    pub fn is_one(self) -> bool {
        matches!(self, Exponent::Finite(f) if f.p == 1.0)
    }

    pub fn is_two(self) -> bool {
        matches!(self, Exponent::Finite(f) if f.p == 2.0)
    }
}

impl PartialEq for Exponent {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Exponent::Infinity, Exponent::Infinity) => true,
            (Exponent::Finite(a), Exponent::Finite(b)) => a.p == b.p,
            _ => false,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Infinity => write!(f, "inf"),
            Exponent::Finite(e) => write!(f, "{}", e.p),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    /// Accepts `inf`, `∞`, a decimal number or a fraction such as `4/3`.
    fn from_str(s: &str) -> Result<Exponent> {
        let s = s.trim();
        if matches!(s, "inf" | "Inf" | "INF" | "infinity" | "∞") {
            return Ok(Exponent::Infinity);
        }
        let value = match s.split_once('/') {
            Some((num, den)) => {
                let num: f64 = num.trim().parse().map_err(|_| Error::Parse(format!("bad exponent `{s}`")))?;
                let den: f64 = den.trim().parse().map_err(|_| Error::Parse(format!("bad exponent `{s}`")))?;
                num / den
            }
            None => s.parse().map_err(|_| Error::Parse(format!("bad exponent `{s}`")))?,
        };
        Exponent::new(value)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ExponentRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<ExponentRepr> for Exponent {
    type Error = Error;

    fn try_from(repr: ExponentRepr) -> Result<Exponent> {
        match repr {
            ExponentRepr::Number(p) => Exponent::new(p),
            ExponentRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Exponent> for ExponentRepr {
    fn from(e: Exponent) -> Self {
        match e {
            Exponent::Infinity => ExponentRepr::Text("inf".into()),
            Exponent::Finite(f) => ExponentRepr::Number(f.p),
        }
    }
}

/// `q ↦ q*`, the conjugate exponent.
pub fn conjugate_exponent(q: Exponent) -> Exponent {
    q.conjugate()
}

/// `ℓ_q` norm of a coordinate slice.
pub fn lq_norm(x: &[f64], q: Exponent) -> f64 {
    match q {
        Exponent::Infinity => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        Exponent::Finite(f) if f.p == 1.0 => x.iter().map(|v| v.abs()).sum(),
        Exponent::Finite(f) if f.p == 2.0 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        Exponent::Finite(f) => {
            let peak = x.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            if peak == 0.0 {
                return 0.0;
            }
            let sum: f64 = x.iter().map(|v| (v.abs() / peak).powf(f.p)).sum();
            peak * sum.powf(1.0 / f.p)
        }
    }
}

/// Unit vector of `ℓ_{q*}` attaining `⟨φ, x⟩ = ‖x‖_q`; `None` for `x = 0`.
///
/// Ties in the `q = ∞` peak go to the lowest index; zero coordinates get a
/// zero weight when `q = 1`.
pub fn norming_coords(x: &[f64], q: Exponent) -> Option<Vec<f64>> {
    let norm = lq_norm(x, q);
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    let phi = match q {
        Exponent::Infinity => {
            let mut peak = 0;
            for (i, v) in x.iter().enumerate() {
                if v.abs() > x[peak].abs() {
                    peak = i;
                }
            }
            let mut phi = vec![0.0; x.len()];
            phi[peak] = x[peak].signum();
            phi
        }
        Exponent::Finite(f) if f.p == 1.0 => x.iter().map(|&v| if v == 0.0 { 0.0 } else { v.signum() }).collect(),
        Exponent::Finite(f) if f.p == 2.0 => x.iter().map(|v| v / norm).collect(),
        Exponent::Finite(f) => {
            x.iter().map(|&v| if v == 0.0 { 0.0 } else { v.signum() * (v.abs() / norm).powf(f.p - 1.0) }).collect()
        }
    };
    Some(phi)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The real space `ℓ_q^d`. Serialized as its `l<q>:<dim>` label.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Space {
    dim: usize,
    q: Exponent,
}

impl Space {
    pub fn new(dim: usize, q: Exponent) -> Result<Space> {
        if dim == 0 {
            return Err(invalid("space dimension must be at least 1"));
        }
        Ok(Space { dim, q })
    }

    /// `ℓ_q^dim`; `q = f64::INFINITY` gives `ℓ_∞`.
    pub fn lq(q: f64, dim: usize) -> Result<Space> {
        Space::new(dim, Exponent::new(q)?)
    }

    /// The scalar field as a one-dimensional space.
    pub fn scalars() -> Space {
        Space { dim: 1, q: Exponent::TWO }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn exponent(&self) -> Exponent {
        self.q
    }

    pub fn dual(&self) -> Space {
        Space { dim: self.dim, q: self.q.conjugate() }
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        lq_norm(x, self.q)
    }

    pub fn zeros(&self) -> Vector {
        Vector { space: *self, coords: vec![0.0; self.dim] }
    }

    pub fn basis(&self, i: usize) -> Vector {
        let mut v = self.zeros();
        v.coords[i] = 1.0;
        v
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}:{}", self.q, self.dim)
    }
}

impl FromStr for Space {
    type Err = Error;

    /// Parses `l<q>:<dim>`, e.g. `l2:3`, `linf:2`, `l4/3:5`.
    fn from_str(s: &str) -> Result<Space> {
        let body =
            s.trim().strip_prefix('l').ok_or_else(|| Error::Parse(format!("space `{s}` must look like l<q>:<dim>")))?;
        let (q, dim) =
            body.split_once(':').ok_or_else(|| Error::Parse(format!("space `{s}` must look like l<q>:<dim>")))?;
        let dim: usize = dim.trim().parse().map_err(|_| Error::Parse(format!("bad dimension in `{s}`")))?;
        Space::new(dim, q.parse()?)
    }
}

impl TryFrom<String> for Space {
    type Error = Error;

    fn try_from(s: String) -> Result<Space> {
        s.parse()
    }
}

impl From<Space> for String {
    fn from(space: Space) -> String {
        space.to_string()
    }
}

/// A point of a [`Space`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vector {
    space: Space,
    coords: Vec<f64>,
}

impl Vector {
    pub fn new(space: Space, coords: Vec<f64>) -> Result<Vector> {
        if coords.len() != space.dim {
            return Err(Error::DimensionMismatch { expected: space.dim, got: coords.len() });
        }
        Ok(Vector { space, coords })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn norm(&self) -> f64 {
        vector_norm(self)
    }
}

pub fn vector_norm(v: &Vector) -> f64 {
    lq_norm(&v.coords, v.space.q)
}

/// The dual pairing `φ(x) = Σ φ_i x_i`.
pub fn pairing(phi: &Vector, x: &Vector) -> Result<f64> {
    if phi.coords.len() != x.coords.len() {
        return Err(Error::DimensionMismatch { expected: x.coords.len(), got: phi.coords.len() });
    }
    Ok(dot(&phi.coords, &x.coords))
}

/// A norm-one functional on `x.space()` attaining `φ(x) = ‖x‖`.
pub fn norming_functional(x: &Vector) -> Result<Vector> {
    let coords =
        norming_coords(&x.coords, x.space.q).ok_or_else(|| invalid("the zero vector has no norming functional"))?;
    Ok(Vector { space: x.space.dual(), coords })
}
