//! Finite-dimensional sequence-class norms and the ideal norms of
//! multilinear operators they induce.

// `!(x >= 1.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod idealnorm;
pub mod multiop;
pub mod random;
pub mod seqnorm;
pub mod spaces;
pub mod suite;

mod linalg;

pub use error::{Error, Result};
pub use idealnorm::{
    growth_experiment, ideal_norm, ideal_ratio, limit_stability_experiment, stability_report, IdealNormEstimate,
    IdealSpec,
};
pub use multiop::{compose, decoupling_check, diag_operator, finite_type, op_norm, MultiOp, OpNormEstimate};
pub use seqnorm::{class_norm, EstimatorConfig, NormBracket, SeqClassSpec, VecSeq};
pub use spaces::{Exponent, Space, Vector};
