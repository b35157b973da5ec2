//! Weak `ℓ_p` norms `sup_{φ ∈ B_{E'}} (Σ_j |φ(x_j)|^p)^{1/p}`.
//!
//! The objective is convex in `φ`, so the supremum sits on the boundary of
//! the dual ball and, when that ball is a polytope, at a vertex.

use nalgebra::DMatrix;

use super::{check_p, norm_strong_p, EstimatorConfig, NormBracket, VecSeq};
use crate::error::{Error, Result};
use crate::linalg;
use crate::random::{derive_seed, rng, unit_direction};
use crate::spaces::{dot, lq_norm, norming_coords, Exponent};

/// Result of the dual-sphere ascent.
#[derive(Clone, Debug)]
pub struct WeakAscent {
    pub value: f64,
    /// Unit functional of the dual space attaining `value`.
    pub functional: Vec<f64>,
}

/// A bracket together with a dual-ball point attaining its lower end.
pub(crate) struct WeakEval {
    pub bracket: NormBracket,
    pub functional: Option<Vec<f64>>,
}

pub fn norm_weak_p(s: &VecSeq, p: f64, cfg: &EstimatorConfig, seed: u64) -> Result<NormBracket> {
    Ok(weak_p_eval(s, p, cfg, seed)?.bracket)
}

pub(crate) fn weak_p_eval(s: &VecSeq, p: f64, cfg: &EstimatorConfig, seed: u64) -> Result<WeakEval> {
    let p_exp = check_p(p)?;
    let q = s.space().exponent();
    let r = q.conjugate();
    let rows = s.nonzero_rows();
    if rows.is_empty() {
        return Ok(WeakEval { bracket: NormBracket::exact(0.0, "weak-zero"), functional: None });
    }
    let exact = |value: f64, method: &str, phi: Vec<f64>| {
        Ok(WeakEval { bracket: NormBracket::exact(value, method), functional: Some(phi) })
    };

    if let Some((value, phi)) = collinear(&rows, q, p_exp) {
        return exact(value, "weak-collinear", phi);
    }
    if let Some((value, phi)) = disjoint_supports(&rows, q, p) {
        return exact(value, "weak-disjoint", phi);
    }
    if p == 1.0 && rows.len() <= cfg.sign_cutoff {
        let (value, sum, _) = max_signed_sum(&rows, q);
        let phi = norming_coords(&sum, q).expect("nonzero maximum");
        return exact(value, "weak1-sign-oracle", phi);
    }
    match r {
        Exponent::Finite(f) if f.get() == 1.0 => {
            let (value, phi) = l1_ball_vertices(&rows, p_exp);
            return exact(value, "weak-dual-vertices", phi);
        }
        Exponent::Infinity if s.space().dim() <= cfg.sign_cutoff => {
            let (value, phi) = cube_vertices(&rows, p_exp);
            return exact(value, "weak-dual-vertices", phi);
        }
        _ => {}
    }
    if p == 2.0 && q.is_two() {
        let (value, phi) = spectral(&rows);
        return exact(value, "weak2-spectral", phi);
    }

    let ascent = ascent(&rows, q, p_exp, cfg, seed);
    let strong = norm_strong_p(s, p)?;
    let upper = (ascent.value * (1.0 + cfg.ascent_slack)).min(strong);
    Ok(WeakEval {
        bracket: NormBracket::estimated(ascent.value, upper, "weak-dual-ascent", seed),
        functional: Some(ascent.functional),
    })
}

/// Exact weak-1 norm `max_{ε ∈ {±1}^k} ‖Σ_j ε_j x_j‖`.
pub fn weak_p_sign_oracle(s: &VecSeq, cfg: &EstimatorConfig) -> Result<f64> {
    let rows = s.nonzero_rows();
    if rows.len() > cfg.sign_cutoff {
        return Err(Error::SignBudget { needed: rows.len(), cutoff: cfg.sign_cutoff });
    }
    if rows.is_empty() {
        return Ok(0.0);
    }
    Ok(max_signed_sum(&rows, s.space().exponent()).0)
}

/// Multi-start ascent on the dual sphere, without any exact shortcut.
pub fn weak_p_ascent(s: &VecSeq, p: f64, cfg: &EstimatorConfig, seed: u64) -> Result<WeakAscent> {
    let p_exp = check_p(p)?;
    let rows = s.nonzero_rows();
    let q = s.space().exponent();
    if rows.is_empty() {
        let mut functional = vec![0.0; s.space().dim()];
        functional[0] = 1.0;
        return Ok(WeakAscent { value: 0.0, functional });
    }
    Ok(ascent(&rows, q, p_exp, cfg, seed))
}

fn objective(rows: &[&[f64]], phi: &[f64], p: Exponent) -> f64 {
    let t: Vec<f64> = rows.iter().map(|x| dot(x, phi)).collect();
    lq_norm(&t, p)
}

fn ascent(rows: &[&[f64]], q: Exponent, p: Exponent, cfg: &EstimatorConfig, seed: u64) -> WeakAscent {
    let d = rows[0].len();
    let r = q.conjugate();
    let mut starts: Vec<Vec<f64>> = rows.iter().filter_map(|x| norming_coords(x, q)).collect();
    let mut rng = rng(derive_seed(seed, 0x3EA4));
    for _ in 0..cfg.restarts {
        starts.push(unit_direction(&mut rng, d, r));
    }
    let mut best = WeakAscent { value: -1.0, functional: Vec::new() };
    for start in starts {
        let (value, phi) = local_ascent(rows, q, p, start, cfg);
        if value > best.value {
            best = WeakAscent { value, functional: phi };
        }
    }
    best
}

/// Gradient ascent on the sphere of `ℓ_{q*}` with step halving. The first
/// trial of every iteration is the full linearization step, which for a
/// convex objective never decreases the value.
pub(crate) fn local_ascent(
    rows: &[&[f64]],
    q: Exponent,
    p: Exponent,
    start: Vec<f64>,
    cfg: &EstimatorConfig,
) -> (f64, Vec<f64>) {
    let r = q.conjugate();
    let pv = p.value();
    let mut phi = start;
    let mut value = objective(rows, &phi, p);
    for _ in 0..cfg.max_ascent_iters {
        let t: Vec<f64> = rows.iter().map(|x| dot(x, &phi)).collect();
        let mut grad = vec![0.0; phi.len()];
        for (x, &tj) in rows.iter().zip(&t) {
            let w = if pv == 1.0 { tj.signum() } else { tj.signum() * tj.abs().powf(pv - 1.0) };
            if w != 0.0 {
                for (g, xi) in grad.iter_mut().zip(x.iter()) {
                    *g += w * xi;
                }
            }
        }
        let Some(power) = norming_coords(&grad, q) else { break };
        let power_value = objective(rows, &power, p);
        if power_value > value {
            let step = rel_step(&phi, &power);
            phi = power;
            value = power_value;
            if step < cfg.step_tol {
                break;
            }
            continue;
        }
        let scale = l2(&phi) / l2(&grad);
        let mut eta = 1.0;
        let mut moved = false;
        while eta >= cfg.step_tol {
            let trial: Vec<f64> = phi.iter().zip(&grad).map(|(a, g)| a + eta * scale * g).collect();
            let n = lq_norm(&trial, r);
            if n > 0.0 {
                let trial: Vec<f64> = trial.into_iter().map(|v| v / n).collect();
                let tv = objective(rows, &trial, p);
                if tv > value {
                    phi = trial;
                    value = tv;
                    moved = true;
                    break;
                }
            }
            eta *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (value, phi)
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn rel_step(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    diff / l2(a).max(f64::MIN_POSITIVE)
}

/// All rows multiples of one vector `v`: the norm is `‖(c_j)‖_p ‖v‖`.
fn collinear(rows: &[&[f64]], q: Exponent, p: Exponent) -> Option<(f64, Vec<f64>)> {
    let v = rows[0];
    let vv = dot(v, v);
    let mut coeffs = Vec::with_capacity(rows.len());
    for x in rows {
        let c = dot(x, v) / vv;
        let scale = x.iter().fold(0.0, |m: f64, a| m.max(a.abs()));
        if x.iter().zip(v).any(|(a, b)| (a - c * b).abs() > 1e-14 * scale) {
            return None;
        }
        coeffs.push(c);
    }
    Some((lq_norm(&coeffs, p) * lq_norm(v, q), norming_coords(v, q)?))
}

/// Pairwise disjoint supports. With `c_j = ‖x_j‖` and `r = q*`, the norm is
/// `max_j c_j` when `p ≥ r`, and `‖c‖_s` with `1/s = 1/p − 1/r` otherwise.
fn disjoint_supports(rows: &[&[f64]], q: Exponent, p: f64) -> Option<(f64, Vec<f64>)> {
    let d = rows[0].len();
    for i in 0..d {
        if rows.iter().filter(|x| x[i] != 0.0).count() > 1 {
            return None;
        }
    }
    let c: Vec<f64> = rows.iter().map(|x| lq_norm(x, q)).collect();
    let r = q.conjugate().value();
    let mut phi = vec![0.0; d];
    if p >= r {
        let (j, &value) = c.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
        phi = norming_coords(rows[j], q)?;
        return Some((value, phi));
    }
    let s = if r.is_infinite() { p } else { p * r / (r - p) };
    let value = lq_norm(&c, Exponent::finite(s).ok()?);
    for (x, &cj) in rows.iter().zip(&c) {
        let weight = if r.is_infinite() { 1.0 } else { (cj / value).powf(s / r) };
        let n = norming_coords(x, q)?;
        for (a, b) in phi.iter_mut().zip(n) {
            *a += weight * b;
        }
    }
    Some((value, phi))
}

/// `max_ε ‖Σ_j ε_j x_j‖` by Gray-code enumeration with `ε_1 = +1`; returns
/// the value, the maximizing sum and its signs.
pub(crate) fn max_signed_sum(rows: &[&[f64]], q: Exponent) -> (f64, Vec<f64>, Vec<f64>) {
    let k = rows.len();
    let d = rows[0].len();
    let mut eps = vec![1.0f64; k];
    let recompute = |eps: &[f64]| {
        let mut sum = vec![0.0; d];
        for (x, e) in rows.iter().zip(eps) {
            for (s, xi) in sum.iter_mut().zip(x.iter()) {
                *s += e * xi;
            }
        }
        sum
    };
    let mut sum = recompute(&eps);
    let mut best = lq_norm(&sum, q);
    let mut best_sum = sum.clone();
    let mut best_eps = eps.clone();
    let patterns: u64 = 1 << (k - 1);
    for i in 1..patterns {
        let j = i.trailing_zeros() as usize + 1;
        eps[j] = -eps[j];
        if i % 256 == 0 {
            sum = recompute(&eps);
        } else {
            for (s, xi) in sum.iter_mut().zip(rows[j].iter()) {
                *s += 2.0 * eps[j] * xi;
            }
        }
        let n = lq_norm(&sum, q);
        if n > best {
            best = n;
            best_sum.copy_from_slice(&sum);
            best_eps.copy_from_slice(&eps);
        }
    }
    (best, best_sum, best_eps)
}

/// Dual ball `B_{ℓ_1}`: vertices `±e_i`.
fn l1_ball_vertices(rows: &[&[f64]], p: Exponent) -> (f64, Vec<f64>) {
    let d = rows[0].len();
    let mut best = (-1.0, 0);
    for i in 0..d {
        let col: Vec<f64> = rows.iter().map(|x| x[i]).collect();
        let v = lq_norm(&col, p);
        if v > best.0 {
            best = (v, i);
        }
    }
    let mut phi = vec![0.0; d];
    phi[best.1] = 1.0;
    (best.0, phi)
}

/// Dual ball `B_{ℓ_∞}`: vertices `σ ∈ {±1}^d`, enumerated with `σ_1 = +1`.
fn cube_vertices(rows: &[&[f64]], p: Exponent) -> (f64, Vec<f64>) {
    let d = rows[0].len();
    let mut sigma = vec![1.0f64; d];
    let full = |sigma: &[f64]| rows.iter().map(|x| dot(x, sigma)).collect::<Vec<f64>>();
    let mut t = full(&sigma);
    let mut best = lq_norm(&t, p);
    let mut best_sigma = sigma.clone();
    let patterns: u64 = 1 << (d - 1);
    for i in 1..patterns {
        let c = i.trailing_zeros() as usize + 1;
        sigma[c] = -sigma[c];
        if i % 256 == 0 {
            t = full(&sigma);
        } else {
            for (tj, x) in t.iter_mut().zip(rows) {
                *tj += 2.0 * sigma[c] * x[c];
            }
        }
        let v = lq_norm(&t, p);
        if v > best {
            best = v;
            best_sigma.copy_from_slice(&sigma);
        }
    }
    (best, best_sigma)
}

/// Weak-2 norm in a Hilbert space: the largest singular value of the rows.
fn spectral(rows: &[&[f64]]) -> (f64, Vec<f64>) {
    let d = rows[0].len();
    let owned: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    let x: DMatrix<f64> = linalg::from_rows(&owned, d);
    let (sigma, v) = linalg::top_right_singular(&x);
    let n = l2(&v);
    (sigma, v.into_iter().map(|a| a / n).collect())
}
