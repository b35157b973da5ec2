//! Rademacher norms `(E‖Σ_j ε_j x_j‖²)^{1/2}`.
//!
//! For a finite sequence the integral over the Rademacher functions is the
//! average over the `2^k` sign patterns, so the exact value is a finite sum.

use rand::Rng as _;

use super::{norm_strong_p, norm_sup, truncate, EstimatorConfig, NormBracket, VecSeq};
use crate::error::{invalid, Error, Result};
use crate::random::rng;
use crate::spaces::{lq_norm, Exponent};

/// Exact Rademacher norm. Zero vectors do not contribute, so the sign budget
/// counts only the nonzero ones.
pub fn norm_rad(s: &VecSeq, cfg: &EstimatorConfig) -> Result<f64> {
    let rows = s.nonzero_rows();
    if rows.len() > cfg.sign_cutoff {
        return Err(Error::SignBudget { needed: rows.len(), cutoff: cfg.sign_cutoff });
    }
    if rows.is_empty() {
        return Ok(0.0);
    }
    Ok(mean_square(&rows, s.space().exponent()).sqrt())
}

/// `max_m Rad(x_1, …, x_m)`, the finite-sequence `RAD` norm.
pub fn norm_rad_prefix_sup(s: &VecSeq, cfg: &EstimatorConfig) -> Result<f64> {
    let mut best = 0.0f64;
    for m in 1..=s.len() {
        best = best.max(norm_rad(&truncate(s, m)?, cfg)?);
    }
    Ok(best)
}

/// Monte-Carlo bracket: sample mean of `‖Σ ε_j x_j‖²` plus or minus three
/// standard errors, square-rooted and clipped to the deterministic range
/// `[max_j ‖x_j‖, Σ_j ‖x_j‖]`.
pub fn norm_rad_mc(s: &VecSeq, samples: usize, seed: u64) -> Result<NormBracket> {
    if samples == 0 {
        return Err(invalid("Monte-Carlo estimate needs at least one sample"));
    }
    let rows = s.nonzero_rows();
    if rows.is_empty() {
        return Ok(NormBracket::exact(0.0, "rad-monte-carlo"));
    }
    let q = s.space().exponent();
    let d = s.space().dim();
    let mut rng = rng(seed);
    let mut sum = vec![0.0; d];
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for n in 1..=samples {
        sum.iter_mut().for_each(|v| *v = 0.0);
        for x in &rows {
            let e = if rng.random::<bool>() { 1.0 } else { -1.0 };
            for (a, b) in sum.iter_mut().zip(x.iter()) {
                *a += e * b;
            }
        }
        let v = lq_norm(&sum, q).powi(2);
        // Welford update
        let delta = v - mean;
        mean += delta / n as f64;
        m2 += delta * (v - mean);
    }
    let floor = norm_sup(s);
    let ceiling = norm_strong_p(s, 1.0)?;
    let (lo, hi) = if samples > 1 {
        let se = (m2 / (samples - 1) as f64 / samples as f64).sqrt();
        ((mean - 3.0 * se).max(0.0).sqrt(), (mean + 3.0 * se).sqrt())
    } else {
        (floor, ceiling)
    };
    Ok(NormBracket::estimated(lo.clamp(floor, ceiling), hi.clamp(floor, ceiling), "rad-monte-carlo", seed))
}

/// `2^{-(k-1)} Σ_{ε, ε_1 = +1} ‖Σ_j ε_j x_j‖²` by Gray-code enumeration,
/// with compensated summation and a periodic recomputation of the running sum.
pub(crate) fn mean_square(rows: &[&[f64]], q: Exponent) -> f64 {
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
    let mut acc = Neumaier::default();
    acc.add(lq_norm(&sum, q).powi(2));
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
        acc.add(lq_norm(&sum, q).powi(2));
    }
    acc.total() / patterns as f64
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::Space;

    fn seq(q: f64, rows: Vec<Vec<f64>>) -> VecSeq {
        let d = rows[0].len();
        VecSeq::new(Space::lq(q, d).unwrap(), rows).unwrap()
    }

    /// Independent oracle: loop over all 2^k patterns as bit masks.
    fn brute(s: &VecSeq) -> f64 {
        let k = s.len();
        let mut total = 0.0;
        for mask in 0..(1u32 << k) {
            let mut sum = vec![0.0; s.space().dim()];
            for j in 0..k {
                let e = if mask >> j & 1 == 1 { -1.0 } else { 1.0 };
                for (a, b) in sum.iter_mut().zip(s.get(j)) {
                    *a += e * b;
                }
            }
            total += s.space().norm(&sum).powi(2);
        }
        (total / (1u64 << k) as f64).sqrt()
    }

    #[test]
    fn scalars_one_one() {
        let cfg = EstimatorConfig::default();
        let v = norm_rad(&VecSeq::scalars(&[1.0, 1.0]), &cfg).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sup_norm_example() {
        let cfg = EstimatorConfig::default();
        let s = seq(f64::INFINITY, vec![vec![1.0, 1.0], vec![1.0, -1.0]]);
        assert_eq!(norm_rad(&s, &cfg).unwrap(), 2.0);
    }

    #[test]
    fn matches_brute_force_in_several_spaces() {
        let cfg = EstimatorConfig::default();
        let rows = vec![vec![1.0, -0.5, 2.0], vec![0.3, 0.0, -1.0], vec![2.0, 1.0, 0.25], vec![-1.0, 1.0, 1.0]];
        for q in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let s = seq(q, rows.clone());
            assert!((norm_rad(&s, &cfg).unwrap() - brute(&s)).abs() < 1e-13, "q={q}");
        }
    }

    #[test]
    fn prefix_sup_equals_full_norm() {
        let cfg = EstimatorConfig::default();
        let s = seq(1.0, vec![vec![1.0, -2.0], vec![0.5, 0.5], vec![-3.0, 1.0]]);
        assert_eq!(norm_rad_prefix_sup(&s, &cfg).unwrap(), norm_rad(&s, &cfg).unwrap());
        let x = seq(3.0, vec![vec![1.0, 2.0]]);
        assert!((norm_rad_prefix_sup(&x, &cfg).unwrap() - x.space().norm(x.get(0))).abs() < 1e-15);
        assert_eq!(norm_rad_prefix_sup(&VecSeq::empty(x.space()), &cfg).unwrap(), 0.0);
    }

    #[test]
    fn budget_counts_nonzero_vectors() {
        let cfg = EstimatorConfig { sign_cutoff: 2, ..Default::default() };
        let s = seq(2.0, vec![vec![1.0], vec![0.0], vec![0.0], vec![2.0]]);
        assert!(norm_rad(&s, &cfg).is_ok());
        let s = seq(2.0, vec![vec![1.0], vec![1.0], vec![2.0]]);
        assert!(matches!(norm_rad(&s, &cfg), Err(Error::SignBudget { .. })));
    }

    #[test]
    fn monte_carlo_contains_exact_value() {
        let b = norm_rad_mc(&VecSeq::scalars(&[1.0, 1.0]), 100_000, 4).unwrap();
        assert!(b.contains(2f64.sqrt(), 0.0), "{b:?}");
        let z = norm_rad_mc(&VecSeq::scalars(&[0.0, 0.0]), 10, 4).unwrap();
        assert!(z.exact && z.upper == 0.0);
        assert!(norm_rad_mc(&VecSeq::scalars(&[1.0]), 0, 4).is_err());
        let one = norm_rad_mc(&VecSeq::scalars(&[1.0, 2.0]), 1, 4).unwrap();
        assert!(one.lower <= 5f64.sqrt() && 5f64.sqrt() <= one.upper);
    }
}
