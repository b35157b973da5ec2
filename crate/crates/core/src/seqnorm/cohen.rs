//! Cohen strongly `p`-summing norms `ℓ_p⟨E⟩`.
//!
//! The norm of `(x_j)` is the projective norm of `z = Σ_j e_j ⊗ x_j` in
//! `ℓ_p^k ⊗_π E`. Two certified ends are computed:
//!
//! * upper: the cost `Σ_t ‖a_t‖_p ‖u_t‖` of an explicit decomposition
//!   `z = Σ_t a_t ⊗ u_t`, starting from the trivial one `Σ_j ‖x_j‖`;
//! * lower: `Σ_j |φ_j(x_j)|` for a dual sequence `(φ_j)` divided by the upper
//!   end of its weak-`p*` bracket.
//!
//! Between the two, a column-generation loop alternates: solve for the best
//! decomposition over the current atoms `u_t`, read off the dual sequence,
//! then add the unit vector where the dual's weak-`p*` norm peaks.

use nalgebra::DMatrix;

use super::{check_p, norm_strong_p, weak_p_eval, EstimatorConfig, NormBracket, VecSeq};
use crate::error::Result;
use crate::linalg;
use crate::random::derive_seed;
use crate::spaces::{dot, lq_norm, norming_coords, Exponent, Space};

pub fn norm_cohen(s: &VecSeq, p: f64, cfg: &EstimatorConfig, seed: u64) -> Result<NormBracket> {
    let p_exp = check_p(p)?;
    let q = s.space().exponent();
    let rows: Vec<Vec<f64>> = s.nonzero_rows().iter().map(|r| r.to_vec()).collect();
    if rows.is_empty() {
        return Ok(NormBracket::exact(0.0, "cohen-zero"));
    }
    if p == 1.0 {
        // φ_j = norming functionals are feasible and the trivial decomposition is optimal
        return Ok(NormBracket::exact(norm_strong_p(s, 1.0)?, "cohen-p1"));
    }
    let d = s.space().dim();
    if d == 1 {
        let values: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        return Ok(NormBracket::exact(lq_norm(&values, p_exp), "cohen-scalar"));
    }
    if rows.len() == 1 {
        return Ok(NormBracket::exact(lq_norm(&rows[0], q), "cohen-singleton"));
    }
    let z = linalg::from_rows(&rows, d);
    if q.is_one() {
        // ℓ_p ⊗_π ℓ_1^d = ℓ_1^d(ℓ_p): sum of the column norms
        let value = (0..d).map(|i| lq_norm(&z.column(i).iter().copied().collect::<Vec<_>>(), p_exp)).sum();
        return Ok(NormBracket::exact(value, "cohen-l1-columns"));
    }
    if q.is_two() && p == 2.0 {
        // trace-class norm
        let (_, sigma, _) = linalg::svd(&z);
        return Ok(NormBracket::exact(sigma.iter().sum(), "cohen-nuclear"));
    }

    let mut search = Search::new(z, rows, s.space(), p_exp, cfg, seed);
    search.best_upper = norm_strong_p(s, 1.0)?;
    search.run();
    let upper = search.best_upper;
    Ok(NormBracket::estimated(search.best_lower.min(upper), upper, "cohen-atomic", seed))
}

struct Search<'a> {
    z: DMatrix<f64>,
    rows: Vec<Vec<f64>>,
    space: Space,
    p: Exponent,
    cfg: &'a EstimatorConfig,
    seed: u64,
    atoms: Vec<Vec<f64>>,
    best_lower: f64,
    best_upper: f64,
    evals: u64,
}

impl<'a> Search<'a> {
    fn new(
        z: DMatrix<f64>,
        rows: Vec<Vec<f64>>,
        space: Space,
        p: Exponent,
        cfg: &'a EstimatorConfig,
        seed: u64,
    ) -> Self {
        Search { z, rows, space, p, cfg, seed, atoms: Vec::new(), best_lower: 0.0, best_upper: f64::INFINITY, evals: 0 }
    }

    fn q(&self) -> Exponent {
        self.space.exponent()
    }

    fn run(&mut self) {
        let d = self.space.dim();
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            self.add_atom(e);
        }
        for r in self.rows.clone() {
            self.add_atom(r);
        }
        let (_, sigma, v) = linalg::svd(&self.z);
        for (c, s) in sigma.iter().enumerate() {
            if *s > 1e-12 * sigma[0] {
                self.add_atom(v.column(c).iter().copied().collect());
            }
        }
        if self.q().is_infinite() && d <= 10 {
            // every extreme point of B_{ℓ_∞^d}, up to sign
            for mask in 0..(1u32 << (d - 1)) {
                let u = (0..d).map(|i| if i > 0 && mask >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 }).collect();
                self.add_atom(u);
            }
        }

        for phi in self.initial_duals() {
            if let Some(x) = self.dual_value(&phi) {
                self.add_atom(x);
            }
        }

        // the dual end carries the weak-p* slack, so a gap below it is noise
        let target = self.cfg.cohen_gap.max(2.0 * self.cfg.ascent_slack);
        let mut warm: Option<DMatrix<f64>> = None;
        let mut stalled = 0;
        for round in 0..self.cfg.cohen_rounds.max(1) {
            let before = (self.best_lower, self.best_upper);
            let (a, phi) = self.solve_primal(warm.take(), round == 0);
            let peak = self.dual_value(&phi);
            if self.best_upper - self.best_lower <= target * self.best_upper {
                break;
            }
            let moved = self.best_lower > before.0 * (1.0 + 1e-4) || self.best_upper < before.1 * (1.0 - 1e-4);
            stalled = if moved { 0 } else { stalled + 1 };
            if stalled >= 3 {
                break;
            }
            let Some(x) = peak else { break };
            if !self.add_atom(x) {
                break;
            }
            let mut grown = DMatrix::zeros(a.nrows(), a.ncols() + 1);
            grown.columns_mut(0, a.ncols()).copy_from(&a);
            warm = Some(grown);
        }
    }

    /// Normalizes `u` in `E` and records it unless it repeats an atom up to sign.
    fn add_atom(&mut self, u: Vec<f64>) -> bool {
        let n = lq_norm(&u, self.q());
        if !(n > 0.0) || !n.is_finite() {
            return false;
        }
        let u: Vec<f64> = u.into_iter().map(|v| v / n).collect();
        let close = |a: &[f64], sign: f64| a.iter().zip(&u).all(|(x, y)| (x - sign * y).abs() < 1e-9);
        if self.atoms.iter().any(|a| close(a, 1.0) || close(a, -1.0)) {
            return false;
        }
        self.atoms.push(u);
        true
    }

    /// Rank-one, weighted-norming, singular-vector and column-norming duals.
    fn initial_duals(&mut self) -> Vec<Vec<Vec<f64>>> {
        let q = self.q();
        let p = self.p;
        let k = self.rows.len();
        let d = self.space.dim();
        let mut out = Vec::new();

        let s = VecSeq::new(self.space, self.rows.clone()).expect("validated rows");
        if let Ok(weak) = weak_p_eval(&s, p.value(), self.cfg, derive_seed(self.seed, 0xC0)) {
            if let Some(psi) = weak.functional {
                let t: Vec<f64> = self.rows.iter().map(|x| dot(x, &psi)).collect();
                if let Some(a) = norming_coords(&t, p) {
                    out.push(a.iter().map(|aj| psi.iter().map(|v| aj * v).collect()).collect());
                }
            }
        }

        let c: Vec<f64> = self.rows.iter().map(|x| lq_norm(x, q)).collect();
        if let Some(w) = norming_coords(&c, p) {
            out.push(
                self.rows
                    .iter()
                    .zip(&w)
                    .map(|(x, wj)| norming_coords(x, q).expect("nonzero row").into_iter().map(|v| wj * v).collect())
                    .collect(),
            );
        }

        let (u, sigma, v) = linalg::svd(&self.z);
        let r = sigma.iter().filter(|s| **s > 1e-12 * sigma[0]).count();
        let uv = u.columns(0, r) * v.columns(0, r).transpose();
        out.push(linalg::to_rows(&uv));

        let mut cols = vec![vec![0.0; d]; k];
        for i in 0..d {
            let col: Vec<f64> = self.z.column(i).iter().copied().collect();
            if let Some(n) = norming_coords(&col, p) {
                for (row, v) in cols.iter_mut().zip(&n) {
                    row[i] = *v;
                }
            }
        }
        out.push(cols);
        out
    }

    /// Scores a dual sequence and returns the unit vector of `E` where its
    /// weak-`p*` norm peaks.
    fn dual_value(&mut self, phi: &[Vec<f64>]) -> Option<Vec<f64>> {
        let num: f64 = phi.iter().zip(&self.rows).map(|(f, x)| dot(f, x).abs()).sum();
        if !(num > 0.0) || !num.is_finite() {
            return None;
        }
        let dual = VecSeq::new(self.space.dual(), phi.to_vec()).ok()?;
        self.evals += 1;
        let p_star = self.p.conjugate().value();
        let weak = weak_p_eval(&dual, p_star, self.cfg, derive_seed(self.seed, self.evals)).ok()?;
        if weak.bracket.upper > 0.0 {
            self.best_lower = self.best_lower.max(num / weak.bracket.upper);
        }
        weak.functional
    }

    /// Cost of `A` as a decomposition, charging any residual `z − A Xᵀ` at its
    /// trivial cost so the value is a valid upper bound for every `A`.
    fn true_cost(&self, a: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
        let q = self.q();
        let mut cost = 0.0;
        for t in 0..a.ncols() {
            let col: Vec<f64> = a.column(t).iter().copied().collect();
            let atom: Vec<f64> = x.column(t).iter().copied().collect();
            cost += lq_norm(&col, self.p) * lq_norm(&atom, q);
        }
        let residual = &self.z - a * x.transpose();
        for j in 0..residual.nrows() {
            let row: Vec<f64> = residual.row(j).iter().copied().collect();
            cost += lq_norm(&row, q);
        }
        cost
    }

    /// Minimizes `Σ_t ‖a_t‖_p` subject to `A Xᵀ = z` by accelerated projected
    /// gradient on a smoothed objective with decreasing smoothing. Returns the
    /// final coefficients and the multiplier estimate `Φ = ∇f Xᵀ (X Xᵀ)^{-1}`.
    fn solve_primal(&mut self, warm: Option<DMatrix<f64>>, cold: bool) -> (DMatrix<f64>, Vec<Vec<f64>>) {
        let k = self.z.nrows();
        let d = self.z.ncols();
        let t_atoms = self.atoms.len();
        let x = DMatrix::from_fn(d, t_atoms, |i, t| self.atoms[t][i]);
        let m = linalg::spd_inverse(&x * x.transpose()).expect("coordinate atoms span E");
        let mx = &m * &x;
        let project = |g: &DMatrix<f64>| g - (g * x.transpose()) * &mx;
        let restore = |a: &DMatrix<f64>| a - (a * x.transpose() - &self.z) * &mx;

        let mut a = match warm {
            Some(w) => restore(&w),
            None => restore(&DMatrix::zeros(k, t_atoms)),
        };

        let scale = self.z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let stages: &[f64] = if cold { &[1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-8] } else { &[1e-4, 1e-5, 1e-6, 1e-8] };
        let iters = if cold { 150 } else { 80 };
        let p = self.p.value();

        let mut best_a = a.clone();
        let mut best_cost = self.true_cost(&a, &x);
        self.best_upper = self.best_upper.min(best_cost);

        let mut grad_at = a.clone();
        let mut eps_last = stages[0] * scale;
        for &rel_eps in stages {
            let eps = rel_eps * scale;
            eps_last = eps;
            let mut y = a.clone();
            let mut fa = smoothed(&a, p, eps).0;
            let mut t = 1.0f64;
            let mut lip = 1.0 / eps;
            for it in 0..iters {
                let (fy, gy) = smoothed(&y, p, eps);
                let g = project(&gy);
                let gn2 = g.norm_squared();
                if gn2 < 1e-30 {
                    break;
                }
                let mut a_new;
                let mut f_new;
                loop {
                    a_new = &y - &g / lip;
                    f_new = smoothed(&a_new, p, eps).0;
                    if f_new <= fy - 0.5 * gn2 / lip || lip > 1e18 {
                        break;
                    }
                    lip *= 2.0;
                }
                let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                if f_new > fa {
                    y = a_new.clone();
                    t = 1.0;
                } else {
                    y = &a_new + (&a_new - &a) * ((t - 1.0) / t_new);
                    t = t_new;
                }
                a = a_new;
                fa = f_new;
                lip *= 0.8;
                if it % 20 == 19 {
                    a = restore(&a);
                    y = restore(&y);
                    let cost = self.true_cost(&a, &x);
                    if cost < best_cost {
                        best_cost = cost;
                        best_a = a.clone();
                    }
                }
            }
            a = restore(&a);
            let cost = self.true_cost(&a, &x);
            if cost < best_cost {
                best_cost = cost;
                best_a = a.clone();
            }
            grad_at = a.clone();
        }
        self.best_upper = self.best_upper.min(best_cost);

        let (_, grad) = smoothed(&grad_at, p, eps_last);
        let phi = grad * x.transpose() * &m;
        (best_a, linalg::to_rows(&phi))
    }
}

/// `Σ_t (Σ_i (a_it² + ε²)^{p/2})^{1/p}` and its gradient.
fn smoothed(a: &DMatrix<f64>, p: f64, eps: f64) -> (f64, DMatrix<f64>) {
    let mut value = 0.0;
    let mut grad = DMatrix::zeros(a.nrows(), a.ncols());
    let e2 = eps * eps;
    for t in 0..a.ncols() {
        let mut sum = 0.0;
        for i in 0..a.nrows() {
            sum += (a[(i, t)] * a[(i, t)] + e2).powf(0.5 * p);
        }
        let norm = sum.powf(1.0 / p);
        value += norm;
        let lead = norm.powf(1.0 - p);
        for i in 0..a.nrows() {
            let v = a[(i, t)];
            grad[(i, t)] = lead * (v * v + e2).powf(0.5 * p - 1.0) * v;
        }
    }
    (value, grad)
}
