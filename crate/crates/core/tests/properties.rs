use proptest::prelude::*;

use seqclass::idealnorm::{default_exponents, random_operator, random_sequences, IdealSpec};
use seqclass::multiop::{certified_bound, compose, decoupling_check, finite_type};
use seqclass::random::rng;
use seqclass::seqnorm::{norm_rad, norm_rad_prefix_sup, norm_strong_p, norm_sup, truncate, weak_p_ascent};
use seqclass::{
    class_norm, ideal_norm, op_norm, EstimatorConfig, Exponent, MultiOp, SeqClassSpec, Space, VecSeq, Vector,
};

const QS: [f64; 6] = [1.0, 4.0 / 3.0, 1.5, 2.0, 3.0, f64::INFINITY];
const PS: [f64; 4] = [1.0, 1.5, 2.0, 3.0];

fn space_strategy(max_dim: usize) -> impl Strategy<Value = Space> {
    (1..=max_dim, 0..QS.len()).prop_map(|(d, q)| Space::lq(QS[q], d).unwrap())
}

fn seq_in(space: Space, k: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = VecSeq> {
    prop::collection::vec(prop::collection::vec(-5.0..5.0f64, space.dim()), k)
        .prop_map(move |rows| VecSeq::new(space, rows).unwrap())
}

fn seq_strategy(max_dim: usize, max_k: usize) -> impl Strategy<Value = VecSeq> {
    space_strategy(max_dim).prop_flat_map(move |s| seq_in(s, 1..=max_k))
}

/// Two sequences of the same length in the same space.
fn seq_pair(max_dim: usize, max_k: usize) -> impl Strategy<Value = (VecSeq, VecSeq)> {
    (space_strategy(max_dim), 1..=max_k).prop_flat_map(|(s, k)| (seq_in(s, k..=k), seq_in(s, k..=k)))
}

fn cheap_classes(p: f64) -> [SeqClassSpec; 4] {
    [SeqClassSpec::Sup, SeqClassSpec::StrongP(p), SeqClassSpec::WeakP(p), SeqClassSpec::Rad]
}

fn le(a: f64, b: f64, tol: f64) -> bool {
    a <= b + tol * b.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unit_sequences_keep_the_vector_norm(
        (space, x) in space_strategy(5).prop_flat_map(|s| (Just(s), prop::collection::vec(-5.0..5.0f64, s.dim()))),
        pos in 0usize..6,
        extra in 0usize..3,
        pi in 0..PS.len(),
    ) {
        let cfg = EstimatorConfig::default();
        let x = Vector::new(space, x).unwrap();
        let s = VecSeq::unit_sequence(&x, pos, pos + 1 + extra).unwrap();
        let p = PS[pi];
        for class in cheap_classes(p).into_iter().chain([SeqClassSpec::CohenP(p)]) {
            let b = class_norm(&s, class, &cfg, 1).unwrap();
            prop_assert!((b.lower - x.norm()).abs() <= 1e-12 * x.norm().max(1.0), "{class}: {b:?} vs {}", x.norm());
            prop_assert!((b.upper - x.norm()).abs() <= 1e-12 * x.norm().max(1.0), "{class}: {b:?} vs {}", x.norm());
        }
    }

    #[test]
    fn sup_embedding_and_truncation(s in seq_strategy(4, 7), m in 0usize..8, pi in 0..PS.len()) {
        let cfg = EstimatorConfig::default();
        let m = m.min(s.len());
        let t = truncate(&s, m).unwrap();
        for class in cheap_classes(PS[pi]) {
            let full = class_norm(&s, class, &cfg, 3).unwrap();
            let part = class_norm(&t, class, &cfg, 3).unwrap();
            prop_assert!(full.lower <= full.upper);
            prop_assert!(le(norm_sup(&s), full.upper, 1e-9), "{class}");
            prop_assert!(le(part.lower, full.upper, 1e-9), "{class}: {part:?} > {full:?}");
        }
    }

    #[test]
    fn homogeneity_and_triangle((s, t) in seq_pair(4, 6), alpha in -4.0..4.0f64, pi in 0..PS.len()) {
        let cfg = EstimatorConfig::default();
        let sum = s.add(&t).unwrap();
        let scaled = s.scaled(alpha);
        for class in cheap_classes(PS[pi]) {
            let bs = class_norm(&s, class, &cfg, 5).unwrap();
            let bt = class_norm(&t, class, &cfg, 5).unwrap();
            let bsum = class_norm(&sum, class, &cfg, 5).unwrap();
            let bscaled = class_norm(&scaled, class, &cfg, 5).unwrap();
            prop_assert!(le(bsum.lower, bs.upper + bt.upper, 1e-9), "{class}");
            if bs.exact && bscaled.exact {
                prop_assert!((bscaled.upper - alpha.abs() * bs.upper).abs() <= 1e-12 * bs.upper.max(1.0) * alpha.abs().max(1.0), "{class}");
            } else {
                prop_assert!(le(bscaled.lower, alpha.abs() * bs.upper, 1e-9), "{class}");
                prop_assert!(le(alpha.abs() * bs.lower, bscaled.upper, 1e-9), "{class}");
            }
        }
    }

    #[test]
    fn weak_is_below_strong(s in seq_strategy(4, 7), pi in 0..PS.len()) {
        let cfg = EstimatorConfig::default();
        let p = PS[pi];
        let weak = class_norm(&s, SeqClassSpec::WeakP(p), &cfg, 0).unwrap();
        prop_assert!(le(weak.upper, norm_strong_p(&s, p).unwrap(), 1e-12));
        let ascent = weak_p_ascent(&s, p, &cfg, 0).unwrap().value;
        prop_assert!(le(ascent, weak.upper, 1e-12));
    }

    #[test]
    fn rad_is_hilbertian_in_l2(rows in (1usize..5).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-5.0..5.0f64, d), 1..=12))) {
        let cfg = EstimatorConfig::default();
        let s = VecSeq::new(Space::lq(2.0, rows[0].len()).unwrap(), rows).unwrap();
        let rad = norm_rad(&s, &cfg).unwrap();
        let l2 = norm_strong_p(&s, 2.0).unwrap();
        prop_assert!((rad - l2).abs() <= 1e-12 * l2.max(1.0));
        prop_assert_eq!(norm_rad_prefix_sup(&s, &cfg).unwrap(), rad);
    }

    #[test]
    fn eval_is_multilinear(seed in any::<u64>(), alpha in -3.0..3.0f64, slot in 0usize..3) {
        let mut g = rng(seed);
        let a = random_operator(&mut g, 3, 3, &default_exponents()).unwrap();
        let base: Vec<Vector> = random_sequences(&mut g, a.domain(), 1, false).iter().map(|s| s.vector(0)).collect();
        let other = random_sequences(&mut g, &a.domain()[slot..=slot], 1, false)[0].vector(0);
        let mut mixed = base.clone();
        let coords: Vec<f64> = base[slot].coords().iter().zip(other.coords()).map(|(x, y)| x + alpha * y).collect();
        mixed[slot] = Vector::new(a.domain()[slot], coords).unwrap();
        let mut swapped = base.clone();
        swapped[slot] = other;
        let lhs = a.eval(&mixed).unwrap();
        let r1 = a.eval(&base).unwrap();
        let r2 = a.eval(&swapped).unwrap();
        for i in 0..lhs.coords().len() {
            let expected = r1.coords()[i] + alpha * r2.coords()[i];
            prop_assert!((lhs.coords()[i] - expected).abs() <= 1e-10 * expected.abs().max(1.0));
        }
        let mut zeroed = base;
        zeroed[slot] = a.domain()[slot].zeros();
        prop_assert!(a.eval(&zeroed).unwrap().coords().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn composition_matches_direct_evaluation(seed in any::<u64>()) {
        let mut g = rng(seed);
        let menu = default_exponents();
        let a = random_operator(&mut g, 2, 3, &menu).unwrap();
        let target = Space::lq(3.0, 2).unwrap();
        let rows = random_sequences(&mut g, &[a.codomain()], target.dim(), false)[0].vectors().to_vec();
        let v = MultiOp::linear(a.codomain(), target, &rows).unwrap();
        let us: Vec<MultiOp> = a.domain().iter().map(|&e| {
            let f = Space::lq(2.0, 2).unwrap();
            let rows: Vec<Vec<f64>> = random_sequences(&mut g, &[f], e.dim(), false)[0].vectors().to_vec();
            MultiOp::linear(f, e, &rows).unwrap()
        }).collect();
        let c = compose(&v, &a, &us).unwrap();
        let args: Vec<Vector> = random_sequences(&mut g, c.domain(), 1, false).iter().map(|s| s.vector(0)).collect();
        let inner: Vec<Vector> = us.iter().zip(&args).map(|(u, x)| u.eval(std::slice::from_ref(x)).unwrap()).collect();
        let direct = v.eval(&[a.eval(&inner).unwrap()]).unwrap();
        let composed = c.eval(&args).unwrap();
        for (x, y) in composed.coords().iter().zip(direct.coords()) {
            prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn decoupling_identity(seed in any::<u64>(), n in 2usize..4, k in 1usize..5) {
        let cfg = EstimatorConfig::default();
        let mut g = rng(seed);
        let a = random_operator(&mut g, n, 3, &default_exponents()).unwrap();
        let seqs = random_sequences(&mut g, a.domain(), k, true);
        prop_assert!(decoupling_check(&a, &seqs, &cfg).unwrap() <= 1e-10);
    }

    #[test]
    fn op_norm_bracket_is_consistent(seed in any::<u64>(), n in 1usize..4) {
        let cfg = EstimatorConfig::default();
        let mut g = rng(seed);
        let a = random_operator(&mut g, n, 3, &default_exponents()).unwrap();
        let est = op_norm(&a, &cfg, seed);
        prop_assert!(est.bracket.lower <= est.bracket.upper);
        prop_assert!(le(est.bracket.lower, est.certified_upper, 1e-12));
        prop_assert!((certified_bound(&a, &cfg) - est.certified_upper).abs() <= 1e-12 * est.certified_upper.max(1.0));
        for w in &est.witness {
            prop_assert!((w.norm() - 1.0).abs() <= 1e-9);
        }
        let value = a.eval(&est.witness).unwrap().norm();
        prop_assert!((value - est.bracket.lower).abs() <= 1e-9 * value.max(1.0));
    }

    #[test]
    fn finite_type_evaluates_as_a_product(seed in any::<u64>()) {
        let mut g = rng(seed);
        let a = random_operator(&mut g, 2, 3, &default_exponents()).unwrap();
        let phis: Vec<Vector> = random_sequences(&mut g, &[a.domain()[0].dual(), a.domain()[1].dual()], 1, false)
            .iter().map(|s| s.vector(0)).collect();
        let b = random_sequences(&mut g, &[a.codomain()], 1, false)[0].vector(0);
        let ft = finite_type(&phis, &b).unwrap();
        let args: Vec<Vector> = random_sequences(&mut g, ft.domain(), 1, false).iter().map(|s| s.vector(0)).collect();
        let scale: f64 = phis.iter().zip(&args).map(|(p, x)| seqclass::spaces::pairing(p, x).unwrap()).product();
        for (y, bo) in ft.eval(&args).unwrap().coords().iter().zip(b.coords()) {
            prop_assert!((y - scale * bo).abs() <= 1e-12 * (scale * bo).abs().max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cohen_sits_between_strong_p_and_strong_1(s in seq_strategy(3, 4), pi in 1..PS.len()) {
        let cfg = EstimatorConfig::default();
        let p = PS[pi];
        let b = class_norm(&s, SeqClassSpec::CohenP(p), &cfg, 2).unwrap();
        prop_assert!(b.lower <= b.upper);
        prop_assert!(le(norm_strong_p(&s, p).unwrap(), b.upper, 1e-9));
        prop_assert!(le(b.upper, norm_strong_p(&s, 1.0).unwrap(), 1e-12));
    }

    #[test]
    fn ideal_search_invariants(seed in any::<u64>(), which in 0usize..3) {
        let cfg = EstimatorConfig::default();
        let mut g = rng(seed);
        let a = random_operator(&mut g, 2, 3, &default_exponents()).unwrap();
        let class = [SeqClassSpec::WeakP(1.0), SeqClassSpec::StrongP(2.0), SeqClassSpec::Sup][which];
        let spec = IdealSpec::uniform(class, 2).unwrap();
        let est = ideal_norm(&a, &spec, 4, 2, seed, &cfg).unwrap();
        let op = op_norm(&a, &cfg, seed);
        // k = 1 recovers the operator norm search
        prop_assert!((est.ratio_by_k[0].1 - op.bracket.lower).abs() <= 1e-9 * op.bracket.lower.max(1.0));
        for w in est.ratio_by_k.windows(2) {
            prop_assert!(w[1].1 >= w[0].1, "{:?}", est.ratio_by_k);
        }
        prop_assert_eq!(est.bracket.lower, est.ratio_by_k.iter().map(|r| r.1).fold(0.0, f64::max));
        // these specs are stable, so the search stays under the operator norm
        let ceiling = seqclass::multiop::op_norm_with_starts(&a, &cfg, seed, &seqclass::idealnorm::witness_tuples(&est.witness));
        prop_assert!(le(est.bracket.lower, ceiling.bracket.upper, 1e-6));
    }
}

#[test]
fn exponents_round_trip_through_text() {
    for q in QS {
        let e = Exponent::new(q).unwrap();
        assert_eq!(e.to_string().parse::<Exponent>().unwrap(), e);
        let s = Space::new(3, e).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<Space>(&json).unwrap(), s);
    }
}
