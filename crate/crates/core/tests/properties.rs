//! Property tests for problems, base optimizers and lookahead.

use approx::assert_relative_eq;
use lookahead_minmax::lookahead::{AverageMode, AverageTracker, LookaheadState};
use lookahead_minmax::optimizers::{
    eg_step, gda_step_simultaneous, ogda_step, BaseOptimizer, Method, OgdaState, Oracle, StepSizes,
    UnrollMode, Variant,
};
use lookahead_minmax::problems::{
    Batch, BatchSampler, Bilinear2D, EpochSampler, GameProblem, JointPoint, Quadratic2D,
    StochasticBilinear,
};
use lookahead_minmax::rng;
use proptest::prelude::*;

fn problem() -> impl Strategy<Value = GameProblem> {
    prop_oneof![
        Just(GameProblem::from(Bilinear2D)),
        (-3.0..3.0, -6.0..6.0, -3.0..3.0).prop_map(|(a, b, c)| GameProblem::from(Quadratic2D {
            a,
            b,
            c
        })),
        (1usize..12, any::<u64>())
            .prop_map(|(n, s)| GameProblem::from(StochasticBilinear::new(n, n, s).unwrap())),
    ]
}

fn point_for(problem: &GameProblem, seed: u64) -> JointPoint {
    use rand::Rng;
    let mut r = rng::seeded(seed);
    let v = (0..problem.dim())
        .map(|_| r.random_range(-2.0..2.0))
        .collect();
    JointPoint::from_joint(v, problem.d_theta()).unwrap()
}

fn vec_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let scale = b.iter().map(|x| x.abs()).fold(1.0, f64::max);
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
}

proptest! {
    #[test]
    fn jvf_is_jacobian_times_offset(p in problem(), seed in any::<u64>()) {
        let w = point_for(&p, seed);
        let v = p.jvf(&w, Batch::Full).unwrap();
        let opt = p.optimum();
        let off = nalgebra::DVector::from_iterator(
            p.dim(),
            w.as_slice().iter().zip(opt.as_slice()).map(|(a, b)| a - b),
        );
        let want = p.jvf_jacobian() * off;
        prop_assert!(vec_close(&v, want.as_slice(), 1e-10));
    }

    #[test]
    fn jvf_matches_finite_differences_of_losses(
        p in problem(),
        seed in any::<u64>(),
        pick in proptest::collection::vec(any::<prop::sample::Index>(), 1..4),
    ) {
        let w = point_for(&p, seed);
        let idx: Vec<usize> = match p.sample_count() {
            Some(n) => {
                let mut v: Vec<usize> = pick.iter().map(|i| i.index(n)).collect();
                v.sort_unstable();
                v.dedup();
                v
            }
            None => Vec::new(),
        };
        let batch = if idx.is_empty() { Batch::Full } else { Batch::Samples(&idx) };
        let v = p.jvf(&w, batch).unwrap();
        let h = 1e-5;
        let dt = p.d_theta();
        let mut fd = vec![0.0; p.dim()];
        for (j, g) in fd.iter_mut().enumerate() {
            let mut plus = w.as_slice().to_vec();
            let mut minus = plus.clone();
            plus[j] += h;
            minus[j] -= h;
            let l = |x: &[f64]| p.loss(&x[..dt], &x[dt..], batch).unwrap();
            let d = (l(&plus) - l(&minus)) / (2.0 * h);
            // The max player descends on −L.
            *g = if j < dt { d } else { -d };
        }
        let err = fd.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-6 * norm.max(1e-3), "err {err} norm {norm}");
    }

    #[test]
    fn epochs_cover_every_index_once(n in 1usize..60, div in any::<prop::sample::Index>(), seed in any::<u64>()) {
        let divisors: Vec<usize> = (1..=n).filter(|b| n % b == 0).collect();
        let b = divisors[div.index(divisors.len())];
        let mut s = EpochSampler::new(n, b, rng::seeded(seed)).unwrap();
        for _ in 0..3 {
            let mut seen = Vec::new();
            for _ in 0..n / b {
                seen.extend_from_slice(s.next_batch());
            }
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn regeneration_is_bit_exact(n in 1usize..20, seed in any::<u64>()) {
        let a = StochasticBilinear::new(n, n, seed).unwrap();
        let b = StochasticBilinear::new(n, n, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

fn every_method(eta: f64) -> Vec<Method> {
    vec![
        Method::Gda {
            eta,
            eta_phi: None,
            variant: Variant::Simultaneous,
            ratio: 1,
        },
        Method::Gda {
            eta,
            eta_phi: None,
            variant: Variant::Alternating,
            ratio: 2,
        },
        Method::Eg { eta, eta_phi: None },
        Method::Ogda { eta, eta_phi: None },
        Method::Adam {
            eta,
            eta_phi: None,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
            variant: Variant::Simultaneous,
            ratio: 1,
        },
        Method::ExtraAdam {
            eta,
            eta_phi: None,
            beta1: 0.0,
            beta2: 0.999,
            eps: 1e-8,
        },
        Method::Svre {
            eta,
            eta_phi: None,
            restart_prob: 0.3,
        },
        Method::Unroll {
            eta,
            steps: 3,
            mode: UnrollMode::Y,
            exact: false,
        },
        Method::Unroll {
            eta,
            steps: 3,
            mode: UnrollMode::Xy,
            exact: false,
        },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_step_is_identity(seed in any::<u64>(), batch in prop_oneof![Just(None), (1usize..8).prop_map(Some)]) {
        let p = GameProblem::from(StochasticBilinear::new(8, 8, seed).unwrap());
        let start = point_for(&p, seed ^ 1);
        for m in every_method(0.0) {
            let mut w = start.clone();
            let sampler = BatchSampler::new(&p, batch, rng::seeded(seed)).unwrap();
            let mut oracle = Oracle::new(&p, sampler);
            let mut opt = BaseOptimizer::new(&m, &p, &w, batch, rng::seeded(seed)).unwrap();
            for _ in 0..5 {
                opt.step(&mut w, &mut oracle).unwrap();
            }
            prop_assert_eq!(w.as_slice(), start.as_slice(), "{}", m.label());
        }
    }

    #[test]
    fn linear_steps_are_linear_maps(
        q in (-3.0..3.0, -6.0..6.0, -3.0..3.0),
        eta in 0.0..0.5,
        a in 0.0..1.0,
        s1 in any::<u64>(),
        s2 in any::<u64>(),
    ) {
        let p = GameProblem::from(Quadratic2D { a: q.0, b: q.1, c: q.2 });
        let (w1, w2) = (point_for(&p, s1), point_for(&p, s2));
        let mix = |x: &JointPoint, y: &JointPoint| -> Vec<f64> {
            x.as_slice().iter().zip(y.as_slice()).map(|(u, v)| a * u + (1.0 - a) * v).collect()
        };
        let wm = JointPoint::from_joint(mix(&w1, &w2), 1).unwrap();
        let eta = StepSizes::shared(eta);
        type Step = fn(&GameProblem, &mut JointPoint, StepSizes);
        let steps: [Step; 3] = [
            |p, w, e| gda_step_simultaneous(&mut Oracle::full(p), w, e).unwrap(),
            |p, w, e| eg_step(&mut Oracle::full(p), w, e).unwrap(),
            |p, w, e| {
                let mut s = OgdaState::new(w.len());
                let mut o = Oracle::full(p);
                ogda_step(&mut o, w, &mut s, e).unwrap();
                ogda_step(&mut o, w, &mut s, e).unwrap();
            },
        ];
        for step in steps {
            let (mut x, mut y, mut z) = (w1.clone(), w2.clone(), wm.clone());
            step(&p, &mut x, eta);
            step(&p, &mut y, eta);
            step(&p, &mut z, eta);
            prop_assert!(vec_close(z.as_slice(), &mix(&x, &y), 1e-10));
        }
    }

    #[test]
    fn extragradient_costs_two_queries_per_update(t in 1u64..50, b in prop_oneof![Just(None), (1usize..10).prop_map(Some)]) {
        let p = GameProblem::from(StochasticBilinear::new(10, 10, 3).unwrap());
        let mut w = point_for(&p, 4);
        let mut oracle = Oracle::new(&p, BatchSampler::new(&p, b, rng::seeded(0)).unwrap());
        for _ in 0..t {
            eg_step(&mut oracle, &mut w, StepSizes::shared(0.1)).unwrap();
        }
        let per_query = b.map_or(1.0, |b| b as f64 / 10.0);
        assert_relative_eq!(oracle.passes(), 2.0 * t as f64 * per_query, max_relative = 1e-12);
        let mut oracle = Oracle::new(&p, BatchSampler::new(&p, b, rng::seeded(0)).unwrap());
        for _ in 0..t {
            gda_step_simultaneous(&mut oracle, &mut w, StepSizes::shared(0.1)).unwrap();
        }
        assert_relative_eq!(oracle.passes(), t as f64 * per_query, max_relative = 1e-12);
    }

    #[test]
    fn exactly_k_updates_between_backtracks(k in 1u64..20, total in 1u64..200) {
        let mut w = JointPoint::new(vec![1.0], vec![1.0]).unwrap();
        let mut la = LookaheadState::new(&w, k, 0.5, 0.5).unwrap();
        let fired: Vec<u64> = (1..=total).filter(|_| la.after_update(&mut w)).collect();
        let want: Vec<u64> = (1..=total).filter(|t| t % k == 0).collect();
        prop_assert_eq!(fired.len(), want.len());
        prop_assert_eq!(la.counter, total % k);
    }

    #[test]
    fn k_one_lookahead_is_a_damped_step(
        q in (-3.0..3.0, -6.0..6.0, -3.0..3.0),
        eta in 0.0..0.5,
        alpha in 0.01..1.0,
        seed in any::<u64>(),
    ) {
        let p = GameProblem::from(Quadratic2D { a: q.0, b: q.1, c: q.2 });
        let w0 = point_for(&p, seed);
        let m = Method::Eg { eta, eta_phi: None };
        let mut w = w0.clone();
        let mut opt = BaseOptimizer::new(&m, &p, &w, None, rng::seeded(0)).unwrap();
        let mut la = LookaheadState::new(&w, 1, alpha, alpha).unwrap();
        let mut oracle = Oracle::full(&p);
        opt.step(&mut w, &mut oracle).unwrap();
        let mut f = w0.clone();
        eg_step(&mut Oracle::full(&p), &mut f, StepSizes::shared(eta)).unwrap();
        prop_assert!(la.after_update(&mut w));
        let want: Vec<f64> = w0.as_slice().iter().zip(f.as_slice()).map(|(x, fx)| x + alpha * (fx - x)).collect();
        prop_assert!(vec_close(w.as_slice(), &want, 1e-14));
    }

    #[test]
    fn backtrack_order_does_not_matter(
        fast in proptest::collection::vec(-5.0..5.0f64, 4),
        slow in proptest::collection::vec(-5.0..5.0f64, 4),
        at in 0.0..1.0,
        ap in 0.0..1.0,
    ) {
        let slow = JointPoint::from_joint(slow, 2).unwrap();
        let mut joint = JointPoint::from_joint(fast.clone(), 2).unwrap();
        joint.pull_towards(&slow, at, ap);
        // α = 1 leaves a player untouched, so these move one player at a time.
        let mut theta_first = JointPoint::from_joint(fast.clone(), 2).unwrap();
        theta_first.pull_towards(&slow, at, 1.0);
        theta_first.pull_towards(&slow, 1.0, ap);
        let mut phi_first = JointPoint::from_joint(fast, 2).unwrap();
        phi_first.pull_towards(&slow, 1.0, ap);
        phi_first.pull_towards(&slow, at, 1.0);
        prop_assert_eq!(joint.as_slice(), theta_first.as_slice());
        prop_assert_eq!(joint.as_slice(), phi_first.as_slice());
    }

    #[test]
    fn uniform_average_is_the_mean(xs in proptest::collection::vec(proptest::collection::vec(-10.0..10.0f64, 3), 1..200)) {
        let mut t = AverageTracker::new(AverageMode::Uma, &[0.0; 3]).unwrap();
        for x in &xs {
            t.update(x);
        }
        for j in 0..3 {
            let mean = xs.iter().map(|x| x[j]).sum::<f64>() / xs.len() as f64;
            prop_assert!((t.value()[j] - mean).abs() < 1e-10);
        }
    }

    #[test]
    fn ema_follows_the_closed_form(v0 in -5.0..5.0f64, c in -5.0..5.0f64, beta in 0.5..0.9999f64, t in 1i32..2000) {
        let mut e = AverageTracker::new(AverageMode::Ema { beta }, &[v0]).unwrap();
        for _ in 0..t {
            e.update(&[c]);
        }
        let want = beta.powi(t) * v0 + (1.0 - beta.powi(t)) * c;
        prop_assert!((e.value()[0] - want).abs() < 1e-9);
    }
}
