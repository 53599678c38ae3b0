use nalgebra::DMatrix;
use proptest::prelude::*;
use quant_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mixture_from_seed(seed: u64, dim: usize, components: usize) -> GaussianMixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = 1.0 / components as f64;
    let comps: Vec<Component> = (0..components)
        .map(|i| Component {
            weight: if i + 1 == components { 1.0 - w * (components - 1) as f64 } else { w },
            mean: (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
            var_diag: (0..dim).map(|_| rng.random_range(0.3..1.5)).collect(),
        })
        .collect();
    GaussianMixture::new(dim, comps).unwrap()
}

fn family(imq: bool) -> KernelFamily {
    if imq {
        KernelFamily::InverseMultiquadric
    } else {
        KernelFamily::SquaredExponential
    }
}

fn vec_of(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, d)
}

fn feasible_random(rng: &mut ChaCha8Rng, n: usize, s: usize, binary: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = if binary {
        rand::seq::index::sample(rng, n, s).into_vec()
    } else {
        (0..s).map(|_| rng.random_range(0..n)).collect()
    };
    idx.sort_unstable();
    idx
}

fn random_problem(seed: u64, n: usize, s: usize, binary: bool) -> IqpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let ell: f64 = rng.random_range(0.3..2.0);
    let k = DMatrix::from_fn(n, n, |i, j| {
        let r2 = (pts[2 * i] - pts[2 * j]).powi(2) + (pts[2 * i + 1] - pts[2 * j + 1]).powi(2);
        (-0.5 * r2 / (ell * ell)).exp()
    });
    let c = (0..n).map(|_| rng.random_range(-2.0 * s as f64..0.5)).collect();
    IqpProblem::new(k, c, s, binary).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernels_are_exactly_symmetric(
        (x, y, ux, uy) in (1usize..6).prop_flat_map(|d| (vec_of(d), vec_of(d), vec_of(d), vec_of(d))),
        ell in 0.2f64..3.0,
        imq: bool,
    ) {
        let base = KernelSpec::new(family(imq), ell).unwrap();
        prop_assert_eq!(base.eval(&x, &y).unwrap(), base.eval(&y, &x).unwrap());
        let stein = SteinKernel::new(base);
        prop_assert_eq!(stein.eval(&x, &ux, &y, &uy).unwrap(), stein.eval(&y, &uy, &x, &ux).unwrap());
    }

    #[test]
    fn gram_matrices_are_psd(seed: u64, n in 2usize..50, d in 1usize..4, ell in 0.2f64..3.0, imq: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let points = Points::new(d, data).unwrap();
        let k = gram(&KernelChoice::Base(KernelSpec::new(family(imq), ell).unwrap()), &points, None).unwrap();
        let min = k.symmetric_eigenvalues().min();
        prop_assert!(min >= -1e-8, "smallest eigenvalue {min}");
    }

    #[test]
    fn median_heuristic_is_deterministic_and_scales(seed: u64, n in 3usize..80, factor in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * 2).map(|_| rng.random_range(-2.0..2.0)).collect();
        let scaled: Vec<f64> = data.iter().map(|v| v * factor).collect();
        let p = Points::new(2, data).unwrap();
        let q = Points::new(2, scaled).unwrap();
        let a = median_heuristic(&p, 40, seed).unwrap();
        prop_assert_eq!(a, median_heuristic(&p, 40, seed).unwrap());
        let b = median_heuristic(&q, 40, seed).unwrap();
        prop_assert!((b - factor * a).abs() <= 1e-12 * b);
    }

    #[test]
    fn mixture_score_matches_log_density(seed: u64, d in 1usize..4, k in 1usize..5, x in vec_of(3)) {
        let m = mixture_from_seed(seed, d, k);
        let x = &x[..d];
        let score = m.score(x).unwrap();
        let h = 1e-5;
        for i in 0..d {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[i] += h;
            down[i] -= h;
            let fd = (m.log_density(&up) - m.log_density(&down)) / (2.0 * h);
            prop_assert!((fd - score[i]).abs() <= 1e-6, "coordinate {i}: {fd} vs {}", score[i]);
        }
    }

    #[test]
    fn double_integral_sign(seed: u64, d in 1usize..4, k in 1usize..6, ell in 0.2f64..3.0) {
        let m = mixture_from_seed(seed, d, k);
        let kernel = KernelSpec::squared_exponential(ell).unwrap();
        prop_assert!(TargetModel::mixture(m.clone(), Mode::Mmd).double_integral(&kernel).unwrap() >= 0.0);
        prop_assert_eq!(TargetModel::mixture(m, Mode::Ksd).double_integral(&kernel).unwrap(), 0.0);
    }

    #[test]
    fn running_state_matches_recomputation(
        seed: u64,
        n in 1usize..100,
        updates in prop::collection::vec(prop::collection::vec(0usize..1000, 1..4), 1..20),
        ksd: bool,
    ) {
        let m = mixture_from_seed(seed, 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let cands = CandidateSet::new(m.sample(n, &mut rng)).unwrap();
        let mode = if ksd { Mode::Ksd } else { Mode::Mmd };
        let target = TargetModel::mixture(m, mode);
        let ctx = Discrepancy::new(&cands, &target, KernelSpec::squared_exponential(0.8).unwrap()).unwrap();
        let mut state = SelectionState::new(&ctx);
        for chosen in updates {
            let chosen: Vec<usize> = chosen.into_iter().map(|i| i % n).collect();
            state.update(&ctx, &chosen).unwrap();
            let fresh = ctx.mmd_squared_uniform(state.selected()).unwrap();
            let running = state.mmd_squared().unwrap();
            prop_assert!((fresh - running).abs() <= 1e-9 * fresh.abs().max(running.abs()).max(1e-300));
        }
    }

    #[test]
    fn mmd_is_permutation_invariant(seed: u64, n in 2usize..60, picks in prop::collection::vec(0usize..1000, 1..15)) {
        let m = mixture_from_seed(seed, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let cands = CandidateSet::new(m.sample(n, &mut rng)).unwrap();
        let target = TargetModel::mixture(m, Mode::Mmd);
        let ctx = Discrepancy::new(&cands, &target, KernelSpec::squared_exponential(1.0).unwrap()).unwrap();
        let idx: Vec<usize> = picks.iter().map(|i| i % n).collect();
        let mut rev = idx.clone();
        rev.reverse();
        let a = ctx.mmd_squared_uniform(&idx).unwrap();
        let b = ctx.mmd_squared_uniform(&rev).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300) + 1e-15);
    }

    #[test]
    fn branch_bound_is_exact(seed: u64, n in 1usize..9, s in 1usize..4, binary: bool) {
        prop_assume!(!binary || s <= n);
        let p = random_problem(seed, n, s, binary);
        let exact = solve_exhaustive(&p).unwrap();
        let bnb = solve_branch_bound(&p, &BranchBoundOptions::default());
        prop_assert_eq!(&bnb.v, &exact.v);
        prop_assert_eq!(bnb.objective, exact.objective);
        prop_assert!((p.objective_of(&bnb.indices) - bnb.objective).abs() <= 1e-10 * bnb.objective.abs().max(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let v = feasible_random(&mut rng, n, s, binary);
            prop_assert!(bnb.objective <= p.objective_of(&v));
        }
    }

    #[test]
    fn simplex_weights_are_optimal_over_vertices(seed: u64, n in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let k = DMatrix::from_fn(n, n, |i, j| (-0.5 * (pts[i] - pts[j]).powi(2)).exp());
        let h: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.8)).collect();
        let sol = solve_simplex_qp(&k, &h, 1.0, 100_000, 1e-10).unwrap();
        prop_assert!(sol.duality_gap <= 1e-10);
        prop_assert!(sol.history.windows(2).all(|p| p[1] <= p[0]));
        prop_assert!(sol.w.iter().all(|&x| x >= 0.0));
        prop_assert!((sol.w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for j in 0..n {
            let vertex = k[(j, j)] - 2.0 * h[j] + 1.0;
            prop_assert!(sol.phi_squared <= vertex + 1e-12);
        }
    }

    #[test]
    fn relaxation_rounding_is_feasible_and_sound(seed: u64, n in 2usize..9, s in 1usize..4, draws in 1usize..40) {
        prop_assume!(s <= n);
        let p = random_problem(seed, n, s, true);
        let optimum = solve_exhaustive(&p).unwrap().objective;
        let sdr = sdr_assemble(p.k(), p.c(), s).unwrap();
        let factor = sdr_solve_lowrank(&sdr, (n + 1).min(25), 500, 1e-6, seed).unwrap();
        for row in factor.u.row_iter() {
            prop_assert!((row.norm() - 1.0).abs() <= 1e-8);
        }
        let sol = sdr_round(&factor.u, &sdr, draws, seed, |idx: &[usize]| {
            let mut sorted = idx.to_vec();
            sorted.sort_unstable();
            p.objective_of(&sorted)
        })
        .unwrap();
        prop_assert_eq!(sol.v.iter().sum::<usize>(), s);
        prop_assert!(sol.v.iter().all(|&x| x <= 1));
        prop_assert!(sol.objective >= optimum - 1e-12 * optimum.abs().max(1.0));
    }

    #[test]
    fn batch_schedules_are_valid(n in 1usize..200, b_frac in 0.01f64..1.0, m in 1usize..20, seed: u64, sequential: bool) {
        let b = ((n as f64 * b_frac).ceil() as usize).clamp(1, n);
        let strategy = if sequential { BatchStrategy::SequentialBlocks } else { BatchStrategy::UniformWithoutReplacement };
        let schedule = BatchSchedule::new(n, b, m, strategy, seed).unwrap();
        prop_assert_eq!(schedule.batches().len(), m);
        for batch in schedule.batches() {
            prop_assert_eq!(batch.len(), b);
            prop_assert!(batch.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(batch.iter().all(|&i| i < n));
        }
        prop_assert_eq!(&schedule, &BatchSchedule::new(n, b, m, strategy, seed).unwrap());
    }

    #[test]
    fn every_algorithm_keeps_a_consistent_trace(seed: u64, n in 4usize..40, alg in 0usize..5, s in 1usize..3, m in 1usize..6) {
        let mix = mixture_from_seed(seed, 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let cands = CandidateSet::new(mix.sample(n, &mut rng)).unwrap();
        let target = TargetModel::mixture(mix, Mode::Mmd);
        let ctx = Discrepancy::new(&cands, &target, KernelSpec::squared_exponential(0.7).unwrap()).unwrap();
        let algorithm = [Algorithm::Myopic, Algorithm::Nonmyopic, Algorithm::Minibatch, Algorithm::Oneshot, Algorithm::Sdr][alg];
        let (m, s) = match algorithm {
            Algorithm::Myopic => (m, 1),
            Algorithm::Oneshot => (m.min(3), m.min(3)),
            _ => (m, s),
        };
        let mut config = SelectionConfig::new(algorithm, m, s).with_seed(seed);
        if algorithm == Algorithm::Minibatch {
            config = config.with_batch(n / 2 + 1, BatchStrategy::UniformWithoutReplacement);
        }
        let result = select(&ctx, &config).unwrap();
        prop_assert_eq!(result.trace.len(), result.pi.len());
        prop_assert!(result.timings_ms.iter().all(|&t| t >= 0.0));
        for i in 0..result.iterations() {
            let prefix: Vec<usize> = result.pi[..=i].iter().flatten().copied().collect();
            let fresh = ctx.mmd_squared_uniform(&prefix).unwrap();
            prop_assert!((fresh - result.trace[i]).abs() <= 1e-9 * fresh.abs().max(1e-300));
        }
    }
}
