use ndarray::Array2;
use newtonop::banded::BandedMatrix;
use newtonop::datagen::{make_dataset, DatasetConfig, OperatorDataset, Recipe};
use newtonop::neural::{compute_pod_basis, grid_coords, Adam, ArchConfig, Checkpoint, DeepONet, Mlp};
use newtonop::newton::{newton_step, NewtonConfig};
use newtonop::problems::{Problem, ProblemSpec};
use newtonop::rng::Rng;
use newtonop::surrogate::{operator_iterate, ExactNewton, IterateConfig, ModelOracle, StepOracle, ZeroStep};
use newtonop::training::{mse_loss, mse_of_outputs, model_coords, newton_loss, newton_loss_of_outputs, Samples};
use proptest::prelude::*;

fn small_problem(kind: usize) -> Problem {
    match kind % 4 {
        0 => ProblemSpec::Example1d { n: 11 },
        1 => ProblemSpec::Convex2d { n: 5 },
        2 => ProblemSpec::Nonconvex2d { n: 5, s: 1600.0 },
        _ => ProblemSpec::GrayScott { n: 5, d_a: 2.5e-4, d_s: 5e-4, mu: 0.065, rho: 0.04 },
    }
    .build()
    .unwrap()
}

fn random_state(p: &Problem, seed: u64, scale: f64) -> Vec<f64> {
    let mut rng = Rng::seed_from_u64(seed);
    (0..p.unknowns()).map(|_| rng.uniform(-scale, scale)).collect()
}

fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cfg(48))]

    #[test]
    fn banded_solve_matches_dense_lu(n in 4usize..30, kl in 0usize..4, ku in 0usize..4, seed in any::<u64>()) {
        let mut rng = Rng::seed_from_u64(seed);
        let mut m = BandedMatrix::zeros(n, kl, ku).unwrap();
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                m.set(i, j, rng.uniform(-1.0, 1.0));
            }
            m.add(i, i, 4.0 * (1.0 + rng.next_f64()));
        }
        let rhs: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let x = m.solve(&rhs).unwrap();
        let dense = m.to_dense();
        let a = nalgebra::DMatrix::from_fn(n, n, |i, j| dense[i][j]);
        let oracle = a.lu().solve(&nalgebra::DVector::from_column_slice(&rhs)).unwrap();
        for i in 0..n {
            prop_assert!((x[i] - oracle[i]).abs() <= 1e-10 * (1.0 + oracle[i].abs()));
        }
    }

    #[test]
    fn jacobian_matches_central_differences(kind in 0usize..4, seed in any::<u64>()) {
        let p = small_problem(kind);
        let u = random_state(&p, seed, 1.5);
        let dense = p.jacobian(&u).unwrap().assemble().to_dense();
        let scale = dense.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        for j in 0..u.len() {
            let eps = 1e-6;
            let mut up = u.clone();
            let mut dn = u.clone();
            up[j] += eps;
            dn[j] -= eps;
            let (fu, fd) = (p.residual(&up).unwrap(), p.residual(&dn).unwrap());
            for i in 0..u.len() {
                let col = (fu[i] - fd[i]) / (2.0 * eps);
                prop_assert!((col - dense[i][j]).abs() <= 1e-6 * scale);
            }
        }
    }

    #[test]
    fn newton_step_solves_the_linearized_system(kind in 0usize..4, seed in any::<u64>()) {
        let p = small_problem(kind);
        let u = random_state(&p, seed, 1.0);
        let du = newton_step(&p, &u).unwrap();
        let jdu = p.jacobian(&u).unwrap().apply(&du);
        let f = p.residual(&u).unwrap();
        let defect: Vec<f64> = jdu.iter().zip(&f).map(|(a, b)| a + b).collect();
        prop_assert!(linf(&defect) <= 1e-9 * (1.0 + linf(&f)));
    }

    #[test]
    fn losses_are_nonnegative_and_vanish_at_labels(kind in 0usize..4, seed in any::<u64>()) {
        let p = small_problem(kind);
        let inputs: Vec<Vec<f64>> = (0..3).map(|k| random_state(&p, seed ^ k, 0.5)).collect();
        let steps: Vec<Vec<f64>> = inputs.iter().map(|u| newton_step(&p, u).unwrap()).collect();
        let exact = newtonop::neural::stack_rows(&steps).unwrap();
        let noise = Array2::from_shape_fn(exact.dim(), |(i, j)| ((i * 31 + j) as f64).sin());
        let off = &exact + &noise;
        prop_assert_eq!(mse_of_outputs(exact.view(), &steps), 0.0);
        prop_assert!(mse_of_outputs(off.view(), &steps) > 0.0);
        let scale = inputs.iter().map(|u| linf(&p.residual(u).unwrap())).fold(1.0f64, f64::max);
        prop_assert!(newton_loss_of_outputs(&p, &inputs, exact.view()).unwrap() <= 1e-18 * scale * scale);
        prop_assert!(newton_loss_of_outputs(&p, &inputs, off.view()).unwrap() > 0.0);
    }

    #[test]
    fn pod_modes_are_orthonormal_in_the_grid_inner_product(n in 4usize..10, count in 6usize..20, seed in any::<u64>()) {
        let grid = newtonop::grid::Grid::square(n);
        let mut rng = Rng::seed_from_u64(seed);
        let samples: Vec<Vec<f64>> = (0..count)
            .map(|_| newtonop::datagen::spectral_gaussian_field(&mut rng, &grid, 1.0, 4, 1.0).unwrap().into_values())
            .collect();
        let pod = compute_pod_basis(grid, 1, &samples, 3).unwrap();
        let gram = pod.modes.t().dot(&pod.modes) * grid.cell_volume();
        for ((i, j), v) in gram.indexed_iter() {
            let target = if i == j { 1.0 } else { 0.0 };
            prop_assert!((v - target).abs() <= 1e-8);
        }
        prop_assert!(pod.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn adam_with_zero_gradient_and_no_decay_is_a_noop(n in 1usize..50, steps in 1usize..20, seed in any::<u64>()) {
        let mut rng = Rng::seed_from_u64(seed);
        let start: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let mut params = start.clone();
        let mut adam = Adam::new(n, 1e-2, 0.0);
        for _ in 0..steps {
            adam.update(&mut params, &vec![0.0; n]).unwrap();
        }
        prop_assert_eq!(params, start);
    }

    #[test]
    fn forward_pass_is_finite(width in 1usize..30, depth in 1usize..4, rank in 1usize..20, seed in any::<u64>(), scale in 0.0f64..1e3) {
        let arch = ArchConfig { width, depth, trunk_depth: depth, rank, ..ArchConfig::default() };
        let mut rng = Rng::seed_from_u64(seed);
        let net = DeepONet::with_mlp_trunk(8, 2, 1, &arch, &mut rng).unwrap();
        let sensors = Array2::from_shape_fn((3, 8), |_| scale * rng.uniform(-1.0, 1.0));
        let coords = grid_coords(&newtonop::grid::Grid::square(4));
        let out = net.predict(sensors.view(), coords.view()).unwrap();
        prop_assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn checkpoint_round_trips(seed in any::<u64>(), train_bias in any::<bool>()) {
        let arch = ArchConfig { width: 5, rank: 4, train_bias, ..ArchConfig::default() };
        let net = DeepONet::with_mlp_trunk(6, 1, 2, &arch, &mut Rng::seed_from_u64(seed)).unwrap();
        let mut adam = Adam::new(net.n_params(), 1e-3, 1e-6);
        let mut params = net.params();
        let grads: Vec<f64> = (0..params.len()).map(|i| (i as f64).cos()).collect();
        adam.update(&mut params, &grads).unwrap();
        let ck = Checkpoint { model: net, adam: Some(adam) };
        prop_assert_eq!(Checkpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap(), ck);
    }
}

proptest! {
    #![proptest_config(cfg(12))]

    #[test]
    fn loss_gradients_match_finite_differences(seed in any::<u64>(), newton in any::<bool>()) {
        let p = ProblemSpec::Example1d { n: 7 }.build().unwrap();
        let inputs: Vec<Vec<f64>> = (0..3).map(|k| random_state(&p, seed.wrapping_add(k), 1.0)).collect();
        let labels: Vec<Vec<f64>> = inputs.iter().map(|u| newton_step(&p, u).unwrap()).collect();
        let batch = Samples::new(&p, 1, inputs, Some(labels)).unwrap();
        let arch = ArchConfig { width: 6, rank: 5, ..ArchConfig::default() };
        let net = DeepONet::with_mlp_trunk(7, 1, 1, &arch, &mut Rng::seed_from_u64(seed)).unwrap();
        let coords = model_coords(&net, &p).unwrap();
        let loss = |m: &DeepONet| if newton {
            newton_loss(m, &p, coords.view(), &batch).unwrap()
        } else {
            mse_loss(m, coords.view(), &batch).unwrap()
        };
        let grad = loss(&net).1;
        let base = net.params();
        let mut idx: Vec<usize> = (0..base.len()).collect();
        Rng::seed_from_u64(seed ^ 0x5eed).shuffle(&mut idx);
        for &i in idx.iter().take(15) {
            let at = |d: f64| {
                let mut q = base.clone();
                q[i] += d;
                let mut m = net.clone();
                m.set_params(&q).unwrap();
                loss(&m).0
            };
            let fd = (at(1e-6) - at(-1e-6)) / 2e-6;
            let err = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-6);
            prop_assert!(err <= 1e-5, "param {} grad {} fd {}", i, grad[i], fd);
        }
    }

    #[test]
    fn exact_oracle_matches_single_newton_steps(kind in 0usize..4, seed in any::<u64>()) {
        let p = small_problem(kind);
        let u0 = random_state(&p, seed, 0.5);
        let t = operator_iterate(&ExactNewton, &p, &u0, &IterateConfig { max_steps: 3, ..Default::default() }, &[]).unwrap();
        let mut u = u0;
        for k in 1..t.iterates.len() {
            let du = newton_step(&p, &u).unwrap();
            for (a, b) in u.iter_mut().zip(&du) {
                *a += b;
            }
            prop_assert_eq!(&t.iterates[k], &u);
        }
    }

    #[test]
    fn zero_model_behaves_like_the_zero_oracle(kind in 0usize..3, seed in any::<u64>()) {
        let p = small_problem(kind);
        let arch = ArchConfig { width: 4, rank: 3, ..ArchConfig::default() };
        let net = DeepONet::with_mlp_trunk(p.unknowns(), p.grid().dim(), 1, &arch, &mut Rng::seed_from_u64(seed)).unwrap();
        let mut oracle = ModelOracle::new(net, &p).unwrap();
        let sizes = oracle.model.branch.sizes().to_vec();
        oracle.model.branch = Mlp::zeros(&sizes, false).unwrap();
        oracle.model.bias0 = 0.0;
        let u0 = random_state(&p, seed, 0.5);
        let model_steps = oracle.steps(&p, std::slice::from_ref(&u0)).unwrap();
        let zero_steps = ZeroStep.steps(&p, std::slice::from_ref(&u0)).unwrap();
        prop_assert_eq!(model_steps, zero_steps);
        let icfg = IterateConfig { max_steps: 2, ..Default::default() };
        let a = operator_iterate(&oracle, &p, &u0, &icfg, &[]).unwrap();
        let b = operator_iterate(&ZeroStep, &p, &u0, &icfg, &[]).unwrap();
        prop_assert_eq!(a.iterates, b.iterates);
    }

    #[test]
    fn hybrid_tail_switches_below_the_threshold(seed in any::<u64>()) {
        let p = small_problem(0);
        let u0 = random_state(&p, seed, 0.5);
        let icfg = IterateConfig { max_steps: 3, hybrid_tail: Some(f64::INFINITY), ..Default::default() };
        let hybrid = operator_iterate(&ZeroStep, &p, &u0, &icfg, &[]).unwrap();
        let exact = operator_iterate(&ExactNewton, &p, &u0, &IterateConfig { max_steps: 3, ..Default::default() }, &[]).unwrap();
        prop_assert_eq!(&hybrid.iterates, &exact.iterates);
        prop_assert!(hybrid.used_exact_newton[1..].iter().all(|&e| e));
    }

    #[test]
    fn dataset_round_trips(seed in any::<u64>(), depth in 1usize..4, stride in 1usize..3) {
        let spec = ProblemSpec::Convex2d { n: 7 };
        let cfg = DatasetConfig { count: 3, newton_depth: depth, seed, sensor_stride: stride, ..Default::default() };
        let ds = make_dataset(&spec, &[], &Recipe::spectral(), &cfg).unwrap();
        prop_assert_eq!(ds.len(), 3 * depth);
        let back = OperatorDataset::from_bytes(&ds.to_bytes().unwrap()).unwrap();
        prop_assert_eq!(&back.inputs, &ds.inputs);
        prop_assert_eq!(&back.labels, &ds.labels);
        prop_assert_eq!(&back.problem, &ds.problem);
        prop_assert_eq!(back.sensor_stride, ds.sensor_stride);
        prop_assert_eq!(back.seed, ds.seed);
    }

    #[test]
    fn converged_iterates_stay_put(kind in 0usize..3) {
        let p = small_problem(kind);
        let t = newtonop::newton::newton_solve(&p, &p.lift(), &NewtonConfig::default()).unwrap();
        prop_assume!(t.converged());
        let du = newton_step(&p, t.final_iterate()).unwrap();
        prop_assert!(linf(&du) <= 1e-8 * (1.0 + linf(t.final_iterate())));
    }
}
