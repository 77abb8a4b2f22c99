use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stackseek_core::game::{check_gradient_fd, check_monotonicity, check_pseudogradient_fd, check_strong_convexity};
use stackseek_core::scenarios::{
    build_energy_community, build_illustrative, build_monotone_testbed, check_convergence, EnergyConfig,
    IllustrativeConfig, Regime, SequenceGenerator, TestbedConfig,
};
use stackseek_core::vi::{project_polyhedron, solve_regularized, solve_vi};
use stackseek_core::zo::{schedule, time_scale_ratio, two_point_estimate};
use stackseek_core::{
    optimal_selection, DVector, EstimatorSign, RegionBuilder, ScheduleParams, SelectionFunction, TikhonovPathParams,
    ViSolveParams,
};

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_vec(xs.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_beats_every_grid_point(
        a0 in -1.0f64..1.0, a1 in -1.0f64..1.0, b in -0.5f64..1.0,
        z0 in -3.0f64..3.0, z1 in -3.0f64..3.0,
    ) {
        prop_assume!(a0.abs() + a1.abs() > 0.1);
        let region = RegionBuilder::uniform_box(2, -1.0, 1.0)
            .less_eq("cut", vec![(0, a0), (1, a1)], b)
            .build()
            .unwrap();
        let z = v(&[z0, z1]);
        let p = project_polyhedron(&z, &region, 1e-12).unwrap();
        prop_assert!(region.contains(&p, 1e-9));
        let d_star = (&z - &p).norm_squared();
        let step = 0.01;
        for i in 0..=200 {
            for j in 0..=200 {
                let g = v(&[-1.0 + i as f64 * step, -1.0 + j as f64 * step]);
                if a0 * g[0] + a1 * g[1] > b {
                    continue;
                }
                let d = (&z - &g).norm_squared();
                prop_assert!(d_star <= d + 1e-9);
                prop_assert!((&g - &p).norm_squared() <= d - d_star + 1e-8);
            }
        }
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive(
        a in prop::collection::vec(-5.0f64..5.0, 3),
        b in prop::collection::vec(-5.0f64..5.0, 3),
    ) {
        let region = RegionBuilder::uniform_box(3, -1.0, 2.0)
            .less_eq("sum", vec![(0, 1.0), (1, 1.0), (2, 1.0)], 1.5)
            .equal("tie", vec![(0, 1.0), (1, -1.0)], 0.25)
            .build()
            .unwrap();
        let (a, b) = (DVector::from_vec(a), DVector::from_vec(b));
        let pa = project_polyhedron(&a, &region, 1e-13).unwrap();
        let pb = project_polyhedron(&b, &region, 1e-13).unwrap();
        let paa = project_polyhedron(&pa, &region, 1e-13).unwrap();
        prop_assert!((&paa - &pa).amax() < 1e-9);
        prop_assert!((&pa - &pb).norm() <= (&a - &b).norm() + 1e-9);
    }

    #[test]
    fn tikhonov_error_bound(y in -3.0f64..3.0, log_beta in -3.0f64..0.0) {
        let beta = 10f64.powf(log_beta);
        let t = build_monotone_testbed(TestbedConfig::default()).unwrap();
        let p = t.problem();
        let yv = v(&[y]);
        let params = ViSolveParams::default().with_tol((beta * beta * 1e-4).min(1e-10)).with_max_iterations(5_000_000);
        let xb = solve_regularized(p.game(), p.phi(), beta, &yv, &params).unwrap().solution;
        // Minimum-norm point of the line x1 - x2 = y.
        let x_star = v(&[y / 2.0, -y / 2.0]);
        // grad phi(x*) = x* and mu = 1.
        let bound = beta * x_star.norm();
        prop_assert!((&xb - &x_star).norm() <= bound + 1e-9);
        prop_assert!((xb[0] - y / (2.0 + beta)).abs() < 1e-6);
    }

    #[test]
    fn strongly_monotone_solution_is_unique(
        y in -2.0f64..2.0, s in 0.1f64..2.0, seed in 0u64..1000,
    ) {
        use rand::Rng;
        let t = build_monotone_testbed(TestbedConfig { shift: s, ..Default::default() }).unwrap();
        let game = t.problem().game();
        let yv = v(&[y]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let expected = y / (2.0 + s);
        for _ in 0..2 {
            let x0 = DVector::from_fn(2, |_, _| rng.random_range(-50.0..50.0));
            let sol = solve_vi(game, &yv, &ViSolveParams::default().with_tol(1e-10).with_warm_start(x0)).unwrap();
            prop_assert!((sol.solution[0] - expected).abs() < 1e-7);
            prop_assert!((sol.solution[1] + expected).abs() < 1e-7);
        }
    }

    #[test]
    fn smoothed_estimator_bias_is_bounded(y in -5.0f64..5.0, delta in 1e-3f64..0.5) {
        // With m = 1 the direction is ±1, so the expectation is an exact
        // two-term average. For J = sin the bias is at most δ·L·m/2 with L = 1.
        let j = |t: f64| t.sin();
        let up = two_point_estimate(j(y), j(y + delta), delta, &v(&[1.0]), EstimatorSign::Descent)[0];
        let down = two_point_estimate(j(y), j(y - delta), delta, &v(&[-1.0]), EstimatorSign::Descent)[0];
        let mean = 0.5 * (up + down);
        prop_assert!((mean - y.cos()).abs() <= delta / 2.0);
        let flipped = two_point_estimate(j(y), j(y + delta), delta, &v(&[1.0]), EstimatorSign::Ascent)[0];
        prop_assert_eq!(flipped, -up);
    }

    #[test]
    fn inexact_gradient_holds_x1_fixed(y in -1.0f64..3.0, x1 in -2.0f64..2.0, eps in 0.2f64..2.0) {
        let s = build_illustrative(IllustrativeConfig { epsilon: eps, ..Default::default() }).unwrap();
        let j = |t: f64| t * t + t * (x1 - (t + eps) * x1);
        let h = 1e-5;
        let fd = (j(y + h) - j(y - h)) / (2.0 * h);
        prop_assert!((s.inexact_gradient(y, x1) - fd).abs() < 1e-7);
    }

    #[test]
    fn converged_leader_implies_converged_follower(
        c in 0.1f64..0.9, d in 0.1f64..0.9, eta in 0.01f64..0.2, cyc in any::<bool>(),
    ) {
        let s = build_illustrative(IllustrativeConfig::default()).unwrap();
        let gen = if cyc { SequenceGenerator::Cycle(vec![c, d]) } else { SequenceGenerator::Constant(c) };
        for regime in [Regime::Oscillating(gen), Regime::Inexact, Regime::Exact] {
            let t = s.run_regime(&regime, eta, 400, 0.5).unwrap();
            if t.fault.is_none() {
                prop_assert!(check_convergence(&t).unwrap().consistent);
            }
        }
    }

    #[test]
    fn weighted_anchor_gradient_matches_fd(w in prop::collection::vec(0.1f64..5.0, 4), c in -2.0f64..2.0) {
        let phi = SelectionFunction::weighted_anchor(DVector::from_vec(w.clone()), DVector::from_element(4, c)).unwrap();
        let value = |x: &DVector<f64>| phi.value(x).unwrap();
        let grad = |x: &DVector<f64>| phi.gradient(x).unwrap();
        let lo = DVector::from_element(4, -3.0);
        let hi = DVector::from_element(4, 3.0);
        prop_assert!(check_gradient_fd(&value, &grad, &lo, &hi, 20, 1).unwrap().passed);
        let mu = 2.0 * w.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!((phi.modulus() - mu).abs() < 1e-12);
        prop_assert!(check_strong_convexity(&phi, mu, 200, 2).unwrap().passed);
    }
}

#[test]
fn selection_path_gaps_shrink_toward_min_norm_point() {
    let t = build_monotone_testbed(TestbedConfig::default()).unwrap();
    let p = t.problem();
    for y in [-2.0, 0.5, 3.0] {
        let path = optimal_selection(p.game(), p.phi(), &v(&[y]), &TikhonovPathParams::default()).unwrap();
        for w in path.betas.windows(2) {
            assert!((w[1] / w[0] - 0.5).abs() < 1e-15);
        }
        for w in path.gaps.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-6) + 1e-12, "gaps {:?}", path.gaps);
        }
        // x_β = y/(2+β) per coordinate, so the distance to y/2 is |y|β/(2(2+β))·√2.
        let beta = path.beta_reached();
        let predicted = y.abs() * beta / (2.0 * (2.0 + beta)) * 2f64.sqrt();
        let err = (&path.solution - v(&[y / 2.0, -y / 2.0])).norm();
        assert!((err - predicted).abs() < 1e-7, "err {err}, predicted {predicted}");
    }
}

#[test]
fn schedules_decay_at_their_rates() {
    let p = ScheduleParams::new(0.3, 0.8, 2.0, 0.75, 4).unwrap();
    for k in [0usize, 1, 10, 999] {
        let s = schedule(k, &p);
        let t = (k + 1) as f64;
        assert!((s.eta - 0.3 / (t.sqrt() * 4.0)).abs() < 1e-15);
        assert!((s.delta - 0.8 / (t.powf(0.25) * 2.0)).abs() < 1e-15);
        assert!((s.beta - 2.0 * t.powf(-0.75)).abs() < 1e-15);
    }
}

#[test]
fn time_scale_ratio_decreases_and_matches_direct_sums() {
    for alpha in [0.6, 0.75, 1.0] {
        let p = ScheduleParams::new(1.0, 1.0, 1.0, alpha, 1).unwrap();
        let direct = |horizon: usize| {
            let (mut num, mut den) = (0.0, 0.0);
            for k in 1..=horizon {
                let t = k as f64;
                num += t.powf(-2.0 * alpha) * t.powf(-0.5) * t.powf(0.5);
                den += t.powf(-0.5);
            }
            num / den
        };
        let mut prev = f64::INFINITY;
        for horizon in [10, 100, 1000, 10_000] {
            let r = time_scale_ratio(&p, horizon);
            assert!((r - direct(horizon)).abs() < 1e-12 * r.max(1.0));
            assert!(r < prev);
            prev = r;
        }
    }
}

#[test]
fn cycle_update_is_affine_in_y() {
    let s = build_illustrative(IllustrativeConfig::default()).unwrap();
    let t = s
        .run_regime(
            &Regime::Oscillating(SequenceGenerator::Cycle(vec![0.5, 1.5])),
            0.1,
            50,
            1.0,
        )
        .unwrap();
    assert!(t.fault.is_none());
    for w in t.records.windows(2) {
        // y' = y - η(2y(1 - x1) + x1(1 - ε)) with η = 0.1, ε = 1.5.
        let (y, x1) = (w[0].y, w[0].x[0]);
        let expected = if x1 == 0.5 { 0.9 * y + 0.025 } else { 1.1 * y + 0.075 };
        assert!((w[1].y - expected).abs() < 1e-12);
    }
}

#[test]
fn energy_game_is_monotone_at_several_prices() {
    let e = build_energy_community(EnergyConfig::default()).unwrap();
    let game = e.problem().game();
    for y in [[0.0, 0.0], [0.5, 0.5], [1.0, 2.0], [2.0, 1.0], [3.0, 3.0]] {
        let y = v(&y);
        let mono = check_monotonicity(game, &y, 300, 11).unwrap();
        assert!(mono.passed, "min inner product {}", mono.min_inner);
        assert!(check_pseudogradient_fd(game, &y, 20, 12).unwrap().passed);
    }
}

#[test]
fn energy_equilibrium_balances_and_is_reciprocal() {
    let e = build_energy_community(EnergyConfig::default()).unwrap();
    let p = e.problem();
    for y in [[0.5, 0.5], [2.0, 0.2]] {
        let x = solve_regularized(
            p.game(),
            p.phi(),
            1e-2,
            &v(&y),
            &ViSolveParams::default().with_tol(1e-9),
        )
        .unwrap()
        .solution;
        for s in e.supply_surplus(&x) {
            assert!(s.abs() < 1e-6, "surplus {s}");
        }
        assert!(e.reciprocity_gap(&x) < 1e-6);
        assert!(p.game().region().contains(&x, 1e-6));
    }
}

#[test]
fn testbed_leader_cost_fd_matches_closed_form() {
    let t = build_monotone_testbed(TestbedConfig {
        pairs: 2,
        ..Default::default()
    })
    .unwrap();
    let value = |y: &DVector<f64>| t.induced_objective(y).unwrap();
    let grad = |y: &DVector<f64>| t.induced_gradient(y).unwrap();
    let lo = DVector::from_element(2, -4.0);
    let hi = DVector::from_element(2, 4.0);
    assert!(check_gradient_fd(&value, &grad, &lo, &hi, 50, 3).unwrap().passed);
}

#[test]
fn exact_regime_at_small_epsilon_depends_on_the_induced_map() {
    let stated = build_illustrative(IllustrativeConfig {
        epsilon: 0.1,
        induced_map: stackseek_core::scenarios::InducedMap::Unshifted,
        ..Default::default()
    })
    .unwrap();
    let (y_star, _) = stated.grid_minimizer(-0.1 + 1e-4, 5.0, 1e-4).unwrap();
    let t = stated.run_regime(&Regime::Exact, 0.1, 5000, 1.0).unwrap();
    assert!(t.fault.is_none());
    assert!((t.final_y - y_star).abs() <= 1e-2, "y_K = {}, y* = {y_star}", t.final_y);

    // With x1 = 1/(1 + 100(y+ε)²) the induced cost keeps falling as y + ε → 0,
    // so the grid minimiser is the lower grid edge and the iteration leaves the
    // domain instead of converging.
    let derived = build_illustrative(IllustrativeConfig {
        epsilon: 0.1,
        ..Default::default()
    })
    .unwrap();
    let (y_edge, _) = derived.grid_minimizer(-0.1 + 1e-4, 5.0, 1e-4).unwrap();
    assert!((y_edge - (-0.1 + 1e-4)).abs() < 1e-12);
    let t = derived.run_regime(&Regime::Exact, 0.1, 5000, 1.0).unwrap();
    assert!(t.fault.unwrap().contains("must be positive"));
    assert!(t.records.len() < 5000);
}
