use approx::assert_relative_eq;
use pas_slp::ao::{ao_solve, fixed_uniform_placement, random_placement, Problem, SolverSettings};
use pas_slp::channel::{effective_channels, ChannelSnapshot, WaveformParams};
use pas_slp::geometry::{validate_placement, SystemGeometry, Vec3};
use pas_slp::placement::{
    optimize_all_positions, pgd_solve, PgdConfig, SmoothingParams, SubproblemTerms,
};
use pas_slp::precoder::{
    build_ci_qp, ci_threshold_angle, recover_beam_matrix, solve_min_power, QpSolverConfig,
    SymbolVector,
};
use pas_slp::{db_to_linear, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn geometry(users: &[(f64, f64)], pas: usize) -> SystemGeometry {
    let p = WaveformParams::new(28e9, 1.4);
    let users = users.iter().map(|&(x, y)| Vec3::new(x, y, 0.0)).collect();
    SystemGeometry::with_uniform_waveguides(20.0, 5.0, 4, 20.0, p.wavelength / 2.0, pas, users)
        .unwrap()
}

fn users_strategy(k: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    proptest::collection::vec((0.0f64..20.0, 0.0f64..20.0), k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn channel_scaling_scales_power(users in users_strategy(3), idx in proptest::collection::vec(0usize..4, 3),
                                    seed in any::<u64>(), c in 0.2f64..5.0) {
        let g = geometry(&users, 2);
        let p = WaveformParams::new(28e9, 1.4);
        let x = random_placement(&g, seed).unwrap();
        let snap = effective_channels(&g, &x, &p);
        let rows: Vec<Vec<C64>> = (0..3).map(|k| snap.effective_row(k).iter().map(|h| h * c).collect()).collect();
        let scaled = ChannelSnapshot::from_effective_rows(&rows);
        let s = SymbolVector::from_indices(&idx, 4).unwrap();
        let gam = [db_to_linear(15.0); 3];
        let cfg = QpSolverConfig::default();
        let a = solve_min_power(&build_ci_qp(&snap, &s, &gam, 1e-11, ci_threshold_angle(4)).unwrap(), &cfg).unwrap();
        let b = solve_min_power(&build_ci_qp(&scaled, &s, &gam, 1e-11, ci_threshold_angle(4)).unwrap(), &cfg).unwrap();
        assert_relative_eq!(b.power * c * c, a.power, max_relative = 1e-7);
    }

    #[test]
    fn relaxing_a_target_never_costs_power(users in users_strategy(3), seed in any::<u64>(), k in 0usize..3) {
        let g = geometry(&users, 3);
        let p = WaveformParams::new(28e9, 1.4);
        let snap = effective_channels(&g, &fixed_uniform_placement(&g), &p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = SymbolVector::random(3, 4, &mut rng);
        let mut gam = vec![db_to_linear(18.0); 3];
        let cfg = QpSolverConfig::default();
        let tight = solve_min_power(&build_ci_qp(&snap, &s, &gam, 1e-11, ci_threshold_angle(4)).unwrap(), &cfg).unwrap();
        gam[k] = db_to_linear(12.0);
        let loose = solve_min_power(&build_ci_qp(&snap, &s, &gam, 1e-11, ci_threshold_angle(4)).unwrap(), &cfg).unwrap();
        prop_assert!(loose.power <= tight.power * (1.0 + 1e-9));
    }

    #[test]
    fn placement_update_stays_valid(users in users_strategy(4), seed in any::<u64>(), pas in 1usize..6) {
        let g = geometry(&users, pas);
        let p = WaveformParams::new(28e9, 1.4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = SymbolVector::random(4, 4, &mut rng);
        let x0 = random_placement(&g, seed).unwrap();
        let problem = Problem { geom: &g, params: &p, symbols: &s, gammas: &[db_to_linear(14.0); 4], noise_power: 1e-11 };
        let sol = problem.solve_at(&x0, &QpSolverConfig::default()).unwrap();
        let w = recover_beam_matrix(&sol.x_opt, &s);
        let x1 = optimize_all_positions(&g, &x0, &w, &s, &p, 1.0, &SmoothingParams::default(), &PgdConfig::default()).unwrap();
        prop_assert!(validate_placement(&g, &x1).is_ok());
    }
}

#[test]
fn pgd_never_leaves_its_region() {
    let p = WaveformParams::new(28e9, 1.4);
    let g = geometry(&[(2.0, 3.0), (17.0, 9.0)], 4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = SymbolVector::random(2, 4, &mut rng);
    let problem = Problem {
        geom: &g,
        params: &p,
        symbols: &s,
        gammas: &[100.0; 2],
        noise_power: 1e-11,
    };
    let x0 = fixed_uniform_placement(&g);
    let sol = problem.solve_at(&x0, &QpSolverConfig::default()).unwrap();
    let w = recover_beam_matrix(&sol.x_opt, &s);
    let regions = pas_slp::geometry::initial_regions(&g).unwrap();
    for n in 0..4 {
        let t = SubproblemTerms::for_waveguide(&g, n, &w, &s, &p, 1.0);
        for r in &regions {
            let eps = SmoothingParams::default().epsilon_for(&t, r.midpoint());
            let out = pgd_solve(&t, *r, eps, &PgdConfig::default(), r.midpoint());
            assert!(r.contains(out.x));
            assert!(out.values.windows(2).all(|v| v[1] <= v[0]));
        }
    }
}

#[test]
fn ao_improves_on_its_start_for_most_scenarios() {
    let p = WaveformParams::new(28e9, 1.4);
    let mut improved = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let users: Vec<(f64, f64)> = (0..4)
            .map(|_| {
                (
                    rand::Rng::gen_range(&mut rng, 0.0..20.0),
                    rand::Rng::gen_range(&mut rng, 0.0..20.0),
                )
            })
            .collect();
        let g = geometry(&users, 3);
        let s = SymbolVector::random(4, 4, &mut rng);
        let problem = Problem {
            geom: &g,
            params: &p,
            symbols: &s,
            gammas: &[db_to_linear(16.0); 4],
            noise_power: 1e-11,
        };
        let out = ao_solve(
            &problem,
            &fixed_uniform_placement(&g),
            &SolverSettings::default(),
        )
        .unwrap();
        if out.solution.power < out.trace.initial_power {
            improved += 1;
        }
    }
    assert!(improved >= 8, "only {improved}/10 scenarios improved");
}
