use cotdre_core::exact_transport::primal_cot_lp;
use cotdre_core::solvers::{lambda_grid_dual, linspace_lambda, solve_dual_cot_gda, solve_scot_gda};
use cotdre_core::synthetic::{ar1_vol, example1, example2, random_instance, Ar1VolParams};
use cotdre_core::{CostSpec, DiscreteMeasure, GdaConfig, GeneratorSpec, ObjectiveSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn short(cfg: GdaConfig, iterations: usize, seed: u64) -> GdaConfig {
    GdaConfig {
        iterations,
        seed,
        ..cfg
    }
}

#[test]
fn every_iterate_bounds_the_primal() {
    for seed in 0..8 {
        let p = random_instance(2 + seed as usize % 3, 2, false, seed).unwrap();
        let primal = primal_cot_lp(&p.mu, &p.grid, &p.objective, &p.cost, p.eps)
            .unwrap()
            .value;
        let mut cfg = short(GdaConfig::volatility(), 200, seed);
        cfg.y_grid = Some(p.grid.clone());
        let r = solve_dual_cot_gda(&p.mu, &p.objective, &p.cost, p.eps, &cfg).unwrap();
        for (k, d) in r.dual.iter().enumerate() {
            assert!(*d >= primal - 1e-6, "seed {seed} iterate {k}: {d} < {primal}");
        }
    }
}

#[test]
fn test_functions_tighten_the_first_example() {
    let p = example1();
    let mut cfg = short(GdaConfig::volatility(), 2000, 0);
    cfg.y_grid = Some(p.grid.clone());
    let cot = solve_dual_cot_gda(&p.mu, &p.objective, &p.cost, p.eps, &cfg).unwrap();
    let ot = solve_dual_cot_gda(&p.mu, &p.objective, &p.cost, p.eps, &cfg.clone().ot_mode()).unwrap();
    let (grid, _) = lambda_grid_dual(
        &p.mu,
        &p.grid,
        &p.objective,
        &p.cost,
        p.eps,
        &linspace_lambda(20.0, 2001),
    )
    .unwrap();
    assert!((ot.final_dual - grid).abs() <= 0.05);
    assert!(cot.final_dual >= -1.0 - 1e-6 && cot.final_dual <= -0.2 + 0.05);
    assert!(cot.final_dual <= ot.final_dual - 0.1);
}

#[test]
fn clamped_dual_grows_at_least_linearly_in_the_payoff() {
    let mut per_unit = Vec::new();
    for k in [10.0, 100.0, 1000.0] {
        let p = example2(k).unwrap();
        let mut cfg = GdaConfig {
            h_clamp: (-0.5, 0.5),
            m_clamp: (-0.5, 0.5),
            ..short(GdaConfig::volatility(), 2000, 0)
        };
        cfg.y_grid = Some(p.grid.clone());
        let r = solve_dual_cot_gda(&p.mu, &p.objective, &p.cost, p.eps, &cfg).unwrap();
        per_unit.push(r.final_dual / k);
    }
    assert!(per_unit[0] > 0.1, "{per_unit:?}");
    assert!(per_unit.windows(2).all(|w| w[1] >= w[0]), "{per_unit:?}");
}

#[test]
fn generator_restriction_does_not_exceed_the_causal_dual() {
    for seed in 0..3 {
        let data = ar1_vol(30, 4, &Ar1VolParams::default(), seed).unwrap();
        let shape = data.shape();
        let gen = GeneratorSpec::new(shape, 4, 1e-4, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let mu = DiscreteMeasure::uniform(data);
        let f = ObjectiveSpec::default_linear_relu(shape);
        let cost = CostSpec::ScaledQuadratic { scale: 100.0 };
        let cfg = GdaConfig {
            batch: 30,
            quantize_batch: false,
            ..short(GdaConfig::volatility(), 2000, seed)
        };
        let scot = solve_scot_gda(&mu, &gen, &f, &cost, 0.3, &cfg).unwrap();
        let cot = solve_dual_cot_gda(&mu, &f, &cost, 0.3, &cfg).unwrap();
        assert!(
            scot.final_dual <= cot.final_dual + 0.1,
            "seed {seed}: {} vs {}",
            scot.final_dual,
            cot.final_dual
        );
    }
}
