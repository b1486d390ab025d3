use jsrcert::certifier::{assemble_constraints, feasibility_check, solve_gamma, solve_lambda};
use jsrcert::oracles::whitebox_gamma;
use jsrcert::sampling::simulate;
use jsrcert::{EndpointSet, ModeSet, SolveOptions};
use proptest::prelude::*;

fn modes2() -> impl Strategy<Value = ModeSet> {
    prop::collection::vec(prop::collection::vec(-1.5f64..1.5, 4), 1..=3).prop_map(|mats| {
        let rows: Vec<Vec<Vec<f64>>> = mats.iter().map(|v| v.chunks(2).map(|r| r.to_vec()).collect()).collect();
        ModeSet::from_rows(2, &rows).unwrap()
    })
}

fn endpoints(modes: &ModeSet, n: usize, seed: u64) -> EndpointSet {
    simulate(modes, n, 1, seed).unwrap().endpoints()
}

fn tol(opts: &SolveOptions, g: f64) -> f64 {
    2.0 * opts.bisection_rel_tol * g.max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn feasibility_monotone_in_gamma(modes in modes2(), seed in any::<u64>(), d in 1usize..=2, frac in 0.3f64..1.5) {
        let obs = endpoints(&modes, 30, seed);
        let opts = SolveOptions::default();
        let lambda = solve_lambda(&obs).unwrap();
        let g = frac * lambda.max(1e-3);
        let here = feasibility_check(&assemble_constraints(&obs, d, g).unwrap(), &opts).unwrap();
        if here.is_feasible() {
            for scale in [1.001, 1.1, 2.0] {
                let there = feasibility_check(&assemble_constraints(&obs, d, g * scale).unwrap(), &opts).unwrap();
                prop_assert!(there.is_feasible(), "feasible at {g} but not at {}", g * scale);
            }
        }
    }

    #[test]
    fn nested_sets_are_monotone(modes in modes2(), seed in any::<u64>(), keep in 5usize..25) {
        let opts = SolveOptions::default();
        let big = endpoints(&modes, 30, seed);
        let small = big.subset(&(0..keep).collect::<Vec<_>>());
        let gs = solve_gamma(&small, 1, &opts).unwrap().gamma_star;
        let gb = solve_gamma(&big, 1, &opts).unwrap().gamma_star;
        prop_assert!(gs <= gb + tol(&opts, gb), "{gs} > {gb}");
    }

    #[test]
    fn scaling_images_scales_gamma(modes in modes2(), seed in any::<u64>(), c in prop_oneof![-3.0f64..-0.2, 0.2f64..3.0]) {
        let opts = SolveOptions::default();
        let obs = endpoints(&modes, 25, seed);
        let g = solve_gamma(&obs, 1, &opts).unwrap().gamma_star;
        let gc = solve_gamma(&obs.scale_images(c), 1, &opts).unwrap().gamma_star;
        let expect = c.abs() * g;
        prop_assert!((gc - expect).abs() <= 4.0 * opts.bisection_rel_tol * expect.max(1e-12) + 1e-12, "{gc} vs {expect}");
    }

    #[test]
    fn lambda_is_largest_image(modes in modes2(), seed in any::<u64>()) {
        let obs = endpoints(&modes, 20, seed);
        let lambda = solve_lambda(&obs).unwrap();
        let max = obs.pairs().map(|(_, y)| y.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
        prop_assert!((lambda - max).abs() <= 1e-12 * max.max(1.0));
    }

    #[test]
    fn gamma_never_exceeds_lambda(modes in modes2(), seed in any::<u64>()) {
        let opts = SolveOptions::default();
        let obs = endpoints(&modes, 20, seed);
        let sol = solve_gamma(&obs, 1, &opts).unwrap();
        prop_assert!(sol.gamma_star <= sol.lambda_star * (1.0 + 1e-9) + 1e-12);
        prop_assert!(sol.candidate.kappa >= 1.0 - 1e-9);
    }
}

#[test]
fn sampled_below_whitebox() {
    let opts = SolveOptions::default();
    let modes = ModeSet::parrilo();
    let wb = whitebox_gamma(&modes, 1, 1, 360, &opts).unwrap().gamma;
    for seed in 0..5 {
        let g = solve_gamma(&endpoints(&modes, 200, seed), 1, &opts).unwrap().gamma_star;
        assert!(g <= wb + tol(&opts, wb), "seed {seed}: {g} > {wb}");
    }
}

#[test]
fn degree_one_path_is_the_quadratic_program() {
    // For d = 1 the lift is the identity, so the assembled rows are the
    // quadratic decrease constraints themselves.
    let obs = endpoints(&ModeSet::parrilo(), 50, 3);
    let sys = assemble_constraints(&obs, 1, 1.2).unwrap();
    for (i, (x, y)) in obs.pairs().enumerate() {
        let p = jsrcert::SymMatrix::from_fn(2, |a, b| if a == b { 1.0 + a as f64 } else { 0.3 });
        let direct = p.quad_form(y) - 1.2f64.powi(2) * p.quad_form(x);
        assert!((sys.violation(i, &p) - direct).abs() < 1e-12);
    }
}
