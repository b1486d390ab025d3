use jsrcert::oracles::cap_measure_mc;
use jsrcert::sampling::{read_observations, write_observations};
use jsrcert::sampling::{sample_unit_sphere, simulate, stream_rng};
use jsrcert::{ModeSet, Provenance};
use proptest::prelude::*;

#[test]
fn mc_cap_measure_within_four_sigma() {
    let samples = 100_000;
    let mut rng = stream_rng(11, 0);
    for n in 2..=4 {
        for (k, eps) in [0.05, 0.1, 0.25].into_iter().enumerate() {
            let c = sample_unit_sphere(n, &mut rng);
            let frac = cap_measure_mc(&c, eps, samples, 100 + (n * 3 + k) as u64).unwrap();
            let band = 4.0 * (eps * (1.0 - eps) / samples as f64).sqrt();
            assert!((frac - eps).abs() <= band, "n={n} eps={eps} frac={frac}");
        }
    }
}

fn mode_set() -> impl Strategy<Value = ModeSet> {
    (2usize..=3, 1usize..=3).prop_flat_map(|(n, m)| {
        prop::collection::vec(prop::collection::vec(-1.5f64..1.5, n * n), m).prop_map(move |mats| {
            let rows: Vec<Vec<Vec<f64>>> = mats.iter().map(|v| v.chunks(n).map(|r| r.to_vec()).collect()).collect();
            ModeSet::from_rows(n, &rows).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn simulate_is_deterministic(modes in mode_set(), n_traj in 1usize..40, l in 1usize..4, seed in any::<u64>()) {
        let a = simulate(&modes, n_traj, l, seed).unwrap();
        let b = simulate(&modes, n_traj, l, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.provenance(), &Provenance::Simulated { generator: "ChaCha20".into(), seed });
    }

    #[test]
    fn simulated_endpoints_follow_hidden_modes(modes in mode_set(), l in 1usize..4, seed in any::<u64>()) {
        let obs = simulate(&modes, 8, l, seed).unwrap();
        for o in obs.observations() {
            let seq = o.hidden_modes.as_ref().unwrap();
            prop_assert_eq!(seq.len(), l);
            let x = nalgebra::DVector::from_column_slice(&o.x0);
            let y = modes.product(seq) * x;
            for (a, b) in y.iter().zip(&o.xl) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn csv_round_trip_is_exact(modes in mode_set(), n_traj in 1usize..20, l in 1usize..4, seed in any::<u64>()) {
        let obs = simulate(&modes, n_traj, l, seed).unwrap();
        let mut buf = Vec::new();
        write_observations(&obs, &mut buf).unwrap();
        let back = read_observations(buf.as_slice(), Provenance::Constructed).unwrap();
        prop_assert_eq!(back.len(), obs.len());
        for (a, b) in obs.observations().iter().zip(back.observations()) {
            prop_assert_eq!(&a.x0, &b.x0);
            prop_assert_eq!(&a.intermediate, &b.intermediate);
            prop_assert_eq!(&a.xl, &b.xl);
        }
    }
}
