use approx::assert_relative_eq;
use proptest::prelude::*;

use lightlike::gates::{build_gate, check_dual_unitary, Arrangement, GateSpec, Model, ModelParams, Position};
use lightlike::levelstats::{histogram, ks_two_sample};
use lightlike::llg::ReplicaVector;
use lightlike::otoc::{otoc_bruteforce, otoc_llg_left, otoc_llg_right, to_wtau, to_xt};
use lightlike::spectral::tail_fit;

fn model() -> impl Strategy<Value = Model> {
    prop::sample::select(Model::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gates_are_unitary(m in model(), seed in any::<u64>(), layer in -20i64..20, site in -20i64..20) {
        let spec = GateSpec::random(m, 2, seed);
        let u = build_gate(&spec, Position::new(layer, site)).unwrap();
        prop_assert!(u.unitarity_residual() < 1e-12);
    }

    #[test]
    fn dual_unitary_family_stays_dual_unitary(seed in any::<u64>(), az in -1.5f64..1.5) {
        let params = ModelParams { a: [0.0, 0.0, az], epsilon: 1.0 };
        let spec = GateSpec::new(Model::Du, 2).with_seed(seed).with_params(params);
        let u = build_gate(&spec, Position::new(0, 0)).unwrap();
        let (ok, residual) = check_dual_unitary(&u);
        prop_assert!(ok, "residual {residual}");
    }

    #[test]
    fn config_text_round_trips(
        m in model(),
        seed in any::<u64>(),
        ax in -3.0f64..3.0,
        eps in 0.0f64..4.0,
        random in any::<bool>(),
    ) {
        let arrangement = if random { Arrangement::SpatialTemporalRandom } else { Arrangement::Invariant };
        let params = ModelParams { a: [ax, 0.25, -0.5], epsilon: eps };
        let spec = GateSpec::new(m, 2).with_seed(seed).with_params(params).with_arrangement(arrangement);
        let back = GateSpec::from_config_str(&spec.to_config_string()).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn light_cone_coordinates_invert(w in 1usize..500, tau in 1usize..500) {
        let (x, t) = to_xt(w, tau);
        prop_assert_eq!(to_wtau(x, t), Some((w, tau)));
        prop_assert_eq!((t - x).rem_euclid(2), 0);
    }

    #[test]
    fn replica_vectors_round_trip_through_bytes(w in 1usize..3, seed in any::<u64>()) {
        let v = ReplicaVector::random_unit(w, 2, seed);
        let back = ReplicaVector::from_le_bytes(w, 2, &v.to_le_bytes()).unwrap();
        prop_assert_eq!(back.data, v.data);
    }

    #[test]
    fn ks_distance_is_a_symmetric_fraction(
        a in prop::collection::vec(0.0f64..5.0, 1..60),
        b in prop::collection::vec(0.0f64..5.0, 1..60),
    ) {
        let d = ks_two_sample(&a, &b);
        prop_assert!((0.0..=1.0).contains(&d));
        assert_relative_eq!(d, ks_two_sample(&b, &a), epsilon = 1e-15);
        prop_assert_eq!(ks_two_sample(&a, &a), 0.0);
    }

    #[test]
    fn histogram_mass_counts_samples_in_range(sample in prop::collection::vec(0.0f64..6.0, 1..200)) {
        let bins = histogram(&sample, 0.1, 4.0);
        let mass: f64 = bins.iter().map(|b| b.density * (b.right - b.left)).sum();
        let inside = sample.iter().filter(|s| **s < 4.0).count() as f64 / sample.len() as f64;
        assert_relative_eq!(mass, inside, epsilon = 1e-12);
    }

    #[test]
    fn tail_fit_recovers_exact_power_law(phi in 0.0f64..6.0, z in 0.3f64..0.99, c in -5.0f64..5.0) {
        let data: Vec<(f64, f64)> = (20..120)
            .map(|t| {
                let t = t as f64;
                (t, phi * t.ln() + t * z.ln() + c)
            })
            .collect();
        let fit = tail_fit(&data, data.len(), 1e-8).unwrap();
        assert_relative_eq!(fit.phi, phi, epsilon = 1e-7);
        assert_relative_eq!(fit.z2, z, max_relative = 1e-9);
        assert_relative_eq!(fit.constant, c, epsilon = 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn random_circuits_agree_across_methods(m in model(), seed in any::<u64>(), w in 1usize..=2) {
        let spec = GateSpec::random(m, 2, seed);
        let left = otoc_llg_left(&spec, w, 2).unwrap();
        for p in &left.points {
            let (x, t) = to_xt(w, p.tau);
            let bf = otoc_bruteforce(&spec, x, t as usize, None).unwrap();
            let right = otoc_llg_right(&spec, w, p.tau).unwrap();
            prop_assert!((p.value() - bf).norm() < 1e-9, "{m} w={w} tau={}", p.tau);
            prop_assert!((p.value() - right).norm() < 1e-9, "{m} w={w} tau={}", p.tau);
            prop_assert!(p.value().im.abs() < 1e-10);
        }
    }
}
