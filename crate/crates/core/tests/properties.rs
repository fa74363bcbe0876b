use dimprofile::capacity::{energy, equilibrium, kernel_value, KernelSpec, SolverOptions, WeightVector};
use dimprofile::mesh_count;
use dimprofile::pointcloud::{read_csv, write_csv, PointSet};
use dimprofile::projection::{project, sample_subspace};
use proptest::prelude::*;

fn cloud(max_dim: usize, max_len: usize) -> impl Strategy<Value = PointSet<f64>> {
    (1..=max_dim, 1..=max_len).prop_flat_map(|(n, len)| {
        prop::collection::vec(prop::collection::vec(-2.0f64..2.0, n), len)
            .prop_map(move |rows| PointSet::new(n, rows, "prop").unwrap())
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn kernel_is_bounded_and_decreasing_in_s(
        x in prop::collection::vec(-3.0f64..3.0, 3),
        r in 0.01f64..2.0,
        s in 0.1f64..3.0,
        ds in 0.0f64..2.0,
    ) {
        let lo = kernel_value(&KernelSpec::new(s, r).unwrap(), &x);
        let hi = kernel_value(&KernelSpec::new(s + ds, r).unwrap(), &x);
        prop_assert!(lo > 0.0 && lo <= 1.0);
        prop_assert!(hi <= lo * (1.0 + 1e-15));
        if dist(&x, &[0.0; 3]) <= r {
            prop_assert_eq!(lo, 1.0);
        }
    }

    #[test]
    fn kernel_is_decreasing_in_distance(t in 0.0f64..5.0, dt in 0.0f64..5.0, r in 0.01f64..2.0, s in 0.1f64..3.0) {
        let k = KernelSpec::new(s, r).unwrap();
        prop_assert!(kernel_value(&k, &[t + dt]) <= kernel_value(&k, &[t]));
    }

    #[test]
    fn halving_the_mesh_never_lowers_the_count(p in cloud(3, 200), r in 0.01f64..1.0) {
        let coarse = mesh_count(&p, r).unwrap().count;
        let fine = mesh_count(&p, r / 2.0).unwrap().count;
        prop_assert!(fine >= coarse);
        prop_assert!(fine <= p.len());
    }

    #[test]
    fn csv_round_trip_is_exact(p in cloud(4, 50)) {
        let mut buf = Vec::new();
        write_csv(&p, &mut buf).unwrap();
        let back: PointSet<f64> = read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.ambient_dim(), p.ambient_dim());
        prop_assert_eq!(back.coords(), p.coords());
        prop_assert_eq!(back.label(), p.label());
    }

    #[test]
    fn projections_do_not_expand_distances(p in cloud(4, 30), m in 1usize..4, seed in any::<u64>()) {
        let n = p.ambient_dim();
        prop_assume!(m <= n);
        let v = sample_subspace::<f64>(n, m, seed).unwrap();
        let q = project(&p, &v).unwrap();
        prop_assert_eq!(q.ambient_dim(), m);
        for i in 0..p.len() {
            for j in 0..i {
                prop_assert!(dist(q.point(i), q.point(j)) <= dist(p.point(i), p.point(j)) * (1.0 + 1e-12) + 1e-14);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn capacity_is_bracketed_by_one_and_the_mesh_count(p in cloud(3, 60), r in 0.02f64..1.0, s in 0.2f64..3.0) {
        let opts = SolverOptions::with_tol(1e-9);
        let eq = equilibrium(&p, &KernelSpec::new(s, r).unwrap(), &opts).unwrap();
        let count = mesh_count(&p, r).unwrap().count as f64;
        prop_assert!(eq.capacity >= 1.0 - 1e-12);
        prop_assert!(eq.capacity <= count * (1.0 + 2e-9));
    }

    #[test]
    fn capacity_grows_with_s_and_as_r_shrinks(p in cloud(2, 60), r in 0.02f64..1.0, s in 0.2f64..2.0, ds in 0.01f64..1.0) {
        let tol = 1e-9;
        let opts = SolverOptions::with_tol(tol);
        let base = equilibrium(&p, &KernelSpec::new(s, r).unwrap(), &opts).unwrap().capacity;
        let steeper = equilibrium(&p, &KernelSpec::new(s + ds, r).unwrap(), &opts).unwrap().capacity;
        let finer = equilibrium(&p, &KernelSpec::new(s, r / 2.0).unwrap(), &opts).unwrap().capacity;
        prop_assert!(base <= steeper * (1.0 + 2.0 * tol));
        prop_assert!(base <= finer * (1.0 + 2.0 * tol));
    }

    #[test]
    fn equilibrium_beats_uniform_weights(p in cloud(3, 60), r in 0.02f64..1.0, s in 0.2f64..3.0) {
        let k = KernelSpec::new(s, r).unwrap();
        let eq = equilibrium(&p, &k, &SolverOptions::with_tol(1e-9)).unwrap();
        let uniform = energy(&p, &WeightVector::uniform(p.len()), &k).unwrap();
        prop_assert!(eq.energy <= uniform * (1.0 + 1e-12));
        let recomputed = energy(&p, &eq.weights, &k).unwrap();
        prop_assert!((recomputed - eq.energy).abs() <= 1e-9 * eq.energy);
    }
}
