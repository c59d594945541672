use proptest::prelude::*;

use sntk_core::data::{gen_linear_teacher, gen_separated};
use sntk_core::ntk::{empirical_ntk, feature_matrix_z, limiting_ntk_quadrature, pair_activation_probability, pair_prob_matrix};
use sntk_core::numerics::{gaussian_sample, upper_tail};
use sntk_core::theory::{
    data_separation, error_dynamics_residual, flipping_prob_bound, flipping_prob_exact, generalization_bound,
    region_membership, RegionSpec,
};
use sntk_core::train::{train, ActiveSetIndex, StepPath, TrainConfig};
use sntk_core::{Dataset, InitScheme, ModelState, RngStream, SymMatrix};

fn instance(d: usize, n: usize, m: usize, bias: f64, seed: u64) -> (ModelState, Dataset) {
    let data = gen_linear_teacher(d, n, RngStream::new(seed, 50)).unwrap();
    (ModelState::init(&InitScheme::standard(bias, seed), m, d).unwrap(), data)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kernel_is_z_gram_and_psd(d in 1usize..8, n in 1usize..12, m in 1usize..200, bias in 0.0f64..2.0, seed in any::<u64>()) {
        let (model, data) = instance(d, n, m, bias, seed);
        let h = empirical_ntk(&model, &data).unwrap();
        let g = feature_matrix_z(&model, &data).unwrap().gram();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((h.get(i, j) - g.get(i, j)).abs() <= 1e-10);
            }
            let active = model.activation_mask(&data).unwrap().column_count(i) as f64 / m as f64;
            prop_assert!(h.get(i, i) <= 2.0 * active + 1e-12);
        }
        prop_assert!(h.smallest_eigenvalue(1e-13).unwrap() >= -1e-10);
    }

    #[test]
    fn sparse_and_dense_agree(d in 1usize..6, n in 1usize..16, m in 1usize..300, bias in 0.0f64..2.5, eta in 0.01f64..1.0, seed in any::<u64>()) {
        let (model, data) = instance(d, n, m, bias, seed);
        let cfg = TrainConfig::new(eta, 15);
        let dense = train(&model, &data, &cfg);
        let sparse = train(&model, &data, &cfg.with_path(StepPath::Sparse));
        match (dense, sparse) {
            (Ok((a, ta)), Ok((b, tb))) => {
                prop_assert_eq!(&a, &b);
                prop_assert_eq!(ta.loss_history, tb.loss_history);
                prop_assert!(ActiveSetIndex::build(&b, &data).unwrap().is_consistent(&b, &data).unwrap());
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "paths disagree: {:?} vs {:?}", a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn trace_bookkeeping(n in 1usize..10, m in 1usize..100, bias in 0.0f64..1.5, steps in 0usize..20, seed in any::<u64>()) {
        let (model, data) = instance(3, n, m, bias, seed);
        let (_, trace) = train(&model, &data, &TrainConfig::new(0.05, steps).with_flips()).unwrap();
        prop_assert_eq!(trace.loss_history.len(), steps + 1);
        prop_assert_eq!(trace.loss_history[0], model.loss(&data).unwrap());
        let flips = trace.flips.as_ref().unwrap();
        for w in flips.counts.windows(2) {
            prop_assert!(w[0].iter().zip(&w[1]).all(|(a, b)| a <= b));
        }
        for w in trace.movement.windows(2) {
            prop_assert!(w[1].rw_max >= w[0].rw_max && w[1].rb_max >= w[0].rb_max);
        }
        for counts in &trace.active_counts {
            for ((c, c0), set) in counts.iter().zip(&trace.active_counts[0]).zip(&flips.sets) {
                prop_assert!(*c as usize <= *c0 as usize + set.len());
            }
        }
    }

    #[test]
    fn pair_probability_monotone_and_bounded(c in -1.0f64..=1.0, dc in 0.0f64..0.5, bias in 0.0f64..4.0, db in 0.0f64..1.0) {
        let p = pair_activation_probability(c, bias).unwrap();
        prop_assert!(p >= 0.0 && p <= upper_tail(bias));
        let c2 = (c + dc).min(1.0);
        prop_assert!(pair_activation_probability(c2, bias).unwrap() >= p - 1e-15);
        prop_assert!(pair_activation_probability(c, bias + db).unwrap() <= p + 1e-15);
    }

    #[test]
    fn quadrature_kernel_is_exchange_symmetric(n in 2usize..8, bias in 0.0f64..2.0, seed in any::<u64>(), rot in 0usize..8) {
        let data = gen_linear_teacher(4, n, RngStream::new(seed, 1)).unwrap();
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let h = limiting_ntk_quadrature(&data, bias).unwrap();
        let hp = limiting_ntk_quadrature(&data.permuted(&perm).unwrap(), bias).unwrap();
        prop_assert_eq!(hp, h.permuted(&perm));
    }

    #[test]
    fn pair_prob_matrix_invariants(n in 1usize..8, bias in 0.0f64..3.0, seed in any::<u64>()) {
        let data = gen_linear_teacher(3, n, RngStream::new(seed, 2)).unwrap();
        let p = pair_prob_matrix(&data, bias).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert!(p.get(i, j) >= 0.0 && p.get(i, j) <= p.get(i, i));
                prop_assert_eq!(p.get(i, j), p.get(j, i));
            }
        }
    }

    #[test]
    fn nonnegative_vectors_are_in_region(n in 1usize..10, bias in 0.0f64..2.0, seed in any::<u64>(), a in prop::collection::vec(0.0f64..10.0, 10)) {
        let data = gen_linear_teacher(3, n, RngStream::new(seed, 3)).unwrap();
        let region = RegionSpec::new(pair_prob_matrix(&data, bias).unwrap()).unwrap();
        prop_assert!(region_membership(&a[..n], &region).unwrap());
    }

    #[test]
    fn flipping_bound_dominates_exact(bias in 0.0f64..3.0, frac in 0.0f64..1.0, split in 0.0f64..1.0) {
        let limit = if bias > 0.0 { (1.0 / bias).min(1.0) } else { 1.0 };
        let r = frac * limit;
        let (rw, rb) = (r * split, r * (1.0 - split));
        let exact = flipping_prob_exact(rw, rb, bias).unwrap();
        prop_assert!(exact <= flipping_prob_bound(rw, rb, bias, 1.32).unwrap() + 1e-16);
    }

    #[test]
    fn generalization_nonincreasing_in_bias(n in 1usize..6, b in 0.0f64..3.0, db in 0.0f64..1.0, seed in any::<u64>()) {
        let data = gen_linear_teacher(8, n, RngStream::new(seed, 4)).unwrap();
        let h = SymMatrix::from_fn(n, |i, j| if i == j { 1.0 } else { 0.1 });
        let lo = generalization_bound(&h, data.y(), b + db, n).unwrap();
        prop_assert!(lo <= generalization_bound(&h, data.y(), b, n).unwrap());
    }

    #[test]
    fn error_dynamics_vanish_without_steps(n in 1usize..8, m in 1usize..64, seed in any::<u64>()) {
        let data = gen_linear_teacher(3, n, RngStream::new(seed, 5)).unwrap();
        let model = ModelState::init(&InitScheme::symmetric(0.0, seed), m, 3).unwrap();
        let hinf = limiting_ntk_quadrature(&data, 0.0).unwrap();
        let (_, trace) = train(&model, &data, &TrainConfig::new(0.0, 5)).unwrap();
        let e = error_dynamics_residual(&trace, &hinf, 0.0, data.y()).unwrap();
        // e(k) reduces to f(0), zero up to the rounding of the mirrored sum.
        prop_assert!(e.iter().all(|&v| v <= 1e-12));
    }

    #[test]
    fn separated_output_meets_separation(n in 2usize..6, sep in 0.1f64..0.8, seed in any::<u64>()) {
        if let Ok(data) = gen_separated(12, n, sep, RngStream::new(seed, 6), 5_000) {
            prop_assert!(data_separation(&data).unwrap() >= sep);
        }
    }

    #[test]
    fn csv_round_trip(d in 1usize..6, n in 1usize..10, seed in any::<u64>()) {
        let data = gen_linear_teacher(d, n, RngStream::new(seed, 7)).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(&buf[..]).unwrap();
        prop_assert_eq!(back.inputs(), data.inputs());
        prop_assert_eq!(back.y(), data.y());
    }

    #[test]
    fn checkpoint_round_trip(m in 1usize..50, d in 1usize..6, bias in 0.0f64..3.0, seed in any::<u64>()) {
        let model = ModelState::init(&InitScheme::standard(bias, seed), m, d).unwrap();
        let mut buf = Vec::new();
        model.write_checkpoint(&mut buf).unwrap();
        prop_assert_eq!(ModelState::read_checkpoint(&mut &buf[..]).unwrap(), model);
    }

    #[test]
    fn gaussian_stream_prefix(seed in any::<u64>(), stream in any::<u64>(), k in 0usize..64) {
        let s = RngStream::new(seed, stream);
        let long = gaussian_sample(s, 64);
        prop_assert_eq!(&long[..k], &gaussian_sample(s, k)[..]);
    }

    #[test]
    fn jacobi_trace_and_norm_identities(n in 1usize..10, seed in any::<u64>()) {
        let v = gaussian_sample(RngStream::new(seed, 8), n * n);
        let a = SymMatrix::from_fn(n, |i, j| v[i * n + j] + v[j * n + i]);
        let eig = a.eigenvalues(1e-13).unwrap();
        let trace: f64 = (0..n).map(|i| a.get(i, i)).sum();
        prop_assert!((eig.iter().sum::<f64>() - trace).abs() <= 1e-9 * (1.0 + trace.abs()));
        let fro2: f64 = eig.iter().map(|e| e * e).sum();
        prop_assert!((fro2.sqrt() - a.frobenius_norm()).abs() <= 1e-9 * (1.0 + a.frobenius_norm()));
        prop_assert!(eig.windows(2).all(|w| w[0] <= w[1]));
    }
}
