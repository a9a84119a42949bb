use fac_core::analysis::{convergence_point, entropy_brute_force, entropy_delta_closed_form};
use fac_core::density::{gate_decision, rde, GateConfig, RewardLedger};
use fac_core::learner::{Mlp, OutputActivation};
use fac_core::linalg::{find_important_dimensions, qr_column_pivot, Matrix};
use fac_core::partition::{AbstractStateId, PartitionSpec};
use fac_core::replay::{FrugalBuffer, ReplayBuffer, Transition};
use fac_oracles::{
    convergence_point_by_suffix_scan, duplicate_mass_function, nearest_center_index, rde_by_quadrature,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn matrix_strategy() -> impl Strategy<Value = Matrix> {
    (2usize..12, 1usize..6).prop_flat_map(|(n, p)| {
        prop::collection::vec(-10.0f64..10.0, n * p).prop_map(move |d| Matrix::new(n, p, d).unwrap())
    })
}

fn rollout_strategy() -> impl Strategy<Value = Matrix> {
    (8usize..40, 2usize..6).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(-1.0f64..1.0, n * p),
            prop::collection::vec(0.01f64..5.0, p),
        )
            .prop_map(move |(d, scales)| {
                let data = d.iter().enumerate().map(|(i, v)| v * scales[i % p]).collect();
                Matrix::new(n, p, data).unwrap()
            })
    })
}

fn cell() -> AbstractStateId {
    AbstractStateId(vec![0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn qr_reconstructs_permuted_input(a in matrix_strategy()) {
        let f = qr_column_pivot(&a).unwrap();
        let qr = f.q.matmul(&f.r).unwrap();
        let ap = a.permute_columns(&f.perm);
        let scale = a.max_abs().max(1.0);
        for (x, y) in qr.data().iter().zip(ap.data()) {
            prop_assert!((x - y).abs() <= 1e-9 * scale);
        }
        let qtq = f.q.transpose().matmul(&f.q).unwrap();
        let eye = Matrix::identity(a.rows());
        for (x, y) in qtq.data().iter().zip(eye.data()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        for i in 0..f.r.rows() {
            for j in 0..i.min(f.r.cols()) {
                prop_assert_eq!(f.r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn pivot_magnitudes_do_not_increase(a in matrix_strategy()) {
        let m = qr_column_pivot(&a).unwrap().pivot_magnitudes();
        for w in m.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn raising_nu_keeps_a_prefix(omega in rollout_strategy(), lo in 0.05f64..0.5, gap in 0.0f64..0.45) {
        let small = find_important_dimensions(&omega, lo).unwrap();
        let large = find_important_dimensions(&omega, lo + gap).unwrap();
        prop_assert!(large.len() <= small.len());
        prop_assert_eq!(&small.kappa[..large.len()], &large.kappa[..]);
    }

    #[test]
    fn selection_ignores_global_rescaling(omega in rollout_strategy(), c in 0.01f64..100.0) {
        let scaled = Matrix::new(omega.rows(), omega.cols(), omega.data().iter().map(|v| v * c).collect()).unwrap();
        let a = find_important_dimensions(&omega, 0.5).unwrap();
        let b = find_important_dimensions(&scaled, 0.5).unwrap();
        // Ratios sitting exactly at the threshold may flip under rounding.
        let m = qr_column_pivot(&omega.center_columns()).unwrap().pivot_magnitudes();
        if m.iter().all(|&x| (x / m[0] - 0.5).abs() > 1e-9) {
            prop_assert_eq!(a.kappa, b.kappa);
        }
    }

    #[test]
    fn grid_index_is_nearest_center(
        lower in -50.0f64..50.0,
        span in 0.1f64..100.0,
        cells in 1u32..200,
        t in 0.0f64..1.0,
    ) {
        let upper = lower + span;
        let x = lower + t * span;
        let spec = PartitionSpec::new(vec![0], vec![lower], vec![upper], vec![cells]).unwrap();
        let got = spec.map_state(&[x]).unwrap().0[0] as usize;
        let want = nearest_center_index(x, lower, upper, cells as usize);
        // A point within rounding distance of a boundary may legitimately go either way.
        let w = span / cells as f64;
        let frac = (x - lower) / w;
        if (frac - frac.round()).abs() > 1e-9 {
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn rde_matches_quadrature(
        rewards in prop::collection::vec(-3.0f64..3.0, 0..25),
        r in -3.5f64..3.5,
        h in 0.05f64..1.0,
        beta in 0.05f64..1.0,
    ) {
        let cfg = GateConfig { bandwidth: h, beta, ..Default::default() };
        let want = rde_by_quadrature(r, &rewards, h, beta);
        prop_assert!((rde(r, &rewards, &cfg) - want).abs() <= 1e-9);
        let mut ledger = RewardLedger::for_config(&cfg);
        for &x in &rewards {
            ledger.push(cell(), x);
        }
        prop_assert!((ledger.rde(&cell(), r, &cfg) - want).abs() <= 1e-9);
    }

    #[test]
    fn rde_is_a_probability(rewards in prop::collection::vec(-3.0f64..3.0, 1..25), r in -5.0f64..5.0) {
        let v = rde(r, &rewards, &GateConfig::default());
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn first_sample_always_accepted(r in -1e6f64..1e6, eps in 1e-6f64..1.0) {
        let cfg = GateConfig { epsilon: eps, ..Default::default() };
        let ledger = RewardLedger::for_config(&cfg);
        prop_assert!(gate_decision(r, &cell(), &ledger, &cfg).is_accept());
    }

    #[test]
    fn lone_exact_duplicate_rejected(r in -1e3f64..1e3, eps in 1e-6f64..1.0, h in 0.01f64..1.0) {
        let cfg = GateConfig { epsilon: eps, bandwidth: h, beta: h, ..Default::default() };
        let mut ledger = RewardLedger::for_config(&cfg);
        ledger.push(cell(), r);
        prop_assert!(!gate_decision(r, &cell(), &ledger, &cfg).is_accept());
    }

    #[test]
    fn ledger_tracks_buffer(
        ops in prop::collection::vec((0.0f64..1.0, -2.0f64..2.0), 1..400),
        capacity in 1usize..40,
    ) {
        let spec = PartitionSpec::new(vec![0], vec![0.0], vec![1.0], vec![4]).unwrap();
        let mut buf = FrugalBuffer::with_partition(capacity, 1, 1, GateConfig::default(), spec).unwrap();
        for (s, r) in ops {
            buf.insert(Transition { s: vec![s], a: vec![0.0], r, s_next: vec![s], done: false }).unwrap();
            prop_assert_eq!(buf.ledger().total(), buf.len());
            prop_assert!(buf.len() <= capacity);
        }
    }

    #[test]
    fn convergence_point_matches_suffix_scan(values in prop::collection::vec(-300.0f64..10.0, 1..40)) {
        let curve: Vec<(u64, f64)> = values.iter().enumerate().map(|(i, &v)| (i as u64 * 100 + 100, v)).collect();
        prop_assert_eq!(convergence_point(&curve).unwrap(), convergence_point_by_suffix_scan(&curve).unwrap());
    }

    #[test]
    fn entropy_gain_matches_and_grows(m in 3usize..2000, frac in 0.0f64..1.0) {
        let lambda = ((m - 2) as f64 * frac) as usize;
        let closed = entropy_delta_closed_form(m, lambda).unwrap();
        let uniform = entropy_brute_force(&vec![1.0 / m as f64; m]).unwrap();
        let dup = entropy_brute_force(&duplicate_mass_function(m, lambda)).unwrap();
        prop_assert!((closed - (uniform - dup)).abs() <= 1e-12);
        if lambda + 1 < m {
            prop_assert!(entropy_delta_closed_form(m, lambda + 1).unwrap() > closed);
        }
    }

    #[test]
    fn polyak_contracts(seed in any::<u64>(), tau in 0.001f64..0.999, steps in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let online = Mlp::new(&[3, 8, 2], OutputActivation::Identity, &mut rng).unwrap();
        let mut target = Mlp::new(&[3, 8, 2], OutputActivation::Identity, &mut rng).unwrap();
        let dist = |t: &Mlp| t.params().iter().zip(online.params()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let mut d = dist(&target);
        for _ in 0..steps {
            target.soft_update_from(&online, tau);
            let next = dist(&target);
            prop_assert!((next - (1.0 - tau) * d).abs() <= 1e-12 * (1.0 + d));
            d = next;
        }
        target.soft_update_from(&online, 1.0);
        prop_assert_eq!(target.params(), online.params());
    }
}
