use iteforest_core::estimators::{export_tau, read_tau_file};
use iteforest_core::forest::{best_split, bootstrap_sample, BootstrapPlan};
use iteforest_core::ingest::{export_dataset, load_dataset};
use iteforest_core::rng;
use iteforest_core::simbench::{conditional_metrics, stratify_by_propensity, Replicate};
use iteforest_core::{Dataset, Forest, ForestSpec, Matrix, Mtry};
use proptest::prelude::*;

fn matrix(rows: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

prop_compose! {
    fn regression(max_n: usize, p: usize)(n in 4..max_n)(
        x in proptest::collection::vec(proptest::collection::vec(-5.0..5.0f64, p), n),
        y in proptest::collection::vec(-10.0..10.0f64, n),
    ) -> (Vec<Vec<f64>>, Vec<f64>) {
        (x, y)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bootstrap_counts_sum_to_n(n in 1usize..500, seed in any::<u64>()) {
        let counts = bootstrap_sample(n, &mut rng::stream(seed, &[]));
        prop_assert_eq!(counts.len(), n);
        prop_assert_eq!(counts.iter().map(|&c| c as usize).sum::<usize>(), n);
        prop_assert_eq!(BootstrapPlan::new(n, seed).counts(3), BootstrapPlan::new(n, seed).counts(3));
    }

    #[test]
    fn strata_partition_rows(p in proptest::collection::vec(0.0..1.0f64, 1..200), m in 1usize..30) {
        let s = stratify_by_propensity(&p, m);
        prop_assert_eq!(s.len(), p.len());
        prop_assert!(s.iter().all(|&k| k < m));
        let mut counts = vec![0usize; m];
        for &k in &s { counts[k] += 1; }
        if p.len() >= m {
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            prop_assert!(hi - lo <= 1);
        }
        // strata are ordered by propensity
        for i in 0..p.len() {
            for j in 0..p.len() {
                if p[i] < p[j] { prop_assert!(s[i] <= s[j]); }
            }
        }
    }

    #[test]
    fn metrics_match_double_sum_oracle(
        b in 1usize..6, m in 1usize..5, n in 4usize..41, seed in any::<u64>()
    ) {
        use rand::Rng;
        let mut r = rng::stream(seed, &[]);
        let reps: Vec<[Vec<f64>; 3]> = (0..b)
            .map(|_| {
                let e = (0..n).map(|_| r.random::<f64>()).collect();
                let tau = (0..n).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
                let hat = (0..n).map(|_| r.random::<f64>() * 3.0 - 1.5).collect();
                [hat, tau, e]
            })
            .collect();
        let views: Vec<Replicate> = reps
            .iter()
            .map(|[h, t, e]| Replicate { tau_hat: h, true_tau: t, propensity: e })
            .collect();
        let got = conditional_metrics(&views, m);
        for k in 0..m {
            let (mut hat, mut tau, mut sq, mut used) = (0.0, 0.0, 0.0, 0.0);
            for [h, t, e] in &reps {
                let members: Vec<usize> = (0..n).filter(|&i| stratify_by_propensity(e, m)[i] == k).collect();
                if members.is_empty() { continue; }
                let c = members.len() as f64;
                hat += members.iter().map(|&i| h[i]).sum::<f64>() / c;
                tau += members.iter().map(|&i| t[i]).sum::<f64>() / c;
                sq += members.iter().map(|&i| (h[i] - t[i]).powi(2)).sum::<f64>() / c;
                used += 1.0;
            }
            prop_assert!((got.bias[k] - (hat / used - tau / used)).abs() <= 1e-12);
            prop_assert!((got.rmse[k] - (sq / used).sqrt()).abs() <= 1e-12);
        }
    }

    #[test]
    fn best_split_gain_matches_brute_force((x, y) in regression(30, 3), nodesize in 1usize..4) {
        let m = matrix(&x);
        let rows: Vec<usize> = (0..y.len()).collect();
        let sse = |idx: &[usize]| {
            let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
            idx.iter().map(|&i| (y[i] - mean).powi(2)).sum::<f64>()
        };
        let parent = sse(&rows);
        let mut best: f64 = 0.0;
        for v in 0..3 {
            for row in &x {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][v] <= row[v]);
                if l.len() >= nodesize && r.len() >= nodesize {
                    best = best.max(parent - sse(&l) - sse(&r));
                }
            }
        }
        match best_split(&m, &y, &rows, &[0, 1, 2], nodesize) {
            Some(s) => prop_assert!((s.gain - best).abs() <= 1e-8 * (1.0 + best)),
            None => prop_assert!(best <= 1e-8 * (1.0 + parent)),
        }
    }

    #[test]
    fn predictions_stay_within_outcome_range((x, y) in regression(40, 3), seed in any::<u64>()) {
        let f = Forest::grow(matrix(&x), &y, &ForestSpec::new(10, Mtry::Count(2), 2, seed)).unwrap();
        let (lo, hi) = y.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        for row in &x {
            let p = f.predict(row).unwrap();
            prop_assert!(p >= lo - 1e-9 && p <= hi + 1e-9);
        }
    }

    #[test]
    fn oob_uses_exactly_the_out_of_bag_trees((x, y) in regression(30, 2), seed in any::<u64>()) {
        let m = matrix(&x);
        let f = Forest::grow(m.clone(), &y, &ForestSpec::new(25, Mtry::Third, 1, seed)).unwrap();
        for i in 0..y.len() {
            let contrib = f.oob_contributions(i);
            let oob_trees: Vec<usize> = (0..25).filter(|&t| f.trees()[t].inbag_counts()[i] == 0).collect();
            prop_assert_eq!(contrib.iter().map(|c| c.0).collect::<Vec<_>>(), oob_trees);
            for &(t, v) in &contrib {
                let tree = &f.trees()[t];
                prop_assert_eq!(v, tree.leaf_value(tree.leaf_of(&m.row(i))));
            }
        }
    }

    #[test]
    fn tau_file_round_trip(values in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..50)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tau.txt");
        export_tau(&p, &values).unwrap();
        let back = read_tau_file(&p).unwrap();
        prop_assert_eq!(values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), back.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn dataset_export_load_is_bit_exact(
        (x, y) in regression(20, 3),
        scale in prop_oneof![Just(1.0), Just(1e-200), Just(1e200)],
    ) {
        let n = y.len();
        let x: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
        let t: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let d = Dataset::new(matrix(&x), t, y).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let schema = export_dataset(&p, &d, "t", "y").unwrap();
        let back = load_dataset(&p, &schema).unwrap();
        for j in 0..3 {
            let a: Vec<u64> = d.x.column(j).iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.x.column(j).iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
        prop_assert_eq!(&d.y, &back.y);
    }
}
