//! Randomized invariants over the numeric core: binomial upper bounds,
//! score decomposition, tree routing and pruning, ranking factors, density
//! clustering, and population bounds.

use std::collections::BTreeMap;

use proptest::prelude::*;
use uwrap_core::aggregation::{root_bounds, subtype_bounds};
use uwrap_core::data_model::{CellTypeSpec, Event, Sample};
use uwrap_core::evaluation::brier_decomposition;
use uwrap_core::impact_model::{
    calibrate_tree, clopper_pearson_upper, fit_tree, prune_tree, TreeParams, UncertaintyEstimate,
};
use uwrap_core::quality_factors::{dbscan, percentile_factors, ClusterAssignment};

// (k, n) with 0 <= k <= n.
fn k_n() -> impl Strategy<Value = (u64, u64)> {
    (1u64..300).prop_flat_map(|n| (0..=n, Just(n)))
}

proptest! {
    #[test]
    fn upper_bound_dominates_the_error_rate((k, n) in k_n(), conf in 0.5f64..0.9995) {
        let u = clopper_pearson_upper(k, n, conf).unwrap();
        prop_assert!(u >= k as f64 / n as f64 - 1e-9);
        prop_assert!((0.0..=1.0).contains(&u));
    }

    #[test]
    fn upper_bound_is_monotone((k, n) in k_n(), conf in 0.5f64..0.99) {
        let u = clopper_pearson_upper(k, n, conf).unwrap();
        if k < n {
            let more_errors = clopper_pearson_upper(k + 1, n, conf).unwrap();
            prop_assert!(more_errors >= u - 1e-9);
        }
        let more_trials = clopper_pearson_upper(k, n + 10, conf).unwrap();
        prop_assert!(more_trials <= u + 1e-9);
        let stricter = clopper_pearson_upper(k, n, conf + 0.009).unwrap();
        prop_assert!(stricter >= u - 1e-9);
    }
}

fn brier_instance() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (prop::collection::vec(0.0f64..=1.0, 1..12), 1usize..300).prop_flat_map(|(levels, n)| {
        let m = levels.len();
        (
            prop::collection::vec(0..m, n).prop_map(move |idx| {
                idx.iter().map(|&i| levels[i]).collect::<Vec<f64>>()
            }),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

proptest! {
    #[test]
    fn score_decomposition_identity_holds((ps, wrong) in brier_instance()) {
        let r = brier_decomposition(&ps, &wrong).unwrap();
        prop_assert!((r.brier - (r.variance - r.resolution + r.unreliability)).abs() <= 1e-10);
        prop_assert!(r.resolution >= -1e-12 && r.resolution <= r.variance + 1e-12);
        prop_assert!(r.overconfidence >= 0.0 && r.overconfidence <= r.unreliability + 1e-12);
        prop_assert!(r.unspecificity >= -1e-12);
    }
}

// Factor rows plus per-row wrongness, sized consistently.
fn training_rows() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<bool>)> {
    (1usize..=3, 12usize..60).prop_flat_map(|(arity, n)| {
        (
            prop::collection::vec(prop::collection::vec(-50.0f64..50.0, arity), n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

// Like training rows, but with NaN and infinities allowed in the probes.
fn routing_case() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<bool>, Vec<Vec<f64>>)> {
    let component = prop_oneof![
        4 => -100.0f64..100.0,
        1 => Just(f64::NAN),
        1 => Just(f64::INFINITY),
        1 => Just(f64::NEG_INFINITY),
    ];
    (1usize..=3, 12usize..60).prop_flat_map(move |(arity, n)| {
        (
            prop::collection::vec(prop::collection::vec(-50.0f64..50.0, arity), n),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(prop::collection::vec(component.clone(), arity), 8),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_probe_routes_to_a_leaf((rows, wrong, probes) in routing_case()) {
        let params = TreeParams { max_depth: 4, min_samples_leaf: 3 };
        let tree = fit_tree(&rows, &wrong, &params).unwrap();
        for v in &probes {
            let leaf = tree.leaf_for(v).unwrap();
            prop_assert!(tree.leaves().any(|l| l.id == leaf.id));
        }
    }

    #[test]
    fn pruning_reaches_the_floor_or_a_single_root(
        (rows, wrong) in training_rows(),
        (crows, cwrong) in training_rows(),
        floor in 1usize..40,
    ) {
        let arity = rows[0].len();
        let params = TreeParams { max_depth: 4, min_samples_leaf: 3 };
        let tree = fit_tree(&rows, &wrong, &params).unwrap();

        // Reshape the calibration rows to the fitted arity.
        let crows: Vec<Vec<f64>> = crows
            .iter()
            .map(|r| (0..arity).map(|j| r[j % r.len()]).collect())
            .collect();
        let calibrated = calibrate_tree(&tree, &crows, &cwrong, 0.95).unwrap();
        let pruned = prune_tree(&calibrated, floor).unwrap();

        let leaves: Vec<_> = pruned.leaves().collect();
        if leaves.len() > 1 {
            prop_assert!(leaves.iter().all(|l| l.n_calib >= floor));
        }
        let n_total: usize = leaves.iter().map(|l| l.n_calib).sum();
        let k_total: usize = leaves.iter().map(|l| l.k_errors).sum();
        prop_assert_eq!(n_total, crows.len());
        prop_assert_eq!(k_total, cwrong.iter().filter(|&&w| w).count());
        for l in leaves {
            if l.n_calib >= floor {
                let u = l.uncertainty.unwrap();
                prop_assert!(u >= l.k_errors as f64 / l.n_calib as f64 - 1e-9);
            }
        }
    }
}

fn one_marker_sample(values: &[f64]) -> (Sample, CellTypeSpec) {
    let events = values
        .iter()
        .enumerate()
        .map(|(i, &v)| Event {
            sample_id: "s".into(),
            event_id: format!("e{i}"),
            markers: vec![v],
            labels: BTreeMap::new(),
            predictions: BTreeMap::new(),
        })
        .collect();
    let spec = CellTypeSpec { name: "T".into(), parent: None, gating_pairs: vec![(0, 0)] };
    (Sample { sample_id: "s".into(), events }, spec)
}

proptest! {
    #[test]
    fn mid_rank_percentiles_stay_inside_and_preserve_order(
        values in prop::collection::vec(-1e4f64..1e4, 1..150),
    ) {
        let (sample, spec) = one_marker_sample(&values);
        let rows = percentile_factors(&sample, &spec).unwrap();
        prop_assert_eq!(rows.len(), values.len());
        for r in &rows {
            prop_assert!(r[0] > 0.0 && r[0] < 1.0);
        }
        for i in 0..values.len() {
            for j in 0..values.len() {
                if values[i] < values[j] {
                    prop_assert!(rows[i][0] < rows[j][0]);
                } else if values[i] == values[j] {
                    prop_assert_eq!(rows[i][0], rows[j][0]);
                }
            }
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

// Reference clustering by definition: connected components of the "within
// eps" graph restricted to core points, then border points joining the
// lowest-numbered adjacent cluster.
fn closure_oracle(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<ClusterAssignment> {
    let n = points.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dist(&points[i], &points[j]) <= eps).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut cluster_of: Vec<Option<usize>> = vec![None; n];
    let mut next = 0usize;
    for i in 0..n {
        if !core[i] || cluster_of[i].is_some() {
            continue;
        }
        let id = next;
        next += 1;
        let mut stack = vec![i];
        cluster_of[i] = Some(id);
        while let Some(p) = stack.pop() {
            for &q in &neighbors[p] {
                if core[q] && cluster_of[q].is_none() {
                    cluster_of[q] = Some(id);
                    stack.push(q);
                }
            }
        }
    }
    (0..n)
        .map(|i| {
            if let Some(id) = cluster_of[i] {
                return ClusterAssignment::Cluster(id);
            }
            let claimed = neighbors[i]
                .iter()
                .filter(|&&j| core[j])
                .filter_map(|&j| cluster_of[j])
                .min();
            match claimed {
                Some(id) => ClusterAssignment::Cluster(id),
                None => ClusterAssignment::Noise,
            }
        })
        .collect()
}

// Half-integer coordinates so ties and duplicates show up often.
fn gridded_points() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(
        prop::collection::vec((-6i8..=6).prop_map(|c| c as f64 / 2.0), 2),
        0..60,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clustering_matches_the_reachability_closure(
        points in gridded_points(),
        eps in prop_oneof![Just(0.5f64), Just(1.0), Just(1.6)],
        min_pts in 1usize..6,
    ) {
        let got = dbscan(&points, eps, min_pts).unwrap();
        let want = closure_oracle(&points, eps, min_pts);
        prop_assert_eq!(got, want);
    }
}

fn estimate(event_id: String, prediction: bool, uncertainty: f64) -> UncertaintyEstimate {
    UncertaintyEstimate { event_id, prediction, uncertainty, leaf_id: 0, scope_flag: None }
}

fn estimate_set() -> impl Strategy<Value = Vec<UncertaintyEstimate>> {
    prop::collection::vec((any::<bool>(), 0.0f64..=0.5), 1..120).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, (p, u))| estimate(format!("e{i}"), p, u))
            .collect()
    })
}

proptest! {
    #[test]
    fn population_intervals_bracket_the_prediction(
        parent in estimate_set(),
        sub_raw in prop::collection::vec((any::<bool>(), 0.0f64..=0.5), 120),
    ) {
        let pb = root_bounds("s", "L", &parent, parent.len()).unwrap();
        let pred = pb.count_pred as f64;
        prop_assert!(pb.count_min <= pred && pred <= pb.count_max);
        prop_assert!(pb.ratio_min <= pb.ratio_pred && pb.ratio_pred <= pb.ratio_max);
        prop_assert!(pb.ratio_max <= 1.0);

        // Subtype estimates exist exactly for the parent-accepted events.
        let sub: Vec<UncertaintyEstimate> = parent
            .iter()
            .filter(|e| e.prediction)
            .zip(&sub_raw)
            .map(|(pe, &(p, u))| estimate(pe.event_id.clone(), p, u))
            .collect();
        if sub.len() == parent.iter().filter(|e| e.prediction).count() {
            let sb = subtype_bounds("BP", &parent, &sub, &pb).unwrap();
            let spred = sb.count_pred as f64;
            prop_assert!(sb.count_min <= spred + 1e-9 && spred <= sb.count_max + 1e-9);
            prop_assert!(sb.ratio_min <= sb.ratio_pred + 1e-12);
            prop_assert!(sb.ratio_pred <= sb.ratio_max + 1e-12);
            prop_assert!(sb.ratio_max <= 1.0);
        }
    }
}
