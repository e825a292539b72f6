//! End-to-end run on a small synthetic dataset: generate, train the
//! classifiers, build wrappers, score variants, and aggregate population
//! bounds. Checks the cross-module contracts that unit tests cannot see.

use uwrap_core::data_model::Split;
use uwrap_core::ddm::{train_ddm, DdmHyperparams, DdmModel};
use uwrap_core::evaluation::compare_variants;
use uwrap_core::aggregation::dataset_bounds;
use uwrap_core::impact_model::{build_wrapper, BuildParams, TreeParams, UncertaintyWrapper};
use uwrap_core::quality_factors::{VariantConfig, VariantKind};
use uwrap_core::synthgen::{demo_generator_config, generate_dataset};
use uwrap_core::UwError;

struct Fixture {
    dataset: uwrap_core::data_model::Dataset,
    ddm_l: DdmModel,
    ddm_bp: DdmModel,
    wrap_l_baseline: UncertaintyWrapper,
    wrap_l_basic: UncertaintyWrapper,
    wrap_bp_basic: UncertaintyWrapper,
}

fn build_fixture() -> Fixture {
    let mut config = demo_generator_config();
    config.events_per_sample = 600;
    let dataset = generate_dataset(&config, (3, 3, 2), 11).unwrap();

    let train = dataset.samples_in(Split::Train);
    let calib = dataset.samples_in(Split::Calibration);

    let hyper = DdmHyperparams::default();
    let train_events: Vec<_> = train.iter().flat_map(|s| s.events.iter()).collect();
    let ddm_l = train_ddm(&train_events, "L", &hyper, &config.transform).unwrap();

    let lym_train: Vec<_> = train.iter().map(|s| s.subset_by_label("L")).collect();
    let lym_events: Vec<_> = lym_train.iter().flat_map(|s| s.events.iter()).collect();
    let ddm_bp = train_ddm(&lym_events, "BP", &hyper, &config.transform).unwrap();

    let spec_l = dataset.panel.cell_type("L").unwrap().clone();
    let spec_bp = dataset.panel.cell_type("BP").unwrap().clone();

    let root_params = BuildParams {
        tree: TreeParams { max_depth: 4, min_samples_leaf: 150 },
        ddm_ref: "ddm_L.json".into(),
        ..BuildParams::default()
    };
    let sub_params = BuildParams {
        min_leaf_calib: 50,
        tree: TreeParams { max_depth: 4, min_samples_leaf: 100 },
        ddm_ref: "ddm_BP.json".into(),
        ..BuildParams::default()
    };

    let baseline = VariantConfig::new(VariantKind::Baseline);
    let basic = VariantConfig::new(VariantKind::Basic);

    let wrap_l_baseline =
        build_wrapper(&baseline, &ddm_l, &train, &calib, &spec_l, None, &root_params).unwrap();
    let wrap_l_basic =
        build_wrapper(&basic, &ddm_l, &train, &calib, &spec_l, None, &root_params).unwrap();
    let wrap_bp_basic =
        build_wrapper(&basic, &ddm_bp, &train, &calib, &spec_bp, None, &sub_params).unwrap();

    Fixture { dataset, ddm_l, ddm_bp, wrap_l_baseline, wrap_l_basic, wrap_bp_basic }
}

#[test]
fn full_pipeline_contracts_hold() {
    let fx = build_fixture();
    let test = fx.dataset.samples_in(Split::Test);

    // Variant comparison: same classifier, so the variance column is the
    // exact same number in every row.
    let rows = compare_variants(
        &[
            ("baseline".into(), &fx.wrap_l_baseline, &fx.ddm_l),
            ("basic".into(), &fx.wrap_l_basic, &fx.ddm_l),
        ],
        &test,
    )
    .unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(
        rows[0].report.variance.to_bits(),
        rows[1].report.variance.to_bits()
    );
    for row in &rows {
        let r = &row.report;
        assert!(r.brier.is_finite() && r.brier >= 0.0);
        assert!(!r.bins.is_empty());
        assert!(
            (r.brier - (r.variance - r.resolution + r.unreliability)).abs() <= 1e-10,
            "decomposition identity broken for {}",
            row.label
        );
        assert!(r.overconfidence >= 0.0 && r.overconfidence <= r.unreliability + 1e-12);
    }

    // Population bounds: one record per (sample, wrapper), intervals closed
    // around the prediction, subtype ratios never above one.
    let bounds = dataset_bounds(
        &[(&fx.wrap_l_basic, &fx.ddm_l), (&fx.wrap_bp_basic, &fx.ddm_bp)],
        &test,
    )
    .unwrap();
    assert_eq!(bounds.len(), test.len() * 2);
    for b in &bounds {
        let pred = b.count_pred as f64;
        assert!(b.count_min <= pred + 1e-9 && pred <= b.count_max + 1e-9, "{b:?}");
        assert!(b.ratio_min <= b.ratio_pred + 1e-12 && b.ratio_pred <= b.ratio_max + 1e-12);
        assert!(b.ratio_max <= 1.0 + 1e-12);
        assert!(b.ratio_true.is_some(), "generated data is fully labeled");
        assert!(b.inside.is_some());
    }
}

#[test]
fn compare_variants_rejects_mixed_cell_types() {
    let fx = build_fixture();
    let test = fx.dataset.samples_in(Split::Test);
    let err = compare_variants(
        &[
            ("l".into(), &fx.wrap_l_basic, &fx.ddm_l),
            ("bp".into(), &fx.wrap_bp_basic, &fx.ddm_bp),
        ],
        &test,
    )
    .unwrap_err();
    assert!(matches!(err, UwError::Input(_)), "{err}");
}

#[test]
fn dataset_bounds_needs_the_parent_wrapper() {
    let fx = build_fixture();
    let test = fx.dataset.samples_in(Split::Test);
    let err = dataset_bounds(&[(&fx.wrap_bp_basic, &fx.ddm_bp)], &test).unwrap_err();
    assert!(matches!(err, UwError::Config(_)), "{err}");
}

#[test]
fn dataset_bounds_rejects_deeper_nesting() {
    let fx = build_fixture();
    let test = fx.dataset.samples_in(Split::Test);
    let mut grandchild = fx.wrap_bp_basic.clone();
    grandchild.cell_type.name = "BPX".into();
    grandchild.cell_type.parent = Some("BP".into());
    let err = dataset_bounds(
        &[
            (&fx.wrap_l_basic, &fx.ddm_l),
            (&fx.wrap_bp_basic, &fx.ddm_bp),
            (&grandchild, &fx.ddm_bp),
        ],
        &test,
    )
    .unwrap_err();
    assert!(matches!(err, UwError::Config(_)), "{err}");
}
