//! The wrapper around an opaque classifier: a decision tree over quality
//! factors whose leaves carry statistically calibrated upper bounds on the
//! classifier's error probability, plus a range-based scope flag.
//!
//! Build path: restrict events (subtypes train on the parent's population
//! only), predict with the classifier, assemble factors, fit the tree on
//! training wrongness, calibrate leaf bounds on held-out data, prune thin
//! leaves. Apply path: refit the sample-context factors on the incoming
//! sample, route every event to a leaf, report its bound.

mod binomial;
mod tree;

pub use binomial::{binom_cdf, clopper_pearson_upper};
pub use tree::{
    calibrate_tree, fit_tree, prune_tree, DecisionTree, Leaf, TreeNode, TreeParams,
    DEFAULT_MAX_DEPTH, DEFAULT_MIN_SAMPLES_LEAF,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data_model::{CellTypeSpec, Event, Sample};
use crate::ddm::DdmModel;
use crate::error::{Result, UwError};
use crate::quality_factors::{assemble_factors, ImpactModelKind, VariantConfig};

pub const DEFAULT_CONFIDENCE: f64 = 0.99;
pub const DEFAULT_MIN_LEAF_CALIB_ROOT: usize = 200;
pub const DEFAULT_MIN_LEAF_CALIB_SUBTYPE: usize = 50;

/// Observed per-marker training ranges; events outside them (with slack
/// tolerance · span per side) are flagged as out of scope. The flag never
/// modifies the uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeRanges {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub tolerance: f64,
}

pub fn fit_scope_ranges(events: &[&Event], tolerance: f64) -> Result<ScopeRanges> {
    if events.is_empty() {
        return Err(UwError::Input(
            "scope ranges need at least one training event".into(),
        ));
    }
    if !tolerance.is_finite() || tolerance < 0.0 {
        return Err(UwError::Config(format!(
            "scope tolerance must be a nonnegative number, got {tolerance}"
        )));
    }
    let arity = events[0].markers.len();
    let mut min = vec![f64::INFINITY; arity];
    let mut max = vec![f64::NEG_INFINITY; arity];
    for e in events {
        if e.markers.len() != arity {
            return Err(UwError::Input(format!(
                "event {}/{} has {} markers, expected {arity}",
                e.sample_id,
                e.event_id,
                e.markers.len()
            )));
        }
        for (i, &v) in e.markers.iter().enumerate() {
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
        }
    }
    Ok(ScopeRanges {
        min,
        max,
        tolerance,
    })
}

impl ScopeRanges {
    /// True when any marker falls outside its widened training range.
    pub fn is_out_of_scope(&self, event: &Event) -> Result<bool> {
        if event.markers.len() != self.min.len() {
            return Err(UwError::Input(format!(
                "event {}/{} has {} markers, scope ranges cover {}",
                event.sample_id,
                event.event_id,
                event.markers.len(),
                self.min.len()
            )));
        }
        for (i, &v) in event.markers.iter().enumerate() {
            let span = self.max[i] - self.min[i];
            let slack = self.tolerance * span;
            if v < self.min[i] - slack || v > self.max[i] + slack {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

pub fn scope_check(ranges: &ScopeRanges, event: &Event) -> Result<bool> {
    ranges.is_out_of_scope(event)
}

#[derive(Clone, Serialize, Deserialize)]
struct ImpactModelDto {
    kind: ImpactModelKind,
    trees: Vec<DecisionTree>,
}

/// One tree over all events, or one per predicted class. Serialized as
/// `{kind, trees}` with category trees ordered [positive, negative].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ImpactModelDto", try_from = "ImpactModelDto")]
pub enum ImpactModel {
    Default {
        tree: DecisionTree,
    },
    CategoryBased {
        positive: DecisionTree,
        negative: DecisionTree,
    },
}

impl ImpactModel {
    pub fn kind(&self) -> ImpactModelKind {
        match self {
            ImpactModel::Default { .. } => ImpactModelKind::Default,
            ImpactModel::CategoryBased { .. } => ImpactModelKind::CategoryBased,
        }
    }

    /// The tree responsible for an event with this prediction.
    pub fn tree_for(&self, prediction: bool) -> &DecisionTree {
        match self {
            ImpactModel::Default { tree } => tree,
            ImpactModel::CategoryBased { positive, negative } => {
                if prediction {
                    positive
                } else {
                    negative
                }
            }
        }
    }

    pub fn trees(&self) -> Vec<&DecisionTree> {
        match self {
            ImpactModel::Default { tree } => vec![tree],
            ImpactModel::CategoryBased { positive, negative } => vec![positive, negative],
        }
    }
}

impl From<ImpactModel> for ImpactModelDto {
    fn from(m: ImpactModel) -> ImpactModelDto {
        match m {
            ImpactModel::Default { tree } => ImpactModelDto {
                kind: ImpactModelKind::Default,
                trees: vec![tree],
            },
            ImpactModel::CategoryBased { positive, negative } => ImpactModelDto {
                kind: ImpactModelKind::CategoryBased,
                trees: vec![positive, negative],
            },
        }
    }
}

impl TryFrom<ImpactModelDto> for ImpactModel {
    type Error = String;

    fn try_from(dto: ImpactModelDto) -> std::result::Result<ImpactModel, String> {
        let mut trees = dto.trees.into_iter();
        match dto.kind {
            ImpactModelKind::Default => match (trees.next(), trees.next()) {
                (Some(tree), None) => Ok(ImpactModel::Default { tree }),
                _ => Err("default impact model holds exactly one tree".into()),
            },
            ImpactModelKind::CategoryBased => match (trees.next(), trees.next(), trees.next()) {
                (Some(positive), Some(negative), None) => {
                    Ok(ImpactModel::CategoryBased { positive, negative })
                }
                _ => Err("category-based impact model holds exactly two trees".into()),
            },
        }
    }
}

/// Which events count as the parent population when building a subtype
/// wrapper: the labeled truth, or what the parent classifier predicts (the
/// only option on unlabeled data).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubtypeBasis {
    #[default]
    GroundTruth,
    ParentPredicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildParams {
    pub confidence: f64,
    pub min_leaf_calib: usize,
    pub tree: TreeParams,
    pub subtype_basis: SubtypeBasis,
    pub scope_tolerance: f64,
    /// Recorded in the wrapper file so inference can find its classifier.
    pub ddm_ref: String,
}

impl Default for BuildParams {
    fn default() -> BuildParams {
        BuildParams {
            confidence: DEFAULT_CONFIDENCE,
            min_leaf_calib: DEFAULT_MIN_LEAF_CALIB_ROOT,
            tree: TreeParams::default(),
            subtype_basis: SubtypeBasis::GroundTruth,
            scope_tolerance: 0.0,
            ddm_ref: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyWrapper {
    pub cell_type: CellTypeSpec,
    pub variant: VariantConfig,
    pub impact_model: ImpactModel,
    pub scope_ranges: Option<ScopeRanges>,
    pub ddm_ref: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyEstimate {
    pub event_id: String,
    pub prediction: bool,
    /// Upper bound on the probability that the prediction is wrong.
    pub uncertainty: f64,
    pub leaf_id: usize,
    /// True = outside the training marker ranges.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scope_flag: Option<bool>,
}

impl UncertaintyEstimate {
    pub fn certainty(&self) -> f64 {
        1.0 - self.uncertainty
    }
}

/// Events of one split restricted to the wrapper's population, with the
/// classifier's verdicts and their wrongness.
struct PreparedSplit {
    samples: Vec<Sample>,
    rows: Vec<Vec<f64>>,
    predictions: Vec<bool>,
    wrong: Vec<bool>,
}

fn restrict_to_parent(
    samples: &[&Sample],
    cell_type: &CellTypeSpec,
    basis: SubtypeBasis,
    parent_ddm: Option<&DdmModel>,
) -> Result<Vec<Sample>> {
    let Some(parent) = &cell_type.parent else {
        return Ok(samples.iter().map(|s| (*s).clone()).collect());
    };
    let mut out = Vec::with_capacity(samples.len());
    for sample in samples {
        let events = match basis {
            SubtypeBasis::GroundTruth => sample
                .events
                .iter()
                .filter(|e| e.label(parent) == Some(true))
                .cloned()
                .collect(),
            SubtypeBasis::ParentPredicted => {
                let ddm = parent_ddm.ok_or_else(|| {
                    UwError::Config(format!(
                        "building '{}' on predicted '{parent}' events needs the parent classifier",
                        cell_type.name
                    ))
                })?;
                let keep = ddm.predict_sample(sample)?;
                sample
                    .events
                    .iter()
                    .zip(keep)
                    .filter(|(_, k)| *k)
                    .map(|(e, _)| e.clone())
                    .collect()
            }
        };
        out.push(Sample {
            sample_id: sample.sample_id.clone(),
            events,
        });
    }
    Ok(out)
}

fn prepare_split(
    samples: &[&Sample],
    variant: &VariantConfig,
    ddm: &DdmModel,
    cell_type: &CellTypeSpec,
    basis: SubtypeBasis,
    parent_ddm: Option<&DdmModel>,
    split_name: &str,
) -> Result<PreparedSplit> {
    let restricted = restrict_to_parent(samples, cell_type, basis, parent_ddm)?;
    let mut rows = Vec::new();
    let mut predictions = Vec::new();
    let mut wrong = Vec::new();
    for sample in &restricted {
        if sample.is_empty() {
            continue;
        }
        let preds = ddm.predict_sample(sample)?;
        let matrix = assemble_factors(variant, sample, &preds, cell_type)?;
        for (event, (&pred, row)) in sample.events.iter().zip(preds.iter().zip(matrix.rows)) {
            let label = event.label(&cell_type.name).ok_or_else(|| {
                UwError::Input(format!(
                    "event {}/{} lacks a '{}' label needed for wrongness",
                    event.sample_id, event.event_id, cell_type.name
                ))
            })?;
            rows.push(row);
            predictions.push(pred);
            wrong.push(pred != label);
        }
    }
    if rows.is_empty() {
        return Err(UwError::Training(format!(
            "no usable events in the {split_name} split for '{}'",
            cell_type.name
        )));
    }
    Ok(PreparedSplit {
        samples: restricted,
        rows,
        predictions,
        wrong,
    })
}

fn fit_calibrate_prune(
    train_rows: &[Vec<f64>],
    train_wrong: &[bool],
    calib_rows: &[Vec<f64>],
    calib_wrong: &[bool],
    params: &BuildParams,
    tag: &str,
) -> Result<DecisionTree> {
    let fitted = fit_tree(train_rows, train_wrong, &params.tree)?;
    let calibrated = calibrate_tree(&fitted, calib_rows, calib_wrong, params.confidence)?;
    let before = calibrated.leaf_count();
    let pruned = prune_tree(&calibrated, params.min_leaf_calib)?;
    log::info!(
        "{tag}: {before} leaves calibrated, {} after pruning at floor {}",
        pruned.leaf_count(),
        params.min_leaf_calib
    );
    Ok(pruned)
}

fn partition_by<T: Clone>(values: &[T], mask: &[bool]) -> (Vec<T>, Vec<T>) {
    let mut yes = Vec::new();
    let mut no = Vec::new();
    for (v, &m) in values.iter().zip(mask) {
        if m {
            yes.push(v.clone());
        } else {
            no.push(v.clone());
        }
    }
    (yes, no)
}

/// Builds a calibrated wrapper for one cell type.
///
/// Subtype wrappers see only the parent population (per `subtype_basis`) in
/// both splits. A category-based request where one predicted class is empty
/// in either split falls back to the default single tree with a warning.
pub fn build_wrapper(
    variant: &VariantConfig,
    ddm: &DdmModel,
    train: &[&Sample],
    calib: &[&Sample],
    cell_type: &CellTypeSpec,
    parent_ddm: Option<&DdmModel>,
    params: &BuildParams,
) -> Result<UncertaintyWrapper> {
    variant.validate()?;
    if ddm.cell_type != cell_type.name {
        return Err(UwError::Input(format!(
            "classifier is for '{}', wrapper is for '{}'",
            ddm.cell_type, cell_type.name
        )));
    }
    if train.is_empty() || calib.is_empty() {
        return Err(UwError::Input(
            "wrapper building needs nonempty train and calibration splits".into(),
        ));
    }
    if !(0.0..1.0).contains(&params.confidence) || params.confidence <= 0.0 {
        return Err(UwError::Config(format!(
            "confidence must lie strictly between 0 and 1, got {}",
            params.confidence
        )));
    }

    let tr = prepare_split(
        train,
        variant,
        ddm,
        cell_type,
        params.subtype_basis,
        parent_ddm,
        "training",
    )?;
    let ca = prepare_split(
        calib,
        variant,
        ddm,
        cell_type,
        params.subtype_basis,
        parent_ddm,
        "calibration",
    )?;

    let impact_model = match variant.impact_kind {
        ImpactModelKind::Default => ImpactModel::Default {
            tree: fit_calibrate_prune(
                &tr.rows,
                &tr.wrong,
                &ca.rows,
                &ca.wrong,
                params,
                &format!("{} tree", cell_type.name),
            )?,
        },
        ImpactModelKind::CategoryBased => {
            let (tr_pos_rows, tr_neg_rows) = partition_by(&tr.rows, &tr.predictions);
            let (tr_pos_wrong, tr_neg_wrong) = partition_by(&tr.wrong, &tr.predictions);
            let (ca_pos_rows, ca_neg_rows) = partition_by(&ca.rows, &ca.predictions);
            let (ca_pos_wrong, ca_neg_wrong) = partition_by(&ca.wrong, &ca.predictions);
            let empty = [&tr_pos_rows, &tr_neg_rows, &ca_pos_rows, &ca_neg_rows]
                .iter()
                .any(|r| r.is_empty());
            if empty {
                log::warn!(
                    "'{}': a predicted class has no events; using one tree instead of per-class trees",
                    cell_type.name
                );
                ImpactModel::Default {
                    tree: fit_calibrate_prune(
                        &tr.rows,
                        &tr.wrong,
                        &ca.rows,
                        &ca.wrong,
                        params,
                        &format!("{} tree", cell_type.name),
                    )?,
                }
            } else {
                ImpactModel::CategoryBased {
                    positive: fit_calibrate_prune(
                        &tr_pos_rows,
                        &tr_pos_wrong,
                        &ca_pos_rows,
                        &ca_pos_wrong,
                        params,
                        &format!("{} positive tree", cell_type.name),
                    )?,
                    negative: fit_calibrate_prune(
                        &tr_neg_rows,
                        &tr_neg_wrong,
                        &ca_neg_rows,
                        &ca_neg_wrong,
                        params,
                        &format!("{} negative tree", cell_type.name),
                    )?,
                }
            }
        }
    };

    let train_events: Vec<&Event> = tr
        .samples
        .iter()
        .flat_map(|s| s.events.iter())
        .collect();
    let scope_ranges = Some(fit_scope_ranges(&train_events, params.scope_tolerance)?);

    Ok(UncertaintyWrapper {
        cell_type: cell_type.clone(),
        variant: variant.clone(),
        impact_model,
        scope_ranges,
        ddm_ref: params.ddm_ref.clone(),
        confidence: params.confidence,
    })
}

impl UncertaintyWrapper {
    /// Scores one sample: classifier verdict plus calibrated uncertainty per
    /// event. Context factors are refitted on this sample, so the caller
    /// passes the population the wrapper was built for (subtypes: the
    /// parent-predicted subset). An empty sample yields no estimates.
    pub fn apply(&self, ddm: &DdmModel, sample: &Sample) -> Result<Vec<UncertaintyEstimate>> {
        if ddm.cell_type != self.cell_type.name {
            return Err(UwError::Input(format!(
                "classifier is for '{}', wrapper is for '{}'",
                ddm.cell_type, self.cell_type.name
            )));
        }
        if sample.is_empty() {
            return Ok(Vec::new());
        }
        let predictions = ddm.predict_sample(sample)?;
        let matrix = assemble_factors(&self.variant, sample, &predictions, &self.cell_type)?;
        let mut out = Vec::with_capacity(sample.len());
        for (event, (&prediction, row)) in sample
            .events
            .iter()
            .zip(predictions.iter().zip(&matrix.rows))
        {
            let tree = self.impact_model.tree_for(prediction);
            let leaf = tree.leaf_for(row)?;
            let uncertainty = leaf.uncertainty.ok_or_else(|| {
                UwError::Domain(format!(
                    "leaf {} of '{}' carries no calibrated bound; prune before applying",
                    leaf.id, self.cell_type.name
                ))
            })?;
            let scope_flag = match &self.scope_ranges {
                Some(ranges) => Some(ranges.is_out_of_scope(event)?),
                None => None,
            };
            out.push(UncertaintyEstimate {
                event_id: event.event_id.clone(),
                prediction,
                uncertainty,
                leaf_id: leaf.id,
                scope_flag,
            });
        }
        Ok(out)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| UwError::Schema(format!("wrapper serialization: {e}")))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<UncertaintyWrapper> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| UwError::Schema(format!("wrapper JSON: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddm::load_external_predictions;
    use crate::quality_factors::VariantKind;
    use std::collections::BTreeMap;
    use std::io::Write;

    fn event(sample: &str, id: usize, markers: Vec<f64>, label: Option<bool>) -> Event {
        let mut labels = BTreeMap::new();
        if let Some(l) = label {
            labels.insert("X".to_string(), l);
        }
        Event {
            sample_id: sample.into(),
            event_id: format!("e{id}"),
            markers,
            labels,
            predictions: BTreeMap::new(),
        }
    }

    fn cell_type_x() -> CellTypeSpec {
        CellTypeSpec {
            name: "X".into(),
            parent: None,
            gating_pairs: vec![(0, 1)],
        }
    }

    /// Sample where the classifier (external table) predicts positive for
    /// markers[0] > 0 and errs on a fixed fraction of the negatives.
    fn two_class_sample(sample_id: &str, n_per_class: usize, neg_wrong_every: usize) -> Sample {
        let mut events = Vec::new();
        for i in 0..n_per_class {
            events.push(event(sample_id, i, vec![1.0, 0.0], Some(true)));
        }
        for i in 0..n_per_class {
            let wrong = neg_wrong_every > 0 && i % neg_wrong_every == 0;
            events.push(event(
                sample_id,
                n_per_class + i,
                vec![-1.0, 0.0],
                Some(wrong),
            ));
        }
        Sample {
            sample_id: sample_id.into(),
            events,
        }
    }

    /// External classifier agreeing with the sign of markers[0].
    fn sign_ddm(samples: &[&Sample]) -> DdmModel {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("preds.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "sample_id,event_id,pred").unwrap();
        for s in samples {
            for e in &s.events {
                let p = if e.markers[0] > 0.0 { 1 } else { 0 };
                writeln!(f, "{},{},{}", s.sample_id, e.event_id, p).unwrap();
            }
        }
        drop(f);
        load_external_predictions(&path, "X").unwrap()
    }

    #[test]
    fn scope_ranges_fit_and_check() {
        let events: Vec<Event> = vec![
            event("s", 0, vec![1.0, 10.0], None),
            event("s", 1, vec![3.0, 30.0], None),
        ];
        let refs: Vec<&Event> = events.iter().collect();
        let ranges = fit_scope_ranges(&refs, 0.0).unwrap();
        assert_eq!(ranges.min, vec![1.0, 10.0]);
        assert_eq!(ranges.max, vec![3.0, 30.0]);
        assert!(!scope_check(&ranges, &events[0]).unwrap());
        let inside = event("s", 2, vec![2.0, 20.0], None);
        assert!(!scope_check(&ranges, &inside).unwrap());
        // Span of marker 0 is 2; 10 spans past max is far out.
        let far = event("s", 3, vec![3.0 + 20.0, 20.0], None);
        assert!(scope_check(&ranges, &far).unwrap());
    }

    #[test]
    fn scope_tolerance_widens_ranges() {
        let events: Vec<Event> = vec![
            event("s", 0, vec![0.0], None),
            event("s", 1, vec![10.0], None),
        ];
        let refs: Vec<&Event> = events.iter().collect();
        let tight = fit_scope_ranges(&refs, 0.0).unwrap();
        let slack = fit_scope_ranges(&refs, 1.0).unwrap();
        let just_outside = event("s", 2, vec![15.0], None);
        assert!(scope_check(&tight, &just_outside).unwrap());
        // One span of slack admits values up to max + 10.
        assert!(!scope_check(&slack, &just_outside).unwrap());
        let beyond = event("s", 3, vec![21.0], None);
        assert!(scope_check(&slack, &beyond).unwrap());
    }

    #[test]
    fn scope_rejects_bad_input() {
        assert!(matches!(fit_scope_ranges(&[], 0.0), Err(UwError::Input(_))));
        let e = event("s", 0, vec![1.0], None);
        assert!(matches!(
            fit_scope_ranges(&[&e], -0.5),
            Err(UwError::Config(_))
        ));
        let ranges = fit_scope_ranges(&[&e], 0.0).unwrap();
        let wide = event("s", 1, vec![1.0, 2.0], None);
        assert!(matches!(
            scope_check(&ranges, &wide),
            Err(UwError::Input(_))
        ));
    }

    fn small_params(min_leaf_calib: usize) -> BuildParams {
        BuildParams {
            min_leaf_calib,
            tree: TreeParams {
                max_depth: 8,
                min_samples_leaf: 50,
            },
            ..BuildParams::default()
        }
    }

    #[test]
    fn baseline_wrapper_is_single_tree_over_markers() {
        let train = two_class_sample("s1", 300, 10);
        let calib = two_class_sample("s2", 300, 10);
        let ddm = sign_ddm(&[&train, &calib]);
        let wrapper = build_wrapper(
            &VariantConfig::new(VariantKind::Baseline),
            &ddm,
            &[&train],
            &[&calib],
            &cell_type_x(),
            None,
            &small_params(50),
        )
        .unwrap();
        assert!(matches!(wrapper.impact_model, ImpactModel::Default { .. }));
        let tree = wrapper.impact_model.tree_for(true);
        assert_eq!(tree.arity, 2);
        let estimates = wrapper.apply(&ddm, &train).unwrap();
        assert_eq!(estimates.len(), train.len());
        for est in &estimates {
            assert!((0.0..=1.0).contains(&est.uncertainty));
            assert!((est.certainty() + est.uncertainty - 1.0).abs() < 1e-15);
            assert_eq!(est.scope_flag, Some(false));
        }
    }

    #[test]
    fn flat_tree_reproduces_overall_error_bound() {
        let train = two_class_sample("s1", 300, 10);
        let calib = two_class_sample("s2", 300, 10);
        let ddm = sign_ddm(&[&train, &calib]);
        let mut params = small_params(50);
        params.tree.max_depth = 0;
        let wrapper = build_wrapper(
            &VariantConfig::new(VariantKind::Basic),
            &ddm,
            &[&train],
            &[&calib],
            &cell_type_x(),
            None,
            &params,
        )
        .unwrap();
        // 30 of the 600 calibration events are wrong.
        let expected = clopper_pearson_upper(30, 600, 0.99).unwrap();
        for est in wrapper.apply(&ddm, &calib).unwrap() {
            assert_eq!(est.uncertainty, expected);
            assert_eq!(est.leaf_id, 0);
        }
    }

    #[test]
    fn category_trees_split_error_mass_by_prediction() {
        let train = two_class_sample("s1", 500, 10);
        let calib = two_class_sample("s2", 500, 10);
        let ddm = sign_ddm(&[&train, &calib]);
        let variant = VariantConfig::new(VariantKind::Basic)
            .with_impact_kind(ImpactModelKind::CategoryBased);
        let wrapper = build_wrapper(
            &variant,
            &ddm,
            &[&train],
            &[&calib],
            &cell_type_x(),
            None,
            &small_params(50),
        )
        .unwrap();
        let ImpactModel::CategoryBased { positive, negative } = &wrapper.impact_model else {
            panic!("expected per-class trees");
        };
        let pos_leaf = positive.leaves().next().unwrap();
        assert_eq!(pos_leaf.n_calib, 500);
        assert_eq!(pos_leaf.k_errors, 0);
        assert!(pos_leaf.uncertainty.unwrap() < 0.02);
        let neg_leaf = negative.leaves().next().unwrap();
        assert_eq!(neg_leaf.n_calib, 500);
        assert_eq!(neg_leaf.k_errors, 50);
        assert!(neg_leaf.uncertainty.unwrap() >= 0.10);
        for est in wrapper.apply(&ddm, &calib).unwrap() {
            if est.prediction {
                assert!(est.uncertainty < 0.02);
            } else {
                assert!(est.uncertainty >= 0.10);
            }
        }
    }

    #[test]
    fn category_request_with_one_class_falls_back() {
        // All events sit on the positive side, so no negatives exist.
        let mut train = two_class_sample("s1", 300, 0);
        let mut calib = two_class_sample("s2", 300, 0);
        for e in train.events.iter_mut().chain(calib.events.iter_mut()) {
            e.markers[0] = e.markers[0].abs();
        }
        let ddm = sign_ddm(&[&train, &calib]);
        let variant = VariantConfig::new(VariantKind::Basic)
            .with_impact_kind(ImpactModelKind::CategoryBased);
        let wrapper = build_wrapper(
            &variant,
            &ddm,
            &[&train],
            &[&calib],
            &cell_type_x(),
            None,
            &small_params(50),
        )
        .unwrap();
        assert!(matches!(wrapper.impact_model, ImpactModel::Default { .. }));
    }

    fn subtype_events(sample: &str, n: usize) -> Sample {
        // Parent members live near the origin, strangers far away.
        let mut events = Vec::new();
        for i in 0..n {
            let inside = i % 2 == 0;
            let base = if inside { 0.0 } else { 10.0 };
            let mut e = event(
                sample,
                i,
                vec![base + (i % 5) as f64 * 0.1, base],
                Some(inside && i % 4 == 0),
            );
            e.labels.insert("P".into(), inside);
            events.push(e);
        }
        Sample {
            sample_id: sample.into(),
            events,
        }
    }

    #[test]
    fn subtype_build_sees_only_parent_events() {
        let train = subtype_events("s1", 400);
        let calib = subtype_events("s2", 400);
        let ddm = sign_ddm(&[&train, &calib]);
        let ct = CellTypeSpec {
            name: "X".into(),
            parent: Some("P".into()),
            gating_pairs: vec![(0, 1)],
        };
        let wrapper = build_wrapper(
            &VariantConfig::new(VariantKind::Basic),
            &ddm,
            &[&train],
            &[&calib],
            &ct,
            None,
            &small_params(50),
        )
        .unwrap();
        let ranges = wrapper.scope_ranges.as_ref().unwrap();
        // Strangers at 10.. would have stretched the ranges.
        assert!(ranges.max.iter().all(|&m| m < 1.0));
    }

    #[test]
    fn predicted_parent_basis_needs_parent_classifier() {
        let train = subtype_events("s1", 200);
        let calib = subtype_events("s2", 200);
        let ddm = sign_ddm(&[&train, &calib]);
        let ct = CellTypeSpec {
            name: "X".into(),
            parent: Some("P".into()),
            gating_pairs: vec![(0, 1)],
        };
        let mut params = small_params(50);
        params.subtype_basis = SubtypeBasis::ParentPredicted;
        let err = build_wrapper(
            &VariantConfig::new(VariantKind::Basic),
            &ddm,
            &[&train],
            &[&calib],
            &ct,
            None,
            &params,
        );
        assert!(matches!(err, Err(UwError::Config(_))));
    }

    #[test]
    fn wrapper_json_round_trip() {
        let train = two_class_sample("s1", 300, 10);
        let calib = two_class_sample("s2", 300, 10);
        let ddm = sign_ddm(&[&train, &calib]);
        let wrapper = build_wrapper(
            &VariantConfig::new(VariantKind::Basic).with_outcome(true),
            &ddm,
            &[&train],
            &[&calib],
            &cell_type_x(),
            None,
            &small_params(50),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wrapper.json");
        wrapper.save_json(&path).unwrap();
        let loaded = UncertaintyWrapper::load_json(&path).unwrap();
        assert_eq!(wrapper, loaded);
        assert_eq!(
            wrapper.apply(&ddm, &calib).unwrap(),
            loaded.apply(&ddm, &calib).unwrap()
        );
        let again = dir.path().join("wrapper2.json");
        loaded.save_json(&again).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&again).unwrap()
        );
    }

    #[test]
    fn apply_on_empty_sample_is_empty() {
        let train = two_class_sample("s1", 300, 10);
        let calib = two_class_sample("s2", 300, 10);
        let ddm = sign_ddm(&[&train, &calib]);
        let wrapper = build_wrapper(
            &VariantConfig::new(VariantKind::Basic),
            &ddm,
            &[&train],
            &[&calib],
            &cell_type_x(),
            None,
            &small_params(50),
        )
        .unwrap();
        let empty = Sample {
            sample_id: "s9".into(),
            events: Vec::new(),
        };
        assert!(wrapper.apply(&ddm, &empty).unwrap().is_empty());
    }

    #[test]
    fn apply_is_deterministic() {
        let train = two_class_sample("s1", 300, 10);
        let calib = two_class_sample("s2", 300, 10);
        let ddm = sign_ddm(&[&train, &calib]);
        let wrapper = build_wrapper(
            &VariantConfig::new(VariantKind::Basic),
            &ddm,
            &[&train],
            &[&calib],
            &cell_type_x(),
            None,
            &small_params(50),
        )
        .unwrap();
        assert_eq!(
            wrapper.apply(&ddm, &train).unwrap(),
            wrapper.apply(&ddm, &train).unwrap()
        );
    }

    #[test]
    fn mismatched_cell_type_is_rejected() {
        let train = two_class_sample("s1", 300, 10);
        let calib = two_class_sample("s2", 300, 10);
        let ddm = sign_ddm(&[&train, &calib]);
        let other = CellTypeSpec {
            name: "Y".into(),
            parent: None,
            gating_pairs: vec![(0, 1)],
        };
        let err = build_wrapper(
            &VariantConfig::new(VariantKind::Basic),
            &ddm,
            &[&train],
            &[&calib],
            &other,
            None,
            &small_params(50),
        );
        assert!(matches!(err, Err(UwError::Input(_))));
    }
}
