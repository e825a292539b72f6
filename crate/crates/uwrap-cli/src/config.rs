//! Run configuration: one JSON file drives the whole pipeline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uwrap_core::data_model::Panel;
use uwrap_core::ddm::DdmHyperparams;
use uwrap_core::impact_model::{
    BuildParams, TreeParams, DEFAULT_CONFIDENCE, DEFAULT_MIN_LEAF_CALIB_ROOT,
    DEFAULT_MIN_LEAF_CALIB_SUBTYPE,
};
use uwrap_core::quality_factors::{
    ImpactModelKind, MarkerTransform, VariantConfig, VariantKind, DEFAULT_DBSCAN_EPS,
    DEFAULT_DBSCAN_MIN_PTS,
};
use uwrap_core::synthgen::{
    demo_generator_config, demo_panel, demo_quadrant_gates, GeneratorConfig, MixtureComponent,
    QuadrantGates,
};
use uwrap_core::{Result, UwError};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data_dir: PathBuf,
    pub models_dir: PathBuf,
    pub wrappers_dir: PathBuf,
    pub reports_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Paths {
        Paths {
            data_dir: "data".into(),
            models_dir: "models".into(),
            wrappers_dir: "wrappers".into(),
            reports_dir: "reports".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitCounts {
    pub train: usize,
    pub calibration: usize,
    pub test: usize,
}

impl Default for SplitCounts {
    fn default() -> SplitCounts {
        SplitCounts { train: 10, calibration: 10, test: 10 }
    }
}

/// How ground-truth labels are produced by `generate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    /// Keep the mixture-component labels attached at draw time.
    #[default]
    Components,
    /// Relabel every event by quadrant-gate membership.
    Gates,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    pub events_per_sample: usize,
    pub sample_shift_sd: f64,
    pub counts: SplitCounts,
    pub label_source: LabelSource,
    /// Mixture components; the built-in demo mixture when absent.
    pub components: Option<Vec<MixtureComponent>>,
}

impl Default for GeneratorSection {
    fn default() -> GeneratorSection {
        let demo = demo_generator_config();
        GeneratorSection {
            events_per_sample: demo.events_per_sample,
            sample_shift_sd: demo.sample_shift_sd,
            counts: SplitCounts::default(),
            label_source: LabelSource::Components,
            components: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeSection {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeSection {
    fn default() -> TreeSection {
        let t = TreeParams::default();
        TreeSection { max_depth: t.max_depth, min_samples_leaf: t.min_samples_leaf }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruningSection {
    pub root_min_leaf_calib: usize,
    pub subtype_min_leaf_calib: usize,
}

impl Default for PruningSection {
    fn default() -> PruningSection {
        PruningSection {
            root_min_leaf_calib: DEFAULT_MIN_LEAF_CALIB_ROOT,
            subtype_min_leaf_calib: DEFAULT_MIN_LEAF_CALIB_SUBTYPE,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DbscanSection {
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for DbscanSection {
    fn default() -> DbscanSection {
        DbscanSection { eps: DEFAULT_DBSCAN_EPS, min_pts: DEFAULT_DBSCAN_MIN_PTS }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub seed: u64,
    pub confidence: f64,
    pub generator: GeneratorSection,
    /// Marker panel and cell-type hierarchy; the built-in demo panel when absent.
    pub panel: Option<Panel>,
    pub transform: MarkerTransform,
    /// Classifier hyperparameters, with per-cell-type overrides.
    pub ddm: DdmHyperparams,
    pub ddm_overrides: BTreeMap<String, DdmHyperparams>,
    pub tree: TreeSection,
    pub pruning: PruningSection,
    pub dbscan: DbscanSection,
    pub scope_tolerance: f64,
    /// Wrapper variants to build per cell type, e.g. "basic", "basic+outcome",
    /// "basic*" (category-based). Cell types not listed get the stock set.
    pub variants: BTreeMap<String, Vec<String>>,
    /// Variant used by `aggregate` and the plotting commands, per cell type.
    pub aggregate_variants: BTreeMap<String, String>,
    /// Quadrant gates drawn in gating plots (and used when
    /// `label_source = "gates"`); the demo gates when absent.
    pub gates: Option<QuadrantGates>,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            paths: Paths::default(),
            seed: 7,
            confidence: DEFAULT_CONFIDENCE,
            generator: GeneratorSection::default(),
            panel: None,
            transform: MarkerTransform::default(),
            ddm: DdmHyperparams::default(),
            ddm_overrides: BTreeMap::new(),
            tree: TreeSection::default(),
            pruning: PruningSection::default(),
            dbscan: DbscanSection::default(),
            scope_tolerance: 0.0,
            variants: BTreeMap::new(),
            aggregate_variants: BTreeMap::new(),
            gates: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| UwError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(UwError::Config(format!(
                "confidence must lie in (0, 1), got {}",
                self.confidence
            )));
        }
        let panel = self.panel();
        for name in self.variants.keys().chain(self.aggregate_variants.keys()) {
            if panel.cell_type(name).is_none() {
                return Err(UwError::Config(format!(
                    "variant list references unknown cell type '{name}'"
                )));
            }
        }
        for (ct, names) in &self.variants {
            for name in names {
                self.parse_variant(name, ct, &panel)?;
            }
        }
        if let Some(gates) = &self.gates {
            gates.validate(&panel)?;
        }
        Ok(())
    }

    pub fn panel(&self) -> Panel {
        self.panel.clone().unwrap_or_else(demo_panel)
    }

    pub fn gates(&self) -> QuadrantGates {
        self.gates.clone().unwrap_or_else(demo_quadrant_gates)
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        let demo = demo_generator_config();
        GeneratorConfig {
            panel: self.panel(),
            components: self.generator.components.clone().unwrap_or(demo.components),
            events_per_sample: self.generator.events_per_sample,
            sample_shift_sd: self.generator.sample_shift_sd,
            transform: self.transform.clone(),
        }
    }

    pub fn ddm_hyperparams(&self, cell_type: &str, index: usize) -> DdmHyperparams {
        let mut h = self.ddm_overrides.get(cell_type).cloned().unwrap_or_else(|| self.ddm.clone());
        // Distinct deterministic init per classifier.
        h.seed = h.seed.wrapping_add(self.seed).wrapping_add(index as u64);
        h
    }

    /// Variant names for one cell type: the configured list, or the stock
    /// set (root: baseline/basic/density; subtypes: baseline/basic, plus the
    /// full six for NKP whose classifier the demo deliberately weakens).
    pub fn variant_names(&self, cell_type: &str, panel: &Panel) -> Vec<String> {
        if let Some(list) = self.variants.get(cell_type) {
            return list.clone();
        }
        let is_root = panel.cell_type(cell_type).map(|c| c.parent.is_none()).unwrap_or(true);
        if is_root {
            vec!["baseline".into(), "basic".into(), "density".into()]
        } else if cell_type == "NKP" {
            vec![
                "baseline".into(),
                "basic".into(),
                "percentile".into(),
                "density".into(),
                "homogeneity".into(),
                "combined".into(),
            ]
        } else {
            vec!["baseline".into(), "basic".into()]
        }
    }

    /// Parses "kind", "kind+outcome", "kind*" or "kind+outcome*" into a full
    /// variant configuration carrying this run's shared factor parameters.
    pub fn parse_variant(
        &self,
        name: &str,
        cell_type: &str,
        panel: &Panel,
    ) -> Result<VariantConfig> {
        let mut rest = name;
        let category = rest.ends_with('*');
        if category {
            rest = &rest[..rest.len() - 1];
        }
        let outcome = rest.ends_with("+outcome");
        if outcome {
            rest = &rest[..rest.len() - "+outcome".len()];
        }
        let kind = VariantKind::parse(rest).ok_or_else(|| {
            UwError::Config(format!("unknown variant '{name}' for cell type '{cell_type}'"))
        })?;
        if kind == VariantKind::Homogeneity || kind == VariantKind::Combined {
            let is_root =
                panel.cell_type(cell_type).map(|c| c.parent.is_none()).unwrap_or(false);
            if is_root {
                return Err(UwError::Config(format!(
                    "variant '{name}' uses the homogeneity factor, which root cell type \
                     '{cell_type}' skips"
                )));
            }
        }
        let mut vc = VariantConfig::new(kind).with_outcome(outcome);
        if category {
            vc = vc.with_impact_kind(ImpactModelKind::CategoryBased);
        }
        vc.transform = self.transform.clone();
        vc.dbscan_eps = self.dbscan.eps;
        vc.dbscan_min_pts = self.dbscan.min_pts;
        vc.validate()?;
        Ok(vc)
    }

    pub fn build_params(&self, cell_type: &str, panel: &Panel, ddm_ref: &str) -> BuildParams {
        let is_root = panel.cell_type(cell_type).map(|c| c.parent.is_none()).unwrap_or(true);
        BuildParams {
            confidence: self.confidence,
            min_leaf_calib: if is_root {
                self.pruning.root_min_leaf_calib
            } else {
                self.pruning.subtype_min_leaf_calib
            },
            tree: TreeParams {
                max_depth: self.tree.max_depth,
                min_samples_leaf: self.tree.min_samples_leaf,
            },
            scope_tolerance: self.scope_tolerance,
            ddm_ref: ddm_ref.into(),
            ..BuildParams::default()
        }
    }

    /// Variant chosen for aggregation and plots: the configured preference,
    /// else basic (every stock list includes it).
    pub fn aggregate_variant(&self, cell_type: &str) -> String {
        self.aggregate_variants.get(cell_type).cloned().unwrap_or_else(|| "basic".into())
    }
}

/// File stem for one wrapper: `wrapper_{ct}_{kind}[_outcome][_category]`.
pub fn wrapper_file_name(cell_type: &str, name: &str) -> String {
    let mut rest = name;
    let mut suffix = String::new();
    if rest.ends_with('*') {
        rest = &rest[..rest.len() - 1];
        suffix = "_category".into();
    }
    let rest = match rest.strip_suffix("+outcome") {
        Some(r) => {
            suffix = format!("_outcome{suffix}");
            r
        }
        None => rest,
    };
    format!("wrapper_{cell_type}_{rest}{suffix}.json")
}
