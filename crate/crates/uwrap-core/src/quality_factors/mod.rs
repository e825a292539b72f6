//! Quality factors: the per-event features the impact model partitions on.
//!
//! Five families exist. Marker factors are the raw gated intensities and are
//! always present. Percentile, density and homogeneity factors describe an
//! event's standing *within its own sample* and are therefore refitted on
//! whatever sample is being scored; nothing about them crosses sample
//! boundaries. The outcome factor is simply the classifier's own prediction.
//!
//! A [`VariantConfig`] names which families are active plus the parameters of
//! the fitted ones; [`assemble_factors`] turns one sample plus its
//! predictions into a [`FactorMatrix`] with a stable column order.

mod density;
mod homogeneity;
mod transform;

pub use density::{fit_density, DensityModel};
pub use homogeneity::{dbscan, fit_homogeneity, ClusterAssignment, HomogeneityModel};
pub use transform::MarkerTransform;

use serde::{Deserialize, Serialize};

use crate::data_model::{CellTypeSpec, Event, Sample};
use crate::error::{Result, UwError};

pub const DEFAULT_DBSCAN_EPS: f64 = 0.3;
pub const DEFAULT_DBSCAN_MIN_PTS: usize = 20;

/// Which factor families a wrapper variant uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    /// Marker factors only; always paired with the default impact model and
    /// no outcome factor.
    Baseline,
    /// Marker factors only.
    Basic,
    /// Markers plus per-marker sample percentiles.
    Percentile,
    /// Markers plus one KDE density per gating pair.
    Density,
    /// Markers plus the cluster-homogeneity factor.
    Homogeneity,
    /// Markers, densities and homogeneity together.
    Combined,
}

impl VariantKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            VariantKind::Baseline => "baseline",
            VariantKind::Basic => "basic",
            VariantKind::Percentile => "percentile",
            VariantKind::Density => "density",
            VariantKind::Homogeneity => "homogeneity",
            VariantKind::Combined => "combined",
        }
    }

    pub fn parse(s: &str) -> Option<VariantKind> {
        match s {
            "baseline" => Some(VariantKind::Baseline),
            "basic" => Some(VariantKind::Basic),
            "percentile" => Some(VariantKind::Percentile),
            "density" => Some(VariantKind::Density),
            "homogeneity" => Some(VariantKind::Homogeneity),
            "combined" => Some(VariantKind::Combined),
            _ => None,
        }
    }

    pub const ALL: [VariantKind; 6] = [
        VariantKind::Baseline,
        VariantKind::Basic,
        VariantKind::Percentile,
        VariantKind::Density,
        VariantKind::Homogeneity,
        VariantKind::Combined,
    ];
}

/// How the impact model is organized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpactModelKind {
    /// One tree over all events.
    Default,
    /// One tree per predicted class; replaces the outcome factor.
    CategoryBased,
}

/// Bandwidth selection rule for the density KDE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    #[default]
    Scott,
}

/// Full description of one wrapper variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantConfig {
    pub kind: VariantKind,
    #[serde(default)]
    pub include_outcome: bool,
    #[serde(default = "default_impact_kind")]
    pub impact_kind: ImpactModelKind,
    #[serde(default)]
    pub transform: MarkerTransform,
    #[serde(default = "default_eps")]
    pub dbscan_eps: f64,
    #[serde(default = "default_min_pts")]
    pub dbscan_min_pts: usize,
    #[serde(default)]
    pub bandwidth_rule: BandwidthRule,
}

fn default_impact_kind() -> ImpactModelKind {
    ImpactModelKind::Default
}
fn default_eps() -> f64 {
    DEFAULT_DBSCAN_EPS
}
fn default_min_pts() -> usize {
    DEFAULT_DBSCAN_MIN_PTS
}

impl VariantConfig {
    pub fn new(kind: VariantKind) -> VariantConfig {
        VariantConfig {
            kind,
            include_outcome: false,
            impact_kind: ImpactModelKind::Default,
            transform: MarkerTransform::default(),
            dbscan_eps: DEFAULT_DBSCAN_EPS,
            dbscan_min_pts: DEFAULT_DBSCAN_MIN_PTS,
            bandwidth_rule: BandwidthRule::Scott,
        }
    }

    pub fn with_outcome(mut self, include: bool) -> VariantConfig {
        self.include_outcome = include;
        self
    }

    pub fn with_impact_kind(mut self, kind: ImpactModelKind) -> VariantConfig {
        self.impact_kind = kind;
        self
    }

    /// Enforces the cross-field rules: the baseline variant excludes both the
    /// outcome factor and the category-based model, and a category-based
    /// model replaces (never joins) the outcome factor.
    pub fn validate(&self) -> Result<()> {
        if self.kind == VariantKind::Baseline
            && (self.include_outcome || self.impact_kind == ImpactModelKind::CategoryBased)
        {
            return Err(UwError::Config(
                "baseline variant admits neither the outcome factor nor a category-based model"
                    .into(),
            ));
        }
        if self.impact_kind == ImpactModelKind::CategoryBased && self.include_outcome {
            return Err(UwError::Config(
                "category-based models replace the outcome factor; disable include_outcome".into(),
            ));
        }
        if !self.dbscan_eps.is_finite() || self.dbscan_eps <= 0.0 {
            return Err(UwError::Config(format!(
                "dbscan_eps must be positive, got {}",
                self.dbscan_eps
            )));
        }
        if self.dbscan_min_pts == 0 {
            return Err(UwError::Config("dbscan_min_pts must be at least 1".into()));
        }
        Ok(())
    }

    fn uses_density(&self) -> bool {
        matches!(self.kind, VariantKind::Density | VariantKind::Combined)
    }

    fn uses_homogeneity(&self) -> bool {
        matches!(self.kind, VariantKind::Homogeneity | VariantKind::Combined)
    }

    fn uses_percentile(&self) -> bool {
        self.kind == VariantKind::Percentile
    }

    /// Column names in assembly order: markers, densities, homogeneity,
    /// percentiles, outcome.
    pub fn factor_names(&self, cell_type: &CellTypeSpec) -> Vec<String> {
        let mut names: Vec<String> = cell_type
            .distinct_gated_markers()
            .iter()
            .map(|m| format!("marker_{m}"))
            .collect();
        if self.uses_density() {
            for &(a, b) in &cell_type.gating_pairs {
                names.push(format!("density_{a}_{b}"));
            }
        }
        if self.uses_homogeneity() {
            names.push("homogeneity".into());
        }
        if self.uses_percentile() {
            for m in cell_type.distinct_gated_markers() {
                names.push(format!("percentile_{m}"));
            }
        }
        if self.include_outcome {
            names.push("outcome".into());
        }
        names
    }

    /// A short tag naming the variant for file names and report rows.
    pub fn label(&self) -> String {
        let mut label = self.kind.as_str().to_string();
        if self.include_outcome {
            label.push_str("+outcome");
        }
        if self.impact_kind == ImpactModelKind::CategoryBased {
            label.push('*');
        }
        label
    }
}

/// Per-event factor rows under shared column names.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FactorMatrix {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Raw intensities of the distinct gated markers, ascending marker index.
/// A marker appearing in several gating pairs contributes once.
pub fn marker_factors(event: &Event, cell_type: &CellTypeSpec) -> Result<Vec<f64>> {
    let indexes = cell_type.distinct_gated_markers();
    indexes
        .iter()
        .map(|&m| {
            event.markers.get(m).copied().ok_or_else(|| {
                UwError::Input(format!(
                    "marker index {m} out of range for event {}/{}",
                    event.sample_id, event.event_id
                ))
            })
        })
        .collect()
}

/// Mid-rank percentile of `value` within `sorted` (ascending):
/// `(strictly_less + 0.5 * equal) / n`.
fn mid_rank(sorted: &[f64], value: f64) -> f64 {
    let less = sorted.partition_point(|&v| v < value);
    let less_or_equal = sorted.partition_point(|&v| v <= value);
    (less as f64 + 0.5 * (less_or_equal - less) as f64) / sorted.len() as f64
}

/// Mid-rank percentiles per gated marker, for every event of the sample.
/// Row order matches `sample.events`; column order matches
/// `cell_type.distinct_gated_markers()`. Ranks compare raw values, which
/// equals ranking transformed values since the transform is strictly
/// increasing.
pub fn percentile_factors(sample: &Sample, cell_type: &CellTypeSpec) -> Result<Vec<Vec<f64>>> {
    if sample.events.is_empty() {
        return Err(UwError::Input(format!(
            "cannot rank events of empty sample '{}'",
            sample.sample_id
        )));
    }
    let indexes = cell_type.distinct_gated_markers();
    let mut sorted_per_marker = Vec::with_capacity(indexes.len());
    for &m in &indexes {
        let mut values = Vec::with_capacity(sample.events.len());
        for e in &sample.events {
            let v = e.markers.get(m).copied().ok_or_else(|| {
                UwError::Input(format!(
                    "marker index {m} out of range for event {}/{}",
                    e.sample_id, e.event_id
                ))
            })?;
            values.push(v);
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("markers are finite"));
        sorted_per_marker.push(values);
    }
    Ok(sample
        .events
        .iter()
        .map(|e| {
            indexes
                .iter()
                .zip(&sorted_per_marker)
                .map(|(&m, sorted)| mid_rank(sorted, e.markers[m]))
                .collect()
        })
        .collect())
}

/// The prediction as a factor value: 1.0 for positive, 0.0 for negative.
pub fn outcome_factor(prediction: bool) -> f64 {
    if prediction {
        1.0
    } else {
        0.0
    }
}

/// Computes the factor matrix of one sample under `variant`.
///
/// Sample-context families (density, homogeneity, percentile) are fitted on
/// exactly the events passed in, so the caller controls the population basis
/// by choosing the sample subset.
pub fn assemble_factors(
    variant: &VariantConfig,
    sample: &Sample,
    predictions: &[bool],
    cell_type: &CellTypeSpec,
) -> Result<FactorMatrix> {
    variant.validate()?;
    if predictions.len() != sample.events.len() {
        return Err(UwError::Input(format!(
            "{} predictions for {} events in sample '{}'",
            predictions.len(),
            sample.events.len(),
            sample.sample_id
        )));
    }
    if sample.events.is_empty() {
        return Err(UwError::Input(format!(
            "cannot assemble factors for empty sample '{}'",
            sample.sample_id
        )));
    }

    let names = variant.factor_names(cell_type);

    let density_models: Vec<DensityModel> = if variant.uses_density() {
        cell_type
            .gating_pairs
            .iter()
            .map(|&pair| fit_density(sample, pair, &variant.transform))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let homogeneity = if variant.uses_homogeneity() {
        Some(fit_homogeneity(
            sample,
            predictions,
            cell_type,
            &variant.transform,
            variant.dbscan_eps,
            variant.dbscan_min_pts,
        )?)
    } else {
        None
    };
    let percentiles = if variant.uses_percentile() {
        Some(percentile_factors(sample, cell_type)?)
    } else {
        None
    };

    let mut rows = Vec::with_capacity(sample.events.len());
    for (i, event) in sample.events.iter().enumerate() {
        let mut row = marker_factors(event, cell_type)?;
        for model in &density_models {
            row.push(model.eval_event(event)?);
        }
        if let Some(h) = &homogeneity {
            row.push(h.value(i)?);
        }
        if let Some(p) = &percentiles {
            row.extend(&p[i]);
        }
        if variant.include_outcome {
            row.push(outcome_factor(predictions[i]));
        }
        debug_assert_eq!(row.len(), names.len());
        rows.push(row);
    }

    Ok(FactorMatrix { names, rows })
}
