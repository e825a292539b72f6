//! Core data types: events, samples, panels and dataset splits.
//!
//! An [`Event`] is one measured particle: a vector of marker intensities plus
//! optional per-cell-type ground-truth labels and classifier predictions. A
//! [`Sample`] groups the events of one specimen, a [`Dataset`] groups samples
//! under a shared [`Panel`] and records the train/calibration/test split.
//!
//! Splits are assigned per sample, never per event: all events of a specimen
//! stay on the same side so that sample-level context models are never fitted
//! across the split boundary.

mod csv_io;

pub use csv_io::{load_events_csv, write_events_csv};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UwError};

/// One measured event (cell). Marker order follows the panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub sample_id: String,
    pub event_id: String,
    /// Raw (untransformed) marker intensities, one per panel marker.
    pub markers: Vec<f64>,
    /// Ground-truth membership per cell type; absent key = unlabeled.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, bool>,
    /// Classifier predictions per cell type; absent key = not predicted.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub predictions: BTreeMap<String, bool>,
}

impl Event {
    pub fn label(&self, cell_type: &str) -> Option<bool> {
        self.labels.get(cell_type).copied()
    }

    pub fn prediction(&self, cell_type: &str) -> Option<bool> {
        self.predictions.get(cell_type).copied()
    }
}

/// A cell type in the panel hierarchy with the marker pairs used to gate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTypeSpec {
    pub name: String,
    /// Name of the parent cell type; `None` for a root population.
    #[serde(default)]
    pub parent: Option<String>,
    /// Marker index pairs (x, y) inspected when gating this type.
    pub gating_pairs: Vec<(usize, usize)>,
}

impl CellTypeSpec {
    /// Distinct marker indexes appearing in the gating pairs, ascending.
    pub fn distinct_gated_markers(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .gating_pairs
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .collect();
        set.into_iter().collect()
    }
}

/// Marker list plus gated cell-type hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub markers: Vec<String>,
    pub cell_types: Vec<CellTypeSpec>,
}

impl Panel {
    pub fn marker_index(&self, name: &str) -> Option<usize> {
        self.markers.iter().position(|m| m == name)
    }

    pub fn cell_type(&self, name: &str) -> Option<&CellTypeSpec> {
        self.cell_types.iter().find(|c| c.name == name)
    }

    pub fn from_json_str(s: &str) -> Result<Panel> {
        serde_json::from_str(s).map_err(|e| UwError::Schema(format!("panel JSON: {e}")))
    }

    pub fn load_json(path: &Path) -> Result<Panel> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }
}

/// Events of one specimen, in acquisition order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub sample_id: String,
    pub events: Vec<Event>,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Events whose ground-truth label for `cell_type` is positive.
    pub fn subset_by_label(&self, cell_type: &str) -> Sample {
        Sample {
            sample_id: self.sample_id.clone(),
            events: self
                .events
                .iter()
                .filter(|e| e.label(cell_type) == Some(true))
                .cloned()
                .collect(),
        }
    }
}

/// Which side of the pipeline a sample feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Calibration,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Calibration => "calibration",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "calibration" => Some(Split::Calibration),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Samples under one panel, with an optional per-sample split assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub panel: Panel,
    pub samples: Vec<Sample>,
    /// sample_id -> split; may be empty when no split has been assigned yet.
    #[serde(default)]
    pub split: BTreeMap<String, Split>,
}

impl Dataset {
    pub fn total_events(&self) -> usize {
        self.samples.iter().map(|s| s.len()).sum()
    }

    pub fn sample(&self, sample_id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.sample_id == sample_id)
    }

    /// Samples assigned to `split`, in dataset order.
    pub fn samples_in(&self, split: Split) -> Vec<&Sample> {
        self.samples
            .iter()
            .filter(|s| self.split.get(&s.sample_id) == Some(&split))
            .collect()
    }
}

/// Assigns every sample to train/calibration/test.
///
/// Quotas follow the largest-remainder rule on `fractions * n_samples`;
/// remainder ties break in declaration order (train, calibration, test).
/// Assignment shuffles sample order with a ChaCha stream seeded by `seed`,
/// so the same seed over the same dataset always reproduces the same split.
pub fn split_dataset(
    mut dataset: Dataset,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<Dataset> {
    let (ft, fc, fe) = fractions;
    for f in [ft, fc, fe] {
        if !f.is_finite() || f < 0.0 {
            return Err(UwError::Config(format!("split fraction {f} out of range")));
        }
    }
    let total = ft + fc + fe;
    if (total - 1.0).abs() > 1e-9 {
        return Err(UwError::Config(format!(
            "split fractions must sum to 1, got {total}"
        )));
    }
    let n = dataset.samples.len();
    if n < 3 {
        return Err(UwError::Config(format!(
            "need at least 3 samples to split, got {n}"
        )));
    }

    let quotas = largest_remainder_quotas(n, [ft, fc, fe]);

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut split = BTreeMap::new();
    for (pos, &sample_idx) in order.iter().enumerate() {
        let s = if pos < quotas[0] {
            Split::Train
        } else if pos < quotas[0] + quotas[1] {
            Split::Calibration
        } else {
            Split::Test
        };
        split.insert(dataset.samples[sample_idx].sample_id.clone(), s);
    }
    dataset.split = split;
    Ok(dataset)
}

/// Integer quotas summing to `n`: floor each share, then hand the remaining
/// units to the largest fractional parts (ties in declaration order).
fn largest_remainder_quotas(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let mut quotas = [0usize; 3];
    let mut remainders = [0.0f64; 3];
    for i in 0..3 {
        let q = fractions[i] * n as f64;
        quotas[i] = q.floor() as usize;
        remainders[i] = q - q.floor();
    }
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| remainders[b].partial_cmp(&remainders[a]).unwrap());
    for i in 0..n.saturating_sub(assigned) {
        quotas[order[i % 3]] += 1;
    }
    quotas
}

/// One inconsistency found by [`validate_panel`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateMarkerName {
        name: String,
    },
    GatingPairOutOfRange {
        cell_type: String,
        pair: (usize, usize),
        marker_count: usize,
    },
    UnknownParent {
        cell_type: String,
        parent: String,
    },
    ParentCycle {
        cell_type: String,
    },
    MarkerCountMismatch {
        sample_id: String,
        event_id: String,
        expected: usize,
        got: usize,
    },
    /// A positive subtype label without a positive parent label.
    HierarchyViolation {
        sample_id: String,
        event_id: String,
        cell_type: String,
        parent: String,
    },
    UnknownCellType {
        sample_id: String,
        event_id: String,
        cell_type: String,
    },
    SampleIdMismatch {
        sample_id: String,
        event_id: String,
        found: String,
    },
    DuplicateEventId {
        sample_id: String,
        event_id: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateMarkerName { name } => {
                write!(f, "duplicate marker name '{name}'")
            }
            Violation::GatingPairOutOfRange {
                cell_type,
                pair,
                marker_count,
            } => write!(
                f,
                "cell type '{cell_type}' gates pair ({}, {}) but panel has {marker_count} markers",
                pair.0, pair.1
            ),
            Violation::UnknownParent { cell_type, parent } => {
                write!(f, "cell type '{cell_type}' names unknown parent '{parent}'")
            }
            Violation::ParentCycle { cell_type } => {
                write!(f, "cell type '{cell_type}' is part of a parent cycle")
            }
            Violation::MarkerCountMismatch {
                sample_id,
                event_id,
                expected,
                got,
            } => write!(
                f,
                "event {sample_id}/{event_id}: expected {expected} markers, got {got}"
            ),
            Violation::HierarchyViolation {
                sample_id,
                event_id,
                cell_type,
                parent,
            } => write!(
                f,
                "event {sample_id}/{event_id}: '{cell_type}' positive without positive parent '{parent}'"
            ),
            Violation::UnknownCellType {
                sample_id,
                event_id,
                cell_type,
            } => write!(
                f,
                "event {sample_id}/{event_id}: references unknown cell type '{cell_type}'"
            ),
            Violation::SampleIdMismatch {
                sample_id,
                event_id,
                found,
            } => write!(
                f,
                "event {event_id} in sample '{sample_id}' carries sample id '{found}'"
            ),
            Violation::DuplicateEventId {
                sample_id,
                event_id,
            } => write!(f, "sample '{sample_id}': duplicate event id '{event_id}'"),
        }
    }
}

/// Result of a structural consistency check; empty means clean.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a dataset against its panel: marker arity, label hierarchy,
/// gating-pair ranges, parent links and per-sample event-id uniqueness.
pub fn validate_panel(panel: &Panel, dataset: &Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut seen_markers = BTreeSet::new();
    for name in &panel.markers {
        if !seen_markers.insert(name.clone()) {
            report.violations.push(Violation::DuplicateMarkerName {
                name: name.clone(),
            });
        }
    }

    for ct in &panel.cell_types {
        for &pair in &ct.gating_pairs {
            if pair.0 >= panel.markers.len() || pair.1 >= panel.markers.len() {
                report.violations.push(Violation::GatingPairOutOfRange {
                    cell_type: ct.name.clone(),
                    pair,
                    marker_count: panel.markers.len(),
                });
            }
        }
        if let Some(parent) = &ct.parent {
            if panel.cell_type(parent).is_none() {
                report.violations.push(Violation::UnknownParent {
                    cell_type: ct.name.clone(),
                    parent: parent.clone(),
                });
            }
        }
    }

    // Walk parent links; revisiting a node within one walk means a cycle.
    for ct in &panel.cell_types {
        let mut seen = BTreeSet::new();
        seen.insert(ct.name.as_str());
        let mut cur = ct.parent.as_deref();
        while let Some(p) = cur {
            if !seen.insert(p) {
                report.violations.push(Violation::ParentCycle {
                    cell_type: ct.name.clone(),
                });
                break;
            }
            cur = panel.cell_type(p).and_then(|c| c.parent.as_deref());
        }
    }

    for sample in &dataset.samples {
        let mut ids = BTreeSet::new();
        for event in &sample.events {
            if event.sample_id != sample.sample_id {
                report.violations.push(Violation::SampleIdMismatch {
                    sample_id: sample.sample_id.clone(),
                    event_id: event.event_id.clone(),
                    found: event.sample_id.clone(),
                });
            }
            if !ids.insert(event.event_id.clone()) {
                report.violations.push(Violation::DuplicateEventId {
                    sample_id: sample.sample_id.clone(),
                    event_id: event.event_id.clone(),
                });
            }
            if event.markers.len() != panel.markers.len() {
                report.violations.push(Violation::MarkerCountMismatch {
                    sample_id: sample.sample_id.clone(),
                    event_id: event.event_id.clone(),
                    expected: panel.markers.len(),
                    got: event.markers.len(),
                });
            }
            for key in event.labels.keys().chain(event.predictions.keys()) {
                if panel.cell_type(key).is_none() {
                    report.violations.push(Violation::UnknownCellType {
                        sample_id: sample.sample_id.clone(),
                        event_id: event.event_id.clone(),
                        cell_type: key.clone(),
                    });
                }
            }
            for (ct_name, &positive) in &event.labels {
                if !positive {
                    continue;
                }
                let Some(spec) = panel.cell_type(ct_name) else {
                    continue;
                };
                if let Some(parent) = &spec.parent {
                    if event.label(parent) != Some(true) {
                        report.violations.push(Violation::HierarchyViolation {
                            sample_id: sample.sample_id.clone(),
                            event_id: event.event_id.clone(),
                            cell_type: ct_name.clone(),
                            parent: parent.clone(),
                        });
                    }
                }
            }
        }
    }

    report
}
