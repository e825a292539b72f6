//! Seeded synthetic event generator.
//!
//! Events are drawn from a Gaussian mixture in *transformed* marker space and
//! mapped back through the inverse transform, so the raw values look like
//! instrument output. Each sample additionally receives a per-marker mean
//! shift drawn from Normal(0, sample_shift_sd^2), emulating specimen-to-
//! specimen variation: the shift is the knob that breaks the i.i.d. relation
//! between samples.
//!
//! Determinism contract: `generate_sample` draws from a ChaCha stream keyed by
//! (seed, sample_index) with a fixed draw order (shift vector first, then per
//! event one component pick followed by one normal per marker), so any sample
//! can be regenerated in isolation.

use std::collections::BTreeMap;

use rand::distributions::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data_model::{CellTypeSpec, Dataset, Event, Panel, Sample, Split};
use crate::error::{Result, UwError};
use crate::quality_factors::MarkerTransform;

/// One mixture component: a labeled Gaussian blob in transformed space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    /// Cell-type membership stamped on every event drawn from this component.
    pub labels: BTreeMap<String, bool>,
    pub weight: f64,
    /// Component mean per marker, in transformed units.
    pub mean: Vec<f64>,
    /// Component standard deviation per marker, in transformed units.
    pub sd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub panel: Panel,
    pub components: Vec<MixtureComponent>,
    pub events_per_sample: usize,
    /// Standard deviation of the per-sample mean shift (transformed units).
    pub sample_shift_sd: f64,
    pub transform: MarkerTransform,
}

impl GeneratorConfig {
    /// Checks weights, dimensions and label consistency.
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(UwError::Config("generator needs at least one component".into()));
        }
        if self.events_per_sample == 0 {
            return Err(UwError::Config("events_per_sample must be at least 1".into()));
        }
        if !self.sample_shift_sd.is_finite() || self.sample_shift_sd < 0.0 {
            return Err(UwError::Config(format!(
                "sample_shift_sd must be non-negative, got {}",
                self.sample_shift_sd
            )));
        }
        let n_markers = self.panel.markers.len();
        let mut weight_sum = 0.0;
        for (i, comp) in self.components.iter().enumerate() {
            if !comp.weight.is_finite() || comp.weight <= 0.0 {
                return Err(UwError::Config(format!(
                    "component {i}: weight must be positive, got {}",
                    comp.weight
                )));
            }
            weight_sum += comp.weight;
            if comp.mean.len() != n_markers || comp.sd.len() != n_markers {
                return Err(UwError::Config(format!(
                    "component {i}: mean/sd must have {n_markers} entries"
                )));
            }
            if comp.sd.iter().any(|&s| !s.is_finite() || s < 0.0) {
                return Err(UwError::Config(format!(
                    "component {i}: standard deviations must be non-negative"
                )));
            }
            for (ct, &positive) in &comp.labels {
                let Some(spec) = self.panel.cell_type(ct) else {
                    return Err(UwError::Config(format!(
                        "component {i}: label references unknown cell type '{ct}'"
                    )));
                };
                if positive {
                    if let Some(parent) = &spec.parent {
                        if comp.labels.get(parent) != Some(&true) {
                            return Err(UwError::Config(format!(
                                "component {i}: '{ct}' positive but parent '{parent}' is not"
                            )));
                        }
                    }
                }
            }
        }
        if (weight_sum - 1.0).abs() > 1e-9 {
            return Err(UwError::Config(format!(
                "component weights must sum to 1, got {weight_sum}"
            )));
        }
        Ok(())
    }
}

fn sample_rng(seed: u64, sample_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index as u64);
    rng
}

/// Draws one full sample. Identical (config, seed, sample_index) triples give
/// identical events; distinct sample indexes give independent streams.
pub fn generate_sample(config: &GeneratorConfig, seed: u64, sample_index: usize) -> Result<Sample> {
    config.validate()?;
    let n_markers = config.panel.markers.len();
    let mut rng = sample_rng(seed, sample_index);

    // The shift draws always happen, even at sd = 0, to keep the stream
    // layout independent of the configured value.
    let mut shift = vec![0.0f64; n_markers];
    for s in shift.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *s = config.sample_shift_sd * z;
    }

    let cumulative: Vec<f64> = config
        .components
        .iter()
        .scan(0.0, |acc, c| {
            *acc += c.weight;
            Some(*acc)
        })
        .collect();

    let sample_id = format!("s{sample_index:03}");
    let mut events = Vec::with_capacity(config.events_per_sample);
    for i in 0..config.events_per_sample {
        let u: f64 = rng.gen();
        let comp_idx = cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(config.components.len() - 1);
        let comp = &config.components[comp_idx];

        let mut markers = Vec::with_capacity(n_markers);
        for m in 0..n_markers {
            let z: f64 = StandardNormal.sample(&mut rng);
            let t = comp.mean[m] + shift[m] + comp.sd[m] * z;
            markers.push(config.transform.invert(t));
        }

        events.push(Event {
            sample_id: sample_id.clone(),
            event_id: format!("e{i:05}"),
            markers,
            labels: comp.labels.clone(),
            predictions: BTreeMap::new(),
        });
    }

    Ok(Sample { sample_id, events })
}

/// Generates `train + calibration + test` samples (each count >= 1) with the
/// split assigned by position: indexes [0, train) are train, then calibration,
/// then test.
pub fn generate_dataset(
    config: &GeneratorConfig,
    counts: (usize, usize, usize),
    seed: u64,
) -> Result<Dataset> {
    let (n_train, n_calib, n_test) = counts;
    if n_train == 0 || n_calib == 0 || n_test == 0 {
        return Err(UwError::Config(format!(
            "each split needs at least one sample, got ({n_train}, {n_calib}, {n_test})"
        )));
    }
    config.validate()?;

    let total = n_train + n_calib + n_test;
    let mut samples = Vec::with_capacity(total);
    let mut split = BTreeMap::new();
    for idx in 0..total {
        let sample = generate_sample(config, seed, idx)?;
        let s = if idx < n_train {
            Split::Train
        } else if idx < n_train + n_calib {
            Split::Calibration
        } else {
            Split::Test
        };
        split.insert(sample.sample_id.clone(), s);
        samples.push(sample);
    }

    Ok(Dataset {
        panel: config.panel.clone(),
        samples,
        split,
    })
}

/// Which quadrant of a 2D gate selects the population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrant {
    UpperLeft,
    UpperRight,
    LowerLeft,
    LowerRight,
}

/// A rectangular quadrant gate in transformed coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantGate {
    pub pair: (usize, usize),
    pub threshold_x: f64,
    pub threshold_y: f64,
    pub quadrant: Quadrant,
}

impl QuadrantGate {
    /// Points exactly on a threshold belong to the right/upper half.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let right = x >= self.threshold_x;
        let upper = y >= self.threshold_y;
        match self.quadrant {
            Quadrant::UpperLeft => !right && upper,
            Quadrant::UpperRight => right && upper,
            Quadrant::LowerLeft => !right && !upper,
            Quadrant::LowerRight => right && !upper,
        }
    }
}

/// Gates per cell type, keyed by cell-type name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadrantGates {
    pub gates: BTreeMap<String, QuadrantGate>,
}

impl QuadrantGates {
    pub fn validate(&self, panel: &Panel) -> Result<()> {
        for (ct, gate) in &self.gates {
            if panel.cell_type(ct).is_none() {
                return Err(UwError::Config(format!(
                    "gate references unknown cell type '{ct}'"
                )));
            }
            if gate.pair.0 >= panel.markers.len() || gate.pair.1 >= panel.markers.len() {
                return Err(UwError::Config(format!(
                    "gate for '{ct}' uses marker pair ({}, {}) outside the panel",
                    gate.pair.0, gate.pair.1
                )));
            }
        }
        Ok(())
    }
}

/// Labels every event of `sample` by quadrant membership, respecting the
/// hierarchy: a gated type is positive iff its own quadrant contains the
/// transformed pair AND its parent is positive. Parents resolve to their own
/// gate when gated, to an existing event label otherwise, and to
/// "unconstrained" when neither exists.
pub fn quadrant_gate_labels(
    sample: &Sample,
    gates: &QuadrantGates,
    panel: &Panel,
    transform: &MarkerTransform,
) -> Result<Vec<BTreeMap<String, bool>>> {
    gates.validate(panel)?;
    for event in &sample.events {
        if event.markers.len() != panel.markers.len() {
            return Err(UwError::Input(format!(
                "event {}/{} has {} markers, panel expects {}",
                event.sample_id,
                event.event_id,
                event.markers.len(),
                panel.markers.len()
            )));
        }
    }

    fn resolve(
        ct: &str,
        event: &Event,
        gates: &QuadrantGates,
        panel: &Panel,
        transform: &MarkerTransform,
        memo: &mut BTreeMap<String, bool>,
        visiting: &mut Vec<String>,
    ) -> Result<bool> {
        if let Some(&v) = memo.get(ct) {
            return Ok(v);
        }
        if visiting.iter().any(|v| v == ct) {
            return Err(UwError::Config(format!("gate hierarchy cycle at '{ct}'")));
        }
        let Some(gate) = gates.gates.get(ct) else {
            // Not gated: fall back to an existing label; absent means no
            // constraint from this ancestor.
            return Ok(event.label(ct).unwrap_or(true));
        };
        visiting.push(ct.to_string());
        let x = transform.apply(event.markers[gate.pair.0]);
        let y = transform.apply(event.markers[gate.pair.1]);
        let mut positive = gate.contains(x, y);
        if positive {
            if let Some(parent) = panel.cell_type(ct).and_then(|c| c.parent.clone()) {
                positive = resolve(&parent, event, gates, panel, transform, memo, visiting)?;
            }
        }
        visiting.pop();
        memo.insert(ct.to_string(), positive);
        Ok(positive)
    }

    let mut out = Vec::with_capacity(sample.events.len());
    for event in &sample.events {
        let mut memo = BTreeMap::new();
        for ct in gates.gates.keys() {
            let mut visiting = Vec::new();
            resolve(ct, event, gates, panel, transform, &mut memo, &mut visiting)?;
        }
        // Only gated types are reported, even if ancestors were consulted.
        let labels: BTreeMap<String, bool> = memo
            .into_iter()
            .filter(|(ct, _)| gates.gates.contains_key(ct))
            .collect();
        out.push(labels);
    }
    Ok(out)
}

/// Five-marker demo panel: a root lymphocyte gate over CD45/SSC and three
/// subtypes gated on CD19, CD3 and CD56.
pub fn demo_panel() -> Panel {
    Panel {
        markers: vec![
            "CD45".into(),
            "SSC".into(),
            "CD19".into(),
            "CD3".into(),
            "CD56".into(),
        ],
        cell_types: vec![
            CellTypeSpec {
                name: "L".into(),
                parent: None,
                gating_pairs: vec![(0, 1)],
            },
            CellTypeSpec {
                name: "BP".into(),
                parent: Some("L".into()),
                gating_pairs: vec![(2, 3)],
            },
            CellTypeSpec {
                name: "TP".into(),
                parent: Some("L".into()),
                gating_pairs: vec![(3, 2)],
            },
            CellTypeSpec {
                name: "NKP".into(),
                parent: Some("L".into()),
                gating_pairs: vec![(4, 3)],
            },
        ],
    }
}

fn labels(pairs: &[(&str, bool)]) -> BTreeMap<String, bool> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

/// Five-component demo mixture over [`demo_panel`]. Around 40% of events are
/// lymphocytes; the NK population deliberately overlaps an unlabeled dim
/// lymphocyte population so its classifier has a non-trivial error region.
pub fn demo_generator_config() -> GeneratorConfig {
    let all_neg = [("L", false), ("BP", false), ("TP", false), ("NKP", false)];
    GeneratorConfig {
        panel: demo_panel(),
        components: vec![
            // Non-lymphocytes: CD45 dim, high side scatter.
            MixtureComponent {
                labels: labels(&all_neg),
                weight: 0.60,
                mean: vec![1.9, 2.6, 0.9, 0.9, 0.9],
                sd: vec![0.38, 0.35, 0.30, 0.30, 0.30],
            },
            // B cells.
            MixtureComponent {
                labels: labels(&[("L", true), ("BP", true), ("TP", false), ("NKP", false)]),
                weight: 0.10,
                mean: vec![3.0, 1.2, 2.6, 0.7, 0.9],
                sd: vec![0.18, 0.22, 0.25, 0.25, 0.25],
            },
            // T cells.
            MixtureComponent {
                labels: labels(&[("L", true), ("BP", false), ("TP", true), ("NKP", false)]),
                weight: 0.18,
                mean: vec![3.0, 1.2, 0.7, 2.6, 1.0],
                sd: vec![0.18, 0.22, 0.25, 0.25, 0.30],
            },
            // NK cells.
            MixtureComponent {
                labels: labels(&[("L", true), ("BP", false), ("TP", false), ("NKP", true)]),
                weight: 0.065,
                mean: vec![3.0, 1.2, 0.8, 1.0, 2.2],
                sd: vec![0.18, 0.22, 0.25, 0.30, 0.40],
            },
            // Remaining lymphocytes (dim, partially CD56 positive).
            MixtureComponent {
                labels: labels(&[("L", true), ("BP", false), ("TP", false), ("NKP", false)]),
                weight: 0.055,
                mean: vec![3.0, 1.2, 0.9, 1.4, 1.6],
                sd: vec![0.18, 0.22, 0.25, 0.35, 0.45],
            },
        ],
        events_per_sample: 5_000,
        sample_shift_sd: 0.06,
        transform: MarkerTransform::default(),
    }
}

/// Manual-style quadrant gates matching the demo mixture geometry.
pub fn demo_quadrant_gates() -> QuadrantGates {
    let mut gates = BTreeMap::new();
    gates.insert(
        "L".to_string(),
        QuadrantGate {
            pair: (0, 1),
            threshold_x: 2.5,
            threshold_y: 1.9,
            quadrant: Quadrant::LowerRight,
        },
    );
    gates.insert(
        "BP".to_string(),
        QuadrantGate {
            pair: (2, 3),
            threshold_x: 1.7,
            threshold_y: 1.7,
            quadrant: Quadrant::LowerRight,
        },
    );
    gates.insert(
        "TP".to_string(),
        QuadrantGate {
            pair: (3, 2),
            threshold_x: 1.7,
            threshold_y: 1.7,
            quadrant: Quadrant::LowerRight,
        },
    );
    gates.insert(
        "NKP".to_string(),
        QuadrantGate {
            pair: (4, 3),
            threshold_x: 1.9,
            threshold_y: 1.7,
            quadrant: Quadrant::LowerRight,
        },
    );
    QuadrantGates { gates }
}
