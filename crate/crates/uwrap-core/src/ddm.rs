//! The wrapped classifier ("data-driven model").
//!
//! Two flavors behind one opaque surface: a built-in one-hidden-layer
//! perceptron trained here, and an external prediction table loaded from CSV
//! for classifiers trained elsewhere. Downstream modules only ever call
//! [`DdmModel::predict`]; weights and tables stay private so nothing can
//! leak classifier internals into the uncertainty machinery.
//!
//! The perceptron consumes standardized transformed markers and is fully
//! deterministic for a given (data, hyperparams, seed) triple.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_model::{Event, Sample};
use crate::error::{Result, UwError};
use crate::quality_factors::MarkerTransform;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdmHyperparams {
    pub hidden_units: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for DdmHyperparams {
    fn default() -> Self {
        DdmHyperparams {
            hidden_units: 16,
            epochs: 30,
            learning_rate: 0.5,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl DdmHyperparams {
    fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(UwError::Config(
                "hidden_units, epochs and batch_size must be positive".into(),
            ));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(UwError::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Facts about how a model was fitted; carried along for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub n_events: usize,
    pub n_positive: usize,
    pub hyperparams: Option<DdmHyperparams>,
    pub train_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MlpParams {
    transform: MarkerTransform,
    /// Per-marker standardization computed on the training set.
    means: Vec<f64>,
    sds: Vec<f64>,
    /// Hidden weights, one row per hidden unit.
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl MlpParams {
    fn forward(&self, markers: &[f64]) -> f64 {
        let mut pre_out = self.b2;
        for (h, (row, &b)) in self.w1.iter().zip(&self.b1).enumerate() {
            let mut a = b;
            for (j, &w) in row.iter().enumerate() {
                let z = (self.transform.apply(markers[j]) - self.means[j]) / self.sds[j];
                a += w * z;
            }
            pre_out += self.w2[h] * a.tanh();
        }
        sigmoid(pre_out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum DdmInner {
    Mlp(MlpParams),
    /// sample_id -> event_id -> predicted membership.
    External {
        table: BTreeMap<String, BTreeMap<String, bool>>,
    },
}

/// An opaque binary classifier for one cell type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdmModel {
    pub cell_type: String,
    pub metadata: TrainingMetadata,
    inner: DdmInner,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Trains the built-in perceptron on the labeled events.
///
/// Inputs are the shared-transform marker values, standardized per marker
/// over the training set. Fitting is plain minibatch gradient descent on the
/// log loss with a ChaCha-seeded init and epoch shuffle, so results are
/// reproducible bit for bit.
pub fn train_ddm(
    events: &[&Event],
    cell_type: &str,
    hyperparams: &DdmHyperparams,
    transform: &MarkerTransform,
) -> Result<DdmModel> {
    hyperparams.validate()?;
    if events.is_empty() {
        return Err(UwError::Training("empty training set".into()));
    }
    let n_markers = events[0].markers.len();
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(events.len());
    let mut ys: Vec<f64> = Vec::with_capacity(events.len());
    for e in events {
        if e.markers.len() != n_markers {
            return Err(UwError::Input(format!(
                "event {}/{} has {} markers, expected {n_markers}",
                e.sample_id,
                e.event_id,
                e.markers.len()
            )));
        }
        let label = e.label(cell_type).ok_or_else(|| {
            UwError::Input(format!(
                "event {}/{} lacks a '{cell_type}' label",
                e.sample_id, e.event_id
            ))
        })?;
        xs.push(transform.apply_all(&e.markers));
        ys.push(if label { 1.0 } else { 0.0 });
    }
    let n_positive = ys.iter().filter(|&&y| y == 1.0).count();
    if n_positive == 0 || n_positive == events.len() {
        return Err(UwError::Training(format!(
            "training set for '{cell_type}' contains a single class \
             ({n_positive} positive of {})",
            events.len()
        )));
    }

    // Standardize in place; sd floor keeps constant markers harmless.
    let n = xs.len() as f64;
    let mut means = vec![0.0; n_markers];
    let mut sds = vec![0.0; n_markers];
    for j in 0..n_markers {
        let mean = xs.iter().map(|x| x[j]).sum::<f64>() / n;
        let var = xs.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / n;
        means[j] = mean;
        sds[j] = var.sqrt().max(1e-9);
    }
    for x in xs.iter_mut() {
        for j in 0..n_markers {
            x[j] = (x[j] - means[j]) / sds[j];
        }
    }

    let hidden = hyperparams.hidden_units;
    let mut rng = ChaCha8Rng::seed_from_u64(hyperparams.seed);
    let r1 = (6.0 / (n_markers + hidden) as f64).sqrt();
    let r2 = (6.0 / (hidden + 1) as f64).sqrt();
    let mut w1: Vec<Vec<f64>> = (0..hidden)
        .map(|_| (0..n_markers).map(|_| rng.gen_range(-r1..r1)).collect())
        .collect();
    let mut b1 = vec![0.0; hidden];
    let mut w2: Vec<f64> = (0..hidden).map(|_| rng.gen_range(-r2..r2)).collect();
    let mut b2 = 0.0;

    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut hidden_act = vec![0.0; hidden];
    for _epoch in 0..hyperparams.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(hyperparams.batch_size) {
            let mut g_w1 = vec![vec![0.0; n_markers]; hidden];
            let mut g_b1 = vec![0.0; hidden];
            let mut g_w2 = vec![0.0; hidden];
            let mut g_b2 = 0.0;
            for &i in batch {
                let x = &xs[i];
                let mut pre_out = b2;
                for h in 0..hidden {
                    let mut a = b1[h];
                    for j in 0..n_markers {
                        a += w1[h][j] * x[j];
                    }
                    let act = a.tanh();
                    hidden_act[h] = act;
                    pre_out += w2[h] * act;
                }
                let out = sigmoid(pre_out);
                let delta_out = out - ys[i];
                g_b2 += delta_out;
                for h in 0..hidden {
                    g_w2[h] += delta_out * hidden_act[h];
                    let delta_h = delta_out * w2[h] * (1.0 - hidden_act[h] * hidden_act[h]);
                    g_b1[h] += delta_h;
                    for j in 0..n_markers {
                        g_w1[h][j] += delta_h * x[j];
                    }
                }
            }
            let step = hyperparams.learning_rate / batch.len() as f64;
            b2 -= step * g_b2;
            for h in 0..hidden {
                w2[h] -= step * g_w2[h];
                b1[h] -= step * g_b1[h];
                for j in 0..n_markers {
                    w1[h][j] -= step * g_w1[h][j];
                }
            }
        }
    }

    let params = MlpParams {
        transform: transform.clone(),
        means,
        sds,
        w1,
        b1,
        w2,
        b2,
    };
    // Training accuracy straight off the standardized cache.
    let correct = xs
        .iter()
        .zip(&ys)
        .filter(|(x, &y)| {
            let mut pre_out = params.b2;
            for h in 0..hidden {
                let mut a = params.b1[h];
                for j in 0..n_markers {
                    a += params.w1[h][j] * x[j];
                }
                pre_out += params.w2[h] * a.tanh();
            }
            (sigmoid(pre_out) >= 0.5) == (y == 1.0)
        })
        .count();

    Ok(DdmModel {
        cell_type: cell_type.to_string(),
        metadata: TrainingMetadata {
            n_events: events.len(),
            n_positive,
            hyperparams: Some(hyperparams.clone()),
            train_accuracy: Some(correct as f64 / events.len() as f64),
        },
        inner: DdmInner::Mlp(params),
    })
}

impl DdmModel {
    /// Predicts membership for one event. Threshold is 0.5 on the logistic
    /// output; external tables are looked up by (sample_id, event_id).
    pub fn predict(&self, event: &Event) -> Result<bool> {
        match &self.inner {
            DdmInner::Mlp(p) => {
                if event.markers.len() != p.means.len() {
                    return Err(UwError::Input(format!(
                        "event {}/{} has {} markers, model expects {}",
                        event.sample_id,
                        event.event_id,
                        event.markers.len(),
                        p.means.len()
                    )));
                }
                Ok(p.forward(&event.markers) >= 0.5)
            }
            DdmInner::External { table } => table
                .get(&event.sample_id)
                .and_then(|m| m.get(&event.event_id))
                .copied()
                .ok_or_else(|| {
                    UwError::Lookup(format!(
                        "no external prediction for event {}/{}",
                        event.sample_id, event.event_id
                    ))
                }),
        }
    }

    pub fn predict_sample(&self, sample: &Sample) -> Result<Vec<bool>> {
        sample.events.iter().map(|e| self.predict(e)).collect()
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| UwError::Schema(format!("model serialization: {e}")))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<DdmModel> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| UwError::Schema(format!("model JSON: {e}")))
    }
}

/// Loads an external prediction table from `sample_id,event_id,pred` CSV.
pub fn load_external_predictions(path: &Path, cell_type: &str) -> Result<DdmModel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or_else(|| UwError::Schema("empty file: missing header".into()))?
        .map_err(UwError::from)?;
    let cols: Vec<&str> = header.iter().collect();
    if cols != ["sample_id", "event_id", "pred"] {
        return Err(UwError::Schema(format!(
            "expected header sample_id,event_id,pred, got '{}'",
            cols.join(",")
        )));
    }

    let mut table: BTreeMap<String, BTreeMap<String, bool>> = BTreeMap::new();
    let mut count = 0usize;
    let mut positives = 0usize;
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(UwError::from)?;
        if rec.len() != 3 {
            return Err(UwError::Parse {
                line,
                msg: format!("expected 3 fields, got {}", rec.len()),
            });
        }
        let pred = match &rec[2] {
            "0" => false,
            "1" => true,
            other => {
                return Err(UwError::Parse {
                    line,
                    msg: format!("pred: expected 0 or 1, got '{other}'"),
                })
            }
        };
        let by_event = table.entry(rec[0].to_string()).or_default();
        if by_event.insert(rec[1].to_string(), pred).is_some() {
            return Err(UwError::Schema(format!(
                "duplicate prediction for event {}/{} (line {line})",
                &rec[0], &rec[1]
            )));
        }
        count += 1;
        positives += pred as usize;
    }

    Ok(DdmModel {
        cell_type: cell_type.to_string(),
        metadata: TrainingMetadata {
            n_events: count,
            n_positive: positives,
            hyperparams: None,
            train_accuracy: None,
        },
        inner: DdmInner::External { table },
    })
}

/// Writes predictions in the external-table layout.
pub fn write_predictions_csv<'a, I>(path: &Path, rows: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a str, bool)>,
{
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["sample_id", "event_id", "pred"])?;
    for (sample_id, event_id, pred) in rows {
        writer.write_record([sample_id, event_id, if pred { "1" } else { "0" }])?;
    }
    writer.flush()?;
    Ok(())
}
