//! Event CSV reading and writing.
//!
//! Layout: `sample_id,event_id,m_<marker>...[,label_<type>...][,pred_<type>...][,split]`.
//! Marker columns must list the panel markers in panel order. Label and
//! prediction cells hold `0`/`1`, an empty cell meaning "not recorded". The
//! optional split column holds `train`/`calibration`/`test` per row; all rows
//! of one sample must agree.
//!
//! Floats are written with the shortest decimal form that parses back to the
//! identical bit pattern, so write-then-read is lossless.

use std::collections::BTreeMap;
use std::path::Path;

use crate::data_model::{Dataset, Event, Panel, Sample, Split};
use crate::error::{Result, UwError};

struct HeaderLayout {
    /// Column index of the first marker; markers are contiguous in panel order.
    marker_start: usize,
    label_cols: Vec<(usize, String)>,
    pred_cols: Vec<(usize, String)>,
    split_col: Option<usize>,
    width: usize,
}

fn parse_header(header: &csv::StringRecord, panel: &Panel) -> Result<HeaderLayout> {
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 2 || cols[0] != "sample_id" || cols[1] != "event_id" {
        return Err(UwError::Schema(
            "header must start with sample_id,event_id".into(),
        ));
    }
    let marker_start = 2;
    if cols.len() < marker_start + panel.markers.len() {
        return Err(UwError::Schema(format!(
            "header has {} columns, too few for {} panel markers",
            cols.len(),
            panel.markers.len()
        )));
    }
    for (i, marker) in panel.markers.iter().enumerate() {
        let expected = format!("m_{marker}");
        let got = cols[marker_start + i];
        if got != expected {
            return Err(UwError::Schema(format!(
                "marker column {} is '{got}', expected '{expected}' (panel order)",
                marker_start + i + 1
            )));
        }
    }

    let mut label_cols = Vec::new();
    let mut pred_cols = Vec::new();
    let mut split_col = None;
    let mut idx = marker_start + panel.markers.len();
    // Remaining columns must appear as label_* block, then pred_* block,
    // then an optional split column.
    #[derive(PartialEq, PartialOrd)]
    enum Section {
        Labels,
        Preds,
        SplitSeen,
    }
    let mut section = Section::Labels;
    while idx < cols.len() {
        let col = cols[idx];
        if let Some(ct) = col.strip_prefix("label_") {
            if section > Section::Labels {
                return Err(UwError::Schema(format!(
                    "label column '{col}' appears after prediction or split columns"
                )));
            }
            if panel.cell_type(ct).is_none() {
                return Err(UwError::Schema(format!(
                    "label column references unknown cell type '{ct}'"
                )));
            }
            if label_cols.iter().any(|(_, c)| c == ct) {
                return Err(UwError::Schema(format!("duplicate column '{col}'")));
            }
            label_cols.push((idx, ct.to_string()));
        } else if let Some(ct) = col.strip_prefix("pred_") {
            if section > Section::Preds {
                return Err(UwError::Schema(format!(
                    "prediction column '{col}' appears after the split column"
                )));
            }
            section = Section::Preds;
            if panel.cell_type(ct).is_none() {
                return Err(UwError::Schema(format!(
                    "prediction column references unknown cell type '{ct}'"
                )));
            }
            if pred_cols.iter().any(|(_, c)| c == ct) {
                return Err(UwError::Schema(format!("duplicate column '{col}'")));
            }
            pred_cols.push((idx, ct.to_string()));
        } else if col == "split" {
            if section == Section::SplitSeen {
                return Err(UwError::Schema("duplicate split column".into()));
            }
            section = Section::SplitSeen;
            split_col = Some(idx);
        } else {
            return Err(UwError::Schema(format!("unrecognized column '{col}'")));
        }
        idx += 1;
    }

    Ok(HeaderLayout {
        marker_start,
        label_cols,
        pred_cols,
        split_col,
        width: cols.len(),
    })
}

fn parse_flag(raw: &str, line: usize, col: &str) -> Result<Option<bool>> {
    match raw {
        "" => Ok(None),
        "0" => Ok(Some(false)),
        "1" => Ok(Some(true)),
        other => Err(UwError::Parse {
            line,
            msg: format!("column {col}: expected 0, 1 or empty, got '{other}'"),
        }),
    }
}

/// Reads an event CSV against `panel`. Samples appear in first-occurrence
/// order, events in file order within each sample.
pub fn load_events_csv(path: &Path, panel: &Panel) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => UwError::Io(std::io::Error::new(
                std::io::ErrorKind::Other,
                format!("{}: {e}", path.display()),
            )),
            _ => UwError::Schema(e.to_string()),
        })?;

    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| UwError::Parse {
            line: 1,
            msg: e.to_string(),
        })?,
        None => return Err(UwError::Schema("empty file: missing header".into())),
    };
    let layout = parse_header(&header, panel)?;

    let mut order: Vec<String> = Vec::new();
    let mut by_sample: BTreeMap<String, Sample> = BTreeMap::new();
    let mut split: BTreeMap<String, Split> = BTreeMap::new();

    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| UwError::Parse {
            line,
            msg: e.to_string(),
        })?;
        if rec.len() != layout.width {
            return Err(UwError::Parse {
                line,
                msg: format!("expected {} fields, got {}", layout.width, rec.len()),
            });
        }
        let sample_id = rec[0].to_string();
        let event_id = rec[1].to_string();

        let mut markers = Vec::with_capacity(panel.markers.len());
        for (j, name) in panel.markers.iter().enumerate() {
            let raw = &rec[layout.marker_start + j];
            let value: f64 = raw.parse().map_err(|_| UwError::Parse {
                line,
                msg: format!("marker m_{name}: invalid number '{raw}'"),
            })?;
            if !value.is_finite() {
                return Err(UwError::Parse {
                    line,
                    msg: format!("marker m_{name}: non-finite value '{raw}'"),
                });
            }
            markers.push(value);
        }

        let mut labels = BTreeMap::new();
        for (col, ct) in &layout.label_cols {
            if let Some(v) = parse_flag(&rec[*col], line, &format!("label_{ct}"))? {
                labels.insert(ct.clone(), v);
            }
        }
        let mut predictions = BTreeMap::new();
        for (col, ct) in &layout.pred_cols {
            if let Some(v) = parse_flag(&rec[*col], line, &format!("pred_{ct}"))? {
                predictions.insert(ct.clone(), v);
            }
        }

        if let Some(col) = layout.split_col {
            let raw = &rec[col];
            if !raw.is_empty() {
                let s = Split::parse(raw).ok_or_else(|| UwError::Parse {
                    line,
                    msg: format!("split: expected train/calibration/test, got '{raw}'"),
                })?;
                match split.get(&sample_id) {
                    Some(prev) if *prev != s => {
                        return Err(UwError::Schema(format!(
                            "sample '{sample_id}' assigned to both {prev} and {s}"
                        )));
                    }
                    _ => {
                        split.insert(sample_id.clone(), s);
                    }
                }
            }
        }

        let sample = by_sample.entry(sample_id.clone()).or_insert_with(|| {
            order.push(sample_id.clone());
            Sample {
                sample_id: sample_id.clone(),
                events: Vec::new(),
            }
        });
        if sample.events.iter().any(|e| e.event_id == event_id) {
            return Err(UwError::Schema(format!(
                "sample '{sample_id}': duplicate event id '{event_id}' (line {line})"
            )));
        }
        sample.events.push(Event {
            sample_id,
            event_id,
            markers,
            labels,
            predictions,
        });
    }

    let samples = order
        .into_iter()
        .map(|id| by_sample.remove(&id).expect("sample recorded in order"))
        .collect();

    Ok(Dataset {
        panel: panel.clone(),
        samples,
        split,
    })
}

/// Shortest decimal form that parses back to the same f64.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Writes a dataset back to the event CSV layout. Label and prediction
/// columns are emitted for every cell type (panel order) that appears on at
/// least one event; the split column is emitted iff any split is assigned.
pub fn write_events_csv(path: &Path, dataset: &Dataset) -> Result<()> {
    let panel = &dataset.panel;
    let has_label = |ct: &str| {
        dataset
            .samples
            .iter()
            .flat_map(|s| &s.events)
            .any(|e| e.labels.contains_key(ct))
    };
    let has_pred = |ct: &str| {
        dataset
            .samples
            .iter()
            .flat_map(|s| &s.events)
            .any(|e| e.predictions.contains_key(ct))
    };
    let label_types: Vec<&str> = panel
        .cell_types
        .iter()
        .map(|c| c.name.as_str())
        .filter(|ct| has_label(ct))
        .collect();
    let pred_types: Vec<&str> = panel
        .cell_types
        .iter()
        .map(|c| c.name.as_str())
        .filter(|ct| has_pred(ct))
        .collect();
    let with_split = !dataset.split.is_empty();

    let mut writer = csv::Writer::from_path(path)?;

    let mut header: Vec<String> = vec!["sample_id".into(), "event_id".into()];
    header.extend(panel.markers.iter().map(|m| format!("m_{m}")));
    header.extend(label_types.iter().map(|ct| format!("label_{ct}")));
    header.extend(pred_types.iter().map(|ct| format!("pred_{ct}")));
    if with_split {
        header.push("split".into());
    }
    writer.write_record(&header)?;

    let flag = |v: Option<bool>| match v {
        None => String::new(),
        Some(false) => "0".into(),
        Some(true) => "1".into(),
    };

    for sample in &dataset.samples {
        for event in &sample.events {
            let mut row: Vec<String> = vec![event.sample_id.clone(), event.event_id.clone()];
            row.extend(event.markers.iter().map(|&v| fmt_f64(v)));
            row.extend(label_types.iter().map(|ct| flag(event.label(ct))));
            row.extend(pred_types.iter().map(|ct| flag(event.prediction(ct))));
            if with_split {
                row.push(
                    dataset
                        .split
                        .get(&sample.sample_id)
                        .map(|s| s.to_string())
                        .unwrap_or_default(),
                );
            }
            writer.write_record(&row)?;
        }
    }
    writer.flush()?;
    Ok(())
}
