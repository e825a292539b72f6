//! `uwrap train`: fit one classifier per cell type and report calibration
//! accuracy.

use uwrap_core::data_model::{Dataset, Event};
use uwrap_core::ddm::{train_ddm, DdmModel};
use uwrap_core::{Result, UwError};

use crate::fsio::{atomic_write, atomic_write_with};
use crate::Ctx;

/// Training basis: all events for root cell types, the labeled parent
/// subset for subtypes.
fn basis_events<'a>(dataset: &'a Dataset, parent: Option<&str>) -> Vec<&'a Event> {
    dataset
        .samples
        .iter()
        .flat_map(|s| s.events.iter())
        .filter(|e| match parent {
            None => true,
            Some(p) => e.label(p) == Some(true),
        })
        .collect()
}

fn accuracy(model: &DdmModel, events: &[&Event], cell_type: &str) -> Result<f64> {
    if events.is_empty() {
        return Err(UwError::Input(format!(
            "no calibration events to score for '{cell_type}'"
        )));
    }
    let mut hits = 0usize;
    for e in events {
        let truth = e.label(cell_type).ok_or_else(|| {
            UwError::Schema(format!("event {}/{} lacks a '{cell_type}' label", e.sample_id, e.event_id))
        })?;
        if model.predict(e)? == truth {
            hits += 1;
        }
    }
    Ok(hits as f64 / events.len() as f64)
}

pub fn cmd_train(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.config;
    let panel = cfg.panel();
    let train = super::load_split(ctx, "train")?;
    let calib = super::load_split(ctx, "calibration")?;

    let mut metric_rows = Vec::new();
    for (index, ct) in panel.cell_types.iter().enumerate() {
        let parent = ct.parent.as_deref();
        let train_events = basis_events(&train, parent);
        if train_events.iter().any(|e| e.label(&ct.name).is_none()) {
            return Err(UwError::Schema(format!(
                "training data lacks '{}' labels; regenerate or relabel",
                ct.name
            )));
        }
        let hyper = cfg.ddm_hyperparams(&ct.name, index);
        let model = train_ddm(&train_events, &ct.name, &hyper, &cfg.transform)?;
        atomic_write_with(&ctx.ddm_path(&ct.name), |tmp| model.save_json(tmp))?;

        let calib_events = basis_events(&calib, parent);
        let acc = accuracy(&model, &calib_events, &ct.name)?;
        println!(
            "{:<5} trained on {:>7} events, calibration accuracy {:.4} ({} events)",
            ct.name,
            train_events.len(),
            acc,
            calib_events.len()
        );
        metric_rows.push(format!(
            "{},{},{},{}",
            ct.name,
            train_events.len(),
            calib_events.len(),
            acc
        ));
    }

    let csv = format!(
        "cell_type,events_train,events_calibration,accuracy\n{}\n",
        metric_rows.join("\n")
    );
    atomic_write(&ctx.models_dir().join("train_metrics.csv"), &csv)?;
    Ok(())
}
