//! `uwrap dump-factors`: per-event sample-context factor values for one
//! sample, as CSV plus one factor-shaded scatter each.

use std::fmt::Write as _;

use uwrap_core::ddm::DdmModel;
use uwrap_core::quality_factors::{fit_density, fit_homogeneity, percentile_factors};
use uwrap_core::{Result, UwError};

use crate::fsio::atomic_write;
use crate::svg::{frame, shade, Scale, SvgDoc};
use crate::Ctx;

const PLOT_CAP: usize = 20_000;
const FACTOR_HUE: f64 = 210.0;

pub fn cmd_dump_factors(ctx: &Ctx, sample_id: &str, cell_type: &str) -> Result<()> {
    let cfg = &ctx.config;
    let panel = cfg.panel();
    let spec = panel
        .cell_type(cell_type)
        .ok_or_else(|| UwError::Input(format!("unknown cell type '{cell_type}'")))?
        .clone();
    if spec.gating_pairs.is_empty() {
        return Err(UwError::Input(format!(
            "cell type '{cell_type}' has no gating pair to plot"
        )));
    }
    let sample = super::find_sample(ctx, sample_id)?;
    let ddm = DdmModel::load_json(&ctx.ddm_path(cell_type))?;
    let predictions = ddm.predict_sample(&sample)?;

    // Factor columns in assembly order: densities, homogeneity, percentiles.
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for &(a, b) in &spec.gating_pairs {
        let model = fit_density(&sample, (a, b), &cfg.transform)?;
        let mut values = Vec::with_capacity(sample.events.len());
        for e in &sample.events {
            values.push(model.eval_event(e)?);
        }
        columns.push((format!("density_{a}_{b}"), values));
    }
    let homogeneity = fit_homogeneity(
        &sample,
        &predictions,
        &spec,
        &cfg.transform,
        cfg.dbscan.eps,
        cfg.dbscan.min_pts,
    )?;
    columns.push(("homogeneity".into(), homogeneity.values().to_vec()));
    let pct = percentile_factors(&sample, &spec)?;
    for (j, marker) in spec.distinct_gated_markers().iter().enumerate() {
        columns.push((format!("percentile_{marker}"), pct.iter().map(|r| r[j]).collect()));
    }

    let mut csv = String::from("sample_id,event_id");
    for (name, _) in &columns {
        let _ = write!(csv, ",{name}");
    }
    csv.push('\n');
    for (i, e) in sample.events.iter().enumerate() {
        let _ = write!(csv, "{},{}", e.sample_id, e.event_id);
        for (_, values) in &columns {
            let _ = write!(csv, ",{}", values[i]);
        }
        csv.push('\n');
    }
    let csv_path = ctx.reports_dir().join(format!("factors_{cell_type}_{sample_id}.csv"));
    atomic_write(&csv_path, &csv)?;

    // One scatter per factor at the first gating pair, darker = higher.
    let pair = spec.gating_pairs[0];
    let keep = super::plot_indexes(sample.events.len(), PLOT_CAP);
    let coords: Vec<(f64, f64)> = keep
        .iter()
        .map(|&i| {
            let e = &sample.events[i];
            (cfg.transform.apply(e.markers[pair.0]), cfg.transform.apply(e.markers[pair.1]))
        })
        .collect();
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(px, py) in &coords {
        x_lo = x_lo.min(px);
        x_hi = x_hi.max(px);
        y_lo = y_lo.min(py);
        y_hi = y_hi.max(py);
    }

    for (name, values) in &columns {
        let (w, h) = (560.0, 460.0);
        let mut doc = SvgDoc::new(w, h);
        let x = Scale::new((x_lo, x_hi), (60.0, w - 40.0));
        let y = Scale::new((y_lo, y_hi), (h - 60.0, 40.0));
        frame(
            &mut doc,
            &x,
            &y,
            &format!("{sample_id}: {name}"),
            &format!("{} (transformed)", panel.markers[pair.0]),
            &format!("{} (transformed)", panel.markers[pair.1]),
        );
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (&i, &(px, py)) in keep.iter().zip(&coords) {
            let norm = if hi > lo { (values[i] - lo) / (hi - lo) } else { 0.5 };
            doc.circle(x.apply(px), y.apply(py), 1.6, &shade(FACTOR_HUE, norm));
        }
        doc.text(
            w - 40.0,
            18.0,
            "end",
            11.0,
            &format!("range {lo:.4} to {hi:.4}, darker = higher"),
        );
        let out = ctx
            .reports_dir()
            .join(format!("factors_{cell_type}_{sample_id}_{name}.svg"));
        atomic_write(&out, &doc.finish())?;
    }

    println!(
        "{}: {} events, {} factor columns",
        csv_path.display(),
        sample.events.len(),
        columns.len()
    );
    Ok(())
}
