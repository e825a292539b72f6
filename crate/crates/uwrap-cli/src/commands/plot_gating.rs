//! `uwrap plot-gating`: one sample's events in a 2D gating plot, shaded by
//! wrapper uncertainty.

use uwrap_core::ddm::DdmModel;
use uwrap_core::impact_model::UncertaintyWrapper;
use uwrap_core::{Result, UwError};

use crate::fsio::atomic_write;
use crate::svg::{frame, shade, Scale, SvgDoc, GREEN_HUE, PURPLE_HUE};
use crate::Ctx;

const PLOT_CAP: usize = 20_000;

pub fn cmd_plot_gating(
    ctx: &Ctx,
    sample_id: &str,
    cell_type: &str,
    pair: Option<(usize, usize)>,
) -> Result<()> {
    let cfg = &ctx.config;
    let panel = cfg.panel();
    let spec = panel
        .cell_type(cell_type)
        .ok_or_else(|| UwError::Input(format!("unknown cell type '{cell_type}'")))?;
    let pair = match pair {
        Some(p) => p,
        None => *spec.gating_pairs.first().ok_or_else(|| {
            UwError::Input(format!("cell type '{cell_type}' has no gating pair to plot"))
        })?,
    };
    if pair.0 >= panel.markers.len() || pair.1 >= panel.markers.len() {
        return Err(UwError::Input(format!(
            "marker pair ({}, {}) is outside the {}-marker panel",
            pair.0,
            pair.1,
            panel.markers.len()
        )));
    }

    let sample = super::find_sample(ctx, sample_id)?;
    let variant = cfg.aggregate_variant(cell_type);
    let wrapper = UncertaintyWrapper::load_json(&ctx.wrapper_path(cell_type, &variant))?;
    let ddm = DdmModel::load_json(&ctx.ddm_path(cell_type))?;
    let estimates = wrapper.apply(&ddm, &sample)?;

    let keep = super::plot_indexes(sample.events.len(), PLOT_CAP);
    let points: Vec<(f64, f64, bool, f64)> = keep
        .iter()
        .map(|&i| {
            let e = &sample.events[i];
            let est = &estimates[i];
            (
                cfg.transform.apply(e.markers[pair.0]),
                cfg.transform.apply(e.markers[pair.1]),
                est.prediction,
                est.uncertainty,
            )
        })
        .collect();

    let (w, h) = (640.0, 480.0);
    let mut doc = SvgDoc::new(w, h);
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(px, py, _, _) in &points {
        x_lo = x_lo.min(px);
        x_hi = x_hi.max(px);
        y_lo = y_lo.min(py);
        y_hi = y_hi.max(py);
    }
    if points.is_empty() {
        (x_lo, x_hi, y_lo, y_hi) = (0.0, 1.0, 0.0, 1.0);
    }
    let x = Scale::new((x_lo, x_hi), (60.0, w - 170.0));
    let y = Scale::new((y_lo, y_hi), (h - 60.0, 40.0));
    frame(
        &mut doc,
        &x,
        &y,
        &format!("{sample_id}: {cell_type} gating"),
        &format!("{} (transformed)", panel.markers[pair.0]),
        &format!("{} (transformed)", panel.markers[pair.1]),
    );

    for &(px, py, pred, unc) in &points {
        let hue = if pred { GREEN_HUE } else { PURPLE_HUE };
        doc.circle(x.apply(px), y.apply(py), 1.6, &shade(hue, unc));
    }

    // Ground-truth gate lines, when the configured gate is on this pair.
    if let Some(gate) = cfg.gates().gates.get(cell_type) {
        if gate.pair == pair {
            doc.line(
                x.apply(gate.threshold_x),
                y.range.0.min(y.range.1),
                x.apply(gate.threshold_x),
                y.range.0.max(y.range.1),
                "#000",
                1.3,
            );
            doc.line(
                x.range.0.min(x.range.1),
                y.apply(gate.threshold_y),
                x.range.0.max(x.range.1),
                y.apply(gate.threshold_y),
                "#000",
                1.3,
            );
        }
    }

    // Legend: hue meaning plus the darkness ramp of each hue.
    let lx = w - 150.0;
    doc.circle(lx, 52.0, 4.0, &shade(GREEN_HUE, 0.35));
    doc.text(lx + 10.0, 56.0, "start", 11.0, &format!("predicted {cell_type}"));
    doc.circle(lx, 72.0, 4.0, &shade(PURPLE_HUE, 0.35));
    doc.text(lx + 10.0, 76.0, "start", 11.0, "other events");
    doc.text(lx - 8.0, 96.0, "start", 11.0, "uncertainty 0 to 1");
    for (row, hue) in [(0u32, GREEN_HUE), (1, PURPLE_HUE)] {
        let ry = 104.0 + row as f64 * 16.0;
        for i in 0..6 {
            let v = i as f64 / 5.0;
            doc.rect(lx - 8.0 + i as f64 * 18.0, ry, 18.0, 12.0, &shade(hue, v));
        }
    }

    let out = ctx
        .reports_dir()
        .join(format!("gating_{cell_type}_{sample_id}_{}_{}.svg", pair.0, pair.1));
    atomic_write(&out, &doc.finish())?;
    println!(
        "{} ({} of {} events plotted)",
        out.display(),
        points.len(),
        sample.events.len()
    );
    Ok(())
}
