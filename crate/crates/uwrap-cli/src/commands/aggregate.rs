//! `uwrap aggregate`: population-ratio bounds per test sample and cell
//! type, as CSV plus one chart per cell type.

use std::fmt::Write as _;

use uwrap_core::aggregation::{dataset_bounds, PopulationBounds};
use uwrap_core::impact_model::UncertaintyWrapper;
use uwrap_core::Result;

use crate::fsio::atomic_write;
use crate::svg::{frame, Scale, SvgDoc};
use crate::Ctx;

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn chart(cell_type: &str, variant: &str, records: &[&PopulationBounds]) -> String {
    let mut rows: Vec<&PopulationBounds> = records.to_vec();
    // X position: samples ordered by true ratio (unlabeled data goes last).
    rows.sort_by(|a, b| {
        let ka = a.ratio_true.unwrap_or(f64::INFINITY);
        let kb = b.ratio_true.unwrap_or(f64::INFINITY);
        ka.partial_cmp(&kb).unwrap().then_with(|| a.sample_id.cmp(&b.sample_id))
    });

    let (w, h) = (640.0, 420.0);
    let mut doc = SvgDoc::new(w, h);
    let top = rows
        .iter()
        .flat_map(|r| [r.ratio_max, r.ratio_true.unwrap_or(0.0)])
        .fold(0.0f64, f64::max);
    let x = Scale::new((0.0, rows.len().saturating_sub(1) as f64), (70.0, w - 160.0));
    let y = Scale::new((0.0, (top * 1.15).max(0.01)), (h - 60.0, 40.0));
    frame(
        &mut doc,
        &x,
        &y,
        &format!("{cell_type} population ratio bounds ({variant})"),
        "test samples, sorted by true ratio",
        "ratio",
    );

    let mut inside = 0usize;
    let mut labeled = 0usize;
    for (i, r) in rows.iter().enumerate() {
        let px = x.apply(i as f64);
        doc.line(px, y.apply(r.ratio_min), px, y.apply(r.ratio_max), "hsl(210,60%,62%)", 4.0);
        doc.circle(px, y.apply(r.ratio_pred), 3.2, "hsl(210,85%,30%)");
        if let Some(t) = r.ratio_true {
            doc.cross(px, y.apply(t), 3.4, "#111");
            labeled += 1;
            if r.inside == Some(true) {
                inside += 1;
            }
        }
    }

    let lx = w - 140.0;
    doc.line(lx, 50.0, lx, 64.0, "hsl(210,60%,62%)", 4.0);
    doc.text(lx + 10.0, 61.0, "start", 11.0, "bound range");
    doc.circle(lx, 80.0, 3.2, "hsl(210,85%,30%)");
    doc.text(lx + 10.0, 84.0, "start", 11.0, "predicted");
    doc.cross(lx, 100.0, 3.4, "#111");
    doc.text(lx + 10.0, 104.0, "start", 11.0, "true");

    doc.text(
        w / 2.0,
        h - 8.0,
        "middle",
        12.0,
        &format!("coverage {inside}/{labeled} samples inside bounds"),
    );
    doc.finish()
}

pub fn cmd_aggregate(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.config;
    let panel = cfg.panel();
    let test = super::load_split(ctx, "test")?;
    let ddms = super::load_ddms(ctx, &panel)?;
    let test_refs: Vec<_> = test.samples.iter().collect();

    // Parents must be listed; panel order already puts roots first.
    let mut chosen: Vec<(String, String, UncertaintyWrapper)> = Vec::new();
    for ct in &panel.cell_types {
        let variant = cfg.aggregate_variant(&ct.name);
        let wrapper = UncertaintyWrapper::load_json(&ctx.wrapper_path(&ct.name, &variant))?;
        chosen.push((ct.name.clone(), variant, wrapper));
    }
    let pairs: Vec<_> = chosen.iter().map(|(name, _, w)| (w, &ddms[name])).collect();
    let bounds = dataset_bounds(&pairs, &test_refs)?;

    let mut csv = String::from("sample_id,cell_type,ratio_pred,ratio_min,ratio_max,ratio_true,inside\n");
    for b in &bounds {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            b.sample_id,
            b.cell_type,
            b.ratio_pred,
            b.ratio_min,
            b.ratio_max,
            fmt_opt(b.ratio_true),
            b.inside.map(|i| (i as u8).to_string()).unwrap_or_default()
        );
    }
    atomic_write(&ctx.reports_dir().join("bounds.csv"), &csv)?;

    for (name, variant, _) in &chosen {
        let records: Vec<_> = bounds.iter().filter(|b| &b.cell_type == name).collect();
        let svg = chart(name, variant, &records);
        atomic_write(&ctx.reports_dir().join(format!("bounds_{name}.svg")), &svg)?;
        let inside = records.iter().filter(|b| b.inside == Some(true)).count();
        let labeled = records.iter().filter(|b| b.inside.is_some()).count();
        println!("{name:<5} coverage {inside}/{labeled} samples inside bounds");
    }
    Ok(())
}
