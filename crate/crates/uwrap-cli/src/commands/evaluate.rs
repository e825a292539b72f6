//! `uwrap evaluate`: score every built variant on the test split, one
//! report row per variant.

use std::fmt::Write as _;

use uwrap_core::evaluation::compare_variants;
use uwrap_core::impact_model::UncertaintyWrapper;
use uwrap_core::Result;

use crate::fsio::atomic_write;
use crate::Ctx;

pub fn cmd_evaluate(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.config;
    let panel = cfg.panel();
    let test = super::load_split(ctx, "test")?;
    let ddms = super::load_ddms(ctx, &panel)?;
    let test_refs: Vec<_> = test.samples.iter().collect();

    let mut csv = String::from(
        "cell_type,variant,category_based,brier,variance,unspecificity,unreliability,overconfidence\n",
    );
    let mut table = format!(
        "{:<5} {:<20} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
        "type", "variant", "brier", "var", "unspec", "unrel", "overconf"
    );

    for ct in &panel.cell_types {
        let ddm = &ddms[&ct.name];
        let names = cfg.variant_names(&ct.name, &panel);
        let mut loaded: Vec<(String, UncertaintyWrapper)> = Vec::new();
        for name in names {
            let wrapper = UncertaintyWrapper::load_json(&ctx.wrapper_path(&ct.name, &name))?;
            loaded.push((name, wrapper));
        }
        let entries: Vec<_> =
            loaded.iter().map(|(name, w)| (name.clone(), w, ddm)).collect();
        let rows = compare_variants(&entries, &test_refs)?;
        for row in rows {
            let r = &row.report;
            let category = row.label.ends_with('*');
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{}",
                ct.name,
                row.label,
                category as u8,
                r.brier,
                r.variance,
                r.unspecificity,
                r.unreliability,
                r.overconfidence
            );
            let _ = writeln!(
                table,
                "{:<5} {:<20} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>9.5}",
                ct.name, row.label, r.brier, r.variance, r.unspecificity, r.unreliability,
                r.overconfidence
            );
        }
    }

    atomic_write(&ctx.reports_dir().join("evaluation.csv"), &csv)?;
    atomic_write(&ctx.reports_dir().join("evaluation.txt"), &table)?;
    print!("{table}");
    Ok(())
}
