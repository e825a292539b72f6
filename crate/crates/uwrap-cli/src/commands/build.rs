//! `uwrap build`: construct every configured wrapper variant per cell type.

use uwrap_core::impact_model::build_wrapper;
use uwrap_core::quality_factors::VariantKind;
use uwrap_core::Result;

use crate::fsio::atomic_write_with;
use crate::Ctx;

pub fn cmd_build(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.config;
    let panel = cfg.panel();
    let train = super::load_split(ctx, "train")?;
    let calib = super::load_split(ctx, "calibration")?;
    let ddms = super::load_ddms(ctx, &panel)?;
    let train_refs: Vec<_> = train.samples.iter().collect();
    let calib_refs: Vec<_> = calib.samples.iter().collect();

    for ct in &panel.cell_types {
        let ddm = &ddms[&ct.name];
        for name in cfg.variant_names(&ct.name, &panel) {
            let variant = cfg.parse_variant(&name, &ct.name, &panel)?;
            let ddm_file = format!("ddm_{}.json", ct.name);
            let mut params = cfg.build_params(&ct.name, &panel, &ddm_file);
            if variant.kind == VariantKind::Baseline {
                // The baseline variant is the naive wrapper: one leaf, one
                // overall error bound, no partitioning.
                params.tree.max_depth = 0;
            }
            let wrapper =
                build_wrapper(&variant, ddm, &train_refs, &calib_refs, ct, None, &params)?;
            let leaves: usize =
                wrapper.impact_model.trees().iter().map(|t| t.leaf_count()).sum();
            let path = ctx.wrapper_path(&ct.name, &name);
            atomic_write_with(&path, |tmp| wrapper.save_json(tmp))?;
            println!(
                "{:<5} {:<20} {:>3} leaves -> {}",
                ct.name,
                name,
                leaves,
                path.file_name().unwrap_or_default().to_string_lossy()
            );
        }
    }
    Ok(())
}
