//! The seven pipeline commands.

mod aggregate;
mod build;
mod dump_factors;
mod evaluate;
mod generate;
mod plot_gating;
mod train;

pub use aggregate::cmd_aggregate;
pub use build::cmd_build;
pub use dump_factors::cmd_dump_factors;
pub use evaluate::cmd_evaluate;
pub use generate::cmd_generate;
pub use plot_gating::cmd_plot_gating;
pub use train::cmd_train;

use std::collections::BTreeMap;

use uwrap_core::data_model::{load_events_csv, Dataset, Panel, Sample};
use uwrap_core::ddm::DdmModel;
use uwrap_core::{Result, UwError};

use crate::Ctx;

pub(crate) fn load_split(ctx: &Ctx, split: &str) -> Result<Dataset> {
    load_events_csv(&ctx.split_path(split), &ctx.config.panel())
}

/// Loads the trained classifier of every panel cell type.
pub(crate) fn load_ddms(ctx: &Ctx, panel: &Panel) -> Result<BTreeMap<String, DdmModel>> {
    let mut models = BTreeMap::new();
    for ct in &panel.cell_types {
        let model = DdmModel::load_json(&ctx.ddm_path(&ct.name))?;
        models.insert(ct.name.clone(), model);
    }
    Ok(models)
}

/// Finds a sample by id, searching test, then calibration, then train.
pub(crate) fn find_sample(ctx: &Ctx, sample_id: &str) -> Result<Sample> {
    for split in ["test", "calibration", "train"] {
        let path = ctx.split_path(split);
        if !path.exists() {
            continue;
        }
        let dataset = load_split(ctx, split)?;
        if let Some(sample) = dataset.samples.into_iter().find(|s| s.sample_id == sample_id) {
            return Ok(sample);
        }
    }
    Err(UwError::Input(format!("sample '{sample_id}' not found in any split")))
}

/// Events kept for a plot: every event up to the cap, then a deterministic
/// stride so the SVG stays bounded.
pub(crate) fn plot_indexes(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let stride = n.div_ceil(cap);
    (0..n).step_by(stride).collect()
}
