//! `uwrap generate`: draw the synthetic dataset and write one CSV per split.

use serde::Serialize;
use uwrap_core::data_model::{write_events_csv, Dataset, Split};
use uwrap_core::synthgen::{generate_dataset, quadrant_gate_labels};
use uwrap_core::Result;

use crate::config::LabelSource;
use crate::fsio::atomic_write_with;
use crate::Ctx;

#[derive(Serialize)]
struct Manifest {
    seed: u64,
    events_per_sample: usize,
    sample_shift_sd: f64,
    counts: crate::config::SplitCounts,
    label_source: LabelSource,
}

pub fn cmd_generate(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.config;
    let gen = cfg.generator_config();
    let counts = cfg.generator.counts;
    let mut dataset =
        generate_dataset(&gen, (counts.train, counts.calibration, counts.test), cfg.seed)?;

    if cfg.generator.label_source == LabelSource::Gates {
        let gates = cfg.gates();
        for sample in &mut dataset.samples {
            let labels = quadrant_gate_labels(sample, &gates, &gen.panel, &gen.transform)?;
            for (event, l) in sample.events.iter_mut().zip(labels) {
                event.labels = l;
            }
        }
    }

    for (split, name) in
        [(Split::Train, "train"), (Split::Calibration, "calibration"), (Split::Test, "test")]
    {
        let samples: Vec<_> = dataset.samples_in(split).into_iter().cloned().collect();
        let n_samples = samples.len();
        let n_events: usize = samples.iter().map(|s| s.events.len()).sum();
        let part = Dataset { panel: gen.panel.clone(), samples, split: Default::default() };
        atomic_write_with(&ctx.split_path(name), |tmp| write_events_csv(tmp, &part))?;
        println!("{name}: {n_samples} samples, {n_events} events");
    }

    let manifest = Manifest {
        seed: cfg.seed,
        events_per_sample: cfg.generator.events_per_sample,
        sample_shift_sd: cfg.generator.sample_shift_sd,
        counts,
        label_source: cfg.generator.label_source,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| uwrap_core::UwError::Io(std::io::Error::other(e)))?;
    crate::fsio::atomic_write(&ctx.data_dir().join("manifest.json"), &format!("{text}\n"))?;
    println!("seed: {}", cfg.seed);
    Ok(())
}
