//! Scoring of per-event uncertainty estimates against observed classifier
//! wrongness: the mean squared error of the predicted error probability and
//! its decomposition into variance, resolution and unreliability, plus the
//! overconfident share of unreliability.

use serde::{Deserialize, Serialize};

use crate::data_model::Sample;
use crate::ddm::DdmModel;
use crate::error::{Result, UwError};
use crate::impact_model::UncertaintyWrapper;

/// One group of events sharing a predicted uncertainty value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrierBin {
    pub p: f64,
    pub n: usize,
    pub observed_error_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrierReport {
    pub brier: f64,
    /// Error rate times its complement; depends only on the classifier.
    pub variance: f64,
    /// How much the bins separate high-error from low-error events.
    pub resolution: f64,
    /// variance - resolution.
    pub unspecificity: f64,
    /// Mean squared gap between each bin's predicted and observed rate.
    pub unreliability: f64,
    /// The unreliability mass from bins that understate the observed rate.
    pub overconfidence: f64,
    pub n_events: usize,
    pub bins: Vec<BrierBin>,
}

fn validate(uncertainties: &[f64], wrong: &[bool]) -> Result<()> {
    if uncertainties.is_empty() {
        return Err(UwError::Domain("no events to score".into()));
    }
    if uncertainties.len() != wrong.len() {
        return Err(UwError::Input(format!(
            "{} uncertainties but {} wrongness flags",
            uncertainties.len(),
            wrong.len()
        )));
    }
    for &p in uncertainties {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(UwError::Domain(format!(
                "uncertainty {p} outside [0, 1]"
            )));
        }
    }
    Ok(())
}

/// Mean over events of (predicted uncertainty - wrongness indicator)^2.
pub fn brier_score(uncertainties: &[f64], wrong: &[bool]) -> Result<f64> {
    validate(uncertainties, wrong)?;
    let sum: f64 = uncertainties
        .iter()
        .zip(wrong)
        .map(|(&p, &w)| {
            let o = w as u8 as f64;
            (p - o) * (p - o)
        })
        .sum();
    Ok(sum / uncertainties.len() as f64)
}

struct BinAccum {
    p: f64,
    n: usize,
    k: usize,
    p_sum: f64,
}

fn decompose(uncertainties: &[f64], wrong: &[bool], groups: Vec<BinAccum>) -> Result<BrierReport> {
    let n_total = uncertainties.len();
    let total_wrong = wrong.iter().filter(|&&w| w).count();
    let overall = total_wrong as f64 / n_total as f64;
    let variance = overall * (1.0 - overall);
    let mut resolution = 0.0;
    let mut unreliability = 0.0;
    let mut overconfidence = 0.0;
    let mut bins = Vec::with_capacity(groups.len());
    for g in groups {
        let weight = g.n as f64 / n_total as f64;
        let observed = g.k as f64 / g.n as f64;
        resolution += weight * (observed - overall) * (observed - overall);
        let gap = g.p - observed;
        unreliability += weight * gap * gap;
        if g.p < observed {
            overconfidence += weight * gap * gap;
        }
        bins.push(BrierBin {
            p: g.p,
            n: g.n,
            observed_error_rate: observed,
        });
    }
    Ok(BrierReport {
        brier: brier_score(uncertainties, wrong)?,
        variance,
        resolution,
        unspecificity: variance - resolution,
        unreliability,
        overconfidence,
        n_events: n_total,
        bins,
    })
}

/// Decomposition with one bin per distinct predicted value. Natural for
/// leaf-valued predictors, where the identity
/// brier = variance - resolution + unreliability holds to rounding error.
pub fn brier_decomposition(uncertainties: &[f64], wrong: &[bool]) -> Result<BrierReport> {
    validate(uncertainties, wrong)?;
    let mut groups: std::collections::BTreeMap<u64, BinAccum> = std::collections::BTreeMap::new();
    for (&p, &w) in uncertainties.iter().zip(wrong) {
        let p = if p == 0.0 { 0.0 } else { p }; // fold -0.0 into 0.0
        let g = groups.entry(p.to_bits()).or_insert(BinAccum {
            p,
            n: 0,
            k: 0,
            p_sum: 0.0,
        });
        g.n += 1;
        g.k += w as usize;
    }
    decompose(uncertainties, wrong, groups.into_values().collect())
}

/// Decomposition over fixed-width bins, for predictors with continuously
/// varying outputs. Each bin is represented by the mean predicted value of
/// its members, so the decomposition identity holds only approximately.
pub fn brier_decomposition_binned(
    uncertainties: &[f64],
    wrong: &[bool],
    width: f64,
) -> Result<BrierReport> {
    validate(uncertainties, wrong)?;
    if !width.is_finite() || width <= 0.0 || width > 1.0 {
        return Err(UwError::Config(format!(
            "bin width must lie in (0, 1], got {width}"
        )));
    }
    let mut groups: std::collections::BTreeMap<u64, BinAccum> = std::collections::BTreeMap::new();
    for (&p, &w) in uncertainties.iter().zip(wrong) {
        let slot = ((p / width).floor() as u64).min((1.0 / width).ceil() as u64);
        let g = groups.entry(slot).or_insert(BinAccum {
            p: 0.0,
            n: 0,
            k: 0,
            p_sum: 0.0,
        });
        g.n += 1;
        g.k += w as usize;
        g.p_sum += p;
    }
    let groups: Vec<BinAccum> = groups
        .into_values()
        .map(|mut g| {
            g.p = g.p_sum / g.n as f64;
            g
        })
        .collect();
    decompose(uncertainties, wrong, groups)
}

/// The unreliability mass where predicted uncertainty understates the
/// observed error rate.
pub fn overconfidence(uncertainties: &[f64], wrong: &[bool]) -> Result<f64> {
    Ok(brier_decomposition(uncertainties, wrong)?.overconfidence)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantRow {
    pub label: String,
    pub report: BrierReport,
}

/// Scores several wrapper variants of one cell type on the same test
/// samples. Root cell types are scored on every event; subtypes on each
/// sample's labeled parent subset. One report row per wrapper, all sharing
/// the classifier and therefore the variance column.
pub fn compare_variants(
    wrappers: &[(String, &UncertaintyWrapper, &DdmModel)],
    test: &[&Sample],
) -> Result<Vec<VariantRow>> {
    let Some((_, first, _)) = wrappers.first() else {
        return Err(UwError::Input("no wrappers to compare".into()));
    };
    let cell_type = &first.cell_type;
    for (label, w, _) in wrappers {
        if w.cell_type.name != cell_type.name {
            return Err(UwError::Input(format!(
                "variant '{label}' wraps '{}', expected '{}'",
                w.cell_type.name, cell_type.name
            )));
        }
    }
    let basis: Vec<Sample> = match &cell_type.parent {
        Some(parent) => test.iter().map(|s| s.subset_by_label(parent)).collect(),
        None => test.iter().map(|s| (*s).clone()).collect(),
    };
    let mut rows = Vec::with_capacity(wrappers.len());
    for (label, wrapper, ddm) in wrappers {
        let mut uncertainties = Vec::new();
        let mut wrong = Vec::new();
        for sample in &basis {
            let estimates = wrapper.apply(ddm, sample)?;
            for (event, est) in sample.events.iter().zip(&estimates) {
                let truth = event.label(&cell_type.name).ok_or_else(|| {
                    UwError::Input(format!(
                        "event {}/{} lacks a '{}' label needed for scoring",
                        event.sample_id, event.event_id, cell_type.name
                    ))
                })?;
                uncertainties.push(est.uncertainty);
                wrong.push(est.prediction != truth);
            }
        }
        rows.push(VariantRow {
            label: label.clone(),
            report: brier_decomposition(&uncertainties, &wrong)?,
        });
    }
    Ok(rows)
}
