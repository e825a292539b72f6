//! Population-level bounds from per-event uncertainties.
//!
//! Summing certainties of the predicted members gives a worst-case lower
//! count; adding the uncertainties of the rejected events gives the upper
//! count. Subtype counts weigh in the parent classifier's certainty, and
//! subtype ratios divide by the parent's bounds rather than the event total.

use serde::{Deserialize, Serialize};

use crate::data_model::Sample;
use crate::ddm::DdmModel;
use crate::error::{Result, UwError};
use crate::impact_model::{UncertaintyEstimate, UncertaintyWrapper};

/// What the ratio columns divide by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenominatorBasis {
    /// All events of the sample.
    AllEvents,
    /// The parent population's [count_min, count_max] interval.
    ParentBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationBounds {
    pub sample_id: String,
    pub cell_type: String,
    pub count_pred: usize,
    pub count_min: f64,
    pub count_max: f64,
    pub ratio_pred: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_true: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inside: Option<bool>,
    pub basis: DenominatorBasis,
}

impl PopulationBounds {
    /// Fills the truth annotation given the ground-truth ratio.
    fn annotate(mut self, ratio_true: Option<f64>) -> PopulationBounds {
        self.ratio_true = ratio_true;
        self.inside = ratio_true.map(|rt| self.ratio_min <= rt && rt <= self.ratio_max);
        self
    }
}

/// Bounds for a root population, counted against all events of the sample.
///
/// count_min sums the certainties of the predicted members; count_max adds
/// every rejected event's uncertainty on top of the predicted count.
pub fn root_bounds(
    sample_id: &str,
    cell_type: &str,
    estimates: &[UncertaintyEstimate],
    total_events: usize,
) -> Result<PopulationBounds> {
    if total_events == 0 {
        return Err(UwError::Domain(format!(
            "sample '{sample_id}' has no events to bound"
        )));
    }
    if estimates.len() != total_events {
        return Err(UwError::Input(format!(
            "{} estimates for {} events in sample '{sample_id}'",
            estimates.len(),
            total_events
        )));
    }
    let mut count_pred = 0usize;
    let mut count_min = 0.0;
    let mut count_max = 0.0;
    for est in estimates {
        if est.prediction {
            count_pred += 1;
            count_min += 1.0 - est.uncertainty;
        } else {
            count_max += est.uncertainty;
        }
    }
    count_max += count_pred as f64;
    let total = total_events as f64;
    Ok(PopulationBounds {
        sample_id: sample_id.to_string(),
        cell_type: cell_type.to_string(),
        count_pred,
        count_min,
        count_max,
        ratio_pred: count_pred as f64 / total,
        ratio_min: count_min / total,
        ratio_max: count_max / total,
        ratio_true: None,
        inside: None,
        basis: DenominatorBasis::AllEvents,
    })
}

/// Bounds for a subtype inside its parent population.
///
/// `subtype_estimates` must cover exactly the events the parent classifier
/// accepted, in order. Lower counts multiply subtype and parent certainty;
/// upper counts add the uncertainty of parent-accepted non-members and of
/// parent-rejected events. Ratios divide by the parent's interval, with the
/// upper ratio clamped at 1 (and defined as 1 when the parent lower count
/// is zero).
pub fn subtype_bounds(
    cell_type: &str,
    parent_estimates: &[UncertaintyEstimate],
    subtype_estimates: &[UncertaintyEstimate],
    parent_bounds: &PopulationBounds,
) -> Result<PopulationBounds> {
    let accepted: Vec<&UncertaintyEstimate> =
        parent_estimates.iter().filter(|e| e.prediction).collect();
    if accepted.len() != subtype_estimates.len() {
        return Err(UwError::Input(format!(
            "{} subtype estimates for {} parent-accepted events in sample '{}'",
            subtype_estimates.len(),
            accepted.len(),
            parent_bounds.sample_id
        )));
    }
    let mut count_pred = 0usize;
    let mut count_min = 0.0;
    let mut count_max = 0.0;
    for (parent_est, sub_est) in accepted.iter().zip(subtype_estimates) {
        if parent_est.event_id != sub_est.event_id {
            return Err(UwError::Input(format!(
                "subtype estimates out of step at event '{}' vs '{}'",
                sub_est.event_id, parent_est.event_id
            )));
        }
        if sub_est.prediction {
            count_pred += 1;
            count_min += (1.0 - sub_est.uncertainty) * (1.0 - parent_est.uncertainty);
        } else {
            count_max += sub_est.uncertainty;
        }
    }
    for parent_est in parent_estimates.iter().filter(|e| !e.prediction) {
        count_max += parent_est.uncertainty;
    }
    count_max += count_pred as f64;

    let parent_min = parent_bounds.count_min;
    let parent_max = parent_bounds.count_max;
    let ratio_min = if parent_max > 0.0 {
        count_min / parent_max
    } else {
        0.0
    };
    let ratio_max = if parent_min > 0.0 {
        (count_max / parent_min).min(1.0)
    } else {
        1.0
    };
    let ratio_pred = if parent_bounds.count_pred > 0 {
        count_pred as f64 / parent_bounds.count_pred as f64
    } else {
        0.0
    };
    Ok(PopulationBounds {
        sample_id: parent_bounds.sample_id.clone(),
        cell_type: cell_type.to_string(),
        count_pred,
        count_min,
        count_max,
        ratio_pred,
        ratio_min,
        ratio_max,
        ratio_true: None,
        inside: None,
        basis: DenominatorBasis::ParentBounds,
    })
}

fn true_ratio_root(sample: &Sample, cell_type: &str) -> Option<f64> {
    let mut positive = 0usize;
    for e in &sample.events {
        match e.label(cell_type) {
            Some(true) => positive += 1,
            Some(false) => {}
            None => return None,
        }
    }
    Some(positive as f64 / sample.len() as f64)
}

fn true_ratio_subtype(sample: &Sample, cell_type: &str, parent: &str) -> Option<f64> {
    let mut in_parent = 0usize;
    let mut in_subtype = 0usize;
    for e in &sample.events {
        match (e.label(parent), e.label(cell_type)) {
            (Some(p), Some(c)) => {
                in_parent += p as usize;
                in_subtype += c as usize;
            }
            _ => return None,
        }
    }
    if in_parent == 0 {
        return None;
    }
    Some(in_subtype as f64 / in_parent as f64)
}

/// Applies one wrapper per cell type to every sample and emits bound
/// records, annotated with the true ratio where ground truth is present.
///
/// Subtype wrappers are applied to the events their parent classifier
/// accepts, so every subtype needs its parent wrapper in the list, and
/// hierarchies deeper than parent-child are rejected.
pub fn dataset_bounds(
    wrappers: &[(&UncertaintyWrapper, &DdmModel)],
    samples: &[&Sample],
) -> Result<Vec<PopulationBounds>> {
    for (w, _) in wrappers {
        if let Some(parent) = &w.cell_type.parent {
            let parent_entry = wrappers
                .iter()
                .find(|(p, _)| p.cell_type.name == *parent)
                .ok_or_else(|| {
                    UwError::Config(format!(
                        "subtype '{}' needs a wrapper for its parent '{parent}'",
                        w.cell_type.name
                    ))
                })?;
            if parent_entry.0.cell_type.parent.is_some() {
                return Err(UwError::Config(format!(
                    "'{}' sits below the nested population '{parent}'; only one \
                     level of nesting is supported",
                    w.cell_type.name
                )));
            }
        }
    }

    let mut out = Vec::new();
    for sample in samples {
        // Root estimates and bounds first; subtypes then reuse them.
        let mut root_results: Vec<(String, Vec<UncertaintyEstimate>, PopulationBounds)> =
            Vec::new();
        for (w, ddm) in wrappers.iter().filter(|(w, _)| w.cell_type.parent.is_none()) {
            let estimates = w.apply(ddm, sample)?;
            let bounds = root_bounds(&sample.sample_id, &w.cell_type.name, &estimates, sample.len())?
                .annotate(true_ratio_root(sample, &w.cell_type.name));
            root_results.push((w.cell_type.name.clone(), estimates, bounds));
        }
        for (w, ddm) in wrappers {
            match &w.cell_type.parent {
                None => {
                    let bounds = &root_results
                        .iter()
                        .find(|(name, _, _)| *name == w.cell_type.name)
                        .expect("computed above")
                        .2;
                    out.push(bounds.clone());
                }
                Some(parent) => {
                    let (_, parent_estimates, parent_bounds) = root_results
                        .iter()
                        .find(|(name, _, _)| name == parent)
                        .expect("validated above");
                    let restricted = Sample {
                        sample_id: sample.sample_id.clone(),
                        events: sample
                            .events
                            .iter()
                            .zip(parent_estimates)
                            .filter(|(_, est)| est.prediction)
                            .map(|(e, _)| e.clone())
                            .collect(),
                    };
                    let subtype_estimates = w.apply(ddm, &restricted)?;
                    let bounds = subtype_bounds(
                        &w.cell_type.name,
                        parent_estimates,
                        &subtype_estimates,
                        parent_bounds,
                    )?
                    .annotate(true_ratio_subtype(sample, &w.cell_type.name, parent));
                    out.push(bounds);
                }
            }
        }
    }
    Ok(out)
}
