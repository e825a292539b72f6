//! Per-pair kernel density estimation.
//!
//! The density factor answers "how typical is this event's position in the
//! gating plane of its own sample". The estimator is a product-Gaussian KDE
//! over the transformed marker pair, fitted fresh on every sample it is
//! evaluated on, with per-axis bandwidths from Scott's rule for two
//! dimensions: `h = sd * n^(-1/6)`, floored at 1e-6 so degenerate axes stay
//! evaluable.

use serde::{Deserialize, Serialize};

use crate::data_model::{Event, Sample};
use crate::error::{Result, UwError};
use crate::quality_factors::MarkerTransform;

const BANDWIDTH_FLOOR: f64 = 1e-6;

/// A KDE over one transformed marker pair of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityModel {
    pub pair: (usize, usize),
    pub bandwidth: (f64, f64),
    transform: MarkerTransform,
    points: Vec<(f64, f64)>,
}

/// Sample standard deviation (n-1 denominator); 0 for fewer than two points.
fn sample_sd(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss = values.map(|v| (v - mean).powi(2)).sum::<f64>();
    (ss / (n - 1) as f64).sqrt()
}

/// Fits the KDE for `pair` on all events of `sample`.
pub fn fit_density(
    sample: &Sample,
    pair: (usize, usize),
    transform: &MarkerTransform,
) -> Result<DensityModel> {
    if sample.events.is_empty() {
        return Err(UwError::Input(format!(
            "cannot fit a density on empty sample '{}'",
            sample.sample_id
        )));
    }
    for e in &sample.events {
        if pair.0 >= e.markers.len() || pair.1 >= e.markers.len() {
            return Err(UwError::Input(format!(
                "marker pair ({}, {}) out of range for event {}/{} with {} markers",
                pair.0,
                pair.1,
                e.sample_id,
                e.event_id,
                e.markers.len()
            )));
        }
    }
    let points: Vec<(f64, f64)> = sample
        .events
        .iter()
        .map(|e| {
            (
                transform.apply(e.markers[pair.0]),
                transform.apply(e.markers[pair.1]),
            )
        })
        .collect();
    let n = points.len() as f64;
    let scale = n.powf(-1.0 / 6.0);
    let hx = (sample_sd(points.iter().map(|p| p.0)) * scale).max(BANDWIDTH_FLOOR);
    let hy = (sample_sd(points.iter().map(|p| p.1)) * scale).max(BANDWIDTH_FLOOR);
    Ok(DensityModel {
        pair,
        bandwidth: (hx, hy),
        transform: transform.clone(),
        points,
    })
}

impl DensityModel {
    /// Density at a transformed coordinate.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (hx, hy) = self.bandwidth;
        let norm = 1.0 / (self.points.len() as f64 * 2.0 * std::f64::consts::PI * hx * hy);
        let mut acc = 0.0;
        for &(px, py) in &self.points {
            let dx = (x - px) / hx;
            let dy = (y - py) / hy;
            acc += (-0.5 * (dx * dx + dy * dy)).exp();
        }
        acc * norm
    }

    /// Density at an event's own transformed pair coordinates.
    pub fn eval_event(&self, event: &Event) -> Result<f64> {
        if self.pair.0 >= event.markers.len() || self.pair.1 >= event.markers.len() {
            return Err(UwError::Input(format!(
                "marker pair ({}, {}) out of range for event {}/{}",
                self.pair.0, self.pair.1, event.sample_id, event.event_id
            )));
        }
        Ok(self.eval(
            self.transform.apply(event.markers[self.pair.0]),
            self.transform.apply(event.markers[self.pair.1]),
        ))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
