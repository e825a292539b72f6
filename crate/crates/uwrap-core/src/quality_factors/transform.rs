//! Signed shifted-log marker transform.
//!
//! Cytometry intensities span several decades and can dip below zero after
//! compensation, so factor models and classifiers work on
//! `t(x) = sign(x) * log10(1 + |x| / offset)` rather than raw values. The map
//! is strictly increasing, odd, and has the exact inverse
//! `x = sign(t) * offset * (10^|t| - 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UwError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkerTransform {
    ShiftedLog { offset: f64 },
}

impl Default for MarkerTransform {
    fn default() -> Self {
        MarkerTransform::ShiftedLog { offset: 1.0 }
    }
}

impl MarkerTransform {
    pub fn shifted_log(offset: f64) -> Result<MarkerTransform> {
        if !offset.is_finite() || offset <= 0.0 {
            return Err(UwError::Config(format!(
                "transform offset must be positive and finite, got {offset}"
            )));
        }
        Ok(MarkerTransform::ShiftedLog { offset })
    }

    pub fn apply(&self, x: f64) -> f64 {
        let MarkerTransform::ShiftedLog { offset } = self;
        let magnitude = (1.0 + x.abs() / offset).log10();
        if x < 0.0 {
            -magnitude
        } else {
            magnitude
        }
    }

    pub fn invert(&self, t: f64) -> f64 {
        let MarkerTransform::ShiftedLog { offset } = self;
        let magnitude = offset * (10f64.powf(t.abs()) - 1.0);
        if t < 0.0 {
            -magnitude
        } else {
            magnitude
        }
    }

    pub fn apply_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.apply(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_is_fixed_point() {
        let t = MarkerTransform::default();
        assert_eq!(t.apply(0.0), 0.0);
        assert_eq!(t.invert(0.0), 0.0);
    }

    #[test]
    fn known_values_offset_one() {
        let t = MarkerTransform::default();
        assert!((t.apply(9.0) - 1.0).abs() < 1e-12);
        assert!((t.apply(99.0) - 2.0).abs() < 1e-12);
        assert!((t.apply(-9.0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn offset_scales_argument() {
        let t = MarkerTransform::shifted_log(10.0).unwrap();
        assert!((t.apply(90.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_offset() {
        assert!(MarkerTransform::shifted_log(0.0).is_err());
        assert!(MarkerTransform::shifted_log(-1.0).is_err());
        assert!(MarkerTransform::shifted_log(f64::NAN).is_err());
    }

    #[test]
    fn serde_shape() {
        let t = MarkerTransform::default();
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, r#"{"kind":"shifted_log","offset":1.0}"#);
        let back: MarkerTransform = serde_json::from_str(&json).unwrap();
        assert_eq!(t, back);
    }

    proptest! {
        #[test]
        fn monotone_and_odd(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let t = MarkerTransform::default();
            if a < b {
                prop_assert!(t.apply(a) < t.apply(b));
            }
            prop_assert!((t.apply(-a) + t.apply(a)).abs() < 1e-12);
        }

        #[test]
        fn inverse_round_trips(x in -1e5f64..1e5) {
            let t = MarkerTransform::shifted_log(2.5).unwrap();
            let back = t.invert(t.apply(x));
            // Relative tolerance: the exponential amplifies the log rounding.
            prop_assert!((back - x).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }
}
