//! Cyclic-angle arithmetic and the phase-shifting coder (PSC).
//!
//! Every angle in the crate lives on the half-open interval (-π, π]. The PSC
//! maps an angle onto `m` cosine phases so that a regressor never has to learn
//! across the 2π seam; decoding recovers the phase with a quadrant-aware
//! arctangent.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of PSC phases.
pub const DEFAULT_PSC_PHASES: usize = 3;

const DEGENERATE_EPS: f64 = 1e-12;

/// A radian value normalized into (-π, π].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct CyclicAngle(f64);

impl CyclicAngle {
    pub const ZERO: CyclicAngle = CyclicAngle(0.0);

    /// Wraps any finite real into (-π, π].
    pub fn new(radians: f64) -> Self {
        if radians > -PI && radians <= PI {
            return CyclicAngle(radians);
        }
        let r = radians.rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU for tiny negative inputs
        let r = if r >= TAU { 0.0 } else { r };
        CyclicAngle(if r > PI { r - TAU } else { r })
    }

    pub fn from_degrees(deg: f64) -> Self {
        Self::new(deg.to_radians())
    }

    #[inline]
    pub fn radians(self) -> f64 {
        self.0
    }

    /// The angle rotated by `delta` radians.
    pub fn rotate(self, delta: f64) -> Self {
        Self::new(self.0 + delta)
    }

    /// The opposite heading.
    pub fn reversed(self) -> Self {
        self.rotate(PI)
    }
}

impl From<f64> for CyclicAngle {
    fn from(value: f64) -> Self {
        CyclicAngle::new(value)
    }
}

impl From<CyclicAngle> for f64 {
    fn from(value: CyclicAngle) -> Self {
        value.0
    }
}

impl fmt::Display for CyclicAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} rad", self.0)
    }
}

/// Folded angular distance in [0, π].
///
/// Representation independent: inputs are compared after normalization, so
/// adding 2π to either side leaves the result unchanged.
pub fn cyclic_error(a: CyclicAngle, b: CyclicAngle) -> f64 {
    let d = (a.0 - b.0).abs();
    if d <= PI {
        d
    } else {
        TAU - d
    }
}

/// Midpoint of the shorter arc between `a` and `b`.
pub fn circular_mean(a: CyclicAngle, b: CyclicAngle) -> Result<CyclicAngle> {
    let s = a.0.sin() + b.0.sin();
    let c = a.0.cos() + b.0.cos();
    if s.hypot(c) < DEGENERATE_EPS {
        return Err(Error::DegenerateMean);
    }
    Ok(CyclicAngle::new(s.atan2(c)))
}

/// An `m`-phase PSC encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PscVector {
    components: Vec<f64>,
}

impl PscVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.len() < 3 {
            return Err(Error::invalid(format!(
                "PSC vector needs at least 3 components, got {}",
                components.len()
            )));
        }
        Ok(PscVector { components })
    }

    pub fn phases(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }
}

#[inline]
fn phase_offset(i: usize, m: usize) -> f64 {
    TAU * i as f64 / m as f64
}

/// `x_i = cos(angle + 2iπ/m)` for `i = 1..=m`.
pub fn psc_encode(angle: CyclicAngle, m: usize) -> Result<PscVector> {
    if m < 3 {
        return Err(Error::invalid(format!(
            "PSC needs m >= 3 phases to be decodable, got {m}"
        )));
    }
    let components = (1..=m)
        .map(|i| (angle.0 + phase_offset(i, m)).cos())
        .collect();
    Ok(PscVector { components })
}

pub fn psc_decode(vec: &PscVector) -> Result<CyclicAngle> {
    let m = vec.phases();
    let (mut sin_sum, mut cos_sum) = (0.0, 0.0);
    for (k, x) in vec.components.iter().enumerate() {
        let alpha = phase_offset(k + 1, m);
        sin_sum += x * alpha.sin();
        cos_sum += x * alpha.cos();
    }
    if sin_sum.abs() < DEGENERATE_EPS && cos_sum.abs() < DEGENERATE_EPS {
        return Err(Error::DegenerateVector);
    }
    Ok(CyclicAngle::new(-sin_sum.atan2(cos_sum)))
}

/// Mean squared difference between a predicted and a target encoding.
pub fn psc_loss(predicted: &PscVector, target: &PscVector) -> Result<f64> {
    if predicted.phases() != target.phases() {
        return Err(Error::invalid(format!(
            "PSC phase count mismatch: {} vs {}",
            predicted.phases(),
            target.phases()
        )));
    }
    let m = predicted.phases() as f64;
    let sum: f64 = predicted
        .components
        .iter()
        .zip(&target.components)
        .map(|(p, t)| (p - t).powi(2))
        .sum();
    Ok(sum / m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn normalization_range() {
        assert_eq!(CyclicAngle::new(PI).radians(), PI);
        assert_eq!(CyclicAngle::new(-PI).radians(), PI);
        assert_close(CyclicAngle::new(3.0 * PI / 2.0).radians(), -PI / 2.0, 1e-15);
        assert_eq!(CyclicAngle::new(-1e-300).radians(), -1e-300);
        assert_eq!(CyclicAngle::new(TAU).radians(), 0.0);
    }

    #[test]
    fn encode_reference_values() {
        let v = psc_encode(CyclicAngle::ZERO, 3).unwrap();
        let want = [-0.5, -0.5, 1.0];
        for (x, w) in v.components().iter().zip(want) {
            assert_close(*x, w, 1e-12);
        }
        let v = psc_encode(CyclicAngle::new(PI), 3).unwrap();
        for (x, w) in v.components().iter().zip([0.5, 0.5, -1.0]) {
            assert_close(*x, w, 1e-12);
        }
        // termwise: cos(π/4 + 2π/3), cos(π/4 + 4π/3), cos(π/4 + 2π)
        let v = psc_encode(CyclicAngle::new(PI / 4.0), 3).unwrap();
        let want = [-0.965_925_826_289_068_2, 0.258_819_045_102_520_3, 0.707_106_781_186_547_7];
        for (x, w) in v.components().iter().zip(want) {
            assert_close(*x, w, 1e-12);
        }
    }

    #[test]
    fn encode_rejects_too_few_phases() {
        assert!(matches!(
            psc_encode(CyclicAngle::ZERO, 2),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn decode_reference_and_degenerate() {
        let v = PscVector::new(vec![-0.5, -0.5, 1.0]).unwrap();
        assert_close(psc_decode(&v).unwrap().radians(), 0.0, 1e-12);
        let zero = PscVector::new(vec![0.0; 3]).unwrap();
        assert!(matches!(psc_decode(&zero), Err(Error::DegenerateVector)));
    }

    #[test]
    fn loss_reference_values() {
        let a = PscVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        let b = PscVector::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_close(psc_loss(&a, &a).unwrap(), 0.0, 0.0);
        assert_close(psc_loss(&a, &b).unwrap(), 2.0 / 3.0, 1e-15);
        let ones = PscVector::new(vec![1.0; 3]).unwrap();
        let neg = PscVector::new(vec![-1.0; 3]).unwrap();
        assert_close(psc_loss(&ones, &neg).unwrap(), 4.0, 1e-15);
        let four = PscVector::new(vec![0.0; 4]).unwrap();
        assert!(psc_loss(&a, &four).is_err());
    }

    #[test]
    fn cyclic_error_reference_values() {
        let x = CyclicAngle::new(1.234);
        assert_eq!(cyclic_error(x, x), 0.0);
        // 0.1 and 6.2 on (0, 2π]: folded distance 2π - 6.1
        let e = cyclic_error(CyclicAngle::new(0.1), CyclicAngle::new(6.2));
        assert_close(e, TAU - 6.1, 1e-12);
        assert_close(e, 0.183_185_307_179_586_6, 1e-9);
        let e = cyclic_error(CyclicAngle::new(PI), CyclicAngle::new(-PI + 0.01));
        assert_close(e, 0.01, 1e-12);
    }

    #[test]
    fn circular_mean_reference_values() {
        let m = circular_mean(CyclicAngle::new(0.1), CyclicAngle::new(-0.1)).unwrap();
        assert_close(m.radians(), 0.0, 1e-15);
        let m = circular_mean(CyclicAngle::new(PI - 0.1), CyclicAngle::new(-PI + 0.1)).unwrap();
        assert_close(cyclic_error(m, CyclicAngle::new(PI)), 0.0, 1e-12);
        let m = circular_mean(CyclicAngle::ZERO, CyclicAngle::new(PI / 2.0)).unwrap();
        assert_close(m.radians(), PI / 4.0, 1e-15);
        assert!(matches!(
            circular_mean(CyclicAngle::ZERO, CyclicAngle::new(PI)),
            Err(Error::DegenerateMean)
        ));
    }

    fn angle() -> impl Strategy<Value = CyclicAngle> {
        (-10.0f64..10.0).prop_map(CyclicAngle::new)
    }

    proptest! {
        #[test]
        fn psc_round_trip(a in angle(), m in prop::sample::select(vec![3usize, 4, 8])) {
            let back = psc_decode(&psc_encode(a, m).unwrap()).unwrap();
            prop_assert!(cyclic_error(back, a) < 1e-9);
        }

        #[test]
        fn encoded_components_bounded(a in angle(), m in 3usize..12) {
            let v = psc_encode(a, m).unwrap();
            prop_assert_eq!(v.phases(), m);
            prop_assert!(v.components().iter().all(|x| (-1.0..=1.0).contains(x)));
        }

        #[test]
        fn cyclic_error_metric(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let (x, y) = (CyclicAngle::new(a), CyclicAngle::new(b));
            let d = cyclic_error(x, y);
            prop_assert!((0.0..=PI).contains(&d));
            prop_assert_eq!(d, cyclic_error(y, x));
            let shifted = cyclic_error(CyclicAngle::new(a + TAU), y);
            prop_assert!((shifted - d).abs() < 1e-9);
        }

        #[test]
        fn circular_mean_halves_distance(a in angle(), b in angle()) {
            let d = cyclic_error(a, b);
            prop_assume!(d < PI - 1e-6);
            let m = circular_mean(a, b).unwrap();
            prop_assert_eq!(m, circular_mean(b, a).unwrap());
            prop_assert!((cyclic_error(m, a) - d / 2.0).abs() < 1e-9);
            prop_assert!((cyclic_error(m, b) - d / 2.0).abs() < 1e-9);
        }

        #[test]
        fn loss_zero_iff_equal(a in angle(), b in angle()) {
            let (va, vb) = (psc_encode(a, 3).unwrap(), psc_encode(b, 3).unwrap());
            let l = psc_loss(&va, &vb).unwrap();
            prop_assert!(l >= 0.0);
            if va == vb { prop_assert_eq!(l, 0.0); } else { prop_assert!(l > 0.0); }
        }
    }
}
