//! Axis-aligned bounding boxes and IoU.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class tag used for non-motor vehicles.
pub const NON_MOTOR_VEHICLE: u8 = 0;

/// Default stationary-object mask threshold.
pub const DEFAULT_IOU_MAX: f64 = 0.98;

/// A closed pixel rectangle with strictly positive area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub class_tag: u8,
}

fn default_confidence() -> f64 {
    1.0
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
            confidence: 1.0,
            class_tag: NON_MOTOR_VEHICLE,
        };
        b.validate()?;
        Ok(b)
    }

    /// Box of the given size centred on `(cx, cy)`.
    pub fn from_center(cx: f64, cy: f64, width: f64, height: f64) -> Result<Self> {
        Self::new(
            cx - width / 2.0,
            cy - height / 2.0,
            cx + width / 2.0,
            cy + height / 2.0,
        )
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::invalid(format!(
                "bounding box must have positive area: ({}, {}, {}, {})",
                self.x_min, self.y_min, self.x_max, self.y_max
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::invalid(format!(
                "confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        BoundingBox {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
            ..*self
        }
    }
}

pub fn centroid(b: &BoundingBox) -> (f64, f64) {
    ((b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0)
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = a.x_max.min(b.x_max) - a.x_min.max(b.x_min);
    let h = a.y_max.min(b.y_max) - a.y_min.max(b.y_min);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Dense row-major matrix of pairwise overlaps between two box sets.
#[derive(Debug, Clone, PartialEq)]
pub struct IoUMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl IoUMatrix {
    /// Builds a matrix from row vectors. Every entry must lie in [0, 1].
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::invalid("ragged IoU matrix"));
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::invalid(format!("IoU entry {v} outside [0, 1]")));
            }
            data.extend(row);
        }
        Ok(IoUMatrix {
            rows: n_rows,
            cols: n_cols,
            data,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        IoUMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

pub fn iou_matrix(set1: &[BoundingBox], set2: &[BoundingBox]) -> IoUMatrix {
    let data = set1
        .iter()
        .flat_map(|a| set2.iter().map(move |b| iou(a, b)))
        .collect();
    IoUMatrix {
        rows: set1.len(),
        cols: set2.len(),
        data,
    }
}

/// Zeroes every entry at or above `iou_max`; such near-perfect overlaps are
/// treated as stationary objects.
pub fn mask_stationary(m: &IoUMatrix, iou_max: f64) -> IoUMatrix {
    IoUMatrix {
        rows: m.rows,
        cols: m.cols,
        data: m
            .data
            .iter()
            .map(|&v| if v < iou_max { v } else { 0.0 })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn centroids() {
        assert_eq!(centroid(&bb(0.0, 0.0, 2.0, 2.0)), (1.0, 1.0));
        assert_eq!(centroid(&bb(10.0, 20.0, 30.0, 60.0)), (20.0, 40.0));
        assert_eq!(centroid(&bb(0.0, 0.0, 1.0, 1.0)), (0.5, 0.5));
    }

    #[test]
    fn rejects_empty_boxes() {
        assert!(BoundingBox::new(1.0, 0.0, 1.0, 2.0).is_err());
        assert!(BoundingBox::new(0.0, 3.0, 1.0, 2.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, f64::NAN, 2.0).is_err());
    }

    #[test]
    fn iou_reference_values() {
        let a = bb(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bb(5.0, 5.0, 6.0, 6.0)), 0.0);
        assert!((iou(&a, &bb(1.0, 0.0, 3.0, 2.0)) - 1.0 / 3.0).abs() < 1e-15);
        // touching edges: zero-area intersection
        assert_eq!(iou(&a, &bb(2.0, 0.0, 4.0, 2.0)), 0.0);
    }

    #[test]
    fn matrix_shapes() {
        let a = bb(0.0, 0.0, 2.0, 2.0);
        let m = iou_matrix(&[], &[a, a]);
        assert_eq!((m.rows(), m.cols()), (0, 2));
        assert_eq!(iou_matrix(&[a], &[a]).values(), &[1.0]);

        let b = bb(1.0, 0.0, 3.0, 2.0);
        let far = bb(10.0, 10.0, 12.0, 12.0);
        let m = iou_matrix(&[a, b], &[b, far]);
        assert_eq!(m.get(0, 0), iou(&a, &b));
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(1, 0), 1.0);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn stationary_mask() {
        let m = IoUMatrix::from_rows(vec![vec![0.99]]).unwrap();
        assert_eq!(mask_stationary(&m, DEFAULT_IOU_MAX).values(), &[0.0]);
        let m = IoUMatrix::from_rows(vec![vec![0.5]]).unwrap();
        assert_eq!(mask_stationary(&m, DEFAULT_IOU_MAX).values(), &[0.5]);
        let m = IoUMatrix::from_rows(vec![vec![0.1, 0.2], vec![0.3, 0.97]]).unwrap();
        assert_eq!(mask_stationary(&m, DEFAULT_IOU_MAX), m);
    }

    prop_compose! {
        fn any_box()(x in -100.0f64..100.0, y in -100.0f64..100.0,
                     w in 0.5f64..50.0, h in 0.5f64..50.0) -> BoundingBox {
            bb(x, y, x + w, y + h)
        }
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in any_box(), b in any_box()) {
            let v = iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, iou(&b, &a));
        }

        #[test]
        fn iou_translation_invariant(a in any_box(), b in any_box(),
                                     dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
            let moved = iou(&a.translate(dx, dy), &b.translate(dx, dy));
            prop_assert!((moved - iou(&a, &b)).abs() < 1e-9);
        }

        #[test]
        fn mask_idempotent_and_monotone(vals in prop::collection::vec(0.0f64..=1.0, 1..20),
                                        t in 0.01f64..=1.0) {
            let m = IoUMatrix::from_rows(vec![vals]).unwrap();
            let once = mask_stationary(&m, t);
            prop_assert_eq!(&mask_stationary(&once, t), &once);
            prop_assert!(once.values().iter().zip(m.values()).all(|(a, b)| a <= b));
        }
    }
}
