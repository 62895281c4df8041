//! Two-frame wrong-way detector.
//!
//! For one sparse sample (two frames `intra_pair_dt` apart) the detector
//! matches boxes across the frames, derives a motion heading from centroid
//! displacement and an appearance heading from an [`OrientationOracle`],
//! keeps only pairs where the two agree (the And-strategy), and classifies the
//! fused heading against the right-way direction.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angles::{circular_mean, cyclic_error, CyclicAngle};
use crate::arma::CountSeries;
use crate::assignment::{hungarian_match, DEFAULT_IOU_MIN};
use crate::error::{Error, Result};
use crate::geometry::{centroid, iou_matrix, mask_stationary, BoundingBox, DEFAULT_IOU_MAX};

/// Maximum allowed disagreement between motion and appearance headings.
pub const DEFAULT_DIV_MAX: f64 = 2.0 * PI / 3.0;

/// Angular distance below which a heading counts as right-way.
pub const CLASSIFY_THRESHOLD: f64 = 2.0 * PI / 3.0;

/// Default spacing between the two frames of a sample, seconds.
pub const DEFAULT_INTRA_PAIR_DT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    RightWay,
    WrongWay,
}

/// Orientation of the image y axis used when turning displacements into angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YAxis {
    #[default]
    Down,
    Up,
}

impl YAxis {
    /// Heading of an image-space displacement.
    pub fn heading(self, dx: f64, dy: f64) -> CyclicAngle {
        let dy = match self {
            YAxis::Down => dy,
            YAxis::Up => -dy,
        };
        CyclicAngle::new(dy.atan2(dx))
    }

    /// Unit image-space displacement for a heading; inverse of [`YAxis::heading`].
    pub fn unit(self, heading: CyclicAngle) -> (f64, f64) {
        let (s, c) = heading.radians().sin_cos();
        match self {
            YAxis::Down => (c, s),
            YAxis::Up => (c, -s),
        }
    }
}

/// A detected box plus the optional side channels the pipeline carries with it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(flatten)]
    pub bbox: BoundingBox,
    /// Simulator ground-truth vehicle id; `None` for clutter and false positives.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_id: Option<u32>,
    /// Appearance-model heading recorded alongside the detection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub appearance: Option<CyclicAngle>,
}

impl Detection {
    pub fn new(bbox: BoundingBox) -> Self {
        Detection {
            bbox,
            truth_id: None,
            appearance: None,
        }
    }
}

/// Which frame an oracle query refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameId {
    pub sample_index: u64,
    /// 0 for the first frame of a pair, 1 for the second.
    pub slot: u8,
}

/// Appearance-based heading estimator for a detected box.
pub trait OrientationOracle: Send + Sync {
    fn estimate(&self, frame: FrameId, detection: &Detection) -> CyclicAngle;
}

/// Oracle that replays the headings stored on each detection.
///
/// Detections without a recorded heading read as angle zero; callers that
/// load external data are expected to reject such records up front.
#[derive(Debug, Default, Clone, Copy)]
pub struct RecordedOracle;

impl OrientationOracle for RecordedOracle {
    fn estimate(&self, _frame: FrameId, detection: &Detection) -> CyclicAngle {
        detection.appearance.unwrap_or(CyclicAngle::ZERO)
    }
}

impl<F> OrientationOracle for F
where
    F: Fn(FrameId, &Detection) -> CyclicAngle + Send + Sync,
{
    fn estimate(&self, frame: FrameId, detection: &Detection) -> CyclicAngle {
        self(frame, detection)
    }
}

/// How motion and appearance headings are combined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EnsembleMode {
    /// Accept only pairs whose headings agree within `div_max`.
    AndStrategy { div_max: f64 },
    /// Motion heading alone; the appearance model is never queried.
    DetectionOnly,
}

impl Default for EnsembleMode {
    fn default() -> Self {
        EnsembleMode::AndStrategy {
            div_max: DEFAULT_DIV_MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub iou_max: f64,
    pub iou_min: f64,
    pub ensemble: EnsembleMode,
    pub classify_threshold: f64,
    pub o_right: CyclicAngle,
    pub y_axis: YAxis,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            iou_max: DEFAULT_IOU_MAX,
            iou_min: DEFAULT_IOU_MIN,
            ensemble: EnsembleMode::default(),
            classify_threshold: CLASSIFY_THRESHOLD,
            o_right: CyclicAngle::ZERO,
            y_axis: YAxis::Down,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_max > 0.0 && self.iou_max <= 1.0) {
            return Err(Error::invalid(format!("iou_max {} outside (0, 1]", self.iou_max)));
        }
        if !(0.0..1.0).contains(&self.iou_min) {
            return Err(Error::invalid(format!("iou_min {} outside [0, 1)", self.iou_min)));
        }
        if let EnsembleMode::AndStrategy { div_max } = self.ensemble {
            if !(div_max > 0.0 && div_max <= PI) {
                return Err(Error::invalid(format!("div_max {div_max} outside (0, π]")));
            }
        }
        if !(self.classify_threshold > 0.0 && self.classify_threshold <= PI) {
            return Err(Error::invalid(format!(
                "classification threshold {} outside (0, π]",
                self.classify_threshold
            )));
        }
        Ok(())
    }

    pub fn classify(&self, o_final: CyclicAngle) -> Direction {
        classify_with(o_final, self.o_right, self.classify_threshold)
    }
}

/// One sparse sample: two detection lists `intra_pair_dt` apart at `t_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePairObservation {
    pub sample_index: u64,
    pub t_k: f64,
    pub intra_pair_dt: f64,
    pub detections_1: Vec<Detection>,
    pub detections_2: Vec<Detection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedInstance {
    pub sample_index: u64,
    pub pair: (usize, usize),
    pub o_det: CyclicAngle,
    /// Absent when the detector runs without the appearance model.
    pub o_model: Option<CyclicAngle>,
    pub o_final: CyclicAngle,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairCounts {
    pub sample_index: u64,
    pub d_r: u32,
    pub d_w: u32,
}

pub fn motion_orientation(b1: &BoundingBox, b2: &BoundingBox, y_axis: YAxis) -> Result<CyclicAngle> {
    let (x1, y1) = centroid(b1);
    let (x2, y2) = centroid(b2);
    let (dx, dy) = (x2 - x1, y2 - y1);
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::NoMotion);
    }
    Ok(y_axis.heading(dx, dy))
}

/// Circular mean of the oracle's per-frame estimates for a matched pair.
pub fn appearance_orientation(
    oracle: &dyn OrientationOracle,
    sample_index: u64,
    d1: &Detection,
    d2: &Detection,
) -> Result<CyclicAngle> {
    let first = oracle.estimate(FrameId { sample_index, slot: 0 }, d1);
    let second = oracle.estimate(FrameId { sample_index, slot: 1 }, d2);
    circular_mean(first, second)
}

/// The And-strategy: fused heading when both estimates agree within `div_max`.
pub fn and_strategy(o_det: CyclicAngle, o_model: CyclicAngle, div_max: f64) -> Option<CyclicAngle> {
    if cyclic_error(o_det, o_model) < div_max {
        // an exactly antipodal pair only passes when div_max = π and rounding lands below it
        circular_mean(o_det, o_model).ok()
    } else {
        None
    }
}

/// Right-way iff the heading lies strictly within 2π/3 of `o_right`.
pub fn classify(o_final: CyclicAngle, o_right: CyclicAngle) -> Direction {
    classify_with(o_final, o_right, CLASSIFY_THRESHOLD)
}

pub fn classify_with(o_final: CyclicAngle, o_right: CyclicAngle, threshold: f64) -> Direction {
    if cyclic_error(o_final, o_right) < threshold {
        Direction::RightWay
    } else {
        Direction::WrongWay
    }
}

pub fn process_pair(
    obs: &FramePairObservation,
    oracle: &dyn OrientationOracle,
    cfg: &DetectorConfig,
) -> (PairCounts, Vec<OrientedInstance>) {
    let boxes_1: Vec<BoundingBox> = obs.detections_1.iter().map(|d| d.bbox).collect();
    let boxes_2: Vec<BoundingBox> = obs.detections_2.iter().map(|d| d.bbox).collect();
    let overlaps = mask_stationary(&iou_matrix(&boxes_1, &boxes_2), cfg.iou_max);
    let matches = hungarian_match(&overlaps, cfg.iou_min);

    let mut counts = PairCounts {
        sample_index: obs.sample_index,
        ..PairCounts::default()
    };
    let mut instances = Vec::with_capacity(matches.len());
    for &(i, j) in matches.iter() {
        let (d1, d2) = (&obs.detections_1[i], &obs.detections_2[j]);
        let Ok(o_det) = motion_orientation(&d1.bbox, &d2.bbox, cfg.y_axis) else {
            continue;
        };
        let (o_model, o_final) = match cfg.ensemble {
            EnsembleMode::DetectionOnly => (None, o_det),
            EnsembleMode::AndStrategy { div_max } => {
                let Ok(o_model) = appearance_orientation(oracle, obs.sample_index, d1, d2) else {
                    continue;
                };
                match and_strategy(o_det, o_model, div_max) {
                    Some(fused) => (Some(o_model), fused),
                    None => continue,
                }
            }
        };
        let direction = cfg.classify(o_final);
        match direction {
            Direction::RightWay => counts.d_r += 1,
            Direction::WrongWay => counts.d_w += 1,
        }
        instances.push(OrientedInstance {
            sample_index: obs.sample_index,
            pair: (i, j),
            o_det,
            o_model,
            o_final,
            direction,
        });
    }
    (counts, instances)
}

fn validate_stream(observations: &[FramePairObservation], t_gap: f64) -> Result<()> {
    if !(t_gap > 0.0) {
        return Err(Error::invalid(format!("t_gap {t_gap} must be positive")));
    }
    let mut prev_t = f64::NEG_INFINITY;
    for (k, obs) in observations.iter().enumerate() {
        if obs.sample_index != k as u64 {
            return Err(Error::MalformedStream(format!(
                "expected sample index {k}, found {}",
                obs.sample_index
            )));
        }
        if !(obs.t_k > prev_t) {
            return Err(Error::MalformedStream(format!(
                "sample {k}: t_k {} not after previous {prev_t}",
                obs.t_k
            )));
        }
        if !(obs.intra_pair_dt > 0.0 && obs.intra_pair_dt < t_gap) {
            return Err(Error::MalformedStream(format!(
                "sample {k}: intra_pair_dt {} must lie in (0, t_gap = {t_gap})",
                obs.intra_pair_dt
            )));
        }
        prev_t = obs.t_k;
    }
    Ok(())
}

/// Per-sample counts for a whole stream, processed in parallel and reduced in
/// sample order.
pub fn process_stream_counts(
    observations: &[FramePairObservation],
    oracle: &dyn OrientationOracle,
    cfg: &DetectorConfig,
    t_gap: f64,
) -> Result<Vec<PairCounts>> {
    cfg.validate()?;
    validate_stream(observations, t_gap)?;
    Ok(observations
        .par_iter()
        .map(|obs| process_pair(obs, oracle, cfg).0)
        .collect())
}

/// Aligned right-way and wrong-way count series for a stream.
///
/// Consecutive samples may count the same vehicle more than once; that
/// overlap is what the temporal estimator removes downstream.
pub fn process_stream(
    observations: &[FramePairObservation],
    oracle: &dyn OrientationOracle,
    cfg: &DetectorConfig,
    t_gap: f64,
) -> Result<(CountSeries, CountSeries)> {
    let counts = process_stream_counts(observations, oracle, cfg, t_gap)?;
    Ok(CountSeries::pair_from_counts(&counts, t_gap))
}
