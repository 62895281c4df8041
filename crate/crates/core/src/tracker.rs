//! Dense-frame IoU tracking baseline.
//!
//! Association is Hungarian matching between each active track's last box and
//! the new detections. There is no motion model; a track that goes unmatched
//! for `max_age` consecutive frames is finished.

use serde::{Deserialize, Serialize};

use crate::angles::CyclicAngle;
use crate::arma::{ratio_from_sums, RatioReport};
use crate::assignment::hungarian_match;
use crate::detector::{classify_with, Detection, Direction, YAxis, CLASSIFY_THRESHOLD};
use crate::error::Result;
use crate::geometry::{centroid, iou_matrix, BoundingBox};

pub const DEFAULT_MAX_AGE: u32 = 3;
pub const DEFAULT_MIN_DISPLACEMENT: f64 = 10.0;

/// A single frame of a dense stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseFrame {
    pub frame_index: u64,
    pub t: f64,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackState {
    Active,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: u32,
    pub boxes: Vec<(f64, BoundingBox)>,
    pub state: TrackState,
    misses: u32,
}

impl Track {
    fn last_box(&self) -> &BoundingBox {
        &self.boxes.last().expect("tracks are created with a box").1
    }

    /// Centroid displacement from the first to the last box.
    pub fn displacement(&self) -> (f64, f64) {
        let (x0, y0) = centroid(&self.boxes[0].1);
        let (x1, y1) = centroid(self.last_box());
        (x1 - x0, y1 - y0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub iou_min: f64,
    pub max_age: u32,
    pub min_displacement: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            iou_min: crate::assignment::DEFAULT_IOU_MIN,
            max_age: DEFAULT_MAX_AGE,
            min_displacement: DEFAULT_MIN_DISPLACEMENT,
        }
    }
}

pub fn track_stream(frames: &[DenseFrame], iou_min: f64, max_age: u32) -> Vec<Track> {
    let mut tracks: Vec<Track> = Vec::new();
    let mut active: Vec<usize> = Vec::new();

    for frame in frames {
        let last: Vec<BoundingBox> = active.iter().map(|&k| *tracks[k].last_box()).collect();
        let current: Vec<BoundingBox> = frame.detections.iter().map(|d| d.bbox).collect();
        let matches = hungarian_match(&iou_matrix(&last, &current), iou_min);

        let mut track_hit = vec![false; active.len()];
        let mut det_used = vec![false; current.len()];
        for &(a, d) in matches.iter() {
            let track = &mut tracks[active[a]];
            track.boxes.push((frame.t, current[d]));
            track.misses = 0;
            track_hit[a] = true;
            det_used[d] = true;
        }
        for (a, hit) in track_hit.iter().enumerate() {
            if !hit {
                let track = &mut tracks[active[a]];
                track.misses += 1;
                if track.misses >= max_age {
                    track.state = TrackState::Finished;
                }
            }
        }
        active.retain(|&k| tracks[k].state == TrackState::Active);
        for (d, used) in det_used.iter().enumerate() {
            if !used {
                active.push(tracks.len());
                tracks.push(Track {
                    id: tracks.len() as u32,
                    boxes: vec![(frame.t, current[d])],
                    state: TrackState::Active,
                    misses: 0,
                });
            }
        }
    }
    tracks
}

/// Classifies each moving track once by its net displacement heading.
pub fn tracks_to_ratio(
    tracks: &[Track],
    o_right: CyclicAngle,
    min_displacement: f64,
    y_axis: YAxis,
) -> Result<RatioReport> {
    let (mut right, mut wrong) = (0u32, 0u32);
    for track in tracks {
        let (dx, dy) = track.displacement();
        if dx.hypot(dy) < min_displacement {
            continue;
        }
        match classify_with(y_axis.heading(dx, dy), o_right, CLASSIFY_THRESHOLD) {
            Direction::RightWay => right += 1,
            Direction::WrongWay => wrong += 1,
        }
    }
    ratio_from_sums(f64::from(right), f64::from(wrong), false)
}
