//! Seeded synthetic traffic.
//!
//! Vehicles cross a straight road segment at constant speed in lane bands,
//! one band per direction. Right-way arrivals follow a Poisson process whose
//! intensity is modulated by a log-normal AR(1) factor (momentum in the flow);
//! wrong-way arrivals are plain Poisson. Rendering turns trajectories into
//! jittered axis-aligned boxes with misses and false positives.
//!
//! All randomness comes from ChaCha8 seeded from the scenario seed. Trajectory
//! generation draws from one sequential stream; each rendered frame and each
//! oracle answer uses its own stream derived from the seed and a frame key, so
//! frames can be rendered independently and in any order with identical output.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angles::CyclicAngle;
use crate::detector::{Detection, Direction, FrameId, FramePairObservation, OrientationOracle, YAxis};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::tracker::DenseFrame;

const VEHICLE_LENGTH_M: f64 = 1.8;
const VEHICLE_HEIGHT_M: f64 = 1.6;
const SIZE_SPREAD: f64 = 0.1;
const BURST_BIN_S: f64 = 10.0;
const MIN_SPEED_FRACTION: f64 = 0.25;
/// Centre-to-centre spacing between consecutive vehicles in one lane.
const MIN_HEADWAY_M: f64 = 2.5;

const TAG_FRAME_SPARSE: u64 = 1;
const TAG_FRAME_DENSE: u64 = 2;
const TAG_ORACLE: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Observation window, seconds.
    pub duration: f64,
    /// Road length inside the field of view, meters.
    pub fov_length: f64,
    pub px_per_meter: f64,
    /// Lateral pixel band `[lo, hi]` for right-way vehicle centroids.
    pub lane_right: [f64; 2],
    pub lane_wrong: [f64; 2],
    pub o_right: CyclicAngle,
    pub y_axis: YAxis,
    /// Vehicles per minute.
    pub arrival_rate_right: f64,
    pub arrival_rate_wrong: f64,
    /// AR(1) coefficient of the log-intensity modulating right-way arrivals.
    pub arrival_burstiness: f64,
    pub speed_mean: f64,
    pub speed_sd: f64,
    pub miss_rate: f64,
    /// Expected false-positive boxes per frame.
    pub false_positive_rate: f64,
    /// Per-coordinate Gaussian box jitter, pixels.
    pub bbox_jitter: f64,
    /// Gaussian heading noise of the appearance oracle, radians.
    pub oracle_noise: f64,
    /// Probability the oracle answers with a uniform random heading.
    pub oracle_flip_rate: f64,
    /// Stationary parked bicycles (clutter, not counted in ground truth).
    pub parked: u32,
    /// No arrivals in the last `entry_guard` seconds, so every counted vehicle
    /// is visible long enough to register motion.
    pub entry_guard: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            duration: 1200.0,
            fov_length: 40.0,
            px_per_meter: 20.0,
            lane_right: [300.0, 330.0],
            lane_wrong: [390.0, 420.0],
            o_right: CyclicAngle::ZERO,
            y_axis: YAxis::Down,
            arrival_rate_right: 9.0,
            arrival_rate_wrong: 1.0,
            arrival_burstiness: 0.3,
            speed_mean: 4.0,
            speed_sd: 0.5,
            miss_rate: 0.05,
            false_positive_rate: 0.2,
            bbox_jitter: 7.0,
            oracle_noise: 0.3,
            oracle_flip_rate: 0.1,
            parked: 0,
            entry_guard: 1.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    /// Same traffic with every noise source switched off.
    pub fn noise_free(mut self) -> Self {
        self.miss_rate = 0.0;
        self.false_positive_rate = 0.0;
        self.bbox_jitter = 0.0;
        self.oracle_noise = 0.0;
        self.oracle_flip_rate = 0.0;
        self.parked = 0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("duration", self.duration),
            ("fov_length", self.fov_length),
            ("px_per_meter", self.px_per_meter),
            ("speed_mean", self.speed_mean),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("arrival_rate_right", self.arrival_rate_right),
            ("arrival_rate_wrong", self.arrival_rate_wrong),
            ("speed_sd", self.speed_sd),
            ("false_positive_rate", self.false_positive_rate),
            ("bbox_jitter", self.bbox_jitter),
            ("oracle_noise", self.oracle_noise),
            ("entry_guard", self.entry_guard),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        let probabilities = [
            ("arrival_burstiness", self.arrival_burstiness),
            ("miss_rate", self.miss_rate),
            ("oracle_flip_rate", self.oracle_flip_rate),
        ];
        for (name, v) in probabilities {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        for (name, band) in [("lane_right", self.lane_right), ("lane_wrong", self.lane_wrong)] {
            if !(band[0] <= band[1]) {
                return Err(Error::invalid(format!("{name} band must satisfy lo <= hi")));
            }
        }
        Ok(())
    }
}

/// One vehicle crossing the field of view at constant speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: u32,
    pub direction: Direction,
    /// Time the centroid enters the field of view.
    pub entry_time: f64,
    pub speed: f64,
    /// Lateral centroid offset, pixels.
    pub lateral: f64,
    pub width: f64,
    pub height: f64,
}

impl Trajectory {
    /// Seconds spent inside the field of view.
    pub fn dwell(&self, fov_length: f64) -> f64 {
        fov_length / self.speed
    }

    pub fn exit_time(&self, fov_length: f64) -> f64 {
        self.entry_time + self.dwell(fov_length)
    }

    pub fn visible_at(&self, t: f64, fov_length: f64) -> bool {
        t >= self.entry_time && t <= self.exit_time(fov_length)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinuteCounts {
    pub minute: u32,
    pub right: u32,
    pub wrong: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub n_right: u32,
    pub n_wrong: u32,
    /// `None` when no vehicle crossed.
    pub true_ratio: Option<f64>,
    pub per_minute: Vec<MinuteCounts>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub vehicles: Vec<Trajectory>,
    /// Parked clutter centres in image pixels.
    pub parked: Vec<(f64, f64)>,
    pub ground_truth: GroundTruth,
    max_dwell: f64,
}

impl Scenario {
    pub fn heading(&self, direction: Direction) -> CyclicAngle {
        match direction {
            Direction::RightWay => self.config.o_right,
            Direction::WrongWay => self.config.o_right.reversed(),
        }
    }

    /// Image-space centroid of a vehicle at time `t`, if in view.
    pub fn position(&self, v: &Trajectory, t: f64) -> Option<(f64, f64)> {
        let cfg = &self.config;
        if !v.visible_at(t, cfg.fov_length) {
            return None;
        }
        let travelled = v.speed * (t - v.entry_time);
        let along = match v.direction {
            Direction::RightWay => travelled,
            Direction::WrongWay => cfg.fov_length - travelled,
        };
        Some(self.road_to_image(along * cfg.px_per_meter, v.lateral))
    }

    fn road_to_image(&self, along_px: f64, lateral_px: f64) -> (f64, f64) {
        let (ux, uy) = self.config.y_axis.unit(self.config.o_right);
        let (nx, ny) = (-uy, ux);
        (along_px * ux + lateral_px * nx, along_px * uy + lateral_px * ny)
    }

    /// Vehicles whose centroid is in view at `t`.
    pub fn visible(&self, t: f64) -> impl Iterator<Item = &Trajectory> + '_ {
        let start = self
            .vehicles
            .partition_point(|v| v.entry_time < t - self.max_dwell);
        let end = self.vehicles.partition_point(|v| v.entry_time <= t);
        let fov = self.config.fov_length;
        self.vehicles[start..end]
            .iter()
            .filter(move |v| v.visible_at(t, fov))
    }

    pub fn oracle(&self) -> NoisyOracle {
        noisy_oracle(self)
    }
}

fn derived_rng(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("finite non-negative standard deviation")
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

fn arrival_times(rng: &mut ChaCha8Rng, per_minute: f64, burstiness: f64, horizon: f64) -> Vec<f64> {
    let rate = per_minute / 60.0;
    let mut times = Vec::new();
    if rate <= 0.0 || horizon <= 0.0 {
        return times;
    }
    // log-intensity z follows AR(1) with coefficient b and stationary sd b;
    // exp(z - sd²/2) keeps the mean intensity at `rate`
    let sd = burstiness;
    let innovation = normal(sd * (1.0 - burstiness * burstiness).sqrt());
    let mut z = normal(sd).sample(rng);
    let mut start = 0.0;
    while start < horizon {
        let len = BURST_BIN_S.min(horizon - start);
        let intensity = rate * (z - sd * sd / 2.0).exp();
        let n = poisson_count(rng, intensity * len);
        for _ in 0..n {
            times.push(start + rng.random::<f64>() * len);
        }
        z = burstiness * z + innovation.sample(rng);
        start += BURST_BIN_S;
    }
    times.sort_by(f64::total_cmp);
    times
}

pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let horizon = (cfg.duration - cfg.entry_guard).max(0.0);
    let right = arrival_times(&mut rng, cfg.arrival_rate_right, cfg.arrival_burstiness, horizon);
    let wrong = arrival_times(&mut rng, cfg.arrival_rate_wrong, 0.0, horizon);

    let mut arrivals: Vec<(f64, Direction)> = right
        .into_iter()
        .map(|t| (t, Direction::RightWay))
        .chain(wrong.into_iter().map(|t| (t, Direction::WrongWay)))
        .collect();
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0));

    let speed_noise = normal(cfg.speed_sd);
    let size_noise = normal(SIZE_SPREAD);
    let min_speed = MIN_SPEED_FRACTION * cfg.speed_mean;
    let mut vehicles = Vec::with_capacity(arrivals.len());
    for (entry_time, direction) in arrivals {
        let speed = (cfg.speed_mean + speed_noise.sample(&mut rng)).max(min_speed);
        let band = match direction {
            Direction::RightWay => cfg.lane_right,
            Direction::WrongWay => cfg.lane_wrong,
        };
        let lateral = band[0] + rng.random::<f64>() * (band[1] - band[0]);
        let scale = (1.0 + size_noise.sample(&mut rng)).clamp(0.7, 1.3);
        vehicles.push(Trajectory {
            id: 0,
            direction,
            entry_time,
            speed,
            lateral,
            width: VEHICLE_LENGTH_M * cfg.px_per_meter * scale,
            height: VEHICLE_HEIGHT_M * cfg.px_per_meter * scale,
        });
    }
    keep_headway(&mut vehicles, cfg.fov_length, horizon);
    vehicles.sort_by(|a, b| a.entry_time.total_cmp(&b.entry_time));
    for (id, v) in vehicles.iter_mut().enumerate() {
        v.id = id as u32;
    }

    let lateral_span = lateral_span(cfg);
    let parked = (0..cfg.parked)
        .map(|_| {
            let along = rng.random::<f64>() * cfg.fov_length * cfg.px_per_meter;
            let lateral = lateral_span.0 + rng.random::<f64>() * (lateral_span.1 - lateral_span.0);
            (along, lateral)
        })
        .collect::<Vec<_>>();

    let ground_truth = tally_ground_truth(&vehicles, cfg.duration);
    let max_dwell = cfg.fov_length / min_speed;
    let mut scenario = Scenario {
        config: cfg.clone(),
        vehicles,
        parked: Vec::new(),
        ground_truth,
        max_dwell,
    };
    scenario.parked = parked
        .into_iter()
        .map(|(a, l)| scenario.road_to_image(a, l))
        .collect();
    Ok(scenario)
}

/// Enforces single-file traffic per direction: a follower enters no sooner
/// than `MIN_HEADWAY_M` behind its leader and is slowed so it never closes
/// that gap before the leader exits. Vehicles pushed past `horizon` are
/// dropped.
fn keep_headway(vehicles: &mut Vec<Trajectory>, fov_length: f64, horizon: f64) {
    let gap = MIN_HEADWAY_M.min(fov_length / 2.0);
    for direction in [Direction::RightWay, Direction::WrongWay] {
        let mut leader: Option<(f64, f64)> = None;
        for v in vehicles.iter_mut().filter(|v| v.direction == direction) {
            if let Some((entry, speed)) = leader {
                v.entry_time = v.entry_time.max(entry + gap / speed);
                let leader_exit = entry + fov_length / speed;
                if leader_exit > v.entry_time {
                    v.speed = v.speed.min((fov_length - gap) / (leader_exit - v.entry_time));
                }
            }
            leader = Some((v.entry_time, v.speed));
        }
    }
    vehicles.retain(|v| v.entry_time < horizon);
}

fn lateral_span(cfg: &ScenarioConfig) -> (f64, f64) {
    let lo = cfg.lane_right[0].min(cfg.lane_wrong[0]);
    let hi = cfg.lane_right[1].max(cfg.lane_wrong[1]);
    let margin = VEHICLE_HEIGHT_M * cfg.px_per_meter;
    (lo - margin, hi + margin)
}

fn tally_ground_truth(vehicles: &[Trajectory], duration: f64) -> GroundTruth {
    let minutes = (duration / 60.0).ceil().max(1.0) as usize;
    let mut per_minute: Vec<MinuteCounts> = (0..minutes)
        .map(|m| MinuteCounts {
            minute: m as u32,
            right: 0,
            wrong: 0,
        })
        .collect();
    let (mut n_right, mut n_wrong) = (0u32, 0u32);
    for v in vehicles {
        let slot = &mut per_minute[((v.entry_time / 60.0) as usize).min(minutes - 1)];
        match v.direction {
            Direction::RightWay => {
                n_right += 1;
                slot.right += 1;
            }
            Direction::WrongWay => {
                n_wrong += 1;
                slot.wrong += 1;
            }
        }
    }
    let total = n_right + n_wrong;
    GroundTruth {
        n_right,
        n_wrong,
        true_ratio: (total > 0).then(|| f64::from(n_wrong) / f64::from(total)),
        per_minute,
    }
}

/// Number of samples or frames of spacing `step` within `duration`.
pub fn frame_count(duration: f64, step: f64) -> usize {
    // tolerate representation error in exact multiples such as 1200 / 2
    ((duration / step) - 1e-9).ceil().max(0.0) as usize
}

fn render_frame(scenario: &Scenario, t: f64, rng: &mut ChaCha8Rng) -> Vec<Detection> {
    let cfg = &scenario.config;
    let jitter = normal(cfg.bbox_jitter);
    let mut out = Vec::new();
    let jittered = |rng: &mut ChaCha8Rng, cx: f64, cy: f64, w: f64, h: f64, conf: f64| {
        let mut c = [cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0];
        if cfg.bbox_jitter > 0.0 {
            for v in &mut c {
                *v += jitter.sample(rng);
            }
        }
        let (x0, x1) = (c[0].min(c[2]), c[0].max(c[2]).max(c[0].min(c[2]) + 1.0));
        let (y0, y1) = (c[1].min(c[3]), c[1].max(c[3]).max(c[1].min(c[3]) + 1.0));
        BoundingBox::new(x0, y0, x1, y1).map(|b| b.with_confidence(conf))
    };

    for v in scenario.visible(t) {
        let (cx, cy) = scenario.position(v, t).expect("visible vehicle has a position");
        let missed = rng.random::<f64>() < cfg.miss_rate;
        let conf = 0.6 + 0.4 * rng.random::<f64>();
        let bbox = jittered(rng, cx, cy, v.width, v.height, conf);
        if missed {
            continue;
        }
        if let Ok(bbox) = bbox {
            out.push(Detection {
                bbox,
                truth_id: Some(v.id),
                appearance: None,
            });
        }
    }
    let typical_w = VEHICLE_LENGTH_M * cfg.px_per_meter;
    let typical_h = VEHICLE_HEIGHT_M * cfg.px_per_meter;
    for &(cx, cy) in &scenario.parked {
        let conf = 0.6 + 0.4 * rng.random::<f64>();
        if rng.random::<f64>() < cfg.miss_rate {
            continue;
        }
        if let Ok(bbox) = jittered(rng, cx, cy, typical_w, typical_h, conf) {
            out.push(Detection::new(bbox));
        }
    }
    let span = lateral_span(cfg);
    for _ in 0..poisson_count(rng, cfg.false_positive_rate) {
        let along = rng.random::<f64>() * cfg.fov_length * cfg.px_per_meter;
        let lateral = span.0 + rng.random::<f64>() * (span.1 - span.0);
        let (cx, cy) = scenario.road_to_image(along, lateral);
        let conf = 0.3 + 0.3 * rng.random::<f64>();
        if let Ok(bbox) = jittered(rng, cx, cy, typical_w, typical_h, conf) {
            out.push(Detection::new(bbox));
        }
    }
    out
}

fn with_appearance(mut dets: Vec<Detection>, oracle: &NoisyOracle, frame: FrameId) -> Vec<Detection> {
    for d in &mut dets {
        d.appearance = Some(oracle.estimate(frame, d));
    }
    dets
}

/// Frame pairs at `t_k = k·t_gap` and `t_k + intra_pair_dt`, each detection
/// annotated with the scenario oracle's appearance heading.
pub fn render_sparse(scenario: &Scenario, t_gap: f64, intra_pair_dt: f64) -> Result<Vec<FramePairObservation>> {
    if !(intra_pair_dt > 0.0 && t_gap > intra_pair_dt) {
        return Err(Error::invalid(format!(
            "need t_gap > intra_pair_dt > 0, got t_gap {t_gap}, intra_pair_dt {intra_pair_dt}"
        )));
    }
    let oracle = scenario.oracle();
    let seed = scenario.config.seed;
    let n = frame_count(scenario.config.duration, t_gap);
    Ok((0..n as u64)
        .into_par_iter()
        .map(|k| {
            let t_k = k as f64 * t_gap;
            let mut rng = derived_rng(seed, TAG_FRAME_SPARSE, k);
            let first = render_frame(scenario, t_k, &mut rng);
            let second = render_frame(scenario, t_k + intra_pair_dt, &mut rng);
            FramePairObservation {
                sample_index: k,
                t_k,
                intra_pair_dt,
                detections_1: with_appearance(first, &oracle, FrameId { sample_index: k, slot: 0 }),
                detections_2: with_appearance(second, &oracle, FrameId { sample_index: k, slot: 1 }),
            }
        })
        .collect())
}

/// Every frame at spacing `frame_dt`.
pub fn render_dense(scenario: &Scenario, frame_dt: f64) -> Result<Vec<DenseFrame>> {
    if !(frame_dt > 0.0) {
        return Err(Error::invalid(format!("frame_dt {frame_dt} must be positive")));
    }
    let seed = scenario.config.seed;
    let n = frame_count(scenario.config.duration, frame_dt);
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 * frame_dt;
            let mut rng = derived_rng(seed, TAG_FRAME_DENSE, i);
            DenseFrame {
                frame_index: i,
                t,
                detections: render_frame(scenario, t, &mut rng),
            }
        })
        .collect())
}

/// Appearance-model stand-in: the true heading plus Gaussian noise, or a
/// uniform heading with probability `flip_rate` and for boxes that belong to
/// no vehicle. Answers depend only on the seed, the frame and the vehicle id
/// (or box coordinates for clutter).
#[derive(Debug, Clone)]
pub struct NoisyOracle {
    seed: u64,
    noise: f64,
    flip_rate: f64,
    headings: Vec<CyclicAngle>,
}

pub fn noisy_oracle(scenario: &Scenario) -> NoisyOracle {
    NoisyOracle {
        seed: scenario.config.seed,
        noise: scenario.config.oracle_noise,
        flip_rate: scenario.config.oracle_flip_rate,
        headings: scenario
            .vehicles
            .iter()
            .map(|v| scenario.heading(v.direction))
            .collect(),
    }
}

impl NoisyOracle {
    pub fn new(seed: u64, noise: f64, flip_rate: f64, headings: Vec<CyclicAngle>) -> Self {
        NoisyOracle {
            seed,
            noise,
            flip_rate,
            headings,
        }
    }
}

fn box_key(b: &BoundingBox) -> u64 {
    [b.x_min, b.y_min, b.x_max, b.y_max]
        .iter()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, v| {
            (h ^ v.to_bits()).wrapping_mul(0x0000_0100_0000_01b3)
        })
}

impl OrientationOracle for NoisyOracle {
    fn estimate(&self, frame: FrameId, detection: &Detection) -> CyclicAngle {
        let frame_key = frame.sample_index.wrapping_mul(2) + u64::from(frame.slot);
        let truth = detection
            .truth_id
            .and_then(|id| self.headings.get(id as usize).map(|h| (id, *h)));
        let object_key = match truth {
            Some((id, _)) => u64::from(id),
            None => box_key(&detection.bbox) | 1 << 63,
        };
        let mut rng = derived_rng(self.seed ^ object_key.rotate_left(17), TAG_ORACLE, frame_key);
        let uniform = |rng: &mut ChaCha8Rng| CyclicAngle::new(rng.random::<f64>() * TAU - PI);
        match truth {
            Some((_, heading)) => {
                if rng.random::<f64>() < self.flip_rate {
                    uniform(&mut rng)
                } else if self.noise > 0.0 {
                    heading.rotate(normal(self.noise).sample(&mut rng))
                } else {
                    heading
                }
            }
            None => uniform(&mut rng),
        }
    }
}
