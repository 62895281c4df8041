//! Wrong-way cycling ratio estimation from sparsely sampled video.
//!
//! The pipeline samples two frames every `t_gap` seconds, classifies matched
//! boxes as right-way or wrong-way with a motion/appearance ensemble
//! ([`detector`]), and converts the per-sample counts into a video-level ratio
//! by ARMA-based deflation ([`arma`]). A seeded traffic [`simulator`] and a
//! dense IoU [`tracker`] baseline make the whole chain testable offline.

// `!(x > 0.0)` also rejects NaN, which is the point
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angles;
pub mod arma;
pub mod assignment;
pub mod cli;
pub mod config;
pub mod detector;
pub mod ensemble_math;
pub mod error;
pub mod geometry;
pub mod methods;
pub mod records;
pub mod simulator;
pub mod tracker;

pub use angles::{circular_mean, cyclic_error, psc_decode, psc_encode, psc_loss, CyclicAngle, PscVector};
pub use arma::{
    deflate, estimate_from_counts, estimate_with_orders, fit_arma, simulate_arma, wwc_ratio, ArmaFit,
    ArmaOrder, CountSeries, DeflatedSeries, EstimateReport, RatioReport,
};
pub use assignment::{hungarian_match, MatchList};
pub use config::RunConfig;
pub use detector::{
    and_strategy, classify, process_pair, process_stream, DetectorConfig, Detection, Direction,
    EnsembleMode, FramePairObservation, OrientationOracle, PairCounts,
};
pub use error::{Error, Result};
pub use geometry::{centroid, iou, iou_matrix, mask_stationary, BoundingBox, IoUMatrix};
pub use methods::{MethodRegistry, RatioMethod};
pub use simulator::{generate_scenario, render_dense, render_sparse, Scenario, ScenarioConfig};
pub use tracker::{track_stream, tracks_to_ratio, Track};
