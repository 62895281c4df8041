//! Ratio-estimation methods behind a common trait, looked up by name.
//!
//! The benchmark runs every selected method on the same scenario. Built-ins:
//!
//! | name                    | frames consumed        | description                          |
//! |-------------------------|------------------------|--------------------------------------|
//! | `sparse-ensemble`       | 2 per `t_gap`          | two-frame detector + And-strategy    |
//! | `sparse-detection-only` | 2 per `t_gap`          | two-frame detector, motion heading   |
//! | `dense-tracker`         | 1 per `frame_dt`       | IoU tracking over every frame        |

use crate::arma::{estimate_with_orders, EstimateReport};
use crate::config::RunConfig;
use crate::detector::{process_stream, RecordedOracle};
use crate::error::{Error, Result};
use crate::simulator::{render_dense, render_sparse, Scenario};
use crate::tracker::{track_stream, tracks_to_ratio};

/// What one method produced on one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub frames: usize,
    /// `None` when the method could not form a ratio; `note` says why.
    pub ratio: Option<f64>,
    pub estimate: Option<EstimateReport>,
    pub note: Option<String>,
}

impl MethodOutcome {
    fn from_result(frames: usize, r: Result<(f64, Option<EstimateReport>)>) -> Result<Self> {
        match r {
            Ok((ratio, estimate)) => Ok(MethodOutcome {
                frames,
                ratio: Some(ratio),
                estimate,
                note: None,
            }),
            // statistical failures are results, not aborts
            Err(e) if e.exit_code() == 4 => Ok(MethodOutcome {
                frames,
                ratio: None,
                estimate: None,
                note: Some(e.to_string()),
            }),
            Err(e) => Err(e),
        }
    }
}

pub trait RatioMethod: Send + Sync {
    fn name(&self) -> &str;

    fn description(&self) -> &str;

    fn run(&self, scenario: &Scenario, cfg: &RunConfig) -> Result<MethodOutcome>;
}

/// Two-frame sparse pipeline followed by ARMA deflation.
pub struct SparsePipeline {
    ensemble: bool,
}

impl SparsePipeline {
    pub fn ensemble() -> Self {
        SparsePipeline { ensemble: true }
    }

    pub fn detection_only() -> Self {
        SparsePipeline { ensemble: false }
    }
}

impl RatioMethod for SparsePipeline {
    fn name(&self) -> &str {
        if self.ensemble {
            "sparse-ensemble"
        } else {
            "sparse-detection-only"
        }
    }

    fn description(&self) -> &str {
        if self.ensemble {
            "two-frame detector with And-strategy validation, ARMA deflation"
        } else {
            "two-frame detector using motion orientation alone, ARMA deflation"
        }
    }

    fn run(&self, scenario: &Scenario, cfg: &RunConfig) -> Result<MethodOutcome> {
        let observations = render_sparse(scenario, cfg.t_gap, cfg.intra_pair_dt)?;
        let run_cfg = RunConfig {
            ensemble: self.ensemble,
            ..cfg.clone()
        };
        let frames = 2 * observations.len();
        let result = process_stream(&observations, &RecordedOracle, &run_cfg.detector(), cfg.t_gap)
            .and_then(|(right, wrong)| {
                estimate_with_orders(&right, &wrong, cfg.order_right()?, cfg.order_wrong()?)
            })
            .map(|est| (est.report.ratio, Some(est)));
        MethodOutcome::from_result(frames, result)
    }
}

/// Dense IoU tracker; each moving track is one event.
pub struct DenseTracker;

impl RatioMethod for DenseTracker {
    fn name(&self) -> &str {
        "dense-tracker"
    }

    fn description(&self) -> &str {
        "IoU tracking on every frame, one event per moving track"
    }

    fn run(&self, scenario: &Scenario, cfg: &RunConfig) -> Result<MethodOutcome> {
        let frames = render_dense(scenario, cfg.frame_dt)?;
        let tc = cfg.tracker();
        let tracks = track_stream(&frames, tc.iou_min, tc.max_age);
        let result = tracks_to_ratio(&tracks, cfg.o_right(), tc.min_displacement, cfg.y_axis())
            .map(|r| (r.ratio, None));
        MethodOutcome::from_result(frames.len(), result)
    }
}

#[derive(Default)]
pub struct MethodRegistry {
    methods: Vec<Box<dyn RatioMethod>>,
}

impl MethodRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        r.register(Box::new(SparsePipeline::ensemble()));
        r.register(Box::new(SparsePipeline::detection_only()));
        r.register(Box::new(DenseTracker));
        r
    }

    /// Adds a method, replacing any existing one with the same name.
    pub fn register(&mut self, method: Box<dyn RatioMethod>) {
        match self.methods.iter().position(|m| m.name() == method.name()) {
            Some(i) => self.methods[i] = method,
            None => self.methods.push(method),
        }
    }

    pub fn get(&self, name: &str) -> Option<&dyn RatioMethod> {
        self.methods.iter().find(|m| m.name() == name).map(|m| m.as_ref())
    }

    pub fn names(&self) -> Vec<&str> {
        self.methods.iter().map(|m| m.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn RatioMethod> {
        self.methods.iter().map(|m| m.as_ref())
    }

    /// Methods by name in the requested order.
    pub fn select(&self, names: &[String]) -> Result<Vec<&dyn RatioMethod>> {
        names
            .iter()
            .map(|n| {
                self.get(n).ok_or_else(|| {
                    Error::config(format!(
                        "unknown method `{n}`; available: {}",
                        self.names().join(", ")
                    ))
                })
            })
            .collect()
    }
}
