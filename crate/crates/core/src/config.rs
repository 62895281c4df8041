//! Run configuration and its flat `key = value` file format.
//!
//! Every key is optional; omitted keys take the defaults below. The file is
//! parsed as TOML, so values are plain numbers, booleans, quoted strings and
//! two-element arrays, e.g.
//!
//! ```text
//! t_gap = 2.0
//! arrival_rate_wrong = 1.5
//! orders_right = [1, 1]
//! y_axis = "down"
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::angles::CyclicAngle;
use crate::arma::ArmaOrder;
use crate::detector::{
    DetectorConfig, EnsembleMode, YAxis, CLASSIFY_THRESHOLD, DEFAULT_DIV_MAX, DEFAULT_INTRA_PAIR_DT,
};
use crate::error::{Error, Result};
use crate::geometry::DEFAULT_IOU_MAX;
use crate::assignment::DEFAULT_IOU_MIN;
use crate::simulator::ScenarioConfig;
use crate::tracker::{TrackerConfig, DEFAULT_MAX_AGE, DEFAULT_MIN_DISPLACEMENT};

pub const DEFAULT_T_GAP: f64 = 2.0;
pub const DEFAULT_FRAME_DT: f64 = 0.17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub iou_max: f64,
    pub iou_min: f64,
    /// Use the And-strategy ensemble; `false` runs motion orientation alone.
    pub ensemble: bool,
    pub div_max: f64,
    pub classify_threshold: f64,

    pub t_gap: f64,
    pub intra_pair_dt: f64,
    /// Frame spacing for the dense baseline.
    pub frame_dt: f64,

    pub orders_right: [usize; 2],
    pub orders_wrong: [usize; 2],

    pub max_age: u32,
    pub min_displacement: f64,

    /// Scenario keys, including `o_right`, `y_axis` and `seed`.
    #[serde(flatten)]
    pub scenario: ScenarioConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            iou_max: DEFAULT_IOU_MAX,
            iou_min: DEFAULT_IOU_MIN,
            ensemble: true,
            div_max: DEFAULT_DIV_MAX,
            classify_threshold: CLASSIFY_THRESHOLD,
            t_gap: DEFAULT_T_GAP,
            intra_pair_dt: DEFAULT_INTRA_PAIR_DT,
            frame_dt: DEFAULT_FRAME_DT,
            orders_right: [1, 1],
            orders_wrong: [1, 0],
            max_age: DEFAULT_MAX_AGE,
            min_displacement: DEFAULT_MIN_DISPLACEMENT,
            scenario: ScenarioConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn o_right(&self) -> CyclicAngle {
        self.scenario.o_right
    }

    pub fn y_axis(&self) -> YAxis {
        self.scenario.y_axis
    }

    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            iou_max: self.iou_max,
            iou_min: self.iou_min,
            ensemble: if self.ensemble {
                EnsembleMode::AndStrategy {
                    div_max: self.div_max,
                }
            } else {
                EnsembleMode::DetectionOnly
            },
            classify_threshold: self.classify_threshold,
            o_right: self.o_right(),
            y_axis: self.y_axis(),
        }
    }

    pub fn tracker(&self) -> TrackerConfig {
        TrackerConfig {
            iou_min: self.iou_min,
            max_age: self.max_age,
            min_displacement: self.min_displacement,
        }
    }

    pub fn order_right(&self) -> Result<ArmaOrder> {
        ArmaOrder::new(self.orders_right[0], self.orders_right[1])
    }

    pub fn order_wrong(&self) -> Result<ArmaOrder> {
        ArmaOrder::new(self.orders_wrong[0], self.orders_wrong[1])
    }

    /// Checks every field; the error message starts with the offending key.
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if !(self.iou_max > 0.0 && self.iou_max <= 1.0) {
            return Err(Error::invalid(format!("iou_max {} outside (0, 1]", self.iou_max)));
        }
        if !(0.0..1.0).contains(&self.iou_min) {
            return Err(Error::invalid(format!("iou_min {} outside [0, 1)", self.iou_min)));
        }
        if !(self.div_max > 0.0 && self.div_max <= PI) {
            return Err(Error::invalid(format!("div_max {} outside (0, π]", self.div_max)));
        }
        if !(self.classify_threshold > 0.0 && self.classify_threshold <= PI) {
            return Err(Error::invalid(format!(
                "classify_threshold {} outside (0, π]",
                self.classify_threshold
            )));
        }
        if !(self.intra_pair_dt > 0.0) {
            return Err(Error::invalid(format!(
                "intra_pair_dt {} must be positive",
                self.intra_pair_dt
            )));
        }
        if !(self.t_gap > self.intra_pair_dt) {
            return Err(Error::invalid(format!(
                "t_gap {} must exceed intra_pair_dt {}",
                self.t_gap, self.intra_pair_dt
            )));
        }
        if !(self.frame_dt > 0.0) {
            return Err(Error::invalid(format!("frame_dt {} must be positive", self.frame_dt)));
        }
        if !(self.min_displacement >= 0.0) {
            return Err(Error::invalid(format!(
                "min_displacement {} must be non-negative",
                self.min_displacement
            )));
        }
        if self.max_age == 0 {
            return Err(Error::invalid("max_age must be at least 1"));
        }
        self.order_right()
            .map_err(|e| Error::invalid(format!("orders_right: {e}")))?;
        self.order_wrong()
            .map_err(|e| Error::invalid(format!("orders_wrong: {e}")))?;
        Ok(())
    }

    /// Parses and validates config text. Errors carry the 1-based line.
    pub fn from_text(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            msg: e.message().to_string(),
        })?;
        let known = known_keys();
        for key in table.keys() {
            if !known.iter().any(|k| k == key) {
                return Err(Error::Config {
                    line: line_of_key(text, key),
                    msg: format!("unknown key `{key}`"),
                });
            }
        }
        let cfg: RunConfig = table.clone().try_into().map_err(|e: toml::de::Error| {
            let culprit = table.iter().find(|(k, v)| {
                let mut probe = default_table();
                probe.insert((*k).clone(), (*v).clone());
                probe.try_into::<RunConfig>().is_err()
            });
            match culprit {
                Some((key, _)) => Error::Config {
                    line: line_of_key(text, key),
                    msg: format!("{key}: {}", e.message()),
                },
                None => Error::Config {
                    line: None,
                    msg: e.message().to_string(),
                },
            }
        })?;
        cfg.validate().map_err(|e| match e {
            Error::InvalidParameter(msg) => {
                let key = msg
                    .split(|c: char| !(c.is_alphanumeric() || c == '_'))
                    .next()
                    .unwrap_or_default();
                Error::Config {
                    line: line_of_key(text, key),
                    msg,
                }
            }
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }
}

fn default_table() -> toml::Table {
    toml::Table::try_from(RunConfig::default()).expect("default config serializes")
}

fn known_keys() -> Vec<String> {
    default_table().keys().cloned().collect()
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn line_of_key(text: &str, key: &str) -> Option<usize> {
    if key.is_empty() {
        return None;
    }
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}
