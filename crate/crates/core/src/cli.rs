//! Command implementations behind the `wwc` binary.
//!
//! Each command reads and writes record files (see [`crate::records`]) and
//! embeds the fully resolved [`RunConfig`] as the first record of every
//! output, so a run can be reproduced from its outputs alone.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::arma::{estimate_with_orders, ArmaOrder, CountSeries, EstimateReport};
use crate::config::RunConfig;
use crate::detector::{process_stream_counts, FramePairObservation, PairCounts, RecordedOracle};
use crate::error::{Error, Result};
use crate::methods::MethodRegistry;
use crate::records::{read_file, write_file, Record, RecordWriter};
use crate::simulator::{generate_scenario, render_dense, render_sparse, GroundTruth};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.jsonl";
pub const SPARSE_FILE: &str = "sparse.jsonl";
pub const DENSE_FILE: &str = "dense.jsonl";

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_file(p).map_err(|e| match e {
            Error::Io(io) => Error::config(format!("cannot read {}: {io}", p.display())),
            other => other,
        }),
        None => Ok(RunConfig::default()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub ground_truth: GroundTruth,
    pub samples: usize,
    pub dense_frames: usize,
    pub files: Vec<PathBuf>,
}

pub fn cmd_simulate(config: Option<&Path>, out_dir: &Path, seed: Option<u64>) -> Result<SimulateSummary> {
    let mut cfg = load_config(config)?;
    if let Some(seed) = seed {
        cfg.scenario.seed = seed;
    }
    cfg.validate()?;
    let scenario = generate_scenario(&cfg.scenario)?;
    let sparse = render_sparse(&scenario, cfg.t_gap, cfg.intra_pair_dt)?;
    let dense = render_dense(&scenario, cfg.frame_dt)?;

    fs::create_dir_all(out_dir)?;
    let header = Record::RunConfig(cfg);
    let gt_path = out_dir.join(GROUND_TRUTH_FILE);
    write_file(
        &gt_path,
        [&header, &Record::GroundTruth(scenario.ground_truth.clone())],
    )?;

    let sparse_path = out_dir.join(SPARSE_FILE);
    let mut w = RecordWriter::create(&sparse_path)?;
    w.write(&header)?;
    for obs in &sparse {
        w.write(&Record::FramePair(obs.clone()))?;
    }
    w.finish()?;

    let dense_path = out_dir.join(DENSE_FILE);
    let mut w = RecordWriter::create(&dense_path)?;
    w.write(&header)?;
    for frame in &dense {
        w.write(&Record::Frame(frame.clone()))?;
    }
    w.finish()?;

    Ok(SimulateSummary {
        ground_truth: scenario.ground_truth,
        samples: sparse.len(),
        dense_frames: dense.len(),
        files: vec![gt_path, sparse_path, dense_path],
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectOptions {
    pub t_gap: Option<f64>,
    pub div_max: Option<f64>,
    pub no_ensemble: bool,
}

/// Splits a record file into its optional config header and the payload.
fn split_header(records: Vec<(usize, Record)>) -> (Option<RunConfig>, Vec<(usize, Record)>) {
    let mut header = None;
    let mut rest = Vec::with_capacity(records.len());
    for (line, r) in records {
        match r {
            Record::RunConfig(cfg) if header.is_none() && rest.is_empty() => header = Some(cfg),
            other => rest.push((line, other)),
        }
    }
    (header, rest)
}

fn unexpected(line: usize, want: &str, got: &Record) -> Error {
    Error::Data {
        line,
        msg: format!("expected a {want} record, found `{}`", got.kind()),
    }
}

pub fn cmd_detect(input: &Path, output: &Path, opts: &DetectOptions) -> Result<Vec<PairCounts>> {
    let (header, rest) = split_header(read_file(input)?);
    let mut cfg = header.unwrap_or_default();
    if let Some(t) = opts.t_gap {
        cfg.t_gap = t;
    }
    if let Some(d) = opts.div_max {
        cfg.div_max = d;
    }
    if opts.no_ensemble {
        cfg.ensemble = false;
    }
    cfg.validate()?;

    let mut observations: Vec<FramePairObservation> = Vec::with_capacity(rest.len());
    for (line, record) in rest {
        let Record::FramePair(obs) = record else {
            return Err(unexpected(line, "frame_pair", &record));
        };
        validate_observation(&obs, observations.last(), cfg.t_gap, cfg.ensemble)
            .map_err(|msg| Error::Data { line, msg })?;
        observations.push(obs);
    }

    let counts = process_stream_counts(&observations, &RecordedOracle, &cfg.detector(), cfg.t_gap)?;
    let mut w = RecordWriter::create(output)?;
    w.write(&Record::RunConfig(cfg))?;
    for c in &counts {
        w.write(&Record::Counts(*c))?;
    }
    w.finish()?;
    Ok(counts)
}

fn validate_observation(
    obs: &FramePairObservation,
    prev: Option<&FramePairObservation>,
    t_gap: f64,
    needs_appearance: bool,
) -> std::result::Result<(), String> {
    let expected = prev.map_or(0, |p| p.sample_index + 1);
    if obs.sample_index != expected {
        return Err(format!(
            "sample_index {} breaks the stream (expected {expected})",
            obs.sample_index
        ));
    }
    if let Some(p) = prev {
        if !(obs.t_k > p.t_k) {
            return Err(format!("t_k {} not after previous {}", obs.t_k, p.t_k));
        }
    }
    if !(obs.intra_pair_dt > 0.0 && obs.intra_pair_dt < t_gap) {
        return Err(format!(
            "intra_pair_dt {} must lie in (0, t_gap = {t_gap})",
            obs.intra_pair_dt
        ));
    }
    for (frame, dets) in [(1, &obs.detections_1), (2, &obs.detections_2)] {
        for (i, d) in dets.iter().enumerate() {
            d.bbox
                .validate()
                .map_err(|e| format!("frame {frame} detection {i}: {e}"))?;
            if needs_appearance && d.appearance.is_none() {
                return Err(format!(
                    "frame {frame} detection {i}: missing `appearance` heading required by the ensemble"
                ));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimateOptions {
    pub orders_right: Option<ArmaOrder>,
    pub orders_wrong: Option<ArmaOrder>,
}

/// Reads a count-series file into aligned series plus its config.
pub fn read_series(input: &Path) -> Result<(RunConfig, CountSeries, CountSeries)> {
    let (header, rest) = split_header(read_file(input)?);
    let cfg = header.unwrap_or_default();
    let mut counts: Vec<PairCounts> = Vec::with_capacity(rest.len());
    for (line, record) in rest {
        let Record::Counts(c) = record else {
            return Err(unexpected(line, "counts", &record));
        };
        if c.sample_index != counts.len() as u64 {
            return Err(Error::Data {
                line,
                msg: format!(
                    "sample_index {} breaks the series (expected {})",
                    c.sample_index,
                    counts.len()
                ),
            });
        }
        counts.push(c);
    }
    if !(cfg.t_gap > 0.0) {
        return Err(Error::config(format!("t_gap {} must be positive", cfg.t_gap)));
    }
    let (right, wrong) = CountSeries::pair_from_counts(&counts, cfg.t_gap);
    Ok((cfg, right, wrong))
}

pub fn cmd_estimate(input: &Path, output: &Path, opts: &EstimateOptions) -> Result<EstimateReport> {
    let (mut cfg, right, wrong) = read_series(input)?;
    if let Some(o) = opts.orders_right {
        cfg.orders_right = [o.p, o.q];
    }
    if let Some(o) = opts.orders_wrong {
        cfg.orders_wrong = [o.p, o.q];
    }
    let report = estimate_with_orders(&right, &wrong, cfg.order_right()?, cfg.order_wrong()?)?;
    write_file(
        output,
        [&Record::RunConfig(cfg), &Record::Report(report.clone())],
    )?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub seed: u64,
    pub method: String,
    pub frames: usize,
    pub wall_ms: f64,
    pub ratio: Option<f64>,
    pub truth: Option<f64>,
    pub note: Option<String>,
}

impl BenchRow {
    pub fn abs_error(&self) -> Option<f64> {
        Some((self.ratio? - self.truth?).abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub runs: usize,
    /// Runs that produced a ratio against a defined ground truth.
    pub scored: usize,
    pub mean_abs_error: Option<f64>,
    pub mean_frames: f64,
    pub mean_wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchTable {
    pub config: RunConfig,
    pub rows: Vec<BenchRow>,
    pub summaries: Vec<MethodSummary>,
    /// Fraction of seeds where the ensemble error is no larger than the
    /// detection-only error, when both methods ran.
    pub ensemble_not_worse: Option<f64>,
}

impl BenchTable {
    pub fn summary(&self, method: &str) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a BenchRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }

    /// Tab-separated table with `#` comment lines for config and summaries.
    pub fn render(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"));
        let mut s = String::new();
        let cfg = serde_json::to_string(&self.config).expect("config serializes");
        let _ = writeln!(s, "# config: {cfg}");
        let _ = writeln!(s, "seed\tmethod\tframes\twall_ms\tratio\ttruth\tabs_error\tnote");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{:.3}\t{}\t{}\t{}\t{}",
                r.seed,
                r.method,
                r.frames,
                r.wall_ms,
                fmt_opt(r.ratio),
                fmt_opt(r.truth),
                fmt_opt(r.abs_error()),
                r.note.as_deref().unwrap_or("")
            );
        }
        for m in &self.summaries {
            let _ = writeln!(
                s,
                "# summary\t{}\truns={}\tscored={}\tmean_abs_error={}\tmean_frames={:.1}\tmean_wall_ms={:.3}",
                m.method,
                m.runs,
                m.scored,
                fmt_opt(m.mean_abs_error),
                m.mean_frames,
                m.mean_wall_ms
            );
        }
        if let Some(w) = self.ensemble_not_worse {
            let _ = writeln!(s, "# ensemble_not_worse_fraction\t{w:.3}");
        }
        s
    }
}

/// Runs each selected method over `seeds` scenarios (seed, seed+1, ...).
pub fn run_bench(cfg: &RunConfig, seeds: u64, methods: Option<&[String]>) -> Result<BenchTable> {
    cfg.validate()?;
    if seeds == 0 {
        return Err(Error::config("--seeds must be at least 1"));
    }
    let registry = MethodRegistry::with_builtins();
    let selected = match methods {
        Some(names) => registry.select(names)?,
        None => registry.iter().collect(),
    };

    let mut rows = Vec::new();
    for i in 0..seeds {
        let mut scenario_cfg = cfg.scenario.clone();
        scenario_cfg.seed = cfg.scenario.seed.wrapping_add(i);
        let scenario = generate_scenario(&scenario_cfg)?;
        let truth = scenario.ground_truth.true_ratio;
        for method in &selected {
            let start = Instant::now();
            let outcome = method.run(&scenario, cfg)?;
            rows.push(BenchRow {
                seed: scenario_cfg.seed,
                method: method.name().to_string(),
                frames: outcome.frames,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
                ratio: outcome.ratio,
                truth,
                note: outcome.note,
            });
        }
    }

    let summaries = selected
        .iter()
        .map(|m| {
            let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.method == m.name()).collect();
            let errors: Vec<f64> = mine.iter().filter_map(|r| r.abs_error()).collect();
            let n = mine.len() as f64;
            MethodSummary {
                method: m.name().to_string(),
                runs: mine.len(),
                scored: errors.len(),
                mean_abs_error: (!errors.is_empty())
                    .then(|| errors.iter().sum::<f64>() / errors.len() as f64),
                mean_frames: mine.iter().map(|r| r.frames as f64).sum::<f64>() / n,
                mean_wall_ms: mine.iter().map(|r| r.wall_ms).sum::<f64>() / n,
            }
        })
        .collect();

    let ensemble_not_worse = {
        let pairs: Vec<(Option<f64>, Option<f64>)> = (0..seeds)
            .map(|i| cfg.scenario.seed.wrapping_add(i))
            .filter_map(|seed| {
                let find = |name: &str| rows.iter().find(|r| r.seed == seed && r.method == name);
                Some((
                    find("sparse-ensemble")?.abs_error(),
                    find("sparse-detection-only")?.abs_error(),
                ))
            })
            .collect();
        (!pairs.is_empty()).then(|| {
            let wins = pairs
                .iter()
                .filter(|(e, d)| match (e, d) {
                    (Some(e), Some(d)) => e <= d,
                    (Some(_), None) => true,
                    _ => false,
                })
                .count();
            wins as f64 / pairs.len() as f64
        })
    };

    Ok(BenchTable {
        config: cfg.clone(),
        rows,
        summaries,
        ensemble_not_worse,
    })
}

pub fn cmd_bench(config: Option<&Path>, out: &Path, seeds: u64, methods: Option<&[String]>) -> Result<BenchTable> {
    let cfg = load_config(config)?;
    let table = run_bench(&cfg, seeds, methods)?;
    fs::write(out, table.render())?;
    Ok(table)
}
