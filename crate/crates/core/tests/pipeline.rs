use std::collections::HashSet;

use wwc::cli::run_bench;
use wwc::detector::{process_pair, RecordedOracle};
use wwc::simulator::{generate_scenario, render_sparse, ScenarioConfig};
use wwc::{estimate_with_orders, ArmaOrder, RunConfig};

/// Short field of view and a long gap: no vehicle is visible in two samples.
fn no_persistence() -> RunConfig {
    let mut cfg = RunConfig {
        t_gap: 4.0,
        ..RunConfig::default()
    };
    cfg.scenario = ScenarioConfig {
        fov_length: 10.0,
        speed_mean: 4.0,
        speed_sd: 0.0,
        arrival_rate_right: 20.0,
        arrival_rate_wrong: 4.0,
        duration: 900.0,
        seed: 21,
        ..cfg.scenario
    }
    .noise_free();
    cfg
}

#[test]
fn without_persistence_sums_count_unique_vehicles() {
    let cfg = no_persistence();
    let scenario = generate_scenario(&cfg.scenario).unwrap();
    let obs = render_sparse(&scenario, cfg.t_gap, cfg.intra_pair_dt).unwrap();
    let det = cfg.detector();
    let mut seen: HashSet<u32> = HashSet::new();
    let (mut d_r, mut d_w) = (0u64, 0u64);
    for o in &obs {
        let (counts, instances) = process_pair(o, &RecordedOracle, &det);
        d_r += u64::from(counts.d_r);
        d_w += u64::from(counts.d_w);
        for inst in instances {
            let id = o.detections_1[inst.pair.0].truth_id.unwrap();
            assert_eq!(Some(id), o.detections_2[inst.pair.1].truth_id);
            assert!(seen.insert(id), "vehicle {id} counted in two samples");
            assert_eq!(inst.direction, scenario.vehicles[id as usize].direction);
        }
    }
    assert!(d_r > 0 && d_w > 0);
    assert_eq!((d_r + d_w) as usize, seen.len());

    // with φ fixed at zero the estimate is the raw-count ratio
    let (right, wrong) = wwc::process_stream(&obs, &RecordedOracle, &det, cfg.t_gap).unwrap();
    let zero = ArmaOrder::new(0, 0).unwrap();
    let est = estimate_with_orders(&right, &wrong, zero, zero).unwrap();
    assert_eq!(est.report.ratio, d_w as f64 / (d_r + d_w) as f64);
}

#[test]
fn noise_free_bench_is_calibrated() {
    let mut cfg = RunConfig::default();
    cfg.scenario = ScenarioConfig {
        seed: 1,
        ..cfg.scenario
    }
    .noise_free();
    let table = run_bench(&cfg, 1, None).unwrap();
    for row in &table.rows {
        let err = row.abs_error().unwrap();
        assert!(err <= 0.02, "{}: |err| {err}", row.method);
    }
    let tracker = table.rows_for("dense-tracker").next().unwrap();
    assert_eq!(tracker.ratio, tracker.truth);
}

#[test]
fn bench_is_deterministic_apart_from_timing() {
    let cfg = RunConfig::default();
    let strip = |t: wwc::cli::BenchTable| -> Vec<_> {
        t.rows
            .into_iter()
            .map(|r| (r.seed, r.method, r.frames, r.ratio.map(f64::to_bits)))
            .collect()
    };
    assert_eq!(strip(run_bench(&cfg, 2, None).unwrap()), strip(run_bench(&cfg, 2, None).unwrap()));
}
