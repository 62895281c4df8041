use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wwc::cli::{cmd_simulate, DENSE_FILE, GROUND_TRUTH_FILE, SPARSE_FILE};
use wwc::detector::{process_stream_counts, RecordedOracle};
use wwc::records::{read_file, Record};
use wwc::simulator::{generate_scenario, render_sparse};
use wwc::RunConfig;

fn wwc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wwc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

const SHORT: &str = "duration = 120.0\nseed = 9\narrival_rate_right = 12.0\narrival_rate_wrong = 3.0\n";

fn simulate_into(dir: &Path) -> PathBuf {
    let config = write_config(dir, SHORT);
    let out = dir.join("sim");
    let run = wwc(&["simulate", "--config", path_str(&config), "--out", path_str(&out)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    out
}

fn exit_code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn simulate_writes_all_files_with_matching_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate_into(dir.path());
    let count = |name: &str| read_file(&out.join(name)).unwrap().len();
    assert_eq!(count(GROUND_TRUTH_FILE), 2);
    assert_eq!(count(SPARSE_FILE), 1 + 60);
    assert_eq!(count(DENSE_FILE), 1 + 706);
    for name in [GROUND_TRUTH_FILE, SPARSE_FILE, DENSE_FILE] {
        let records = read_file(&out.join(name)).unwrap();
        let Record::RunConfig(cfg) = &records[0].1 else {
            panic!("{name} does not start with its config");
        };
        assert_eq!(cfg.scenario.duration, 120.0);
        assert_eq!(cfg.scenario.seed, 9);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SHORT);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let run = wwc(&["simulate", "--config", path_str(&config), "--out", path_str(out), "--seed", "4"]);
        assert!(run.status.success());
    }
    for name in [GROUND_TRUTH_FILE, SPARSE_FILE, DENSE_FILE] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let (ca, cb) = (a.join("counts.jsonl"), b.join("counts.jsonl"));
    for (src, dst) in [(&a, &ca), (&b, &cb)] {
        let run = wwc(&["detect", "--in", path_str(&src.join(SPARSE_FILE)), "--out", path_str(dst)]);
        assert!(run.status.success());
    }
    assert_eq!(fs::read(&ca).unwrap(), fs::read(&cb).unwrap());
}

#[test]
fn invalid_config_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "seed = 1\n\nduration = 0.0\n");
    let run = wwc(&["simulate", "--config", path_str(&config), "--out", path_str(&dir.path().join("x"))]);
    assert_eq!(exit_code(&run), 2);
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("line 3") && stderr.contains("duration"), "{stderr}");

    let config = write_config(dir.path(), "t_gap = 2.0\nnot_a_key = 1\n");
    let run = wwc(&["simulate", "--config", path_str(&config), "--out", path_str(&dir.path().join("x"))]);
    assert_eq!(exit_code(&run), 2);
    assert!(String::from_utf8_lossy(&run.stderr).contains("line 2"));
}

#[test]
fn detect_matches_library_call() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate_into(dir.path());
    let counts_path = dir.path().join("counts.jsonl");
    let run = wwc(&["detect", "--in", path_str(&out.join(SPARSE_FILE)), "--out", path_str(&counts_path)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    let cfg = RunConfig::from_text(SHORT).unwrap();
    let scenario = generate_scenario(&cfg.scenario).unwrap();
    let obs = render_sparse(&scenario, cfg.t_gap, cfg.intra_pair_dt).unwrap();
    let want = process_stream_counts(&obs, &RecordedOracle, &cfg.detector(), cfg.t_gap).unwrap();
    let got: Vec<_> = read_file(&counts_path)
        .unwrap()
        .into_iter()
        .filter_map(|(_, r)| match r {
            Record::Counts(c) => Some(c),
            _ => None,
        })
        .collect();
    assert_eq!(got, want);

    // same stream through the library simulate entry point
    let lib_dir = dir.path().join("lib");
    cmd_simulate(Some(&write_config(dir.path(), SHORT)), &lib_dir, None).unwrap();
    assert_eq!(
        fs::read(lib_dir.join(SPARSE_FILE)).unwrap(),
        fs::read(out.join(SPARSE_FILE)).unwrap()
    );
}

#[test]
fn detect_rejects_bad_records_by_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate_into(dir.path());
    let text = fs::read_to_string(out.join(SPARSE_FILE)).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[4] = "{\"schema_version\":1,\"record\":\"frame_pair\",";
    let broken = dir.path().join("broken.jsonl");
    fs::write(&broken, lines.join("\n")).unwrap();
    let run = wwc(&["detect", "--in", path_str(&broken), "--out", path_str(&dir.path().join("c"))]);
    assert_eq!(exit_code(&run), 3);
    assert!(String::from_utf8_lossy(&run.stderr).contains("line 5"));

    let mut lines: Vec<&str> = text.lines().collect();
    lines.remove(3);
    let gap = dir.path().join("gap.jsonl");
    fs::write(&gap, lines.join("\n")).unwrap();
    let run = wwc(&["detect", "--in", path_str(&gap), "--out", path_str(&dir.path().join("c"))]);
    assert_eq!(exit_code(&run), 3);
    assert!(String::from_utf8_lossy(&run.stderr).contains("line 4"));
}

#[test]
fn detect_requires_appearance_only_with_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate_into(dir.path());
    let text = fs::read_to_string(out.join(SPARSE_FILE)).unwrap();
    let stripped: String = text
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            for key in ["detections_1", "detections_2"] {
                if let Some(dets) = v.get_mut(key).and_then(|d| d.as_array_mut()) {
                    for d in dets {
                        d.as_object_mut().unwrap().remove("appearance");
                    }
                }
            }
            v.to_string() + "\n"
        })
        .collect();
    let input = dir.path().join("bare.jsonl");
    fs::write(&input, stripped).unwrap();
    let c = dir.path().join("c.jsonl");
    let run = wwc(&["detect", "--in", path_str(&input), "--out", path_str(&c)]);
    assert_eq!(exit_code(&run), 3);
    assert!(String::from_utf8_lossy(&run.stderr).contains("appearance"));
    let run = wwc(&["detect", "--in", path_str(&input), "--out", path_str(&c), "--no-ensemble"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let records = read_file(&c).unwrap();
    let Record::RunConfig(cfg) = &records[0].1 else { panic!() };
    assert!(!cfg.ensemble);
}

#[test]
fn empty_input_gives_empty_series() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.jsonl");
    fs::write(&input, "").unwrap();
    let c = dir.path().join("c.jsonl");
    let run = wwc(&["detect", "--in", path_str(&input), "--out", path_str(&c)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let records = read_file(&c).unwrap();
    assert_eq!(records.len(), 1);
    assert!(matches!(records[0].1, Record::RunConfig(_)));
}

fn counts_file(dir: &Path, name: &str, rows: &[(u32, u32)]) -> PathBuf {
    let mut text = String::new();
    for (k, (r, w)) in rows.iter().enumerate() {
        text += &format!("{{\"schema_version\":1,\"record\":\"counts\",\"sample_index\":{k},\"d_r\":{r},\"d_w\":{w}}}\n");
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn report(path: &Path) -> wwc::EstimateReport {
    match read_file(path).unwrap().pop().unwrap().1 {
        Record::Report(r) => r,
        other => panic!("not a report: {other:?}"),
    }
}

#[test]
fn estimate_reports_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<(u32, u32)> = (0..80).map(|k| ((k * 7 % 5) as u32, 0)).collect();
    let input = counts_file(dir.path(), "zero_wrong.jsonl", &rows);
    let out = dir.path().join("report.jsonl");
    let run = wwc(&["estimate", "--in", path_str(&input), "--out", path_str(&out)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let rep = report(&out);
    assert_eq!(rep.report.ratio, 0.0);
    assert!(rep.fit_wrong.is_none());

    let rows: Vec<(u32, u32)> = (0..80).map(|k| ((k * 7 % 5) as u32, (k % 3 == 0) as u32)).collect();
    let input = counts_file(dir.path(), "mixed.jsonl", &rows);
    let run = wwc(&[
        "estimate", "--in", path_str(&input), "--out", path_str(&out), "--orders-right", "1,0",
    ]);
    assert!(run.status.success());
    let rep = report(&out);
    assert_eq!(rep.fit_right.unwrap().q, 0);
    let (right, wrong) = wwc::cli::read_series(&input).map(|(_, r, w)| (r, w)).unwrap();
    let lib = wwc::estimate_with_orders(
        &right,
        &wrong,
        wwc::ArmaOrder::new(1, 0).unwrap(),
        wwc::ArmaOrder::WRONG_WAY,
    )
    .unwrap();
    assert_eq!(rep, lib);

    let single = counts_file(dir.path(), "single.jsonl", &[(3, 1)]);
    let run = wwc(&["estimate", "--in", path_str(&single), "--out", path_str(&out)]);
    assert_eq!(exit_code(&run), 4);

    let constant = counts_file(dir.path(), "constant.jsonl", &[(3, 1); 40]);
    let run = wwc(&["estimate", "--in", path_str(&constant), "--out", path_str(&out)]);
    assert_eq!(exit_code(&run), 4);

    let run = wwc(&["estimate", "--in", path_str(&input), "--out", path_str(&out), "--orders-right", "2,0"]);
    assert_eq!(exit_code(&run), 2);

    let run = wwc(&["estimate", "--in", path_str(&dir.path().join("missing")), "--out", path_str(&out)]);
    assert_eq!(exit_code(&run), 3);
}

#[test]
fn bench_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SHORT);
    let table = dir.path().join("bench.tsv");
    let run = wwc(&["bench", "--config", path_str(&config), "--out", path_str(&table), "--seeds", "2"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = fs::read_to_string(&table).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').collect())
        .collect();
    assert_eq!(rows[0][..7], ["seed", "method", "frames", "wall_ms", "ratio", "truth", "abs_error"]);
    assert_eq!(rows.len(), 1 + 2 * 3);
    let frames = |m: &str| rows.iter().find(|r| r[1] == m).unwrap()[2].parse::<usize>().unwrap();
    assert_eq!(frames("sparse-ensemble"), 120);
    assert_eq!(frames("sparse-detection-only"), 120);
    assert_eq!(frames("dense-tracker"), 706);
    assert!(text.starts_with("# config: {"));
    assert_eq!(text.matches("# summary").count(), 3);

    let run = wwc(&["bench", "--config", path_str(&config), "--out", path_str(&table), "--methods", "nope"]);
    assert_eq!(exit_code(&run), 2);
}
