mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cnt_core::metrics::{analyze_snapshot, AnalyzeOptions, MetricRecord};
use cnt_core::snapshot::{
    write_snapshot, Conv2d, Dense, Kernel, LayerWeights, MapDims, Padding, SnapshotMeta, CNTS_MAGIC,
};
use cnt_core::NetworkSnapshot;
use common::*;
use serde_json::Value;
use tempfile::TempDir;

fn cnt(args: &[&str]) -> Output {
    cnt_env(args, &[])
}

fn cnt_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cnt"));
    c.args(args).env_remove("CNT_THREADS");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn schema_check(schema: &str, doc: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(schema);
    let schema: Value = serde_json::from_slice(&fs::read(path).unwrap()).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{schema}: {errors:?}");
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn files(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    v.sort();
    v
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn dense_net(seed: u64, sizes: &[usize], accuracy: f64) -> NetworkSnapshot {
    let mut r = rng(seed);
    let layers = sizes.windows(2).map(|w| LayerWeights::Dense(random_dense(&mut r, w[0], w[1]))).collect();
    let meta = SnapshotMeta {
        accuracy,
        seed: 7,
        epoch: seed,
        task_tag: "synthetic".into(),
        ..SnapshotMeta::default()
    };
    NetworkSnapshot::new(layers, meta).unwrap()
}

fn put(dir: &Path, name: &str, s: &NetworkSnapshot) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, write_snapshot(s)).unwrap();
    p
}

const SMALL_CONFIG: &str = r#"{
  "layer_sizes": [64, 16, 10],
  "init_family": "uniform",
  "init_scale": 0.5,
  "learning_rate": 0.1,
  "batch_size": 32,
  "max_epochs": 2,
  "seed": 5
}"#;

#[test]
fn train_writes_one_file_per_snapshot_and_an_index() {
    let t = TempDir::new().unwrap();
    let cfg = t.path().join("cfg.json");
    fs::write(&cfg, SMALL_CONFIG).unwrap();
    schema_check("train_config.schema.json", &serde_json::from_str(SMALL_CONFIG).unwrap());
    let out = t.path().join("pop");
    let o = cnt(&["train", "--config", s(&cfg), "--count", "4", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let snaps = files(&out, "cnts");
    assert_eq!(snaps.len(), 8);
    for p in &snaps {
        let name = p.file_name().unwrap().to_str().unwrap();
        assert!(name.starts_with("digits8x8_seed"), "{name}");
        let acc = name.split("_acc").nth(1).unwrap().trim_end_matches(".cnts");
        assert_eq!(acc.len(), 6, "{name}");
        let bytes = fs::read(p).unwrap();
        assert_eq!(&bytes[..4], CNTS_MAGIC);
        let len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        schema_check("cnts_header.schema.json", &serde_json::from_slice(&bytes[10..10 + len]).unwrap());
    }
    let index = json(&out.join("population.json"));
    schema_check("population_index.schema.json", &index);
    assert_eq!(index["members"].as_array().unwrap().len(), 4);
    schema_check("run_manifest.schema.json", &json(&out.join("run_manifest.json")));

    // rerun: byte-identical
    let before = dir_bytes(&out);
    assert_eq!(code(&cnt(&["train", "--config", s(&cfg), "--count", "4", "--out", s(&out)])), 0);
    assert_eq!(before, dir_bytes(&out));

    // the thread cap changes nothing
    let o = cnt_env(&["train", "--config", s(&cfg), "--count", "4", "--out", s(&out)], &[("CNT_THREADS", "3")]);
    assert_eq!(code(&o), 0);
    assert_eq!(before, dir_bytes(&out));
}

#[test]
fn train_seed_offset_shifts_seeds() {
    let t = TempDir::new().unwrap();
    let cfg = t.path().join("cfg.json");
    fs::write(&cfg, SMALL_CONFIG.replace("\"max_epochs\": 2", "\"max_epochs\": 1")).unwrap();
    let out = t.path().join("pop");
    let o = cnt(&["train", "--config", s(&cfg), "--seed-offset", "100", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let index = json(&out.join("population.json"));
    assert_eq!(index["members"][0]["seed"], 105);
}

#[test]
fn usage_and_validation_exit_codes() {
    let t = TempDir::new().unwrap();
    let cfg = t.path().join("cfg.json");
    fs::write(&cfg, SMALL_CONFIG).unwrap();
    let out = t.path().join("x");
    let missing = t.path().join("nope.csv");
    let o = cnt(&["train", "--config", s(&cfg), "--dataset", s(&missing), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.csv"));
    assert_eq!(code(&cnt(&["train", "--config", s(&missing), "--out", s(&out)])), 2);
    assert_eq!(code(&cnt(&["frobnicate"])), 2);
    assert_eq!(code(&cnt_env(&["convert", s(&cfg), s(&out)], &[("CNT_THREADS", "zero")])), 2);

    let bad = t.path().join("bad.json");
    fs::write(&bad, r#"{"layer_sizes":[64],"init_family":"normal","init_scale":0.1,"learning_rate":0.1,"batch_size":1,"max_epochs":1,"seed":0}"#).unwrap();
    assert_eq!(code(&cnt(&["train", "--config", s(&bad), "--out", s(&out)])), 1);
}

#[test]
fn analyze_writes_records_and_a_combined_csv() {
    let t = TempDir::new().unwrap();
    let input = t.path().join("in");
    fs::create_dir(&input).unwrap();
    let snaps: Vec<_> = (0..3).map(|i| dense_net(i, &[5, 4, 3], 0.5)).collect();
    for (i, sn) in snaps.iter().enumerate() {
        put(&input, &format!("net{i}.cnts"), sn);
    }
    let out = t.path().join("rec");
    let o = cnt(&["analyze", s(&input), "--out", s(&out), "--disparity"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let records = files(&out, "json");
    // 3 records plus the run manifest
    assert_eq!(records.len(), 4);
    assert_eq!(files(&out, "csv").len(), 1);
    let opts = AnalyzeOptions {
        disparity: true,
        keep_link_weights: true,
        ..AnalyzeOptions::default()
    };
    for (i, sn) in snaps.iter().enumerate() {
        let path = out.join(format!("net{i}.json"));
        let doc = json(&path);
        schema_check("metric_record.schema.json", &doc);
        let rec = MetricRecord::from_json(&fs::read(&path).unwrap()).unwrap();
        assert_eq!(rec, analyze_snapshot(sn, &opts).unwrap());
    }
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("snapshot,metric,layer,index,value\n"));

    let before = dir_bytes(&out);
    assert_eq!(code(&cnt(&["analyze", s(&input), "--out", s(&out), "--disparity"])), 0);
    assert_eq!(before, dir_bytes(&out));
}

#[test]
fn analyze_zero_snapshot_and_malformed_input() {
    let t = TempDir::new().unwrap();
    let zero = NetworkSnapshot::new(
        vec![LayerWeights::Dense(Dense::zeros(3, 2)), LayerWeights::Dense(Dense::zeros(2, 2))],
        SnapshotMeta::default(),
    )
    .unwrap();
    let z = put(t.path(), "zero.cnts", &zero);
    let out = t.path().join("rec");
    assert_eq!(code(&cnt(&["analyze", s(&z), "--out", s(&out)])), 0);
    let rec = MetricRecord::from_json(&fs::read(out.join("zero.json")).unwrap()).unwrap();
    assert!(rec.strengths.iter().all(|v| v.s.iter().all(|&x| x == 0.0)));
    assert!(rec.fluctuations.iter().all(|f| f.value == 0.0));
    assert!(rec.link_stats.iter().all(|l| l.mu == 0.0 && l.delta == 0.0));

    let broken = t.path().join("broken.cnts");
    fs::write(&broken, b"XXXXjunk").unwrap();
    let o = cnt(&["analyze", s(&broken), "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken.cnts"));
}

#[test]
fn ensemble_report_outputs() {
    let t = TempDir::new().unwrap();
    let input = t.path().join("in");
    fs::create_dir(&input).unwrap();
    // two accuracy bins, four neuron layers
    for i in 0..6 {
        let acc = if i % 2 == 0 { 0.25 } else { 0.85 };
        put(&input, &format!("n{i}.cnts"), &dense_net(i, &[6, 5, 4, 3], acc));
    }
    let rec = t.path().join("rec");
    assert_eq!(code(&cnt(&["analyze", s(&input), "--out", s(&rec)])), 0);
    let out = t.path().join("report");
    let o = cnt(&["report", "ensemble", s(&rec), "--out", s(&out), "--bins", "16", "--bootstrap", "0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let report = json(&out.join("ensemble_report.json"));
    schema_check("ensemble_report.schema.json", &report);
    assert!(report["bootstrap"].as_array().unwrap().is_empty());
    let fl = fs::read_to_string(out.join("fluctuation_summary.csv")).unwrap();
    assert_eq!(fl.lines().count(), 1 + 8);
    for name in ["strength_pdf.csv", "link_weights_pdf.csv", "trends.csv", "tidy.csv"] {
        assert!(out.join(name).exists(), "{name}");
    }

    let before = dir_bytes(&out);
    let o = cnt(&["report", "ensemble", s(&rec), "--out", s(&out), "--bins", "16", "--bootstrap", "0"]);
    assert_eq!(code(&o), 0);
    assert_eq!(before, dir_bytes(&out));

    let o = cnt(&["report", "ensemble", s(&rec), "--out", s(&out), "--bootstrap", "3", "--kde"]);
    assert_eq!(code(&o), 0);
    let report = json(&out.join("ensemble_report.json"));
    schema_check("ensemble_report.schema.json", &report);
    assert_eq!(report["bootstrap"].as_array().unwrap().len(), 3);

    let empty = t.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_ne!(code(&cnt(&["report", "ensemble", s(&empty), "--out", s(&out)])), 0);
}

#[test]
fn trajectory_report_outputs() {
    let t = TempDir::new().unwrap();
    let paths: Vec<PathBuf> = (0..3)
        .map(|i| put(t.path(), &format!("t{i}.cnts"), &dense_net(i, &[4, 4, 4, 4, 4, 3], 0.3 + 0.2 * i as f64)))
        .collect();
    let out = t.path().join("traj");
    let mut args = vec!["report", "trajectory"];
    args.extend(paths.iter().map(|p| s(p)));
    args.extend(["--out", s(&out)]);
    let o = cnt(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    schema_check("trajectory_report.schema.json", &json(&out.join("trajectory_report.json")));
    let bars = fs::read_to_string(out.join("error_bars.csv")).unwrap();
    // 6 neuron layers x 3 snapshots
    assert_eq!(bars.lines().count(), 1 + 18);
    assert!(bars.starts_with("layer,snapshot,accuracy,Y,spread_lo,spread_hi"));
}

#[test]
fn oracle_passes_on_dense_and_conv() {
    let t = TempDir::new().unwrap();
    let dense = put(t.path(), "d.cnts", &dense_net(3, &[30, 20, 10], 0.5));
    let o = cnt(&["oracle", s(&dense)]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout).into_owned();
    let max: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("max deviation: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(max < 1e-12);

    let mut r = rng(9);
    let conv = random_conv(
        &mut r,
        ConvGeometry {
            height: 9,
            width: 7,
            c_in: 3,
            c_out: 4,
            kh: 3,
            kw: 5,
            stride: [2, 1],
            padding: Padding::Same,
        },
    );
    let head = random_dense(&mut r, conv.output_dims().len(), 2);
    let net = NetworkSnapshot::new(
        vec![LayerWeights::Conv2d(conv), LayerWeights::Dense(head)],
        SnapshotMeta::default(),
    )
    .unwrap();
    let c = put(t.path(), "c.cnts", &net);
    let edges = t.path().join("edges");
    let o = cnt(&["oracle", s(&c), "--export", s(&edges), "--format", "graphml"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(files(&edges, "graphml").len(), 2);
}

#[test]
fn oracle_cap_is_enforced() {
    let t = TempDir::new().unwrap();
    // about 1.5e8 realized links from 37k parameters
    let k = Kernel::new([3, 3, 64, 64], vec![0.01; 3 * 3 * 64 * 64]).unwrap();
    let conv = Conv2d::new(k, vec![0.0; 64], [1, 1], Padding::Same, MapDims::new(64, 64, 64)).unwrap();
    let net = NetworkSnapshot::new(vec![LayerWeights::Conv2d(conv)], SnapshotMeta::default()).unwrap();
    let p = put(t.path(), "big.cnts", &net);
    let o = cnt(&["oracle", s(&p)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--oracle-cap"));
}

#[test]
fn convert_round_trips() {
    let t = TempDir::new().unwrap();
    let a = put(t.path(), "a.cnts", &dense_net(1, &[3, 2], 0.1));
    let j = t.path().join("a.json");
    let b = t.path().join("b.cnts");
    assert_eq!(code(&cnt(&["convert", s(&a), s(&j)])), 0);
    assert_eq!(json(&j)["format"], "cnts-json");
    assert_eq!(code(&cnt(&["convert", s(&j), s(&b)])), 0);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}
