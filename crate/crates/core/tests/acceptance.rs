//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use cnt_core::ensemble::{accuracy_bin, bin_by_accuracy, moments, pool_layer_metric, Metric};
use cnt_core::metrics::{
    analyze_snapshot, block_in_strengths, block_out_strengths, fluctuation_of, link_weight_stats, node_disparity,
    node_strength_conv, AnalyzeOptions, ConvRole,
};
use cnt_core::oracle::{self, DEFAULT_EDGE_CAP};
use cnt_core::snapshot::{Conv2d, Dense, Kernel, LayerWeights, MapDims, Matrix, NetworkSnapshot, Padding, SnapshotMeta};
use cnt_core::trainer::{bundled_digits_split, generate_population, TrainConfig};
use common::*;
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn conv_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2024);
    let mut worst: f64 = 0.0;
    let (mut same, mut valid, mut strided) = (0, 0, 0);
    for case in 0..128 {
        let g = random_geometry(&mut r);
        match g.padding {
            Padding::Same => same += 1,
            Padding::Valid => valid += 1,
        }
        if g.stride != [1, 1] {
            strided += 1;
        }
        let conv = random_conv(&mut r, g);
        let (n_from, n_to, links) = conv_links(&conv);
        let naive = naive_block(n_from, n_to, &links);
        let layer = LayerWeights::Conv2d(conv);
        let st = link_weight_stats(&layer);
        let dev = [
            (st.mu - naive.mu).abs(),
            (st.delta - naive.delta).abs(),
            max_abs_diff(&block_out_strengths(&layer), &naive.s_out),
            max_abs_diff(&block_in_strengths(&layer), &naive.s_in),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        ensure(st.links as usize == links.len(), format!("case {case} {g:?}: link count"))?;
        ensure(dev <= 1e-9, format!("case {case} {g:?}: deviation {dev:e}"))?;
        let lib = oracle::verify_snapshot(&single(layer), DEFAULT_EDGE_CAP).map_err(|e| e.to_string())?;
        ensure(lib.passes(), format!("case {case}: library oracle disagrees"))?;
        worst = worst.max(dev).max(lib.max_deviation());
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "128 geometries ({same} same, {valid} valid, {strided} strided), max deviation {worst:.1e} <= 1e-9, {:.2?}",
        start.elapsed()
    ))
}

fn dense_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut r = rng(7);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let (rows, cols) = if case < 4 { (256, 256) } else { (r.random_range(1..=256), r.random_range(1..=256)) };
        let d = random_dense(&mut r, rows, cols);
        let (n_from, n_to, links) = dense_links(&d);
        let naive = naive_block(n_from, n_to, &links);
        let layer = LayerWeights::Dense(d);
        let st = link_weight_stats(&layer);
        let rec = analyze_snapshot(&single(layer.clone()), &AnalyzeOptions::default()).map_err(|e| e.to_string())?;
        let dev = [
            (st.mu - naive.mu).abs(),
            (st.delta - naive.delta).abs(),
            max_abs_diff(&block_out_strengths(&layer), &naive.s_out),
            max_abs_diff(&block_in_strengths(&layer), &naive.s_in),
            (rec.fluctuations[0].value - population_std(&naive.s_out)).abs(),
            (rec.fluctuations[1].value - population_std(&naive.s_in)).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        ensure(dev <= 1e-12, format!("case {case} ({rows}x{cols}): deviation {dev:e}"))?;
        worst = worst.max(dev);
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("100 layers up to 256x256, max deviation {worst:.1e} <= 1e-12, {:.2?}", start.elapsed()))
}

fn scaled(s: &NetworkSnapshot, f: impl Fn(f64) -> f64) -> NetworkSnapshot {
    let layers = s
        .layers()
        .iter()
        .map(|l| match l {
            LayerWeights::Dense(d) => {
                let w = d.weights();
                let m = Matrix::new(w.rows(), w.cols(), w.as_slice().iter().map(|&v| f(v)).collect()).unwrap();
                LayerWeights::Dense(Dense::new(m, d.bias().to_vec()).unwrap())
            }
            LayerWeights::Conv2d(c) => {
                let k = c.kernel();
                let k = Kernel::new(k.shape(), k.as_slice().iter().map(|&v| f(v)).collect()).unwrap();
                LayerWeights::Conv2d(Conv2d::new(k, c.bias().to_vec(), c.stride(), c.padding(), c.input_dims()).unwrap())
            }
        })
        .collect();
    NetworkSnapshot::new(layers, s.meta().clone()).unwrap()
}

fn closed_form_identities() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    let mut r = rng(99);
    for case in 0..100 {
        let g = random_geometry(&mut r);
        let conv = random_conv(&mut r, g);
        let outputs = r.random_range(1..=8);
        let head = random_dense(&mut r, conv.output_dims().len(), outputs);
        let net = NetworkSnapshot::new(vec![LayerWeights::Conv2d(conv), LayerWeights::Dense(head)], SnapshotMeta::default())
            .unwrap();
        let base = analyze_snapshot(&net, &AnalyzeOptions::default()).unwrap();
        for sv in &base.strengths {
            let y = fluctuation_of(&sv.s).unwrap();
            ensure(close(y, population_std(&sv.s)), format!("case {case}: fluctuation vs std"))?;
        }
        let c: f64 = r.random_range(-4.0..4.0);
        let sc = analyze_snapshot(&scaled(&net, |w| c * w), &AnalyzeOptions::default()).unwrap();
        for (a, b) in base.link_stats.iter().zip(&sc.link_stats) {
            ensure(close(b.mu, c * a.mu) && close(b.delta, c * c * a.delta), format!("case {case}: link stats scaling"))?;
        }
        for (a, b) in base.strengths.iter().zip(&sc.strengths) {
            ensure(a.s.iter().zip(&b.s).all(|(u, v)| close(*v, c * u)), format!("case {case}: strength scaling"))?;
        }
        for (a, b) in base.fluctuations.iter().zip(&sc.fluctuations) {
            ensure(close(b.value, c.abs() * a.value), format!("case {case}: fluctuation scaling"))?;
        }
        let t: f64 = r.random_range(-2.0..2.0);
        let sh = analyze_snapshot(&scaled(&net, |w| w + t), &AnalyzeOptions::default()).unwrap();
        for (a, b) in base.link_stats.iter().zip(&sh.link_stats) {
            ensure(close(b.mu, a.mu + t), format!("case {case}: mean shift"))?;
            ensure(close(b.delta, a.delta), format!("case {case}: variance shift"))?;
        }
    }
    Ok("100 random conv+dense nets: Y = population std, scaling by c, shift by t, all within 1e-12".into())
}

fn disparity_values() -> Outcome {
    let a = node_disparity(&[5.0, 0.0, 0.0, 0.0], 1e-12).map_err(|e| e.to_string())?;
    let b = node_disparity(&[1.0, 1.0, 1.0, 1.0], 1e-12).map_err(|e| e.to_string())?;
    let c = node_disparity(&[1.0, -1.0], 1e-12).map_err(|e| e.to_string())?;
    ensure(a == Some(1.0), format!("(5,0,0,0) -> {a:?}"))?;
    ensure(b == Some(0.25), format!("(1,1,1,1) -> {b:?}"))?;
    ensure(c.is_none(), format!("(1,-1) -> {c:?}"))?;
    Ok("(5,0,0,0) -> 1.0, (1,1,1,1) -> 0.25, (1,-1) -> invalid".into())
}

fn gradient_check() -> Outcome {
    let errs: Vec<f64> = (0..5).map(common::gradient_check).collect();
    let worst = errs.iter().copied().fold(0.0, f64::max);
    ensure(worst < 1e-6, format!("relative errors {errs:?}"))?;
    Ok(format!("5 random nets, max relative error {worst:.1e} < 1e-6"))
}

fn desk_ensemble_trend() -> Outcome {
    let start = Instant::now();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let cfg = TrainConfig::from_json(&fs::read(dir.join("configs/desk_ensemble.json")).unwrap()).map_err(|e| e.to_string())?;
    let (train_set, eval) = bundled_digits_split();
    let targets = [0.3, 0.95];
    let members = generate_population(&cfg, 24, &targets, &train_set, &eval).map_err(|e| e.to_string())?;
    let missed = members.iter().filter(|m| !m.reached_target).count();
    let records = members
        .iter()
        .map(|m| analyze_snapshot(&m.representative, &AnalyzeOptions::default()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let bins = bin_by_accuracy(records, 50).map_err(|e| e.to_string())?;
    let low = accuracy_bin(0.3).unwrap();
    let high = *bins.occupied().last().unwrap();
    ensure(high >= accuracy_bin(0.8).unwrap(), format!("no high bin; occupied {:?}", bins.occupied()))?;
    ensure(!bins.bins[low].is_empty(), format!("no low bin; occupied {:?}", bins.occupied()))?;
    let stats = |b: usize| {
        let pooled = pool_layer_metric(&bins.bins[b], 1, Metric::Strength, false).unwrap();
        let (_, var, _, kurt) = moments(&pooled).unwrap();
        (var, kurt.unwrap_or(0.0).abs())
    };
    let (lo_var, lo_k) = stats(low);
    let (hi_var, hi_k) = stats(high);
    within(start.elapsed(), Duration::from_secs(300))?;
    let detail = format!(
        "24 nets ({} in bin {low}, {} in bin {high}, {missed} missed target); first hidden layer: variance {lo_var:.4} -> {hi_var:.4}, |excess kurtosis| {lo_k:.4} -> {hi_k:.4}, {:.1?}",
        bins.bins[low].len(),
        bins.bins[high].len(),
        start.elapsed()
    );
    ensure(hi_var > lo_var && hi_k > lo_k, detail.clone())?;
    let f: serde_json::Value = serde_json::from_str(include_str!("fixtures/reference_runs.json")).unwrap();
    let f = &f["desk_ensemble_24"];
    let reference = ["low_variance", "high_variance", "low_abs_kurtosis", "high_abs_kurtosis"]
        .iter()
        .map(|k| f[k].as_f64().unwrap())
        .zip([lo_var, hi_var, lo_k, hi_k])
        .all(|(a, b)| (a - b).abs() < 5e-4);
    Ok(format!("{detail}; {} reference run", if reference { "matches" } else { "differs from" }))
}

fn performance() -> Outcome {
    let mut r = rng(5);
    let c1 = random_conv(
        &mut r,
        ConvGeometry {
            height: 32,
            width: 32,
            c_in: 3,
            c_out: 32,
            kh: 3,
            kw: 3,
            stride: [1, 1],
            padding: Padding::Same,
        },
    );
    let k2 = Kernel::from_fn([3, 3, 32, 64], |_, _, _, _| r.random_range(-0.1..0.1)).unwrap();
    let c2 = Conv2d::new(k2, vec![0.0; 64], [2, 2], Padding::Same, c1.output_dims()).unwrap();
    let head = random_dense(&mut r, c2.output_dims().len(), 5);
    let cnn = NetworkSnapshot::new(
        vec![LayerWeights::Conv2d(c1), LayerWeights::Conv2d(c2), LayerWeights::Dense(head)],
        SnapshotMeta::default(),
    )
    .unwrap();
    let params = cnn.parameter_count();
    ensure(params >= 100_000, format!("only {params} parameters"))?;
    let start = Instant::now();
    analyze_snapshot(&cnn, &AnalyzeOptions::default()).map_err(|e| e.to_string())?;
    let analyze = start.elapsed();
    within(analyze, Duration::from_secs(1))?;

    let k = Kernel::from_fn([3, 3, 3, 64], |_, _, _, _| r.random_range(-1.0..1.0)).unwrap();
    let conv = Conv2d::new(k, vec![0.0; 64], [1, 1], Padding::Same, MapDims::new(32, 32, 3)).unwrap();
    let start = Instant::now();
    let s_in = node_strength_conv(&conv, ConvRole::AsOutputLayer);
    let s_out = node_strength_conv(&conv, ConvRole::AsInputLayer);
    let strength = start.elapsed();
    ensure(s_in.len() == 32 * 32 * 64 && s_out.len() == 32 * 32 * 3, "strength vector sizes")?;
    within(strength, Duration::from_millis(100))?;
    Ok(format!(
        "analyze {params}-parameter CNN in {analyze:.2?} (< 1 s); 32x32x3 -> 64 3x3 filters strengths in {strength:.2?} (< 100 ms)"
    ))
}

fn determinism() -> Outcome {
    let t = tempfile::TempDir::new().unwrap();
    let cfg = t.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"layer_sizes":[64,12,10],"init_family":"normal","init_scale":0.5,"learning_rate":0.05,
            "batch_size":16,"max_epochs":2,"seed":3}"#,
    )
    .unwrap();
    let p = |x: &Path| x.to_str().unwrap().to_string();
    let (pop, rec, rep) = (t.path().join("pop"), t.path().join("rec"), t.path().join("rep"));
    let steps: Vec<Vec<String>> = vec![
        vec!["train".into(), "--config".into(), p(&cfg), "--count".into(), "3".into(), "--out".into(), p(&pop)],
        vec!["analyze".into(), p(&pop), "--out".into(), p(&rec), "--disparity".into()],
        vec!["report".into(), "ensemble".into(), p(&rec), "--out".into(), p(&rep), "--bootstrap".into(), "2".into()],
    ];
    let run_all = || -> Result<BTreeMap<String, Vec<u8>>, String> {
        for s in &steps {
            let o = Command::new(env!("CARGO_BIN_EXE_cnt")).args(s).output().map_err(|e| e.to_string())?;
            ensure(o.status.success(), format!("{s:?}: {}", String::from_utf8_lossy(&o.stderr)))?;
        }
        let mut all = BTreeMap::new();
        for d in [&pop, &rec, &rep] {
            for e in fs::read_dir(d).unwrap() {
                let path = e.unwrap().path();
                all.insert(p(&path), fs::read(&path).unwrap());
            }
        }
        Ok(all)
    };
    let first = run_all()?;
    let second = run_all()?;
    let count = |ext: &str| first.keys().filter(|k| k.ends_with(ext)).count();
    ensure(first == second, "outputs differ between runs")?;
    Ok(format!(
        "train/analyze/report twice: {} CNTS, {} JSON, {} CSV files byte-identical",
        count(".cnts"),
        count(".json"),
        count(".csv")
    ))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("oracle equivalence (conv)", conv_oracle_equivalence),
        ("oracle equivalence (dense)", dense_oracle_equivalence),
        ("closed-form identities", closed_form_identities),
        ("disparity", disparity_values),
        ("gradient check", gradient_check),
        ("desk-scale ensemble trend", desk_ensemble_trend),
        ("performance", performance),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
