//! Metrics of a freshly initialized 64-32-32-10 MLP: link weight moments,
//! node strengths, layer fluctuation and disparity.

use cnt_core::metrics::{analyze_snapshot, AnalyzeOptions};
use cnt_core::trainer::{init_network, TrainConfig};

fn main() -> cnt_core::Result<()> {
    let cfg = TrainConfig::digits(&[32, 32], 0);
    let net = init_network(&cfg, None)?;
    let opts = AnalyzeOptions { disparity: true, ..AnalyzeOptions::default() };
    let record = analyze_snapshot(&net, &opts)?;

    for st in &record.link_stats {
        println!("block {}: {} links, mu {:+.5}, delta {:.6}", st.layer_index, st.links, st.mu, st.delta);
    }
    for (sv, y) in record.strengths.iter().zip(&record.fluctuations) {
        let mean = sv.s.iter().sum::<f64>() / sv.s.len() as f64;
        println!("layer {}: {} neurons, mean strength {:+.4}, fluctuation {:.4}", sv.layer_index, sv.s.len(), mean, y.value);
    }
    for d in record.disparities.iter().flatten() {
        let valid: Vec<f64> = d.values.iter().filter_map(|v| v.value).collect();
        println!(
            "layer {} disparity: {} of {} nodes valid",
            d.layer_index,
            valid.len(),
            d.values.len()
        );
    }
    Ok(())
}
