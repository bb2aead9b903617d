//! Follow one network through training: layer fluctuation per epoch with
//! the min/max over snapshots in the same accuracy bin as error bars.

use cnt_core::ensemble::trajectory_report;
use cnt_core::metrics::{analyze_snapshot, AnalyzeOptions};
use cnt_core::trainer::{bundled_digits_split, train, TrainConfig};

fn main() -> cnt_core::Result<()> {
    let (train_set, eval) = bundled_digits_split();
    let mut cfg = TrainConfig::digits(&[32, 32], 3);
    cfg.max_epochs = 10;
    let run = train(&cfg, &train_set, &eval)?;
    let records = run
        .snapshots
        .iter()
        .map(|s| analyze_snapshot(s, &AnalyzeOptions::default()))
        .collect::<cnt_core::Result<Vec<_>>>()?;

    let report = trajectory_report(&records, 50)?;
    println!("accuracy monotone: {}", report.accuracy_monotone);
    for series in report.fluctuation.iter().filter(|s| s.layer == 1) {
        for p in &series.points {
            println!(
                "epoch {:>2} acc {:.4}: Y {:.4}  spread [{:.4}, {:.4}]",
                report.epochs[p.snapshot], p.accuracy, p.value, p.spread_lo, p.spread_hi
            );
        }
    }
    Ok(())
}
