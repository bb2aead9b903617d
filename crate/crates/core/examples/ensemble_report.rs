//! Bin a population by accuracy and compare the strength distribution of the
//! first hidden layer between low- and high-accuracy networks.

use cnt_core::ensemble::{bin_by_accuracy, ensemble_report, ReportOptions};
use cnt_core::metrics::{analyze_snapshot, AnalyzeOptions};
use cnt_core::trainer::{bundled_digits_split, generate_population, TrainConfig};

fn main() -> cnt_core::Result<()> {
    let cfg = TrainConfig::from_json(include_bytes!("../configs/desk_ensemble.json"))?;
    let (train, eval) = bundled_digits_split();
    let members = generate_population(&cfg, 12, &[0.3, 0.95], &train, &eval)?;
    let records = members
        .iter()
        .map(|m| analyze_snapshot(&m.representative, &AnalyzeOptions::default()))
        .collect::<cnt_core::Result<Vec<_>>>()?;

    let bins = bin_by_accuracy(records, 5)?;
    let opts = ReportOptions { bootstrap_rounds: 5, ..ReportOptions::default() };
    let report = ensemble_report(&bins, &opts)?;
    println!("networks per accuracy bin: {:?}", report.bin_counts);
    for t in report.trends.iter().filter(|t| t.layer == 1) {
        println!(
            "bin {}: {} nets, strength variance {:.4}, excess kurtosis {:?}, mean fluctuation {:.4}",
            t.accuracy_bin, t.networks, t.strength_variance, t.strength_kurtosis, t.mean_fluctuation
        );
    }
    println!("{} bootstrap rounds", report.bootstrap.len());
    Ok(())
}
