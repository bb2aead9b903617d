//! Train a small population on the bundled 8x8 digits, each member stopping
//! at its accuracy target.

use cnt_core::trainer::{bundled_digits_split, generate_population, TrainConfig};

fn main() -> cnt_core::Result<()> {
    let (train, eval) = bundled_digits_split();
    let mut cfg = TrainConfig::digits(&[32, 32], 0);
    cfg.max_epochs = 15;
    cfg.eval_every_batches = Some(4);

    let members = generate_population(&cfg, 6, &[0.3, 0.6, 0.9], &train, &eval)?;
    for m in &members {
        let rep = &m.representative.meta();
        println!(
            "member {} seed {}: target {:?}, reached {}, {} snapshots, accuracy {:.4} at epoch {}",
            m.index,
            m.seed,
            m.target,
            m.reached_target,
            m.snapshots.len(),
            rep.accuracy,
            rep.epoch
        );
    }
    Ok(())
}
