//! Convolutional strengths via the kernel-sum fast path, checked against the
//! explicit edge-list oracle.

use std::time::Instant;

use cnt_core::metrics::{node_strength_conv, ConvRole};
use cnt_core::oracle::{verify_snapshot, DEFAULT_EDGE_CAP};
use cnt_core::snapshot::{Conv2d, Kernel, LayerWeights, MapDims, NetworkSnapshot, Padding, SnapshotMeta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> cnt_core::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let kernel = Kernel::from_fn([3, 3, 3, 64], |_, _, _, _| rng.random_range(-0.2..0.2))?;
    let conv = Conv2d::new(kernel, vec![0.0; 64], [1, 1], Padding::Same, MapDims::new(32, 32, 3))?;

    let start = Instant::now();
    let s_out = node_strength_conv(&conv, ConvRole::AsInputLayer);
    let s_in = node_strength_conv(&conv, ConvRole::AsOutputLayer);
    println!("fast path: {} input and {} output strengths in {:.2?}", s_out.len(), s_in.len(), start.elapsed());

    let net = NetworkSnapshot::new(vec![LayerWeights::Conv2d(conv)], SnapshotMeta::default())?;
    let start = Instant::now();
    let report = verify_snapshot(&net, DEFAULT_EDGE_CAP)?;
    for b in &report.blocks {
        println!("oracle: block {} ({}), {} edges, max deviation {:.2e}", b.layer_index, b.kind, b.edges, b.max());
    }
    println!("oracle took {:.2?}; {}", start.elapsed(), if report.passes() { "PASS" } else { "FAIL" });
    Ok(())
}
