//! Build a small CNN, write it as binary CNTS and as JSON, and read both back.

use cnt_core::snapshot::{
    read_snapshot, write_snapshot, write_snapshot_json, Conv2d, Dense, Kernel, LayerWeights, MapDims, Matrix,
    NetworkSnapshot, Padding, SnapshotMeta,
};

fn main() -> cnt_core::Result<()> {
    let kernel = Kernel::from_fn([3, 3, 1, 4], |a, b, _, co| 0.1 * (a as f64 - b as f64) + 0.05 * co as f64)?;
    let conv = Conv2d::new(kernel, vec![0.0; 4], [2, 2], Padding::Same, MapDims::new(8, 8, 1))?;
    let flat = conv.output_dims().len();
    let head = Dense::new(Matrix::new(flat, 3, (0..flat * 3).map(|i| (i % 7) as f64 * 0.01).collect())?, vec![0.0; 3])?;
    let meta = SnapshotMeta { accuracy: 0.42, epoch: 3, seed: 11, ..SnapshotMeta::default() };
    let net = NetworkSnapshot::new(vec![LayerWeights::Conv2d(conv), LayerWeights::Dense(head)], meta)?;

    let binary = write_snapshot(&net);
    let json = write_snapshot_json(&net);
    println!("{} parameters: {} bytes as CNTS, {} bytes as JSON", net.parameter_count(), binary.len(), json.len());

    // read_snapshot sniffs the format, so both encodings load through it.
    let from_binary = read_snapshot(&binary)?;
    let from_json = read_snapshot(&json)?;
    assert_eq!(from_binary, net);
    assert_eq!(from_json, net);
    println!("round trip ok: accuracy {}, epoch {}", from_binary.meta().accuracy, from_binary.meta().epoch);
    Ok(())
}
