//! Unroll a convolution into its explicit weighted edge list and export it
//! for external graph tools.

use std::fs;

use cnt_core::oracle::{export_edge_list, oracle_metrics, read_edge_list_csv, unroll_layer, ExportFormat, DEFAULT_EDGE_CAP};
use cnt_core::snapshot::{Conv2d, Kernel, LayerWeights, MapDims, Padding};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kernel = Kernel::from_fn([2, 2, 1, 2], |a, b, _, co| (a + 2 * b) as f64 - co as f64)?;
    let conv = LayerWeights::Conv2d(Conv2d::new(kernel, vec![0.0; 2], [1, 1], Padding::Valid, MapDims::new(3, 3, 1))?);
    let list = unroll_layer(&conv, 0, DEFAULT_EDGE_CAP)?;
    let m = oracle_metrics(&list)?;
    println!("{} -> {} neurons, {} edges, mu {:.4}, delta {:.4}", list.from_neurons, list.to_neurons, list.edges.len(), m.mu, m.delta);

    let dir = std::env::temp_dir().join("cnt_edge_export");
    fs::create_dir_all(&dir)?;
    let csv = export_edge_list(&list, ExportFormat::Csv);
    fs::write(dir.join("block0.csv"), &csv)?;
    fs::write(dir.join("block0.graphml"), export_edge_list(&list, ExportFormat::GraphExchange))?;
    assert_eq!(read_edge_list_csv(&csv)?.edges, list.edges);
    println!("wrote {}", dir.display());
    print!("{}", String::from_utf8_lossy(&csv).lines().take(4).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
