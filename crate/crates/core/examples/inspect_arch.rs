//! Prints the layer table and parameter accounting for a network configuration.
//!
//! ```text
//! cargo run --example inspect_arch -- [n_classes] [height] [width]
//! ```

use docseg::netgraph::{architecture_report, build_graph, count_parameters, ArchConfig};

fn main() -> docseg::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n_classes = args.first().copied().unwrap_or(2);
    let h = args.get(1).copied().unwrap_or(512);
    let w = args.get(2).copied().unwrap_or(512);

    let graph = build_graph(&ArchConfig::with_classes(n_classes))?;
    print!("{}", architecture_report(&graph, h, w));

    let r = count_parameters(&graph);
    println!("\nskip connections (encoder map -> tensor concatenated at decoder step):");
    for &(source, step) in &graph.skip_links {
        let concat = graph.layer(&format!("decoder/step{step}/concat")).expect("every step concatenates");
        let joined = &graph.layers[concat.inputs[1]];
        println!("  {:<22} -> {:<22} step {step}", graph.layers[source].name, joined.name);
    }
    println!("\nencoder share of parameters: {:.1}%", 100.0 * r.pretrained as f64 / r.total as f64);
    Ok(())
}
