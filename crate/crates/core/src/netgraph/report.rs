use std::fmt::Write as _;

use super::graph::NetworkGraph;
use super::params::count_parameters;

/// Per-layer table: name, kind, channels, output shape, parameters, pretrained flag.
///
/// Shapes are given for an `input_h × input_w` image.
pub fn architecture_report(graph: &NetworkGraph, input_h: usize, input_w: usize) -> String {
    let shapes = graph.layer_shapes(input_h, input_w);
    let report = count_parameters(graph);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<32} {:<22} {:>6} {:>6} {:>18} {:>11} {:>10}",
        "layer", "kind", "in", "out", "output shape", "params", "pretrained"
    );
    for ((layer, shape), (_, params)) in graph.layers.iter().zip(&shapes).zip(&report.per_layer) {
        let _ = writeln!(
            out,
            "{:<32} {:<22} {:>6} {:>6} {:>18} {:>11} {:>10}",
            layer.name,
            layer.kind.label(),
            layer.in_channels,
            layer.out_channels,
            format!("{}x{}x{}", shape.0, shape.1, shape.2),
            params,
            if layer.pretrained { "yes" } else { "no" }
        );
    }
    let _ = writeln!(out);
    for (label, value) in [
        ("total", report.total),
        ("pretrained (encoder)", report.pretrained),
        ("fully trainable", report.fully_trainable),
        ("  reduction blocks", report.reduction_block),
        ("  decoder", report.decoder_only),
        ("  final conv", report.final_conv),
    ] {
        let _ = writeln!(out, "{label:<24} {value:>12} ({:.2}M)", value as f64 / 1e6);
    }
    out
}
