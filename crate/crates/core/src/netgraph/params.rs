use serde::{Deserialize, Serialize};

use super::graph::{LayerId, NetworkGraph, Role};

/// Learnable-parameter accounting split by network part.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamReport {
    pub total: usize,
    /// Parameters of the (pretrained) encoder.
    pub pretrained: usize,
    /// Everything trained from scratch: reductions, decoder and classifier.
    pub fully_trainable: usize,
    pub reduction_block: usize,
    pub decoder_only: usize,
    pub final_conv: usize,
    pub per_layer: Vec<(LayerId, usize)>,
}

/// Counts weights, biases and normalisation scale/offset per layer.
///
/// Moving statistics are excluded.
pub fn count_parameters(graph: &NetworkGraph) -> ParamReport {
    let mut report = ParamReport {
        total: 0,
        pretrained: 0,
        fully_trainable: 0,
        reduction_block: 0,
        decoder_only: 0,
        final_conv: 0,
        per_layer: Vec::with_capacity(graph.layers.len()),
    };
    for (id, layer) in graph.layers.iter().enumerate() {
        let n = layer.param_count();
        report.per_layer.push((id, n));
        report.total += n;
        match layer.role {
            Role::Input => {}
            Role::Encoder => report.pretrained += n,
            Role::Reduction => report.reduction_block += n,
            Role::Decoder => report.decoder_only += n,
            Role::Classifier => report.final_conv += n,
        }
    }
    report.fully_trainable = report.reduction_block + report.decoder_only + report.final_conv;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{build_graph, ArchConfig};

    #[test]
    fn accounting_identities_hold() {
        for cfg in [
            ArchConfig::default(),
            ArchConfig::with_classes(7),
            ArchConfig {
                reduction_channels: 64,
                decoder_channels: vec![64, 32, 16, 16, 8],
                ..Default::default()
            },
        ] {
            let r = count_parameters(&build_graph(&cfg).unwrap());
            assert_eq!(r.total, r.per_layer.iter().map(|p| p.1).sum::<usize>());
            assert_eq!(r.total, r.pretrained + r.fully_trainable);
        }
    }

    #[test]
    fn reduction_blocks_are_two_projections() {
        let r = count_parameters(&build_graph(&ArchConfig::default()).unwrap());
        assert_eq!(r.reduction_block, 2048 * 512 + 512 + 1024 * 512 + 512);
        assert_eq!(r.final_conv, 32 * 2 + 2);
    }
}
