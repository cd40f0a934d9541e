use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of the encoder's two deepest feature maps that get a 1×1 reduction.
pub const SMALLEST_REDUCED_CHANNELS: usize = 1024;

/// Output nonlinearity applied to the final logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    /// Mutually exclusive classes.
    #[default]
    Softmax,
    /// Independent per-channel probabilities (multi-label masks).
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub n_classes: usize,
    pub input_channels: usize,
    /// Width the two deepest encoder maps are projected to before concatenation.
    pub reduction_channels: usize,
    /// Output width of the five expanding steps, deepest first.
    pub decoder_channels: Vec<usize>,
    pub pretrained_encoder: bool,
    pub output: OutputMode,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            n_classes: 2,
            input_channels: 3,
            reduction_channels: 512,
            decoder_channels: vec![512, 256, 128, 64, 32],
            pretrained_encoder: true,
            output: OutputMode::Softmax,
        }
    }
}

impl ArchConfig {
    pub fn with_classes(n_classes: usize) -> Self {
        ArchConfig {
            n_classes,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 {
            return Err(Error::InvalidArch("n_classes must be positive".into()));
        }
        if self.input_channels == 0 {
            return Err(Error::InvalidArch("input_channels must be positive".into()));
        }
        if self.decoder_channels.len() != 5 {
            return Err(Error::InvalidArch(format!(
                "decoder_channels needs exactly 5 entries (one per expanding step), got {}",
                self.decoder_channels.len()
            )));
        }
        if self.decoder_channels.contains(&0) {
            return Err(Error::InvalidArch("decoder_channels must be positive".into()));
        }
        if let Some(w) = self.decoder_channels.windows(2).find(|w| w[1] > w[0]) {
            return Err(Error::InvalidArch(format!(
                "decoder_channels must be non-increasing, found {} after {}",
                w[1], w[0]
            )));
        }
        if self.reduction_channels == 0 || self.reduction_channels > SMALLEST_REDUCED_CHANNELS {
            return Err(Error::InvalidArch(format!(
                "reduction_channels must be in 1..={SMALLEST_REDUCED_CHANNELS}, got {}",
                self.reduction_channels
            )));
        }
        Ok(())
    }
}
