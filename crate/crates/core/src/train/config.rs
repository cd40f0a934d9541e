use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{AugmentParams, PatchSpec};
use crate::error::{Error, Result};
use crate::netgraph::RenormSettings;

/// Recommended learning-rate interval; values outside need `allow_any_lr`.
pub const LR_RANGE: (f64, f64) = (1e-5, 1e-4);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Per-pixel softmax cross-entropy (exclusive classes).
    #[default]
    SoftmaxCe,
    /// Per-pixel, per-class sigmoid binary cross-entropy (multi-label).
    SigmoidBce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub lr_decay_rate: f64,
    /// Steps per decay factor; the exponent is continuous.
    pub lr_decay_period: f64,
    /// L2 coefficient on trainable convolution kernels.
    pub weight_decay: f64,
    pub batch_renorm: RenormSettings,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss_mode: LossMode,
    pub seed: u64,
    pub adam: AdamParams,
    /// Keep encoder weights fixed (only reductions, decoder and classifier train).
    pub freeze_encoder: bool,
    /// Permit an initial learning rate outside [`LR_RANGE`].
    pub allow_any_lr: bool,
    pub patch: Option<PatchSpec>,
    /// `None` disables augmentation (`augment = false` in config files).
    #[serde(with = "augment_setting")]
    pub augment: Option<AugmentParams>,
    /// Images prepared ahead of the optimiser.
    pub prefetch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            initial_lr: 1e-4,
            lr_decay_rate: 0.95,
            lr_decay_period: 200.0,
            weight_decay: 1e-6,
            batch_renorm: RenormSettings::default(),
            epochs: 30,
            batch_size: 1,
            loss_mode: LossMode::SoftmaxCe,
            seed: 0,
            adam: AdamParams::default(),
            freeze_encoder: false,
            allow_any_lr: false,
            patch: None,
            augment: Some(AugmentParams::default()),
            prefetch: 4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParam(msg));
        if !(self.initial_lr > 0.0) {
            return bad(format!("initial_lr must be positive, got {}", self.initial_lr));
        }
        if !self.allow_any_lr && !(LR_RANGE.0..=LR_RANGE.1).contains(&self.initial_lr) {
            return bad(format!(
                "initial_lr {} outside [{}, {}]; set allow_any_lr to override",
                self.initial_lr, LR_RANGE.0, LR_RANGE.1
            ));
        }
        if !(self.lr_decay_rate > 0.0 && self.lr_decay_rate < 1.0) {
            return bad(format!("lr_decay_rate must lie in (0, 1), got {}", self.lr_decay_rate));
        }
        if !(self.lr_decay_period > 0.0) {
            return bad("lr_decay_period must be positive".into());
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay must be non-negative".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        let a = &self.adam;
        if !(a.beta1 >= 0.0 && a.beta1 < 1.0 && a.beta2 >= 0.0 && a.beta2 < 1.0 && a.epsilon > 0.0) {
            return bad(format!("invalid Adam parameters {a:?}"));
        }
        let r = &self.batch_renorm;
        if !(r.r_min > 0.0 && r.r_min <= 1.0 && r.r_max >= 1.0 && r.d_max >= 0.0 && (0.0..1.0).contains(&r.momentum)) {
            return bad(format!("invalid batch renormalisation settings {r:?}"));
        }
        if let Some(p) = &self.patch {
            p.validate()?;
        }
        if let Some(a) = &self.augment {
            a.validate()?;
        }
        Ok(())
    }

    /// Short hex digest identifying this configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        let digest = Sha256::digest(&json);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// `augment` is written as a table, or `false` when disabled; `true`
/// selects the default parameters.
mod augment_setting {
    use super::AugmentParams;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Setting {
        Flag(bool),
        Params(AugmentParams),
    }

    pub fn serialize<S: Serializer>(v: &Option<AugmentParams>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(p) => Setting::Params(*p),
            None => Setting::Flag(false),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<AugmentParams>, D::Error> {
        Ok(match Setting::deserialize(d)? {
            Setting::Flag(true) => Some(AugmentParams::default()),
            Setting::Flag(false) => None,
            Setting::Params(p) => Some(p),
        })
    }
}

/// `initial_lr · rate^(step / period)`.
pub fn lr_schedule(step: u64, config: &TrainConfig) -> f64 {
    config.initial_lr * config.lr_decay_rate.powf(step as f64 / config.lr_decay_period)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        let c = TrainConfig::default();
        assert_eq!(lr_schedule(0, &c), 1e-4);
        assert!((lr_schedule(200, &c) - 0.95e-4).abs() < 1e-18);
        assert!((lr_schedule(400, &c) - 9.025e-5).abs() < 1e-15);
        assert!(lr_schedule(101, &c) < lr_schedule(100, &c));
    }

    #[test]
    fn lr_range_is_enforced_unless_overridden() {
        let mut c = TrainConfig { initial_lr: 1e-3, ..Default::default() };
        assert!(c.validate().is_err());
        c.allow_any_lr = true;
        c.validate().unwrap();
    }

    #[test]
    fn hash_tracks_content() {
        let a = TrainConfig::default();
        let b = TrainConfig { seed: 1, ..Default::default() };
        assert_eq!(a.hash(), TrainConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn disabled_augmentation_survives_toml() {
        let c = TrainConfig { augment: None, ..Default::default() };
        let text = toml::to_string(&c).unwrap();
        assert!(text.contains("augment = false"), "{text}");
        assert_eq!(toml::from_str::<TrainConfig>(&text).unwrap(), c);
        let on: TrainConfig = toml::from_str("augment = true").unwrap();
        assert_eq!(on.augment, Some(AugmentParams::default()));
    }

    #[test]
    fn toml_round_trip() {
        let c = TrainConfig { patch: Some(PatchSpec::default()), ..Default::default() };
        let text = toml::to_string(&c).unwrap();
        assert_eq!(toml::from_str::<TrainConfig>(&text).unwrap(), c);
        let partial: TrainConfig = toml::from_str("epochs = 3\nloss_mode = \"sigmoid_bce\"").unwrap();
        assert_eq!(partial.epochs, 3);
        assert_eq!(partial.loss_mode, LossMode::SigmoidBce);
    }
}
