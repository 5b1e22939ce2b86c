//! Model hyperparameters.

use serde::{Deserialize, Serialize};

use super::mask::MaskStrategy;
use crate::error::{Error, Result};

/// Where layer normalization sits inside a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormPlacement {
    /// Normalize before each sublayer, residual add after (default).
    Pre,
    /// Residual add first, then normalize (kept for the ablation axis).
    Post,
}

impl std::str::FromStr for NormPlacement {
    type Err = Error;
    fn from_str(s: &str) -> Result<NormPlacement> {
        match s {
            "pre" => Ok(NormPlacement::Pre),
            "post" => Ok(NormPlacement::Post),
            other => Err(Error::InvalidParameter {
                op: "norm placement",
                message: format!("unknown placement {other:?} (expected pre|post)"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Gelu,
    Relu,
}

impl std::str::FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Activation> {
        match s {
            "gelu" => Ok(Activation::Gelu),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidParameter {
                op: "activation",
                message: format!("unknown activation {other:?} (expected gelu|relu)"),
            }),
        }
    }
}

/// How the decoder's mask token starts out. It is trainable either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskTokenInit {
    Zeros,
    Random,
}

/// Hyperparameters of the masked autoencoder.
///
/// Defaults: hidden width 64, decoder width 32, 4 heads, 2+2 layers,
/// feed-forward multiplier 4, dropout 0.1, masking ratio 0.75, conv
/// embedding kernel 3 / stride 1 / padding 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub d_decoder: usize,
    pub n_heads: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub ffn_mult: usize,
    pub dropout_p: f64,
    pub mask_ratio: f64,
    pub mask_strategy: MaskStrategy,
    pub conv_kernel: usize,
    pub conv_stride: usize,
    pub conv_padding: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub window_len: usize,
    pub use_encoder_pe: bool,
    pub use_decoder_pe: bool,
    pub norm: NormPlacement,
    pub activation: Activation,
    pub mask_token_init: MaskTokenInit,
}

impl Default for ModelConfig {
    fn default() -> ModelConfig {
        ModelConfig {
            d_model: 64,
            d_decoder: 32,
            n_heads: 4,
            enc_layers: 2,
            dec_layers: 2,
            ffn_mult: 4,
            dropout_p: 0.1,
            mask_ratio: 0.75,
            mask_strategy: MaskStrategy::Random,
            conv_kernel: 3,
            conv_stride: 1,
            conv_padding: 1,
            in_channels: 1,
            out_channels: 1,
            window_len: 300,
            use_encoder_pe: true,
            use_decoder_pe: true,
            norm: NormPlacement::Pre,
            activation: Activation::Gelu,
            mask_token_init: MaskTokenInit::Zeros,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} must be positive and divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.d_decoder == 0 || self.d_decoder % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_decoder {} must be positive and divisible by n_heads {}",
                self.d_decoder, self.n_heads
            )));
        }
        if self.d_model % 2 != 0 || self.d_decoder % 2 != 0 {
            return Err(Error::Config(
                "hidden widths must be even for the positional encoding".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.mask_ratio) {
            return Err(Error::Config(format!(
                "mask_ratio {} must be in [0, 1)",
                self.mask_ratio
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!(
                "dropout_p {} must be in [0, 1)",
                self.dropout_p
            )));
        }
        if self.out_channels == 0 || self.in_channels == 0 {
            return Err(Error::Config("channel counts must be positive".into()));
        }
        if self.window_len == 0 || self.enc_layers == 0 || self.dec_layers == 0 || self.ffn_mult == 0
        {
            return Err(Error::Config(
                "window length, layer counts and ffn_mult must be positive".into(),
            ));
        }
        if self.conv_kernel == 0 || self.conv_stride == 0 {
            return Err(Error::Config("conv kernel and stride must be positive".into()));
        }
        Ok(())
    }

    /// Canonical JSON form used in checkpoint headers and mismatch errors.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<ModelConfig> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("bad config JSON: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        ModelConfig::default().validate().unwrap();
    }

    #[test]
    fn head_divisibility_enforced() {
        let cfg = ModelConfig {
            d_model: 66,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_roundtrip() {
        let cfg = ModelConfig::default();
        let back = ModelConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, back);
    }
}
