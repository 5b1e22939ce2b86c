//! Forward passes through the bound model.

use super::config::{Activation, ModelConfig, NormPlacement};
use super::mask::MaskSpec;
use super::params::{BlockP, BoundTiMae, LinearP};
use super::pe::positional_encoding_cached;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Element, Tensor};

/// Whether a pass is a training pass (dropout active, draws from the
/// given generator) or an inference pass (deterministic).
pub enum RunMode<'r> {
    Train { rng: &'r mut Rng },
    Eval,
}

const LAYER_NORM_EPS: f64 = 1e-5;

/// Token-wise affine map: flattens all leading dims, multiplies by
/// `[in, out]` and broadcasts the bias.
pub fn linear<T: Element>(x: &Tensor<T>, p: &LinearP<Tensor<T>>) -> Result<Tensor<T>> {
    let shape = x.shape().to_vec();
    let d_in = *shape.last().ok_or_else(|| Error::ShapeMismatch {
        op: "linear",
        lhs: shape.clone(),
        rhs: p.weight.shape().to_vec(),
    })?;
    let rows = x.numel() / d_in;
    let d_out = p.weight.shape()[1];
    let flat = x.reshape(&[rows, d_in])?;
    let y = flat.matmul(&p.weight)?.add(&p.bias)?;
    let mut out_shape = shape;
    *out_shape.last_mut().unwrap() = d_out;
    y.reshape(&out_shape)
}

fn activation<T: Element>(x: &Tensor<T>, kind: Activation) -> Tensor<T> {
    match kind {
        Activation::Gelu => x.gelu(),
        Activation::Relu => x.relu(),
    }
}

/// Full multi-head self-attention over `[B, L, d]` tokens.
fn attention<T: Element>(
    x: &Tensor<T>,
    p: &super::params::AttentionP<Tensor<T>>,
    n_heads: usize,
) -> Result<Tensor<T>> {
    let (b, l, d) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let dh = d / n_heads;
    let split = |t: &Tensor<T>| -> Result<Tensor<T>> {
        t.reshape(&[b, l, n_heads, dh])?.transpose(1, 2)
    };
    let q = split(&linear(x, &p.wq)?)?;
    let k = split(&linear(x, &p.wk)?)?;
    let v = split(&linear(x, &p.wv)?)?;
    let scale = T::from_f64(1.0 / (dh as f64).sqrt());
    let scores = q.matmul_nt(&k)?.scale(scale);
    let attn = scores.softmax(3)?;
    let ctx = attn.matmul(&v)?;
    let merged = ctx.transpose(1, 2)?.reshape(&[b, l, d])?;
    linear(&merged, &p.wo)
}

fn feed_forward<T: Element>(
    x: &Tensor<T>,
    block: &BlockP<Tensor<T>>,
    act: Activation,
) -> Result<Tensor<T>> {
    let hidden = activation(&linear(x, &block.ffn_in)?, act);
    linear(&hidden, &block.ffn_out)
}

/// One transformer block; layer norm placement per config.
fn block_forward<T: Element>(
    x: &Tensor<T>,
    block: &BlockP<Tensor<T>>,
    cfg: &ModelConfig,
) -> Result<Tensor<T>> {
    match cfg.norm {
        NormPlacement::Pre => {
            let normed = x.layer_norm(&block.ln1.gamma, &block.ln1.beta, LAYER_NORM_EPS)?;
            let after_attn = x.add(&attention(&normed, &block.attn, cfg.n_heads)?)?;
            let normed2 =
                after_attn.layer_norm(&block.ln2.gamma, &block.ln2.beta, LAYER_NORM_EPS)?;
            after_attn.add(&feed_forward(&normed2, block, cfg.activation)?)
        }
        NormPlacement::Post => {
            let after_attn = x
                .add(&attention(x, &block.attn, cfg.n_heads)?)?
                .layer_norm(&block.ln1.gamma, &block.ln1.beta, LAYER_NORM_EPS)?;
            after_attn
                .add(&feed_forward(&after_attn, block, cfg.activation)?)?
                .layer_norm(&block.ln2.gamma, &block.ln2.beta, LAYER_NORM_EPS)
        }
    }
}

fn pe_tensor<T: Element>(len: usize, d: usize) -> Result<Tensor<T>> {
    let table = positional_encoding_cached(len, d)?;
    let data: Vec<T> = table.iter().map(|&v| T::from_f64(v)).collect();
    Tensor::constant(data, &[len, d])
}

/// Conv embedding plus (optionally) the fixed positional table:
/// `[B, L, m] -> [B, L, d_model]`, length-preserving for the default
/// kernel 3 / stride 1 / padding 1.
pub fn embed<T: Element>(
    bound: &BoundTiMae<T>,
    cfg: &ModelConfig,
    x: &Tensor<T>,
) -> Result<Tensor<T>> {
    if x.shape().len() != 3 || x.shape()[2] != cfg.in_channels {
        return Err(Error::ShapeMismatch {
            op: "embed",
            lhs: x.shape().to_vec(),
            rhs: vec![0, 0, cfg.in_channels],
        });
    }
    let tokens = x.conv1d(
        &bound.conv_kernel,
        &bound.conv_bias,
        cfg.conv_stride,
        cfg.conv_padding,
    )?;
    if cfg.use_encoder_pe {
        let len = tokens.shape()[1];
        tokens.add(&pe_tensor(len, cfg.d_model)?)
    } else {
        Ok(tokens)
    }
}

/// Encoder over visible tokens only: gathers the visible rows and runs
/// the block stack. Masked rows never reach the encoder.
pub fn encode<T: Element>(
    bound: &BoundTiMae<T>,
    cfg: &ModelConfig,
    tokens: &Tensor<T>,
    mask: &MaskSpec,
) -> Result<Tensor<T>> {
    if tokens.shape().len() != 3 || tokens.shape()[1] != mask.len {
        return Err(Error::ShapeMismatch {
            op: "encode",
            lhs: tokens.shape().to_vec(),
            rhs: vec![mask.len],
        });
    }
    if mask.visible() == 0 {
        return Err(Error::Contract {
            op: "encode",
            message: "mask leaves no visible tokens".into(),
        });
    }
    let mut z = tokens.gather_rows(1, &mask.visible_idx)?;
    for block in &bound.encoder {
        z = block_forward(&z, block, cfg)?;
    }
    Ok(z)
}

/// Decoder over the full token grid: width reduction, scatter of encoded
/// tokens, the trainable mask token at masked positions, positional
/// table over all positions, dropout at the stack input, blocks, and the
/// point-level projection. Output covers every position.
pub fn decode<T: Element>(
    bound: &BoundTiMae<T>,
    cfg: &ModelConfig,
    latents: &Tensor<T>,
    mask: &MaskSpec,
    mode: &mut RunMode<'_>,
) -> Result<Tensor<T>> {
    if latents.shape().len() != 3 || latents.shape()[1] != mask.visible() {
        return Err(Error::ShapeMismatch {
            op: "decode",
            lhs: latents.shape().to_vec(),
            rhs: vec![mask.visible()],
        });
    }
    let batch = latents.shape()[0];
    let reduced = linear(latents, &bound.reduce)?;
    let mut full = reduced.scatter_rows(1, &mask.visible_idx, mask.len)?;
    if mask.masked() > 0 {
        let tokens = bound
            .mask_token
            .broadcast_suffix(&[batch, mask.masked()]);
        full = full.add(&tokens.scatter_rows(1, &mask.masked_idx, mask.len)?)?;
    }
    if cfg.use_decoder_pe {
        full = full.add(&pe_tensor(mask.len, cfg.d_decoder)?)?;
    }
    let mut z = match mode {
        RunMode::Train { rng } => full.dropout(cfg.dropout_p, true, *rng)?,
        RunMode::Eval => full,
    };
    for block in &bound.decoder {
        z = block_forward(&z, block, cfg)?;
    }
    linear(&z, &bound.proj)
}

/// The whole autoencoder: embed, encode visible tokens, decode all
/// positions. Returns `[B, L, out_channels]`.
pub fn reconstruct<T: Element>(
    bound: &BoundTiMae<T>,
    cfg: &ModelConfig,
    x: &Tensor<T>,
    mask: &MaskSpec,
    mode: &mut RunMode<'_>,
) -> Result<Tensor<T>> {
    let tokens = embed(bound, cfg, x)?;
    let latents = encode(bound, cfg, &tokens, mask)?;
    decode(bound, cfg, &latents, mask, mode)
}
