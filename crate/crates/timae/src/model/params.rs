//! Parameter storage.
//!
//! Parameter structs are generic over their storage: a plain buffer
//! ([`Buf`]) for the model that lives between steps (plain data, `Send`),
//! or a graph leaf ([`Tensor`]) after binding for a forward/backward
//! pass. Binding is cheap relative to a training step and keeps graphs
//! strictly thread-local.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::config::{MaskTokenInit, ModelConfig};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Element, Tensor};

/// A plain parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Buf<T> {
    pub data: Vec<T>,
    pub shape: Vec<usize>,
}

impl<T: Element> Buf<T> {
    pub fn zeros(shape: &[usize]) -> Buf<T> {
        Buf {
            data: vec![T::zero(); shape.iter().product()],
            shape: shape.to_vec(),
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

#[derive(Debug, Clone)]
pub struct LinearP<S> {
    /// `[in, out]`
    pub weight: S,
    /// `[out]`
    pub bias: S,
}

#[derive(Debug, Clone)]
pub struct LayerNormP<S> {
    pub gamma: S,
    pub beta: S,
}

#[derive(Debug, Clone)]
pub struct AttentionP<S> {
    pub wq: LinearP<S>,
    pub wk: LinearP<S>,
    pub wv: LinearP<S>,
    pub wo: LinearP<S>,
}

#[derive(Debug, Clone)]
pub struct BlockP<S> {
    pub ln1: LayerNormP<S>,
    pub attn: AttentionP<S>,
    pub ln2: LayerNormP<S>,
    pub ffn_in: LinearP<S>,
    pub ffn_out: LinearP<S>,
}

/// The full parameter set: conv embedding, encoder blocks, the
/// dimension-reduction linear, the trainable mask token, decoder blocks
/// and the point-level projection.
#[derive(Debug, Clone)]
pub struct TiMaeP<S> {
    pub conv_kernel: S,
    pub conv_bias: S,
    pub encoder: Vec<BlockP<S>>,
    pub reduce: LinearP<S>,
    pub mask_token: S,
    pub decoder: Vec<BlockP<S>>,
    pub proj: LinearP<S>,
}

/// The model as plain data; safe to move between threads.
pub type TiMae<T> = TiMaeP<Buf<T>>;
/// The model bound into a graph for one forward/backward pass.
pub type BoundTiMae<T> = TiMaeP<Tensor<T>>;

impl<S> TiMaeP<S> {
    /// Visits every parameter in a stable order with a stable name.
    /// Checkpoints, the optimizer and gradient plumbing all key off this
    /// order.
    pub fn visit<'s>(&'s self, f: &mut impl FnMut(String, &'s S)) {
        f("conv.kernel".into(), &self.conv_kernel);
        f("conv.bias".into(), &self.conv_bias);
        for (i, b) in self.encoder.iter().enumerate() {
            visit_block(&format!("enc.{i}"), b, f);
        }
        f("reduce.weight".into(), &self.reduce.weight);
        f("reduce.bias".into(), &self.reduce.bias);
        f("mask_token".into(), &self.mask_token);
        for (i, b) in self.decoder.iter().enumerate() {
            visit_block(&format!("dec.{i}"), b, f);
        }
        f("proj.weight".into(), &self.proj.weight);
        f("proj.bias".into(), &self.proj.bias);
    }

    pub fn visit_mut<'s>(&'s mut self, f: &mut impl FnMut(String, &'s mut S)) {
        f("conv.kernel".into(), &mut self.conv_kernel);
        f("conv.bias".into(), &mut self.conv_bias);
        for (i, b) in self.encoder.iter_mut().enumerate() {
            visit_block_mut(&format!("enc.{i}"), b, f);
        }
        f("reduce.weight".into(), &mut self.reduce.weight);
        f("reduce.bias".into(), &mut self.reduce.bias);
        f("mask_token".into(), &mut self.mask_token);
        for (i, b) in self.decoder.iter_mut().enumerate() {
            visit_block_mut(&format!("dec.{i}"), b, f);
        }
        f("proj.weight".into(), &mut self.proj.weight);
        f("proj.bias".into(), &mut self.proj.bias);
    }

    pub fn map<U>(&self, f: &mut impl FnMut(&S) -> U) -> TiMaeP<U> {
        TiMaeP {
            conv_kernel: f(&self.conv_kernel),
            conv_bias: f(&self.conv_bias),
            encoder: self.encoder.iter().map(|b| map_block(b, f)).collect(),
            reduce: LinearP {
                weight: f(&self.reduce.weight),
                bias: f(&self.reduce.bias),
            },
            mask_token: f(&self.mask_token),
            decoder: self.decoder.iter().map(|b| map_block(b, f)).collect(),
            proj: LinearP {
                weight: f(&self.proj.weight),
                bias: f(&self.proj.bias),
            },
        }
    }
}

fn visit_block<'s, S>(prefix: &str, b: &'s BlockP<S>, f: &mut impl FnMut(String, &'s S)) {
    f(format!("{prefix}.ln1.gamma"), &b.ln1.gamma);
    f(format!("{prefix}.ln1.beta"), &b.ln1.beta);
    for (name, lin) in [
        ("attn.q", &b.attn.wq),
        ("attn.k", &b.attn.wk),
        ("attn.v", &b.attn.wv),
        ("attn.o", &b.attn.wo),
    ] {
        f(format!("{prefix}.{name}.weight"), &lin.weight);
        f(format!("{prefix}.{name}.bias"), &lin.bias);
    }
    f(format!("{prefix}.ln2.gamma"), &b.ln2.gamma);
    f(format!("{prefix}.ln2.beta"), &b.ln2.beta);
    f(format!("{prefix}.ffn_in.weight"), &b.ffn_in.weight);
    f(format!("{prefix}.ffn_in.bias"), &b.ffn_in.bias);
    f(format!("{prefix}.ffn_out.weight"), &b.ffn_out.weight);
    f(format!("{prefix}.ffn_out.bias"), &b.ffn_out.bias);
}

fn visit_block_mut<'s, S>(
    prefix: &str,
    b: &'s mut BlockP<S>,
    f: &mut impl FnMut(String, &'s mut S),
) {
    f(format!("{prefix}.ln1.gamma"), &mut b.ln1.gamma);
    f(format!("{prefix}.ln1.beta"), &mut b.ln1.beta);
    for (name, lin) in [
        ("attn.q", &mut b.attn.wq),
        ("attn.k", &mut b.attn.wk),
        ("attn.v", &mut b.attn.wv),
        ("attn.o", &mut b.attn.wo),
    ] {
        f(format!("{prefix}.{name}.weight"), &mut lin.weight);
        f(format!("{prefix}.{name}.bias"), &mut lin.bias);
    }
    f(format!("{prefix}.ln2.gamma"), &mut b.ln2.gamma);
    f(format!("{prefix}.ln2.beta"), &mut b.ln2.beta);
    f(format!("{prefix}.ffn_in.weight"), &mut b.ffn_in.weight);
    f(format!("{prefix}.ffn_in.bias"), &mut b.ffn_in.bias);
    f(format!("{prefix}.ffn_out.weight"), &mut b.ffn_out.weight);
    f(format!("{prefix}.ffn_out.bias"), &mut b.ffn_out.bias);
}

fn map_block<S, U>(b: &BlockP<S>, f: &mut impl FnMut(&S) -> U) -> BlockP<U> {
    BlockP {
        ln1: LayerNormP {
            gamma: f(&b.ln1.gamma),
            beta: f(&b.ln1.beta),
        },
        attn: AttentionP {
            wq: LinearP {
                weight: f(&b.attn.wq.weight),
                bias: f(&b.attn.wq.bias),
            },
            wk: LinearP {
                weight: f(&b.attn.wk.weight),
                bias: f(&b.attn.wk.bias),
            },
            wv: LinearP {
                weight: f(&b.attn.wv.weight),
                bias: f(&b.attn.wv.bias),
            },
            wo: LinearP {
                weight: f(&b.attn.wo.weight),
                bias: f(&b.attn.wo.bias),
            },
        },
        ln2: LayerNormP {
            gamma: f(&b.ln2.gamma),
            beta: f(&b.ln2.beta),
        },
        ffn_in: LinearP {
            weight: f(&b.ffn_in.weight),
            bias: f(&b.ffn_in.bias),
        },
        ffn_out: LinearP {
            weight: f(&b.ffn_out.weight),
            bias: f(&b.ffn_out.bias),
        },
    }
}

/// Glorot-uniform draw: `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform<T: Element>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut Rng,
) -> Buf<T> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..shape.iter().product())
        .map(|_| T::from_f64(rng.gen_range(-a..a)))
        .collect();
    Buf {
        data,
        shape: shape.to_vec(),
    }
}

fn linear_init<T: Element>(d_in: usize, d_out: usize, rng: &mut Rng) -> LinearP<Buf<T>> {
    LinearP {
        weight: xavier_uniform(&[d_in, d_out], d_in, d_out, rng),
        bias: Buf::zeros(&[d_out]),
    }
}

fn layer_norm_init<T: Element>(d: usize) -> LayerNormP<Buf<T>> {
    LayerNormP {
        gamma: Buf {
            data: vec![T::one(); d],
            shape: vec![d],
        },
        beta: Buf::zeros(&[d]),
    }
}

fn block_init<T: Element>(d: usize, ffn_mult: usize, rng: &mut Rng) -> BlockP<Buf<T>> {
    BlockP {
        ln1: layer_norm_init(d),
        attn: AttentionP {
            wq: linear_init(d, d, rng),
            wk: linear_init(d, d, rng),
            wv: linear_init(d, d, rng),
            wo: linear_init(d, d, rng),
        },
        ln2: layer_norm_init(d),
        ffn_in: linear_init(d, d * ffn_mult, rng),
        ffn_out: linear_init(d * ffn_mult, d, rng),
    }
}

impl<T: Element> TiMae<T> {
    /// Fresh parameters: xavier-initialized linear maps, unit layer-norm
    /// gains, zero biases, and a zero (or small random) mask token.
    pub fn new(cfg: &ModelConfig, rng: &mut Rng) -> Result<TiMae<T>> {
        cfg.validate()?;
        let (k, m, d, dd) = (
            cfg.conv_kernel,
            cfg.in_channels,
            cfg.d_model,
            cfg.d_decoder,
        );
        let mask_token = match cfg.mask_token_init {
            MaskTokenInit::Zeros => Buf::zeros(&[dd]),
            MaskTokenInit::Random => {
                let normal = Normal::new(0.0, 0.02).expect("valid std");
                Buf {
                    data: (0..dd).map(|_| T::from_f64(normal.sample(rng))).collect(),
                    shape: vec![dd],
                }
            }
        };
        Ok(TiMaeP {
            conv_kernel: xavier_uniform(&[k, m, d], k * m, k * d, rng),
            conv_bias: Buf::zeros(&[d]),
            encoder: (0..cfg.enc_layers)
                .map(|_| block_init(d, cfg.ffn_mult, rng))
                .collect(),
            reduce: linear_init(d, dd, rng),
            mask_token,
            decoder: (0..cfg.dec_layers)
                .map(|_| block_init(dd, cfg.ffn_mult, rng))
                .collect(),
            proj: linear_init(dd, cfg.out_channels, rng),
        })
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, buf| n += buf.numel());
        n
    }

    /// Binds parameters into graph leaves. Trainable leaves receive
    /// gradients on backward; frozen leaves record no graph at all.
    pub fn bind(&self, trainable: bool) -> BoundTiMae<T> {
        self.map(&mut |buf: &Buf<T>| {
            let t = if trainable {
                Tensor::param(buf.data.clone(), &buf.shape)
            } else {
                Tensor::constant(buf.data.clone(), &buf.shape)
            };
            t.expect("parameter buffer shapes are consistent")
        })
    }

    /// Ordered parameter buffers, paired with [`BoundTiMae::leaves`].
    pub fn buffers_mut(&mut self) -> Vec<&mut Buf<T>> {
        let mut out = Vec::new();
        self.visit_mut(&mut |_, buf| out.push(buf));
        out
    }

    /// Raw little-endian `f32` bytes of every parameter in visit order.
    /// This is the byte string whose CRC identifies the parameter state.
    pub fn param_bytes(&self) -> Vec<u8> {
        let mut bytes = Vec::new();
        self.visit(&mut |_, buf: &Buf<T>| {
            for v in &buf.data {
                bytes.extend_from_slice(&(v.to_f64() as f32).to_le_bytes());
            }
        });
        bytes
    }
}

impl<T: Element> BoundTiMae<T> {
    /// Ordered leaf tensors, aligned with [`TiMae::buffers_mut`].
    pub fn leaves(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        self.visit(&mut |_, t| out.push(t));
        out
    }
}

/// Separate forecast head for fine-tuning: one linear map from encoder
/// features to the flattened `[k x n]` future.
#[derive(Debug, Clone)]
pub struct ForecastHead<T> {
    pub linear: LinearP<Buf<T>>,
    pub in_dim: usize,
    pub horizon: usize,
    pub out_channels: usize,
}

impl<T: Element> ForecastHead<T> {
    pub fn new(in_dim: usize, horizon: usize, out_channels: usize, rng: &mut Rng) -> Result<ForecastHead<T>> {
        if in_dim == 0 || horizon == 0 || out_channels == 0 {
            return Err(Error::Config(
                "head dimensions must be positive".into(),
            ));
        }
        Ok(ForecastHead {
            linear: linear_init(in_dim, horizon * out_channels, rng),
            in_dim,
            horizon,
            out_channels,
        })
    }

    pub fn param_count(&self) -> usize {
        self.linear.weight.numel() + self.linear.bias.numel()
    }
}
