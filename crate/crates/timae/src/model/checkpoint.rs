//! Checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   8 bytes         "TIMAE001"
//! header  u32 length, then that many bytes of UTF-8 JSON (the config)
//! tensors repeated until 4 bytes remain:
//!           u32  name length
//!           name UTF-8 bytes
//!           u64  rank
//!           u64  per dimension
//!           f32  per element, row-major
//! crc     u32 CRC-32 (IEEE) over everything after the magic
//! ```
//!
//! Values are stored as `f32`; models trained in `f32` round-trip
//! bit-exactly.

use std::fs;
use std::path::Path;

use super::config::ModelConfig;
use super::params::{Buf, TiMae};
use crate::error::{Error, Result};
use crate::tensor::Element;

pub const MAGIC: &[u8; 8] = b"TIMAE001";

/// CRC-32 (IEEE 802.3 polynomial, reflected), as used by zlib.
pub fn crc32(bytes: &[u8]) -> u32 {
    static TABLE: once_cell::sync::Lazy<[u32; 256]> = once_cell::sync::Lazy::new(|| {
        let mut table = [0u32; 256];
        for (i, entry) in table.iter_mut().enumerate() {
            let mut c = i as u32;
            for _ in 0..8 {
                c = if c & 1 != 0 { 0xEDB8_8320 ^ (c >> 1) } else { c >> 1 };
            }
            *entry = c;
        }
        table
    });
    let mut crc = !0u32;
    for &b in bytes {
        crc = TABLE[((crc ^ b as u32) & 0xFF) as usize] ^ (crc >> 8);
    }
    !crc
}

/// Serializes the model (config header plus named parameter tensors).
pub fn checkpoint_bytes<T: Element>(model: &TiMae<T>, cfg: &ModelConfig) -> Vec<u8> {
    let mut payload = Vec::new();
    let header = cfg.to_json().into_bytes();
    payload.extend_from_slice(&(header.len() as u32).to_le_bytes());
    payload.extend_from_slice(&header);
    model.visit(&mut |name, buf: &Buf<T>| {
        let name = name.as_bytes();
        payload.extend_from_slice(&(name.len() as u32).to_le_bytes());
        payload.extend_from_slice(name);
        payload.extend_from_slice(&(buf.shape.len() as u64).to_le_bytes());
        for &d in &buf.shape {
            payload.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &buf.data {
            payload.extend_from_slice(&(v.to_f64() as f32).to_le_bytes());
        }
    });
    let mut out = Vec::with_capacity(MAGIC.len() + payload.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32(&payload).to_le_bytes());
    out
}

pub fn checkpoint_save<T: Element>(
    model: &TiMae<T>,
    cfg: &ModelConfig,
    path: &Path,
) -> Result<()> {
    fs::write(path, checkpoint_bytes(model, cfg))?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: String,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format {
                path: self.path.clone(),
                message: format!(
                    "truncated: wanted {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Reads the embedded config without loading tensors.
pub fn checkpoint_config(path: &Path) -> Result<ModelConfig> {
    let bytes = fs::read(path)?;
    parse(path, &bytes, None).map(|(cfg, _)| cfg)
}

/// Loads a checkpoint. When `expected` is given, the embedded config
/// must match it exactly; a mismatch is a version error naming both.
pub fn checkpoint_load<T: Element>(
    path: &Path,
    expected: Option<&ModelConfig>,
) -> Result<(ModelConfig, TiMae<T>)> {
    let bytes = fs::read(path)?;
    let (cfg, tensors) = parse(path, &bytes, expected)?;

    // assemble by name onto a freshly-shaped model
    let mut rng = crate::rng::for_purpose(0, "checkpoint-shape");
    let mut model: TiMae<T> = TiMae::new(&cfg, &mut rng)?;
    let mut missing = Vec::new();
    model.visit_mut(&mut |name, buf: &mut Buf<T>| {
        match tensors.iter().find(|(n, _, _)| *n == name) {
            Some((_, shape, data)) if *shape == buf.shape => {
                buf.data = data.iter().map(|&v| T::from_f64(v as f64)).collect();
            }
            Some((_, shape, _)) => missing.push(format!(
                "{name}: shape {shape:?} does not match expected {:?}",
                buf.shape
            )),
            None => missing.push(format!("{name}: missing")),
        }
    });
    if !missing.is_empty() {
        return Err(Error::Format {
            path: path.display().to_string(),
            message: format!("bad tensor table: {}", missing.join("; ")),
        });
    }
    Ok((cfg, model))
}

type NamedTensor = (String, Vec<usize>, Vec<f32>);

fn parse(
    path: &Path,
    bytes: &[u8],
    expected: Option<&ModelConfig>,
) -> Result<(ModelConfig, Vec<NamedTensor>)> {
    let path_str = path.display().to_string();
    if bytes.len() < MAGIC.len() + 4 + 4 {
        return Err(Error::Format {
            path: path_str,
            message: "truncated: shorter than the fixed framing".into(),
        });
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Format {
            path: path_str,
            message: "bad magic bytes".into(),
        });
    }
    let payload = &bytes[MAGIC.len()..bytes.len() - 4];
    let stored_crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let actual_crc = crc32(payload);
    if stored_crc != actual_crc {
        return Err(Error::Format {
            path: path_str,
            message: format!("CRC mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}"),
        });
    }

    let mut r = Reader {
        bytes: payload,
        pos: 0,
        path: path_str.clone(),
    };
    let header_len = r.u32()? as usize;
    let header = std::str::from_utf8(r.take(header_len)?).map_err(|_| Error::Format {
        path: path_str.clone(),
        message: "config header is not UTF-8".into(),
    })?;
    let cfg = ModelConfig::from_json(header)?;
    if let Some(expected) = expected {
        if &cfg != expected {
            return Err(Error::Version {
                expected: expected.to_json(),
                found: cfg.to_json(),
            });
        }
    }

    let mut tensors = Vec::new();
    while r.pos < payload.len() {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Format {
                path: path_str.clone(),
                message: "tensor name is not UTF-8".into(),
            })?
            .to_string();
        let rank = r.u64()? as usize;
        if rank > 8 {
            return Err(Error::Format {
                path: path_str.clone(),
                message: format!("implausible tensor rank {rank}"),
            });
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        let numel: usize = shape.iter().product();
        let raw = r.take(numel * 4)?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push((name, shape, data));
    }
    Ok((cfg, tensors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mask::{make_mask, MaskStrategy};
    use crate::model::forward::{reconstruct, RunMode};
    use crate::rng::Rng;
    use rand::SeedableRng;

    fn toy() -> (ModelConfig, TiMae<f32>) {
        let cfg = ModelConfig {
            d_model: 8,
            d_decoder: 4,
            n_heads: 2,
            enc_layers: 1,
            dec_layers: 1,
            ffn_mult: 2,
            window_len: 8,
            ..Default::default()
        };
        let mut rng = Rng::seed_from_u64(7);
        let model = TiMae::new(&cfg, &mut rng).unwrap();
        (cfg, model)
    }

    #[test]
    fn crc32_known_vector() {
        // standard check value for "123456789"
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn save_load_forward_is_bitwise_identical() {
        let (cfg, model) = toy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.timae");
        checkpoint_save(&model, &cfg, &path).unwrap();
        let (cfg2, loaded): (_, TiMae<f32>) = checkpoint_load(&path, Some(&cfg)).unwrap();
        assert_eq!(cfg, cfg2);

        let x = crate::tensor::Tensor::constant(
            (0..16).map(|i| i as f32 * 0.1).collect(),
            &[2, 8, 1],
        )
        .unwrap();
        let mut mrng = Rng::seed_from_u64(1);
        let mask = make_mask(8, MaskStrategy::Random, 0.5, &mut mrng).unwrap();
        let a = reconstruct(&model.bind(false), &cfg, &x, &mask, &mut RunMode::Eval).unwrap();
        let b = reconstruct(&loaded.bind(false), &cfg, &x, &mask, &mut RunMode::Eval).unwrap();
        assert_eq!(a.data(), b.data(), "bitwise identical forward");
    }

    #[test]
    fn config_mismatch_is_version_error_naming_both() {
        let (cfg, model) = toy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.timae");
        checkpoint_save(&model, &cfg, &path).unwrap();
        let other = ModelConfig {
            d_model: 16,
            ..cfg.clone()
        };
        match checkpoint_load::<f32>(&path, Some(&other)) {
            Err(Error::Version { expected, found }) => {
                assert!(expected.contains("16"));
                assert!(found.contains("\"d_model\":8"));
            }
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn corrupted_magic_is_format_error() {
        let (cfg, model) = toy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.timae");
        let mut bytes = checkpoint_bytes(&model, &cfg);
        bytes[0] = b'X';
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            checkpoint_load::<f32>(&path, None),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn truncated_file_is_format_error() {
        let (cfg, model) = toy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.timae");
        let bytes = checkpoint_bytes(&model, &cfg);
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(
            checkpoint_load::<f32>(&path, None),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn payload_corruption_fails_crc() {
        let (cfg, model) = toy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.timae");
        let mut bytes = checkpoint_bytes(&model, &cfg);
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x55;
        std::fs::write(&path, bytes).unwrap();
        let err = checkpoint_load::<f32>(&path, None);
        assert!(matches!(err, Err(Error::Format { .. })));
    }

    #[test]
    fn config_peek_reads_header_only() {
        let (cfg, model) = toy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.timae");
        checkpoint_save(&model, &cfg, &path).unwrap();
        assert_eq!(checkpoint_config(&path).unwrap(), cfg);
    }
}
