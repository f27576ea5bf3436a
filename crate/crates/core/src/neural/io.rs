//! Binary model files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "EEF1" | version u32 | series u32 | convs_per_series u32 | hidden u32 |
//! kernel u32 | activation u8 (0 = tanh) | input_channels u32 |
//! temperature f64 | lambda f64 | lr f64 | beta1 f64 | beta2 f64 | eps f64 |
//! param_count u64 | params f32 * param_count | crc32 u32
//! ```
//!
//! The checksum covers every byte before it. Parameters follow the layer
//! order of [`ArchConfig::layers`], each layer's kernel then its bias.

use std::fs;
use std::path::Path;

use super::encode::INPUT_CHANNELS;
use super::network::{AdamConfig, ArchConfig, NetworkParams};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EEF1";
pub const FORMAT_VERSION: u32 = 1;
const ACTIVATION_TANH: u8 = 0;

pub fn to_bytes(params: &NetworkParams) -> Vec<u8> {
    let a = &params.arch;
    let mut buf = Vec::with_capacity(96 + 4 * params.weights().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [a.series, a.convs_per_series, a.hidden_channels, a.kernel] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    buf.push(ACTIVATION_TANH);
    buf.extend_from_slice(&(INPUT_CHANNELS as u32).to_le_bytes());
    let ad = &params.adam;
    for v in [a.temperature, params.lambda, ad.learning_rate, ad.beta1, ad.beta2, ad.epsilon] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&(params.weights().len() as u64).to_le_bytes());
    for w in params.weights() {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let bytes = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| Error::CorruptModel(format!("unexpected end of data at byte {}", self.pos)))?;
        self.pos = end;
        Ok(bytes.try_into().unwrap())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        self.take().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.take().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.take().map(f64::from_le_bytes)
    }

    fn f32(&mut self) -> Result<f32> {
        self.take().map(f32::from_le_bytes)
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<NetworkParams> {
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic("missing EEF1 magic".into()));
    }
    if bytes.len() < 8 {
        return Err(Error::CorruptModel("file ends inside the header".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion { found: version, expected: FORMAT_VERSION });
    }
    if bytes.len() < 12 {
        return Err(Error::ChecksumMismatch { stored: 0, computed: crc32fast::hash(bytes) });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }

    let mut r = Reader { buf: body, pos: 8 };
    let series = r.u32()? as usize;
    let convs_per_series = r.u32()? as usize;
    let hidden_channels = r.u32()? as usize;
    let kernel = r.u32()? as usize;
    let activation = r.u8()?;
    if activation != ACTIVATION_TANH {
        return Err(Error::CorruptModel(format!("unknown activation code {activation}")));
    }
    let channels = r.u32()? as usize;
    if channels != INPUT_CHANNELS {
        return Err(Error::CorruptModel(format!("expected {INPUT_CHANNELS} input channels, got {channels}")));
    }
    let temperature = r.f64()?;
    let lambda = r.f64()?;
    let adam = AdamConfig { learning_rate: r.f64()?, beta1: r.f64()?, beta2: r.f64()?, epsilon: r.f64()? };
    let count = r.u64()? as usize;
    if body.len() - r.pos != 4 * count {
        return Err(Error::CorruptModel(format!(
            "header declares {count} parameters but {} bytes follow",
            body.len() - r.pos
        )));
    }
    let weights = (0..count).map(|_| r.f32()).collect::<Result<Vec<f32>>>()?;
    let arch = ArchConfig { series, convs_per_series, hidden_channels, kernel, temperature };
    NetworkParams::from_weights(arch, lambda, adam, weights)
}

pub fn save_model(params: &NetworkParams, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(params))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<NetworkParams> {
    from_bytes(&fs::read(path)?)
}
