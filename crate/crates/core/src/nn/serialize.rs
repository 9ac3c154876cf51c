//! Binary network container.
//!
//! Layout (all integers little-endian, see docs/formats.md):
//!
//! ```text
//! "BLNN" | version u8 | h u32 | w u32 | c u32 | classes u32 | layers u32
//! per layer: payload_len u32 | payload (kind u8 + kind fields)
//! per parametric layer, in order: weights f32[] (then bias f32[] if any)
//! optional: "BLMK" | packed connection bits per parametric tensor
//! ```
//!
//! Weights are stored as f32; in-memory values are f64 and are narrowed on
//! save, widened on load (save -> load -> save is byte-identical).

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{bias_len, weight_shape, LayerSpec, NetworkParams, NetworkSpec};

pub const NETWORK_MAGIC: &[u8; 4] = b"BLNN";
pub const MASK_MAGIC: &[u8; 4] = b"BLMK";
pub const NETWORK_VERSION: u8 = 1;

const KIND_CONV: u8 = 0;
const KIND_RELU: u8 = 1;
const KIND_MAXPOOL: u8 = 2;
const KIND_GAP: u8 = 3;
const KIND_RESHAPE: u8 = 4;
const KIND_FC: u8 = 5;

/// Marks which entries of a merged network's parameter tensors are real
/// connections (true) versus structural zeros (false). Aligned 1:1 with the
/// parametric layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectionMask {
    pub layers: Vec<MaskLayer>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskLayer {
    pub weights: Vec<bool>,
    pub bias: Option<Vec<bool>>,
}

impl ConnectionMask {
    /// Count of true (trainable) entries.
    pub fn trainable(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.weights.iter().filter(|&&b| b).count()
                    + l.bias.as_ref().map_or(0, |b| b.iter().filter(|&&x| x).count())
            })
            .sum()
    }

    /// Count of false (structural-zero) entries.
    pub fn structural_zeros(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.weights.iter().filter(|&&b| !b).count()
                    + l.bias.as_ref().map_or(0, |b| b.iter().filter(|&&x| !x).count())
            })
            .sum()
    }
}

pub fn save_network(spec: &NetworkSpec, params: &NetworkParams, mask: Option<&ConnectionMask>) -> Result<Vec<u8>> {
    params.matches(spec)?;
    let mut out = Vec::new();
    out.extend_from_slice(NETWORK_MAGIC);
    out.push(NETWORK_VERSION);
    let (h, w, c) = spec.input_shape;
    for v in [h, w, c, spec.num_classes, spec.layers.len()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for layer in &spec.layers {
        let payload = encode_layer(layer);
        out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&payload);
    }
    for lp in &params.layers {
        for v in lp.weights.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        if let Some(b) = &lp.bias {
            for v in b.iter() {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    if let Some(mask) = mask {
        if mask.layers.len() != params.layers.len() {
            return Err(Error::format("BLMK", "mask layer count does not match network"));
        }
        out.extend_from_slice(MASK_MAGIC);
        for (ml, lp) in mask.layers.iter().zip(&params.layers) {
            if ml.weights.len() != lp.weights.len()
                || ml.bias.as_ref().map(Vec::len) != lp.bias.as_ref().map(Tensor::len)
            {
                return Err(Error::format("BLMK", "mask tensor sizes do not match network"));
            }
            pack_bits(&mut out, &ml.weights);
            if let Some(b) = &ml.bias {
                pack_bits(&mut out, b);
            }
        }
    }
    Ok(out)
}

pub fn load_network(bytes: &[u8]) -> Result<(NetworkSpec, NetworkParams, Option<ConnectionMask>)> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != NETWORK_MAGIC {
        return Err(Error::format("BLNN", "bad magic"));
    }
    let version = r.u8()?;
    if version != NETWORK_VERSION {
        return Err(Error::format("BLNN", format!("unsupported version {version}")));
    }
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let c = r.u32()? as usize;
    let classes = r.u32()? as usize;
    let layer_count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let len = r.u32()? as usize;
        let payload = r.take(len)?;
        layers.push(decode_layer(payload)?);
    }
    let spec = NetworkSpec::new(layers, (h, w, c), classes)?;
    let mut params = NetworkParams::zeros(&spec);
    for (lp, layer) in params
        .layers
        .iter_mut()
        .zip(spec.layers.iter().filter(|l| l.is_parametric()))
    {
        let wlen: usize = weight_shape(layer).iter().product();
        for i in 0..wlen {
            lp.weights.data_mut()[i] = r.f32()? as f64;
        }
        if let Some(blen) = bias_len(layer) {
            let b = lp.bias.as_mut().unwrap();
            for i in 0..blen {
                b.data_mut()[i] = r.f32()? as f64;
            }
        }
    }
    let mask = if r.remaining() > 0 {
        let magic = r.take(4)?;
        if magic != MASK_MAGIC {
            return Err(Error::format("BLMK", "unexpected trailing bytes"));
        }
        let mut layers = Vec::with_capacity(params.layers.len());
        for lp in &params.layers {
            let weights = unpack_bits(&mut r, lp.weights.len())?;
            let bias = match &lp.bias {
                Some(b) => Some(unpack_bits(&mut r, b.len())?),
                None => None,
            };
            layers.push(MaskLayer { weights, bias });
        }
        Some(ConnectionMask { layers })
    } else {
        None
    };
    if r.remaining() > 0 {
        return Err(Error::format("BLNN", format!("{} trailing bytes", r.remaining())));
    }
    Ok((spec, params, mask))
}

pub fn save_network_file(path: &Path, spec: &NetworkSpec, params: &NetworkParams, mask: Option<&ConnectionMask>) -> Result<()> {
    let bytes = save_network(spec, params, mask)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_network_file(path: &Path) -> Result<(NetworkSpec, NetworkParams, Option<ConnectionMask>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    load_network(&bytes)
}

fn encode_layer(layer: &LayerSpec) -> Vec<u8> {
    let mut p = Vec::new();
    match *layer {
        LayerSpec::Conv { kernel, in_channels, out_channels, stride, padding, bias } => {
            p.push(KIND_CONV);
            for v in [kernel, in_channels, out_channels, stride, padding] {
                p.extend_from_slice(&(v as u32).to_le_bytes());
            }
            p.push(bias as u8);
        }
        LayerSpec::ReLU => p.push(KIND_RELU),
        LayerSpec::MaxPool { window, stride } => {
            p.push(KIND_MAXPOOL);
            for v in [window, stride] {
                p.extend_from_slice(&(v as u32).to_le_bytes());
            }
        }
        LayerSpec::GlobalAvgPool => p.push(KIND_GAP),
        LayerSpec::Reshape => p.push(KIND_RESHAPE),
        LayerSpec::FullyConnected { in_dim, out_dim, bias } => {
            p.push(KIND_FC);
            for v in [in_dim, out_dim] {
                p.extend_from_slice(&(v as u32).to_le_bytes());
            }
            p.push(bias as u8);
        }
    }
    p
}

fn decode_layer(payload: &[u8]) -> Result<LayerSpec> {
    let mut r = Reader { bytes: payload, pos: 0 };
    let kind = r.u8()?;
    let layer = match kind {
        KIND_CONV => LayerSpec::Conv {
            kernel: r.u32()? as usize,
            in_channels: r.u32()? as usize,
            out_channels: r.u32()? as usize,
            stride: r.u32()? as usize,
            padding: r.u32()? as usize,
            bias: r.u8()? != 0,
        },
        KIND_RELU => LayerSpec::ReLU,
        KIND_MAXPOOL => LayerSpec::MaxPool {
            window: r.u32()? as usize,
            stride: r.u32()? as usize,
        },
        KIND_GAP => LayerSpec::GlobalAvgPool,
        KIND_RESHAPE => LayerSpec::Reshape,
        KIND_FC => LayerSpec::FullyConnected {
            in_dim: r.u32()? as usize,
            out_dim: r.u32()? as usize,
            bias: r.u8()? != 0,
        },
        other => return Err(Error::format("BLNN", format!("unknown layer kind {other}"))),
    };
    if r.remaining() > 0 {
        return Err(Error::format("BLNN", "oversized layer record"));
    }
    Ok(layer)
}

fn pack_bits(out: &mut Vec<u8>, bits: &[bool]) {
    for chunk in bits.chunks(8) {
        let mut byte = 0u8;
        for (i, &b) in chunk.iter().enumerate() {
            if b {
                byte |= 1 << i;
            }
        }
        out.push(byte);
    }
}

fn unpack_bits(r: &mut Reader, n: usize) -> Result<Vec<bool>> {
    let bytes = r.take(n.div_ceil(8))?;
    let mut bits = Vec::with_capacity(n);
    for i in 0..n {
        bits.push(bytes[i / 8] >> (i % 8) & 1 == 1);
    }
    Ok(bits)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format("BLNN", "truncated data"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::cnn3_spec;

    #[test]
    fn save_load_save_is_byte_identical() {
        let spec = cnn3_spec([3, 4, 5], (22, 22, 1), 4, true).unwrap();
        let params = NetworkParams::init(&spec, 21);
        let bytes = save_network(&spec, &params, None).unwrap();
        let (spec2, params2, mask) = load_network(&bytes).unwrap();
        assert_eq!(spec, spec2);
        assert!(mask.is_none());
        let bytes2 = save_network(&spec2, &params2, None).unwrap();
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn mask_round_trips() {
        let spec = crate::nn::mlp2_spec([3, 3], (2, 2, 1), 2, false).unwrap();
        let params = NetworkParams::init(&spec, 2);
        let mut mask = ConnectionMask {
            layers: params
                .layers
                .iter()
                .map(|lp| MaskLayer {
                    weights: vec![true; lp.weights.len()],
                    bias: None,
                })
                .collect(),
        };
        mask.layers[1].weights[4] = false;
        mask.layers[2].weights[0] = false;
        let bytes = save_network(&spec, &params, Some(&mask)).unwrap();
        let (_, _, loaded) = load_network(&bytes).unwrap();
        assert_eq!(loaded.as_ref(), Some(&mask));
        assert_eq!(loaded.unwrap().structural_zeros(), 2);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let spec = crate::nn::mlp2_spec([3, 3], (2, 2, 1), 2, false).unwrap();
        let params = NetworkParams::init(&spec, 2);
        let mut bytes = save_network(&spec, &params, None).unwrap();
        assert!(load_network(&bytes[..bytes.len() - 2]).is_err());
        bytes[0] = b'X';
        assert!(load_network(&bytes).is_err());
    }
}
