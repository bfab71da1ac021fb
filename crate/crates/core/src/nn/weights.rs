//! Portable weight-file format.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "NNW1" | version u32 | layer_count u32 | layers... | crc32 u32
//! conv layer  : kind 0u8 | in_ch u32 | out_ch u32 | kernel u32 | stride u32
//!               | padding u32 | weights f32[k²·in·out] ([ky][kx][in][out])
//!               | bias f32[out]
//! dense layer : kind 1u8 | in_dim u32 | out_dim u32 | activation u32
//!               (0 linear, 1 relu, 2 sigmoid) | weights f32[out·in]
//!               ([out][in]) | bias f32[out]
//! ```
//!
//! The trailing CRC32 covers every preceding byte.

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Activation, ConvLayer, DenseLayer};

const MAGIC: &[u8; 4] = b"NNW1";
const VERSION: u32 = 1;

/// One serialized layer. Files are always 32-bit floats; models generic
/// over other scalar types convert at the boundary.
#[derive(Debug, Clone)]
pub enum LayerRecord {
    Conv(ConvLayer<f32>),
    Dense(DenseLayer<f32>),
}

fn activation_code(a: Activation) -> u32 {
    match a {
        Activation::Linear => 0,
        Activation::Relu => 1,
        Activation::Sigmoid => 2,
    }
}

fn activation_from_code(c: u32) -> Result<Activation> {
    match c {
        0 => Ok(Activation::Linear),
        1 => Ok(Activation::Relu),
        2 => Ok(Activation::Sigmoid),
        other => Err(Error::CorruptWeights(format!(
            "unknown activation code {}",
            other
        ))),
    }
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_f32s(buf: &mut Vec<u8>, vs: &[f32]) {
    for &v in vs {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes layers to the documented byte stream.
pub fn write_weights(layers: &[LayerRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    push_u32(&mut buf, VERSION);
    push_u32(&mut buf, layers.len() as u32);
    for layer in layers {
        match layer {
            LayerRecord::Conv(l) => {
                buf.push(0);
                push_u32(&mut buf, l.in_channels as u32);
                push_u32(&mut buf, l.out_channels as u32);
                push_u32(&mut buf, l.kernel_size as u32);
                push_u32(&mut buf, l.stride as u32);
                push_u32(&mut buf, l.padding as u32);
                push_f32s(&mut buf, &l.weights);
                push_f32s(&mut buf, &l.bias);
            }
            LayerRecord::Dense(l) => {
                buf.push(1);
                push_u32(&mut buf, l.in_dim as u32);
                push_u32(&mut buf, l.out_dim as u32);
                push_u32(&mut buf, activation_code(l.activation));
                push_f32s(&mut buf, &l.weights);
                push_f32s(&mut buf, &l.bias);
            }
        }
    }
    let crc = crc32fast::hash(&buf);
    push_u32(&mut buf, crc);
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::CorruptWeights("truncated stream".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let b = self.take(n.checked_mul(4).ok_or_else(|| {
            Error::CorruptWeights("layer size overflows".into())
        })?)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

/// Parses the documented byte stream back into layer records.
pub fn read_weights(bytes: &[u8]) -> Result<Vec<LayerRecord>> {
    if bytes.len() < MAGIC.len() + 4 + 4 + 4 {
        return Err(Error::CorruptWeights("stream too short".into()));
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes([crc_bytes[0], crc_bytes[1], crc_bytes[2], crc_bytes[3]]);
    if crc32fast::hash(body) != stored {
        return Err(Error::CorruptWeights("checksum mismatch".into()));
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::CorruptWeights("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::CorruptWeights(format!(
            "unsupported version {}",
            version
        )));
    }
    let count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let kind = r.u8()?;
        match kind {
            0 => {
                let in_channels = r.u32()? as usize;
                let out_channels = r.u32()? as usize;
                let kernel_size = r.u32()? as usize;
                let stride = r.u32()? as usize;
                let padding = r.u32()? as usize;
                let mut layer = ConvLayer::zeros(
                    in_channels,
                    out_channels,
                    kernel_size,
                    stride,
                    padding,
                )
                .map_err(|e| Error::CorruptWeights(e.to_string()))?;
                layer.weights = r.f32s(layer.weights.len())?;
                layer.bias = r.f32s(layer.bias.len())?;
                layers.push(LayerRecord::Conv(layer));
            }
            1 => {
                let in_dim = r.u32()? as usize;
                let out_dim = r.u32()? as usize;
                let activation = activation_from_code(r.u32()?)?;
                let mut layer = DenseLayer::zeros(in_dim, out_dim, activation)
                    .map_err(|e| Error::CorruptWeights(e.to_string()))?;
                layer.weights = r.f32s(layer.weights.len())?;
                layer.bias = r.f32s(layer.bias.len())?;
                layers.push(LayerRecord::Dense(layer));
            }
            other => {
                return Err(Error::CorruptWeights(format!(
                    "unknown layer kind {}",
                    other
                )))
            }
        }
    }
    if r.pos != body.len() {
        return Err(Error::CorruptWeights("trailing bytes after last layer".into()));
    }
    Ok(layers)
}

pub fn save_weights_file<P: AsRef<Path>>(layers: &[LayerRecord], path: P) -> Result<()> {
    Ok(std::fs::write(path, write_weights(layers))?)
}

pub fn load_weights_file<P: AsRef<Path>>(path: P) -> Result<Vec<LayerRecord>> {
    read_weights(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn sample_layers(seed: u64) -> Vec<LayerRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut conv = ConvLayer::zeros(1, 4, 3, 1, 0).unwrap();
        for w in &mut conv.weights {
            *w = rng.random_range(-1.0f32..1.0);
        }
        for b in &mut conv.bias {
            *b = rng.random_range(-1.0f32..1.0);
        }
        let mut dense = DenseLayer::zeros(5, 3, Activation::Sigmoid).unwrap();
        for w in &mut dense.weights {
            *w = rng.random_range(-1.0f32..1.0);
        }
        for b in &mut dense.bias {
            *b = rng.random_range(-1.0f32..1.0);
        }
        vec![LayerRecord::Conv(conv), LayerRecord::Dense(dense)]
    }

    fn assert_same(a: &[LayerRecord], b: &[LayerRecord]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b.iter()) {
            match (x, y) {
                (LayerRecord::Conv(l), LayerRecord::Conv(m)) => {
                    assert_eq!(l.in_channels, m.in_channels);
                    assert_eq!(l.out_channels, m.out_channels);
                    assert_eq!(l.kernel_size, m.kernel_size);
                    assert_eq!(l.stride, m.stride);
                    assert_eq!(l.padding, m.padding);
                    // Bitwise comparison, not approximate.
                    assert!(l.weights.iter().zip(&m.weights).all(|(a, b)| a.to_bits() == b.to_bits()));
                    assert!(l.bias.iter().zip(&m.bias).all(|(a, b)| a.to_bits() == b.to_bits()));
                }
                (LayerRecord::Dense(l), LayerRecord::Dense(m)) => {
                    assert_eq!(l.in_dim, m.in_dim);
                    assert_eq!(l.out_dim, m.out_dim);
                    assert_eq!(l.activation, m.activation);
                    assert!(l.weights.iter().zip(&m.weights).all(|(a, b)| a.to_bits() == b.to_bits()));
                    assert!(l.bias.iter().zip(&m.bias).all(|(a, b)| a.to_bits() == b.to_bits()));
                }
                _ => panic!("layer kinds differ"),
            }
        }
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let layers = sample_layers(1);
        let bytes = write_weights(&layers);
        let back = read_weights(&bytes).unwrap();
        assert_same(&layers, &back);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.nnw");
        let layers = sample_layers(2);
        save_weights_file(&layers, &path).unwrap();
        let back = load_weights_file(&path).unwrap();
        assert_same(&layers, &back);
    }

    #[test]
    fn truncated_stream_rejected() {
        let bytes = write_weights(&sample_layers(3));
        for cut in [bytes.len() - 1, bytes.len() / 2, 10, 0] {
            match read_weights(&bytes[..cut]) {
                Err(Error::CorruptWeights(_)) => {}
                other => panic!("expected corrupt-weights, got {:?}", other.map(|_| ())),
            }
        }
    }

    #[test]
    fn flipped_byte_anywhere_rejected() {
        let bytes = write_weights(&sample_layers(4));
        // Flip one byte in the checksum itself, and a few through the body.
        for &pos in &[bytes.len() - 1, 0, 5, 13, bytes.len() / 2] {
            let mut bad = bytes.clone();
            bad[pos] ^= 0xFF;
            match read_weights(&bad) {
                Err(Error::CorruptWeights(_)) => {}
                other => panic!("pos {}: expected corrupt-weights, got {:?}", pos, other.map(|_| ())),
            }
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let mut bytes = write_weights(&sample_layers(5));
        bytes[0..4].copy_from_slice(b"XXXX");
        // Re-stamp the checksum so the magic check itself is exercised.
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        match read_weights(&bytes) {
            Err(Error::CorruptWeights(msg)) => assert!(msg.contains("magic")),
            other => panic!("expected corrupt-weights, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn trailing_garbage_rejected() {
        let mut bytes = write_weights(&sample_layers(6));
        let n = bytes.len();
        bytes.splice(n - 4..n - 4, [0u8; 8]);
        let m = bytes.len();
        let crc = crc32fast::hash(&bytes[..m - 4]);
        bytes[m - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            read_weights(&bytes),
            Err(Error::CorruptWeights(_))
        ));
    }
}
