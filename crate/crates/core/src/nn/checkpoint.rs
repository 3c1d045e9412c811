//! Binary network checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "ETCRL1"                      6 bytes magic
//! L                             u32, number of dense layers
//! sizes[0..=L]                  u32 each
//! hidden activation             u8 (0 relu, 1 tanh)
//! output activation per unit    u8 each (0 linear, 1 tanh, 2 sigmoid)
//! output scale per unit         f64 each
//! for each layer in order:
//!     weights (inputs × outputs, row-major)   f64 each
//!     biases                                   f64 each
//! ```

use std::fs;
use std::path::Path;

use super::matrix::Matrix;
use super::mlp::{Activation, Dense, Mlp, MlpSpec, OutputActivation};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"ETCRL1";

pub fn encode(net: &Mlp) -> Vec<u8> {
    let spec = net.spec();
    let mut out = Vec::with_capacity(64 + 8 * net.parameter_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&((spec.sizes.len() - 1) as u32).to_le_bytes());
    for &s in &spec.sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out.push(spec.hidden.code());
    out.extend(spec.output.iter().map(|a| a.code()));
    for s in &spec.output_scale {
        out.extend_from_slice(&s.to_le_bytes());
    }
    for p in net.params() {
        for v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated: wanted {n} bytes at offset {}", self.pos))
        })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let data = (0..rows * cols).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Matrix::from_vec(rows, cols, data)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Mlp> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let layers = r.u32()? as usize;
    if layers == 0 || layers > 1024 {
        return Err(Error::Checkpoint(format!("implausible layer count {layers}")));
    }
    let sizes = (0..=layers).map(|_| r.u32().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
    let hidden = Activation::from_code(r.u8()?).ok_or_else(|| Error::Checkpoint("unknown hidden activation".into()))?;
    let width = sizes[layers];
    let output = (0..width)
        .map(|_| {
            let code = r.u8()?;
            OutputActivation::from_code(code).ok_or_else(|| Error::Checkpoint(format!("unknown output activation {code}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let output_scale = (0..width).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let mut dense = Vec::with_capacity(layers);
    for w in sizes.windows(2) {
        let weights = r.matrix(w[0], w[1])?;
        let bias = r.matrix(1, w[1])?;
        dense.push(Dense { weights, bias });
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let spec = MlpSpec {
        sizes,
        hidden,
        output,
        output_scale,
    };
    Mlp::from_parts(spec, dense).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save(net: &Mlp, path: &Path) -> Result<()> {
    crate::harness::export::write_atomic(path, &encode(net))
}

pub fn load(path: &Path) -> Result<Mlp> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn sample_net() -> Mlp {
        let spec = MlpSpec {
            sizes: vec![3, 5, 3],
            hidden: Activation::Tanh,
            output: vec![OutputActivation::Linear, OutputActivation::Linear, OutputActivation::Tanh],
            output_scale: vec![1.0, 1.0, 2.0],
        };
        Mlp::new(spec, &mut rng::stream(5, "ckpt", 0)).unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&sample_net());
        assert_eq!(&bytes[..6], b"ETCRL1");
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[10..14].try_into().unwrap()), 3);
        assert_eq!(bytes[22], 1);
        assert_eq!(&bytes[23..26], &[0, 0, 1]);
        let params = 3 * 5 + 5 + 5 * 3 + 3;
        assert_eq!(bytes.len(), 26 + 3 * 8 + params * 8);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let net = sample_net();
        let bytes = encode(&net);
        let back = decode(&bytes).unwrap();
        assert_eq!(back, net);
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let bytes = encode(&sample_net());
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(decode(&long).is_err());
    }
}
