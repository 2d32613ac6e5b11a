//! Binary model files: magic `TFCN`, `u32` layer count, one
//! `(in, out, kernel)` `u32` triple per layer, then each layer's weights
//! followed by its biases as little-endian `f64`.

use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{LayerShape, ModelError, ToyFcn, KERNEL};

const MAGIC: &[u8; 4] = b"TFCN";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("model file is truncated")]
    Truncated,
    #[error("unexpected bytes after the last parameter")]
    TrailingData,
    #[error("layer {layer} uses a {kernel}x{kernel} kernel; only {KERNEL}x{KERNEL} is supported")]
    UnsupportedKernel { layer: usize, kernel: u32 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub fn write_checkpoint<W: Write>(out: &mut W, model: &ToyFcn) -> io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(model.layers().len() as u32).to_le_bytes())?;
    for l in model.layers() {
        for v in [l.in_channels as u32, l.out_channels as u32, KERNEL as u32] {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    for v in model.params() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b).map_err(eof_as_truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn eof_as_truncated(e: io::Error) -> CheckpointError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        CheckpointError::Truncated
    } else {
        CheckpointError::Io(e)
    }
}

pub fn read_checkpoint<R: Read>(input: &mut R) -> Result<ToyFcn, CheckpointError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(eof_as_truncated)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let count = read_u32(input)? as usize;
    let mut layers = Vec::new();
    for layer in 0..count {
        let in_channels = read_u32(input)? as usize;
        let out_channels = read_u32(input)? as usize;
        let kernel = read_u32(input)?;
        if kernel as usize != KERNEL {
            return Err(CheckpointError::UnsupportedKernel { layer, kernel });
        }
        layers.push(LayerShape {
            in_channels,
            out_channels,
        });
    }
    let n: usize = layers.iter().map(LayerShape::param_count).sum();
    let mut params = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        input.read_exact(&mut b).map_err(eof_as_truncated)?;
        params.push(f64::from_le_bytes(b));
    }
    let mut extra = [0u8; 1];
    if input.read(&mut extra)? != 0 {
        return Err(CheckpointError::TrailingData);
    }
    Ok(ToyFcn::from_params(layers, params)?)
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &ToyFcn) -> Result<(), CheckpointError> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, model)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ToyFcn, CheckpointError> {
    let bytes = std::fs::read(path)?;
    read_checkpoint(&mut bytes.as_slice())
}
