//! Raw probability-grid files.
//!
//! Layout: `b"PGRD"`, then `u32` height, width, channels (little-endian),
//! followed by `H * W * C` little-endian `f64` values in grid order.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{GridError, ProbGrid, RealGrid};

const MAGIC: &[u8; 4] = b"PGRD";
const HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum PgrdError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {0:?}, expected \"PGRD\"")]
    BadMagic([u8; 4]),
    #[error("truncated probability grid: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("trailing data after probability grid: {extra} bytes")]
    TrailingData { extra: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

pub fn write_pgrd_to<W: Write>(mut out: W, grid: &ProbGrid) -> Result<(), PgrdError> {
    let mut buf = Vec::with_capacity(HEADER_LEN + grid.data().len() * 8);
    buf.extend_from_slice(MAGIC);
    for dim in [grid.height(), grid.width(), grid.channels()] {
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for v in grid.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_pgrd_from(bytes: &[u8]) -> Result<ProbGrid, PgrdError> {
    if bytes.len() < HEADER_LEN {
        return Err(PgrdError::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if &magic != MAGIC {
        return Err(PgrdError::BadMagic(magic));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (height, width, channels) = (dim(0), dim(1), dim(2));
    let expected = HEADER_LEN + height * width * channels * 8;
    if bytes.len() < expected {
        return Err(PgrdError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(PgrdError::TrailingData {
            extra: bytes.len() - expected,
        });
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(ProbGrid::new(RealGrid::new(height, width, channels, data)?)?)
}

pub fn write_pgrd(path: impl AsRef<Path>, grid: &ProbGrid) -> Result<(), PgrdError> {
    write_pgrd_to(io::BufWriter::new(fs::File::create(path)?), grid)
}

pub fn read_pgrd(path: impl AsRef<Path>) -> Result<ProbGrid, PgrdError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    read_pgrd_from(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let grid = RealGrid::new(1, 2, 3, vec![0.1, 0.2, 0.7, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap();
        let p = ProbGrid::new(grid).unwrap();
        let mut buf = Vec::new();
        write_pgrd_to(&mut buf, &p).unwrap();
        assert_eq!(&buf[..4], b"PGRD");
        assert_eq!(&buf[4..16], &[1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(buf.len(), 16 + 6 * 8);
        assert_eq!(read_pgrd_from(&buf).unwrap(), p);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(read_pgrd_from(b"PGRD"), Err(PgrdError::Truncated { .. })));
        let mut buf = b"XXXX".to_vec();
        buf.extend_from_slice(&[0; 12]);
        assert!(matches!(read_pgrd_from(&buf), Err(PgrdError::BadMagic(_))));
        let mut buf = b"PGRD".to_vec();
        for d in [1u32, 1, 2] {
            buf.extend_from_slice(&d.to_le_bytes());
        }
        buf.extend_from_slice(&0.5f64.to_le_bytes());
        assert!(matches!(read_pgrd_from(&buf), Err(PgrdError::Truncated { .. })));
    }
}
