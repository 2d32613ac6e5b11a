//! Binary PNM (P5 greyscale / P6 colour) reading and writing.
//!
//! Samples are one byte when `maxval < 256`, otherwise two bytes in
//! big-endian order.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{BoundaryGrid, GridError, LabelGrid, ObjectGrid, RealGrid};

#[derive(Debug, Error)]
pub enum PnmError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed PNM header: {0}")]
    MalformedHeader(String),
    #[error("sample depth mismatch: maxval {maxval} implies {expected} payload bytes, found {actual}")]
    DepthMismatch {
        maxval: u16,
        expected: usize,
        actual: usize,
    },
    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("trailing data after payload: {extra} bytes")]
    TrailingData { extra: usize },
    #[error("sample {value} exceeds maxval {maxval}")]
    SampleExceedsMaxval { value: u16, maxval: u16 },
    #[error("expected a {expected}-channel image, found {actual} channels")]
    ChannelMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Raw PNM raster: `channels` is 1 (P5) or 3 (P6).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

impl Raster {
    fn bytes_per_sample(maxval: u16) -> usize {
        if maxval < 256 {
            1
        } else {
            2
        }
    }
}

/// Grids that persist as PNM rasters.
pub trait PnmGrid: Sized {
    fn to_raster(&self) -> Raster;
    fn from_raster(raster: Raster) -> Result<Self, PnmError>;
}

fn expect_channels(raster: &Raster, expected: usize) -> Result<(), PnmError> {
    if raster.channels != expected {
        return Err(PnmError::ChannelMismatch {
            expected,
            actual: raster.channels,
        });
    }
    Ok(())
}

fn gray_maxval(max: u16) -> u16 {
    if max <= 255 {
        255
    } else {
        65535
    }
}

impl PnmGrid for LabelGrid {
    fn to_raster(&self) -> Raster {
        let max = self.data.iter().copied().max().unwrap_or(0);
        Raster {
            height: self.height,
            width: self.width,
            channels: 1,
            maxval: gray_maxval(max),
            samples: self.data.clone(),
        }
    }

    fn from_raster(raster: Raster) -> Result<Self, PnmError> {
        expect_channels(&raster, 1)?;
        Ok(LabelGrid::new(raster.height, raster.width, raster.samples)?)
    }
}

impl PnmGrid for ObjectGrid {
    fn to_raster(&self) -> Raster {
        Raster {
            height: self.height,
            width: self.width,
            channels: 1,
            maxval: gray_maxval(self.max_id()),
            samples: self.data.clone(),
        }
    }

    fn from_raster(raster: Raster) -> Result<Self, PnmError> {
        expect_channels(&raster, 1)?;
        Ok(ObjectGrid::new(raster.height, raster.width, raster.samples)?)
    }
}

impl PnmGrid for BoundaryGrid {
    fn to_raster(&self) -> Raster {
        Raster {
            height: self.height,
            width: self.width,
            channels: 1,
            maxval: 255,
            samples: self.data.iter().map(|&v| u16::from(v)).collect(),
        }
    }

    fn from_raster(raster: Raster) -> Result<Self, PnmError> {
        expect_channels(&raster, 1)?;
        if let Some(&value) = raster.samples.iter().find(|&&v| v > 255) {
            return Err(PnmError::SampleExceedsMaxval { value, maxval: 255 });
        }
        let data = raster.samples.iter().map(|&v| v as u8).collect();
        Ok(BoundaryGrid::new(raster.height, raster.width, data)?)
    }
}

/// Images are stored as 8-bit samples; intensities are scaled to `[0, 1]`.
impl PnmGrid for RealGrid {
    fn to_raster(&self) -> Raster {
        Raster {
            height: self.height,
            width: self.width,
            channels: self.channels,
            maxval: 255,
            samples: self
                .data
                .iter()
                .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u16)
                .collect(),
        }
    }

    fn from_raster(raster: Raster) -> Result<Self, PnmError> {
        let scale = f64::from(raster.maxval);
        let data = raster.samples.iter().map(|&v| f64::from(v) / scale).collect();
        Ok(RealGrid::new(raster.height, raster.width, raster.channels, data)?)
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, PnmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PnmError::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PnmError::MalformedHeader(format!("{what} out of range")))
    }
}

/// Decodes a binary PNM byte stream.
pub fn read_pnm(bytes: &[u8]) -> Result<Raster, PnmError> {
    if bytes.len() < 2 {
        return Err(PnmError::MalformedHeader("missing magic number".into()));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(PnmError::MalformedHeader(format!(
                "unsupported magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PnmError::MalformedHeader("zero image dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(PnmError::MalformedHeader(format!("maxval {maxval} not in 1..=65535")));
    }
    let maxval = maxval as u16;
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(PnmError::MalformedHeader(
                "expected single whitespace after maxval".into(),
            ))
        }
    }

    let count = width * height * channels;
    let bps = Raster::bytes_per_sample(maxval);
    let expected = count * bps;
    let payload = &bytes[cur.pos..];
    if payload.len() != expected {
        let other = if bps == 1 { count * 2 } else { count };
        if payload.len() == other {
            return Err(PnmError::DepthMismatch {
                maxval,
                expected,
                actual: payload.len(),
            });
        }
        if payload.len() < expected {
            return Err(PnmError::Truncated {
                expected,
                actual: payload.len(),
            });
        }
        return Err(PnmError::TrailingData {
            extra: payload.len() - expected,
        });
    }

    let samples: Vec<u16> = if bps == 1 {
        payload.iter().map(|&b| u16::from(b)).collect()
    } else {
        payload
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    if let Some(&value) = samples.iter().find(|&&v| v > maxval) {
        return Err(PnmError::SampleExceedsMaxval { value, maxval });
    }
    Ok(Raster {
        height,
        width,
        channels,
        maxval,
        samples,
    })
}

/// Encodes a raster as binary PNM.
pub fn write_pnm<W: Write>(mut out: W, raster: &Raster) -> Result<(), PnmError> {
    let magic = match raster.channels {
        1 => "P5",
        3 => "P6",
        n => return Err(PnmError::ChannelMismatch { expected: 3, actual: n }),
    };
    if let Some(&value) = raster.samples.iter().find(|&&v| v > raster.maxval) {
        return Err(PnmError::SampleExceedsMaxval {
            value,
            maxval: raster.maxval,
        });
    }
    let mut buf = format!("{magic}\n{} {}\n{}\n", raster.width, raster.height, raster.maxval).into_bytes();
    if Raster::bytes_per_sample(raster.maxval) == 1 {
        buf.extend(raster.samples.iter().map(|&v| v as u8));
    } else {
        for &v in &raster.samples {
            buf.extend_from_slice(&v.to_be_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn save_pnm<G: PnmGrid>(path: impl AsRef<Path>, grid: &G) -> Result<(), PnmError> {
    let file = fs::File::create(path)?;
    write_pnm(io::BufWriter::new(file), &grid.to_raster())
}

pub fn load_pnm<G: PnmGrid>(path: impl AsRef<Path>) -> Result<G, PnmError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    G::from_raster(read_pnm(&bytes)?)
}
