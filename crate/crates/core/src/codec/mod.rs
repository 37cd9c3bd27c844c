//! Lossless range-image codecs and the blob container they share.
//!
//! # Container layout
//!
//! Every encoder returns a [`CompressedBlob`], serialized as
//!
//! ```text
//! offset  size  field
//! 0       4     magic "LPZB"
//! 4       1     version (1)
//! 5       1     codec id (see CodecId)
//! 6       4     header length H, u32 LE
//! 10      H     header (codec specific)
//! 10+H    ..    payload
//! ```
//!
//! Image codecs use the image header:
//!
//! ```text
//! u16 rows, u32 cols, rows x f64 elevations (radians)
//! u16 L, L x u16 laser -> row map (L = 0 when unknown)
//! u8 layout, u8 bit depth, u8 channel count C
//! C x u8 channel kind
//! C x (f64 min, f64 max)
//! varint R, R x varint validity runs (alternating, first run is invalid cells)
//! ```
//!
//! All integers are little-endian; varints are LEB128.

pub mod bits;
pub mod deflate;
pub mod dictionary;
pub(crate) mod huffman;
pub mod predictive;
pub(crate) mod wire;

pub use dictionary::{dictionary_decode, dictionary_encode, dictionary_encode_with, DictionaryOptions, RowFilter};
pub use predictive::{predictive_decode, predictive_encode};

use crate::cloud::{BitDepth, QuantizationMeta};
use crate::error::{Error, Result};
use crate::projection::{ChannelKind, GridLayout, ImageLayout, RangeImage};
use wire::{WireReader, WireWriter};

pub const BLOB_MAGIC: [u8; 4] = *b"LPZB";
pub const BLOB_VERSION: u8 = 1;
const PREAMBLE_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodecId {
    Dictionary,
    Predictive,
    VideoInter,
    VideoIntra,
    Octree,
    /// Sizes and reconstructions supplied from outside the library.
    External,
}

impl CodecId {
    pub fn code(self) -> u8 {
        match self {
            CodecId::Dictionary => 1,
            CodecId::Predictive => 2,
            CodecId::VideoInter => 3,
            CodecId::VideoIntra => 4,
            CodecId::Octree => 5,
            CodecId::External => 255,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            1 => CodecId::Dictionary,
            2 => CodecId::Predictive,
            3 => CodecId::VideoInter,
            4 => CodecId::VideoIntra,
            5 => CodecId::Octree,
            255 => CodecId::External,
            c => return Err(Error::corrupt(format!("unknown codec id {c}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedBlob {
    pub codec_id: CodecId,
    pub header: Vec<u8>,
    pub payload: Vec<u8>,
}

impl CompressedBlob {
    /// Serialized size in bytes, the compressed size used by the metrics.
    pub fn len(&self) -> usize {
        PREAMBLE_LEN + self.header.len() + self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&BLOB_MAGIC);
        out.push(BLOB_VERSION);
        out.push(self.codec_id.code());
        out.extend_from_slice(&(self.header.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.header);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < PREAMBLE_LEN {
            return Err(Error::corrupt("blob shorter than its preamble"));
        }
        if bytes[..4] != BLOB_MAGIC {
            return Err(Error::corrupt("bad blob magic"));
        }
        if bytes[4] != BLOB_VERSION {
            return Err(Error::corrupt(format!("unsupported blob version {}", bytes[4])));
        }
        let codec_id = CodecId::from_code(bytes[5])?;
        let header_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        if bytes.len() - PREAMBLE_LEN < header_len {
            return Err(Error::corrupt("header length exceeds blob"));
        }
        Ok(CompressedBlob {
            codec_id,
            header: bytes[PREAMBLE_LEN..PREAMBLE_LEN + header_len].to_vec(),
            payload: bytes[PREAMBLE_LEN + header_len..].to_vec(),
        })
    }

    pub(crate) fn expect(&self, id: CodecId) -> Result<()> {
        if self.codec_id != id {
            return Err(Error::InvalidArgument(format!("blob holds {:?} data, expected {:?}", self.codec_id, id)));
        }
        Ok(())
    }
}

/// Everything about an image except its pixels.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ImageHeader {
    pub grid: GridLayout,
    pub layout: ImageLayout,
    pub bit_depth: BitDepth,
    pub kinds: Vec<ChannelKind>,
    pub metas: Vec<QuantizationMeta>,
    pub validity: Vec<bool>,
}

impl ImageHeader {
    pub fn of(image: &RangeImage) -> Self {
        ImageHeader {
            grid: image.grid.clone(),
            layout: image.layout,
            bit_depth: image.bit_depth,
            kinds: image.kinds.clone(),
            metas: image.metas.clone(),
            validity: image.validity.clone(),
        }
    }

    pub fn cells(&self) -> usize {
        self.grid.cells()
    }

    pub fn into_image(self, channels: Vec<Vec<u16>>) -> Result<RangeImage> {
        let image = RangeImage {
            grid: self.grid,
            layout: self.layout,
            bit_depth: self.bit_depth,
            kinds: self.kinds,
            channels,
            metas: self.metas,
            validity: self.validity,
        };
        image.validate().map_err(|e| Error::corrupt(e.to_string()))?;
        Ok(image)
    }

    pub fn write(&self, w: &mut WireWriter) {
        let grid = &self.grid;
        w.u16(grid.rows() as u16);
        w.u32(grid.cols() as u32);
        for &e in grid.elevations() {
            w.f64(e);
        }
        w.u16(grid.laser_rows().len() as u16);
        for &r in grid.laser_rows() {
            w.u16(r);
        }
        w.u8(self.layout.code());
        w.u8(self.bit_depth.bits());
        w.u8(self.kinds.len() as u8);
        for k in &self.kinds {
            w.u8(k.code());
        }
        for m in &self.metas {
            w.f64(m.min_value);
            w.f64(m.max_value);
        }
        let runs = mask_runs(&self.validity);
        w.varint(runs.len() as u64);
        for r in runs {
            w.varint(r as u64);
        }
    }

    pub fn read(r: &mut WireReader<'_>) -> Result<Self> {
        let rows = r.u16()? as usize;
        let cols = r.u32()? as usize;
        if rows == 0 || cols == 0 {
            return Err(Error::corrupt("empty grid"));
        }
        let elevations = (0..rows).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let lasers = r.u16()? as usize;
        let laser_rows = (0..lasers).map(|_| r.u16()).collect::<Result<Vec<_>>>()?;
        let grid = GridLayout::from_parts(elevations, laser_rows, cols).map_err(|e| Error::corrupt(e.to_string()))?;
        let layout = ImageLayout::from_code(r.u8()?)?;
        let bit_depth = BitDepth::from_bits(r.u8()? as u32).map_err(|e| Error::corrupt(e.to_string()))?;
        let n = r.u8()? as usize;
        if n == 0 || n > 3 {
            return Err(Error::corrupt(format!("{n} channels")));
        }
        let kinds = (0..n).map(|_| ChannelKind::from_code(r.u8()?)).collect::<Result<Vec<_>>>()?;
        let mut metas = Vec::with_capacity(n);
        for _ in 0..n {
            let (min, max) = (r.f64()?, r.f64()?);
            metas.push(QuantizationMeta::new(min, max, bit_depth).map_err(|e| Error::corrupt(e.to_string()))?);
        }
        let run_count = r.varint()? as usize;
        if run_count > grid.cells() + 1 {
            return Err(Error::corrupt("too many validity runs"));
        }
        let runs = (0..run_count).map(|_| r.varint().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let validity = mask_from_runs(&runs, grid.cells())?;
        Ok(ImageHeader { grid, layout, bit_depth, kinds, metas, validity })
    }
}

/// Alternating run lengths, the first counting invalid cells (possibly 0).
pub(crate) fn mask_runs(mask: &[bool]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0;
    for &v in mask {
        if v == current {
            len += 1;
        } else {
            runs.push(len);
            current = v;
            len = 1;
        }
    }
    if len > 0 || runs.is_empty() {
        runs.push(len);
    }
    runs
}

pub(crate) fn mask_from_runs(runs: &[usize], cells: usize) -> Result<Vec<bool>> {
    let mut mask = Vec::with_capacity(cells);
    let mut value = false;
    for &r in runs {
        if mask.len() + r > cells {
            return Err(Error::corrupt("validity runs exceed the grid"));
        }
        mask.resize(mask.len() + r, value);
        value = !value;
    }
    if mask.len() != cells {
        return Err(Error::corrupt("validity runs do not cover the grid"));
    }
    Ok(mask)
}

pub(crate) fn encode_image_header(image: &RangeImage) -> Vec<u8> {
    let mut w = WireWriter::new();
    ImageHeader::of(image).write(&mut w);
    w.buf
}

pub(crate) fn decode_image_header(bytes: &[u8]) -> Result<ImageHeader> {
    let mut r = WireReader::new(bytes);
    let header = ImageHeader::read(&mut r)?;
    r.finish()?;
    Ok(header)
}

/// Planar samples: 16-bit little-endian or one byte each at 8 bits.
pub(crate) fn planes_to_bytes(channels: &[Vec<u16>], bit_depth: BitDepth) -> Vec<u8> {
    let per = if bit_depth == BitDepth::Eight { 1 } else { 2 };
    let mut out = Vec::with_capacity(channels.iter().map(|c| c.len() * per).sum());
    for plane in channels {
        match bit_depth {
            BitDepth::Eight => out.extend(plane.iter().map(|&v| v as u8)),
            BitDepth::Sixteen => {
                for &v in plane {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    out
}

pub(crate) fn bytes_to_planes(bytes: &[u8], channels: usize, cells: usize, bit_depth: BitDepth) -> Result<Vec<Vec<u16>>> {
    let per = if bit_depth == BitDepth::Eight { 1 } else { 2 };
    if bytes.len() != channels * cells * per {
        return Err(Error::corrupt(format!(
            "decoded {} sample bytes, expected {}",
            bytes.len(),
            channels * cells * per
        )));
    }
    Ok(bytes
        .chunks_exact(cells * per)
        .map(|plane| match bit_depth {
            BitDepth::Eight => plane.iter().map(|&b| b as u16).collect(),
            BitDepth::Sixteen => plane.chunks_exact(2).map(|p| u16::from_le_bytes([p[0], p[1]])).collect(),
        })
        .collect())
}
