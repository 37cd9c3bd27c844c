//! Predictive image codec: median edge detector plus Golomb-Rice codes.
//!
//! Header: the image header. Payload: one bit stream (LSB-first) holding every
//! channel in order, rows top to bottom. Each residual `x - pred` is reduced
//! mod 2^n into the signed range, folded to `2e` / `-2e-1`, and Rice coded
//! with a per-row parameter `k` taken from the previous row of the same
//! channel: the smallest `k` with `2^k >= mean|e| + 1`. The first row of each
//! channel uses `k = 0`. A unary prefix of [`ESCAPE_PREFIX`] ones is followed
//! by the folded value in `n` raw bits instead of the remainder.

use crate::cloud::BitDepth;
use crate::codec::bits::{BitReader, BitWriter};
use crate::codec::{decode_image_header, encode_image_header, CodecId, CompressedBlob};
use crate::error::{Error, Result};
use crate::projection::RangeImage;

pub const ESCAPE_PREFIX: u32 = 24;

/// Median edge detector over left `a`, above `b` and above-left `c`.
#[inline]
pub fn med(a: u16, b: u16, c: u16) -> u16 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if c >= hi {
        lo
    } else if c <= lo {
        hi
    } else {
        (a as u32 + b as u32 - c as u32) as u16
    }
}

#[inline]
fn prediction(plane: &[u16], cols: usize, x: usize, y: usize) -> u16 {
    let i = y * cols + x;
    match (x, y) {
        (0, 0) => 0,
        (_, 0) => plane[i - 1],
        (0, _) => plane[i - cols],
        _ => med(plane[i - 1], plane[i - cols], plane[i - cols - 1]),
    }
}

/// Row parameter from the previous row's residual magnitudes.
#[inline]
fn rice_k(abs_sum: u64, cols: usize, bits: u32) -> u32 {
    let target = abs_sum + cols as u64;
    let mut k = 0;
    while ((cols as u64) << k) < target && k < bits {
        k += 1;
    }
    k
}

#[inline]
fn fold(e: i32) -> u32 {
    if e >= 0 {
        (e as u32) << 1
    } else {
        ((-e) as u32) * 2 - 1
    }
}

#[inline]
fn unfold(m: u32) -> i32 {
    if m & 1 == 0 {
        (m >> 1) as i32
    } else {
        -(((m + 1) >> 1) as i32)
    }
}

/// Residual reduced into [-2^(n-1), 2^(n-1)).
#[inline]
fn wrap_residual(x: u16, pred: u16, bits: u32) -> i32 {
    let modulus = 1i32 << bits;
    let mut e = (x as i32 - pred as i32).rem_euclid(modulus);
    if e >= modulus / 2 {
        e -= modulus;
    }
    e
}

pub fn predictive_encode(image: &RangeImage) -> Result<CompressedBlob> {
    image.validate()?;
    let (rows, cols) = (image.rows(), image.cols());
    let bits = image.bit_depth.bits() as u32;
    let mut w = BitWriter::with_capacity(image.plane_bytes() / 2 + 16);
    for plane in &image.channels {
        let mut k = 0;
        for y in 0..rows {
            let mut abs_sum = 0u64;
            for x in 0..cols {
                let e = wrap_residual(plane[y * cols + x], prediction(plane, cols, x, y), bits);
                abs_sum += e.unsigned_abs() as u64;
                let m = fold(e);
                let q = m >> k;
                if q < ESCAPE_PREFIX {
                    // q ones then a zero
                    w.write((1u32 << q) - 1, q + 1);
                    w.write(m, k);
                } else {
                    w.write((1u32 << ESCAPE_PREFIX) - 1, ESCAPE_PREFIX);
                    w.write(m, bits);
                }
            }
            k = rice_k(abs_sum, cols, bits);
        }
    }
    Ok(CompressedBlob { codec_id: CodecId::Predictive, header: encode_image_header(image), payload: w.finish() })
}

pub fn predictive_decode(blob: &CompressedBlob) -> Result<RangeImage> {
    blob.expect(CodecId::Predictive)?;
    let header = decode_image_header(&blob.header)?;
    let (rows, cols) = (header.grid.rows(), header.grid.cols());
    let bits = header.bit_depth.bits() as u32;
    let mask = header.bit_depth.max_code() as i32;
    let mut r = BitReader::new(&blob.payload);
    let mut channels = Vec::with_capacity(header.kinds.len());
    for _ in 0..header.kinds.len() {
        let mut plane = vec![0u16; rows * cols];
        let mut k = 0;
        for y in 0..rows {
            let mut abs_sum = 0u64;
            for x in 0..cols {
                let q = r.peek(ESCAPE_PREFIX).trailing_ones();
                let m = if q < ESCAPE_PREFIX {
                    r.consume(q + 1)?;
                    (q << k) | r.read(k)?
                } else {
                    r.consume(ESCAPE_PREFIX)?;
                    r.read(bits)?
                };
                if m > mask as u32 {
                    return Err(Error::corrupt("residual outside the sample range"));
                }
                let e = unfold(m);
                abs_sum += e.unsigned_abs() as u64;
                let pred = prediction(&plane, cols, x, y) as i32;
                plane[y * cols + x] = ((pred + e) & mask) as u16;
            }
            k = rice_k(abs_sum, cols, bits);
        }
        channels.push(plane);
    }
    if r.byte_position() < blob.payload.len() {
        return Err(Error::corrupt("trailing bytes after the last residual"));
    }
    header.into_image(channels)
}

/// Residuals the encoder would emit, per channel, row-major.
pub fn residuals(image: &RangeImage) -> Vec<Vec<i32>> {
    let (rows, cols) = (image.rows(), image.cols());
    let bits = match image.bit_depth {
        BitDepth::Eight => 8,
        BitDepth::Sixteen => 16,
    };
    image
        .channels
        .iter()
        .map(|plane| {
            (0..rows * cols)
                .map(|i| wrap_residual(plane[i], prediction(plane, cols, i % cols, i / cols), bits))
                .collect()
        })
        .collect()
}
