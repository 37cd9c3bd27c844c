//! Dictionary (LZ77 + Huffman) image codec.
//!
//! Header: the image header followed by one filter byte. Payload: a raw
//! DEFLATE stream over the planar samples (optionally row-filtered).

use crate::cloud::BitDepth;
use crate::codec::wire::{WireReader, WireWriter};
use crate::codec::{bytes_to_planes, deflate, planes_to_bytes, CodecId, CompressedBlob, ImageHeader};
use crate::error::{Error, Result};
use crate::projection::RangeImage;

/// Reversible per-row prediction applied to sample values (mod 2^n) before
/// DEFLATE, in the manner of PNG filters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum RowFilter {
    None,
    /// Difference to the left neighbour.
    Sub,
    /// Paeth predictor over left, above and above-left.
    #[default]
    Paeth,
}

impl RowFilter {
    fn code(self) -> u8 {
        match self {
            RowFilter::None => 0,
            RowFilter::Sub => 1,
            RowFilter::Paeth => 4,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(RowFilter::None),
            1 => Ok(RowFilter::Sub),
            4 => Ok(RowFilter::Paeth),
            c => Err(Error::corrupt(format!("unknown row filter {c}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DictionaryOptions {
    pub filter: RowFilter,
    pub deflate: deflate::DeflateOptions,
}

fn paeth(a: i32, b: i32, c: i32) -> i32 {
    let p = a + b - c;
    let (pa, pb, pc) = ((p - a).abs(), (p - b).abs(), (p - c).abs());
    if pa <= pb && pa <= pc {
        a
    } else if pb <= pc {
        b
    } else {
        c
    }
}

#[inline]
fn predict(filter: RowFilter, row: &[u16], above: Option<&[u16]>, x: usize) -> u16 {
    let a = if x > 0 { row[x - 1] } else { 0 };
    match filter {
        RowFilter::None => 0,
        RowFilter::Sub => a,
        RowFilter::Paeth => {
            let (b, c) = match above {
                Some(up) => (up[x], if x > 0 { up[x - 1] } else { 0 }),
                None => (0, 0),
            };
            paeth(a as i32, b as i32, c as i32) as u16
        }
    }
}

fn apply_filter(filter: RowFilter, plane: &[u16], cols: usize, mask: u16) -> Vec<u16> {
    let mut out = Vec::with_capacity(plane.len());
    for (y, row) in plane.chunks_exact(cols).enumerate() {
        let above = y.checked_sub(1).map(|u| &plane[u * cols..y * cols]);
        for x in 0..cols {
            out.push(row[x].wrapping_sub(predict(filter, row, above, x)) & mask);
        }
    }
    out
}

fn undo_filter(filter: RowFilter, residuals: &mut [u16], cols: usize, mask: u16) {
    for y in 0..residuals.len() / cols {
        let (done, rest) = residuals.split_at_mut(y * cols);
        let above = y.checked_sub(1).map(|u| &done[u * cols..]);
        let row = &mut rest[..cols];
        for x in 0..cols {
            let p = predict(filter, row, above, x);
            row[x] = row[x].wrapping_add(p) & mask;
        }
    }
}

pub fn dictionary_encode(image: &RangeImage) -> Result<CompressedBlob> {
    dictionary_encode_with(image, DictionaryOptions::default())
}

pub fn dictionary_encode_with(image: &RangeImage, opts: DictionaryOptions) -> Result<CompressedBlob> {
    image.validate()?;
    let mut w = WireWriter::new();
    ImageHeader::of(image).write(&mut w);
    w.u8(opts.filter.code());
    let mask = image.bit_depth.max_code() as u16;
    let bytes = if opts.filter == RowFilter::None {
        planes_to_bytes(&image.channels, image.bit_depth)
    } else {
        let filtered: Vec<Vec<u16>> =
            image.channels.iter().map(|p| apply_filter(opts.filter, p, image.cols(), mask)).collect();
        planes_to_bytes(&filtered, image.bit_depth)
    };
    Ok(CompressedBlob { codec_id: CodecId::Dictionary, header: w.buf, payload: deflate::compress_with(&bytes, opts.deflate) })
}

pub fn dictionary_decode(blob: &CompressedBlob) -> Result<RangeImage> {
    blob.expect(CodecId::Dictionary)?;
    let mut r = WireReader::new(&blob.header);
    let header = ImageHeader::read(&mut r)?;
    let filter = RowFilter::from_code(r.u8()?)?;
    r.finish()?;
    let per = if header.bit_depth == BitDepth::Eight { 1 } else { 2 };
    let n = header.kinds.len();
    let bytes = deflate::decompress(&blob.payload, n * header.cells() * per)?;
    let mut planes = bytes_to_planes(&bytes, n, header.cells(), header.bit_depth)?;
    if filter != RowFilter::None {
        let mask = header.bit_depth.max_code() as u16;
        for p in &mut planes {
            undo_filter(filter, p, header.grid.cols(), mask);
        }
    }
    header.into_image(planes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::QuantizationMeta;
    use crate::codec::test_support::random_image;
    use crate::projection::{ChannelKind, GridLayout, ImageLayout};
    use rand::{Rng, SeedableRng};

    fn blank(rows: usize, cols: usize, channels: usize) -> RangeImage {
        let elevations: Vec<f64> = (0..rows).map(|r| -(r as f64) * 0.03).collect();
        RangeImage {
            grid: GridLayout::for_elevations(&elevations, cols),
            layout: ImageLayout::CartesianSingle,
            bit_depth: BitDepth::Sixteen,
            kinds: vec![ChannelKind::X; channels],
            channels: vec![vec![0; rows * cols]; channels],
            metas: vec![QuantizationMeta::new(0.0, 1.0, BitDepth::Sixteen).unwrap(); channels],
            validity: vec![true; rows * cols],
        }
    }

    #[test]
    fn roundtrip_random_images_all_filters() {
        for seed in 0..150 {
            let img = random_image(seed);
            for filter in [RowFilter::None, RowFilter::Sub, RowFilter::Paeth] {
                let blob = dictionary_encode_with(&img, DictionaryOptions { filter, ..Default::default() }).unwrap();
                let back = dictionary_decode(&CompressedBlob::from_bytes(&blob.to_bytes()).unwrap()).unwrap();
                assert_eq!(back, img, "seed {seed} filter {filter:?}");
            }
        }
    }

    #[test]
    fn all_zero_image_collapses() {
        let img = blank(16, 1800, 1);
        let blob = dictionary_encode(&img).unwrap();
        assert!(blob.payload.len() * 100 <= img.plane_bytes(), "{} bytes", blob.payload.len());
        // frozen: 57600 zero bytes -> literal, ~223 max-length matches, end of block
        assert_eq!(blob.payload.len(), 72);
    }

    #[test]
    fn random_pixels_fall_back_to_stored() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut img = blank(16, 1800, 1);
        img.channels[0] = (0..16 * 1800).map(|_| rng.random()).collect();
        let blob = dictionary_encode(&img).unwrap();
        assert!(blob.payload.len() as f64 >= img.plane_bytes() as f64 * 0.99);
        assert_eq!(dictionary_decode(&blob).unwrap(), img);
    }

    #[test]
    fn corrupted_payload_errors_or_differs_never_panics() {
        let img = random_image(7);
        let blob = dictionary_encode(&img).unwrap();
        for i in 0..blob.payload.len() {
            let mut bad = blob.clone();
            bad.payload[i] ^= 0x5A;
            let _ = dictionary_decode(&bad);
        }
        let mut truncated = blob.clone();
        truncated.payload.truncate(blob.payload.len() / 2);
        assert!(dictionary_decode(&truncated).is_err());
    }

    #[test]
    fn wrong_codec_is_rejected() {
        let mut blob = dictionary_encode(&random_image(1)).unwrap();
        blob.codec_id = CodecId::Predictive;
        assert!(dictionary_decode(&blob).is_err());
    }
}
