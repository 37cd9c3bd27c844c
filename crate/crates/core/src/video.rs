//! Sequence codecs over 8-bit range images.
//!
//! Inter-frame: for every channel the planes of all frames are concatenated in
//! time order and DEFLATE-compressed as one stream, so content repeated across
//! frames becomes back-references.
//!
//! Header: `u32 N`, the full image header of frame 0, then for frames 1..N
//! the channel metas (`C x (f64, f64)`) and validity runs. Payload: per
//! channel, `u32 LE` stream length followed by the stream.
//!
//! Intra-frame: every frame is an independent predictive blob. Header:
//! `u32 N`, then `N x u32` segment lengths. Payload: the segments back to
//! back, so [`decode_frame`] reads only the segment it needs.

use crate::cloud::{BitDepth, QuantizationMeta};
use crate::codec::wire::{WireReader, WireWriter};
use crate::codec::{
    deflate, mask_from_runs, mask_runs, predictive_decode, predictive_encode, CodecId, CompressedBlob, ImageHeader,
};
use crate::error::{Error, Result};
use crate::projection::RangeImage;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<RangeImage>,
}

impl FrameSequence {
    /// Frames must share grid, layout, channel kinds and bit depth.
    pub fn new(frames: Vec<RangeImage>) -> Result<Self> {
        let first = frames.first().ok_or_else(|| Error::InvalidArgument("a sequence needs at least one frame".into()))?;
        for (i, f) in frames.iter().enumerate() {
            f.validate()?;
            if f.grid != first.grid || f.layout != first.layout || f.kinds != first.kinds || f.bit_depth != first.bit_depth
            {
                return Err(Error::InvalidArgument(format!("frame {i} differs in layout from frame 0")));
            }
        }
        Ok(FrameSequence { frames })
    }

    pub fn frames(&self) -> &[RangeImage] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn into_frames(self) -> Vec<RangeImage> {
        self.frames
    }

    fn eight_bit(&self) -> Vec<RangeImage> {
        self.frames.iter().map(RangeImage::to_eight_bit).collect()
    }
}

pub fn interframe_encode(seq: &FrameSequence) -> Result<CompressedBlob> {
    let frames = seq.eight_bit();
    let mut w = WireWriter::new();
    w.u32(frames.len() as u32);
    ImageHeader::of(&frames[0]).write(&mut w);
    for f in &frames[1..] {
        for m in &f.metas {
            w.f64(m.min_value);
            w.f64(m.max_value);
        }
        let runs = mask_runs(&f.validity);
        w.varint(runs.len() as u64);
        for r in runs {
            w.varint(r as u64);
        }
    }
    let mut payload = Vec::new();
    for c in 0..frames[0].channel_count() {
        let vector: Vec<u8> = frames.iter().flat_map(|f| f.channels[c].iter().map(|&v| v as u8)).collect();
        let stream = deflate::compress(&vector);
        payload.extend_from_slice(&(stream.len() as u32).to_le_bytes());
        payload.extend_from_slice(&stream);
    }
    Ok(CompressedBlob { codec_id: CodecId::VideoInter, header: w.buf, payload })
}

pub fn interframe_decode(blob: &CompressedBlob) -> Result<FrameSequence> {
    blob.expect(CodecId::VideoInter)?;
    let mut r = WireReader::new(&blob.header);
    let n = r.u32()? as usize;
    if n == 0 {
        return Err(Error::corrupt("empty sequence"));
    }
    let first = ImageHeader::read(&mut r)?;
    if first.bit_depth != BitDepth::Eight {
        return Err(Error::corrupt("sequence frames must be 8-bit"));
    }
    let cells = first.cells();
    let mut headers = vec![first.clone()];
    for _ in 1..n {
        let mut metas = Vec::with_capacity(first.kinds.len());
        for _ in 0..first.kinds.len() {
            let (min, max) = (r.f64()?, r.f64()?);
            metas.push(QuantizationMeta::new(min, max, BitDepth::Eight).map_err(|e| Error::corrupt(e.to_string()))?);
        }
        let count = r.varint()? as usize;
        if count > cells + 1 {
            return Err(Error::corrupt("too many validity runs"));
        }
        let runs = (0..count).map(|_| r.varint().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let validity = mask_from_runs(&runs, cells)?;
        headers.push(ImageHeader { metas, validity, ..first.clone() });
    }
    r.finish()?;

    let mut channel_vectors = Vec::with_capacity(first.kinds.len());
    let mut p = WireReader::new(&blob.payload);
    for _ in 0..first.kinds.len() {
        let len = p.u32()? as usize;
        let vector = deflate::decompress(p.take(len)?, n * cells)?;
        if vector.len() != n * cells {
            return Err(Error::corrupt(format!("channel vector has {} samples, expected {}", vector.len(), n * cells)));
        }
        channel_vectors.push(vector);
    }
    p.finish()?;

    let frames = headers
        .into_iter()
        .enumerate()
        .map(|(i, h)| {
            let channels = channel_vectors
                .iter()
                .map(|v| v[i * cells..(i + 1) * cells].iter().map(|&b| b as u16).collect())
                .collect();
            h.into_image(channels)
        })
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames)
}

pub fn intraframe_encode(seq: &FrameSequence) -> Result<CompressedBlob> {
    let mut w = WireWriter::new();
    w.u32(seq.len() as u32);
    let mut payload = Vec::new();
    for f in seq.eight_bit() {
        let segment = predictive_encode(&f)?.to_bytes();
        w.u32(segment.len() as u32);
        payload.extend_from_slice(&segment);
    }
    Ok(CompressedBlob { codec_id: CodecId::VideoIntra, header: w.buf, payload })
}

fn segment_table(blob: &CompressedBlob) -> Result<Vec<(usize, usize)>> {
    blob.expect(CodecId::VideoIntra)?;
    let mut r = WireReader::new(&blob.header);
    let n = r.u32()? as usize;
    if n == 0 || n > blob.header.len() / 4 {
        return Err(Error::corrupt("bad frame count"));
    }
    let mut table = Vec::with_capacity(n);
    let mut offset = 0usize;
    for _ in 0..n {
        let len = r.u32()? as usize;
        table.push((offset, len));
        offset = offset.checked_add(len).ok_or_else(|| Error::corrupt("segment table overflows"))?;
    }
    r.finish()?;
    if offset != blob.payload.len() {
        return Err(Error::corrupt("segment table does not match the payload size"));
    }
    Ok(table)
}

pub fn intraframe_frame_count(blob: &CompressedBlob) -> Result<usize> {
    Ok(segment_table(blob)?.len())
}

/// Decodes frame `index` without touching other frames' segments.
pub fn decode_frame(blob: &CompressedBlob, index: usize) -> Result<RangeImage> {
    let table = segment_table(blob)?;
    let &(offset, len) = table.get(index).ok_or(Error::FrameIndex { index, len: table.len() })?;
    let segment = CompressedBlob::from_bytes(&blob.payload[offset..offset + len])?;
    predictive_decode(&segment)
}

pub fn intraframe_decode(blob: &CompressedBlob) -> Result<FrameSequence> {
    let n = intraframe_frame_count(blob)?;
    FrameSequence::new((0..n).map(|i| decode_frame(blob, i)).collect::<Result<Vec<_>>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{dictionary_encode_with, DictionaryOptions, RowFilter};
    use crate::codec::test_support::random_image;
    use crate::projection::ChannelKind;
    use rand::{Rng, SeedableRng};

    fn random_sequence(seed: u64) -> FrameSequence {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let base = random_image(seed).to_eight_bit();
        let n = rng.random_range(1..5);
        let frames = (0..n)
            .map(|_| {
                let mut f = base.clone();
                for (i, v) in f.validity.iter_mut().enumerate() {
                    *v = rng.random_bool(0.7);
                    for c in &mut f.channels {
                        c[i] = if *v { rng.random_range(0..=255) } else { 0 };
                    }
                }
                for m in &mut f.metas {
                    m.max_value += rng.random_range(0.0..1.0);
                }
                f
            })
            .collect();
        FrameSequence::new(frames).unwrap()
    }

    #[test]
    fn inter_roundtrip() {
        for seed in 0..60 {
            let seq = random_sequence(seed);
            let blob = interframe_encode(&seq).unwrap();
            assert_eq!(interframe_decode(&blob).unwrap(), seq, "seed {seed}");
        }
    }

    #[test]
    fn intra_roundtrip_and_random_access() {
        for seed in 0..60 {
            let seq = random_sequence(seed);
            let blob = intraframe_encode(&seq).unwrap();
            assert_eq!(intraframe_decode(&blob).unwrap(), seq);
            for (i, f) in seq.frames().iter().enumerate() {
                assert_eq!(&decode_frame(&blob, i).unwrap(), f);
            }
            assert!(matches!(decode_frame(&blob, seq.len()), Err(Error::FrameIndex { .. })));
        }
    }

    #[test]
    fn sixteen_bit_input_keeps_the_high_byte() {
        let mut img = random_image(3);
        img.bit_depth = BitDepth::Sixteen;
        for m in &mut img.metas {
            m.bit_depth = BitDepth::Sixteen;
        }
        for c in &mut img.channels {
            for v in c.iter_mut() {
                *v = v.wrapping_mul(257);
            }
        }
        let seq = FrameSequence::new(vec![img.clone()]).unwrap();
        let back = interframe_decode(&interframe_encode(&seq).unwrap()).unwrap();
        assert_eq!(back.frames()[0], img.to_eight_bit());
    }

    #[test]
    fn repeated_frames_grow_sublinearly() {
        let mut img = random_image(11).to_eight_bit();
        img.channels.truncate(1);
        img.metas.truncate(1);
        img.kinds = vec![ChannelKind::Range];
        let one = interframe_encode(&FrameSequence::new(vec![img.clone()]).unwrap()).unwrap();
        let ten = interframe_encode(&FrameSequence::new(vec![img.clone(); 10]).unwrap()).unwrap();
        assert!(ten.payload.len() < 2 * one.payload.len());
        // a single one-channel frame is the unfiltered dictionary stream behind a length prefix
        let opts = DictionaryOptions { filter: RowFilter::None, ..Default::default() };
        let dict = dictionary_encode_with(&img, opts).unwrap();
        assert_eq!(&one.payload[4..], &dict.payload[..]);
    }

    #[test]
    fn corrupt_segment_is_isolated() {
        let seq = random_sequence(5);
        let seq = FrameSequence::new(vec![seq.frames()[0].clone(); 3]).unwrap();
        let mut blob = intraframe_encode(&seq).unwrap();
        let table = segment_table(&blob).unwrap();
        let (off, len) = table[1];
        for b in &mut blob.payload[off + 10..off + len] {
            *b ^= 0xA5;
        }
        assert_eq!(decode_frame(&blob, 0).unwrap(), seq.frames()[0]);
        assert_eq!(decode_frame(&blob, 2).unwrap(), seq.frames()[2]);
        assert_ne!(decode_frame(&blob, 1).ok().as_ref(), Some(&seq.frames()[1]));
    }

    #[test]
    fn constant_sequence_has_equal_segments() {
        let f = random_image(8).to_eight_bit();
        let blob = intraframe_encode(&FrameSequence::new(vec![f; 4]).unwrap()).unwrap();
        let table = segment_table(&blob).unwrap();
        assert!(table.iter().all(|&(_, l)| l == table[0].1));
    }

    #[test]
    fn mixed_layouts_are_rejected() {
        let a = random_image(1);
        let mut b = a.clone();
        b.grid = crate::projection::GridLayout::for_elevations(&[0.0], a.cols() + 1);
        b.channels = vec![vec![0; a.cols() + 1]; a.channel_count()];
        b.validity = vec![false; a.cols() + 1];
        assert!(FrameSequence::new(vec![a, b]).is_err());
        assert!(FrameSequence::new(vec![]).is_err());
    }
}
