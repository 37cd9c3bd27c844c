//! Raw DEFLATE (RFC 1951) compressor and decompressor.
//!
//! The compressor runs LZ77 over a 32 KiB sliding window with hash chains and
//! one-step lazy matching, then codes each block with whichever of dynamic
//! Huffman, fixed Huffman or stored representation is smallest.

use crate::codec::bits::{BitReader, BitWriter};
use crate::codec::huffman::{canonical_codes, code_lengths, Decoder};
use crate::error::{Error, Result};

pub const WINDOW_SIZE: usize = 32 * 1024;
const WINDOW_MASK: usize = WINDOW_SIZE - 1;
const MIN_MATCH: usize = 3;
const MAX_MATCH: usize = 258;
const HASH_BITS: u32 = 15;
const HASH_SIZE: usize = 1 << HASH_BITS;
const END_OF_BLOCK: usize = 256;
const TOKENS_PER_BLOCK: usize = 1 << 15;
const MAX_STORED: usize = 65535;

const LENGTH_BASE: [u16; 29] = [
    3, 4, 5, 6, 7, 8, 9, 10, 11, 13, 15, 17, 19, 23, 27, 31, 35, 43, 51, 59, 67, 83, 99, 115, 131,
    163, 195, 227, 258,
];
const LENGTH_EXTRA: [u8; 29] =
    [0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0];
const DIST_BASE: [u16; 30] = [
    1, 2, 3, 4, 5, 7, 9, 13, 17, 25, 33, 49, 65, 97, 129, 193, 257, 385, 513, 769, 1025, 1537,
    2049, 3073, 4097, 6145, 8193, 12289, 16385, 24577,
];
const DIST_EXTRA: [u8; 30] =
    [0, 0, 0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13, 13];
/// Order in which code-length code lengths are transmitted.
const CLEN_ORDER: [usize; 19] = [16, 17, 18, 0, 8, 7, 9, 6, 10, 5, 11, 4, 12, 3, 13, 2, 14, 1, 15];

/// Match-finder effort.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeflateOptions {
    /// Chain links followed per search.
    pub max_chain: usize,
    /// Stop searching once a match this long is found.
    pub nice_length: usize,
    /// Skip the lazy look-ahead when the current match is at least this long.
    pub lazy_limit: usize,
}

impl Default for DeflateOptions {
    fn default() -> Self {
        DeflateOptions { max_chain: 4, nice_length: 32, lazy_limit: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Token {
    Literal(u8),
    Match { len: u16, dist: u16 },
}

/// Length symbol (257..=285) for every match length 0..=258.
const LENGTH_SYMBOL: [u16; MAX_MATCH + 1] = {
    let mut t = [0u16; MAX_MATCH + 1];
    let mut code = 0;
    let mut len = MIN_MATCH;
    while len <= MAX_MATCH {
        while code + 1 < LENGTH_BASE.len() && LENGTH_BASE[code + 1] as usize <= len {
            code += 1;
        }
        t[len] = 257 + code as u16;
        len += 1;
    }
    t
};

/// Distance symbol for distances 1..=256 by `dist - 1`, and for larger
/// distances by `256 + ((dist - 1) >> 7)`.
const DIST_SYMBOL: [u8; 512] = {
    let mut t = [0u8; 512];
    let mut code = 0;
    let mut d = 1;
    while d <= WINDOW_SIZE {
        while code + 1 < DIST_BASE.len() && DIST_BASE[code + 1] as usize <= d {
            code += 1;
        }
        let slot = if d <= 256 { d - 1 } else { 256 + ((d - 1) >> 7) };
        t[slot] = code as u8;
        d += 1;
    }
    t
};

#[inline]
fn length_symbol(len: usize) -> usize {
    LENGTH_SYMBOL[len] as usize
}

#[inline]
fn dist_symbol(dist: usize) -> usize {
    let slot = if dist <= 256 { dist - 1 } else { 256 + ((dist - 1) >> 7) };
    DIST_SYMBOL[slot] as usize
}

struct MatchFinder<'a> {
    data: &'a [u8],
    head: Vec<i32>,
    prev: Vec<i32>,
    opts: DeflateOptions,
}

impl<'a> MatchFinder<'a> {
    fn new(data: &'a [u8], opts: DeflateOptions) -> Self {
        MatchFinder { data, head: vec![-1; HASH_SIZE], prev: vec![-1; WINDOW_SIZE], opts }
    }

    #[inline]
    fn hash(&self, pos: usize) -> usize {
        let d = self.data;
        let v = (d[pos] as u32) << 16 | (d[pos + 1] as u32) << 8 | d[pos + 2] as u32;
        (v.wrapping_mul(0x9E37_79B1) >> (32 - HASH_BITS)) as usize
    }

    #[inline]
    fn insert(&mut self, pos: usize) {
        if pos + MIN_MATCH > self.data.len() {
            return;
        }
        let h = self.hash(pos);
        self.prev[pos & WINDOW_MASK] = self.head[h];
        self.head[h] = pos as i32;
    }

    /// Longest earlier match for `pos`, as (length, distance). Length 0 if
    /// none reaches [`MIN_MATCH`].
    fn find(&self, pos: usize) -> (usize, usize) {
        let data = self.data;
        if pos + MIN_MATCH > data.len() {
            return (0, 0);
        }
        let max_len = MAX_MATCH.min(data.len() - pos);
        let mut best_len = MIN_MATCH - 1;
        let mut best_dist = 0;
        let mut cand = self.head[self.hash(pos)];
        let mut chain = self.opts.max_chain;
        while cand >= 0 && chain > 0 {
            let c = cand as usize;
            let dist = pos - c;
            if dist > WINDOW_SIZE || dist == 0 {
                break;
            }
            if data[c + best_len] == data[pos + best_len] && data[c] == data[pos] {
                let len = common_prefix(&data[c..c + max_len], &data[pos..pos + max_len]);
                if len > best_len {
                    best_len = len;
                    best_dist = dist;
                    if len >= self.opts.nice_length || len == max_len {
                        break;
                    }
                }
            }
            let next = self.prev[c & WINDOW_MASK];
            // ring entries overwritten by newer positions break the chain
            if next >= cand {
                break;
            }
            cand = next;
            chain -= 1;
        }
        if best_len >= MIN_MATCH {
            (best_len, best_dist)
        } else {
            (0, 0)
        }
    }
}

/// Length of the common prefix of two equal-length slices, eight bytes at a time.
#[inline]
fn common_prefix(a: &[u8], b: &[u8]) -> usize {
    let n = a.len().min(b.len());
    let mut i = 0;
    while i + 8 <= n {
        let x = u64::from_le_bytes(a[i..i + 8].try_into().unwrap());
        let y = u64::from_le_bytes(b[i..i + 8].try_into().unwrap());
        let diff = x ^ y;
        if diff != 0 {
            return i + (diff.trailing_zeros() / 8) as usize;
        }
        i += 8;
    }
    while i < n && a[i] == b[i] {
        i += 1;
    }
    i
}

fn tokenize(data: &[u8], opts: DeflateOptions) -> Vec<Token> {
    let mut mf = MatchFinder::new(data, opts);
    let mut tokens = Vec::with_capacity(data.len() / 2 + 16);
    let n = data.len();
    let mut i = 0;
    let mut cur = mf.find(0);
    while i < n {
        let (len, dist) = cur;
        if len >= MIN_MATCH {
            mf.insert(i);
            if len < opts.lazy_limit && i + 1 < n {
                let next = mf.find(i + 1);
                if next.0 > len {
                    tokens.push(Token::Literal(data[i]));
                    i += 1;
                    cur = next;
                    continue;
                }
            }
            tokens.push(Token::Match { len: len as u16, dist: dist as u16 });
            // long matches only index their tail, which keeps runs at distance 1
            let skip_to = if len <= opts.lazy_limit { i + 1 } else { i + len - 1 };
            for p in skip_to..i + len {
                mf.insert(p);
            }
            i += len;
        } else {
            tokens.push(Token::Literal(data[i]));
            mf.insert(i);
            i += 1;
        }
        cur = if i < n { mf.find(i) } else { (0, 0) };
    }
    tokens
}

fn fixed_lengths() -> (Vec<u8>, Vec<u8>) {
    let mut lit = vec![0u8; 288];
    lit[..144].fill(8);
    lit[144..256].fill(9);
    lit[256..280].fill(7);
    lit[280..288].fill(8);
    (lit, vec![5u8; 30])
}

/// Code-length sequence run-length coded with symbols 16/17/18: (symbol, extra value).
fn rle_code_lengths(lengths: &[u8]) -> Vec<(u8, u8)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < lengths.len() {
        let l = lengths[i];
        let mut run = 1;
        while i + run < lengths.len() && lengths[i + run] == l {
            run += 1;
        }
        i += run;
        if l == 0 {
            while run >= 11 {
                let r = run.min(138);
                out.push((18, (r - 11) as u8));
                run -= r;
            }
            if run >= 3 {
                out.push((17, (run - 3) as u8));
                run = 0;
            }
        } else {
            out.push((l, 0));
            run -= 1;
            while run >= 3 {
                let r = run.min(6);
                out.push((16, (r - 3) as u8));
                run -= r;
            }
        }
        for _ in 0..run {
            out.push((l, 0));
        }
    }
    out
}

struct DynamicHeader {
    lit_lengths: Vec<u8>,
    dist_lengths: Vec<u8>,
    hlit: usize,
    hdist: usize,
    clen_lengths: Vec<u8>,
    hclen: usize,
    rle: Vec<(u8, u8)>,
}

impl DynamicHeader {
    fn build(lit_freq: &[u32; 286], dist_freq: &[u32; 30]) -> Self {
        let lit_lengths = code_lengths(lit_freq, 15);
        let mut dist_lengths = code_lengths(dist_freq, 15);
        if dist_lengths.iter().all(|&l| l == 0) {
            // one distance code must still be described
            dist_lengths[0] = 1;
        }
        let hlit = 257.max(lit_lengths.iter().rposition(|&l| l > 0).map_or(0, |p| p + 1));
        let hdist = 1.max(dist_lengths.iter().rposition(|&l| l > 0).map_or(0, |p| p + 1));
        let mut all = lit_lengths[..hlit].to_vec();
        all.extend_from_slice(&dist_lengths[..hdist]);
        let rle = rle_code_lengths(&all);
        let mut clen_freq = [0u32; 19];
        for &(s, _) in &rle {
            clen_freq[s as usize] += 1;
        }
        let clen_lengths = code_lengths(&clen_freq, 7);
        let hclen = 4.max(CLEN_ORDER.iter().rposition(|&s| clen_lengths[s] > 0).map_or(0, |p| p + 1));
        DynamicHeader { lit_lengths, dist_lengths, hlit, hdist, clen_lengths, hclen, rle }
    }

    fn header_bits(&self) -> usize {
        let mut bits = 5 + 5 + 4 + 3 * self.hclen;
        for &(s, _) in &self.rle {
            bits += self.clen_lengths[s as usize] as usize
                + match s {
                    16 => 2,
                    17 => 3,
                    18 => 7,
                    _ => 0,
                };
        }
        bits
    }

    fn write(&self, w: &mut BitWriter) {
        w.write((self.hlit - 257) as u32, 5);
        w.write((self.hdist - 1) as u32, 5);
        w.write((self.hclen - 4) as u32, 4);
        for &s in &CLEN_ORDER[..self.hclen] {
            w.write(self.clen_lengths[s] as u32, 3);
        }
        let codes = canonical_codes(&self.clen_lengths);
        for &(s, extra) in &self.rle {
            w.write_code(codes[s as usize], self.clen_lengths[s as usize]);
            match s {
                16 => w.write(extra as u32, 2),
                17 => w.write(extra as u32, 3),
                18 => w.write(extra as u32, 7),
                _ => {}
            }
        }
    }
}

fn symbol_bits(tokens: &[Token], lit_len: &[u8], dist_len: &[u8]) -> usize {
    let mut bits = lit_len[END_OF_BLOCK] as usize;
    for t in tokens {
        match *t {
            Token::Literal(b) => bits += lit_len[b as usize] as usize,
            Token::Match { len, dist } => {
                let ls = length_symbol(len as usize);
                let ds = dist_symbol(dist as usize);
                bits += lit_len[ls] as usize + LENGTH_EXTRA[ls - 257] as usize;
                bits += dist_len[ds] as usize + DIST_EXTRA[ds] as usize;
            }
        }
    }
    bits
}

/// Canonical codes bit-reversed into the order they are emitted.
fn emit_codes(lengths: &[u8]) -> Vec<u16> {
    canonical_codes(lengths)
        .iter()
        .zip(lengths)
        .map(|(&c, &l)| if l == 0 { 0 } else { c.reverse_bits() >> (16 - l as u32) })
        .collect()
}

fn write_symbols(w: &mut BitWriter, tokens: &[Token], lit_len: &[u8], dist_len: &[u8]) {
    let lit_codes = emit_codes(lit_len);
    let dist_codes = emit_codes(dist_len);
    for t in tokens {
        match *t {
            Token::Literal(b) => w.write_reversed(lit_codes[b as usize], lit_len[b as usize]),
            Token::Match { len, dist } => {
                let ls = length_symbol(len as usize);
                w.write_reversed(lit_codes[ls], lit_len[ls]);
                let extra = LENGTH_EXTRA[ls - 257] as u32;
                w.write((len - LENGTH_BASE[ls - 257]) as u32, extra);
                let ds = dist_symbol(dist as usize);
                w.write_reversed(dist_codes[ds], dist_len[ds]);
                w.write((dist - DIST_BASE[ds]) as u32, DIST_EXTRA[ds] as u32);
            }
        }
    }
    w.write_reversed(lit_codes[END_OF_BLOCK], lit_len[END_OF_BLOCK]);
}

fn write_stored(w: &mut BitWriter, bytes: &[u8], last: bool) {
    let chunks: Vec<&[u8]> = if bytes.is_empty() { vec![&[][..]] } else { bytes.chunks(MAX_STORED).collect() };
    let count = chunks.len();
    for (i, chunk) in chunks.into_iter().enumerate() {
        w.write((last && i + 1 == count) as u32, 1);
        w.write(0, 2);
        w.align();
        let len = chunk.len() as u16;
        w.write_bytes(&len.to_le_bytes());
        w.write_bytes(&(!len).to_le_bytes());
        w.write_bytes(chunk);
    }
}

pub fn compress(data: &[u8]) -> Vec<u8> {
    compress_with(data, DeflateOptions::default())
}

pub fn compress_with(data: &[u8], opts: DeflateOptions) -> Vec<u8> {
    let tokens = tokenize(data, opts);
    let mut w = BitWriter::with_capacity(data.len() / 2 + 64);
    let (fixed_lit, fixed_dist) = fixed_lengths();
    if tokens.is_empty() {
        w.write(1, 1);
        w.write(1, 2);
        write_symbols(&mut w, &[], &fixed_lit, &fixed_dist);
        return w.finish();
    }
    let blocks: Vec<&[Token]> = tokens.chunks(TOKENS_PER_BLOCK).collect();
    let mut byte_pos = 0;
    for (bi, block) in blocks.iter().enumerate() {
        let last = bi + 1 == blocks.len();
        let span: usize = block
            .iter()
            .map(|t| match t {
                Token::Literal(_) => 1,
                Token::Match { len, .. } => *len as usize,
            })
            .sum();
        let raw = &data[byte_pos..byte_pos + span];
        byte_pos += span;

        let mut lit_freq = [0u32; 286];
        let mut dist_freq = [0u32; 30];
        lit_freq[END_OF_BLOCK] = 1;
        for t in block.iter() {
            match *t {
                Token::Literal(b) => lit_freq[b as usize] += 1,
                Token::Match { len, dist } => {
                    lit_freq[length_symbol(len as usize)] += 1;
                    dist_freq[dist_symbol(dist as usize)] += 1;
                }
            }
        }
        let header = DynamicHeader::build(&lit_freq, &dist_freq);
        let dynamic_bits = 3 + header.header_bits() + symbol_bits(block, &header.lit_lengths, &header.dist_lengths);
        let fixed_bits = 3 + symbol_bits(block, &fixed_lit, &fixed_dist);
        let pad = (8 - (w.bit_len() + 3) % 8) % 8;
        let stored_bits = 3 + pad + span.div_ceil(MAX_STORED).max(1) * 32 + span * 8
            + (span.div_ceil(MAX_STORED).max(1) - 1) * 3;

        if stored_bits <= dynamic_bits.min(fixed_bits) {
            write_stored(&mut w, raw, last);
        } else if fixed_bits <= dynamic_bits {
            w.write(last as u32, 1);
            w.write(1, 2);
            write_symbols(&mut w, block, &fixed_lit, &fixed_dist);
        } else {
            w.write(last as u32, 1);
            w.write(2, 2);
            header.write(&mut w);
            write_symbols(&mut w, block, &header.lit_lengths, &header.dist_lengths);
        }
    }
    w.finish()
}

/// Inflates a raw DEFLATE stream. `size_hint` pre-sizes the output.
pub fn decompress(stream: &[u8], size_hint: usize) -> Result<Vec<u8>> {
    let mut r = BitReader::new(stream);
    let mut out: Vec<u8> = Vec::with_capacity(size_hint);
    let (fixed_lit, fixed_dist) = fixed_lengths();
    let fixed = (Decoder::new(&fixed_lit)?, Decoder::new(&fixed_dist)?);
    loop {
        let last = r.read_bit()?;
        match r.read(2)? {
            0 => {
                r.align();
                let hdr = r.read_bytes(4)?;
                let len = u16::from_le_bytes([hdr[0], hdr[1]]);
                let nlen = u16::from_le_bytes([hdr[2], hdr[3]]);
                if len != !nlen {
                    return Err(Error::corrupt("stored block length check failed"));
                }
                out.extend_from_slice(&r.read_bytes(len as usize)?);
            }
            1 => inflate_block(&mut r, &mut out, &fixed.0, &fixed.1)?,
            2 => {
                let (lit, dist) = read_dynamic_tables(&mut r)?;
                inflate_block(&mut r, &mut out, &lit, &dist)?;
            }
            _ => return Err(Error::corrupt("reserved block type")),
        }
        if last {
            break;
        }
    }
    Ok(out)
}

fn read_dynamic_tables(r: &mut BitReader<'_>) -> Result<(Decoder, Decoder)> {
    let hlit = r.read(5)? as usize + 257;
    let hdist = r.read(5)? as usize + 1;
    let hclen = r.read(4)? as usize + 4;
    if hlit > 286 || hdist > 30 {
        return Err(Error::corrupt("too many length or distance codes"));
    }
    let mut clen = [0u8; 19];
    for &s in &CLEN_ORDER[..hclen] {
        clen[s] = r.read(3)? as u8;
    }
    let clen_dec = Decoder::new(&clen)?;
    let mut lengths = Vec::with_capacity(hlit + hdist);
    while lengths.len() < hlit + hdist {
        let sym = clen_dec.decode(r)?;
        let (value, repeat) = match sym {
            0..=15 => (sym as u8, 1),
            16 => {
                let prev = *lengths.last().ok_or_else(|| Error::corrupt("repeat with no previous length"))?;
                (prev, 3 + r.read(2)? as usize)
            }
            17 => (0, 3 + r.read(3)? as usize),
            18 => (0, 11 + r.read(7)? as usize),
            _ => return Err(Error::corrupt("bad code-length symbol")),
        };
        if lengths.len() + repeat > hlit + hdist {
            return Err(Error::corrupt("code lengths overflow"));
        }
        lengths.extend(std::iter::repeat_n(value, repeat));
    }
    if lengths[END_OF_BLOCK] == 0 {
        return Err(Error::corrupt("no end-of-block code"));
    }
    Ok((Decoder::new(&lengths[..hlit])?, Decoder::new(&lengths[hlit..])?))
}

fn inflate_block(r: &mut BitReader<'_>, out: &mut Vec<u8>, lit: &Decoder, dist: &Decoder) -> Result<()> {
    loop {
        let sym = lit.decode(r)? as usize;
        if sym < 256 {
            out.push(sym as u8);
            continue;
        }
        if sym == END_OF_BLOCK {
            return Ok(());
        }
        let li = sym - 257;
        if li >= 29 {
            return Err(Error::corrupt("invalid length symbol"));
        }
        let len = LENGTH_BASE[li] as usize + r.read(LENGTH_EXTRA[li] as u32)? as usize;
        let ds = dist.decode(r)? as usize;
        if ds >= 30 {
            return Err(Error::corrupt("invalid distance symbol"));
        }
        let d = DIST_BASE[ds] as usize + r.read(DIST_EXTRA[ds] as u32)? as usize;
        if d > out.len() {
            return Err(Error::corrupt("match distance reaches before the start of the stream"));
        }
        let start = out.len() - d;
        if d >= len {
            out.extend_from_within(start..start + len);
        } else {
            for k in 0..len {
                let b = out[start + k];
                out.push(b);
            }
        }
    }
}
