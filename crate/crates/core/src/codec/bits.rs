//! LSB-first bit packing, the order DEFLATE uses.

use crate::error::{Error, Result};

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    out: Vec<u8>,
    acc: u64,
    nbits: u32,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bytes: usize) -> Self {
        BitWriter { out: Vec::with_capacity(bytes), acc: 0, nbits: 0 }
    }

    /// Appends the low `n` bits of `value` (n <= 32).
    #[inline]
    pub fn write(&mut self, value: u32, n: u32) {
        debug_assert!(n <= 32);
        if n == 0 {
            return;
        }
        self.acc |= ((value as u64) & ((1u64 << n) - 1)) << self.nbits;
        self.nbits += n;
        if self.nbits >= 32 {
            self.out.extend_from_slice(&(self.acc as u32).to_le_bytes());
            self.acc >>= 32;
            self.nbits -= 32;
        }
    }

    /// Appends `len` bits that are already in LSB-first order.
    #[inline]
    pub fn write_reversed(&mut self, bits: u16, len: u8) {
        self.write(bits as u32, len as u32);
    }

    /// Writes a Huffman code, which DEFLATE stores most-significant bit first.
    #[inline]
    pub fn write_code(&mut self, code: u16, len: u8) {
        let reversed = code.reverse_bits() >> (16 - len as u32);
        self.write(reversed as u32, len as u32);
    }

    /// Pads to a byte boundary with zeros.
    pub fn align(&mut self) {
        while self.nbits > 0 {
            self.out.push(self.acc as u8);
            self.acc >>= 8;
            self.nbits = self.nbits.saturating_sub(8);
        }
        self.acc = 0;
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) {
        debug_assert_eq!(self.nbits, 0);
        self.out.extend_from_slice(bytes);
    }

    pub fn bit_len(&self) -> usize {
        self.out.len() * 8 + self.nbits as usize
    }

    pub fn finish(mut self) -> Vec<u8> {
        self.align();
        self.out
    }
}

#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    acc: u64,
    nbits: u32,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        BitReader { data, pos: 0, acc: 0, nbits: 0 }
    }

    #[inline]
    fn refill(&mut self) {
        while self.nbits <= 56 {
            let Some(&b) = self.data.get(self.pos) else { break };
            self.acc |= (b as u64) << self.nbits;
            self.pos += 1;
            self.nbits += 8;
        }
    }

    /// Up to 32 bits without consuming; missing bits past the end read as 0.
    #[inline]
    pub fn peek(&mut self, n: u32) -> u32 {
        if self.nbits < n {
            self.refill();
        }
        (self.acc & ((1u64 << n) - 1)) as u32
    }

    #[inline]
    pub fn consume(&mut self, n: u32) -> Result<()> {
        if self.nbits < n {
            self.refill();
            if self.nbits < n {
                return Err(Error::corrupt("unexpected end of bit stream"));
            }
        }
        self.acc >>= n;
        self.nbits -= n;
        Ok(())
    }

    #[inline]
    pub fn read(&mut self, n: u32) -> Result<u32> {
        if n == 0 {
            return Ok(0);
        }
        let v = self.peek(n);
        self.consume(n)?;
        Ok(v)
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        Ok(self.read(1)? == 1)
    }

    /// Drops bits up to the next byte boundary.
    pub fn align(&mut self) {
        let drop = self.nbits % 8;
        self.acc >>= drop;
        self.nbits -= drop;
    }

    /// Reads whole bytes after [`align`](Self::align).
    pub fn read_bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        debug_assert_eq!(self.nbits % 8, 0);
        let mut out = Vec::with_capacity(n);
        while out.len() < n && self.nbits >= 8 {
            out.push(self.acc as u8);
            self.acc >>= 8;
            self.nbits -= 8;
        }
        let rest = n - out.len();
        let end = self.pos.checked_add(rest).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| Error::corrupt("stored block runs past end of stream"))?;
        out.extend_from_slice(&self.data[self.pos..end]);
        self.pos = end;
        Ok(out)
    }

    /// Bytes consumed so far, counting a partially read byte as consumed.
    pub fn byte_position(&self) -> usize {
        self.pos - (self.nbits / 8) as usize
    }
}
