//! Length-limited canonical Huffman codes.

use crate::codec::bits::BitReader;
use crate::error::{Error, Result};

/// Optimal code lengths no longer than `max_len`, via package-merge.
/// Unused symbols get length 0; a lone used symbol gets length 1.
pub fn code_lengths(freqs: &[u32], max_len: u8) -> Vec<u8> {
    let mut lengths = vec![0u8; freqs.len()];
    let mut leaves: Vec<(u64, usize)> =
        freqs.iter().enumerate().filter(|(_, &f)| f > 0).map(|(s, &f)| (f as u64, s)).collect();
    match leaves.len() {
        0 => return lengths,
        1 => {
            lengths[leaves[0].1] = 1;
            return lengths;
        }
        _ => {}
    }
    assert!(leaves.len() <= 1 << max_len, "alphabet too large for {max_len}-bit codes");
    leaves.sort_by_key(|&(w, s)| (w, s));

    // Items are (weight, node); nodes are leaves or packages of two items.
    enum Node {
        Leaf(usize),
        Package(usize, usize),
    }
    let mut nodes: Vec<Node> = leaves.iter().map(|&(_, s)| Node::Leaf(s)).collect();
    let leaf_items: Vec<(u64, usize)> = leaves.iter().enumerate().map(|(i, &(w, _))| (w, i)).collect();
    let mut list = leaf_items.clone();
    for _ in 1..max_len {
        let mut merged = Vec::with_capacity(leaf_items.len() + list.len() / 2);
        let mut a = leaf_items.iter().copied().peekable();
        let mut packages = list.chunks_exact(2).map(|p| {
            nodes.push(Node::Package(p[0].1, p[1].1));
            (p[0].0 + p[1].0, nodes.len() - 1)
        });
        let mut b = packages.next();
        loop {
            match (a.peek(), b) {
                (Some(x), Some(y)) if x.0 <= y.0 => merged.push(a.next().unwrap()),
                (_, Some(y)) => {
                    merged.push(y);
                    b = packages.next();
                }
                (Some(_), None) => merged.push(a.next().unwrap()),
                (None, None) => break,
            }
        }
        list = merged;
    }
    let mut stack: Vec<usize> = list.iter().take(2 * leaves.len() - 2).map(|&(_, n)| n).collect();
    while let Some(n) = stack.pop() {
        match nodes[n] {
            Node::Leaf(s) => lengths[s] += 1,
            Node::Package(l, r) => {
                stack.push(l);
                stack.push(r);
            }
        }
    }
    lengths
}

/// Canonical codes for `lengths` (RFC 1951 section 3.2.2).
pub fn canonical_codes(lengths: &[u8]) -> Vec<u16> {
    let max = lengths.iter().copied().max().unwrap_or(0) as usize;
    let mut count = vec![0u16; max + 1];
    for &l in lengths {
        if l > 0 {
            count[l as usize] += 1;
        }
    }
    let mut next = vec![0u16; max + 2];
    let mut code = 0u16;
    for bits in 1..=max {
        code = (code + count[bits - 1]) << 1;
        next[bits] = code;
    }
    lengths
        .iter()
        .map(|&l| {
            if l == 0 {
                0
            } else {
                let c = next[l as usize];
                next[l as usize] += 1;
                c
            }
        })
        .collect()
}

/// Single-level lookup table indexed by the next `max_len` stream bits.
#[derive(Debug, Clone)]
pub struct Decoder {
    table: Vec<u16>,
    max_len: u32,
}

impl Decoder {
    pub fn new(lengths: &[u8]) -> Result<Self> {
        let max_len = lengths.iter().copied().max().unwrap_or(0) as u32;
        if max_len == 0 {
            return Ok(Decoder { table: Vec::new(), max_len: 0 });
        }
        if max_len > 15 {
            return Err(Error::corrupt("code length above 15"));
        }
        // Kraft check: over-subscribed tables are corrupt
        let kraft: u64 = lengths.iter().filter(|&&l| l > 0).map(|&l| 1u64 << (max_len - l as u32)).sum();
        if kraft > 1u64 << max_len {
            return Err(Error::corrupt("over-subscribed Huffman table"));
        }
        let codes = canonical_codes(lengths);
        let mut table = vec![0u16; 1 << max_len];
        for (sym, (&len, &code)) in lengths.iter().zip(&codes).enumerate() {
            if len == 0 {
                continue;
            }
            let rev = (code.reverse_bits() >> (16 - len as u32)) as usize;
            let entry = ((sym as u16) << 4) | len as u16;
            let mut i = rev;
            while i < table.len() {
                table[i] = entry;
                i += 1 << len;
            }
        }
        Ok(Decoder { table, max_len })
    }

    #[inline]
    pub fn decode(&self, r: &mut BitReader<'_>) -> Result<u16> {
        if self.max_len == 0 {
            return Err(Error::corrupt("symbol read from an empty Huffman table"));
        }
        let entry = self.table[r.peek(self.max_len) as usize];
        let len = (entry & 0xF) as u32;
        if len == 0 {
            return Err(Error::corrupt("invalid Huffman code"));
        }
        r.consume(len)?;
        Ok(entry >> 4)
    }
}
