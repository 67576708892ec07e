//! Canonical Huffman coding over bytes.
//!
//! Stream layout: symbol count (u16 BE), `(symbol, code_length)` pairs in
//! canonical order, original length (u64 BE), then the code bits packed
//! MSB-first and zero-padded to a byte boundary.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::CodecError;

const MAX_CODE_LEN: u8 = 64;

/// Code lengths from byte frequencies. Merges pick the two lowest
/// `(frequency, tiebreak)` nodes, where leaves use their symbol value and
/// internal nodes use `256 + creation order`. A lone symbol gets a 1-bit code.
pub fn code_lengths(freqs: &[u64; 256]) -> [u8; 256] {
    let mut lengths = [0u8; 256];
    let present: Vec<usize> = (0..256).filter(|&s| freqs[s] > 0).collect();
    match present.len() {
        0 => return lengths,
        1 => {
            lengths[present[0]] = 1;
            return lengths;
        }
        _ => {}
    }
    // parent links for leaves 0..256 and internal nodes 256..
    let mut parent: Vec<usize> = vec![usize::MAX; 256];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = present.iter().map(|&s| Reverse((freqs[s], s))).collect();
    while heap.len() > 1 {
        let Reverse((fa, a)) = heap.pop().unwrap();
        let Reverse((fb, b)) = heap.pop().unwrap();
        let id = parent.len();
        parent.push(usize::MAX);
        parent[a] = id;
        parent[b] = id;
        heap.push(Reverse((fa + fb, id)));
    }
    for &s in &present {
        let mut depth = 0u32;
        let mut node = s;
        while parent[node] != usize::MAX {
            node = parent[node];
            depth += 1;
        }
        lengths[s] = depth.min(255) as u8;
    }
    lengths
}

/// Canonical code assignment for a set of code lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalCode {
    /// `(symbol, length)` sorted by length, then symbol.
    pub order: Vec<(u8, u8)>,
    pub lengths: [u8; 256],
    pub codes: [u64; 256],
}

impl CanonicalCode {
    pub fn from_lengths(lengths: &[u8; 256]) -> Self {
        let mut order: Vec<(u8, u8)> = (0..256).filter(|&s| lengths[s] > 0).map(|s| (s as u8, lengths[s])).collect();
        order.sort_by_key(|&(s, l)| (l, s));
        let mut codes = [0u64; 256];
        let mut code = 0u64;
        let mut prev_len = order.first().map_or(0, |&(_, l)| l);
        for &(s, l) in &order {
            code <<= l - prev_len;
            codes[s as usize] = code;
            code += 1;
            prev_len = l;
        }
        Self { order, lengths: *lengths, codes }
    }
}

pub(crate) struct BitWriter {
    out: Vec<u8>,
    acc: u64,
    filled: u32,
}

impl BitWriter {
    pub(crate) fn new(out: Vec<u8>) -> Self {
        Self { out, acc: 0, filled: 0 }
    }

    pub(crate) fn push(&mut self, code: u64, len: u8) {
        let mut remaining = len as u32;
        while remaining > 0 {
            let take = remaining.min(32);
            let chunk = (code >> (remaining - take)) & ((1u64 << take) - 1);
            self.acc = (self.acc << take) | chunk;
            self.filled += take;
            remaining -= take;
            while self.filled >= 8 {
                self.filled -= 8;
                self.out.push((self.acc >> self.filled) as u8);
            }
            self.acc &= (1u64 << self.filled) - 1;
        }
    }

    /// Fills the last partial byte with 1-bits.
    pub(crate) fn pad_with_ones(&mut self) {
        let pad = (8 - self.filled % 8) % 8;
        self.push((1u64 << pad) - 1, pad as u8);
    }

    pub(crate) fn finish(mut self) -> Vec<u8> {
        if self.filled > 0 {
            self.out.push((self.acc << (8 - self.filled)) as u8);
        }
        self.out
    }
}

pub fn huffman_encode(data: &[u8]) -> Result<Vec<u8>, CodecError> {
    if data.is_empty() {
        return Err(CodecError::EmptyInput);
    }
    let mut freqs = [0u64; 256];
    for &b in data {
        freqs[b as usize] += 1;
    }
    let lengths = code_lengths(&freqs);
    if lengths.iter().any(|&l| l > MAX_CODE_LEN) {
        return Err(CodecError::CorruptHeader(format!("code length exceeds {MAX_CODE_LEN} bits")));
    }
    let code = CanonicalCode::from_lengths(&lengths);
    let total_bits: u64 = (0..256).map(|s| freqs[s] * lengths[s] as u64).sum();
    let mut out = Vec::with_capacity(2 + 2 * code.order.len() + 8 + total_bits.div_ceil(8) as usize);
    out.extend_from_slice(&(code.order.len() as u16).to_be_bytes());
    for &(s, l) in &code.order {
        out.push(s);
        out.push(l);
    }
    out.extend_from_slice(&(data.len() as u64).to_be_bytes());
    let mut writer = BitWriter::new(out);
    for &b in data {
        writer.push(code.codes[b as usize], code.lengths[b as usize]);
    }
    Ok(writer.finish())
}

pub fn huffman_decode(bytes: &[u8]) -> Result<Vec<u8>, CodecError> {
    let corrupt = |m: String| CodecError::CorruptHeader(m);
    if bytes.len() < 2 {
        return Err(corrupt("missing symbol count".into()));
    }
    let count = u16::from_be_bytes([bytes[0], bytes[1]]) as usize;
    if count == 0 || count > 256 {
        return Err(corrupt(format!("symbol count {count}")));
    }
    let table_end = 2 + 2 * count;
    if bytes.len() < table_end + 8 {
        return Err(corrupt("table or length field cut short".into()));
    }
    let mut lengths = [0u8; 256];
    let mut prev: Option<(u8, u8)> = None;
    // Kraft sum scaled by 2^64
    let mut kraft: u128 = 0;
    for pair in bytes[2..table_end].chunks_exact(2) {
        let (s, l) = (pair[0], pair[1]);
        if l == 0 || l > MAX_CODE_LEN {
            return Err(corrupt(format!("code length {l} for symbol {s}")));
        }
        if let Some((ps, pl)) = prev {
            if (pl, ps) >= (l, s) {
                return Err(corrupt("table not in canonical order".into()));
            }
        }
        lengths[s as usize] = l;
        kraft += 1u128 << (64 - l as u32);
        prev = Some((s, l));
    }
    if kraft > 1u128 << 64 {
        return Err(corrupt("code lengths violate the Kraft inequality".into()));
    }
    let original_len = u64::from_be_bytes(bytes[table_end..table_end + 8].try_into().unwrap());
    let bits = &bytes[table_end + 8..];

    let code = CanonicalCode::from_lengths(&lengths);
    let max_len = code.order.last().map_or(0, |&(_, l)| l) as usize;
    // per-length first code, count and offset into `order`
    let mut first = vec![0u64; max_len + 1];
    let mut per_len = vec![0u64; max_len + 1];
    let mut offset = vec![0usize; max_len + 1];
    for (i, &(s, l)) in code.order.iter().enumerate().rev() {
        first[l as usize] = code.codes[s as usize];
        offset[l as usize] = i;
        per_len[l as usize] += 1;
    }

    if original_len > (bits.len() as u64).saturating_mul(8) {
        return Err(CodecError::Truncated(format!("{original_len} symbols cannot fit in {} bytes", bits.len())));
    }
    let mut out = Vec::with_capacity(original_len as usize);
    let mut bit_pos = 0usize;
    let total_bits = bits.len() * 8;
    while (out.len() as u64) < original_len {
        let mut acc = 0u64;
        let mut len = 0usize;
        loop {
            if bit_pos >= total_bits {
                return Err(CodecError::Truncated(format!("ran out of bits after {} symbols", out.len())));
            }
            let bit = (bits[bit_pos / 8] >> (7 - bit_pos % 8)) & 1;
            bit_pos += 1;
            acc = (acc << 1) | bit as u64;
            len += 1;
            if len > max_len {
                return Err(corrupt(format!("invalid code at bit {}", bit_pos - len)));
            }
            if per_len[len] > 0 && acc >= first[len] && acc - first[len] < per_len[len] {
                out.push(code.order[offset[len] + (acc - first[len]) as usize].0);
                break;
            }
        }
    }
    let used = bit_pos.div_ceil(8);
    if used != bits.len() {
        return Err(CodecError::LengthMismatch(format!("{} trailing bytes after {original_len} symbols", bits.len() - used)));
    }
    Ok(out)
}
