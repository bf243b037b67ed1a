//! Byte-oriented run-length coding followed by an order-0 rANS coder.
//!
//! RLE: after two equal bytes a count byte gives the number of further
//! repeats (0..=255).
//!
//! Coded block:
//!
//! ```text
//! u32 decoded length
//! u8  kind: 0 empty, 1 constant input, 2 RLE + rANS
//! kind 1: u8 symbol
//! kind 2: u32 RLE length, u16 symbol count,
//!         (u8 symbol, u16 frequency) * count, rANS payload
//! ```
//!
//! All integers little-endian except the 32-bit rANS state, which leads the
//! payload big-endian.

const SCALE_BITS: u32 = 12;
const M: u32 = 1 << SCALE_BITS;
const RANS_L: u32 = 1 << 23;

pub fn rle_encode(data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() / 2 + 16);
    let mut i = 0;
    while i < data.len() {
        let b = data[i];
        out.push(b);
        if i + 1 < data.len() && data[i + 1] == b {
            out.push(b);
            let mut j = i + 2;
            while j < data.len() && data[j] == b && j - (i + 2) < 255 {
                j += 1;
            }
            out.push((j - (i + 2)) as u8);
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

/// Decodes until `expected` bytes are produced.
pub fn rle_decode(data: &[u8], expected: usize) -> Option<Vec<u8>> {
    let mut out = Vec::with_capacity(expected);
    let mut i = 0;
    while out.len() < expected {
        let b = *data.get(i)?;
        out.push(b);
        i += 1;
        if data.get(i) == Some(&b) && out.len() < expected {
            out.push(b);
            let n = *data.get(i + 1)? as usize;
            i += 2;
            out.extend(std::iter::repeat_n(b, n));
        }
    }
    (out.len() == expected && i == data.len()).then_some(out)
}

/// Scales symbol counts to frequencies summing to `M`, each at least 1.
fn normalize(counts: &[u64; 256]) -> [u32; 256] {
    let total: u64 = counts.iter().sum();
    let mut freq = [0u32; 256];
    for s in 0..256 {
        if counts[s] > 0 {
            freq[s] = ((counts[s] * M as u64) / total).max(1) as u32;
        }
    }
    let mut sum: i64 = freq.iter().map(|&f| f as i64).sum();
    while sum != M as i64 {
        // Adjust the symbol that can best absorb the difference.
        let s = (0..256).filter(|&s| freq[s] > 0).max_by_key(|&s| (freq[s], std::cmp::Reverse(s))).unwrap();
        if sum < M as i64 {
            freq[s] += (M as i64 - sum) as u32;
            sum = M as i64;
        } else {
            let take = (sum - M as i64).min(freq[s] as i64 - 1);
            freq[s] -= take as u32;
            sum -= take;
        }
    }
    freq
}

fn rans_encode(data: &[u8], freq: &[u32; 256]) -> Vec<u8> {
    let mut cum = [0u32; 257];
    for s in 0..256 {
        cum[s + 1] = cum[s] + freq[s];
    }
    let mut out = Vec::with_capacity(data.len());
    let mut x = RANS_L;
    for &s in data.iter().rev() {
        let f = freq[s as usize];
        let x_max = ((RANS_L >> SCALE_BITS) << 8) * f;
        while x >= x_max {
            out.push(x as u8);
            x >>= 8;
        }
        x = ((x / f) << SCALE_BITS) + (x % f) + cum[s as usize];
    }
    out.extend_from_slice(&x.to_le_bytes());
    out.reverse();
    out
}

fn rans_decode(payload: &[u8], freq: &[u32; 256], n: usize) -> Option<Vec<u8>> {
    let mut cum = [0u32; 257];
    for s in 0..256 {
        cum[s + 1] = cum[s] + freq[s];
    }
    let mut slot_sym = vec![0u8; M as usize];
    for s in 0..256 {
        slot_sym[cum[s] as usize..cum[s + 1] as usize].fill(s as u8);
    }
    let mut x = u32::from_be_bytes(payload.get(..4)?.try_into().ok()?);
    if !(RANS_L..RANS_L << 8).contains(&x) {
        return None;
    }
    let mut pos = 4;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let slot = x & (M - 1);
        let s = slot_sym[slot as usize];
        out.push(s);
        x = freq[s as usize] * (x >> SCALE_BITS) + slot - cum[s as usize];
        while x < RANS_L {
            x = (x << 8) | *payload.get(pos)? as u32;
            pos += 1;
        }
    }
    (pos == payload.len() && x == RANS_L).then_some(out)
}

pub fn encode(data: &[u8]) -> Vec<u8> {
    let mut out = (data.len() as u32).to_le_bytes().to_vec();
    if data.is_empty() {
        out.push(0);
        return out;
    }
    if data.iter().all(|&b| b == data[0]) {
        out.extend_from_slice(&[1, data[0]]);
        return out;
    }
    let rle = rle_encode(data);
    let mut counts = [0u64; 256];
    rle.iter().for_each(|&b| counts[b as usize] += 1);
    let used: Vec<usize> = (0..256).filter(|&s| counts[s] > 0).collect();
    out.push(2);
    out.extend_from_slice(&(rle.len() as u32).to_le_bytes());
    let freq = normalize(&counts);
    out.extend_from_slice(&(used.len() as u16).to_le_bytes());
    for &s in &used {
        out.push(s as u8);
        out.extend_from_slice(&(freq[s] as u16).to_le_bytes());
    }
    out.extend(rans_encode(&rle, &freq));
    out
}

fn u32_at(b: &[u8], at: usize) -> Option<u32> {
    Some(u32::from_le_bytes(b.get(at..at + 4)?.try_into().ok()?))
}

/// Decodes a block produced by [`encode`]. `expected` is the decoded length
/// the caller requires; anything else is rejected before allocation.
pub fn decode(block: &[u8], expected: usize) -> Option<Vec<u8>> {
    let n = u32_at(block, 0)? as usize;
    if n != expected {
        return None;
    }
    // A pair with a zero count turns 2 bytes into 3.
    let rle_limit = expected / 2 * 3 + 2;
    match *block.get(4)? {
        0 => (expected == 0 && block.len() == 5).then(Vec::new),
        1 => {
            let sym = *block.get(5)?;
            (block.len() == 6 && expected > 0).then(|| vec![sym; expected])
        }
        2 => {
            let rle_len = u32_at(block, 5)? as usize;
            if rle_len > rle_limit {
                return None;
            }
            let count = u16::from_le_bytes(block.get(9..11)?.try_into().ok()?) as usize;
            if !(2..=256).contains(&count) {
                return None;
            }
            let mut freq = [0u32; 256];
            let mut pos = 11;
            for _ in 0..count {
                let s = *block.get(pos)? as usize;
                let f = u16::from_le_bytes(block.get(pos + 1..pos + 3)?.try_into().ok()?) as u32;
                if f == 0 || freq[s] != 0 {
                    return None;
                }
                freq[s] = f;
                pos += 3;
            }
            if freq.iter().sum::<u32>() != M {
                return None;
            }
            let rle = rans_decode(&block[pos..], &freq, rle_len)?;
            rle_decode(&rle, expected)
        }
        _ => None,
    }
}

/// Zero-order entropy in bits per symbol.
pub fn entropy<T: Ord + Copy>(symbols: &[T]) -> f64 {
    if symbols.is_empty() {
        return 0.0;
    }
    let mut sorted = symbols.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    let mut h = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().position(|v| *v != sorted[i]).map_or(sorted.len(), |k| i + k);
        let p = (j - i) as f64 / n;
        h -= p * p.log2();
        i = j;
    }
    h.max(0.0)
}
