//! Binary encodings of bounded integer variables.
//!
//! Each asset `i` is written as `xᵢ = offsetᵢ + Σⱼ wᵢⱼ·bᵢⱼ` over its own
//! block of bits. Bits are laid out asset by asset, in asset order.

use thiserror::Error;

use crate::hotstart::{bits_for_count, HotStartBox};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("bit vector has length {found}, encoding expects {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("value {value} for asset {asset} outside [{lower}, {upper}]")]
    OutOfRange { asset: usize, value: i64, lower: i64, upper: i64 },
    #[error("invalid encoding: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, EncodeError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoding {
    labels: Vec<String>,
    offsets: Vec<i64>,
    weights: Vec<Vec<u64>>,
    spans: Vec<u64>,
    starts: Vec<usize>,
    total_bits: usize,
}

impl Encoding {
    /// Validates that every weight is positive and that, taken in
    /// descending order, no weight exceeds one plus the sum of the smaller
    /// ones. That makes every integer in `[0, span]` a subset sum.
    pub fn new(labels: Vec<String>, offsets: Vec<i64>, weights: Vec<Vec<u64>>) -> Result<Self> {
        if labels.len() != offsets.len() || labels.len() != weights.len() {
            return Err(EncodeError::Invalid("labels, offsets and weights differ in length".into()));
        }
        for l in &labels {
            if l.is_empty() || l.chars().any(char::is_whitespace) {
                return Err(EncodeError::Invalid(format!("label {l:?} is empty or has whitespace")));
            }
        }
        let mut spans = Vec::with_capacity(weights.len());
        let mut starts = Vec::with_capacity(weights.len());
        let mut total_bits = 0;
        for (i, w) in weights.iter().enumerate() {
            let mut sorted = w.clone();
            sorted.sort_unstable();
            let mut below: u64 = 0;
            for &v in &sorted {
                if v == 0 || v > below.saturating_add(1) {
                    return Err(EncodeError::Invalid(format!(
                        "asset {i}: weights {w:?} do not cover a contiguous range"
                    )));
                }
                below = below
                    .checked_add(v)
                    .ok_or_else(|| EncodeError::Invalid(format!("asset {i}: span overflows")))?;
            }
            if i64::try_from(below).ok().and_then(|s| offsets[i].checked_add(s)).is_none() {
                return Err(EncodeError::Invalid(format!("asset {i}: upper bound overflows")));
            }
            spans.push(below);
            starts.push(total_bits);
            total_bits += w.len();
        }
        Ok(Self { labels, offsets, weights, spans, starts, total_bits })
    }

    pub fn assets(&self) -> usize {
        self.offsets.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn offsets(&self) -> &[i64] {
        &self.offsets
    }

    pub fn weights(&self) -> &[Vec<u64>] {
        &self.weights
    }

    pub fn spans(&self) -> &[u64] {
        &self.spans
    }

    pub fn total_bits(&self) -> usize {
        self.total_bits
    }

    pub fn lower(&self) -> Vec<i64> {
        self.offsets.clone()
    }

    pub fn upper(&self) -> Vec<i64> {
        self.offsets.iter().zip(&self.spans).map(|(&o, &s)| o + s as i64).collect()
    }

    pub fn bits_per_asset(&self) -> Vec<usize> {
        self.weights.iter().map(Vec::len).collect()
    }

    /// Global position of local bit `bit` of `asset`.
    pub fn bit_index(&self, asset: usize, bit: usize) -> usize {
        debug_assert!(bit < self.weights[asset].len());
        self.starts[asset] + bit
    }

    /// `(asset, weight)` for every global bit, in bit order.
    pub fn bit_layout(&self) -> Vec<(usize, u64)> {
        self.weights
            .iter()
            .enumerate()
            .flat_map(|(i, w)| w.iter().map(move |&v| (i, v)))
            .collect()
    }

    pub fn with_labels(self, labels: Vec<String>) -> Result<Self> {
        Self::new(labels, self.offsets, self.weights)
    }
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

/// Weights `(1, 2, …, 2^(k−2), R − 2^(k−1) + 1)` with `k = ⌈log₂(R + 1)⌉`:
/// exactly the integers `0..=R`, never more.
pub fn bounded_weights(span: u64) -> Vec<u64> {
    let k = bits_for_count(span + 1);
    if k == 0 {
        return Vec::new();
    }
    let mut w: Vec<u64> = (0..k - 1).map(|j| 1u64 << j).collect();
    w.push(span - ((1u64 << (k - 1)) - 1));
    w
}

/// Encoding of the hot-start box `[lower, upper]`.
pub fn bounded_encoding<T: Real>(b: &HotStartBox<T>) -> Encoding {
    let weights = b
        .lower
        .iter()
        .zip(&b.upper)
        .map(|(&l, &u)| bounded_weights((u - l) as u64))
        .collect();
    Encoding::new(default_labels(b.dim()), b.lower.clone(), weights)
        .expect("bounded weights form a complete sequence")
}

/// Plain `k`-bit unsigned binary per asset, range `0..=2^k − 1`.
pub fn baseline_encoding(n: usize, k: u32) -> Result<Encoding> {
    if k == 0 || k > 62 {
        return Err(EncodeError::Invalid(format!("bits per asset must be in 1..=62, got {k}")));
    }
    let w: Vec<u64> = (0..k).map(|j| 1u64 << j).collect();
    Encoding::new(default_labels(n), vec![0; n], vec![w; n])
}

pub fn decode(e: &Encoding, bits: &[bool]) -> Result<Vec<i64>> {
    if bits.len() != e.total_bits {
        return Err(EncodeError::LengthMismatch { expected: e.total_bits, found: bits.len() });
    }
    Ok(e.weights
        .iter()
        .zip(&e.offsets)
        .zip(&e.starts)
        .map(|((w, &off), &start)| {
            off + w
                .iter()
                .zip(&bits[start..start + w.len()])
                .filter(|(_, &b)| b)
                .map(|(&v, _)| v as i64)
                .sum::<i64>()
        })
        .collect())
}

/// A bit vector decoding to `x`, chosen greedily from the largest weight
/// down (ties by lowest local index).
pub fn encode_value(e: &Encoding, x: &[i64]) -> Result<Vec<bool>> {
    if x.len() != e.assets() {
        return Err(EncodeError::LengthMismatch { expected: e.assets(), found: x.len() });
    }
    let mut bits = vec![false; e.total_bits];
    for (i, &v) in x.iter().enumerate() {
        let (lower, span) = (e.offsets[i], e.spans[i]);
        let upper = lower + span as i64;
        if v < lower || v > upper {
            return Err(EncodeError::OutOfRange { asset: i, value: v, lower, upper });
        }
        let w = &e.weights[i];
        let mut order: Vec<usize> = (0..w.len()).collect();
        order.sort_by(|&a, &b| w[b].cmp(&w[a]).then(a.cmp(&b)));
        let mut rest = (v - lower) as u64;
        for j in order {
            if w[j] <= rest {
                rest -= w[j];
                bits[e.starts[i] + j] = true;
            }
        }
        debug_assert_eq!(rest, 0);
    }
    Ok(bits)
}
