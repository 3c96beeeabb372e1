//! Closed-form quotients of the block sequence.
//!
//! m_0 = 1 and log m_p = sum_{k=1}^p delta_k / k with delta_k = 3 on the blocks
//! k in {k_j + 1, ..., q_j}, k_j = 2^(3^j), q_j = k_j^2, and delta_k = 2
//! elsewhere (in particular delta_1 = delta_2 = 2). Summing blockwise gives
//!
//! log m_p = 2 H_p + sum_{j : k_j < p} (H_{min(q_j, p)} - H_{k_j}),
//!
//! which stays cheap for indices far beyond `u64`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::logmath::{harmonic, harmonic_pow2};

/// Highest block level probed by default (q_8 = 2^13122).
pub const MAX_LEVEL: u32 = 8;

/// An index that may be astronomically large. Powers of two are kept as
/// exponents so that block boundaries are represented exactly.
#[derive(Debug, Clone, Copy)]
pub enum BigIndex {
    Small(u64),
    Pow2(u32),
}

impl BigIndex {
    pub fn pow2(e: u32) -> Self {
        if e < 64 {
            BigIndex::Small(1u64 << e)
        } else {
            BigIndex::Pow2(e)
        }
    }

    /// Exact value when it fits into a `u64`.
    pub fn as_u64(self) -> Option<u64> {
        match self {
            BigIndex::Small(n) => Some(n),
            BigIndex::Pow2(e) if e < 64 => Some(1u64 << e),
            BigIndex::Pow2(_) => None,
        }
    }

    /// ln p (p >= 1).
    pub fn ln(self) -> f64 {
        match self {
            BigIndex::Small(n) => (n as f64).ln(),
            BigIndex::Pow2(e) => e as f64 * std::f64::consts::LN_2,
        }
    }

    /// ln(p + 1).
    pub fn ln_succ(self) -> f64 {
        match self.as_u64() {
            Some(n) => (n as f64).ln_1p(),
            None => self.ln() + (-self.ln()).exp(),
        }
    }

    /// log2 p, exact for powers of two.
    pub fn log2(self) -> f64 {
        match self {
            BigIndex::Small(n) => (n as f64).log2(),
            BigIndex::Pow2(e) => e as f64,
        }
    }

    fn harmonic(self) -> f64 {
        match self {
            BigIndex::Small(n) => harmonic(n),
            BigIndex::Pow2(e) => harmonic_pow2(e),
        }
    }

    /// Exact comparison against 2^e.
    fn cmp_pow2(self, e: u32) -> Ordering {
        match self {
            BigIndex::Small(n) => {
                if e >= 64 {
                    Ordering::Less
                } else {
                    n.cmp(&(1u64 << e))
                }
            }
            BigIndex::Pow2(f) => f.cmp(&e),
        }
    }
}

impl fmt::Display for BigIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_u64() {
            Some(n) => write!(f, "{n}"),
            None => write!(f, "2^{}", self.log2() as u32),
        }
    }
}

/// Ordinary indices serialize as JSON numbers, huge ones as `"2^e"`.
impl Serialize for BigIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.as_u64() {
            Some(n) => serializer.serialize_u64(n),
            None => serializer.collect_str(self),
        }
    }
}

impl PartialEq for BigIndex {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for BigIndex {}

impl PartialOrd for BigIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BigIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.as_u64(), other.as_u64()) {
            (Some(a), Some(b)) => a.cmp(&b),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => self.log2().total_cmp(&other.log2()),
        }
    }
}

/// Exponent of k_j = 2^(3^j).
pub fn block_start_exp(j: u32) -> u32 {
    3u32.pow(j)
}

/// Exponent of q_j = 2^(2 * 3^j).
pub fn block_end_exp(j: u32) -> u32 {
    2 * 3u32.pow(j)
}

/// delta_k for an ordinary index k >= 1.
pub fn delta(k: u64) -> u32 {
    let mut j = 0;
    loop {
        let ks = block_start_exp(j);
        if ks >= 64 {
            return 2;
        }
        let kj = 1u64 << ks;
        let qe = block_end_exp(j);
        let in_block = k > kj && (qe >= 64 || k <= (1u64 << qe));
        if in_block {
            return 3;
        }
        if k <= kj {
            return 2;
        }
        j += 1;
    }
}

/// log m_p via the blockwise harmonic formula.
pub fn log_m(p: BigIndex) -> f64 {
    if matches!(p.as_u64(), Some(0)) {
        return 0.0;
    }
    let mut total = 2.0 * p.harmonic();
    let mut j = 0;
    loop {
        let ks = block_start_exp(j);
        if p.cmp_pow2(ks) != Ordering::Greater {
            break;
        }
        let qe = block_end_exp(j);
        let upper = if p.cmp_pow2(qe) == Ordering::Greater {
            harmonic_pow2(qe)
        } else {
            p.harmonic()
        };
        total += upper - harmonic_pow2(ks);
        j += 1;
    }
    total
}

/// Block boundaries k_j, q_j for j <= `max_level`, followed by k_{max_level+1}
/// so that the stretch after the last block is bounded.
pub fn boundaries(max_level: u32) -> Vec<BigIndex> {
    (0..=max_level)
        .flat_map(|j| [BigIndex::pow2(block_start_exp(j)), BigIndex::pow2(block_end_exp(j))])
        .chain(std::iter::once(BigIndex::pow2(block_start_exp(max_level + 1))))
        .collect()
}
