//! Graded-lexicographic bijection between multi-indices `ℕ₀ⁿ` and ranks `ℕ₀`.
//!
//! Multi-indices are ordered by total degree first; within one degree the
//! entries are compared lexicographically, so for `n = 2` the sequence starts
//! `(0,0), (0,1), (1,0), (0,2), (1,1), (2,0), ...`. Both directions are
//! computed from binomial counts in `u128` and checked against `u64` ranks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rank = u64;

/// A tuple of quantum numbers `(I_1, ..., I_n)`, `n ≥ 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u64>);

impl MultiIndex {
    pub fn new(entries: Vec<u64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("multi-index must have at least one entry"));
        }
        Ok(MultiIndex(entries))
    }

    pub fn zero(n: usize) -> Result<Self> {
        Self::new(vec![0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[u64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u64 {
        self.0[i]
    }

    /// Total degree `|I|`.
    pub fn degree(&self) -> u128 {
        self.0.iter().map(|&v| v as u128).sum()
    }

    /// Next multi-index in graded-lexicographic order.
    pub fn successor(&self) -> Result<MultiIndex> {
        let n = self.0.len();
        let mut next = self.0.clone();
        // rightmost position (excluding the last) whose suffix still carries mass
        let mut suffix: u64 = next[n - 1];
        for k in (0..n.saturating_sub(1)).rev() {
            if suffix > 0 {
                next[k] = next[k]
                    .checked_add(1)
                    .ok_or_else(|| Error::capacity("multi-index entry overflow"))?;
                for v in next.iter_mut().skip(k + 1) {
                    *v = 0;
                }
                next[n - 1] = suffix - 1;
                return Ok(MultiIndex(next));
            }
            suffix = suffix
                .checked_add(next[k])
                .ok_or_else(|| Error::capacity("multi-index degree overflow"))?;
        }
        // all mass sits in the first entry: move to (0, ..., 0, s + 1)
        let s = suffix
            .checked_add(1)
            .ok_or_else(|| Error::capacity("multi-index degree overflow"))?;
        next.iter_mut().for_each(|v| *v = 0);
        next[n - 1] = s;
        Ok(MultiIndex(next))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// `C(a, b)`, `None` on `u128` overflow. Cost is `O(b)`.
fn binom(a: u128, b: u128) -> Option<u128> {
    if b > a {
        return Some(0);
    }
    let b = b.min(a - b);
    let mut r: u128 = 1;
    for i in 0..b {
        // r = C(a, i) here, so r * (a - i) is divisible by i + 1
        r = r.checked_mul(a - i)? / (i + 1);
    }
    Some(r)
}

/// Number of multi-indices of dimension `n` with degree strictly below `s`.
fn count_below(s: u128, n: u128) -> Option<u128> {
    if s == 0 {
        return Some(0);
    }
    binom(s - 1 + n, n)
}

/// Number of ways to fill the `m ≥ 1` entries after the current one given
/// remaining degree `r`, summed over current values `0..v`.
fn count_first_below(r: u128, m: u128, v: u128) -> Option<u128> {
    Some(binom(r + m, m)? - binom(r - v + m, m)?)
}

fn overflow() -> Error {
    Error::capacity("graded-lex rank does not fit in 64 bits")
}

/// Position of `index` in graded-lexicographic order (0-based).
pub fn encode(index: &MultiIndex) -> Result<Rank> {
    let n = index.dim() as u128;
    let s = index.degree();
    let mut rank = count_below(s, n).ok_or_else(overflow)?;
    let mut r = s;
    for (k, &v) in index.entries().iter().enumerate() {
        let m = n - k as u128 - 1;
        if m == 0 {
            break;
        }
        let v = v as u128;
        rank = rank
            .checked_add(count_first_below(r, m, v).ok_or_else(overflow)?)
            .ok_or_else(overflow)?;
        r -= v;
    }
    Rank::try_from(rank).map_err(|_| overflow())
}

/// Inverse of [`encode`] for dimension `n`.
pub fn decode(rank: Rank, n: usize) -> Result<MultiIndex> {
    if n == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if n == 1 {
        return Ok(MultiIndex(vec![rank]));
    }
    let k = rank as u128;
    let nn = n as u128;
    // overflowing counts are larger than any u64 rank
    let below = |s: u128| count_below(s, nn).unwrap_or(u128::MAX);

    // largest s with below(s) <= k
    let mut hi: u128 = 1;
    while below(hi) <= k {
        hi *= 2;
    }
    let mut lo: u128 = 0;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if below(mid) <= k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = lo;
    let mut rem = k - below(s);
    let mut r = s;
    let mut entries = Vec::with_capacity(n);
    for pos in 0..n {
        let m = nn - pos as u128 - 1;
        if m == 0 {
            entries.push(r as u64);
            break;
        }
        // largest v in [0, r] with count_first_below(v) <= rem
        let count = |v: u128| count_first_below(r, m, v).unwrap_or(u128::MAX);
        let (mut lo, mut hi) = (0u128, r + 1);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if count(mid) <= rem {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let v = lo;
        rem -= count(v);
        r -= v;
        entries.push(v as u64);
    }
    Ok(MultiIndex(entries))
}

/// Iterator over all multi-indices of dimension `n` in graded-lex order.
#[derive(Debug, Clone)]
pub struct GradedLex {
    next: Option<MultiIndex>,
}

impl GradedLex {
    pub fn new(n: usize) -> Result<Self> {
        Ok(GradedLex {
            next: Some(MultiIndex::zero(n)?),
        })
    }
}

impl Iterator for GradedLex {
    type Item = MultiIndex;

    fn next(&mut self) -> Option<MultiIndex> {
        let current = self.next.take()?;
        self.next = current.successor().ok();
        Some(current)
    }
}

/// The first `d` multi-indices of dimension `n`, i.e. `decode(0..d, n)`.
pub fn enumerate_first(d: usize, n: usize) -> Result<Vec<MultiIndex>> {
    if d == 0 {
        return Err(Error::invalid("enumeration length must be at least 1"));
    }
    if Rank::try_from(d - 1).is_err() {
        return Err(overflow());
    }
    let out: Vec<MultiIndex> = GradedLex::new(n)?.take(d).collect();
    if out.len() < d {
        return Err(Error::capacity("multi-index enumeration exhausted"));
    }
    Ok(out)
}
