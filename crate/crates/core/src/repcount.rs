//! Representation counts r_{ell,s}(n): the number of ordered s-tuples of
//! nonnegative integers whose ell-th powers sum to n.
//!
//! Tables are built by iterated convolution with the indicator of ell-th
//! powers. Each fold is split into fixed-size output segments that are
//! filled independently, so the result is identical for any worker count.

use std::io::{self, Read, Write};

use num_bigint::BigUint;
use num_rational::{BigRational, Ratio};
use num_traits::Pow;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{self, floor_root};

/// Output segment length for one sieve work item (fits comfortably in L2).
const SEGMENT: usize = 1 << 15;

pub const WRT_MAGIC: &[u8; 4] = b"WRT1";

#[derive(Debug, Error)]
pub enum RepError {
    #[error("exponent ell must be 3 or 4, got {0}")]
    BadExponent(u32),
    #[error("number of summands s must satisfy 1 <= s <= ell, got s = {s} for ell = {ell}")]
    BadSummands { ell: u32, s: u32 },
    #[error("limit {limit} too large: bound 2^ell (N+1) = {ceiling} exceeds the u32 counter width")]
    CounterWidth { limit: u64, ceiling: u128 },
    #[error("counter overflow at n = {0}")]
    Overflow(usize),
    #[error("table covers [0, {limit}] but index {index} was requested")]
    Coverage { limit: u64, index: u64 },
    #[error("exceptional-set exponent must be < 1, got {0}")]
    ExponentTooLarge(Ratio<u64>),
    #[error("exceptional-set scan needs a (4, 4) table, got ({ell}, {s})")]
    WrongTable { ell: u32, s: u32 },
    #[error("malformed table file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WaringParams {
    ell: u32,
    s: u32,
}

impl WaringParams {
    pub fn new(ell: u32, s: u32) -> Result<Self, RepError> {
        if ell != 3 && ell != 4 {
            return Err(RepError::BadExponent(ell));
        }
        if s < 1 || s > ell {
            return Err(RepError::BadSummands { ell, s });
        }
        Ok(WaringParams { ell, s })
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn s(&self) -> u32 {
        self.s
    }
}

/// Sieved values of r_{ell,s}(n) for 0 <= n <= limit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepTable {
    params: WaringParams,
    limit: u64,
    counts: Vec<u32>,
}

/// The loose bound 2^ell (n + 1) on any r_{ell,s}(n).
pub fn loose_bound(ell: u32, n: u64) -> u128 {
    (1u128 << ell) * (n as u128 + 1)
}

fn check_width(ell: u32, limit: u64) -> Result<(), RepError> {
    let ceiling = loose_bound(ell, limit);
    if ceiling > u32::MAX as u128 {
        return Err(RepError::CounterWidth { limit, ceiling });
    }
    Ok(())
}

impl RepTable {
    /// Builds a table from raw counts, checking the width ceiling and the
    /// loose bound. Does not re-verify the counts against a sieve.
    pub fn from_counts(params: WaringParams, counts: Vec<u32>) -> Result<Self, RepError> {
        if counts.is_empty() {
            return Err(RepError::Format("empty count vector".into()));
        }
        let limit = (counts.len() - 1) as u64;
        check_width(params.ell, limit)?;
        if counts[0] != 1 {
            return Err(RepError::Format(format!("counts[0] = {} (expected 1)", counts[0])));
        }
        if let Some((n, &c)) = counts
            .iter()
            .enumerate()
            .find(|(n, &c)| c as u128 > loose_bound(params.ell, *n as u64))
        {
            return Err(RepError::Format(format!("counts[{n}] = {c} violates 2^ell (n+1)")));
        }
        Ok(RepTable { params, limit, counts })
    }

    pub fn params(&self) -> WaringParams {
        self.params
    }

    pub fn ell(&self) -> u32 {
        self.params.ell
    }

    pub fn s(&self) -> u32 {
        self.params.s
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn get(&self, n: u64) -> Option<u32> {
        self.counts.get(usize::try_from(n).ok()?).copied()
    }

    pub fn try_get(&self, n: u64) -> Result<u32, RepError> {
        self.get(n).ok_or(RepError::Coverage { limit: self.limit, index: n })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), RepError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["n", "count"])?;
        for (n, c) in self.counts.iter().enumerate() {
            wr.write_record([n.to_string(), c.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(params: WaringParams, r: R) -> Result<Self, RepError> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["n", "count"] {
            return Err(RepError::Format(format!("expected header n,count, got {headers:?}")));
        }
        let mut counts = Vec::new();
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            let n: usize = rec[0].parse().map_err(|e| RepError::Format(format!("row {row}: {e}")))?;
            if n != row {
                return Err(RepError::Format(format!("row {row} has n = {n}")));
            }
            counts.push(rec[1].parse().map_err(|e| RepError::Format(format!("row {row}: {e}")))?);
        }
        Self::from_counts(params, counts)
    }

    /// Binary layout: `WRT1`, then ell, s, N, byte width as u64 little-endian,
    /// then N+1 counts as little-endian integers of that width.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<(), RepError> {
        let width = 4u64;
        w.write_all(WRT_MAGIC)?;
        for v in [self.params.ell as u64, self.params.s as u64, self.limit, width] {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.counts.len() * 4);
        for c in &self.counts {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, RepError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != WRT_MAGIC {
            return Err(RepError::Format(format!("bad magic {magic:?}")));
        }
        let mut header = [0u64; 4];
        for h in header.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *h = u64::from_le_bytes(b);
        }
        let [ell, s, limit, width] = header;
        let params = WaringParams::new(
            u32::try_from(ell).map_err(|_| RepError::BadExponent(u32::MAX))?,
            u32::try_from(s).map_err(|_| RepError::Format("s out of range".into()))?,
        )?;
        check_width(params.ell, limit)?;
        if !matches!(width, 1 | 2 | 4 | 8) {
            return Err(RepError::Format(format!("unsupported byte width {width}")));
        }
        let len = limit as usize + 1;
        let mut raw = vec![0u8; len * width as usize];
        r.read_exact(&mut raw)?;
        let mut counts = Vec::with_capacity(len);
        for chunk in raw.chunks_exact(width as usize) {
            let mut b = [0u8; 8];
            b[..chunk.len()].copy_from_slice(chunk);
            let v = u64::from_le_bytes(b);
            counts.push(u32::try_from(v).map_err(|_| RepError::Format(format!("count {v} exceeds u32")))?);
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(RepError::Format("trailing bytes after counts".into()));
        }
        Self::from_counts(params, counts)
    }
}

/// The ell-th powers that are <= limit, ascending.
pub fn powers_up_to(ell: u32, limit: u64) -> Vec<u64> {
    (0..=floor_root(ell, limit)).map(|x| x.pow(ell)).collect()
}

/// Sieves r_{ell,s}(n) for all n <= limit.
pub fn sieve_rep(params: WaringParams, limit: u64) -> Result<RepTable, RepError> {
    check_width(params.ell, limit)?;
    let len = usize::try_from(limit)
        .ok()
        .and_then(|l| l.checked_add(1))
        .ok_or(RepError::CounterWidth { limit, ceiling: u128::MAX })?;
    let powers: Vec<usize> = powers_up_to(params.ell, limit).into_iter().map(|p| p as usize).collect();

    let mut counts = vec![0u32; len];
    for &p in &powers {
        counts[p] = 1;
    }
    for _ in 1..params.s {
        counts = fold_with_powers(&counts, &powers)?;
    }
    Ok(RepTable { params, limit, counts })
}

/// One convolution step: out[n] = sum over powers p <= n of prev[n - p].
fn fold_with_powers(prev: &[u32], powers: &[usize]) -> Result<Vec<u32>, RepError> {
    let len = prev.len();
    let mut out = vec![0u32; len];
    out.par_chunks_mut(SEGMENT)
        .enumerate()
        .try_for_each(|(seg, chunk)| -> Result<(), RepError> {
            let base = seg * SEGMENT;
            let end = base + chunk.len();
            for &p in powers {
                if p >= end {
                    break;
                }
                // n in [max(base, p), end), source index n - p
                let from = base.max(p);
                let src = &prev[from - p..end - p];
                for (slot, &v) in chunk[from - base..].iter_mut().zip(src) {
                    *slot = slot.checked_add(v).ok_or(RepError::Overflow(base))?;
                }
            }
            Ok(())
        })?;
    Ok(out)
}

/// Result of the greedy cube/biquadrate subtraction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyDecomposition {
    pub parts: Vec<u64>,
    pub n: u64,
}

/// Repeatedly subtracts the largest ell-th power not exceeding the remainder.
pub fn greedy_decompose(ell: u32, b: u64) -> GreedyDecomposition {
    let mut rest = b;
    let mut parts = Vec::with_capacity(ell as usize);
    for _ in 0..ell {
        let x = floor_root(ell, rest);
        rest -= x.pow(ell);
        parts.push(x);
    }
    GreedyDecomposition { parts, n: b - rest }
}

/// `(b - n)^27 < 25^27 * b^8`, i.e. `b - n < 25 b^(8/27)`, decided exactly.
pub fn greedy_bound_holds(b: u64, n: u64) -> bool {
    assert!(n <= b);
    exact::lt_scaled_power(b - n, &Ratio::from_integer(25), b, &Ratio::new(8, 27))
}

/// A maximal run of zero counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapRun {
    pub start: u64,
    pub length: u64,
    /// The run reaches the last index of the table, so its true length may be larger.
    pub truncated: bool,
}

/// All maximal zero runs of length >= `min_len`, ascending by start.
pub fn find_gap_runs(table: &RepTable, min_len: u64) -> Vec<GapRun> {
    assert!(min_len >= 1, "minimum gap length must be positive");
    let counts = table.counts();
    let mut runs = Vec::new();
    let mut n = 0usize;
    while n < counts.len() {
        if counts[n] != 0 {
            n += 1;
            continue;
        }
        let start = n;
        while n < counts.len() && counts[n] == 0 {
            n += 1;
        }
        let length = (n - start) as u64;
        if length >= min_len {
            runs.push(GapRun { start: start as u64, length, truncated: n == counts.len() });
        }
    }
    runs
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExceptionalSet {
    pub limit: u64,
    #[serde(with = "crate::exact::serde_rational")]
    pub exponent: BigRational,
    pub members: Vec<u64>,
    /// #A_N / N.
    #[serde(with = "crate::exact::serde_rational")]
    pub density: BigRational,
}

/// The a in [1, N] for which r_{4,4}(n) = 0 at every integer n in
/// (a - a^(4059/16384 + eps), a].
pub fn scan_exceptional_set(
    limit: u64,
    epsilon: Ratio<u64>,
    table: &RepTable,
) -> Result<ExceptionalSet, RepError> {
    if table.ell() != 4 || table.s() != 4 {
        return Err(RepError::WrongTable { ell: table.ell(), s: table.s() });
    }
    if table.limit() < limit {
        return Err(RepError::Coverage { limit: table.limit(), index: limit });
    }
    let exponent = Ratio::new(4059u64, 16384) + epsilon;
    if exponent >= Ratio::from_integer(1) {
        return Err(RepError::ExponentTooLarge(exponent));
    }
    let (p, q) = (*exponent.numer(), *exponent.denom());
    let q32 = u32::try_from(q).map_err(|_| RepError::Format("exponent denominator exceeds u32".into()))?;

    // prefix[i] = number of nonzero counts among indices < i
    let counts = table.counts();
    let mut prefix = Vec::with_capacity(limit as usize + 2);
    prefix.push(0u64);
    for &c in &counts[..=limit as usize] {
        prefix.push(prefix.last().unwrap() + u64::from(c != 0));
    }

    // d_max(a) = largest d with d^q < a^p; nondecreasing in a, so advance it.
    let mut d = 0u64;
    let mut members = Vec::new();
    for a in 1..=limit {
        let ap = exact::big_pow(a, p);
        while BigUint::from(d + 1).pow(q32) < ap {
            d += 1;
        }
        let lo = a - d; // d < a since d^q < a^p <= a^q
        if prefix[a as usize + 1] - prefix[lo as usize] == 0 {
            members.push(a);
        }
    }
    let density = BigRational::new(
        (members.len() as u64).into(),
        limit.max(1).into(),
    );
    Ok(ExceptionalSet {
        limit,
        exponent: BigRational::new((*exponent.numer()).into(), (*exponent.denom()).into()),
        members,
        density,
    })
}
