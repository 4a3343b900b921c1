//! Half-functions: integer power series with a linear growth certificate
//! |a_n| <= c (n + 1), hence absolutely convergent on |z| <= 1/2.
//!
//! Every real quantity leaving this module is an [`Enclosure`]. Tail bounds
//! use the majorant sum_{i>=0} |a_{n0+i}| 2^-i <= 8 c n0 (valid for n0 >= 1)
//! and, at reciprocal points 1/q, the closed form of c * sum_{k>=j} (k+1) q^-k.

mod enclosure;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use enclosure::Enclosure;

use crate::exact::{big_pow, serde_rational};
use crate::repcount::{self, RepTable, WaringParams};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("{id}: coefficient {index} requested but only [0, {limit}] is known")]
    Coverage { id: String, index: u64, limit: u64 },
    #[error("{id}: |a_{index}| = {value} exceeds the growth certificate c (n + 1) with c = {growth}")]
    GrowthViolation { id: String, index: u64, value: BigInt, growth: String },
    #[error("tail bound needs cutoff >= start >= 1 (start = {start}, cutoff = {cutoff})")]
    BadTailRange { start: u64, cutoff: u64 },
    #[error("evaluation point needs q >= 2, got {0}")]
    BadBase(u64),
    #[error("gap length K must be positive")]
    ZeroGapLength,
    #[error("tail bound E must be positive")]
    NonPositiveBound,
    #[error("linear combination needs equally many coefficients and functions ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("growth certificate must be nonnegative")]
    NegativeGrowth,
    #[error("sieve failed: {0}")]
    Sieve(String),
}

enum Source {
    Table(Arc<RepTable>),
    /// a_0 = value, all other coefficients zero.
    Constant(BigInt),
    /// Finitely supported, every coefficient known.
    Sparse(BTreeMap<u64, BigInt>),
    Combination(Vec<(BigInt, HalfFunction)>),
}

/// Where the zero stretch starting at some index ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailStart {
    /// Coefficients before this index are certified zero; from here on
    /// nothing is certified.
    At(u64),
    /// Every coefficient from the queried index on is zero.
    Never,
}

/// An integer power series with a certified growth bound |a_n| <= c (n + 1).
#[derive(Clone)]
pub struct HalfFunction {
    id: Arc<str>,
    growth: BigRational,
    source: Arc<Source>,
}

impl fmt::Debug for HalfFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HalfFunction")
            .field("id", &self.id)
            .field("growth", &self.growth.to_string())
            .finish()
    }
}

impl HalfFunction {
    /// f_{ell,s}(z) = sum r_{ell,s}(n) z^n backed by a sieved table, with c = 2^ell.
    pub fn from_table(table: Arc<RepTable>) -> Self {
        let id = format!("f_{{{},{}}}", table.ell(), table.s());
        let growth = BigRational::from_integer(BigInt::from(1u64 << table.ell()));
        HalfFunction { id: id.into(), growth, source: Arc::new(Source::Table(table)) }
    }

    /// f_{ell,s} for s in 0..=ell; s = 0 is the constant 1.
    pub fn rep_power(ell: u32, s: u32, limit: u64) -> Result<Self, SeriesError> {
        if s == 0 {
            let mut f = HalfFunction::constant(BigInt::one());
            f.id = format!("f_{{{ell},0}}").into();
            return Ok(f);
        }
        let params = WaringParams::new(ell, s).map_err(|e| SeriesError::Sieve(e.to_string()))?;
        let table = repcount::sieve_rep(params, limit).map_err(|e| SeriesError::Sieve(e.to_string()))?;
        Ok(HalfFunction::from_table(Arc::new(table)))
    }

    pub fn constant(value: BigInt) -> Self {
        let growth = BigRational::from_integer(value.abs());
        HalfFunction { id: format!("const({value})").into(), growth, source: Arc::new(Source::Constant(value)) }
    }

    /// A finitely supported series; the growth certificate is the smallest
    /// valid one, max |a_n| / (n + 1).
    pub fn sparse(id: impl Into<String>, coefficients: impl IntoIterator<Item = (u64, BigInt)>) -> Self {
        let map: BTreeMap<u64, BigInt> = coefficients.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        let growth = map
            .iter()
            .map(|(&n, v)| BigRational::new(v.abs(), BigInt::from(n + 1)))
            .max()
            .unwrap_or_else(BigRational::zero);
        HalfFunction { id: id.into().into(), growth, source: Arc::new(Source::Sparse(map)) }
    }

    /// Replaces the growth certificate. Accesses check against the new value.
    pub fn with_growth(mut self, growth: BigRational) -> Result<Self, SeriesError> {
        if growth.is_negative() {
            return Err(SeriesError::NegativeGrowth);
        }
        self.growth = growth;
        Ok(self)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into().into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn growth(&self) -> &BigRational {
        &self.growth
    }

    /// Largest index whose coefficient is known, or `None` if all are.
    pub fn coverage(&self) -> Option<u64> {
        match &*self.source {
            Source::Table(t) => Some(t.limit()),
            Source::Constant(_) | Source::Sparse(_) => None,
            Source::Combination(parts) => parts.iter().filter_map(|(_, f)| f.coverage()).min(),
        }
    }

    /// True when every coefficient is certified nonnegative.
    pub fn nonnegative(&self) -> bool {
        match &*self.source {
            Source::Table(_) => true,
            Source::Constant(c) => !c.is_negative(),
            Source::Sparse(m) => m.values().all(|v| !v.is_negative()),
            Source::Combination(parts) => parts.iter().all(|(a, f)| !a.is_negative() && f.nonnegative()),
        }
    }

    fn raw(&self, n: u64) -> Result<BigInt, SeriesError> {
        match &*self.source {
            Source::Table(t) => t.get(n).map(BigInt::from).ok_or_else(|| SeriesError::Coverage {
                id: self.id.to_string(),
                index: n,
                limit: t.limit(),
            }),
            Source::Constant(c) => Ok(if n == 0 { c.clone() } else { BigInt::zero() }),
            Source::Sparse(m) => Ok(m.get(&n).cloned().unwrap_or_default()),
            Source::Combination(parts) => {
                let mut acc = BigInt::zero();
                for (a, f) in parts {
                    if !a.is_zero() {
                        acc += a * f.coeff(n)?;
                    }
                }
                Ok(acc)
            }
        }
    }

    /// a_n, checked against the growth certificate.
    pub fn coeff(&self, n: u64) -> Result<BigInt, SeriesError> {
        let v = self.raw(n)?;
        let bound = &self.growth * BigRational::from_integer(BigInt::from(n + 1));
        if BigRational::from_integer(v.abs()) > bound {
            return Err(SeriesError::GrowthViolation {
                id: self.id.to_string(),
                index: n,
                value: v,
                growth: crate::exact::rational_string(&self.growth),
            });
        }
        Ok(v)
    }

    /// First index >= `from` that is not certified zero.
    pub fn tail_start(&self, from: u64) -> Result<TailStart, SeriesError> {
        Ok(match &*self.source {
            Source::Table(t) => {
                let counts = t.counts();
                match counts.iter().skip(from as usize).position(|&c| c != 0) {
                    Some(off) => TailStart::At(from + off as u64),
                    None => TailStart::At(from.max(t.limit() + 1)),
                }
            }
            Source::Constant(c) => {
                if from == 0 && !c.is_zero() {
                    TailStart::At(0)
                } else {
                    TailStart::Never
                }
            }
            Source::Sparse(m) => match m.range(from..).next() {
                Some((&n, _)) => TailStart::At(n),
                None => TailStart::Never,
            },
            Source::Combination(parts) => {
                let mut best = TailStart::Never;
                for (a, f) in parts {
                    if a.is_zero() {
                        continue;
                    }
                    if let TailStart::At(j) = f.tail_start(from)? {
                        best = match best {
                            TailStart::At(b) if b <= j => TailStart::At(b),
                            _ => TailStart::At(j),
                        };
                    }
                }
                best
            }
        })
    }
}

/// sum_{i < len} |a_{start+i}| 2^-i, exactly.
fn weighted_partial(f: &HalfFunction, start: u64, len: u64) -> Result<BigRational, SeriesError> {
    if len == 0 {
        return Ok(BigRational::zero());
    }
    let mut num = BigInt::zero();
    for i in 0..len {
        let a = f.coeff(start + i)?;
        if !a.is_zero() {
            num += a.abs() << (len - 1 - i) as usize;
        }
    }
    Ok(BigRational::new(num, BigInt::one() << (len - 1) as usize))
}

/// 8 c n0 * 2^-shift: the majorant for sum_{i>=0} |a_{n0+i}| 2^-(i+shift).
fn lemma_majorant(growth: &BigRational, n0: u64, shift: u64) -> BigRational {
    growth * BigRational::new(BigInt::from(8u64) * BigInt::from(n0), BigInt::one() << shift as usize)
}

/// Encloses sum_{i>=0} |a_{start+i}| 2^-i: exact up to `cutoff`, then the
/// growth-certificate majorant 8 c cutoff scaled by 2^-(cutoff - start).
pub fn tail_norm(f: &HalfFunction, start: u64, cutoff: u64) -> Result<Enclosure, SeriesError> {
    if start < 1 || cutoff < start {
        return Err(SeriesError::BadTailRange { start, cutoff });
    }
    let lo = weighted_partial(f, start, cutoff - start)?;
    let hi = &lo + lemma_majorant(&f.growth, cutoff, cutoff - start);
    Ok(Enclosure::new(lo, hi))
}

/// Like [`tail_norm`], but the majorant starts where the certified zero
/// stretch after `cutoff` ends, and vanishes if nothing nonzero follows.
pub fn tail_norm_sharp(f: &HalfFunction, start: u64, cutoff: u64) -> Result<Enclosure, SeriesError> {
    if start < 1 || cutoff < start {
        return Err(SeriesError::BadTailRange { start, cutoff });
    }
    let lo = weighted_partial(f, start, cutoff - start)?;
    let hi = match f.tail_start(cutoff)? {
        TailStart::Never => lo.clone(),
        TailStart::At(j) => &lo + lemma_majorant(&f.growth, j, j - start),
    };
    Ok(Enclosure::new(lo, hi))
}

/// Default exact stretch of the tail for mild-gap checks.
pub fn default_cutoff_len(k: u64) -> u64 {
    64u64.max(4 * k)
}

/// Certificate that `n` is a mild gap point of `function` with gap length
/// at least `k` and k-tail-norm at most `bound`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MildGapWitness {
    pub function: String,
    pub n: u64,
    #[serde(rename = "K")]
    pub k: u64,
    #[serde(rename = "E", with = "serde_rational")]
    pub bound: BigRational,
    pub zero_checked_up_to: u64,
    pub tail_enclosure: Enclosure,
}

impl MildGapWitness {
    /// Re-checks both clauses against raw coefficients of `f`.
    pub fn replay(&self, f: &HalfFunction) -> Result<bool, SeriesError> {
        for k in 0..self.k {
            if !f.coeff(self.n + k)?.is_zero() {
                return Ok(false);
            }
        }
        let start = self.n + self.k;
        let cutoff = start + default_cutoff_len(self.k);
        let tail = tail_norm_sharp(f, start, cutoff)?;
        Ok(tail.hi() <= &self.bound && tail == self.tail_enclosure)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum MildGapVerdict {
    Witness(MildGapWitness),
    /// a_index != 0 inside the required gap.
    GapFails { index: u64, #[serde(with = "crate::exact::serde_bigint_str")] value: BigInt },
    /// The tail is certainly larger than E.
    TailExceeds { tail_enclosure: Enclosure },
    /// lo <= E < hi: undecided at this cutoff.
    Inconclusive { tail_enclosure: Enclosure },
}

impl MildGapVerdict {
    pub fn witness(&self) -> Option<&MildGapWitness> {
        match self {
            MildGapVerdict::Witness(w) => Some(w),
            _ => None,
        }
    }

    pub fn is_inconclusive(&self) -> bool {
        matches!(self, MildGapVerdict::Inconclusive { .. })
    }
}

/// Decides n in MildGap(f; K, E) with the default cutoff.
pub fn is_mild_gap(f: &HalfFunction, n: u64, k: u64, bound: &BigRational) -> Result<MildGapVerdict, SeriesError> {
    is_mild_gap_with_cutoff(f, n, k, bound, default_cutoff_len(k))
}

pub fn is_mild_gap_with_cutoff(
    f: &HalfFunction,
    n: u64,
    k: u64,
    bound: &BigRational,
    cutoff_len: u64,
) -> Result<MildGapVerdict, SeriesError> {
    if k == 0 {
        return Err(SeriesError::ZeroGapLength);
    }
    if !bound.is_positive() {
        return Err(SeriesError::NonPositiveBound);
    }
    for i in 0..k {
        let v = f.coeff(n + i)?;
        if !v.is_zero() {
            return Ok(MildGapVerdict::GapFails { index: n + i, value: v });
        }
    }
    let start = n + k;
    let tail = tail_norm_sharp(f, start, start + cutoff_len)?;
    Ok(if tail.hi() <= bound {
        MildGapVerdict::Witness(MildGapWitness {
            function: f.id().to_string(),
            n,
            k,
            bound: bound.clone(),
            zero_checked_up_to: n + k - 1,
            tail_enclosure: tail,
        })
    } else if tail.lo() > bound {
        MildGapVerdict::TailExceeds { tail_enclosure: tail }
    } else {
        MildGapVerdict::Inconclusive { tail_enclosure: tail }
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MildGapScan {
    pub witnesses: Vec<MildGapWitness>,
    pub inconclusive: Vec<u64>,
}

/// Every index in `range` that is a certified mild gap point, ascending.
pub fn scan_mild_gaps(
    f: &HalfFunction,
    range: Range<u64>,
    k: u64,
    bound: &BigRational,
) -> Result<MildGapScan, SeriesError> {
    let verdicts: Vec<(u64, MildGapVerdict)> = range
        .into_par_iter()
        .map(|n| is_mild_gap(f, n, k, bound).map(|v| (n, v)))
        .collect::<Result<_, _>>()?;
    let mut scan = MildGapScan::default();
    for (n, v) in verdicts {
        match v {
            MildGapVerdict::Witness(w) => scan.witnesses.push(w),
            MildGapVerdict::Inconclusive { .. } => scan.inconclusive.push(n),
            _ => {}
        }
    }
    Ok(scan)
}

/// sum_{k < terms} a_k q^-k, reduced. The denominator divides q^(terms-1).
pub fn eval_truncated(f: &HalfFunction, q: u64, terms: u64) -> Result<BigRational, SeriesError> {
    if q < 2 {
        return Err(SeriesError::BadBase(q));
    }
    partial_sum(f, q, 0, terms)
}

/// sum_{from <= k < to} a_k q^-k, exactly.
pub fn partial_sum(f: &HalfFunction, q: u64, from: u64, to: u64) -> Result<BigRational, SeriesError> {
    if to <= from {
        return Ok(BigRational::zero());
    }
    // Horner from the top: numerator over q^(to-1)
    let qb = BigInt::from(q);
    let mut num = BigInt::zero();
    for k in from..to {
        num = num * &qb + f.coeff(k)?;
    }
    Ok(BigRational::new(num, BigInt::from(big_pow(q, to - 1))))
}

/// c * sum_{k >= j} (k + 1) q^-k in closed form:
/// c q^-j ( (j+1) q / (q-1) + q / (q-1)^2 ).
pub fn reciprocal_majorant(growth: &BigRational, q: u64, j: u64) -> BigRational {
    let qb = BigInt::from(q);
    let q1 = BigInt::from(q - 1);
    let inner = BigRational::new(BigInt::from(j + 1) * &qb, q1.clone())
        + BigRational::new(qb, &q1 * &q1);
    growth * inner / BigRational::from_integer(BigInt::from(big_pow(q, j)))
}

/// Encloses f(1/q) from the first `terms` coefficients plus a tail majorant
/// starting where the certified zero stretch after `terms` ends. For series
/// with nonnegative coefficients the lower end is the partial sum itself.
pub fn eval_enclosure(f: &HalfFunction, q: u64, terms: u64) -> Result<Enclosure, SeriesError> {
    let t = eval_truncated(f, q, terms)?;
    let radius = match f.tail_start(terms)? {
        TailStart::Never => return Ok(Enclosure::point(t)),
        TailStart::At(j) => reciprocal_majorant(&f.growth, q, j),
    };
    if f.nonnegative() {
        let hi = &t + &radius;
        Ok(Enclosure::new(t, hi))
    } else {
        Ok(Enclosure::around(&t, &radius))
    }
}

/// sum_j alpha_j f_j with growth certificate sum_j |alpha_j| c_j.
pub fn linear_combination(alphas: &[BigInt], fs: &[HalfFunction]) -> Result<HalfFunction, SeriesError> {
    if alphas.len() != fs.len() {
        return Err(SeriesError::LengthMismatch(alphas.len(), fs.len()));
    }
    let growth = alphas
        .iter()
        .zip(fs)
        .map(|(a, f)| BigRational::from_integer(a.abs()) * &f.growth)
        .fold(BigRational::zero(), |acc, x| acc + x);
    let id = alphas
        .iter()
        .zip(fs)
        .map(|(a, f)| format!("{a}*{}", f.id()))
        .collect::<Vec<_>>()
        .join(" + ");
    let parts = alphas.iter().cloned().zip(fs.iter().cloned()).collect();
    Ok(HalfFunction { id: id.into(), growth, source: Arc::new(Source::Combination(parts)) })
}
