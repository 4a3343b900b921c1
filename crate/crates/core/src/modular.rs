//! Counting solutions of x_1^ell + ... + x_ell^ell = m (mod M).

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModularError {
    #[error("modulus must be positive")]
    ZeroModulus,
    #[error("moduli {0} and {1} are not coprime")]
    NotCoprime(u64, u64),
    #[error("exponents differ: {0} vs {1}")]
    ExponentMismatch(u32, u32),
    #[error("modulus {0} too large for an in-memory profile")]
    TooLarge(u64),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Largest modulus for which a dense profile is built.
pub const MAX_MODULUS: u64 = 1 << 24;

/// h[v] = #{x in Z/MZ : x^ell = v}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PowerHistogram {
    pub ell: u32,
    pub modulus: u64,
    pub h: Vec<u64>,
}

impl PowerHistogram {
    /// Nonzero entries as (residue, multiplicity), ascending.
    pub fn support(&self) -> BTreeMap<u64, u64> {
        self.h
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(v, &c)| (v as u64, c))
            .collect()
    }
}

fn pow_mod(x: u64, e: u32, m: u64) -> u64 {
    let m = m as u128;
    let mut acc = 1u128 % m;
    let x = x as u128 % m;
    for _ in 0..e {
        acc = acc * x % m;
    }
    acc as u64
}

pub fn power_histogram(ell: u32, modulus: u64) -> Result<PowerHistogram, ModularError> {
    if modulus == 0 {
        return Err(ModularError::ZeroModulus);
    }
    if modulus > MAX_MODULUS {
        return Err(ModularError::TooLarge(modulus));
    }
    let mut h = vec![0u64; modulus as usize];
    for x in 0..modulus {
        h[pow_mod(x, ell, modulus) as usize] += 1;
    }
    Ok(PowerHistogram { ell, modulus, h })
}

/// r[m] = r_{ell,ell}(m, M) for every residue m.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidueProfile {
    pub ell: u32,
    pub modulus: u64,
    pub r: Vec<BigUint>,
}

impl ResidueProfile {
    /// r_{ell,ell}(m, M) for any integer m.
    pub fn count(&self, m: i64) -> &BigUint {
        let idx = m.rem_euclid(self.modulus as i64) as usize;
        &self.r[idx]
    }

    pub fn count_u(&self, m: u64) -> &BigUint {
        &self.r[(m % self.modulus) as usize]
    }

    /// M^(ell-1), the normalizer for qualities.
    pub fn scale(&self) -> BigUint {
        BigUint::from(self.modulus).pow(self.ell - 1)
    }

    /// r(m, M) / M^(ell-1) as an exact rational.
    pub fn quality(&self, m: u64) -> BigRational {
        BigRational::new(BigInt::from(self.count_u(m).clone()), BigInt::from(self.scale()))
    }

    /// max over all residues of r(m', M) / M^(ell-1).
    pub fn global_quality(&self) -> BigRational {
        let max = self.r.iter().max().cloned().unwrap_or_default();
        BigRational::new(BigInt::from(max), BigInt::from(self.scale()))
    }

    pub fn total(&self) -> BigUint {
        self.r.iter().sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), ModularError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["m", "count"])?;
        for (m, c) in self.r.iter().enumerate() {
            wr.write_record([m.to_string(), c.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Cyclic convolution of two count vectors over Z/MZ, skipping zero entries.
fn cyclic_convolve(a: &[u128], b: &[u128]) -> Vec<u128> {
    let m = a.len();
    let mut out = vec![0u128; m];
    let b_support: Vec<(usize, u128)> = b.iter().copied().enumerate().filter(|&(_, c)| c != 0).collect();
    for (i, &ca) in a.iter().enumerate() {
        if ca == 0 {
            continue;
        }
        for &(j, cb) in &b_support {
            let k = if i + j >= m { i + j - m } else { i + j };
            out[k] += ca * cb;
        }
    }
    out
}

/// Computes r_{ell,ell}(., M) by ell - 1 cyclic self-convolutions of the
/// power histogram. Counts never exceed M^ell < 2^128 for M <= MAX_MODULUS.
pub fn residue_counts(ell: u32, modulus: u64) -> Result<ResidueProfile, ModularError> {
    let hist = power_histogram(ell, modulus)?;
    let h: Vec<u128> = hist.h.iter().map(|&c| c as u128).collect();
    let mut acc = h.clone();
    for _ in 1..ell {
        acc = cyclic_convolve(&acc, &h);
    }
    Ok(ResidueProfile { ell, modulus, r: acc.into_iter().map(BigUint::from).collect() })
}

/// Combines profiles for coprime moduli into the profile mod M1 * M2.
pub fn crt_combine(p1: &ResidueProfile, p2: &ResidueProfile) -> Result<ResidueProfile, ModularError> {
    if p1.ell != p2.ell {
        return Err(ModularError::ExponentMismatch(p1.ell, p2.ell));
    }
    if p1.modulus.gcd(&p2.modulus) != 1 {
        return Err(ModularError::NotCoprime(p1.modulus, p2.modulus));
    }
    let modulus = p1
        .modulus
        .checked_mul(p2.modulus)
        .filter(|&m| m <= MAX_MODULUS)
        .ok_or(ModularError::TooLarge(p1.modulus.saturating_mul(p2.modulus)))?;
    let r = (0..modulus).map(|m| p1.count_u(m) * p2.count_u(m)).collect();
    Ok(ResidueProfile { ell: p1.ell, modulus, r })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapModulusReport {
    pub ell: u32,
    #[serde(rename = "M")]
    pub modulus: u64,
    pub m: u64,
    #[serde(rename = "K1")]
    pub k1: u64,
    /// r(m + k, M) / M^(ell-1) for 0 <= k < K1.
    #[serde(with = "crate::exact::serde_rational_vec")]
    pub per_k_quality: Vec<BigRational>,
    #[serde(with = "crate::exact::serde_rational")]
    pub global_quality: BigRational,
    pub meets_iii: bool,
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    /// CRT products of pool elements are explored up to this modulus.
    pub product_bound: u64,
    /// Only residues m with m < m_limit(M) are considered; `None` allows all.
    pub m_limit: Option<fn(u64) -> u64>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { product_bound: 1 << 12, m_limit: None }
    }
}

/// Every product of pairwise coprime, distinct pool elements that stays within
/// `bound`, ascending, with its factorization.
pub fn coprime_products(pool: &[u64], bound: u64) -> Vec<(u64, Vec<u64>)> {
    let mut elems: Vec<u64> = pool.iter().copied().filter(|&p| p >= 1 && p <= bound).collect();
    elems.sort_unstable();
    elems.dedup();
    let mut found: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    fn rec(elems: &[u64], start: usize, prod: u64, parts: &mut Vec<u64>, bound: u64, found: &mut BTreeMap<u64, Vec<u64>>) {
        for i in start..elems.len() {
            let e = elems[i];
            if parts.iter().any(|&p| p.gcd(&e) != 1) {
                continue;
            }
            let Some(next) = prod.checked_mul(e).filter(|&v| v <= bound) else { continue };
            parts.push(e);
            found.entry(next).or_insert_with(|| parts.clone());
            rec(elems, i + 1, next, parts, bound, found);
            parts.pop();
        }
    }
    rec(&elems, 0, 1, &mut Vec::new(), bound, &mut found);
    found.into_iter().collect()
}

/// Desk-scale search for (M, m) with small counts on m, ..., m + K1 - 1.
///
/// Candidates are the pool elements and their coprime products within the
/// product bound, in ascending order. The minimizer of
/// max_k r(m + k, M) / M^(ell-1) wins; ties go to smaller M, then smaller m.
/// Returns `None` when no candidate reaches the threshold 1 / (2 K1).
pub fn search_gap_modulus(
    ell: u32,
    k1: u64,
    pool: &[u64],
    opts: &SearchOptions,
) -> Result<Option<GapModulusReport>, ModularError> {
    assert!(k1 >= 1, "K1 must be positive");
    let threshold = BigRational::new(BigInt::one(), BigInt::from(2 * k1));
    let mut cache: HashMap<u64, ResidueProfile> = HashMap::new();
    let mut best: Option<(BigRational, GapModulusReport)> = None;

    for (modulus, parts) in coprime_products(pool, opts.product_bound) {
        let mut profile: Option<ResidueProfile> = None;
        for &p in &parts {
            let pp = match cache.get(&p) {
                Some(pp) => pp.clone(),
                None => {
                    let pp = residue_counts(ell, p)?;
                    cache.insert(p, pp.clone());
                    pp
                }
            };
            profile = Some(match profile {
                None => pp,
                Some(acc) => crt_combine(&acc, &pp)?,
            });
        }
        let profile = profile.expect("nonempty factorization");
        let m_end = opts.m_limit.map_or(modulus, |f| f(modulus).min(modulus));
        let Some((m, worst)) = best_window(&profile, k1, m_end) else { continue };
        let scale = BigInt::from(profile.scale());
        let worst_q = BigRational::new(BigInt::from(worst), scale);
        let better = match &best {
            None => true,
            Some((q, _)) => worst_q < *q,
        };
        if better {
            let per_k_quality = (0..k1).map(|k| profile.quality(m + k)).collect();
            let report = GapModulusReport {
                ell,
                modulus,
                m,
                k1,
                per_k_quality,
                global_quality: profile.global_quality(),
                meets_iii: worst_q <= threshold,
            };
            best = Some((worst_q, report));
        }
    }
    Ok(best.map(|(_, r)| r).filter(|r| r.meets_iii))
}

/// The residue m < m_end minimizing max_{k<K1} r(m+k, M); first minimizer wins.
fn best_window(profile: &ResidueProfile, k1: u64, m_end: u64) -> Option<(u64, BigUint)> {
    let mut best: Option<(u64, BigUint)> = None;
    for m in 0..m_end {
        let worst = (0..k1).map(|k| profile.count_u(m + k)).max().expect("K1 >= 1").clone();
        if best.as_ref().map_or(true, |(_, b)| worst < *b) {
            let zero = worst.is_zero();
            best = Some((m, worst));
            if zero {
                break;
            }
        }
    }
    best
}

/// Small helper used by reports: r as u64 when it fits.
pub fn count_as_u64(v: &BigUint) -> Option<u64> {
    v.to_u64()
}
