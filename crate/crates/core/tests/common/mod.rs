//! Independent brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::Zero;

/// r_{ell,s}(n) for n <= limit by enumerating ordered tuples.
pub fn rep_oracle(ell: u32, s: u32, limit: u64) -> Vec<u32> {
    let mut bases = Vec::new();
    let mut x = 0u64;
    while x.pow(ell) <= limit {
        bases.push(x.pow(ell));
        x += 1;
    }
    let mut out = vec![0u32; limit as usize + 1];
    fn rec(bases: &[u64], left: u32, acc: u64, limit: u64, out: &mut [u32]) {
        if left == 0 {
            out[acc as usize] += 1;
            return;
        }
        for &p in bases {
            if acc + p > limit {
                break;
            }
            rec(bases, left - 1, acc + p, limit, out);
        }
    }
    rec(&bases, s, 0, limit, &mut out);
    out
}

/// Number of (x_1..x_ell) in (Z/MZ)^ell with sum of ell-th powers = m (mod M).
pub fn residue_oracle(ell: u32, modulus: u64) -> Vec<BigUint> {
    let pw: Vec<u64> = (0..modulus).map(|x| mod_pow(x, ell, modulus)).collect();
    let mut out = vec![0u64; modulus as usize];
    fn rec(pw: &[u64], left: u32, acc: u64, m: u64, out: &mut [u64]) {
        if left == 0 {
            out[acc as usize] += 1;
            return;
        }
        for &p in pw {
            rec(pw, left - 1, (acc + p) % m, m, out);
        }
    }
    rec(&pw, ell, 0, modulus, &mut out);
    out.into_iter().map(BigUint::from).collect()
}

pub fn mod_pow(x: u64, e: u32, m: u64) -> u64 {
    let mut acc = 1 % m;
    for _ in 0..e {
        acc = acc * x % m;
    }
    acc
}

/// Exact sum of a_i 2^-i over a finite list.
pub fn weighted_sum(a: &[u64]) -> BigRational {
    a.iter().enumerate().fold(BigRational::zero(), |acc, (i, &v)| {
        acc + BigRational::new(v.into(), (BigUint::from(1u32) << i).into())
    })
}

/// sum_{i >= j} (b + i) 2^-i = 2^(1-j) (b + j + 1), the closed form for a
/// linear majorant past the last explicit term.
pub fn linear_tail(b: u64, j: u64) -> BigRational {
    BigRational::new((2 * (b + j + 1)).into(), (BigUint::from(1u32) << j as usize).into())
}
