//! Maier matrix counting: many n = m (mod M) whose next K + 1 counts are small.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::report::{Report, Verdict};
use super::CertifyError;
use crate::exact::{rational_string, serde_rational, serde_rational_vec};
use crate::modular::{residue_counts, ResidueProfile};
use crate::repcount::RepTable;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaierCertificate {
    pub ell: u32,
    #[serde(rename = "K")]
    pub k: u64,
    #[serde(rename = "M")]
    pub modulus: u64,
    pub m: u64,
    #[serde(with = "serde_rational_vec")]
    pub eps: Vec<BigRational>,
    #[serde(rename = "bigE")]
    pub big_e: Vec<u64>,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(with = "serde_rational")]
    pub alpha: BigRational,
}

/// sum_k eps_k / (E_k + 1).
pub fn schedule_alpha(eps: &[BigRational], big_e: &[u64]) -> BigRational {
    eps.iter()
        .zip(big_e)
        .map(|(e, &b)| e / BigRational::from_integer(BigInt::from(b) + 1))
        .fold(BigRational::zero(), |a, x| a + x)
}

impl MaierCertificate {
    /// Builds a certificate with alpha computed from the schedule.
    pub fn new(ell: u32, k: u64, modulus: u64, m: u64, eps: Vec<BigRational>, big_e: Vec<u64>, n: u64) -> Self {
        let alpha = schedule_alpha(&eps, &big_e);
        MaierCertificate { ell, k, modulus, m, eps, big_e, n, alpha }
    }

    /// (1 - alpha) / 2^ell * N / M.
    pub fn lower_bound(&self) -> BigRational {
        (BigRational::one() - &self.alpha) / BigRational::from_integer(BigInt::from(1u64 << self.ell))
            * BigRational::new(BigInt::from(self.n), BigInt::from(self.modulus))
    }
}

/// All n in [0, N - K) with n = m (mod M) and r(n + k) <= E_k for 0 <= k <= K.
pub fn maier_members(table: &RepTable, modulus: u64, m: u64, n_total: u64, big_e: &[u64]) -> Result<Vec<u64>, CertifyError> {
    let k = big_e.len() as u64 - 1;
    if n_total == 0 || n_total <= k {
        return Ok(Vec::new());
    }
    if table.limit() < n_total - 1 {
        return Err(CertifyError::Coverage { needed: n_total - 1, available: table.limit() });
    }
    let counts = table.counts();
    let end = n_total - k;
    let mut out = Vec::new();
    let mut n = m;
    while n < end {
        let base = n as usize;
        if big_e.iter().enumerate().all(|(i, &e)| u64::from(counts[base + i]) <= e) {
            out.push(n);
        }
        n += modulus;
    }
    Ok(out)
}

/// Checks every certificate invariant, counts the qualifying n and compares
/// against (1 - alpha) / 2^ell * N / M.
pub fn verify_maier(cert: &MaierCertificate, table: &RepTable, profile: &ResidueProfile) -> Result<Report, CertifyError> {
    if profile.modulus != cert.modulus || profile.ell != cert.ell {
        return Err(CertifyError::Precondition(format!(
            "profile is for (ell, M) = ({}, {}), certificate needs ({}, {})",
            profile.ell, profile.modulus, cert.ell, cert.modulus
        )));
    }
    if table.ell() != cert.ell || table.s() != cert.ell {
        return Err(CertifyError::Precondition(format!(
            "table is r_{{{},{}}}, certificate needs r_{{{ell},{ell}}}",
            table.ell(),
            table.s(),
            ell = cert.ell
        )));
    }
    let mut report = Report::new(serde_json::to_value(cert)?);
    let mut valid = true;

    let lengths_ok = cert.eps.len() as u64 == cert.k + 1 && cert.big_e.len() as u64 == cert.k + 1;
    valid &= report.push(
        "schedule has K+1 entries",
        Verdict::from_bool(lengths_ok),
        json!({"eps": cert.eps.len(), "bigE": cert.big_e.len(), "K": cert.k}),
    ) == Verdict::Pass;
    if !lengths_ok {
        return Ok(report.finish(Verdict::Invalid, json!({"reason": "schedule length mismatch"})));
    }
    let eps_positive = cert.eps.iter().all(|e| e.is_positive());
    valid &= report.push("eps_k > 0", Verdict::from_bool(eps_positive), json!(null)) == Verdict::Pass;

    let computed = schedule_alpha(&cert.eps, &cert.big_e);
    valid &= report.push(
        "alpha = sum eps_k/(E_k+1)",
        Verdict::from_bool(computed == cert.alpha),
        json!({"declared": rational_string(&cert.alpha), "computed": rational_string(&computed)}),
    ) == Verdict::Pass;
    let alpha_ok = cert.alpha < BigRational::one();
    report.push("alpha < 1", Verdict::from_bool(alpha_ok), json!({"alpha": rational_string(&cert.alpha)}));
    if !alpha_ok {
        return Ok(report.finish(Verdict::Invalid, json!({"reason": "alpha >= 1, not counted"})));
    }

    valid &= report.push(
        "m + K < M",
        Verdict::from_bool(cert.m + cert.k < cert.modulus),
        json!({"m": cert.m, "K": cert.k, "M": cert.modulus}),
    ) == Verdict::Pass;
    let m_pow = BigUint::from(cert.modulus).pow(cert.ell);
    valid &= report.push(
        "N >= M^ell",
        Verdict::from_bool(BigUint::from(cert.n) >= m_pow),
        json!({"N": cert.n, "M^ell": m_pow.to_string()}),
    ) == Verdict::Pass;

    let scale = BigRational::from_integer(BigInt::from(profile.scale()));
    let bad_k: Vec<u64> = (0..=cert.k)
        .filter(|&k| {
            let r = BigRational::from_integer(BigInt::from(profile.count_u(cert.m + k).clone()));
            r > &cert.eps[k as usize] * &scale
        })
        .collect();
    valid &= report.push(
        "r(m+k, M) <= eps_k M^(ell-1)",
        Verdict::from_bool(bad_k.is_empty()),
        json!({"violating_k": bad_k}),
    ) == Verdict::Pass;

    let members = maier_members(table, cert.modulus, cert.m, cert.n, &cert.big_e)?;
    let count = members.len() as u64;
    let bound = cert.lower_bound();
    let pass = BigRational::from_integer(BigInt::from(count)) >= bound;
    report.push(
        "count >= (1-alpha)/2^ell * N/M",
        Verdict::from_bool(pass),
        json!({"count": count, "bound": rational_string(&bound)}),
    );
    let verdict = if !valid { Verdict::Invalid } else { Verdict::from_bool(pass) };
    Ok(report.finish(
        verdict,
        json!({
            "count": count,
            "bound": rational_string(&bound),
            "first_members": members.iter().take(16).collect::<Vec<_>>(),
        }),
    ))
}

/// sum_{i < I} r(m + k + i M) <= L^ell r(m + k, M) with I = L^ell M^(ell-1).
pub fn verify_maier_inner(ell: u32, m: u64, k: u64, modulus: u64, l: u64, table: &RepTable) -> Result<Report, CertifyError> {
    if table.ell() != ell || table.s() != ell {
        return Err(CertifyError::Precondition(format!("need an r_{{{ell},{ell}}} table")));
    }
    let rows = l.pow(ell) * modulus.pow(ell - 1);
    let last = m + k + (rows.max(1) - 1) * modulus;
    if rows > 0 && table.limit() < last {
        return Err(CertifyError::Coverage { needed: last, available: table.limit() });
    }
    let profile = residue_counts(ell, modulus)?;
    let left: u128 = (0..rows).map(|i| u128::from(table.counts()[(m + k + i * modulus) as usize])).sum();
    let right = BigUint::from(l).pow(ell) * profile.count_u(m + k);
    let pass = BigUint::from(left) <= right;
    let mut report = Report::new(json!({"ell": ell, "m": m, "k": k, "M": modulus, "L": l, "I": rows}));
    report.push(
        "sum_i r(m+k+iM) <= L^ell r(m+k, M)",
        Verdict::from_bool(pass),
        json!({"left": left.to_string(), "right": right.to_string()}),
    );
    Ok(report.finish(
        Verdict::from_bool(pass),
        json!({"left": left.to_string(), "right": right.to_string(), "right_u64": right.to_u64()}),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ratio;
    use crate::repcount::{sieve_rep, WaringParams};

    fn worked(n: u64) -> MaierCertificate {
        MaierCertificate::new(3, 1, 9, 4, vec![ratio(1, 100), ratio(1, 100)], vec![0, 0], n)
    }

    #[test]
    fn worked_certificate_passes() {
        let table = sieve_rep(WaringParams::new(3, 3).unwrap(), 729).unwrap();
        let profile = residue_counts(3, 9).unwrap();
        let r = verify_maier(&worked(729), &table, &profile).unwrap();
        assert_eq!(r.verdict(), Verdict::Pass, "{r:#?}");
        assert_eq!(r.summary.details["count"], 81);
        assert_eq!(r.summary.details["bound"], "3969/400");
    }

    #[test]
    fn short_n_is_invalid() {
        let table = sieve_rep(WaringParams::new(3, 3).unwrap(), 729).unwrap();
        let profile = residue_counts(3, 9).unwrap();
        let r = verify_maier(&worked(728), &table, &profile).unwrap();
        assert_eq!(r.verdict(), Verdict::Invalid);
        assert_eq!(r.verdict_of("N >= M^ell"), Some(Verdict::Fail));
        // counting still ran
        assert!(r.summary.details["count"].as_u64().unwrap() > 0);
    }

    #[test]
    fn alpha_at_least_one_is_rejected_before_counting() {
        let table = sieve_rep(WaringParams::new(3, 3).unwrap(), 729).unwrap();
        let profile = residue_counts(3, 9).unwrap();
        let cert = MaierCertificate::new(3, 1, 9, 4, vec![ratio(1, 2), ratio(1, 2)], vec![0, 0], 729);
        let r = verify_maier(&cert, &table, &profile).unwrap();
        assert_eq!(r.verdict(), Verdict::Invalid);
        assert!(r.condition("count >= (1-alpha)/2^ell * N/M").is_none());
    }

    #[test]
    fn inner_examples() {
        let table = sieve_rep(WaringParams::new(3, 3).unwrap(), 800).unwrap();
        let r = verify_maier_inner(3, 4, 0, 9, 1, &table).unwrap();
        assert_eq!(r.verdict(), Verdict::Pass);
        assert_eq!(r.summary.details["left"], "0");
        let r = verify_maier_inner(3, 1, 0, 2, 1, &table).unwrap();
        assert_eq!(r.verdict(), Verdict::Pass);
        assert_eq!(r.summary.details["left"], "4");
        assert_eq!(r.summary.details["right"], "4");
        let r = verify_maier_inner(3, 0, 0, 9, 1, &table).unwrap();
        assert_eq!(r.verdict(), Verdict::Pass);
        let oracle: u64 = (0..81).map(|i| u64::from(table.counts()[9 * i])).sum();
        assert_eq!(r.summary.details["left"], oracle.to_string());
        let small = sieve_rep(WaringParams::new(3, 3).unwrap(), 100).unwrap();
        assert!(matches!(verify_maier_inner(3, 0, 0, 9, 1, &small), Err(CertifyError::Coverage { .. })));
    }
}
