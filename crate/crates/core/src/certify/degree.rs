//! Instance-level evidence that θ(q) has degree at least ell + 1: two mild
//! gaps of f_{ell,ell} inside a stretch free of sums of ell - 1 powers.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::report::{fold_verdicts, Report, Verdict};
use super::CertifyError;
use crate::exact::{big_pow, rational_string, serde_rational};
use crate::repcount::{find_gap_runs, RepTable};
use crate::series::{default_cutoff_len, is_mild_gap, tail_norm_sharp, HalfFunction, MildGapVerdict};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeParams {
    pub ell: u32,
    pub q: u64,
    #[serde(rename = "J", with = "serde_rational")]
    pub j: BigRational,
    #[serde(rename = "E", with = "serde_rational")]
    pub e: BigRational,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "K1")]
    pub k1: u64,
    #[serde(rename = "K2")]
    pub k2: u64,
    pub n1: u64,
    pub n2: u64,
}

/// sup of the J accepted by q^K1 > J E and q^K2 > J N.
pub fn j_supremum(q: u64, k1: u64, k2: u64, e: &BigRational, n: u64) -> BigRational {
    let a = BigRational::from_integer(BigInt::from(big_pow(q, k1))) / e;
    let b = BigRational::new(BigInt::from(big_pow(q, k2)), BigInt::from(n.max(1)));
    a.min(b)
}

/// Largest integer strictly below `sup` (0 if none is positive).
pub fn largest_integer_below(sup: &BigRational) -> BigInt {
    let c = sup.ceil().to_integer();
    (c - BigInt::one()).max(BigInt::zero())
}

fn mild_to_verdict(v: &MildGapVerdict) -> Verdict {
    match v {
        MildGapVerdict::Witness(_) => Verdict::Pass,
        MildGapVerdict::Inconclusive { .. } => Verdict::Inconclusive,
        _ => Verdict::Fail,
    }
}

/// Checks the four itemized conditions plus mild-gap membership of n1, n2.
/// `lower` is the r_{ell,ell-1} table and `full` the r_{ell,ell} table.
pub fn verify_degree_criterion(p: &DegreeParams, lower: &RepTable, full: &RepTable) -> Result<Report, CertifyError> {
    if lower.ell() != p.ell || lower.s() + 1 != p.ell || full.ell() != p.ell || full.s() != p.ell {
        return Err(CertifyError::Precondition(format!(
            "need r_{{{ell},{}}} and r_{{{ell},{ell}}} tables",
            p.ell - 1,
            ell = p.ell
        )));
    }
    let end = p.n2 + p.k2;
    if lower.limit() < end || full.limit() < end {
        return Err(CertifyError::Coverage { needed: end, available: lower.limit().min(full.limit()) });
    }
    let mut report = Report::new(serde_json::to_value(p)?);
    let f = HalfFunction::from_table(Arc::new(full.clone()));

    let v1 = is_mild_gap(&f, p.n1, p.k1, &p.e)?;
    let v2 = is_mild_gap(&f, p.n2, p.k1, &p.e)?;
    report.push(
        "n1, n2 in MildGap(f_{ell,ell}; K1, E)",
        fold_verdicts([mild_to_verdict(&v1), mild_to_verdict(&v2)]),
        json!({"n1": v1, "n2": v2}),
    );

    report.push(
        "(i) n1 + K1 < n2 and n2 + K2 <= N",
        Verdict::from_bool(p.n1 + p.k1 < p.n2 && p.n2 + p.k2 <= p.n),
        json!({"n1+K1": p.n1 + p.k1, "n2": p.n2, "n2+K2": end, "N": p.n}),
    );

    let hit = (p.n1..end).find(|&n| lower.counts()[n as usize] != 0);
    report.push(
        "(ii) r_{ell,ell-1}(n) = 0 for n1 <= n < n2 + K2",
        Verdict::from_bool(hit.is_none()),
        json!({"witness_n": hit, "count": hit.map(|n| lower.counts()[n as usize])}),
    );

    let n3 = (p.n1..p.n2).find(|&n| full.counts()[n as usize] > 0);
    report.push(
        "(iii) exists n3 in [n1, n2) with r_{ell,ell}(n3) > 0",
        Verdict::from_bool(n3.is_some()),
        json!({"n3": n3}),
    );

    let q1 = BigRational::from_integer(BigInt::from(big_pow(p.q, p.k1)));
    let q2 = BigRational::from_integer(BigInt::from(big_pow(p.q, p.k2)));
    let je = &p.j * &p.e;
    let jn = &p.j * BigRational::from_integer(BigInt::from(p.n));
    report.push(
        "(iv) q^K1 > J E and q^K2 > J N",
        Verdict::from_bool(q1 > je && q2 > jn),
        json!({"q^K1": rational_string(&q1), "J*E": rational_string(&je), "q^K2": rational_string(&q2), "J*N": rational_string(&jn)}),
    );

    let sup = j_supremum(p.q, p.k1, p.k2, &p.e, p.n);
    let verdict = report.combined();
    Ok(report.finish(
        verdict,
        json!({
            "J_supremum": rational_string(&sup),
            "largest_certifiable_integer_J": largest_integer_below(&sup).to_string(),
            "evidence": if verdict == Verdict::Pass { json!("instance is evidence toward deg theta(q) >= ell + 1 for this J") } else { json!(null) },
        }),
    ))
}

/// A candidate (n1, n2, K1, K2, N, E) found in sieved tables, with the
/// largest J it certifies.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeInstance {
    pub params: DegreeParams,
    #[serde(with = "serde_rational")]
    pub j_supremum: BigRational,
}

/// Searches the tables for the instance maximizing sup J. Pairs are runs of
/// zeros of r_{ell,ell} sitting inside one zero run of r_{ell,ell-1}; n1, n2
/// are run starts, E is the larger certified tail norm of the two.
pub fn search_degree_instance(ell: u32, q: u64, lower: &RepTable, full: &RepTable) -> Result<Option<DegreeInstance>, CertifyError> {
    let f = HalfFunction::from_table(Arc::new(full.clone()));
    let limit = lower.limit().min(full.limit());
    let full_runs = find_gap_runs(full, 1);
    let mut best: Option<DegreeInstance> = None;

    for outer in find_gap_runs(lower, 1) {
        let (a, b) = (outer.start, outer.start + outer.length);
        if b > limit {
            continue;
        }
        let inner: Vec<_> = full_runs.iter().filter(|r| r.start >= a && r.start < b && !r.truncated).collect();
        for (i, r1) in inner.iter().enumerate() {
            for r2 in &inner[i + 1..] {
                let (n1, n2) = (r1.start, r2.start);
                let k2 = b - n2;
                let k1 = r1.length.min(r2.length).min(k2);
                if k1 == 0 || n1 + k1 >= n2 {
                    continue;
                }
                let cut = default_cutoff_len(k1);
                if n2 + k1 + cut > full.limit() {
                    continue;
                }
                let e1 = tail_norm_sharp(&f, n1 + k1, n1 + k1 + cut)?;
                let e2 = tail_norm_sharp(&f, n2 + k1, n2 + k1 + cut)?;
                let e = e1.hi().clone().max(e2.hi().clone());
                if e.is_zero() {
                    continue;
                }
                let n = n2 + k2;
                let sup = j_supremum(q, k1, k2, &e, n);
                if best.as_ref().map_or(true, |b| sup > b.j_supremum) {
                    best = Some(DegreeInstance {
                        params: DegreeParams { ell, q, j: BigRational::one(), e, n, k1, k2, n1, n2 },
                        j_supremum: sup,
                    });
                }
            }
        }
    }
    Ok(best.map(|mut inst| {
        let j = largest_integer_below(&inst.j_supremum);
        inst.params.j = if j.is_zero() {
            &inst.j_supremum / BigRational::from_integer(BigInt::from(2))
        } else {
            BigRational::from_integer(j)
        };
        inst
    }))
}
