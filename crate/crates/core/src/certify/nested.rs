//! Nested gaps: two mild gaps of f inside one larger mild gap of g force
//! f(1/q), g(1/q) to be linearly independent against small integer pairs.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::report::{fold_verdicts, Report, Verdict};
use super::CertifyError;
use crate::exact::{big_pow, display_decimal, floor_log2, inverse_power, rational_string, serde_rational};
use crate::series::{eval_enclosure, is_mild_gap, partial_sum, Enclosure, HalfFunction, MildGapVerdict};

/// Numeric data of a nested-gaps certificate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NestedGapsParams {
    pub q: u64,
    #[serde(rename = "H", with = "serde_rational")]
    pub h: BigRational,
    #[serde(rename = "K1")]
    pub k1: u64,
    #[serde(rename = "K2")]
    pub k2: u64,
    #[serde(rename = "K_prime")]
    pub k_prime: u64,
    pub n_prime: u64,
    pub n1: u64,
    pub n2: u64,
    #[serde(rename = "E", with = "serde_rational")]
    pub e: BigRational,
    #[serde(rename = "E_prime", with = "serde_rational")]
    pub e_prime: BigRational,
}

#[derive(Clone, Debug)]
pub struct NestedGapsCertificate {
    pub params: NestedGapsParams,
    pub f: HalfFunction,
    pub g: HalfFunction,
}

impl NestedGapsCertificate {
    fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(&self.params).expect("params serialize");
        v["f"] = json!(self.f.id());
        v["g"] = json!(self.g.id());
        v
    }
}

fn mild_verdict(v: &MildGapVerdict) -> Verdict {
    match v {
        MildGapVerdict::Witness(_) => Verdict::Pass,
        MildGapVerdict::Inconclusive { .. } => Verdict::Inconclusive,
        _ => Verdict::Fail,
    }
}

pub const CONCLUSION: &str = "either g(1/q) = 0 or f(1/q) and g(1/q) are linearly independent over Q";

/// Checks the ordering preamble and hypotheses (i)-(iv) individually.
pub fn verify_nested_gaps(cert: &NestedGapsCertificate) -> Result<Report, CertifyError> {
    let p = &cert.params;
    let mut report = Report::new(cert.to_json());

    let well_formed = p.q >= 2 && p.h.is_positive() && p.e.is_positive() && p.e_prime.is_positive() && p.k1 >= 1;
    if !well_formed {
        return Ok(report.finish(
            Verdict::Invalid,
            json!({"reason": "need q >= 2, H > 0, E > 0, E' > 0, K1 >= 1"}),
        ));
    }

    report.push(
        "ordering: K1 <= K2 < K' and n' <= n1 < n2",
        Verdict::from_bool(p.k1 <= p.k2 && p.k2 < p.k_prime && p.n_prime <= p.n1 && p.n1 < p.n2),
        json!({"K1": p.k1, "K2": p.k2, "K_prime": p.k_prime, "n_prime": p.n_prime, "n1": p.n1, "n2": p.n2}),
    );

    let i_ok = p.n1 + p.k1 < p.n2 && p.n2 + p.k2 <= p.n_prime + p.k_prime;
    report.push(
        "(i) n1 + K1 < n2 and n2 + K2 <= n' + K'",
        Verdict::from_bool(i_ok),
        json!({"n1+K1": p.n1 + p.k1, "n2": p.n2, "n2+K2": p.n2 + p.k2, "n'+K'": p.n_prime + p.k_prime}),
    );

    let v1 = is_mild_gap(&cert.f, p.n1, p.k1, &p.e)?;
    let v2 = is_mild_gap(&cert.f, p.n2, p.k1, &p.e)?;
    let vg = is_mild_gap(&cert.g, p.n_prime, p.k_prime, &p.e_prime)?;
    report.push(
        "(ii) n1, n2 in MildGap(f; K1, E) and n' in MildGap(g; K', E')",
        fold_verdicts([mild_verdict(&v1), mild_verdict(&v2), mild_verdict(&vg)]),
        json!({"n1": v1, "n2": v2, "n_prime": vg}),
    );

    let window = partial_sum(&cert.f, p.q, p.n1, p.n2)?;
    report.push(
        "(iii) sum_{n1 <= n < n2} a_n q^-n != 0",
        Verdict::from_bool(!window.is_zero()),
        json!({"sum": rational_string(&window)}),
    );

    let q_rat = |k: u64| BigRational::from_integer(BigInt::from(big_pow(p.q, k)));
    let he = &p.h * &p.e;
    let he2 = &p.h * &p.e_prime;
    let iv_ok = q_rat(p.k1) > he && q_rat(p.k2) > he2;
    report.push(
        "(iv) q^K1 > H E and q^K2 > H E'",
        Verdict::from_bool(iv_ok),
        json!({
            "q^K1": big_pow(p.q, p.k1).to_string(),
            "H*E": rational_string(&he),
            "q^K2": big_pow(p.q, p.k2).to_string(),
            "H*E'": rational_string(&he2),
        }),
    );

    let verdict = report.combined();
    let conclusion = if verdict == Verdict::Pass { json!(CONCLUSION) } else { json!(null) };
    let failing = report_failing(&report);
    Ok(report.finish(verdict, json!({"conclusion": conclusion, "failing": failing})))
}

fn report_failing(r: &Report) -> Vec<String> {
    r.failing().into_iter().map(String::from).collect()
}

/// Default number of exact terms for evaluating f(1/q) and g(1/q).
pub fn default_measure_terms(cert: &NestedGapsCertificate) -> u64 {
    let p = &cert.params;
    let want = (p.n2 + p.k1).max(p.n_prime + p.k_prime) + 64;
    [cert.f.coverage(), cert.g.coverage()]
        .into_iter()
        .flatten()
        .map(|c| c + 1)
        .fold(want, u64::min)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairBound {
    pub alpha: i64,
    pub beta: i64,
    #[serde(with = "serde_rational")]
    pub lower: BigRational,
}

/// Integer pairs with alpha != 0 and |alpha| + |beta| <= h, lexicographic.
pub fn measure_grid(h: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for a in -h..=h {
        if a == 0 {
            continue;
        }
        let rest = h - a.abs();
        for b in -rest..=rest {
            out.push((a, b));
        }
    }
    out
}

/// Certifies |alpha f(1/q) + beta g(1/q)| >= q^-n2 over the whole grid.
pub fn check_measure(cert: &NestedGapsCertificate, terms: Option<u64>) -> Result<Report, CertifyError> {
    let nested = verify_nested_gaps(cert)?;
    let mut report = Report::new(cert.to_json());
    if nested.verdict() != Verdict::Pass {
        report.push("certificate passes nested gaps", nested.verdict(), json!({"failing": report_failing(&nested)}));
        return Ok(report.finish(Verdict::Invalid, json!({"reason": "nested gaps certificate does not pass"})));
    }
    report.push("certificate passes nested gaps", Verdict::Pass, json!(null));

    let p = &cert.params;
    let terms = terms.unwrap_or_else(|| default_measure_terms(cert));
    let fe = eval_enclosure(&cert.f, p.q, terms)?;
    let ge = eval_enclosure(&cert.g, p.q, terms)?;
    let h = p.h.floor().to_integer().to_i64().ok_or_else(|| CertifyError::Precondition("H too large to enumerate".into()))?;
    let target = inverse_power(p.q, p.n2);

    let grid = measure_grid(h);
    let bounds: Vec<(i64, i64, Enclosure)> = grid
        .par_iter()
        .map(|&(a, b)| {
            let e = &fe.scale(&BigInt::from(a)) + &ge.scale(&BigInt::from(b));
            (a, b, e)
        })
        .collect();

    let mut min: Option<PairBound> = None;
    let mut below: Vec<PairBound> = Vec::new();
    let mut undecided: Vec<(i64, i64)> = Vec::new();
    for (a, b, e) in &bounds {
        if e.contains_zero() {
            undecided.push((*a, *b));
            continue;
        }
        let lower = e.abs_lower_bound();
        if lower < target {
            // the value might still be >= target if the enclosure is wide
            let certainly_below = e.width().is_zero() || (e.lo().abs().max(e.hi().abs()) < target);
            if certainly_below {
                below.push(PairBound { alpha: *a, beta: *b, lower: lower.clone() });
            } else {
                undecided.push((*a, *b));
            }
        }
        if min.as_ref().map_or(true, |m| lower < m.lower) {
            min = Some(PairBound { alpha: *a, beta: *b, lower });
        }
    }

    let verdict = if !below.is_empty() {
        Verdict::Fail
    } else if !undecided.is_empty() {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    report.push(
        "|alpha f(1/q) + beta g(1/q)| >= q^-n2",
        verdict,
        json!({
            "pairs": grid.len(),
            "below": below,
            "inconclusive_pairs": undecided.iter().take(32).collect::<Vec<_>>(),
            "inconclusive_count": undecided.len(),
        }),
    );
    let details = json!({
        "terms": terms,
        "target": rational_string(&target),
        "f_enclosure": fe,
        "g_enclosure": ge,
        "min_lower_bound": min,
        "min_lower_bound_log2": min.as_ref().and_then(|m| floor_log2(&m.lower)),
        "min_lower_bound_display_only": min.as_ref().map(|m| display_decimal(&m.lower, 12)),
    });
    Ok(report.finish(verdict, details))
}

/// The tail estimate behind the principle: for every pair and i in {1, 2},
/// |sum_{n >= n_i} R(n) q^-n| <= |alpha| E q^-(n_i+K1) + |beta| E' q^-(n'+K').
/// Returns the first violating (alpha, beta, i), if any. Requires both
/// functions to be finitely supported below `terms` (exact tails).
pub fn tail_estimate_violations(cert: &NestedGapsCertificate, h: i64, terms: u64) -> Result<Option<(i64, i64, u64)>, CertifyError> {
    let p = &cert.params;
    for (i, ni) in [(1u64, p.n1), (2, p.n2)] {
        let tf = partial_sum(&cert.f, p.q, ni, terms)?;
        let tg = partial_sum(&cert.g, p.q, ni, terms)?;
        let rf = eval_enclosure(&cert.f, p.q, terms)?.width();
        let rg = eval_enclosure(&cert.g, p.q, terms)?.width();
        let bf = &p.e * inverse_power(p.q, ni + p.k1);
        let bg = &p.e_prime * inverse_power(p.q, p.n_prime + p.k_prime);
        for a in -h..=h {
            for b in -h..=h {
                let (ab, bb) = (BigRational::from_integer(a.into()), BigRational::from_integer(b.into()));
                let tail = (&ab * &tf + &bb * &tg).abs() + ab.abs() * &rf + bb.abs() * &rg;
                let bound = ab.abs() * &bf + bb.abs() * &bg;
                if tail > bound {
                    return Ok(Some((a, b, i)));
                }
            }
        }
    }
    Ok(None)
}

/// The synthetic certificate with f = 1 + z^10 + z^20 and g = z^40.
pub fn synthetic_certificate() -> NestedGapsCertificate {
    let one = BigInt::one();
    NestedGapsCertificate {
        params: NestedGapsParams {
            q: 2,
            h: BigRational::from_integer(100.into()),
            k1: 9,
            k2: 9,
            k_prime: 39,
            n_prime: 1,
            n1: 1,
            n2: 11,
            e: BigRational::from_integer(2.into()),
            e_prime: BigRational::from_integer(1.into()),
        },
        f: HalfFunction::sparse("f", [(0, one.clone()), (10, one.clone()), (20, one.clone())]),
        g: HalfFunction::sparse("g", [(40, one)]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::int;

    #[test]
    fn synthetic_passes_and_mutations_fail() {
        let cert = synthetic_certificate();
        let r = verify_nested_gaps(&cert).unwrap();
        assert_eq!(r.verdict(), Verdict::Pass, "{r:#?}");
        assert_eq!(r.summary.details["conclusion"], CONCLUSION);
        assert_eq!(r.condition("(iii) sum_{n1 <= n < n2} a_n q^-n != 0").unwrap().witness["sum"], "1/1024");

        let mut h300 = cert.clone();
        h300.params.h = int(300);
        let r = verify_nested_gaps(&h300).unwrap();
        assert_eq!(r.failing(), vec!["(iv) q^K1 > H E and q^K2 > H E'"]);

        let mut k10 = cert.clone();
        k10.params.k1 = 10;
        let r = verify_nested_gaps(&k10).unwrap();
        assert_eq!(r.verdict_of("(i) n1 + K1 < n2 and n2 + K2 <= n' + K'"), Some(Verdict::Fail));
        assert_eq!(r.verdict(), Verdict::Fail);
    }

    #[test]
    fn zeroing_a10_breaks_only_iii() {
        let mut cert = synthetic_certificate();
        cert.f = HalfFunction::sparse("f", [(0, BigInt::one()), (20, BigInt::one())]);
        let r = verify_nested_gaps(&cert).unwrap();
        assert_eq!(r.failing(), vec!["(iii) sum_{n1 <= n < n2} a_n q^-n != 0"]);
    }

    #[test]
    fn measure_on_synthetic() {
        let cert = synthetic_certificate();
        let r = check_measure(&cert, None).unwrap();
        assert_eq!(r.verdict(), Verdict::Pass, "{:#?}", r.summary);
        let min = &r.summary.details["min_lower_bound"];
        let lower = crate::exact::parse_rational(min["lower"].as_str().unwrap()).unwrap();
        assert!(lower >= inverse_power(2, 11));
    }

    #[test]
    fn smallest_grid() {
        assert_eq!(measure_grid(1), vec![(-1, 0), (1, 0)]);
        assert_eq!(measure_grid(100).len(), 2 * 100 * 100);
        let mut cert = synthetic_certificate();
        cert.params.h = int(1);
        let r = check_measure(&cert, None).unwrap();
        assert_eq!(r.per_condition[1].witness["pairs"], 2);
    }

    #[test]
    fn measure_refuses_failing_certificate() {
        let mut cert = synthetic_certificate();
        cert.params.h = int(300);
        assert_eq!(check_measure(&cert, None).unwrap().verdict(), Verdict::Invalid);
    }

    #[test]
    fn tail_estimate_holds_on_synthetic() {
        let cert = synthetic_certificate();
        assert_eq!(tail_estimate_violations(&cert, 6, 64).unwrap(), None);
    }
}
