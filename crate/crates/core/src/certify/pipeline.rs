//! Desk-scale dry run of the full parameter recipe: modulus search, Maier
//! counting of mild gap points, removal of pairs hit by sums of ell - 1
//! powers, the separation test and the final degree criterion.
//!
//! Every step is evaluated exactly and reported whether or not it holds;
//! most of the asymptotic inequalities are expected to fail at this scale.

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::{BigRational, Ratio};
use num_traits::{One, Pow, ToPrimitive};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::degree::{j_supremum, DegreeParams};
use super::maier::{maier_members, verify_maier, MaierCertificate};
use super::report::{Report, Verdict};
use super::CertifyError;
use crate::exact::{self, rational_string, serde_rational};
use crate::modular::{crt_combine, residue_counts, search_gap_modulus, SearchOptions};
use crate::repcount::{scan_exceptional_set, sieve_rep, WaringParams};
use crate::series::{default_cutoff_len, is_mild_gap, HalfFunction, MildGapVerdict};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub pool: Vec<u64>,
    pub product_bound: u64,
    #[serde(rename = "K1")]
    pub k1: u64,
    #[serde(with = "serde_rational")]
    pub xi: BigRational,
    /// sigma as "p/q"; must lie in (3, 27/8) for ell = 3 and (4, 16384/4059) for ell = 4.
    pub sigma: String,
    pub max_modulus: u64,
    pub max_n: u64,
    pub max_sieve: u64,
}

impl PipelineConfig {
    pub fn default_for(ell: u32) -> Self {
        let (pool, sigma) = match ell {
            3 => (vec![2, 7, 9, 13], "51/16"),
            // with sigma = 16384/4061 the exceptional-set exponent is 1015/4096
            _ => (vec![2, 3, 5, 16], "16384/4061"),
        };
        PipelineConfig {
            pool,
            product_bound: 256,
            k1: 1,
            xi: BigRational::new(32.into(), 3.into()),
            sigma: sigma.into(),
            max_modulus: 4096,
            max_n: 10_000_000,
            max_sieve: 10_000_000,
        }
    }

    fn sigma_ratio(&self) -> Result<Ratio<u64>, CertifyError> {
        let r = exact::parse_rational(&self.sigma).map_err(CertifyError::Precondition)?;
        let n = r.numer().to_u64();
        let d = r.denom().to_u64();
        match (n, d) {
            (Some(n), Some(d)) => Ok(Ratio::new(n, d)),
            _ => Err(CertifyError::Precondition(format!("sigma {} must be a positive fraction", self.sigma))),
        }
    }
}

fn big(v: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// The epsilon/E schedule for K = K2: eps_k = 1/(2 K1), E_k = 0 for k < K1,
/// then eps = xi and E = floor(12 xi (3/2)^j) for j = 0..=K2-K1.
pub fn schedule(k1: u64, k2: u64, xi: &BigRational) -> (Vec<BigRational>, Vec<u64>) {
    let mut eps = Vec::with_capacity(k2 as usize + 1);
    let mut big_e = Vec::with_capacity(k2 as usize + 1);
    for _ in 0..k1 {
        eps.push(BigRational::new(BigInt::one(), BigInt::from(2 * k1)));
        big_e.push(0);
    }
    let three_halves = BigRational::new(3.into(), 2.into());
    let mut level = big(12) * xi;
    for _ in 0..=(k2 - k1) {
        eps.push(xi.clone());
        big_e.push(level.floor().to_integer().to_u64().unwrap_or(u64::MAX));
        level = level * &three_halves;
    }
    (eps, big_e)
}

fn partial(report: Report, step: &str, extra: Value) -> Result<Report, CertifyError> {
    Ok(report.finish(Verdict::Inconclusive, json!({"partial": true, "stopped_at": step, "details": extra})))
}

/// Runs the recipe for (ell, q, J) and reports a verdict per step.
pub fn pipeline_dry_run(ell: u32, q: u64, j: &BigRational, config: &PipelineConfig) -> Result<Report, CertifyError> {
    WaringParams::new(ell, ell)?;
    if q < 2 {
        return Err(CertifyError::Precondition(format!("q must be >= 2, got {q}")));
    }
    let mut report = Report::new(json!({"ell": ell, "q": q, "J": rational_string(j), "config": config}));

    // sigma
    let sigma = config.sigma_ratio()?;
    let (lo, hi) = match ell {
        3 => (Ratio::from_integer(3u64), Ratio::new(27u64, 8)),
        _ => (Ratio::from_integer(4u64), Ratio::new(16384u64, 4059)),
    };
    let sigma_ok = lo < sigma && sigma < hi;
    report.push(
        "sigma in admissible interval",
        Verdict::from_bool(sigma_ok),
        json!({"sigma": format!("{}/{}", sigma.numer(), sigma.denom()), "interval": [lo.to_string(), hi.to_string()]}),
    );
    if !sigma_ok {
        return partial(report, "sigma", Value::Null);
    }

    // modulus search, restricted to 2m < M
    let opts = SearchOptions { product_bound: config.product_bound.min(config.max_modulus), m_limit: Some(|m| m.div_ceil(2)) };
    let Some(found) = search_gap_modulus(ell, config.k1, &config.pool, &opts)? else {
        report.push("modulus search meets r(m+k, M) <= M^(ell-1)/(2K1)", Verdict::Fail, json!({"pool": config.pool}));
        return partial(report, "modulus search", Value::Null);
    };
    report.push("modulus search meets r(m+k, M) <= M^(ell-1)/(2K1)", Verdict::Pass, serde_json::to_value(&found)?);
    let (modulus, m, k1) = (found.modulus, found.m, config.k1);
    report.push(
        "max{2m, 4K1} < M and M even",
        Verdict::from_bool(2 * m < modulus && 4 * k1 < modulus && modulus % 2 == 0),
        json!({"M": modulus, "m": m, "K1": k1}),
    );

    // N = floor(M^sigma)
    let n_big = exact::floor_rational_power(modulus, &sigma);
    let m_pow = BigUint::from(modulus).pow(ell);
    let n_total = match n_big.to_u64().filter(|&n| n <= config.max_n) {
        Some(n) => n,
        None => {
            let unsat = BigUint::from(config.max_n) < m_pow;
            report.push(
                "N >= M^ell",
                if unsat { Verdict::Fail } else { Verdict::Inconclusive },
                json!({"N": n_big.to_string(), "M^ell": m_pow.to_string(), "max_n": config.max_n,
                       "reason": if unsat { "unsatisfiable within max_n" } else { "N exceeds max_n" }}),
            );
            return partial(report, "N", Value::Null);
        }
    };
    report.push(
        "N >= M^ell",
        Verdict::from_bool(BigUint::from(n_total) >= m_pow),
        json!({"N": n_total, "M^ell": m_pow.to_string()}),
    );

    let k2 = modulus / 2;
    report.push("K2 = floor(M/2) > 2 K1", Verdict::from_bool(k2 > 2 * k1), json!({"K2": k2, "K1": k1}));
    if k2 < k1 {
        return partial(report, "K2 < K1", Value::Null);
    }
    let e_bound = big(60) * &config.xi;
    let qk1 = BigRational::from_integer(BigInt::from(exact::big_pow(q, k1)));
    let qk2 = BigRational::from_integer(BigInt::from(exact::big_pow(q, k2)));
    let je = j * &e_bound;
    let jn = j * big(n_total);
    let iv_ok = qk1 > je && qk2 > jn;
    report.push("q^K1 > J E", Verdict::from_bool(qk1 > je), json!({"q^K1": rational_string(&qk1), "J*E": rational_string(&je)}));
    report.push("q^K2 > J N", Verdict::from_bool(qk2 > jn), json!({"q^K2": rational_string(&qk2), "J*N": rational_string(&jn)}));

    // schedule and alpha
    let (eps, big_e) = schedule(k1, k2, &config.xi);
    let cert = MaierCertificate::new(ell, k2, modulus, m, eps, big_e, n_total);
    let three_quarters = BigRational::new(3.into(), 4.into());
    report.push(
        "alpha < 3/4 (finite schedule)",
        Verdict::from_bool(cert.alpha < three_quarters),
        json!({"alpha": rational_string(&cert.alpha), "display_only": exact::display_decimal(&cert.alpha, 9)}),
    );

    // sieve tables
    let cut = default_cutoff_len(k1);
    let full_limit = n_total + k1 + cut;
    if full_limit > config.max_sieve {
        report.push("sieve within max_sieve", Verdict::Inconclusive, json!({"needed": full_limit, "max_sieve": config.max_sieve}));
        return partial(report, "sieve", Value::Null);
    }
    let full = Arc::new(sieve_rep(WaringParams::new(ell, ell)?, full_limit)?);
    let lower = sieve_rep(WaringParams::new(ell, ell - 1)?, n_total)?;

    // Maier counting
    let profile = profile_for(ell, modulus, &config.pool)?;
    let maier = verify_maier(&cert, &full, &profile)?;
    report.push("Maier certificate", maier.verdict(), json!({"failing": maier.failing(), "summary": maier.summary.details}));
    let members = maier_members(&full, modulus, m, n_total, &cert.big_e)?;
    let size_bound = BigRational::new(BigInt::from(n_total), BigInt::from((1u64 << (ell + 2)) * modulus));
    report.push(
        "#B >= N / (2^(ell+2) M)",
        Verdict::from_bool(big(members.len() as u64) >= size_bound),
        json!({"B": members.len(), "bound": rational_string(&size_bound)}),
    );

    // tail lemma hypotheses
    let lemma_ok = big(12) * &config.xi >= big(8 << ell) && k2 - k1 >= k1 && BigUint::from(n_total) <= BigUint::one() << k1 as usize;
    report.push(
        "12 xi >= 8 2^ell and K2 - K1 >= K1 >= log2 N",
        Verdict::from_bool(lemma_ok),
        json!({"12xi": rational_string(&(big(12) * &config.xi)), "K2-K1": k2 - k1, "K1": k1, "N": n_total}),
    );

    // mild gap membership of B
    let f = HalfFunction::from_table(full.clone());
    let mut mild_fail = Vec::new();
    let mut mild_undecided = Vec::new();
    for &b in &members {
        match is_mild_gap(&f, b, k1, &e_bound)? {
            MildGapVerdict::Witness(_) => {}
            MildGapVerdict::Inconclusive { .. } => mild_undecided.push(b),
            _ => mild_fail.push(b),
        }
    }
    let mild_verdict = if !mild_fail.is_empty() {
        Verdict::Fail
    } else if !mild_undecided.is_empty() {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    report.push(
        "B subset of MildGap(f_{ell,ell}; K1, E)",
        mild_verdict,
        json!({"E": rational_string(&e_bound), "failing": mild_fail.iter().take(16).collect::<Vec<_>>(), "inconclusive": mild_undecided.len()}),
    );

    // bad / good split over consecutive pairs
    let lc = lower.counts();
    let mut good = Vec::new();
    let mut bad = Vec::new();
    for w in members.windows(2) {
        let (b, next) = (w[0], w[1]);
        let hit = (b..=next + k2).any(|n| lc[n as usize] != 0);
        if hit {
            bad.push(b);
        } else {
            good.push((b, next));
        }
    }
    let paired = members.len().saturating_sub(1);
    report.push(
        "#B_bad < #B / 2",
        Verdict::from_bool(2 * bad.len() < members.len()),
        json!({"B": members.len(), "paired": paired, "B_bad": bad.len(), "B_good": good.len()}),
    );
    // #B_bad <= 2^ell N^(1-1/ell), i.e. #bad^ell <= 2^(ell^2) N^(ell-1)
    let bad_pow = BigUint::from(bad.len() as u64).pow(ell);
    let rhs = (BigUint::one() << (ell * ell) as usize) * BigUint::from(n_total).pow(ell - 1);
    report.push("#B_bad <= 2^ell N^(1-1/ell)", Verdict::from_bool(bad_pow <= rhs), json!({"B_bad": bad.len()}));

    // separation
    let fc = full.counts();
    let separated: Vec<(u64, u64)> = good.iter().copied().filter(|&(b, next)| (b..next).any(|n| fc[n as usize] > 0)).collect();
    match ell {
        3 => {
            // 25 N^(8/27) < M  <=>  25^27 N^8 < M^27
            let lhs = BigUint::from(25u32).pow(27u32) * BigUint::from(n_total).pow(8u32);
            let rhs = BigUint::from(modulus).pow(27u32);
            report.push("25 N^(8/27) < M", Verdict::from_bool(lhs < rhs), json!({"N": n_total, "M": modulus}));
        }
        _ => {
            let base = Ratio::new(4059u64, 16384);
            let inv_sigma = Ratio::new(*sigma.denom(), *sigma.numer());
            let epsilon = (inv_sigma - base) / Ratio::from_integer(2);
            let exponent = base + epsilon;
            // (M/2)^den > N^num  <=>  M/2 > N^exponent
            let half = modulus / 2;
            let sep = BigUint::from(half).pow(*exponent.denom() as u32) > BigUint::from(n_total).pow(*exponent.numer() as u32);
            report.push(
                "M/2 > N^(4059/16384 + eps)",
                Verdict::from_bool(sep),
                json!({"eps": epsilon.to_string(), "exponent": exponent.to_string()}),
            );
            let a_set = scan_exceptional_set(n_total, epsilon, &full)?;
            let in_a: Vec<u64> = good
                .iter()
                .flat_map(|&(b, _)| (b + modulus.div_ceil(2))..(b + modulus))
                .filter(|&a| a >= 1 && a <= n_total)
                .collect();
            let exceptional = in_a.iter().filter(|a| a_set.members.binary_search(a).is_ok()).count();
            report.push(
                "#A > #A_N, so some window point is not exceptional",
                Verdict::from_bool(in_a.len() > a_set.members.len()),
                json!({
                    "A": in_a.len(),
                    "A_N": a_set.members.len(),
                    "A_points_in_A_N": exceptional,
                    "A_N_density": rational_string(&a_set.density),
                }),
            );
        }
    }
    report.push(
        "some good pair has r_{ell,ell}(n3) > 0 for n3 in [n1, n2)",
        Verdict::from_bool(!separated.is_empty()),
        json!({"good_pairs": good.len(), "separated_pairs": separated.len(), "first": separated.first()}),
    );

    // final: all conditions of the degree criterion for one pair
    let mild_set: std::collections::HashSet<u64> = members.iter().copied().filter(|b| !mild_fail.contains(b) && !mild_undecided.contains(b)).collect();
    let candidate = separated.iter().copied().find(|(b, next)| mild_set.contains(b) && mild_set.contains(next) && next + k2 <= n_total);
    let instance = candidate.map(|(n1, n2)| DegreeParams {
        ell,
        q,
        j: j.clone(),
        e: e_bound.clone(),
        n: n_total,
        k1,
        k2,
        n1,
        n2,
    });
    let criterion = match &instance {
        Some(_) if iv_ok => Verdict::Pass,
        _ => Verdict::Fail,
    };
    report.push(
        "degree criterion (i)-(iv) for some pair",
        criterion,
        json!({"instance": instance, "q^K requirements hold": iv_ok}),
    );

    let verdict = report.combined();
    let sup = j_supremum(q, k1, k2, &e_bound, n_total);
    Ok(report.finish(
        verdict,
        json!({
            "M": modulus, "m": m, "K1": k1, "K2": k2, "N": n_total,
            "E": rational_string(&e_bound),
            "alpha": rational_string(&cert.alpha),
            "B": members.len(), "B_bad": bad.len(), "B_good": good.len(),
            "J_supremum_at_this_scale": rational_string(&sup),
            "partial": false,
        }),
    ))
}

/// Profile mod M assembled from coprime pool factors when possible.
fn profile_for(ell: u32, modulus: u64, pool: &[u64]) -> Result<crate::modular::ResidueProfile, CertifyError> {
    let parts = crate::modular::coprime_products(pool, modulus)
        .into_iter()
        .find(|(p, _)| *p == modulus)
        .map(|(_, parts)| parts)
        .unwrap_or_else(|| vec![modulus]);
    let mut acc = residue_counts(ell, parts[0])?;
    for &p in &parts[1..] {
        acc = crt_combine(&acc, &residue_counts(ell, p)?)?;
    }
    Ok(acc)
}
