//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout. The
//! process fails if a criterion is red that is not listed in `KNOWN_RED`, or
//! if a listed one turns green (the list must be kept honest).

mod common;

use std::sync::Arc;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{linear_tail, rep_oracle, residue_oracle, weighted_sum};
use waring_gaps::certify::nested::synthetic_certificate;
use waring_gaps::certify::{
    check_measure, check_theta_linear_forms, pipeline_dry_run, verify_maier, verify_maier_inner, verify_nested_gaps,
    MaierCertificate, PipelineConfig, Report, Verdict,
};
use waring_gaps::exact::{inverse_power, ratio};
use waring_gaps::modular::{crt_combine, residue_counts};
use waring_gaps::repcount::{greedy_bound_holds, greedy_decompose, loose_bound, sieve_rep, RepTable, WaringParams};
use waring_gaps::series::{eval_enclosure, scan_mild_gaps};
use waring_gaps::HalfFunction;

/// The K1 -> 10 mutation of the synthetic nested-gaps certificate also breaks
/// the ordering K1 <= K2 and n1 + K1 < n2, so it cannot flip a single condition.
const KNOWN_RED: &[u32] = &[8];

type Outcome = Result<String, String>;

fn table(ell: u32, s: u32, limit: u64) -> RepTable {
    sieve_rep(WaringParams::new(ell, s).unwrap(), limit).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sieve_correctness() -> Outcome {
    let start = Instant::now();
    for ell in [3, 4] {
        for s in 1..=ell {
            let t = table(ell, s, 10_000);
            let oracle = rep_oracle(ell, s, 10_000);
            if let Some(n) = (0..=10_000).find(|&n| t.counts()[n] != oracle[n]) {
                return Err(format!("r_{{{ell},{s}}}({n}) = {} but oracle gives {}", t.counts()[n], oracle[n]));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("7 tables to 10^4 match, {secs:.2}s"))
}

fn mod_nine() -> Outcome {
    let start = Instant::now();
    let t = table(3, 3, 1_000_000);
    let hit = t.counts().iter().enumerate().find(|(n, &c)| matches!(n % 9, 4 | 5) && c != 0);
    ensure(hit.is_none(), || format!("r_{{3,3}}({}) != 0", hit.unwrap().0))?;
    let p = residue_counts(3, 9).unwrap();
    ensure(p.r == residue_oracle(3, 9), || "residue_counts(3, 9) differs from 729-triple enumeration".into())?;
    ensure(p.r[4].is_zero() && p.r[5].is_zero(), || format!("r[4] = {}, r[5] = {}", p.r[4], p.r[5]))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("no n <= 10^6 in 4, 5 mod 9 represented; r[4] = r[5] = 0, {secs:.2}s"))
}

fn greedy_lemma() -> Outcome {
    let start = Instant::now();
    let t = table(3, 3, 100_000);
    let mut failures = Vec::new();
    for b in 1..=100_000u64 {
        let g = greedy_decompose(3, b);
        if !greedy_bound_holds(b, g.n) || t.counts()[g.n as usize] == 0 {
            failures.push(b);
        }
    }
    ensure(failures.is_empty(), || format!("{} failures, first {:?}", failures.len(), &failures[..failures.len().min(8)]))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("all b <= 10^5, {secs:.2}s"))
}

fn loose() -> Outcome {
    for ell in [3, 4] {
        for s in 1..=ell {
            let t = table(ell, s, 100_000);
            if let Some((n, c)) = t.counts().iter().enumerate().find(|(n, &c)| u128::from(c) > loose_bound(ell, *n as u64)) {
                return Err(format!("r_{{{ell},{s}}}({n}) = {c}"));
            }
        }
    }
    Ok("every entry of the 7 tables to 10^5".into())
}

fn tail_lemmas() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_4142);
    for trial in 0..200 {
        let c: u64 = rng.gen_range(1..=10);
        let n0: u64 = rng.gen_range(1..=50);
        let a: Vec<u64> = (0..96).map(|i| rng.gen_range(0..=c * (n0 + i + 1))).collect();
        let tail = weighted_sum(&a) + BigRational::from_integer(c.into()) * linear_tail(n0 + 1, a.len() as u64);
        let bound = BigRational::from_integer((8 * c * n0).into());
        ensure(tail <= bound, || format!("8 c n0 violated at trial {trial}: c {c}, n0 {n0}"))?;
    }
    for trial in 0..200 {
        let c: u64 = rng.gen_range(1..=10);
        let e: u64 = 8 * c + rng.gen_range(0..=64);
        let big_n: u64 = rng.gen_range(16..=10_000);
        let kappa = u64::from(64 - (big_n - 1).leading_zeros()) + rng.gen_range(0..=3);
        if kappa >= big_n {
            continue;
        }
        let n0 = rng.gen_range(1..=big_n - kappa);
        let mut level = BigRational::from_integer(e.into());
        let mut a = Vec::new();
        for i in 0..128u64 {
            let growth = c * (n0 + i + 1);
            let cap = if i < kappa {
                let w: u64 = level.floor().to_integer().try_into().unwrap_or(u64::MAX);
                level = level * ratio(3, 2);
                w.min(growth)
            } else {
                growth
            };
            a.push(rng.gen_range(0..=cap));
        }
        let tail = weighted_sum(&a) + BigRational::from_integer(c.into()) * linear_tail(n0 + 1, a.len() as u64);
        ensure(tail <= BigRational::from_integer((5 * e).into()), || format!("5E violated at trial {trial}"))?;
    }
    Ok("200 + 200 random instances, zero violations".into())
}

fn modular_multiplicativity() -> Outcome {
    let mut pairs = 0;
    for ell in [3u32, 4] {
        for m1 in 2..=100u64 {
            for m2 in 2..=200 / m1 {
                if num_integer::gcd(m1, m2) != 1 {
                    continue;
                }
                let c = crt_combine(&residue_counts(ell, m1).unwrap(), &residue_counts(ell, m2).unwrap()).unwrap();
                ensure(c == residue_counts(ell, m1 * m2).unwrap(), || format!("ell {ell}: {m1} x {m2}"))?;
                pairs += 1;
            }
        }
        for modulus in (1..=99u64).step_by(2) {
            let p = residue_counts(ell, modulus).unwrap();
            let d = residue_counts(ell, 2 * modulus).unwrap();
            for m in 0..2 * modulus {
                ensure(d.count_u(m) == &(p.count_u(m % modulus) << (ell - 1) as usize), || {
                    format!("ell {ell}: r({m}, {}) != 2^{} r({m}, {modulus})", 2 * modulus, ell - 1)
                })?;
            }
        }
    }
    Ok(format!("{pairs} coprime pairs, odd M <= 99 doubled"))
}

fn maier() -> Outcome {
    let t = table(3, 3, 2000);
    let profile = residue_counts(3, 9).unwrap();
    let cert = MaierCertificate::new(3, 1, 9, 4, vec![ratio(1, 100), ratio(1, 100)], vec![0, 0], 729);
    let r = verify_maier(&cert, &t, &profile).unwrap();
    ensure(r.verdict() == Verdict::Pass, || format!("worked certificate: {:?}", r.failing()))?;
    ensure(r.summary.details["count"] == 81 && r.summary.details["bound"] == "3969/400", || {
        format!("count {} bound {}", r.summary.details["count"], r.summary.details["bound"])
    })?;
    let mut inner = 0;
    for modulus in 1..=9u64 {
        for m in 0..modulus {
            for k in 0..modulus - m {
                let r = verify_maier_inner(3, m, k, modulus, 1, &t).unwrap();
                ensure(r.verdict() == Verdict::Pass, || format!("inner M {modulus} m {m} k {k}"))?;
                inner += 1;
            }
        }
    }
    Ok(format!("count 81 >= 3969/400; {inner} inner instances"))
}

fn failing_conditions(r: &Report) -> Vec<String> {
    r.failing().into_iter().map(String::from).collect()
}

fn nested_gaps() -> Outcome {
    let base = synthetic_certificate();
    let r = verify_nested_gaps(&base).unwrap();
    ensure(r.verdict() == Verdict::Pass, || format!("synthetic certificate: {:?}", r.failing()))?;

    let find = |r: &Report, prefix: &str| -> String {
        r.per_condition.iter().find(|c| c.name.starts_with(prefix)).map(|c| c.name.clone()).unwrap_or_default()
    };
    let mut k1 = base.clone();
    k1.params.k1 = 10;
    let mut h = base.clone();
    h.params.h = BigRational::from_integer(300.into());
    let mut zeroed = base.clone();
    let one = BigInt::one();
    zeroed.f = HalfFunction::sparse("f", [(0, one.clone()), (20, one)]);

    let mut problems = Vec::new();
    for (label, cert, intended) in [("K1 -> 10", k1, "(ii)"), ("H -> 300", h, "(iv)"), ("a_10 -> 0", zeroed, "(iii)")] {
        let r = verify_nested_gaps(&cert).unwrap();
        let failing = failing_conditions(&r);
        if failing != vec![find(&r, intended)] {
            problems.push(format!("{label}: intended {intended}, failing {failing:?}"));
        }
    }
    ensure(problems.is_empty(), || problems.join("; "))?;
    Ok("base passes; each mutation flips exactly its condition".into())
}

fn measure() -> Outcome {
    let cert = synthetic_certificate();
    let r = check_measure(&cert, None).unwrap();
    let c = r.condition("|alpha f(1/q) + beta g(1/q)| >= q^-n2").ok_or("missing measure condition")?;
    ensure(r.verdict() == Verdict::Pass, || format!("verdict {:?}: {}", r.verdict(), c.witness))?;
    ensure(r.summary.details["target"] == "1/2048", || format!("target {}", r.summary.details["target"]))?;
    let pairs = c.witness["pairs"].as_u64().unwrap_or(0);
    // 0 < |alpha|, |alpha| + |beta| <= 100: sum over a of 2(100 - |a|) + 1
    let expected: u64 = (1..=100u64).map(|a| 2 * (2 * (100 - a) + 1)).sum();
    ensure(pairs == expected, || format!("{pairs} pairs enumerated, expected {expected}"))?;
    Ok(format!("{pairs} pairs, all >= 2^-11"))
}

fn theta() -> Outcome {
    let start = Instant::now();
    let r = check_theta_linear_forms(3, 2, 2, 64).unwrap();
    ensure(r.verdict() == Verdict::Pass, || format!("verdict {:?}: {:?}", r.verdict(), r.failing()))?;
    let lmin = r.summary.details["L_min"]["lower"].as_str().ok_or("no L_min")?;
    let lmin = waring_gaps::exact::parse_rational(lmin)?;
    ensure(lmin > BigRational::zero(), || "L_min not positive".into())?;
    let f = HalfFunction::rep_power(3, 1, 256).unwrap();
    let e = eval_enclosure(&f, 2, 64).unwrap();
    let known = ratio(385, 256) + inverse_power(2, 27);
    ensure(e.width() < inverse_power(2, 50), || format!("width {}", e.width()))?;
    ensure(e.contains(&known) && e.lo() >= &known, || format!("enclosure {e}"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("{} forms, L_min_log2 = {}, {secs:.2}s", r.summary.details["forms"], r.summary.details["L_min_log2"]))
}

fn pipeline() -> Outcome {
    let config = PipelineConfig::default_for(3);
    let r = pipeline_dry_run(3, 2, &BigRational::one(), &config).unwrap();
    ensure(r.summary.details["partial"] == false, || format!("stopped at {}", r.summary.details["stopped_at"]))?;
    let alpha = r.condition("alpha < 3/4 (finite schedule)").ok_or("no alpha step")?;
    ensure(alpha.verdict == Verdict::Pass, || format!("alpha = {}", alpha.witness["alpha"]))?;
    let held = r.per_condition.iter().filter(|c| c.verdict == Verdict::Pass).count();
    Ok(format!("{} steps reported ({held} hold), alpha = {}", r.per_condition.len(), alpha.witness["alpha"]))
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn reports() -> Vec<(&'static str, String)> {
    let f = HalfFunction::from_table(Arc::new(table(3, 3, 3000)));
    let scan = scan_mild_gaps(&f, 0..2000, 4, &ratio(8, 1)).unwrap();
    let t = table(4, 4, 100_000);
    let mut bytes = Vec::new();
    t.write_binary(&mut bytes).unwrap();
    vec![
        ("sieve", format!("{:x?}", &bytes)),
        ("mild-scan", serde_json::to_string(&scan.witnesses).unwrap()),
        ("measure", serde_json::to_string(&check_measure(&synthetic_certificate(), None).unwrap()).unwrap()),
        ("linforms", serde_json::to_string(&check_theta_linear_forms(3, 2, 1, 64).unwrap()).unwrap()),
        (
            "pipeline",
            serde_json::to_string(&pipeline_dry_run(3, 2, &BigRational::one(), &PipelineConfig::default_for(3)).unwrap()).unwrap(),
        ),
    ]
}

fn reproducibility() -> Outcome {
    let one = in_pool(1, reports);
    for threads in [2, 7] {
        let other = in_pool(threads, reports);
        for ((name, a), (_, b)) in one.iter().zip(&other) {
            ensure(a == b, || format!("{name} differs between 1 and {threads} threads"))?;
        }
    }
    for (name, json) in one.iter().skip(2) {
        let parsed: Report = serde_json::from_str(json).map_err(|e| format!("{name}: {e}"))?;
        ensure(&serde_json::to_string(&parsed).unwrap() == json, || format!("{name} does not round-trip"))?;
    }
    Ok("identical bytes under 1, 2 and 7 threads; reports round-trip".into())
}

fn main() {
    let criteria: Vec<(u32, &str, fn() -> Outcome)> = vec![
        (1, "sieve matches nested-loop oracle", sieve_correctness),
        (2, "mod 9 obstruction", mod_nine),
        (3, "greedy cube lemma", greedy_lemma),
        (4, "loose bound", loose),
        (5, "tail lemmas", tail_lemmas),
        (6, "modular multiplicativity", modular_multiplicativity),
        (7, "Maier bound", maier),
        (8, "nested gaps principle and mutations", nested_gaps),
        (9, "measure on synthetic certificate", measure),
        (10, "theta linear forms", theta),
        (11, "pipeline dry run", pipeline),
        (12, "reproducibility across thread counts", reproducibility),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let outcome = run();
        let known = KNOWN_RED.contains(&id);
        match &outcome {
            Ok(detail) => println!("criterion {id:>2} {name}: PASS ({detail})"),
            Err(why) => println!("criterion {id:>2} {name}: FAIL ({why}){}", if known { " [known red]" } else { "" }),
        }
        if outcome.is_ok() == known {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        println!("acceptance: unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
    println!("acceptance: done, known red {KNOWN_RED:?}");
}
