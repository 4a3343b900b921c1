//! One handler per subcommand. Each returns a report; tables go to `out`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use num_bigint::{BigInt, BigUint};
use num_traits::{Pow, ToPrimitive, Zero};
use serde_json::json;

use waring_gaps::certify::nested::{NestedGapsCertificate, NestedGapsParams};
use waring_gaps::certify::{
    check_measure, check_theta_linear_forms, pipeline_dry_run, verify_maier, verify_nested_gaps, MaierCertificate,
    PipelineConfig, Report, ThetaPowers, Verdict,
};
use waring_gaps::exact::{display_decimal, rational_string};
use waring_gaps::modular::{crt_combine, residue_counts, search_gap_modulus, SearchOptions};
use waring_gaps::repcount::{
    find_gap_runs, greedy_bound_holds, greedy_decompose, loose_bound, scan_exceptional_set, sieve_rep, RepTable,
    WaringParams,
};
use waring_gaps::series::{default_cutoff_len, is_mild_gap_with_cutoff, MildGapVerdict};
use waring_gaps::HalfFunction;

use crate::params::{p, CliError, CliResult, ParamSpec, Params};

/// Where table output goes. Replays discard it.
pub struct Sink {
    pub replay: bool,
}

impl Sink {
    /// Writer for the `out` parameter (stdout if unset). Returns whether
    /// stdout was used so the report can go elsewhere.
    fn open(&self, params: &Params) -> CliResult<(Box<dyn Write>, bool)> {
        if self.replay {
            return Ok((Box::new(io::sink()), false));
        }
        match params.opt::<String>("out")? {
            Some(path) => {
                let f = File::create(&path).with_context(|| format!("creating {path}"))?;
                Ok((Box::new(BufWriter::new(f)), false))
            }
            None => Ok((Box::new(BufWriter::new(io::stdout())), true)),
        }
    }
}

pub struct Outcome {
    pub report: Report,
    pub stdout_taken: bool,
}

impl From<Report> for Outcome {
    fn from(report: Report) -> Self {
        Outcome { report, stdout_taken: false }
    }
}

type Handler = fn(&Params, &Sink) -> CliResult<Outcome>;

pub struct CommandSpec {
    pub name: &'static str,
    pub about: &'static str,
    pub params: &'static [ParamSpec],
    pub run: Handler,
}

const TABLE: [ParamSpec; 4] = [
    p("table", None, "WRT1 or CSV table to read instead of sieving"),
    p("ell", Some("3"), "power ell"),
    p("s", None, "number of summands (default ell)"),
    p("limit", None, "sieve limit when no table is given"),
];

pub const COMMANDS: &[CommandSpec] = &[
    CommandSpec {
        name: "sieve",
        about: "Sieve r_{ell,s}(n) for n <= limit",
        params: &[
            p("ell", Some("3"), "power ell"),
            p("s", None, "number of summands (default ell)"),
            p("limit", None, "largest n"),
            p("out", None, "table path; .csv writes CSV, anything else WRT1"),
        ],
        run: sieve,
    },
    CommandSpec {
        name: "gaps",
        about: "Maximal zero runs of a table as CSV",
        params: &[TABLE[0], TABLE[1], TABLE[2], TABLE[3], p("min_len", Some("1"), "shortest run"), p("out", None, "CSV path (stdout if unset)")],
        run: gaps,
    },
    CommandSpec {
        name: "greedy",
        about: "Greedy power subtraction for b in [from, to]",
        params: &[
            p("ell", Some("3"), "power ell"),
            p("from", Some("1"), "first b"),
            p("to", None, "last b (default from)"),
            p("out", None, "CSV path (stdout if unset)"),
        ],
        run: greedy,
    },
    CommandSpec {
        name: "modcount",
        about: "Residue profile r_{ell,ell}(m, M)",
        params: &[p("ell", Some("3"), "power ell"), p("modulus", None, "M"), p("out", None, "CSV path (stdout if unset)")],
        run: modcount,
    },
    CommandSpec {
        name: "crt",
        about: "Combine profiles for coprime moduli and compare with the direct count",
        params: &[
            p("ell", Some("3"), "power ell"),
            p("m1", None, "first modulus"),
            p("m2", None, "second modulus"),
            p("out", None, "CSV path (stdout if unset)"),
        ],
        run: crt,
    },
    CommandSpec {
        name: "modsearch",
        about: "Search CRT products of a pool for a gap modulus",
        params: &[
            p("ell", Some("3"), "power ell"),
            p("k1", Some("1"), "K1"),
            p("pool", None, "comma-separated moduli"),
            p("product_bound", Some("4096"), "largest product explored"),
            p("half_residues", Some("false"), "only m with 2m < M"),
        ],
        run: modsearch,
    },
    CommandSpec {
        name: "mild-scan",
        about: "Mild gap points of f_{ell,s} in [from, to)",
        params: &[
            TABLE[0],
            TABLE[1],
            TABLE[2],
            TABLE[3],
            p("from", Some("0"), "first index"),
            p("to", None, "end of range (exclusive)"),
            p("k", None, "gap length K"),
            p("e", None, "tail bound E (rational)"),
            p("cutoff_len", None, "exact tail terms (default max(64, 4K))"),
        ],
        run: mild_scan,
    },
    CommandSpec {
        name: "theta",
        about: "Enclosures of theta(q)^j via f_{ell,j}(1/q)",
        params: &[p("ell", Some("3"), "power ell"), p("q", Some("2"), "q >= 2"), p("terms", Some("64"), "exact terms")],
        run: theta,
    },
    CommandSpec {
        name: "maier",
        about: "Verify a Maier counting certificate",
        params: &[
            p("ell", Some("3"), "power ell"),
            p("k", None, "K"),
            p("modulus", None, "M"),
            p("m", None, "residue m"),
            p("eps", None, "eps_0..eps_K, comma-separated rationals"),
            p("big_e", None, "E_0..E_K, comma-separated integers"),
            p("n", None, "N"),
        ],
        run: maier,
    },
    CommandSpec { name: "nested", about: "Verify a nested gaps certificate", params: NESTED, run: nested },
    CommandSpec { name: "measure", about: "Certify |alpha f(1/q) + beta g(1/q)| >= q^-n2 on the height grid", params: MEASURE, run: measure },
    CommandSpec {
        name: "linforms",
        about: "Certify integer forms in 1, theta, ..., theta^ell are nonzero",
        params: &[
            p("ell", Some("3"), "power ell"),
            p("q", Some("2"), "q >= 2"),
            p("height", Some("2"), "coefficient height"),
            p("terms", Some("64"), "exact terms"),
        ],
        run: linforms,
    },
    CommandSpec {
        name: "pipeline",
        about: "Desk-scale dry run of the parameter recipe",
        params: &[
            p("ell", Some("3"), "power ell"),
            p("q", Some("2"), "q >= 2"),
            p("j", Some("1"), "J (rational)"),
            p("pool", None, "moduli pool (default per ell)"),
            p("product_bound", Some("256"), "largest CRT product"),
            p("k1", Some("1"), "K1"),
            p("xi", Some("32/3"), "xi"),
            p("sigma", None, "sigma (default per ell)"),
            p("max_sieve", Some("10000000"), "largest sieve limit"),
        ],
        run: pipeline,
    },
    CommandSpec {
        name: "exceptional",
        about: "Exceptional set A_N for biquadrates",
        params: &[
            p("table", None, "r_{4,4} table to read instead of sieving"),
            p("limit", None, "N"),
            p("eps", Some("1/16384"), "epsilon (rational)"),
            p("out", None, "CSV path for members (stdout if unset)"),
        ],
        run: exceptional,
    },
];

const NESTED: &[ParamSpec] = &[
    p("q", Some("2"), "q"),
    p("h", Some("100"), "H"),
    p("k1", Some("9"), "K1"),
    p("k2", Some("9"), "K2"),
    p("k_prime", Some("39"), "K'"),
    p("n_prime", Some("1"), "n'"),
    p("n1", Some("1"), "n1"),
    p("n2", Some("11"), "n2"),
    p("e", Some("2"), "E"),
    p("e_prime", Some("1"), "E'"),
    p("f", Some("sparse:0=1,10=1,20=1"), "f as sparse:n=a,... or rep:ell:s:limit"),
    p("g", Some("sparse:40=1"), "g, same syntax"),
];

const MEASURE: &[ParamSpec] = &[
    NESTED[0], NESTED[1], NESTED[2], NESTED[3], NESTED[4], NESTED[5], NESTED[6], NESTED[7], NESTED[8], NESTED[9],
    NESTED[10], NESTED[11],
    p("terms", None, "exact terms (default from the certificate)"),
];

pub fn find(name: &str) -> Option<&'static CommandSpec> {
    COMMANDS.iter().find(|c| c.name == name)
}

fn param_err(key: &str, message: impl Into<String>) -> CliError {
    CliError::Param { key: key.into(), message: message.into() }
}

fn ell_s(params: &Params) -> CliResult<(u32, u32)> {
    let ell: u32 = params.get("ell")?;
    let s = params.opt::<u32>("s")?.unwrap_or(ell);
    Ok((ell, s))
}

fn read_table(path: &str, params: &Params) -> CliResult<RepTable> {
    let file = File::open(path).with_context(|| format!("opening {path}"))?;
    let r = BufReader::new(file);
    if Path::new(path).extension().is_some_and(|e| e == "csv") {
        let (ell, s) = ell_s(params)?;
        Ok(RepTable::read_csv(WaringParams::new(ell, s)?, r)?)
    } else {
        Ok(RepTable::read_binary(r)?)
    }
}

fn table_from(params: &Params) -> CliResult<RepTable> {
    if let Some(path) = params.opt::<String>("table")? {
        let t = read_table(&path, params)?;
        params.check_bound("table limit", t.limit(), "max_n")?;
        return Ok(t);
    }
    let (ell, s) = ell_s(params)?;
    let limit: u64 = params.get("limit")?;
    params.check_bound("limit", limit, "max_n")?;
    Ok(sieve_rep(WaringParams::new(ell, s)?, limit)?)
}

fn sieve(params: &Params, sink: &Sink) -> CliResult<Outcome> {
    let (ell, s) = ell_s(params)?;
    let limit: u64 = params.get("limit")?;
    params.check_bound("limit", limit, "max_n")?;
    let t = sieve_rep(WaringParams::new(ell, s)?, limit)?;
    if let (Some(path), false) = (params.opt::<String>("out")?, sink.replay) {
        let w = BufWriter::new(File::create(&path).with_context(|| format!("creating {path}"))?);
        if path.ends_with(".csv") {
            t.write_csv(w)?;
        } else {
            t.write_binary(w)?;
        }
    }
    let counts = t.counts();
    let mut report = Report::new(json!({"ell": ell, "s": s, "limit": limit}));
    report.push("counts[0] = 1", Verdict::from_bool(counts[0] == 1), json!({"counts[0]": counts[0]}));
    let over = counts.iter().enumerate().find(|(n, &c)| u128::from(c) > loose_bound(ell, *n as u64)).map(|(n, _)| n);
    report.push("counts[n] <= 2^ell (n+1)", Verdict::from_bool(over.is_none()), json!({"first_violation": over}));
    let verdict = report.combined();
    let zeros = counts.iter().filter(|&&c| c == 0).count();
    let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    Ok(report
        .finish(
            verdict,
            json!({
                "entries": counts.len(),
                "zero_entries": zeros,
                "max_count": counts.iter().max(),
                "sum_of_counts": total,
            }),
        )
        .into())
}

fn gaps(params: &Params, sink: &Sink) -> CliResult<Outcome> {
    let t = table_from(params)?;
    let min_len: u64 = params.get("min_len")?;
    if min_len == 0 {
        return Err(param_err("min_len", "must be positive"));
    }
    let runs = find_gap_runs(&t, min_len);
    let (w, stdout_taken) = sink.open(params)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["start", "length", "truncated"]).context("writing CSV")?;
    for r in &runs {
        csv.write_record([r.start.to_string(), r.length.to_string(), r.truncated.to_string()]).context("writing CSV")?;
    }
    csv.flush().context("writing CSV")?;
    let report = Report::new(json!({"ell": t.ell(), "s": t.s(), "limit": t.limit(), "min_len": min_len})).finish(
        Verdict::Pass,
        json!({
            "runs": runs.len(),
            "longest": runs.iter().max_by_key(|r| (r.length, std::cmp::Reverse(r.start))),
            "truncated_runs": runs.iter().filter(|r| r.truncated).count(),
        }),
    );
    Ok(Outcome { report, stdout_taken })
}

fn greedy(params: &Params, sink: &Sink) -> CliResult<Outcome> {
    let ell: u32 = params.get("ell")?;
    let from: u64 = params.get("from")?;
    let to = params.opt::<u64>("to")?.unwrap_or(from);
    if from == 0 || to < from {
        return Err(param_err("to", "need 1 <= from <= to"));
    }
    params.check_bound("to", to, "max_n")?;
    let t = sieve_rep(WaringParams::new(ell, ell)?, to)?;
    let (w, stdout_taken) = sink.open(params)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["b", "n", "parts", "bound_holds"]).context("writing CSV")?;
    let mut bound_fail = Vec::new();
    let mut unrepresented = Vec::new();
    for b in from..=to {
        let g = greedy_decompose(ell, b);
        let holds = ell != 3 || greedy_bound_holds(b, g.n);
        if !holds {
            bound_fail.push(b);
        }
        if t.counts()[g.n as usize] == 0 {
            unrepresented.push(b);
        }
        let parts = g.parts.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
        csv.write_record([b.to_string(), g.n.to_string(), parts, holds.to_string()]).context("writing CSV")?;
    }
    csv.flush().context("writing CSV")?;
    let mut report = Report::new(json!({"ell": ell, "from": from, "to": to}));
    if ell == 3 {
        report.push(
            "(b - n)^27 < 25^27 b^8",
            Verdict::from_bool(bound_fail.is_empty()),
            json!({"failures": bound_fail.len(), "first": bound_fail.iter().take(16).collect::<Vec<_>>()}),
        );
    }
    report.push(
        "r_{ell,ell}(n) > 0",
        Verdict::from_bool(unrepresented.is_empty()),
        json!({"failures": unrepresented.len(), "first": unrepresented.iter().take(16).collect::<Vec<_>>()}),
    );
    let verdict = report.combined();
    Ok(Outcome { report: report.finish(verdict, json!({"checked": to - from + 1})), stdout_taken })
}

fn profile_csv(profile: &waring_gaps::modular::ResidueProfile, params: &Params, sink: &Sink) -> CliResult<bool> {
    let (w, stdout_taken) = sink.open(params)?;
    profile.write_csv(w)?;
    Ok(stdout_taken)
}

fn modcount(params: &Params, sink: &Sink) -> CliResult<Outcome> {
    let ell: u32 = params.get("ell")?;
    let modulus: u64 = params.get("modulus")?;
    params.check_bound("modulus", modulus, "max_modulus")?;
    let profile = residue_counts(ell, modulus)?;
    let stdout_taken = profile_csv(&profile, params, sink)?;
    let mass = BigUint::from(modulus).pow(ell);
    let zero: Vec<usize> = profile.r.iter().enumerate().filter(|(_, c)| c.is_zero()).map(|(m, _)| m).collect();
    let mut report = Report::new(json!({"ell": ell, "M": modulus}));
    report.push("sum_m r(m, M) = M^ell", Verdict::from_bool(profile.total() == mass), json!({"total": profile.total().to_string()}));
    let verdict = report.combined();
    let report = report.finish(
        verdict,
        json!({
            "zero_residues": zero.iter().take(64).collect::<Vec<_>>(),
            "zero_residue_count": zero.len(),
            "global_quality": rational_string(&profile.global_quality()),
        }),
    );
    Ok(Outcome { report, stdout_taken })
}

fn crt(params: &Params, sink: &Sink) -> CliResult<Outcome> {
    let ell: u32 = params.get("ell")?;
    let m1: u64 = params.get("m1")?;
    let m2: u64 = params.get("m2")?;
    params.check_bound("m1 * m2", m1.saturating_mul(m2), "max_modulus")?;
    let combined = crt_combine(&residue_counts(ell, m1)?, &residue_counts(ell, m2)?)?;
    let direct = residue_counts(ell, m1 * m2)?;
    let stdout_taken = profile_csv(&combined, params, sink)?;
    let first_diff = (0..m1 * m2).find(|&m| combined.count_u(m) != direct.count_u(m));
    let mut report = Report::new(json!({"ell": ell, "m1": m1, "m2": m2}));
    report.push("crt_combine equals the direct count", Verdict::from_bool(first_diff.is_none()), json!({"first_difference": first_diff}));
    let verdict = report.combined();
    Ok(Outcome { report: report.finish(verdict, json!({"M": m1 * m2})), stdout_taken })
}

fn modsearch(params: &Params, _: &Sink) -> CliResult<Outcome> {
    let ell: u32 = params.get("ell")?;
    let k1: u64 = params.get("k1")?;
    if k1 == 0 {
        return Err(param_err("k1", "must be positive"));
    }
    let pool: Vec<u64> = params.list("pool")?;
    let bound: u64 = params.get("product_bound")?;
    params.check_bound("product_bound", bound, "max_modulus")?;
    let opts = SearchOptions {
        product_bound: bound,
        m_limit: if params.flag("half_residues")? { Some(|m: u64| m.div_ceil(2)) } else { None },
    };
    let found = search_gap_modulus(ell, k1, &pool, &opts)?;
    let mut report = Report::new(json!({"ell": ell, "K1": k1, "pool": pool, "product_bound": bound}));
    let ok = found.as_ref().is_some_and(|f| f.meets_iii);
    report.push("r(m+k, M) <= M^(ell-1) / (2 K1) for 0 <= k < K1", Verdict::from_bool(ok), serde_json::to_value(&found)?);
    let verdict = report.combined();
    Ok(report.finish(verdict, json!({"best": found})).into())
}

fn mild_scan(params: &Params, _: &Sink) -> CliResult<Outcome> {
    let t = Arc::new(table_from(params)?);
    let f = HalfFunction::from_table(t.clone());
    let from: u64 = params.get("from")?;
    let to: u64 = params.get("to")?;
    let k: u64 = params.get("k")?;
    let e = params.rational("e")?;
    if k == 0 {
        return Err(param_err("k", "must be positive"));
    }
    let cutoff = params.opt::<u64>("cutoff_len")?.unwrap_or_else(|| default_cutoff_len(k));
    params.check_bound("cutoff_len", cutoff, "max_terms")?;
    if to + k + cutoff > t.limit() {
        return Err(param_err("to", format!("table covers n <= {}, scan needs {}", t.limit(), to + k + cutoff)));
    }
    use rayon::prelude::*;
    let verdicts: Vec<(u64, MildGapVerdict)> = (from..to)
        .into_par_iter()
        .map(|n| is_mild_gap_with_cutoff(&f, n, k, &e, cutoff).map(|v| (n, v)))
        .collect::<Result<_, _>>()?;
    let mut witnesses = Vec::new();
    let mut inconclusive = Vec::new();
    for (n, v) in verdicts {
        match v {
            MildGapVerdict::Witness(w) => witnesses.push(w),
            MildGapVerdict::Inconclusive { .. } => inconclusive.push(n),
            _ => {}
        }
    }
    let mut replay_fail = Vec::new();
    for w in &witnesses {
        if !w.replay(&f)? {
            replay_fail.push(w.n);
        }
    }
    let mut report = Report::new(json!({"function": f.id(), "from": from, "to": to, "K": k, "E": rational_string(&e), "cutoff_len": cutoff}));
    report.push("every witness replays against raw coefficients", Verdict::from_bool(replay_fail.is_empty()), json!({"failing": replay_fail}));
    let verdict = report.combined();
    Ok(report
        .finish(
            verdict,
            json!({
                "points": witnesses.iter().map(|w| w.n).collect::<Vec<_>>(),
                "inconclusive": inconclusive,
                "witnesses": witnesses,
            }),
        )
        .into())
}

fn theta(params: &Params, _: &Sink) -> CliResult<Outcome> {
    let ell: u32 = params.get("ell")?;
    let q: u64 = params.get("q")?;
    let terms: u64 = params.get("terms")?;
    if q < 2 {
        return Err(param_err("q", "must be >= 2"));
    }
    params.check_bound("terms", terms, "max_terms")?;
    let powers = ThetaPowers::compute(ell, q, terms).map_err(anyhow::Error::from)?;
    let mut report = Report::new(json!({"ell": ell, "q": q, "terms": terms}));
    report.push("series powers agree with interval powers of theta(q)", Verdict::from_bool(powers.consistent()), json!(null));
    let verdict = report.combined();
    let display: Vec<_> = powers.series.iter().map(|e| display_decimal(e.lo(), 20)).collect();
    Ok(report
        .finish(
            verdict,
            json!({
                "theta_powers": powers.series,
                "interval_powers": powers.interval_powers,
                "widths_log2": powers.series.iter().map(|e| waring_gaps::exact::floor_log2(&e.width())).collect::<Vec<_>>(),
                "lower_display_only": display,
            }),
        )
        .into())
}

fn maier(params: &Params, _: &Sink) -> CliResult<Outcome> {
    let ell: u32 = params.get("ell")?;
    let k: u64 = params.get("k")?;
    let modulus: u64 = params.get("modulus")?;
    let m: u64 = params.get("m")?;
    let n: u64 = params.get("n")?;
    let eps = params.rational_list("eps")?;
    let big_e: Vec<u64> = params.list("big_e")?;
    params.check_bound("modulus", modulus, "max_modulus")?;
    params.check_bound("n", n, "max_n")?;
    if modulus == 0 {
        return Err(param_err("modulus", "must be positive"));
    }
    let cert = MaierCertificate::new(ell, k, modulus, m, eps, big_e, n);
    let table = sieve_rep(WaringParams::new(ell, ell)?, n.max(1))?;
    let profile = residue_counts(ell, modulus)?;
    Ok(verify_maier(&cert, &table, &profile).map_err(anyhow::Error::from)?.into())
}

fn parse_series(key: &str, spec: &str, max_n: u64) -> CliResult<HalfFunction> {
    let bad = |m: &str| param_err(key, format!("{spec:?}: {m}"));
    if let Some(rest) = spec.strip_prefix("sparse:") {
        let mut coeffs = Vec::new();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (n, a) = item.split_once('=').ok_or_else(|| bad("expected n=a"))?;
            let n: u64 = n.trim().parse().map_err(|_| bad("index must be a nonnegative integer"))?;
            let a: BigInt = a.trim().parse().map_err(|_| bad("coefficient must be an integer"))?;
            coeffs.push((n, a));
        }
        return Ok(HalfFunction::sparse(key, coeffs));
    }
    if let Some(rest) = spec.strip_prefix("rep:") {
        let parts: Vec<u64> = rest.split(':').map(|s| s.trim().parse()).collect::<Result<_, _>>().map_err(|_| bad("expected rep:ell:s:limit"))?;
        let [ell, s, limit] = parts[..] else { return Err(bad("expected rep:ell:s:limit")) };
        if limit > max_n {
            return Err(CliError::Bound { key: key.into(), value: limit.to_string(), bound_key: "max_n".into(), bound: max_n.to_string() });
        }
        return HalfFunction::rep_power(ell as u32, s as u32, limit).map_err(|e| bad(&e.to_string()));
    }
    Err(bad("expected sparse:... or rep:ell:s:limit"))
}

fn nested_cert(params: &Params) -> CliResult<NestedGapsCertificate> {
    let max_n: u64 = params.get("max_n")?;
    let cert = NestedGapsCertificate {
        params: NestedGapsParams {
            q: params.get("q")?,
            h: params.rational("h")?,
            k1: params.get("k1")?,
            k2: params.get("k2")?,
            k_prime: params.get("k_prime")?,
            n_prime: params.get("n_prime")?,
            n1: params.get("n1")?,
            n2: params.get("n2")?,
            e: params.rational("e")?,
            e_prime: params.rational("e_prime")?,
        },
        f: parse_series("f", params.raw("f")?, max_n)?,
        g: parse_series("g", params.raw("g")?, max_n)?,
    };
    if cert.params.q < 2 {
        return Err(param_err("q", "must be >= 2"));
    }
    let h = cert.params.h.floor().to_integer().to_u64().unwrap_or(u64::MAX);
    params.check_bound("h", h, "max_height")?;
    Ok(cert)
}

fn nested(params: &Params, _: &Sink) -> CliResult<Outcome> {
    let cert = nested_cert(params)?;
    Ok(verify_nested_gaps(&cert).map_err(anyhow::Error::from)?.into())
}

fn measure(params: &Params, _: &Sink) -> CliResult<Outcome> {
    let cert = nested_cert(params)?;
    let terms = params.opt::<u64>("terms")?;
    if let Some(t) = terms {
        params.check_bound("terms", t, "max_terms")?;
    }
    Ok(check_measure(&cert, terms).map_err(anyhow::Error::from)?.into())
}

fn linforms(params: &Params, _: &Sink) -> CliResult<Outcome> {
    let ell: u32 = params.get("ell")?;
    let q: u64 = params.get("q")?;
    let height: u64 = params.get("height")?;
    let terms: u64 = params.get("terms")?;
    params.check_bound("height", height, "max_height")?;
    params.check_bound("terms", terms, "max_terms")?;
    let forms = (2 * height + 1).checked_pow(ell + 1).unwrap_or(u64::MAX);
    if forms > 50_000_000 {
        return Err(CliError::Bound {
            key: "(2 height + 1)^(ell + 1)".into(),
            value: forms.to_string(),
            bound_key: "enumeration limit".into(),
            bound: "50000000".into(),
        });
    }
    Ok(check_theta_linear_forms(ell, q, height, terms).map_err(anyhow::Error::from)?.into())
}

fn pipeline(params: &Params, _: &Sink) -> CliResult<Outcome> {
    let ell: u32 = params.get("ell")?;
    if !(3..=4).contains(&ell) {
        return Err(param_err("ell", "pipeline supports ell = 3 or 4"));
    }
    let mut config = PipelineConfig::default_for(ell);
    if params.has("pool") {
        config.pool = params.list("pool")?;
    }
    if params.has("sigma") {
        config.sigma = params.raw("sigma")?.to_string();
    }
    config.product_bound = params.get("product_bound")?;
    config.k1 = params.get("k1")?;
    config.xi = params.rational("xi")?;
    config.max_modulus = params.get("max_modulus")?;
    config.max_n = params.get("max_n")?;
    config.max_sieve = params.get("max_sieve")?;
    if config.k1 == 0 {
        return Err(param_err("k1", "must be positive"));
    }
    let j = params.rational("j")?;
    Ok(pipeline_dry_run(ell, params.get("q")?, &j, &config).map_err(anyhow::Error::from)?.into())
}

fn exceptional(params: &Params, sink: &Sink) -> CliResult<Outcome> {
    let limit: u64 = params.get("limit")?;
    params.check_bound("limit", limit, "max_n")?;
    let eps = params.rational("eps")?;
    let (num, den) = (eps.numer().to_u64(), eps.denom().to_u64());
    let (Some(num), Some(den)) = (num, den) else {
        return Err(param_err("eps", "must be a nonnegative fraction with u64 parts"));
    };
    let table = match params.opt::<String>("table")? {
        Some(path) => RepTable::read_binary(BufReader::new(File::open(&path).with_context(|| format!("opening {path}"))?))?,
        None => sieve_rep(WaringParams::new(4, 4)?, limit)?,
    };
    let set = scan_exceptional_set(limit, num_rational::Ratio::new(num, den), &table)?;
    let (mut w, stdout_taken) = sink.open(params)?;
    writeln!(w, "a").context("writing CSV")?;
    for a in &set.members {
        writeln!(w, "{a}").context("writing CSV")?;
    }
    w.flush().context("writing CSV")?;
    let report = Report::new(json!({"limit": limit, "eps": rational_string(&eps)})).finish(
        Verdict::Pass,
        json!({
            "exponent": rational_string(&set.exponent),
            "members": set.members.len(),
            "density": rational_string(&set.density),
            "density_display_only": display_decimal(&set.density, 9),
            "largest_members": set.members.iter().rev().take(8).collect::<Vec<_>>(),
        }),
    );
    Ok(Outcome { report, stdout_taken })
}
