//! `waring-gaps`: batch front-end. Every run prints or writes a JSON report
//! that embeds its effective configuration; `replay` re-runs a report and
//! checks that the verdicts come out bit-identical.

mod commands;
mod params;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use serde_json::{json, Value};
use waring_gaps::certify::{Report, Verdict};

use commands::{Sink, COMMANDS};
use params::{normalize, read_config_file, CliError, CliResult, Params, BOUNDS};

fn cli() -> Command {
    let mut cmd = Command::new("waring-gaps")
        .about("Exact Waring sieves, mild gaps and nested-gap certificates")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg(Arg::new("config").long("config").global(true).value_name("FILE").help("flat key = value config file"))
        .arg(Arg::new("report").long("report").global(true).value_name("FILE").help("write the JSON report here"))
        .arg(
            Arg::new("threads")
                .long("threads")
                .global(true)
                .env("WARING_GAPS_THREADS")
                .value_parser(clap::value_parser!(usize))
                .help("worker threads; results do not depend on it"),
        );
    for spec in COMMANDS {
        let mut sub = Command::new(spec.name).about(spec.about);
        for ps in spec.params.iter().chain(BOUNDS) {
            let mut help = ps.help.to_string();
            if let Some(d) = ps.default {
                help.push_str(&format!(" [default: {d}]"));
            }
            sub = sub.arg(Arg::new(ps.key).long(ps.key.replace('_', "-")).value_name("VALUE").help(help));
        }
        cmd = cmd.subcommand(sub);
    }
    cmd.subcommand(
        Command::new("replay")
            .about("Re-run a report from its embedded configuration and compare verdicts")
            .arg(Arg::new("input").required(true).value_name("REPORT").help("report JSON to replay"))
            .arg(Arg::new("quiet").long("quiet").action(ArgAction::SetTrue).help("only set the exit status")),
    )
}

fn flags_of(spec: &commands::CommandSpec, m: &ArgMatches) -> BTreeMap<String, String> {
    spec.params
        .iter()
        .chain(BOUNDS)
        .filter_map(|ps| m.get_one::<String>(ps.key).map(|v| (normalize(ps.key), v.clone())))
        .collect()
}

fn full_report(report: &Report, params: &Params, threads: Option<usize>) -> CliResult<Value> {
    let mut v = serde_json::to_value(report)?;
    v["run_config"] = json!({"command": params.command, "params": params.values, "threads": threads});
    Ok(v)
}

fn emit(v: &Value, path: Option<&String>, stdout_taken: bool) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| CliError::Usage(format!("cannot write report {p}: {e}")))?,
        None if !stdout_taken => println!("{text}"),
        None => {}
    }
    Ok(())
}

fn run_named(params: &Params, sink: &Sink) -> CliResult<commands::Outcome> {
    let spec = commands::find(&params.command).ok_or_else(|| CliError::Usage(format!("unknown subcommand {}", params.command)))?;
    (spec.run)(params, sink)
}

fn replay(m: &ArgMatches, threads: Option<usize>, report_path: Option<&String>) -> CliResult<Verdict> {
    let input = PathBuf::from(m.get_one::<String>("input").expect("required"));
    let text = std::fs::read_to_string(&input).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", input.display())))?;
    let original: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{} is not JSON: {e}", input.display())))?;
    let rc = original.get("run_config").ok_or_else(|| CliError::Usage("report has no run_config".into()))?;
    let command = rc["command"].as_str().ok_or_else(|| CliError::Usage("run_config.command missing".into()))?;
    let values: BTreeMap<String, String> = serde_json::from_value(rc["params"].clone())
        .map_err(|e| CliError::Usage(format!("run_config.params: {e}")))?;
    let params = Params { command: command.to_string(), values };
    let outcome = run_named(&params, &Sink { replay: true })?;
    let fresh = serde_json::to_value(&outcome.report)?;

    let verdicts = |v: &Value| -> Vec<(Value, Value)> {
        v["per_condition"]
            .as_array()
            .map(|a| a.iter().map(|c| (c["name"].clone(), c["verdict"].clone())).collect())
            .unwrap_or_default()
    };
    let mut r = Report::new(json!({"replayed": input.display().to_string(), "command": command, "threads": threads}));
    let same_verdicts = verdicts(&original) == verdicts(&fresh) && original["summary"]["verdict"] == fresh["summary"]["verdict"];
    r.push("per-condition verdicts reproduce", Verdict::from_bool(same_verdicts), json!({"summary": fresh["summary"]["verdict"]}));
    let mismatched: Vec<&str> = ["certificate", "per_condition", "summary"]
        .into_iter()
        .filter(|k| serde_json::to_string(&original[*k]).ok() != serde_json::to_string(&fresh[*k]).ok())
        .collect();
    r.push("report body reproduces bit-identically", Verdict::from_bool(mismatched.is_empty()), json!({"mismatched": mismatched}));
    let verdict = r.combined();
    let r = r.finish(verdict, json!({"replayed_verdict": fresh["summary"]["verdict"]}));
    if !m.get_flag("quiet") {
        emit(&serde_json::to_value(&r)?, report_path, false)?;
    }
    Ok(verdict)
}

fn run() -> CliResult<Verdict> {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return Ok(Verdict::Pass);
        }
        Err(e) => return Err(CliError::Usage(e.to_string().trim_end().to_string())),
    };
    let threads = matches.get_one::<usize>("threads").copied();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Param { key: "threads".into(), message: "must be positive".into() });
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(anyhow::Error::from)?;
    }
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let report_path = sub.get_one::<String>("report").or(matches.get_one::<String>("report"));
    if name == "replay" {
        return replay(sub, threads, report_path);
    }
    let spec = commands::find(name).ok_or_else(|| CliError::Usage(format!("unknown subcommand {name}")))?;
    let file = match sub.get_one::<String>("config").or(matches.get_one::<String>("config")) {
        Some(path) => read_config_file(path.as_ref())?,
        None => BTreeMap::new(),
    };
    let params = Params::merge(name, spec.params, file, flags_of(spec, sub))?;
    let outcome = (spec.run)(&params, &Sink { replay: false })?;
    emit(&full_report(&outcome.report, &params, threads)?, report_path, outcome.stdout_taken)?;
    Ok(outcome.report.verdict())
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    let pipe = |io: &std::io::Error| io.kind() == std::io::ErrorKind::BrokenPipe;
    e.chain().any(|c| match (c.downcast_ref::<std::io::Error>(), c.downcast_ref::<csv::Error>()) {
        (Some(io), _) => pipe(io),
        (_, Some(err)) => matches!(err.kind(), csv::ErrorKind::Io(io) if pipe(io)),
        _ => false,
    })
}

fn main() -> ExitCode {
    match run() {
        Ok(v) => ExitCode::from(v.exit_code() as u8),
        Err(CliError::Runtime(e)) if is_broken_pipe(&e) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("waring-gaps: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
