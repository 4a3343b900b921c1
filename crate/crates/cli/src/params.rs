//! Parameter tables, config files and the merged effective configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_rational::BigRational;
use waring_gaps::exact::parse_rational;

#[derive(Debug)]
pub enum CliError {
    /// Unknown subcommand, unknown key or a config file that does not parse.
    Usage(String),
    /// A parameter is missing or its value is malformed.
    Param { key: String, message: String },
    /// A parameter exceeds its configured resource bound.
    Bound { key: String, value: String, bound_key: String, bound: String },
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Param { .. } => 65,
            CliError::Bound { .. } => 66,
            CliError::Runtime(_) => 70,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Param { key, message } => write!(f, "bad parameter {key}: {message}"),
            CliError::Bound { key, value, bound_key, bound } => {
                write!(f, "bound violation: {key} = {value} exceeds {bound_key} = {bound}")
            }
            CliError::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Clone, Copy)]
pub struct ParamSpec {
    pub key: &'static str,
    /// `None` means the parameter is optional with no default.
    pub default: Option<&'static str>,
    pub help: &'static str,
}

pub const fn p(key: &'static str, default: Option<&'static str>, help: &'static str) -> ParamSpec {
    ParamSpec { key, default, help }
}

/// Resource bounds accepted by every subcommand.
pub const BOUNDS: &[ParamSpec] = &[
    p("max_n", Some("100000000"), "largest sieve limit or N"),
    p("max_modulus", Some("100000"), "largest modulus"),
    p("max_height", Some("1000"), "largest coefficient height"),
    p("max_terms", Some("100000"), "largest number of exact series terms"),
];

/// Reads a flat `key = value` file; `#` starts a comment.
pub fn read_config_file(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("{}:{}: expected key = value", path.display(), i + 1)));
        };
        out.insert(normalize(k.trim()), v.trim().trim_matches('"').to_string());
    }
    Ok(out)
}

pub fn normalize(key: &str) -> String {
    key.replace('-', "_")
}

/// Effective parameters of one run: defaults, then config file, then flags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Params {
    pub command: String,
    pub values: BTreeMap<String, String>,
}

impl Params {
    pub fn merge(
        command: &str,
        specs: &[ParamSpec],
        file: BTreeMap<String, String>,
        flags: BTreeMap<String, String>,
    ) -> CliResult<Self> {
        let known = |k: &str| specs.iter().chain(BOUNDS).any(|s| s.key == k);
        let mut values = BTreeMap::new();
        for s in specs.iter().chain(BOUNDS) {
            if let Some(d) = s.default {
                values.insert(s.key.to_string(), d.to_string());
            }
        }
        for (k, v) in file.into_iter().chain(flags) {
            if !known(&k) {
                return Err(CliError::Usage(format!("{command} has no parameter {k}")));
            }
            values.insert(k, v);
        }
        Ok(Params { command: command.to_string(), values })
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.get(key).is_some_and(|v| !v.is_empty())
    }

    pub fn raw(&self, key: &str) -> CliResult<&str> {
        match self.values.get(key) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(CliError::Param { key: key.into(), message: "missing".into() }),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<T>
    where
        T::Err: fmt::Display,
    {
        let raw = self.raw(key)?;
        raw.parse().map_err(|e: T::Err| CliError::Param { key: key.into(), message: format!("{raw:?}: {e}") })
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: fmt::Display,
    {
        if self.has(key) {
            self.get(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn flag(&self, key: &str) -> CliResult<bool> {
        Ok(self.opt::<bool>(key)?.unwrap_or(false))
    }

    pub fn rational(&self, key: &str) -> CliResult<BigRational> {
        let raw = self.raw(key)?;
        parse_rational(raw).map_err(|message| CliError::Param { key: key.into(), message })
    }

    pub fn list<T: FromStr>(&self, key: &str) -> CliResult<Vec<T>>
    where
        T::Err: fmt::Display,
    {
        self.raw(key)?
            .split(',')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e: T::Err| CliError::Param { key: key.into(), message: format!("{s:?}: {e}") }))
            .collect()
    }

    pub fn rational_list(&self, key: &str) -> CliResult<Vec<BigRational>> {
        self.raw(key)?
            .split(',')
            .map(|s| parse_rational(s.trim()).map_err(|message| CliError::Param { key: key.into(), message }))
            .collect()
    }

    /// Fails with a bound violation if `value` exceeds the bound `bound_key`.
    pub fn check_bound(&self, key: &str, value: u64, bound_key: &str) -> CliResult<()> {
        let bound: u64 = self.get(bound_key)?;
        if value > bound {
            return Err(CliError::Bound {
                key: key.into(),
                value: value.to_string(),
                bound_key: bound_key.into(),
                bound: bound.to_string(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPECS: &[ParamSpec] = &[p("ell", Some("3"), ""), p("limit", None, "")];

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file = BTreeMap::from([("ell".to_string(), "4".to_string()), ("limit".to_string(), "10".to_string())]);
        let flags = BTreeMap::from([("limit".to_string(), "20".to_string())]);
        let p = Params::merge("sieve", SPECS, file, flags).unwrap();
        assert_eq!(p.get::<u32>("ell").unwrap(), 4);
        assert_eq!(p.get::<u64>("limit").unwrap(), 20);
        assert_eq!(p.get::<u64>("max_n").unwrap(), 100_000_000);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_distinct() {
        let flags = BTreeMap::from([("bogus".to_string(), "1".to_string())]);
        assert_eq!(Params::merge("sieve", SPECS, BTreeMap::new(), flags).unwrap_err().exit_code(), 64);
        let flags = BTreeMap::from([("limit".to_string(), "ten".to_string())]);
        let p = Params::merge("sieve", SPECS, BTreeMap::new(), flags).unwrap();
        assert_eq!(p.get::<u64>("limit").unwrap_err().exit_code(), 65);
        assert_eq!(p.check_bound("limit", 1 << 40, "max_n").unwrap_err().exit_code(), 66);
    }

    #[test]
    fn config_file_parses_comments_and_quotes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# comment\nell = 4\nmin-len = \"3\"  # trailing\n\n").unwrap();
        let m = read_config_file(&path).unwrap();
        assert_eq!(m["ell"], "4");
        assert_eq!(m["min_len"], "3");
        std::fs::write(&path, "ell 4\n").unwrap();
        assert!(read_config_file(&path).is_err());
    }
}
