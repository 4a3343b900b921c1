use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    /// The certificate itself is malformed; only used in summaries.
    Invalid,
}

impl Verdict {
    /// CLI exit status: 0 pass, 1 fail, 2 inconclusive, 3 invalid.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 2,
            Verdict::Invalid => 3,
        }
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub verdict: Verdict,
    pub witness: Value,
}

impl Condition {
    pub fn new(name: impl Into<String>, verdict: Verdict, witness: Value) -> Self {
        Condition { name: name.into(), verdict, witness }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub verdict: Verdict,
    #[serde(default)]
    pub details: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub certificate: Value,
    pub per_condition: Vec<Condition>,
    pub summary: Summary,
}

impl Report {
    pub fn new(certificate: Value) -> Self {
        Report {
            certificate,
            per_condition: Vec::new(),
            summary: Summary { verdict: Verdict::Pass, details: Value::Null },
        }
    }

    pub fn push(&mut self, name: impl Into<String>, verdict: Verdict, witness: Value) -> Verdict {
        self.per_condition.push(Condition::new(name, verdict, witness));
        verdict
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.per_condition.iter().find(|c| c.name == name)
    }

    pub fn verdict_of(&self, name: &str) -> Option<Verdict> {
        self.condition(name).map(|c| c.verdict)
    }

    /// Fail dominates inconclusive, which dominates pass.
    pub fn combined(&self) -> Verdict {
        fold_verdicts(self.per_condition.iter().map(|c| c.verdict))
    }

    pub fn finish(mut self, verdict: Verdict, details: Value) -> Self {
        self.summary = Summary { verdict, details };
        self
    }

    pub fn verdict(&self) -> Verdict {
        self.summary.verdict
    }

    pub fn failing(&self) -> Vec<&str> {
        self.per_condition
            .iter()
            .filter(|c| c.verdict == Verdict::Fail)
            .map(|c| c.name.as_str())
            .collect()
    }
}

pub fn fold_verdicts(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
    let mut out = Verdict::Pass;
    for v in verdicts {
        out = match (out, v) {
            (Verdict::Invalid, _) | (_, Verdict::Invalid) => Verdict::Invalid,
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Pass,
        };
    }
    out
}
