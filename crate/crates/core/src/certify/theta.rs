//! Non-vanishing of integer linear forms in (1, θ(q), ..., θ(q)^ell).

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::report::{Report, Verdict};
use super::CertifyError;
use crate::exact::{display_decimal, floor_log2, serde_rational};
use crate::series::{eval_enclosure, Enclosure, HalfFunction};

/// Integer coefficients alpha_0..alpha_ell with a declared height bound.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearForm {
    pub coefficients: Vec<i64>,
    pub height: u64,
}

impl LinearForm {
    pub fn new(coefficients: Vec<i64>, height: u64) -> Result<Self, CertifyError> {
        if coefficients.iter().any(|a| a.unsigned_abs() > height) {
            return Err(CertifyError::Precondition(format!("{coefficients:?} exceeds height {height}")));
        }
        Ok(LinearForm { coefficients, height })
    }

    /// P(Θ) for enclosures of Θ = (1, θ, ..., θ^ell).
    pub fn evaluate(&self, powers: &[Enclosure]) -> Enclosure {
        assert_eq!(powers.len(), self.coefficients.len());
        let zero = Enclosure::point(BigRational::from_integer(0.into()));
        self.coefficients
            .iter()
            .zip(powers)
            .filter(|(a, _)| **a != 0)
            .fold(zero, |acc, (a, e)| &acc + &e.scale(&BigInt::from(*a)))
    }
}

/// Enclosures of θ(q)^j for j = 0..=ell from the series f_{ell,j}, plus the
/// interval powers of the θ(q) enclosure as a cross-check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThetaPowers {
    pub ell: u32,
    pub q: u64,
    pub terms: u64,
    pub series: Vec<Enclosure>,
    pub interval_powers: Vec<Enclosure>,
}

impl ThetaPowers {
    pub fn compute(ell: u32, q: u64, terms: u64) -> Result<Self, CertifyError> {
        // coverage past `terms` lets the tail start at the next nonzero coefficient
        let limit = 2 * terms + 64;
        let mut series = Vec::with_capacity(ell as usize + 1);
        for s in 0..=ell {
            let f = HalfFunction::rep_power(ell, s, limit)?;
            series.push(eval_enclosure(&f, q, terms)?);
        }
        let interval_powers = (0..=ell).map(|j| series[1].pow(j)).collect();
        Ok(ThetaPowers { ell, q, terms, series, interval_powers })
    }

    pub fn consistent(&self) -> bool {
        self.series.iter().zip(&self.interval_powers).all(|(a, b)| a.intersects(b))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormBound {
    pub coefficients: Vec<i64>,
    #[serde(with = "serde_rational")]
    pub lower: BigRational,
}

/// All coefficient vectors in [-height, height]^(ell+1) with alpha_ell != 0,
/// lexicographic in (alpha_0, ..., alpha_ell).
pub fn enumerate_forms(ell: u32, height: u64) -> Vec<Vec<i64>> {
    let h = height as i64;
    let len = ell as usize + 1;
    let mut out = Vec::new();
    let mut cur = vec![-h; len];
    loop {
        if cur[len - 1] != 0 {
            out.push(cur.clone());
        }
        let mut i = len;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < h {
                cur[i] += 1;
                break;
            }
            cur[i] = -h;
        }
    }
}

/// Certified lower bound on |P(Θ)| for one form; `None` if the enclosure
/// contains zero.
pub fn certify_form(form: &LinearForm, powers: &ThetaPowers) -> Result<Option<BigRational>, CertifyError> {
    if form.coefficients.len() != powers.ell as usize + 1 {
        return Err(CertifyError::Precondition("form length must be ell + 1".into()));
    }
    if *form.coefficients.last().unwrap() == 0 {
        return Err(CertifyError::Precondition("leading coefficient alpha_ell must be nonzero".into()));
    }
    let e = form.evaluate(&powers.series);
    Ok((!e.contains_zero()).then(|| e.abs_lower_bound()))
}

/// Certifies P(Theta) != 0 for every form of the given height with alpha_ell != 0.
pub fn check_theta_linear_forms(ell: u32, q: u64, height: u64, terms: u64) -> Result<Report, CertifyError> {
    if q < 2 {
        return Err(CertifyError::Precondition(format!("q must be >= 2, got {q}")));
    }
    if height == 0 {
        return Err(CertifyError::Precondition("height must be positive".into()));
    }
    let powers = ThetaPowers::compute(ell, q, terms)?;
    let mut report = Report::new(json!({"ell": ell, "q": q, "height": height, "terms": terms}));

    report.push(
        "series powers agree with interval powers of theta(q)",
        Verdict::from_bool(powers.consistent()),
        json!({"series": powers.series, "interval_powers": powers.interval_powers}),
    );

    let forms = enumerate_forms(ell, height);
    let results: Vec<(Vec<i64>, Option<BigRational>)> = forms
        .into_par_iter()
        .map(|c| {
            let e = LinearForm { coefficients: c.clone(), height }.evaluate(&powers.series);
            let lower = (!e.contains_zero()).then(|| e.abs_lower_bound());
            (c, lower)
        })
        .collect();

    let mut min: Option<FormBound> = None;
    let mut inconclusive = Vec::new();
    for (c, lower) in &results {
        match lower {
            None => inconclusive.push(c.clone()),
            Some(l) => {
                if min.as_ref().map_or(true, |m| l < &m.lower) {
                    min = Some(FormBound { coefficients: c.clone(), lower: l.clone() });
                }
            }
        }
    }
    let verdict = if inconclusive.is_empty() { Verdict::Pass } else { Verdict::Inconclusive };
    report.push(
        "P(Theta) != 0 for every form with alpha_ell != 0",
        verdict,
        json!({"forms": results.len(), "inconclusive": inconclusive}),
    );
    let verdict = report.combined();
    Ok(report.finish(
        verdict,
        json!({
            "forms": results.len(),
            "L_min": min,
            "L_min_log2": min.as_ref().and_then(|m| floor_log2(&m.lower)),
            "L_min_display_only": min.as_ref().map(|m| display_decimal(&m.lower, 12)),
            "theta_enclosure": powers.series[1],
        }),
    ))
}
