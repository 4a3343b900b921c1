//! Certificate checkers. Each returns a [`Report`] with one verdict per
//! condition and a combined summary.

pub mod degree;
pub mod maier;
pub mod nested;
pub mod pipeline;
pub mod report;
pub mod theta;

pub use degree::{search_degree_instance, verify_degree_criterion, DegreeInstance, DegreeParams};
pub use maier::{maier_members, verify_maier, verify_maier_inner, MaierCertificate};
pub use nested::{check_measure, verify_nested_gaps, NestedGapsCertificate, NestedGapsParams};
pub use pipeline::{pipeline_dry_run, PipelineConfig};
pub use report::{Condition, Report, Summary, Verdict};
pub use theta::{check_theta_linear_forms, LinearForm, ThetaPowers};

use crate::modular::ModularError;
use crate::repcount::RepError;
use crate::series::SeriesError;

#[derive(Debug, thiserror::Error)]
pub enum CertifyError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Rep(#[from] RepError),
    #[error(transparent)]
    Modular(#[from] ModularError),
    #[error("table covers n <= {available}, need {needed}")]
    Coverage { needed: u64, available: u64 },
    #[error("precondition: {0}")]
    Precondition(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
