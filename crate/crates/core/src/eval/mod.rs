//! Ranking evaluation: NDCG, TREC run files, paired randomization tests and
//! experiment reports.

mod ndcg;
mod report;
mod run;
mod significance;

pub use ndcg::{dcg, ndcg, Gain};
pub use report::{evaluate_run, experiment_report, ExperimentReport, LabelledRun, ReportOptions, ReportRow, RunEvaluation};
pub use run::{format_run, parse_run, read_run, sort_run, write_run, RunList, RunTag};
pub use significance::randomization_test;
