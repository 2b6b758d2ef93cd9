//! End-to-end evaluation: datasets x methods x folds, fused and tabulated.

mod config;
mod method;
mod report;
mod run;

pub use config::{DataSource, DatasetSpec, ExperimentConfig, LoadedDataset, Protocol};
pub use method::{parse_method, MemberPlan, Method};
pub use report::{
    emit_report, read_report, ExperimentReport, FoldResult, MemberResult, ACCURACY_FILE, MANIFEST_FILE,
    MEMBERS_FILE, PVALUES_FILE, PVALUES_ONE_SIDED_FILE, RAW_FILE, REPORT_FILE,
};
pub use run::{architecture_string, audit_split, member_seed, member_spec, run_experiment, MemberDone, RunOptions};
