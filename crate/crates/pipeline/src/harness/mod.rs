//! Experiment orchestration: campaigns, in-process runs and reports.

mod campaign;
mod report;

pub use campaign::{
    examples, generate_campaign, run_campaign, run_trials, train_on_campaign, CampaignConfig, HarnessError, RunLog,
    ScenarioRanges, Trial, TrialRecord, RUN_LOG_VERSION,
};
pub use report::{
    build_report, confusion_heatmap, reference_confusion, report_text, write_report, LatencySection, Report,
    REPORT_VERSION,
};
