//! Study analysis: descriptives, two-way mixed ANOVA with sphericity
//! handling, Tukey-HSD and Likert summaries.

pub mod anova;
pub mod dataset;
pub mod distributions;
pub mod likert;
pub mod posthoc;
pub mod report;

pub use anova::{
    mauchly_test, mixed_anova, partial_eta_sq_from_f, Correction, CorrectionPolicy, Effect, EffectRow,
    MauchlyTest, MixedAnovaTable, Sphericity,
};
pub use dataset::{descriptives, CellSummary, Record, StudyDataset, Subject};
pub use distributions::{chi2_p_value, f_p_value, ptukey_upper, qtukey};
pub use likert::{likert_summary, read_likert_csv, LikertSummary, QuestionSummary};
pub use posthoc::{posthoc, tukey_hsd, CellMean, Comparison, PosthocFamily, PosthocTable};
