//! Estimators, goodness-of-fit tests, the exact small-horizon oracle and the
//! theorem-level verification procedures.

pub mod gof;
pub mod oracle;
pub mod pmf;
pub mod suites;

pub use gof::{chi_square_gof, ks_pvalue, ks_statistic, ks_test, normal_cdf, tally, GofReport};
pub use oracle::{exact_block_pmf, exact_support, exact_walk_pmf, DEFAULT_CAP};
pub use pmf::{srw_pmf, srw_pmf_exact, ExactPmf, Pmf};
pub use suites::{
    flatness_trend, sup_gaps, verify_fdd, verify_flatness, verify_marginal, FddReport,
    FlatnessSummary,
};
