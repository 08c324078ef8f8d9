//! Rank aggregation and review assignment for distributed peer review.
//!
//! Applicants review and rank a handful of each other's proposals; this crate
//! turns those partial rankings into a global ranking, either by Modified
//! Borda Count ([`mbc`]) or by annealing towards the ranking that agrees with
//! the most reviewer pairs ([`cigr`]). It also builds balanced review
//! assignments ([`assignment`]) and simulates reviewers ([`sim`]).
//!
//! Real-valued quantities are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix them to `f64`.

pub mod assignment;
pub mod cigr;
pub mod error;
pub mod format;
pub mod mbc;
pub mod num;
pub mod ranking;
pub mod rng;
pub mod sim;

pub use assignment::{
    balance, entropy, max_entropy, pair_counts, random_assignment, Assignment, BalanceOutcome,
    BalanceParams, BalanceWarning, Constraints, PairCounts,
};
pub use cigr::{anneal, cigr_search, cost_delta, exact_kemeny, AnnealParams, CigrResult, StartPolicy};
pub use error::{Error, Result};
pub use mbc::{mbc_aggregate, mbc_over_rankings, mbc_rank, mbc_scores};
pub use num::Scalar;
pub use ranking::{
    build_rcm, cost, fit_concordance, top_fraction_accuracy, truth_concordance, PartialRanking,
    ProposalId, Ranking, RcmMatrix,
};
pub use sim::{sample_reviewers, sample_true_scores, simulate_reviews};

pub type MbcScores = mbc::MbcScores<f64>;
pub type MbcScores32 = mbc::MbcScores<f32>;
pub type MetricReport = ranking::MetricReport<f64>;
pub type MetricReport32 = ranking::MetricReport<f32>;
pub type SimParams = sim::SimParams<f64>;
pub type SimParams32 = sim::SimParams<f32>;
pub type ReviewerProfile = sim::ReviewerProfile<f64>;
pub type TrueScores = sim::TrueScores<f64>;
