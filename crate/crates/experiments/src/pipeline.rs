//! One simulated review round, end to end.
//!
//! A replicate owns independent RNG streams per role, derived from the master
//! seed and the replicate index, so its outcome does not depend on which
//! thread runs it or on what else runs.

use std::fmt;
use std::str::FromStr;

use dpr_core::rng::{derive_seed, stream, Role};
use dpr_core::{
    balance, cigr_search, fit_concordance, mbc_rank, mbc_scores, random_assignment,
    sample_reviewers, sample_true_scores, simulate_reviews, top_fraction_accuracy,
    truth_concordance, AnnealParams, Assignment, BalanceParams, Constraints, MetricReport,
    PartialRanking, Ranking, Result, ReviewerProfile, SimParams, TrueScores,
};

/// Filtering accuracy is reported for the top fifth.
pub const TOP_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Mbc,
    Cigr,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Mbc, Method::Cigr];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Mbc => "mbc",
            Method::Cigr => "cigr",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mbc" => Ok(Method::Mbc),
            "cigr" => Ok(Method::Cigr),
            _ => Err(format!("unknown method `{s}` (expected mbc or cigr)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AssignmentMode {
    Random,
    Balanced,
}

impl AssignmentMode {
    pub const ALL: [AssignmentMode; 2] = [AssignmentMode::Random, AssignmentMode::Balanced];
}

impl fmt::Display for AssignmentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AssignmentMode::Random => "random",
            AssignmentMode::Balanced => "balanced",
        })
    }
}

impl FromStr for AssignmentMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "random" | "unbalanced" => Ok(AssignmentMode::Random),
            "balanced" => Ok(AssignmentMode::Balanced),
            _ => Err(format!("unknown assignment mode `{s}` (expected random or balanced)")),
        }
    }
}

/// Algorithm settings shared by every replicate. Seeds inside are replaced
/// by per-replicate derived seeds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Setup {
    pub anneal: AnnealParams,
    pub balance: BalanceParams,
}

/// The parts of a replicate that do not depend on the assignment.
#[derive(Debug, Clone)]
pub struct World {
    pub scores: TrueScores,
    pub truth: Ranking,
    pub profiles: Vec<ReviewerProfile>,
}

impl World {
    pub fn generate(p: &SimParams, replicate: u64) -> Self {
        let scores = sample_true_scores(p.n_p, p.sd_s, &mut stream(p.seed, replicate, Role::TrueScores));
        let profiles = sample_reviewers(p.n_p, p.br_sd, p.er_df, &mut stream(p.seed, replicate, Role::Bias));
        World {
            truth: scores.ranking(),
            scores,
            profiles,
        }
    }
}

/// An assignment and the reviews it produced.
#[derive(Debug, Clone)]
pub struct Round {
    pub assignment: Assignment,
    pub reviews: Vec<PartialRanking>,
}

/// Random assignment for this replicate; the balanced one starts from it.
pub fn assignment_for(
    p: &SimParams,
    mode: AssignmentMode,
    replicate: u64,
    setup: &Setup,
) -> Result<Assignment> {
    let constraints = Constraints::self_review(p.n_p);
    let random = random_assignment(
        p.n_p,
        p.n_r,
        &constraints,
        &mut stream(p.seed, replicate, Role::Assignment),
    )?;
    match mode {
        AssignmentMode::Random => Ok(random),
        AssignmentMode::Balanced => {
            let params = BalanceParams {
                seed: derive_seed(p.seed, replicate, Role::Balance),
                ..setup.balance.clone()
            };
            Ok(balance(&random, &constraints, &params)?.assignment)
        }
    }
}

impl Round {
    pub fn generate(
        p: &SimParams,
        world: &World,
        mode: AssignmentMode,
        replicate: u64,
        setup: &Setup,
    ) -> Result<Self> {
        let assignment = assignment_for(p, mode, replicate, setup)?;
        let reviews = simulate_reviews(
            &world.scores,
            &world.profiles,
            &assignment,
            &mut stream(p.seed, replicate, Role::Reviews),
        );
        Ok(Round { assignment, reviews })
    }
}

/// Global ranking of `n_p` proposals from `reviews`.
pub fn aggregate(
    method: Method,
    reviews: &[PartialRanking],
    n_p: usize,
    search_seed: u64,
    setup: &Setup,
) -> Result<Ranking> {
    match method {
        Method::Mbc => Ok(mbc_rank(&mbc_scores::<f64>(reviews, n_p)?)),
        Method::Cigr => {
            let params = setup.anneal.clone().with_seed(search_seed);
            Ok(cigr_search(reviews, n_p, &params)?.ranking)
        }
    }
}

pub fn evaluate(inferred: &Ranking, truth: &Ranking, reviews: &[PartialRanking]) -> Result<MetricReport> {
    Ok(MetricReport {
        fit_ci: fit_concordance(inferred, reviews)?,
        truth_ci: truth_concordance(inferred, truth)?,
        top_fraction_accuracy: top_fraction_accuracy(inferred, truth, TOP_FRACTION)?,
    })
}

/// Metrics for one method on an already generated round.
pub fn score_round(
    p: &SimParams,
    world: &World,
    round: &Round,
    method: Method,
    replicate: u64,
    setup: &Setup,
) -> Result<MetricReport> {
    let seed = derive_seed(p.seed, replicate, Role::Search);
    let inferred = aggregate(method, &round.reviews, p.n_p, seed, setup)?;
    evaluate(&inferred, &world.truth, &round.reviews)
}

/// Truth, reviewers, assignment, reviews, aggregation and metrics for one replicate.
pub fn run_replicate(
    p: &SimParams,
    method: Method,
    mode: AssignmentMode,
    replicate: u64,
    setup: &Setup,
) -> Result<MetricReport> {
    p.validate()?;
    let world = World::generate(p, replicate);
    let round = Round::generate(p, &world, mode, replicate, setup)?;
    score_round(p, &world, &round, method, replicate, setup)
}

/// Every requested (mode, method) metric for one replicate, sharing the
/// world across modes and the reviews across methods.
pub fn run_cells(
    p: &SimParams,
    methods: &[Method],
    modes: &[AssignmentMode],
    replicate: u64,
    setup: &Setup,
) -> Result<Vec<MetricReport>> {
    p.validate()?;
    let world = World::generate(p, replicate);
    let mut out = Vec::with_capacity(methods.len() * modes.len());
    for &mode in modes {
        let round = Round::generate(p, &world, mode, replicate, setup)?;
        for &method in methods {
            out.push(score_round(p, &world, &round, method, replicate, setup)?);
        }
    }
    Ok(out)
}
