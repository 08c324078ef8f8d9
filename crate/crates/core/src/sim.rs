//! Generative model of a review round.
//!
//! Proposal `p` has a true score drawn from Normal(50, sd_s) truncated to
//! [0, 100]. Reviewer `i` has a bias `mu_i ~ Normal(0, br_sd)` and an error
//! scale `sigma_i ~ ChiSquared(er_df)`, and scores each assigned proposal as
//! `truth[p] + mu_i + sigma_i * z` with `z ~ Normal(0, 1)`. Only the order of
//! each reviewer's scores is kept.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::assignment::Assignment;
use crate::error::{input, Result};
use crate::num::Scalar;
use crate::ranking::{PartialRanking, Ranking};

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams<F> {
    pub n_p: usize,
    /// Proposals per reviewer, which is also reviews per proposal.
    pub n_r: usize,
    pub sd_s: F,
    pub br_sd: F,
    /// Degrees of freedom of the reviewer error distribution; 0 means error-free reviewers.
    pub er_df: F,
    pub seed: u64,
}

impl<F: Scalar> Default for SimParams<F> {
    fn default() -> Self {
        SimParams {
            n_p: 40,
            n_r: 7,
            sd_s: F::lit(20.0),
            br_sd: F::lit(10.0),
            er_df: F::lit(10.0),
            seed: 0,
        }
    }
}

impl<F: Scalar> SimParams<F> {
    pub fn validate(&self) -> Result<()> {
        if self.n_r < 2 || self.n_r >= self.n_p {
            return input(format!(
                "need 2 <= n_r < n_p, got n_r={}, n_p={}",
                self.n_r, self.n_p
            ));
        }
        if [self.sd_s, self.br_sd, self.er_df].iter().any(|x| x.is_nan() || *x < F::zero()) {
            return input("sd_s, br_sd and er_df must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReviewerProfile<F> {
    /// Constant shift added to every score the reviewer gives.
    pub mu: F,
    /// Standard deviation of the reviewer's per-proposal error.
    pub sigma: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrueScores<F> {
    pub score: Vec<F>,
}

impl<F: Scalar> TrueScores<F> {
    /// Descending score, equal scores by ascending id.
    pub fn ranking(&self) -> Ranking {
        let s = &self.score;
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap().then(a.cmp(&b)));
        Ranking::from_vec_unchecked(order)
    }

    pub fn len(&self) -> usize {
        self.score.len()
    }

    pub fn is_empty(&self) -> bool {
        self.score.is_empty()
    }
}

const SCORE_MEAN: f64 = 50.0;
const SCORE_MIN: f64 = 0.0;
const SCORE_MAX: f64 = 100.0;

/// Normal(50, sd_s) truncated to [0, 100], by rejection.
pub fn sample_true_scores<F: Scalar, R: Rng + ?Sized>(n_p: usize, sd_s: F, rng: &mut R) -> TrueScores<F> {
    let (mean, lo, hi) = (F::lit(SCORE_MEAN), F::lit(SCORE_MIN), F::lit(SCORE_MAX));
    let score = (0..n_p)
        .map(|_| loop {
            let x = mean + sd_s * F::standard_normal(rng);
            if x >= lo && x <= hi {
                break x;
            }
        })
        .collect();
    TrueScores { score }
}

/// One profile per PI. All biases are drawn before any error level, and a
/// bias is a scaled standard normal, so neither `br_sd` nor `er_df` moves
/// the other's draws.
pub fn sample_reviewers<F: Scalar, R: Rng + ?Sized>(
    n_p: usize,
    br_sd: F,
    er_df: F,
    rng: &mut R,
) -> Vec<ReviewerProfile<F>> {
    let mu: Vec<F> = (0..n_p).map(|_| br_sd * F::standard_normal(rng)).collect();
    mu.into_iter()
        .map(|mu| {
            let sigma = if er_df > F::zero() {
                F::chi_squared(er_df, rng)
            } else {
                F::zero()
            };
            ReviewerProfile { mu, sigma }
        })
        .collect()
}

/// Each reviewer's ranking of their assigned proposals by observed score.
/// Equal observed scores are ordered at random.
///
/// The bias is a per-reviewer constant and cannot change that order, so the
/// sort key leaves it out; adding it in floating point could only merge
/// nearly equal scores into spurious ties.
pub fn simulate_reviews<F: Scalar, R: Rng + ?Sized>(
    truth: &TrueScores<F>,
    profiles: &[ReviewerProfile<F>],
    assignment: &Assignment,
    rng: &mut R,
) -> Vec<PartialRanking> {
    assignment
        .reviews()
        .iter()
        .zip(profiles)
        .enumerate()
        .map(|(reviewer, (set, profile))| {
            let mut items = set.clone();
            items.shuffle(rng);
            let mut keyed: Vec<(F, usize)> = items
                .into_iter()
                .map(|p| (truth.score[p] + profile.sigma * F::standard_normal(rng), p))
                .collect();
            keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            PartialRanking::strict(reviewer, keyed.into_iter().map(|(_, p)| p).collect())
                .expect("assignment sets are duplicate-free")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{random_assignment, Constraints};
    use crate::ranking::fit_concordance;
    use crate::rng::seeded;

    #[test]
    fn degenerate_spread_gives_fifty() {
        let t: TrueScores<f64> = sample_true_scores(25, 0.0, &mut seeded(1));
        assert!(t.score.iter().all(|&x| x == 50.0));
        assert_eq!(t.ranking(), Ranking::identity(25));
    }

    #[test]
    fn scores_stay_in_bounds() {
        let t: TrueScores<f32> = sample_true_scores(5000, 30.0, &mut seeded(2));
        assert!(t.score.iter().all(|&x| (0.0..=100.0).contains(&x)));
    }

    #[test]
    fn zero_bias_and_nonnegative_error() {
        let ps: Vec<ReviewerProfile<f64>> = sample_reviewers(500, 0.0, 10.0, &mut seeded(3));
        assert!(ps.iter().all(|p| p.mu == 0.0 && p.sigma >= 0.0));
        let zero: Vec<ReviewerProfile<f64>> = sample_reviewers(50, 5.0, 0.0, &mut seeded(3));
        assert!(zero.iter().all(|p| p.sigma == 0.0));
    }

    #[test]
    fn error_draws_do_not_depend_on_bias_spread() {
        let a: Vec<ReviewerProfile<f64>> = sample_reviewers(100, 1.0, 10.0, &mut seeded(4));
        let b: Vec<ReviewerProfile<f64>> = sample_reviewers(100, 20.0, 10.0, &mut seeded(4));
        assert!(a.iter().zip(&b).all(|(x, y)| x.sigma == y.sigma));
    }

    #[test]
    fn noise_free_reviews_follow_the_truth() {
        let n = 40;
        let truth: TrueScores<f64> = sample_true_scores(n, 20.0, &mut seeded(5));
        let mut profiles: Vec<ReviewerProfile<f64>> = sample_reviewers(n, 10.0, 10.0, &mut seeded(6));
        for p in &mut profiles {
            p.sigma = 0.0;
        }
        let a = random_assignment(n, 7, &Constraints::self_review(n), &mut seeded(7)).unwrap();
        let reviews = simulate_reviews(&truth, &profiles, &a, &mut seeded(8));
        assert_eq!(reviews.len(), n);
        let mut counts = vec![0; n];
        for r in &reviews {
            assert_eq!(r.len(), 7);
            assert!(!r.ids().any(|p| p == r.reviewer()));
            let ids: Vec<_> = r.ids().collect();
            assert!(ids.windows(2).all(|w| truth.score[w[0]] > truth.score[w[1]]));
            for p in ids {
                counts[p] += 1;
            }
        }
        assert!(counts.iter().all(|&c| c == 7));
        assert_eq!(fit_concordance::<f64>(&truth.ranking(), &reviews).unwrap(), 1.0);
    }
}
