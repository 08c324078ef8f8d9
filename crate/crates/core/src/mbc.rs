//! Modified Borda Count.
//!
//! A reviewer who ranks `L` proposals hands out `L-1, L-2, ..., 0` points from
//! best to worst. Tied proposals share the points of the positions they cover
//! equally, so a reviewer always distributes `L(L-1)/2` points. A proposal's
//! score is its received points over the maximum it could have received from
//! the same reviews.

use std::cmp::Ordering;

use crate::error::{input, Error, Result};
use crate::num::Scalar;
use crate::ranking::{PartialRanking, Ranking};

/// Normalized Borda scores, indexed by proposal id.
#[derive(Debug, Clone, PartialEq)]
pub struct MbcScores<F> {
    pub score: Vec<F>,
}

impl<F: Scalar> MbcScores<F> {
    pub fn len(&self) -> usize {
        self.score.len()
    }

    pub fn is_empty(&self) -> bool {
        self.score.is_empty()
    }
}

/// Points are tracked doubled so tie shares stay integral.
#[derive(Debug, Clone)]
struct Tally {
    points2: Vec<u64>,
    max2: Vec<u64>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Tally {
            points2: vec![0; n],
            max2: vec![0; n],
        }
    }

    fn add(&mut self, p: &PartialRanking) -> Result<()> {
        let len = p.len() as u64;
        if len < 2 {
            return input(format!(
                "reviewer {} ranks fewer than two proposals",
                p.reviewer()
            ));
        }
        let mut start = 0u64;
        for g in p.groups() {
            let size = g.len() as u64;
            // Mean of (len-1-q) over q in start..start+size, doubled.
            let share2 = 2 * (len - 1) - 2 * start - (size - 1);
            for &id in g {
                self.points2[id] += share2;
                self.max2[id] += 2 * (len - 1);
            }
            start += size;
        }
        Ok(())
    }

    fn scores<F: Scalar>(&self) -> MbcScores<F> {
        let score = self
            .points2
            .iter()
            .zip(&self.max2)
            .map(|(&pts, &max)| {
                if max == 0 {
                    F::zero()
                } else {
                    F::from_u64(pts).unwrap() / F::from_u64(max).unwrap()
                }
            })
            .collect();
        MbcScores { score }
    }
}

/// Borda scores for proposals `0..n_p`. A proposal nobody reviewed scores 0.
pub fn mbc_scores<F: Scalar>(partials: &[PartialRanking], n_p: usize) -> Result<MbcScores<F>> {
    let mut tally = Tally::new(n_p);
    for p in partials {
        if let Some(id) = p.ids().find(|&id| id >= n_p) {
            return Err(Error::OutOfRange { id, n: n_p });
        }
        tally.add(p)?;
    }
    Ok(tally.scores())
}

/// Descending score; equal scores fall back to ascending id.
pub fn mbc_rank<F: Scalar>(scores: &MbcScores<F>) -> Ranking {
    let s = &scores.score;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| {
        s[b].partial_cmp(&s[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    Ranking::from_vec_unchecked(order)
}

/// Borda aggregation of full rankings over the same proposals, returning the
/// scores alongside the induced ranking.
pub fn mbc_aggregate<'a, F: Scalar>(
    rankings: impl IntoIterator<Item = &'a Ranking>,
) -> Result<(MbcScores<F>, Ranking)> {
    let mut it = rankings.into_iter().peekable();
    let n = match it.peek() {
        Some(r) => r.len(),
        None => return input("cannot aggregate an empty set of rankings"),
    };
    if n < 2 {
        let scores = MbcScores {
            score: vec![F::zero(); n],
        };
        return Ok((scores, Ranking::identity(n)));
    }
    let mut points = vec![0u64; n];
    let mut count = 0u64;
    for r in it {
        if r.len() != n {
            return input("rankings cover different numbers of proposals");
        }
        for (pos, &id) in r.as_slice().iter().enumerate() {
            points[id] += (n - 1 - pos) as u64;
        }
        count += 1;
    }
    let max = F::from_u64(count * (n as u64 - 1)).unwrap();
    let scores = MbcScores {
        score: points
            .into_iter()
            .map(|p| F::from_u64(p).unwrap() / max)
            .collect(),
    };
    let ranking = mbc_rank(&scores);
    Ok((scores, ranking))
}

/// Treat each full ranking as one ballot and return the Borda ranking.
pub fn mbc_over_rankings(rankings: &[Ranking]) -> Result<Ranking> {
    mbc_aggregate::<f64>(rankings).map(|(_, r)| r)
}
