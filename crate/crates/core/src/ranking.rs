//! Rankings, reviewer partial rankings, the pairwise count (RCM) matrix and
//! the concordance-based metrics built on them.

use std::collections::HashSet;
use std::ops::AddAssign;

use crate::error::{input, Error, Result};
use crate::num::Scalar;

/// Index of a proposal, `0..n_p`. Proposal `i` is submitted by PI `i`.
pub type ProposalId = usize;

/// A total order over proposals `0..n`, best first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ranking {
    order: Vec<ProposalId>,
}

impl Ranking {
    /// Fails unless `order` is a permutation of `0..order.len()`.
    pub fn new(order: Vec<ProposalId>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &id in &order {
            if id >= n {
                return Err(Error::OutOfRange { id, n });
            }
            if std::mem::replace(&mut seen[id], true) {
                return input(format!("proposal {id} appears twice in ranking"));
            }
        }
        Ok(Ranking { order })
    }

    pub(crate) fn from_vec_unchecked(order: Vec<ProposalId>) -> Self {
        debug_assert!(Ranking::new(order.clone()).is_ok());
        Ranking { order }
    }

    pub fn identity(n: usize) -> Self {
        Ranking {
            order: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn as_slice(&self) -> &[ProposalId] {
        &self.order
    }

    pub fn into_vec(self) -> Vec<ProposalId> {
        self.order
    }

    /// `positions()[id]` is the 0-based position of `id`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (p, &id) in self.order.iter().enumerate() {
            pos[id] = p;
        }
        pos
    }

    pub fn reversed(&self) -> Self {
        Ranking {
            order: self.order.iter().rev().copied().collect(),
        }
    }

    /// Exchange the proposals at positions `i` and `j`.
    pub fn swap(&mut self, i: usize, j: usize) {
        self.order.swap(i, j);
    }

    /// The first `k` proposals.
    pub fn top(&self, k: usize) -> &[ProposalId] {
        &self.order[..k.min(self.order.len())]
    }
}

/// One reviewer's ordering of their assigned proposals, as a sequence of
/// tie groups, best group first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartialRanking {
    reviewer: usize,
    groups: Vec<Vec<ProposalId>>,
}

impl PartialRanking {
    pub fn new(reviewer: usize, groups: Vec<Vec<ProposalId>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for g in &groups {
            if g.is_empty() {
                return input(format!("reviewer {reviewer}: empty tie group"));
            }
            for &id in g {
                if !seen.insert(id) {
                    return input(format!("reviewer {reviewer}: proposal {id} listed twice"));
                }
            }
        }
        Ok(PartialRanking { reviewer, groups })
    }

    /// A ranking without ties.
    pub fn strict(reviewer: usize, order: Vec<ProposalId>) -> Result<Self> {
        Self::new(reviewer, order.into_iter().map(|id| vec![id]).collect())
    }

    pub fn reviewer(&self) -> usize {
        self.reviewer
    }

    pub fn groups(&self) -> &[Vec<ProposalId>] {
        &self.groups
    }

    /// Number of ranked proposals.
    pub fn len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ProposalId> + '_ {
        self.groups.iter().flatten().copied()
    }

    pub fn is_strict(&self) -> bool {
        self.groups.iter().all(|g| g.len() == 1)
    }

    pub fn max_id(&self) -> Option<ProposalId> {
        self.ids().max()
    }

    /// Visit every ordered pair `(above, below)` this reviewer expressed.
    /// Pairs inside a tie group are skipped.
    pub fn for_each_ordered_pair(&self, mut f: impl FnMut(ProposalId, ProposalId)) {
        for (gi, upper) in self.groups.iter().enumerate() {
            for lower in &self.groups[gi + 1..] {
                for &a in upper {
                    for &b in lower {
                        f(a, b);
                    }
                }
            }
        }
    }

    pub(crate) fn check_range(&self, n: usize) -> Result<()> {
        match self.ids().find(|&id| id >= n) {
            Some(id) => Err(Error::OutOfRange { id, n }),
            None => Ok(()),
        }
    }

    /// Relabel every proposal through `map`.
    pub fn relabel(&self, map: impl Fn(ProposalId) -> ProposalId) -> Self {
        PartialRanking {
            reviewer: self.reviewer,
            groups: self
                .groups
                .iter()
                .map(|g| g.iter().map(|&id| map(id)).collect())
                .collect(),
        }
    }
}

/// `counts[i][j]`: number of reviewers who ranked `i` strictly above `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RcmMatrix {
    n: usize,
    counts: Vec<u32>,
}

impl RcmMatrix {
    pub fn zeros(n: usize) -> Self {
        RcmMatrix {
            n,
            counts: vec![0; n * n],
        }
    }

    /// Build from a dense row-major table; the diagonal must be zero.
    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let n = rows.len();
        let mut counts = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return input("rcm rows must form a square matrix");
            }
            if row[i] != 0 {
                return input("rcm diagonal must be zero");
            }
            counts.extend_from_slice(row);
        }
        Ok(RcmMatrix { n, counts })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: ProposalId, j: ProposalId) -> u32 {
        self.counts[i * self.n + j]
    }

    /// True when placing `a` above `b` disagrees with the counts.
    /// Equal counts are agreement.
    #[inline]
    pub fn disagrees(&self, a: ProposalId, b: ProposalId) -> bool {
        self.get(a, b) < self.get(b, a)
    }

    pub fn row(&self, i: ProposalId) -> &[u32] {
        &self.counts[i * self.n..(i + 1) * self.n]
    }

    fn add_partial(&mut self, p: &PartialRanking) {
        let n = self.n;
        p.for_each_ordered_pair(|a, b| self.counts[a * n + b] += 1);
    }
}

impl AddAssign<&RcmMatrix> for RcmMatrix {
    fn add_assign(&mut self, rhs: &RcmMatrix) {
        assert_eq!(self.n, rhs.n, "rcm size mismatch");
        for (a, b) in self.counts.iter_mut().zip(&rhs.counts) {
            *a += b;
        }
    }
}

pub fn build_rcm(partials: &[PartialRanking], n_p: usize) -> Result<RcmMatrix> {
    let mut rcm = RcmMatrix::zeros(n_p);
    for p in partials {
        p.check_range(n_p)?;
        rcm.add_partial(p);
    }
    Ok(rcm)
}

fn check_sizes(r: &Ranking, n: usize) -> Result<()> {
    if r.len() != n {
        return input(format!(
            "ranking covers {} proposals, expected {n}",
            r.len()
        ));
    }
    Ok(())
}

pub(crate) fn cost_unchecked(order: &[ProposalId], rcm: &RcmMatrix) -> u64 {
    let mut c = 0u64;
    for (i, &a) in order.iter().enumerate() {
        for &b in &order[i + 1..] {
            c += u64::from(rcm.disagrees(a, b));
        }
    }
    c
}

/// Number of position pairs `i < j` with `rcm[r_i][r_j] < rcm[r_j][r_i]`.
pub fn cost(r: &Ranking, rcm: &RcmMatrix) -> Result<u64> {
    check_sizes(r, rcm.n())?;
    Ok(cost_unchecked(r.as_slice(), rcm))
}

/// Fraction of reviewer-expressed ordered pairs (counted once per reviewer)
/// that `r` orders the same way. Tied reviewer pairs are not counted.
pub fn fit_concordance<F: Scalar>(r: &Ranking, partials: &[PartialRanking]) -> Result<F> {
    let pos = r.positions();
    let mut agree = 0usize;
    let mut total = 0usize;
    for p in partials {
        p.check_range(r.len())?;
        p.for_each_ordered_pair(|a, b| {
            total += 1;
            agree += usize::from(pos[a] < pos[b]);
        });
    }
    if total == 0 {
        return Err(Error::UndefinedMetric("no ordered reviewer pairs"));
    }
    Ok(F::from_count(agree) / F::from_count(total))
}

/// Fraction of all unordered proposal pairs ordered identically by both
/// rankings, i.e. `(tau + 1) / 2` for Kendall's tau.
pub fn truth_concordance<F: Scalar>(inferred: &Ranking, truth: &Ranking) -> Result<F> {
    check_sizes(inferred, truth.len())?;
    let n = truth.len();
    if n < 2 {
        return Err(Error::UndefinedMetric("fewer than two proposals"));
    }
    let pos = inferred.positions();
    let t = truth.as_slice();
    let mut concordant = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            concordant += usize::from(pos[t[i]] < pos[t[j]]);
        }
    }
    Ok(F::from_count(concordant) / F::from_count(n * (n - 1) / 2))
}

/// Size of the top set for a given fraction: `round(fraction * n)` with halves
/// rounded up, and at least one.
pub fn top_k<F: Scalar>(fraction: F, n: usize) -> Result<usize> {
    if !(fraction > F::zero() && fraction <= F::one()) {
        return input(format!("top fraction {fraction} outside (0, 1]"));
    }
    let k = (fraction * F::from_count(n) + F::lit(0.5))
        .floor()
        .to_usize()
        .unwrap_or(0);
    Ok(k.clamp(1, n.max(1)))
}

/// Share of the true top-`k` recovered in the inferred top-`k`; order inside
/// the top set is ignored.
pub fn top_fraction_accuracy<F: Scalar>(
    inferred: &Ranking,
    truth: &Ranking,
    fraction: F,
) -> Result<F> {
    check_sizes(inferred, truth.len())?;
    if truth.is_empty() {
        return Err(Error::UndefinedMetric("no proposals"));
    }
    let k = top_k(fraction, truth.len())?;
    let mut in_top = vec![false; truth.len()];
    for &id in truth.top(k) {
        in_top[id] = true;
    }
    let hits = inferred.top(k).iter().filter(|&&id| in_top[id]).count();
    Ok(F::from_count(hits) / F::from_count(k))
}

/// The two evaluation metrics plus the search objective for one run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricReport<F> {
    /// Concordance with the reviewers' pairs.
    pub fit_ci: F,
    /// Concordance with the true ranking.
    pub truth_ci: F,
    /// Filtering accuracy at the configured top fraction.
    pub top_fraction_accuracy: F,
}

impl<F: Scalar> MetricReport<F> {
    pub fn evaluate(
        inferred: &Ranking,
        truth: &Ranking,
        partials: &[PartialRanking],
        top_fraction: F,
    ) -> Result<Self> {
        Ok(MetricReport {
            fit_ci: fit_concordance(inferred, partials)?,
            truth_ci: truth_concordance(inferred, truth)?,
            top_fraction_accuracy: top_fraction_accuracy(inferred, truth, top_fraction)?,
        })
    }
}
