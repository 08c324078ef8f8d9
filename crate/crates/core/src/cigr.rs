//! Concordance-index-based global ranking.
//!
//! The objective is the number of proposal pairs a candidate ranking orders
//! against the majority of the reviewers who compared them (the RCM cost).
//! Minimizing it maximizes concordance with the reviewers' pairs. The search
//! is simulated annealing over swaps of currently disagreeing pairs, with
//! patience-triggered restarts from a pool of near-optimal rankings; the
//! final ranking is the Borda aggregate of that pool.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{input, Result};
use crate::mbc::{mbc_aggregate, mbc_rank, mbc_scores, MbcScores};
use crate::ranking::{build_rcm, cost_unchecked, PartialRanking, ProposalId, Ranking, RcmMatrix};
use crate::rng::{seeded, StreamRng};

/// Iteration budget per proposal when `max_iters` is left unset.
pub const ITERS_PER_PROPOSAL: u64 = 50_000;

/// Where the chain starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StartPolicy {
    /// Borda ranking of the input partial rankings.
    #[default]
    Mbc,
    /// Uniformly random permutation.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealParams {
    /// Initial temperature.
    pub t0: f64,
    /// Cooling factor applied after every iteration.
    pub beta: f64,
    /// Rankings within this cost of the best are kept for aggregation.
    pub epsilon: u64,
    /// Restart once iterations-since-accept exceed `rho` times the candidate count.
    pub rho: f64,
    pub max_restarts: u32,
    /// `None` means `ITERS_PER_PROPOSAL * n_p`.
    pub max_iters: Option<u64>,
    pub seed: u64,
    pub start: StartPolicy,
}

impl Default for AnnealParams {
    fn default() -> Self {
        AnnealParams {
            t0: 1.0,
            beta: 0.999,
            epsilon: 1,
            rho: 3.0,
            max_restarts: 30,
            max_iters: None,
            seed: 0,
            start: StartPolicy::Mbc,
        }
    }
}

impl AnnealParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 >= 0.0 && self.t0.is_finite()) {
            return input(format!("t0 must be finite and >= 0, got {}", self.t0));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return input(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        if self.rho.is_nan() || self.rho <= 0.0 {
            return input(format!("rho must be > 0, got {}", self.rho));
        }
        Ok(())
    }

    pub fn iteration_budget(&self, n_p: usize) -> u64 {
        self.max_iters
            .unwrap_or(ITERS_PER_PROPOSAL * n_p as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CigrResult {
    /// Borda aggregate of `near_optimal_set`.
    pub ranking: Ranking,
    /// Aggregate Borda scores behind `ranking`.
    pub scores: MbcScores<f64>,
    pub best_cost: u64,
    /// Lowest-cost ranking visited (first found on ties).
    pub best_ranking: Ranking,
    /// Distinct rankings with cost within `epsilon` of `best_cost`, in discovery order.
    pub near_optimal_set: Vec<Ranking>,
    pub initial_cost: u64,
    pub iterations_used: u64,
    pub restarts_used: u32,
}

/// Change in cost from exchanging the proposals at positions `i` and `j`.
/// Only the pairs involving those two positions change order, so the work is
/// `O(|j - i|)`.
pub fn cost_delta(r: &Ranking, i: usize, j: usize, rcm: &RcmMatrix) -> i64 {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    swap_delta(r.as_slice(), i, j, rcm)
}

#[inline]
fn d(rcm: &RcmMatrix, above: ProposalId, below: ProposalId) -> i64 {
    i64::from(rcm.disagrees(above, below))
}

fn swap_delta(order: &[ProposalId], i: usize, j: usize, rcm: &RcmMatrix) -> i64 {
    if i == j {
        return 0;
    }
    let (x, y) = (order[i], order[j]);
    let mut delta = d(rcm, y, x) - d(rcm, x, y);
    for &m in &order[i + 1..j] {
        delta += d(rcm, y, m) + d(rcm, m, x) - d(rcm, x, m) - d(rcm, m, y);
    }
    delta
}

/// Set of `(above, below)` proposal pairs in the current ranking that disagree
/// with the RCM; supports O(1) insert, remove and uniform sampling.
struct DisagreeSet {
    n: usize,
    slots: Vec<(u32, u32)>,
    index: Vec<u32>,
}

impl DisagreeSet {
    fn new(n: usize) -> Self {
        DisagreeSet {
            n,
            slots: Vec::new(),
            index: vec![0; n * n],
        }
    }

    fn rebuild(&mut self, order: &[ProposalId], rcm: &RcmMatrix) {
        for &(a, b) in &self.slots {
            self.index[a as usize * self.n + b as usize] = 0;
        }
        self.slots.clear();
        for (p, &a) in order.iter().enumerate() {
            for &b in &order[p + 1..] {
                if rcm.disagrees(a, b) {
                    self.insert(a, b);
                }
            }
        }
    }

    fn len(&self) -> usize {
        self.slots.len()
    }

    fn insert(&mut self, a: ProposalId, b: ProposalId) {
        let k = a * self.n + b;
        debug_assert_eq!(self.index[k], 0);
        self.slots.push((a as u32, b as u32));
        self.index[k] = self.slots.len() as u32;
    }

    fn remove(&mut self, a: ProposalId, b: ProposalId) {
        let k = a * self.n + b;
        let slot = self.index[k] as usize;
        debug_assert!(slot > 0);
        self.index[k] = 0;
        let last = self.slots.pop().expect("non-empty");
        if slot - 1 < self.slots.len() {
            self.slots[slot - 1] = last;
            self.index[last.0 as usize * self.n + last.1 as usize] = slot as u32;
        }
    }

    /// Record that `a` moved from above `b` to below it.
    fn flip(&mut self, a: ProposalId, b: ProposalId, rcm: &RcmMatrix) {
        if rcm.disagrees(a, b) {
            self.remove(a, b);
        }
        if rcm.disagrees(b, a) {
            self.insert(b, a);
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> (ProposalId, ProposalId) {
        let (a, b) = self.slots[rng.random_range(0..self.slots.len())];
        (a as usize, b as usize)
    }
}

/// Near-optimal pool: distinct rankings with cost `<= best + epsilon`.
struct NearOptimal {
    epsilon: u64,
    best: u64,
    members: Vec<(Box<[ProposalId]>, u64)>,
    seen: HashSet<Box<[ProposalId]>>,
}

impl NearOptimal {
    fn new(epsilon: u64, initial_cost: u64) -> Self {
        NearOptimal {
            epsilon,
            best: initial_cost,
            members: Vec::new(),
            seen: HashSet::new(),
        }
    }

    fn offer(&mut self, order: &[ProposalId], cost: u64) {
        if cost < self.best {
            self.best = cost;
            let bar = cost + self.epsilon;
            let seen = &mut self.seen;
            self.members.retain(|(r, c)| {
                let keep = *c <= bar;
                if !keep {
                    seen.remove(r);
                }
                keep
            });
        }
        if cost <= self.best + self.epsilon && !self.seen.contains(order) {
            let boxed: Box<[ProposalId]> = order.into();
            self.seen.insert(boxed.clone());
            self.members.push((boxed, cost));
        }
    }
}

struct Chain<'a> {
    rcm: &'a RcmMatrix,
    order: Vec<ProposalId>,
    pos: Vec<usize>,
    disagree: DisagreeSet,
}

impl<'a> Chain<'a> {
    fn new(rcm: &'a RcmMatrix, start: &[ProposalId]) -> Self {
        let n = rcm.n();
        let mut chain = Chain {
            rcm,
            order: Vec::new(),
            pos: vec![0; n],
            disagree: DisagreeSet::new(n),
        };
        chain.reset(start);
        chain
    }

    fn reset(&mut self, start: &[ProposalId]) {
        self.order.clear();
        self.order.extend_from_slice(start);
        for (p, &id) in self.order.iter().enumerate() {
            self.pos[id] = p;
        }
        self.disagree.rebuild(&self.order, self.rcm);
    }

    fn cost(&self) -> u64 {
        self.disagree.len() as u64
    }

    /// Positions `(i, j)`, `i < j`, of a uniformly chosen disagreeing pair.
    fn propose(&self, rng: &mut impl Rng) -> (usize, usize) {
        let (a, b) = self.disagree.sample(rng);
        (self.pos[a], self.pos[b])
    }

    fn apply(&mut self, i: usize, j: usize) {
        let (x, y) = (self.order[i], self.order[j]);
        for p in i + 1..j {
            let m = self.order[p];
            self.disagree.flip(x, m, self.rcm);
            self.disagree.flip(m, y, self.rcm);
        }
        self.disagree.flip(x, y, self.rcm);
        self.order.swap(i, j);
        self.pos[x] = j;
        self.pos[y] = i;
    }
}

fn accept(delta: i64, temperature: f64, rng: &mut impl Rng) -> bool {
    if delta <= 0 {
        return true;
    }
    if temperature <= 0.0 {
        return false;
    }
    rng.random::<f64>() < (-(delta as f64) / temperature).exp()
}

/// Anneal from `start` against a prebuilt RCM.
pub fn anneal(rcm: &RcmMatrix, start: &Ranking, params: &AnnealParams) -> Result<CigrResult> {
    params.validate()?;
    let n = rcm.n();
    if start.len() != n {
        return input("start ranking does not match the rcm size");
    }
    let mut rng = seeded(params.seed);
    let budget = params.iteration_budget(n);

    let mut chain = Chain::new(rcm, start.as_slice());
    let initial_cost = chain.cost();
    let mut pool = NearOptimal::new(params.epsilon, initial_cost);
    pool.offer(&chain.order, initial_cost);
    let mut best_order = chain.order.clone();

    let mut temperature = params.t0;
    let mut since_accept = 0u64;
    let mut iterations = 0u64;
    let mut restarts = 0u32;

    while chain.cost() > 0 && iterations < budget {
        let (i, j) = chain.propose(&mut rng);
        let delta = swap_delta(&chain.order, i, j, rcm);
        iterations += 1;
        if accept(delta, temperature, &mut rng) {
            chain.apply(i, j);
            since_accept = 0;
            let c = chain.cost();
            if c < pool.best {
                best_order.clone_from(&chain.order);
            }
            pool.offer(&chain.order, c);
        } else {
            since_accept += 1;
        }
        temperature *= params.beta;

        if chain.cost() > 0 && since_accept as f64 / chain.cost() as f64 > params.rho {
            if restarts >= params.max_restarts {
                break;
            }
            restarts += 1;
            let k = rng.random_range(0..pool.members.len());
            let restart = pool.members[k].0.clone();
            chain.reset(&restart);
            temperature = params.t0;
            since_accept = 0;
        }
    }

    if chain.cost() == 0 {
        // Zero cost is a global optimum. Swapping an adjacent pair with equal
        // counts keeps it optimal, so those neighbours join the pool too.
        let order = chain.order.clone();
        for p in 0..n.saturating_sub(1) {
            let (a, b) = (order[p], order[p + 1]);
            if rcm.get(a, b) == rcm.get(b, a) {
                let mut nb = order.clone();
                nb.swap(p, p + 1);
                pool.offer(&nb, 0);
            }
        }
    }

    let near_optimal_set: Vec<Ranking> = pool
        .members
        .into_iter()
        .map(|(r, _)| Ranking::from_vec_unchecked(r.into_vec()))
        .collect();
    let (scores, ranking) = mbc_aggregate::<f64>(&near_optimal_set)?;
    Ok(CigrResult {
        ranking,
        scores,
        best_cost: pool.best,
        best_ranking: Ranking::from_vec_unchecked(best_order),
        near_optimal_set,
        initial_cost,
        iterations_used: iterations,
        restarts_used: restarts,
    })
}

/// Search for a minimal-cost global ranking of `n_p` proposals.
pub fn cigr_search(
    partials: &[PartialRanking],
    n_p: usize,
    params: &AnnealParams,
) -> Result<CigrResult> {
    if n_p < 2 {
        return input("need at least two proposals");
    }
    if partials.is_empty() {
        return input("no partial rankings to aggregate");
    }
    let rcm = build_rcm(partials, n_p)?;
    let start = match params.start {
        StartPolicy::Mbc => mbc_rank(&mbc_scores::<f64>(partials, n_p)?),
        StartPolicy::Random => {
            let mut order: Vec<_> = (0..n_p).collect();
            // Separate stream so the chain's draws do not depend on the start policy.
            let mut rng: StreamRng = seeded(params.seed ^ 0x005E_ED0F_57A2_7000);
            order.shuffle(&mut rng);
            Ranking::from_vec_unchecked(order)
        }
    };
    anneal(&rcm, &start, params)
}

/// Largest size `exact_kemeny` will enumerate.
pub const EXACT_LIMIT: usize = 10;

/// Minimal-cost ranking by enumerating every permutation in lexicographic
/// order; the first optimum wins ties.
pub fn exact_kemeny(rcm: &RcmMatrix) -> Result<(Ranking, u64)> {
    let n = rcm.n();
    if n > EXACT_LIMIT {
        return input(format!(
            "exact search refused for {n} proposals (limit {EXACT_LIMIT})"
        ));
    }
    let mut perm: Vec<ProposalId> = (0..n).collect();
    let mut best = (perm.clone(), cost_unchecked(&perm, rcm));
    while next_permutation(&mut perm) {
        let c = cost_unchecked(&perm, rcm);
        if c < best.1 {
            best = (perm.clone(), c);
        }
    }
    Ok((Ranking::from_vec_unchecked(best.0), best.1))
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = p.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = p.iter().rposition(|&x| x > p[i]).expect("successor exists");
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::cost;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};

    fn strict(rev: usize, ids: &[usize]) -> PartialRanking {
        PartialRanking::strict(rev, ids.to_vec()).unwrap()
    }

    #[test]
    fn permutations_in_lexicographic_order() {
        let mut p = vec![0, 1, 2];
        let mut seen = vec![p.clone()];
        while next_permutation(&mut p) {
            seen.push(p.clone());
        }
        assert_eq!(
            seen,
            vec![
                vec![0, 1, 2],
                vec![0, 2, 1],
                vec![1, 0, 2],
                vec![1, 2, 0],
                vec![2, 0, 1],
                vec![2, 1, 0]
            ]
        );
    }

    #[test]
    fn exact_examples() {
        let rcm = build_rcm(&[strict(0, &[3, 1, 0, 2])], 4).unwrap();
        let (r, c) = exact_kemeny(&rcm).unwrap();
        assert_eq!((r.as_slice(), c), (&[3, 1, 0, 2][..], 0));

        let cycle = build_rcm(&[strict(0, &[0, 1]), strict(1, &[1, 2]), strict(2, &[2, 0])], 3).unwrap();
        let (r, c) = exact_kemeny(&cycle).unwrap();
        assert_eq!((r.as_slice(), c), (&[0, 1, 2][..], 1));

        let (r, c) = exact_kemeny(&RcmMatrix::zeros(5)).unwrap();
        assert_eq!((r, c), (Ranking::identity(5), 0));

        assert!(exact_kemeny(&RcmMatrix::zeros(11)).is_err());
    }

    #[test]
    fn delta_examples() {
        let rcm = build_rcm(&[strict(0, &[0, 1, 2, 3])], 4).unwrap();
        let r = Ranking::identity(4);
        assert_eq!(cost_delta(&r, 1, 2, &rcm), 1);
        let mut s = r.clone();
        let there = cost_delta(&s, 0, 3, &rcm);
        s.swap(0, 3);
        let back = cost_delta(&s, 0, 3, &rcm);
        assert_eq!(there + back, 0);
        assert_eq!(cost_delta(&r, 2, 2, &rcm), 0);
    }

    #[test]
    fn single_full_reviewer_is_recovered() {
        let order = vec![4, 2, 0, 5, 1, 3];
        let res = cigr_search(&[strict(0, &order)], 6, &AnnealParams::default()).unwrap();
        assert_eq!(res.best_cost, 0);
        assert_eq!(res.ranking.as_slice(), order.as_slice());
    }

    #[test]
    fn two_reviewer_plateau() {
        let ps = [strict(0, &[0, 1, 2]), strict(1, &[1, 0, 2])];
        let params = AnnealParams {
            epsilon: 0,
            ..AnnealParams::default()
        };
        let res = cigr_search(&ps, 3, &params).unwrap();
        assert_eq!(res.best_cost, 0);
        let set: HashSet<_> = res.near_optimal_set.iter().map(|r| r.as_slice().to_vec()).collect();
        assert!(set.contains(&vec![0, 1, 2]));
        assert!(set.contains(&vec![1, 0, 2]));
        assert_eq!(res.ranking.as_slice(), &[0, 1, 2]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(cigr_search(&[], 3, &AnnealParams::default()).is_err());
        assert!(cigr_search(&[strict(0, &[0])], 1, &AnnealParams::default()).is_err());
        let bad = AnnealParams {
            beta: 1.5,
            ..AnnealParams::default()
        };
        assert!(cigr_search(&[strict(0, &[0, 1])], 2, &bad).is_err());
    }

    fn random_rcm(n: usize, votes: usize, seed: u64) -> RcmMatrix {
        let mut rng = seeded(seed);
        let mut partials = Vec::new();
        for r in 0..votes {
            let mut ids: Vec<usize> = (0..n).collect();
            ids.shuffle(&mut rng);
            ids.truncate(rng.random_range(2..=n));
            partials.push(strict(r, &ids));
        }
        build_rcm(&partials, n).unwrap()
    }

    #[test]
    fn chain_bookkeeping_matches_full_cost() {
        let rcm = random_rcm(12, 9, 3);
        let mut rng = seeded(11);
        let mut chain = Chain::new(&rcm, &(0..12).collect::<Vec<_>>());
        for _ in 0..500 {
            if chain.cost() == 0 {
                break;
            }
            let (i, j) = chain.propose(&mut rng);
            let before = chain.cost() as i64;
            let delta = swap_delta(&chain.order, i, j, &rcm);
            chain.apply(i, j);
            assert_eq!(chain.cost() as i64, before + delta);
            assert_eq!(chain.cost(), cost_unchecked(&chain.order, &rcm));
        }
    }

    proptest! {
        #[test]
        fn delta_matches_recomputation(seed in any::<u64>(), n in 2usize..9) {
            let rcm = random_rcm(n, 6, seed);
            let mut rng = seeded(seed.wrapping_add(1));
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let r = Ranking::new(order).unwrap();
            let base = cost(&r, &rcm).unwrap() as i64;
            for i in 0..n {
                for j in i..n {
                    let mut s = r.clone();
                    s.swap(i, j);
                    prop_assert_eq!(cost_delta(&r, i, j, &rcm), cost(&s, &rcm).unwrap() as i64 - base);
                }
            }
        }

        #[test]
        fn cost_invariant_under_relabeling(seed in any::<u64>(), n in 2usize..9) {
            let rcm = random_rcm(n, 5, seed);
            let mut rng = seeded(!seed);
            let mut relabel: Vec<usize> = (0..n).collect();
            relabel.shuffle(&mut rng);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let rows: Vec<Vec<u32>> = (0..n)
                .map(|i| (0..n).map(|j| {
                    let (a, b) = (relabel.iter().position(|&x| x == i).unwrap(), relabel.iter().position(|&x| x == j).unwrap());
                    rcm.get(a, b)
                }).collect())
                .collect();
            let moved = RcmMatrix::from_rows(&rows).unwrap();
            let r = Ranking::new(order.clone()).unwrap();
            let r2 = Ranking::new(order.iter().map(|&id| relabel[id]).collect()).unwrap();
            prop_assert_eq!(cost(&r, &rcm).unwrap(), cost(&r2, &moved).unwrap());
        }

        #[test]
        fn zero_temperature_never_climbs(seed in any::<u64>()) {
            let rcm = random_rcm(9, 12, seed);
            let params = AnnealParams { t0: 0.0, seed, max_iters: Some(3000), ..AnnealParams::default() };
            let mut rng = seeded(seed);
            let mut chain = Chain::new(&rcm, &(0..9).collect::<Vec<_>>());
            for _ in 0..300 {
                if chain.cost() == 0 { break; }
                let (i, j) = chain.propose(&mut rng);
                let delta = swap_delta(&chain.order, i, j, &rcm);
                let before = chain.cost();
                if accept(delta, params.t0, &mut rng) {
                    chain.apply(i, j);
                    prop_assert!(chain.cost() <= before);
                }
            }
        }

        #[test]
        fn result_invariants(seed in any::<u64>(), n in 3usize..9) {
            let rcm = random_rcm(n, 2 * n, seed);
            let params = AnnealParams { seed, max_iters: Some(20_000), ..AnnealParams::default() };
            let res = anneal(&rcm, &Ranking::identity(n), &params).unwrap();
            prop_assert!(res.best_cost <= res.initial_cost);
            prop_assert_eq!(cost(&res.best_ranking, &rcm).unwrap(), res.best_cost);
            for r in &res.near_optimal_set {
                prop_assert!(cost(r, &rcm).unwrap() <= res.best_cost + params.epsilon);
            }
            prop_assert_eq!(&res.ranking, &mbc_aggregate::<f64>(&res.near_optimal_set).unwrap().1);
            prop_assert_eq!(res, anneal(&rcm, &Ranking::identity(n), &params).unwrap());
        }
    }
}
