//! Review assignments under conflict constraints, and entropy balancing.
//!
//! An assignment gives each of `n` reviewers `m` proposals such that no
//! reviewer holds a forbidden proposal (their own at minimum) and every
//! proposal is reviewed exactly `m` times. Balancing spreads the
//! `n * C(m, 2)` co-reviewed proposal pairs as evenly as possible over the
//! `C(n, 2)` possible pairs by maximizing the Shannon entropy of the pair
//! counts with simulated annealing over proposal trades between reviewers.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::error::{input, Error, Result};
use crate::num::Scalar;
use crate::ranking::ProposalId;
use crate::rng::seeded;

/// Forbidden proposals per reviewer. Reviewer `i` may never review proposal `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraints {
    n: usize,
    forbidden: Vec<bool>,
}

impl Constraints {
    /// Only self-review is forbidden.
    pub fn self_review(n: usize) -> Self {
        let mut forbidden = vec![false; n * n];
        for i in 0..n {
            forbidden[i * n + i] = true;
        }
        Constraints { n, forbidden }
    }

    /// Self-review plus the listed `(reviewer, forbidden proposals)` entries.
    pub fn from_entries(n: usize, entries: &[(usize, Vec<ProposalId>)]) -> Result<Self> {
        let mut c = Self::self_review(n);
        for (reviewer, ids) in entries {
            if *reviewer >= n {
                return input(format!("constraint for unknown reviewer {reviewer}"));
            }
            for &p in ids {
                if p >= n {
                    return Err(Error::OutOfRange { id: p, n });
                }
                c.forbidden[reviewer * n + p] = true;
            }
        }
        Ok(c)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn allows(&self, reviewer: usize, proposal: ProposalId) -> bool {
        !self.forbidden[reviewer * self.n + proposal]
    }

    pub fn allowed_count(&self, reviewer: usize) -> usize {
        (0..self.n).filter(|&p| self.allows(reviewer, p)).count()
    }

    pub fn forbidden(&self, reviewer: usize) -> Vec<ProposalId> {
        (0..self.n).filter(|&p| !self.allows(reviewer, p)).collect()
    }
}

/// Reviewer `i` reviews `reviews()[i]`, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    reviews: Vec<Vec<ProposalId>>,
}

impl Assignment {
    pub fn new(mut reviews: Vec<Vec<ProposalId>>) -> Self {
        for r in &mut reviews {
            r.sort_unstable();
        }
        Assignment { reviews }
    }

    pub fn reviews(&self) -> &[Vec<ProposalId>] {
        &self.reviews
    }

    pub fn of(&self, reviewer: usize) -> &[ProposalId] {
        &self.reviews[reviewer]
    }

    pub fn n_reviewers(&self) -> usize {
        self.reviews.len()
    }

    /// Times each of proposals `0..n` is reviewed.
    pub fn review_counts(&self, n: usize) -> Vec<usize> {
        let mut counts = vec![0; n];
        for p in self.reviews.iter().flatten() {
            counts[*p] += 1;
        }
        counts
    }

    /// Check size, duplicates, constraints and regularity.
    pub fn validate(&self, m: usize, constraints: &Constraints) -> Result<()> {
        let n = constraints.n();
        if self.reviews.len() != n {
            return input(format!("{} reviewers, expected {n}", self.reviews.len()));
        }
        for (i, set) in self.reviews.iter().enumerate() {
            if set.len() != m {
                return input(format!("reviewer {i} holds {} proposals, expected {m}", set.len()));
            }
            if set.windows(2).any(|w| w[0] == w[1]) {
                return input(format!("reviewer {i} holds a proposal twice"));
            }
            if let Some(&p) = set.iter().find(|&&p| p >= n || !constraints.allows(i, p)) {
                return input(format!("reviewer {i} may not review proposal {p}"));
            }
        }
        if let Some((p, c)) = self.review_counts(n).into_iter().enumerate().find(|&(_, c)| c != m) {
            return input(format!("proposal {p} reviewed {c} times, expected {m}"));
        }
        Ok(())
    }
}

/// Mutable working copy with O(1) membership tests.
struct Board<'c> {
    n: usize,
    constraints: &'c Constraints,
    reviews: Vec<Vec<ProposalId>>,
    holds: Vec<bool>,
}

#[derive(Debug, Clone, Copy)]
struct Trade {
    a: usize,
    ia: usize,
    b: usize,
    ib: usize,
}

impl<'c> Board<'c> {
    fn new(reviews: Vec<Vec<ProposalId>>, constraints: &'c Constraints) -> Self {
        let n = constraints.n();
        let mut holds = vec![false; n * n];
        for (i, set) in reviews.iter().enumerate() {
            for &p in set {
                holds[i * n + p] = true;
            }
        }
        Board {
            n,
            constraints,
            reviews,
            holds,
        }
    }

    fn holds(&self, reviewer: usize, p: ProposalId) -> bool {
        self.holds[reviewer * self.n + p]
    }

    fn tradeable(&self, a: usize, pa: ProposalId, b: usize, pb: ProposalId) -> bool {
        pa != pb
            && self.constraints.allows(a, pb)
            && self.constraints.allows(b, pa)
            && !self.holds(a, pb)
            && !self.holds(b, pa)
    }

    /// Uniform over all tradeable `(reviewer pair, proposal pair)`
    /// combinations, by rejection from the full product space.
    fn sample_trade(&self, rng: &mut impl Rng, tries: usize) -> Option<Trade> {
        for _ in 0..tries {
            let a = rng.random_range(0..self.n);
            let mut b = rng.random_range(0..self.n - 1);
            if b >= a {
                b += 1;
            }
            let ia = rng.random_range(0..self.reviews[a].len());
            let ib = rng.random_range(0..self.reviews[b].len());
            if self.tradeable(a, self.reviews[a][ia], b, self.reviews[b][ib]) {
                return Some(Trade { a, ia, b, ib });
            }
        }
        None
    }

    fn any_trade(&self) -> bool {
        (0..self.n).any(|a| {
            (a + 1..self.n).any(|b| {
                self.reviews[a].iter().any(|&pa| {
                    self.reviews[b]
                        .iter()
                        .any(|&pb| self.tradeable(a, pa, b, pb))
                })
            })
        })
    }

    fn apply(&mut self, t: Trade) {
        let pa = self.reviews[t.a][t.ia];
        let pb = self.reviews[t.b][t.ib];
        let n = self.n;
        self.holds[t.a * n + pa] = false;
        self.holds[t.b * n + pb] = false;
        self.holds[t.a * n + pb] = true;
        self.holds[t.b * n + pa] = true;
        self.reviews[t.a][t.ia] = pb;
        self.reviews[t.b][t.ib] = pa;
    }

    fn violation(&self) -> Option<(usize, usize)> {
        self.reviews.iter().enumerate().find_map(|(i, set)| {
            set.iter()
                .position(|&p| !self.constraints.allows(i, p))
                .map(|k| (i, k))
        })
    }

    /// Move a forbidden proposal away from reviewer `i` by swapping it for an
    /// allowed one held elsewhere.
    fn repair(&mut self, i: usize, k: usize, rng: &mut impl Rng) -> bool {
        let p = self.reviews[i][k];
        let mut others: Vec<usize> = (0..self.n).filter(|&j| j != i).collect();
        others.shuffle(rng);
        for j in others {
            if !self.constraints.allows(j, p) || self.holds(j, p) {
                continue;
            }
            let candidates: Vec<usize> = (0..self.reviews[j].len())
                .filter(|&l| {
                    let q = self.reviews[j][l];
                    self.constraints.allows(i, q) && !self.holds(i, q)
                })
                .collect();
            if let Some(&l) = candidates.choose(rng) {
                self.apply(Trade { a: i, ia: k, b: j, ib: l });
                return true;
            }
        }
        false
    }

    /// Trade ignoring constraints, used to shake a stuck repair.
    fn shake(&mut self, rng: &mut impl Rng) {
        let a = rng.random_range(0..self.n);
        let b = rng.random_range(0..self.n);
        if a == b {
            return;
        }
        let ia = rng.random_range(0..self.reviews[a].len());
        let ib = rng.random_range(0..self.reviews[b].len());
        let (pa, pb) = (self.reviews[a][ia], self.reviews[b][ib]);
        if pa != pb && !self.holds(a, pb) && !self.holds(b, pa) {
            self.apply(Trade { a, ia, b, ib });
        }
    }

    fn into_assignment(self) -> Assignment {
        Assignment::new(self.reviews)
    }
}

/// Repair passes before an assignment is declared infeasible.
const REPAIR_ROUNDS: usize = 200;

/// A random regular assignment respecting `constraints`.
///
/// Proposals are placed on a random cycle and each PI reviews the `m`
/// proposals following their own, which is regular and free of self-review.
/// Extra constraints are then repaired by trades, and `n * m` random legal
/// trades decorrelate the result from the cycle.
pub fn random_assignment(
    n: usize,
    m: usize,
    constraints: &Constraints,
    rng: &mut impl Rng,
) -> Result<Assignment> {
    if constraints.n() != n {
        return input("constraints sized for a different pool");
    }
    if m < 2 || m >= n {
        return input(format!("need 2 <= m < n, got m={m}, n={n}"));
    }
    if let Some(i) = (0..n).find(|&i| constraints.allowed_count(i) < m) {
        return Err(Error::Infeasible { reviewer: i });
    }

    let mut cycle: Vec<ProposalId> = (0..n).collect();
    cycle.shuffle(rng);
    let mut reviews = vec![Vec::with_capacity(m); n];
    for k in 0..n {
        reviews[cycle[k]] = (1..=m).map(|s| cycle[(k + s) % n]).collect();
    }
    let mut board = Board::new(reviews, constraints);

    let mut rounds = 0;
    while let Some((i, k)) = board.violation() {
        if !board.repair(i, k, rng) {
            rounds += 1;
            if rounds > REPAIR_ROUNDS {
                return Err(Error::Infeasible { reviewer: i });
            }
            for _ in 0..n {
                board.shake(rng);
            }
        }
    }

    let target = n * m;
    let mut done = 0;
    for _ in 0..20 * target {
        if done == target {
            break;
        }
        match board.sample_trade(rng, 1) {
            Some(t) => {
                board.apply(t);
                done += 1;
            }
            None => continue,
        }
    }
    Ok(board.into_assignment())
}

/// Symmetric matrix of co-review counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairCounts {
    n: usize,
    alpha: Vec<u32>,
}

impl PairCounts {
    #[inline]
    pub fn get(&self, i: ProposalId, j: ProposalId) -> u32 {
        self.alpha[i * self.n + j]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sum over unordered pairs.
    pub fn total(&self) -> u64 {
        self.upper().map(u64::from).sum()
    }

    pub fn max(&self) -> u32 {
        self.upper().max().unwrap_or(0)
    }

    /// Counts over `i < j`.
    pub fn upper(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| self.get(i, j)))
    }
}

pub fn pair_counts(a: &Assignment, n: usize) -> PairCounts {
    let mut alpha = vec![0u32; n * n];
    for set in a.reviews() {
        for (k, &i) in set.iter().enumerate() {
            for &j in &set[k + 1..] {
                alpha[i * n + j] += 1;
                alpha[j * n + i] += 1;
            }
        }
    }
    PairCounts { n, alpha }
}

/// Total pair mass `n * C(m, 2)`.
pub fn pair_mass(n: usize, m: usize) -> usize {
    n * m * (m - 1) / 2
}

/// Shannon entropy (natural log) of the normalized pair counts. Zero counts
/// contribute nothing.
pub fn entropy<F: Scalar>(pc: &PairCounts, n: usize, m: usize) -> F {
    let mass = F::from_count(pair_mass(n, m));
    pc.upper()
        .filter(|&a| a > 0)
        .map(|a| {
            let q = F::from_u32(a).unwrap() / mass;
            -q * q.ln()
        })
        .sum()
}

fn alpha_ln_alpha(a: u32) -> f64 {
    if a == 0 {
        0.0
    } else {
        let a = f64::from(a);
        a * a.ln()
    }
}

/// Largest entropy any integer pair-count table with this mass can reach:
/// the mass spread as evenly as possible over the `C(n, 2)` cells.
pub fn max_entropy<F: Scalar>(n: usize, m: usize) -> F {
    let mass = pair_mass(n, m);
    let cells = n * (n - 1) / 2;
    let (q, rem) = (mass / cells, mass % cells);
    let s = rem as f64 * alpha_ln_alpha(q as u32 + 1)
        + (cells - rem) as f64 * alpha_ln_alpha(q as u32);
    let mass = mass as f64;
    F::lit(mass.ln() - s / mass)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceParams {
    pub t0: f64,
    pub beta: f64,
    /// `None` means `200 * n * m`.
    pub max_iters: Option<u64>,
    pub seed: u64,
}

impl Default for BalanceParams {
    fn default() -> Self {
        BalanceParams {
            t0: 0.0005,
            beta: 0.99995,
            max_iters: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalanceWarning {
    /// No pair of reviewers can trade; the input is returned unchanged.
    NoTradeablePair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceOutcome {
    pub assignment: Assignment,
    pub entropy: f64,
    pub initial_entropy: f64,
    pub iterations: u64,
    pub accepted: u64,
    pub warning: Option<BalanceWarning>,
}

/// Rejection-sampling attempts per trade before giving up.
const SAMPLE_TRIES: usize = 10_000;

/// Stop once within this distance of `max_entropy`.
const ENTROPY_TOLERANCE: f64 = 1e-9;

/// Raise the entropy of `a` by annealing over legal trades; returns the
/// best assignment seen.
pub fn balance(
    a: &Assignment,
    constraints: &Constraints,
    params: &BalanceParams,
) -> Result<BalanceOutcome> {
    let n = constraints.n();
    let m = a.reviews().first().map_or(0, Vec::len);
    a.validate(m, constraints)?;
    if params.t0.is_nan() || params.t0 < 0.0 || !(0.0..=1.0).contains(&params.beta) {
        return input("balance needs t0 >= 0 and beta in [0, 1]");
    }
    let initial_entropy = entropy::<f64>(&pair_counts(a, n), n, m);
    let mut board = Board::new(a.reviews().to_vec(), constraints);
    if !board.any_trade() {
        return Ok(BalanceOutcome {
            assignment: a.clone(),
            entropy: initial_entropy,
            initial_entropy,
            iterations: 0,
            accepted: 0,
            warning: Some(BalanceWarning::NoTradeablePair),
        });
    }

    let mass = pair_mass(n, m) as f64;
    let cap = max_entropy::<f64>(n, m);
    let table: Vec<f64> = (0..=n as u32 + 1).map(alpha_ln_alpha).collect();
    let mut alpha = pair_counts(a, n).alpha;
    let s: f64 = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| table[alpha[i * n + j] as usize])
        .sum();

    // Move one unit of mass into or out of cell (i, j); returns the change in S.
    let bump = |alpha: &mut Vec<u32>, i: usize, j: usize, up: bool| -> f64 {
        let old = alpha[i * n + j];
        let new = if up { old + 1 } else { old - 1 };
        alpha[i * n + j] = new;
        alpha[j * n + i] = new;
        table[new as usize] - table[old as usize]
    };
    // A trade moves reviewer a from pa to pb and reviewer b from pb to pa.
    let shift = |alpha: &mut Vec<u32>, board: &Board, t: Trade, forward: bool| -> f64 {
        let (pa, pb) = (board.reviews[t.a][t.ia], board.reviews[t.b][t.ib]);
        let (from_a, to_a) = if forward { (pa, pb) } else { (pb, pa) };
        let mut ds = 0.0;
        for (k, &x) in board.reviews[t.a].iter().enumerate() {
            if k != t.ia {
                ds += bump(alpha, from_a, x, false);
                ds += bump(alpha, to_a, x, true);
            }
        }
        for (k, &y) in board.reviews[t.b].iter().enumerate() {
            if k != t.ib {
                ds += bump(alpha, to_a, y, false);
                ds += bump(alpha, from_a, y, true);
            }
        }
        ds
    };

    let mut rng = seeded(params.seed);
    let budget = params.max_iters.unwrap_or(200 * (n * m) as u64);
    let mut h = mass.ln() - s / mass;
    let mut best_h = h;
    let mut best = board.reviews.clone();
    let mut temperature = params.t0;
    let mut iterations = 0;
    let mut accepted = 0;

    while iterations < budget && best_h < cap - ENTROPY_TOLERANCE {
        iterations += 1;
        let Some(t) = board.sample_trade(&mut rng, SAMPLE_TRIES) else {
            break;
        };
        let ds = shift(&mut alpha, &board, t, true);
        let dh = -ds / mass;
        let take = dh >= 0.0 || (temperature > 0.0 && rng.random::<f64>() < (dh / temperature).exp());
        if take {
            board.apply(t);
            h += dh;
            accepted += 1;
            if h > best_h + 1e-12 {
                best_h = h;
                best.clone_from(&board.reviews);
            }
        } else {
            shift(&mut alpha, &board, t, false);
        }
        temperature *= params.beta;
    }

    let assignment = Assignment::new(best);
    let entropy = entropy::<f64>(&pair_counts(&assignment, n), n, m);
    Ok(BalanceOutcome {
        assignment,
        entropy,
        initial_entropy,
        iterations,
        accepted,
        warning: None,
    })
}
