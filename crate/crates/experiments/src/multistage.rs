//! Two-or-more-stage review rounds: rank everything, drop the bottom of the
//! list, then have reviewers compare proposals of similar current rank.
//!
//! Choices made here: eliminated PIs keep reviewing; each reviewer draws
//! from one band of neighbouring survivors, with each pick moved to an
//! adjacent band with probability `jitter`; picks go to the least-reviewed
//! eligible proposal; by default every stage ranks the survivors on all
//! reviews so far, restricted to survivors.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use dpr_core::ranking::top_k;
use dpr_core::rng::{derive_seed, stream, Role};
use dpr_core::{
    cigr_search, fit_concordance, simulate_reviews, top_fraction_accuracy, truth_concordance, Assignment,
    Error, PartialRanking, ProposalId, Ranking, Result, SimParams,
};

use crate::pipeline::{run_cells, AssignmentMode, Method, Round, Setup, World, TOP_FRACTION};
use crate::stats::{paired_t_test, Summary};

#[derive(Debug, Clone, PartialEq)]
pub struct MultistageParams {
    pub stages: usize,
    pub cut_fraction: f64,
    pub band_width: usize,
    /// Reviews per reviewer in each stage; empty means `n_r` every stage.
    pub reviews_per_stage: Vec<usize>,
    pub jitter: f64,
    /// Rank each stage on all reviews so far rather than on its own.
    pub carry_reviews: bool,
    /// Assignment of the first stage.
    pub mode: AssignmentMode,
}

impl Default for MultistageParams {
    fn default() -> Self {
        MultistageParams {
            stages: 2,
            cut_fraction: 0.5,
            band_width: 10,
            reviews_per_stage: Vec::new(),
            jitter: 0.25,
            carry_reviews: true,
            mode: AssignmentMode::Random,
        }
    }
}

impl MultistageParams {
    pub fn loads(&self, p: &SimParams) -> Vec<usize> {
        if self.reviews_per_stage.is_empty() {
            vec![p.n_r; self.stages]
        } else {
            self.reviews_per_stage.clone()
        }
    }

    /// Number of proposals still in play at each stage.
    pub fn survivor_counts(&self, n_p: usize) -> Vec<usize> {
        let mut s = n_p;
        let mut out = vec![s];
        for _ in 1..self.stages {
            s -= (self.cut_fraction * s as f64).floor() as usize;
            out.push(s);
        }
        out
    }

    pub fn validate(&self, p: &SimParams) -> Result<()> {
        p.validate()?;
        if self.stages < 2 {
            return Err(Error::Input(format!("at least 2 stages are required, got {}", self.stages)));
        }
        if !(0.0..1.0).contains(&self.cut_fraction) {
            return Err(Error::Input(format!("cut fraction must lie in [0, 1), got {}", self.cut_fraction)));
        }
        if !(0.0..=1.0).contains(&self.jitter) {
            return Err(Error::Input(format!("jitter must lie in [0, 1], got {}", self.jitter)));
        }
        let loads = self.loads(p);
        if loads.len() != self.stages {
            return Err(Error::Input(format!(
                "{} review loads given for {} stages",
                loads.len(),
                self.stages
            )));
        }
        let max_load = loads.iter().copied().max().unwrap_or(0);
        if self.band_width < max_load {
            return Err(Error::Input(format!(
                "band width {} is smaller than the {} reviews per reviewer",
                self.band_width, max_load
            )));
        }
        for (m, s) in loads.iter().zip(self.survivor_counts(p.n_p)) {
            if *m < 2 || *m >= s {
                return Err(Error::Input(format!("{m} reviews per reviewer with {s} proposals in play")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MultistageReport {
    /// Truth concordance of the final ranking of the survivors.
    pub truth_ci: f64,
    /// Top-fraction accuracy of the full final ranking.
    pub t02: f64,
    /// Concordance of the survivors' ranking with the reviews it was built from.
    pub fit_ci: f64,
    /// Share of the true top fraction still in play at the end.
    pub top_retained: f64,
    pub survivors: usize,
}

/// Contiguous bands of `width`; a short tail joins the band before it.
pub fn bands(order: &[ProposalId], width: usize) -> Vec<Vec<ProposalId>> {
    let mut out: Vec<Vec<ProposalId>> = order.chunks(width.max(1)).map(<[ProposalId]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() < width) {
        let tail = out.pop().unwrap();
        out.last_mut().unwrap().extend(tail);
    }
    out
}

/// Largest-remainder split of `total` in proportion to `weights`.
fn apportion(total: usize, weights: &[usize]) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    let mut quota: Vec<usize> = weights.iter().map(|w| total * w / sum).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by_key(|&b| (std::cmp::Reverse(total * weights[b] % sum), b));
    let short = total - quota.iter().sum::<usize>();
    for &b in order.iter().take(short) {
        quota[b] += 1;
    }
    quota
}

/// Banded assignment of `m` survivors to each of `n_reviewers` PIs.
pub fn banded_assignment<R: Rng + ?Sized>(
    band_list: &[Vec<ProposalId>],
    n_reviewers: usize,
    m: usize,
    jitter: f64,
    rng: &mut R,
) -> Assignment {
    let n_p = band_list.iter().map(Vec::len).sum::<usize>().max(n_reviewers);
    let mut load = vec![0usize; n_p.max(band_list.iter().flatten().max().map_or(0, |x| x + 1))];
    let sizes: Vec<usize> = band_list.iter().map(Vec::len).collect();
    let mut home: Vec<usize> = apportion(n_reviewers, &sizes)
        .into_iter()
        .enumerate()
        .flat_map(|(b, q)| std::iter::repeat_n(b, q))
        .collect();
    home.shuffle(rng);
    let mut order: Vec<usize> = (0..n_reviewers).collect();
    order.shuffle(rng);

    let nb = band_list.len();
    let mut reviews = vec![Vec::new(); n_reviewers];
    for reviewer in order {
        let mut picked: Vec<ProposalId> = Vec::with_capacity(m);
        for _ in 0..m {
            let mut band = home[reviewer];
            if nb > 1 && rng.random_bool(jitter) {
                let up = rng.random_bool(0.5);
                band = match (up, band) {
                    (true, b) if b + 1 < nb => b + 1,
                    (false, b) if b > 0 => b - 1,
                    (_, 0) => 1,
                    (_, b) => b - 1,
                };
            }
            let eligible = |p: &&ProposalId| **p != reviewer && !picked.contains(p);
            let mut pool: Vec<ProposalId> = band_list[band].iter().filter(eligible).copied().collect();
            if pool.is_empty() {
                pool = band_list.iter().flatten().filter(eligible).copied().collect();
            }
            let least = pool.iter().map(|&p| load[p]).min().expect("m is below the number in play");
            pool.retain(|&p| load[p] == least);
            let choice = *pool.choose(rng).unwrap();
            load[choice] += 1;
            picked.push(choice);
        }
        reviews[reviewer] = picked;
    }
    Assignment::new(reviews)
}

/// Reviews restricted to `keep` and relabelled to positions in `keep`.
fn restrict(reviews: &[PartialRanking], keep: &[ProposalId], n_p: usize) -> Vec<PartialRanking> {
    let mut local = vec![usize::MAX; n_p];
    for (i, &p) in keep.iter().enumerate() {
        local[p] = i;
    }
    reviews
        .iter()
        .filter_map(|r| {
            let groups: Vec<Vec<ProposalId>> = r
                .groups()
                .iter()
                .map(|g| g.iter().filter(|&&p| local[p] != usize::MAX).map(|&p| local[p]).collect::<Vec<_>>())
                .filter(|g| !g.is_empty())
                .collect();
            let kept: usize = groups.iter().map(Vec::len).sum();
            (kept >= 2).then(|| PartialRanking::new(r.reviewer(), groups).expect("restriction keeps ids distinct"))
        })
        .collect()
}

pub fn run_multistage(p: &SimParams, mp: &MultistageParams, replicate: u64, setup: &Setup) -> Result<MultistageReport> {
    mp.validate(p)?;
    let loads = mp.loads(p);
    let world = World::generate(p, replicate);
    let first = SimParams { n_r: loads[0], ..p.clone() };
    let round = Round::generate(&first, &world, mp.mode, replicate, setup)?;
    let mut pool = round.reviews;

    let search = setup.anneal.clone().with_seed(derive_seed(p.seed, replicate, Role::Search));
    let mut order: Vec<ProposalId> = cigr_search(&pool, p.n_p, &search)?.ranking.into_vec();
    let mut eliminated: Vec<Vec<ProposalId>> = Vec::new();

    for (stage, &m) in loads.iter().enumerate().skip(1) {
        let tag = 4 * stage as u32;
        let cut = (mp.cut_fraction * order.len() as f64).floor() as usize;
        eliminated.push(order.split_off(order.len() - cut));

        let assignment = banded_assignment(
            &bands(&order, mp.band_width),
            p.n_p,
            m,
            mp.jitter,
            &mut stream(p.seed, replicate, Role::Stage(tag)),
        );
        let fresh = simulate_reviews(
            &world.scores,
            &world.profiles,
            &assignment,
            &mut stream(p.seed, replicate, Role::Stage(tag + 1)),
        );
        if mp.carry_reviews {
            pool.extend(fresh);
        } else {
            pool = fresh;
        }

        let current = restrict(&pool, &order, p.n_p);
        let params = setup.anneal.clone().with_seed(derive_seed(p.seed, replicate, Role::Stage(tag + 2)));
        let local = cigr_search(&current, order.len(), &params)?.ranking;
        order = local.as_slice().iter().map(|&i| order[i]).collect();
    }

    let survivors = order.len();
    let mut sorted = order.clone();
    sorted.sort_unstable();
    let local_of = |p: ProposalId| sorted.binary_search(&p).unwrap();
    let inferred = Ranking::new(order.iter().map(|&p| local_of(p)).collect())?;
    let kept: HashSet<ProposalId> = order.iter().copied().collect();
    let truth_local = Ranking::new(
        world
            .truth
            .as_slice()
            .iter()
            .filter(|p| kept.contains(p))
            .map(|&p| local_of(p))
            .collect(),
    )?;
    let current = restrict(&pool, &sorted, p.n_p);

    let mut full = order;
    for group in eliminated.into_iter().rev() {
        full.extend(group);
    }
    let full = Ranking::new(full)?;
    let k = top_k(TOP_FRACTION, p.n_p)?;
    let retained = world.truth.top(k).iter().filter(|p| kept.contains(p)).count();

    Ok(MultistageReport {
        truth_ci: truth_concordance(&inferred, &truth_local)?,
        t02: top_fraction_accuracy(&full, &world.truth, TOP_FRACTION)?,
        fit_ci: fit_concordance(&inferred, &current)?,
        top_retained: retained as f64 / k as f64,
        survivors,
    })
}

/// The multistage round and the single-stage CIGR baseline that spends the
/// same total number of reviews, on the same world.
pub fn run_paired(p: &SimParams, mp: &MultistageParams, replicate: u64, setup: &Setup) -> Result<(MultistageReport, MultistageReport)> {
    let staged = run_multistage(p, mp, replicate, setup)?;
    let single = SimParams { n_r: mp.loads(p).iter().sum(), ..p.clone() };
    let r = run_cells(&single, &[Method::Cigr], &[mp.mode], replicate, setup)?[0];
    let baseline = MultistageReport {
        truth_ci: r.truth_ci,
        t02: r.top_fraction_accuracy,
        fit_ci: r.fit_ci,
        top_retained: 1.0,
        survivors: p.n_p,
    };
    Ok((staged, baseline))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultistageRow {
    pub metric: String,
    pub multistage_mean: f64,
    pub multistage_hw: f64,
    pub baseline_mean: f64,
    pub baseline_hw: f64,
    pub mean_diff: f64,
    pub t: f64,
    pub p_value: f64,
    pub n_reps: usize,
}

#[derive(Debug, Clone)]
pub struct MultistageStudy {
    pub staged: Vec<MultistageReport>,
    pub baseline: Vec<MultistageReport>,
}

impl MultistageStudy {
    /// Multistage minus baseline, per metric. The baseline's truth
    /// concordance covers all proposals, the multistage one only survivors.
    pub fn rows(&self, confidence: f64) -> Vec<MultistageRow> {
        type Metric = fn(&MultistageReport) -> f64;
        let metrics: [(&str, Metric); 4] = [
            ("t02", |r| r.t02),
            ("truth_ci", |r| r.truth_ci),
            ("fit_ci", |r| r.fit_ci),
            ("top_retained", |r| r.top_retained),
        ];
        metrics
            .iter()
            .map(|(name, f)| {
                let a: Vec<f64> = self.staged.iter().map(f).collect();
                let b: Vec<f64> = self.baseline.iter().map(f).collect();
                let (sa, sb) = (Summary::of(&a), Summary::of(&b));
                let t = paired_t_test(&a, &b);
                MultistageRow {
                    metric: name.to_string(),
                    multistage_mean: sa.mean,
                    multistage_hw: sa.halfwidth(confidence),
                    baseline_mean: sb.mean,
                    baseline_hw: sb.halfwidth(confidence),
                    mean_diff: t.mean_diff,
                    t: t.t,
                    p_value: t.p_value,
                    n_reps: t.n,
                }
            })
            .collect()
    }
}

pub fn multistage_study(p: &SimParams, mp: &MultistageParams, replicates: usize, setup: &Setup) -> Result<MultistageStudy> {
    if replicates == 0 {
        return Err(Error::Input("at least one replicate is required".into()));
    }
    mp.validate(p)?;
    let pairs: Vec<(MultistageReport, MultistageReport)> = (0..replicates as u64)
        .into_par_iter()
        .map(|rep| run_paired(p, mp, rep, setup))
        .collect::<Result<_>>()?;
    let (staged, baseline) = pairs.into_iter().unzip();
    Ok(MultistageStudy { staged, baseline })
}
