//! Paired comparisons on common random numbers: both arms of a replicate see
//! the same truth, reviewers, assignment and reviews.

use rayon::prelude::*;
use serde::Serialize;

use dpr_core::{Error, MetricReport, Result, SimParams};

use crate::pipeline::{run_cells, AssignmentMode, Method, Setup};
use crate::stats::{paired_t_test, PairedTest, Summary};
use crate::sweep::{run_sweep, summarize, Cell, SweepParam, SweepRow, SweepSpec};

fn ci(rs: &[MetricReport]) -> Vec<f64> {
    rs.iter().map(|r| r.truth_ci).collect()
}

fn t02(rs: &[MetricReport]) -> Vec<f64> {
    rs.iter().map(|r| r.top_fraction_accuracy).collect()
}

/// CIGR against MBC at one parameter setting.
#[derive(Debug, Clone)]
pub struct MethodComparison {
    pub mbc: Vec<MetricReport>,
    pub cigr: Vec<MetricReport>,
    /// CIGR minus MBC on truth concordance.
    pub ci_test: PairedTest,
    /// CIGR minus MBC on top-fraction accuracy.
    pub t02_test: PairedTest,
}

pub fn compare_methods(
    p: &SimParams,
    mode: AssignmentMode,
    replicates: usize,
    setup: &Setup,
) -> Result<MethodComparison> {
    if replicates < 2 {
        return Err(Error::Input("a paired comparison needs at least 2 replicates".into()));
    }
    let pairs: Vec<Vec<MetricReport>> = (0..replicates as u64)
        .into_par_iter()
        .map(|rep| run_cells(p, &[Method::Mbc, Method::Cigr], &[mode], rep, setup))
        .collect::<Result<_>>()?;
    let mbc: Vec<MetricReport> = pairs.iter().map(|v| v[0]).collect();
    let cigr: Vec<MetricReport> = pairs.iter().map(|v| v[1]).collect();
    Ok(MethodComparison {
        ci_test: paired_t_test(&ci(&cigr), &ci(&mbc)),
        t02_test: paired_t_test(&t02(&cigr), &t02(&mbc)),
        mbc,
        cigr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub er_df: f64,
    pub mode: String,
    pub mean_ci_mbc: f64,
    pub mean_ci_cigr: f64,
    pub ci_diff: f64,
    pub ci_t: f64,
    pub ci_p: f64,
    pub mean_t02_mbc: f64,
    pub mean_t02_cigr: f64,
    pub t02_diff: f64,
    pub t02_p: f64,
    pub n_reps: usize,
}

impl ComparisonRow {
    pub fn new(er_df: f64, mode: AssignmentMode, c: &MethodComparison) -> Self {
        ComparisonRow {
            er_df,
            mode: mode.to_string(),
            mean_ci_mbc: Summary::of(&ci(&c.mbc)).mean,
            mean_ci_cigr: Summary::of(&ci(&c.cigr)).mean,
            ci_diff: c.ci_test.mean_diff,
            ci_t: c.ci_test.t,
            ci_p: c.ci_test.p_value,
            mean_t02_mbc: Summary::of(&t02(&c.mbc)).mean,
            mean_t02_cigr: Summary::of(&t02(&c.cigr)).mean,
            t02_diff: c.t02_test.mean_diff,
            t02_p: c.t02_test.p_value,
            n_reps: c.ci_test.n,
        }
    }
}

/// One paired comparison per review-error level.
pub fn compare_over_errors(
    p: &SimParams,
    er_grid: &[f64],
    mode: AssignmentMode,
    replicates: usize,
    setup: &Setup,
) -> Result<Vec<ComparisonRow>> {
    if er_grid.is_empty() {
        return Err(Error::Input("review-error grid is empty".into()));
    }
    er_grid
        .iter()
        .map(|&e| {
            let q = SweepParam::ErDf.apply(p, e)?;
            Ok(ComparisonRow::new(e, mode, &compare_methods(&q, mode, replicates, setup)?))
        })
        .collect()
}

/// Balanced minus random for one method at one review-error level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainRow {
    pub er_df: f64,
    pub method: String,
    pub ci_gain: f64,
    pub ci_t: f64,
    pub ci_p: f64,
    pub t02_gain: f64,
    pub t02_p: f64,
    pub n_reps: usize,
}

#[derive(Debug, Clone)]
pub struct BalancedComparison {
    pub rows: Vec<SweepRow>,
    pub gains: Vec<GainRow>,
}

fn find(cells: &[Cell], value: f64, method: Method, mode: AssignmentMode) -> &Cell {
    cells
        .iter()
        .find(|c| c.value == value && c.method == method && c.mode == mode)
        .expect("every grid cell is present")
}

/// Both methods under random and balanced assignment across `er_grid`.
pub fn balanced_comparison(
    p: &SimParams,
    er_grid: &[f64],
    replicates: usize,
    confidence: f64,
    setup: &Setup,
) -> Result<BalancedComparison> {
    let spec = SweepSpec {
        param: SweepParam::ErDf,
        grid: er_grid.to_vec(),
        base: p.clone(),
        methods: Method::ALL.to_vec(),
        modes: AssignmentMode::ALL.to_vec(),
        replicates,
        confidence,
    };
    let cells = run_sweep(&spec, setup)?;
    let mut grid = er_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut gains = Vec::new();
    for &e in &grid {
        for method in Method::ALL {
            let bal = find(&cells, e, method, AssignmentMode::Balanced);
            let rnd = find(&cells, e, method, AssignmentMode::Random);
            let ct = paired_t_test(&bal.truth_ci(), &rnd.truth_ci());
            let tt = paired_t_test(&bal.t02(), &rnd.t02());
            gains.push(GainRow {
                er_df: e,
                method: method.to_string(),
                ci_gain: ct.mean_diff,
                ci_t: ct.t,
                ci_p: ct.p_value,
                t02_gain: tt.mean_diff,
                t02_p: tt.p_value,
                n_reps: ct.n,
            });
        }
    }
    Ok(BalancedComparison {
        rows: summarize(SweepParam::ErDf, &cells, confidence),
        gains,
    })
}
