//! Where CIGR stops beating MBC: the review-error level at which the mean
//! truth-concordance difference changes sign, as a function of the
//! true-score spread, and a straight line through those crossings.

use rayon::prelude::*;
use serde::Serialize;

use dpr_core::{Error, MetricReport, Result, SimParams};

use crate::pipeline::{run_cells, AssignmentMode, Method, Setup};
use crate::stats::{ols, LinearFit};
use crate::sweep::SweepParam;

/// Confidence level of the fitted line's intervals.
pub const FIT_CONFIDENCE: f64 = 0.99;

/// First place where `diffs` goes from positive to non-positive, linearly
/// interpolated between the bracketing grid points. `None` when the curve
/// never crosses inside the grid.
pub fn locate_crossing(grid: &[f64], diffs: &[f64]) -> Option<f64> {
    assert_eq!(grid.len(), diffs.len(), "grid and differences differ in length");
    grid.windows(2).zip(diffs.windows(2)).find_map(|(x, d)| {
        if d[0] > 0.0 && d[1] <= 0.0 {
            Some(x[0] + d[0] * (x[1] - x[0]) / (d[0] - d[1]))
        } else {
            None
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingRow {
    pub sd_s: f64,
    pub er_star: Option<f64>,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffRow {
    pub sd_s: f64,
    pub er_df: f64,
    pub mean_diff: f64,
    pub n_reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRow {
    pub n_points: usize,
    pub intercept: f64,
    pub intercept_lo: f64,
    pub intercept_hi: f64,
    pub slope: f64,
    pub slope_lo: f64,
    pub slope_hi: f64,
    pub sigma: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandRow {
    pub sd_s: f64,
    pub fit: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone)]
pub struct Boundary {
    pub diffs: Vec<DiffRow>,
    pub crossings: Vec<CrossingRow>,
    pub fit: Option<LinearFit>,
}

impl Boundary {
    /// Crossings and line from a precomputed difference surface, one row of
    /// `diffs` per entry of `sd_grid`.
    pub fn from_surface(sd_grid: &[f64], er_grid: &[f64], diffs: &[Vec<f64>]) -> Self {
        let crossings: Vec<CrossingRow> = sd_grid
            .iter()
            .zip(diffs)
            .map(|(&sd, d)| {
                let er_star = locate_crossing(er_grid, d);
                CrossingRow { sd_s: sd, er_star, censored: er_star.is_none() }
            })
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = crossings
            .iter()
            .filter_map(|c| c.er_star.map(|e| (c.sd_s, e)))
            .unzip();
        Boundary {
            diffs: Vec::new(),
            fit: ols(&x, &y),
            crossings,
        }
    }

    pub fn fit_row(&self, confidence: f64) -> Option<FitRow> {
        self.fit.as_ref().map(|f| {
            let (intercept_lo, intercept_hi) = f.intercept_ci(confidence);
            let (slope_lo, slope_hi) = f.slope_ci(confidence);
            FitRow {
                n_points: f.n,
                intercept: f.intercept,
                intercept_lo,
                intercept_hi,
                slope: f.slope,
                slope_lo,
                slope_hi,
                sigma: f.sigma,
                confidence,
            }
        })
    }

    pub fn band_rows(&self, sd_grid: &[f64], confidence: f64) -> Vec<BandRow> {
        match &self.fit {
            None => Vec::new(),
            Some(f) => sd_grid
                .iter()
                .map(|&x| {
                    let (lo, hi) = f.band(x, confidence);
                    BandRow { sd_s: x, fit: f.predict(x), lo, hi }
                })
                .collect(),
        }
    }
}

/// Scans `er_grid` at every `sd_grid` value with paired replicates.
pub fn boundary(
    p: &SimParams,
    sd_grid: &[f64],
    er_grid: &[f64],
    mode: AssignmentMode,
    replicates: usize,
    setup: &Setup,
) -> Result<Boundary> {
    if sd_grid.is_empty() || er_grid.is_empty() {
        return Err(Error::Input("boundary grids must be non-empty".into()));
    }
    if replicates == 0 {
        return Err(Error::Input("at least one replicate is required".into()));
    }
    if er_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Input("review-error grid must be strictly increasing".into()));
    }
    let mut points = Vec::with_capacity(sd_grid.len() * er_grid.len());
    for &sd in sd_grid {
        for &er in er_grid {
            points.push(SweepParam::ErDf.apply(&SweepParam::SdS.apply(p, sd)?, er)?);
        }
    }
    let reps = replicates;
    let results: Vec<Vec<MetricReport>> = (0..points.len() * reps)
        .into_par_iter()
        .map(|job| run_cells(&points[job / reps], &[Method::Mbc, Method::Cigr], &[mode], (job % reps) as u64, setup))
        .collect::<Result<_>>()?;
    let means: Vec<f64> = results
        .chunks(reps)
        .map(|c| c.iter().map(|r| r[1].truth_ci - r[0].truth_ci).sum::<f64>() / reps as f64)
        .collect();
    let surface: Vec<Vec<f64>> = means.chunks(er_grid.len()).map(<[f64]>::to_vec).collect();
    let mut b = Boundary::from_surface(sd_grid, er_grid, &surface);
    for (i, &sd) in sd_grid.iter().enumerate() {
        for (j, &er) in er_grid.iter().enumerate() {
            b.diffs.push(DiffRow { sd_s: sd, er_df: er, mean_diff: surface[i][j], n_reps: reps });
        }
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_interpolates() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(locate_crossing(&x, &[0.3, 0.1, -0.1, -0.3]), Some(2.5));
        assert_eq!(locate_crossing(&x, &[0.3, 0.0, -0.1, -0.3]), Some(2.0));
        assert_eq!(locate_crossing(&x, &[0.3, 0.2, 0.1, 0.05]), None);
        let late = locate_crossing(&x, &[-0.1, 0.2, -0.1, 0.0]).unwrap();
        assert!((late - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn censored_rows_are_excluded() {
        let er = [1.0, 2.0, 3.0];
        let sd = [1.0, 2.0, 3.0];
        let surf = vec![vec![0.2, -0.2, -0.4], vec![0.2, 0.1, 0.05], vec![0.4, 0.2, -0.2]];
        let b = Boundary::from_surface(&sd, &er, &surf);
        assert!(b.crossings[1].censored);
        let f = b.fit.unwrap();
        assert_eq!(f.n, 2);
        assert!((f.slope - 0.5).abs() < 1e-12);
    }
}
