//! Parameter sweeps over a grid of one simulation parameter.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use dpr_core::{Error, MetricReport, Result, SimParams};

use crate::pipeline::{run_cells, AssignmentMode, Method, Setup};
use crate::stats::Summary;

/// Confidence level of the reported halfwidths.
pub const DEFAULT_CONFIDENCE: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParam {
    NP,
    NR,
    SdS,
    BrSd,
    ErDf,
}

impl SweepParam {
    pub fn apply(self, base: &SimParams, value: f64) -> Result<SimParams> {
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Input(format!("{self} must be a whole number, got {value}")))
            }
        };
        let mut p = base.clone();
        match self {
            SweepParam::NP => p.n_p = count()?,
            SweepParam::NR => p.n_r = count()?,
            SweepParam::SdS => p.sd_s = value,
            SweepParam::BrSd => p.br_sd = value,
            SweepParam::ErDf => p.er_df = value,
        }
        p.validate()?;
        Ok(p)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::NP => "n_p",
            SweepParam::NR => "n_r",
            SweepParam::SdS => "sd_s",
            SweepParam::BrSd => "br_sd",
            SweepParam::ErDf => "er_df",
        })
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "n_p" | "np" => Ok(SweepParam::NP),
            "n_r" | "nr" => Ok(SweepParam::NR),
            "sd_s" | "sds" => Ok(SweepParam::SdS),
            "br_sd" | "brsd" => Ok(SweepParam::BrSd),
            "er_df" | "erdf" => Ok(SweepParam::ErDf),
            _ => Err(format!("unknown parameter `{s}` (expected n_p, n_r, sd_s, br_sd or er_df)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub grid: Vec<f64>,
    pub base: SimParams,
    pub methods: Vec<Method>,
    pub modes: Vec<AssignmentMode>,
    pub replicates: usize,
    pub confidence: f64,
}

impl SweepSpec {
    pub fn new(param: SweepParam, grid: Vec<f64>, base: SimParams) -> Self {
        SweepSpec {
            param,
            grid,
            base,
            methods: Method::ALL.to_vec(),
            modes: vec![AssignmentMode::Random],
            replicates: 1000,
            confidence: DEFAULT_CONFIDENCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Input("sweep grid is empty".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Input("at least one replicate is required".into()));
        }
        if self.methods.is_empty() || self.modes.is_empty() {
            return Err(Error::Input("no method or assignment mode selected".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Input(format!("confidence must lie in (0, 1), got {}", self.confidence)));
        }
        for &v in &self.grid {
            self.param.apply(&self.base, v)?;
        }
        Ok(())
    }
}

/// Per-replicate metrics of one (value, method, mode) cell.
#[derive(Debug, Clone)]
pub struct Cell {
    pub value: f64,
    pub method: Method,
    pub mode: AssignmentMode,
    pub reports: Vec<MetricReport>,
}

impl Cell {
    pub fn truth_ci(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.truth_ci).collect()
    }

    pub fn t02(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.top_fraction_accuracy).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub method: String,
    pub mode: String,
    pub mean_ci: f64,
    pub ci_hw: f64,
    pub mean_t02: f64,
    pub t02_hw: f64,
    pub n_reps: usize,
}

/// Runs every replicate of every grid point. Cells come back ordered by
/// grid value, then method, then mode, whatever the thread count.
pub fn run_sweep(spec: &SweepSpec, setup: &Setup) -> Result<Vec<Cell>> {
    spec.validate()?;
    let params: Vec<SimParams> = spec
        .grid
        .iter()
        .map(|&v| spec.param.apply(&spec.base, v))
        .collect::<Result<_>>()?;
    let reps = spec.replicates;
    let results: Vec<Vec<MetricReport>> = (0..params.len() * reps)
        .into_par_iter()
        .map(|job| run_cells(&params[job / reps], &spec.methods, &spec.modes, (job % reps) as u64, setup))
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for (g, &value) in spec.grid.iter().enumerate() {
        let block = &results[g * reps..(g + 1) * reps];
        for (k, &mode) in spec.modes.iter().enumerate() {
            for (l, &method) in spec.methods.iter().enumerate() {
                let idx = k * spec.methods.len() + l;
                cells.push(Cell {
                    value,
                    method,
                    mode,
                    reports: block.iter().map(|r| r[idx]).collect(),
                });
            }
        }
    }
    cells.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.method.cmp(&b.method))
            .then(a.mode.cmp(&b.mode))
    });
    Ok(cells)
}

pub fn summarize(param: SweepParam, cells: &[Cell], confidence: f64) -> Vec<SweepRow> {
    cells
        .iter()
        .map(|c| {
            let ci = Summary::of(&c.truth_ci());
            let t02 = Summary::of(&c.t02());
            SweepRow {
                param: param.to_string(),
                value: c.value,
                method: c.method.to_string(),
                mode: c.mode.to_string(),
                mean_ci: ci.mean,
                ci_hw: ci.halfwidth(confidence),
                mean_t02: t02.mean,
                t02_hw: t02.halfwidth(confidence),
                n_reps: ci.n,
            }
        })
        .collect()
}

pub fn sweep(spec: &SweepSpec, setup: &Setup) -> Result<Vec<SweepRow>> {
    Ok(summarize(spec.param, &run_sweep(spec, setup)?, spec.confidence))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_checks_counts() {
        let base = SimParams::default();
        assert_eq!(SweepParam::NR.apply(&base, 5.0).unwrap().n_r, 5);
        assert!(SweepParam::NR.apply(&base, 5.5).is_err());
        assert!(SweepParam::NR.apply(&base, 40.0).is_err());
        assert_eq!(SweepParam::ErDf.apply(&base, 3.5).unwrap().er_df, 3.5);
    }

    #[test]
    fn empty_grid_rejected() {
        let spec = SweepSpec::new(SweepParam::ErDf, vec![], SimParams::default());
        assert!(spec.validate().is_err());
    }

    #[test]
    fn rows_are_ordered_and_bounded() {
        let mut spec = SweepSpec::new(SweepParam::ErDf, vec![20.0, 5.0], SimParams::default());
        spec.replicates = 4;
        spec.modes = AssignmentMode::ALL.to_vec();
        let rows = sweep(&spec, &Setup::default()).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[0].value, 5.0);
        assert_eq!((rows[0].method.as_str(), rows[0].mode.as_str()), ("mbc", "random"));
        assert_eq!((rows[1].method.as_str(), rows[1].mode.as_str()), ("mbc", "balanced"));
        for r in &rows {
            assert!((0.0..=1.0).contains(&r.mean_ci) && r.ci_hw >= 0.0);
            assert!((0.0..=1.0).contains(&r.mean_t02) && r.t02_hw >= 0.0);
            assert_eq!(r.n_reps, 4);
        }
    }
}
