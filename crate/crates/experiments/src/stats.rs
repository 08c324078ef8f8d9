//! Summary statistics, paired t-tests and least-squares lines.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// Two-sided normal critical value for confidence level `conf`.
pub fn z_critical(conf: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.inverse_cdf(1.0 - (1.0 - conf) / 2.0)
}

/// Two-sided Student t critical value.
pub fn t_critical(conf: f64, df: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    t.inverse_cdf(1.0 - (1.0 - conf) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; zero when `n < 2`.
    pub sd: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Summary { n, mean: f64::NAN, sd: 0.0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Summary { n, mean, sd }
    }

    pub fn se(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sd / (self.n as f64).sqrt()
        }
    }

    /// Normal-approximation confidence half-width.
    pub fn halfwidth(&self, conf: f64) -> f64 {
        z_critical(conf) * self.se()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    pub n: usize,
    /// Mean of `a - b`.
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub t: f64,
    /// Two-sided.
    pub p_value: f64,
}

/// Two-sided paired t-test on `a - b`. With zero variance the p-value is 1
/// for a zero mean difference and 0 otherwise.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> PairedTest {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let s = Summary::of(&diffs);
    let (t, p_value) = if s.n < 2 {
        (f64::NAN, 1.0)
    } else if s.sd == 0.0 {
        if s.mean == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(s.mean), 0.0)
        }
    } else {
        let t = s.mean / s.se();
        let dist = StudentsT::new(0.0, 1.0, (s.n - 1) as f64).expect("df >= 1");
        (t, 2.0 * dist.cdf(-t.abs()))
    };
    PairedTest {
        n: s.n,
        mean_diff: s.mean,
        sd_diff: s.sd,
        t,
        p_value,
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (mx, my) = (Summary::of(x).mean, Summary::of(y).mean);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Ordinary least squares `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub n: usize,
    pub intercept: f64,
    pub slope: f64,
    /// Residual standard error.
    pub sigma: f64,
    pub x_mean: f64,
    pub sxx: f64,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    /// Critical value, or NaN with no residual degrees of freedom.
    fn t(&self, conf: f64) -> f64 {
        if self.n > 2 {
            t_critical(conf, (self.n - 2) as f64)
        } else {
            f64::NAN
        }
    }

    pub fn se_slope(&self) -> f64 {
        self.sigma / self.sxx.sqrt()
    }

    pub fn se_intercept(&self) -> f64 {
        self.sigma * (1.0 / self.n as f64 + self.x_mean.powi(2) / self.sxx).sqrt()
    }

    /// Confidence interval for the slope; NaN bounds below three points.
    pub fn slope_ci(&self, conf: f64) -> (f64, f64) {
        let h = self.t(conf) * self.se_slope();
        (self.slope - h, self.slope + h)
    }

    pub fn intercept_ci(&self, conf: f64) -> (f64, f64) {
        let h = self.t(conf) * self.se_intercept();
        (self.intercept - h, self.intercept + h)
    }

    /// Confidence band for the fitted mean at `x`.
    pub fn band(&self, x: f64, conf: f64) -> (f64, f64) {
        let se = self.sigma * (1.0 / self.n as f64 + (x - self.x_mean).powi(2) / self.sxx).sqrt();
        let h = self.t(conf) * se;
        let y = self.predict(x);
        (y - h, y + h)
    }
}

/// `None` with fewer than two points or no spread in `x`.
pub fn ols(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return None;
    }
    let (mx, my) = (Summary::of(x).mean, Summary::of(y).mean);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let sigma = if n > 2 { (rss / (n - 2) as f64).sqrt() } else { 0.0 };
    Some(LinearFit {
        n,
        intercept,
        slope,
        sigma,
        x_mean: mx,
        sxx,
    })
}
