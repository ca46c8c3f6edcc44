//! Augmented Dickey-Fuller and Phillips-Perron unit-root tests with a
//! constant, reported against the asymptotic Dickey-Fuller critical values.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::SpdWork;
use crate::{Error, Result};

pub const MIN_LENGTH: usize = 25;

/// Asymptotic critical values for the constant-only case at 1%, 5%, 10%.
pub const CRITICAL_VALUES: [f64; 3] = [-3.43, -2.86, -2.57];

/// Residual variances are floored at this multiple of the mean squared
/// lagged level, so an exact fit yields a finite statistic.
const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitRootTest {
    Adf,
    Pp,
}

impl fmt::Display for UnitRootTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnitRootTest::Adf => "ADF",
            UnitRootTest::Pp => "PP",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PValueBand {
    #[serde(rename = "<0.01")]
    Below1,
    #[serde(rename = "0.01-0.05")]
    Between1And5,
    #[serde(rename = "0.05-0.10")]
    Between5And10,
    #[serde(rename = ">0.10")]
    Above10,
}

impl PValueBand {
    pub fn from_statistic(stat: f64) -> Self {
        if stat < CRITICAL_VALUES[0] {
            PValueBand::Below1
        } else if stat < CRITICAL_VALUES[1] {
            PValueBand::Between1And5
        } else if stat < CRITICAL_VALUES[2] {
            PValueBand::Between5And10
        } else {
            PValueBand::Above10
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PValueBand::Below1 => "<0.01",
            PValueBand::Between1And5 => "0.01-0.05",
            PValueBand::Between5And10 => "0.05-0.10",
            PValueBand::Above10 => ">0.10",
        }
    }

    /// Unit root rejected at 5%.
    pub fn rejects_at_5(self) -> bool {
        self <= PValueBand::Between1And5
    }
}

impl fmt::Display for PValueBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitRootResult {
    pub test: UnitRootTest,
    pub statistic: f64,
    pub p_value_band: PValueBand,
    /// Augmentation lags (ADF) or Newey-West bandwidth (PP).
    pub lags_or_bandwidth: usize,
    pub deterministic_terms: String,
}

/// Schwert's rule `floor(12 (T/100)^(1/4))`.
pub fn schwert_max_lag(len: usize) -> usize {
    (12.0 * (len as f64 / 100.0).powf(0.25)).floor() as usize
}

/// `floor(4 (T/100)^(2/9))`.
pub fn newey_west_bandwidth(len: usize) -> usize {
    (4.0 * (len as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

struct Ols {
    coef: DVector<f64>,
    resid: DVector<f64>,
    inv: DMatrix<f64>,
}

fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Ols> {
    let k = x.ncols();
    let g = x.transpose() * x;
    let mut work = SpdWork::new(k);
    let mut inv = vec![0.0; k * k];
    work.inverse(g.as_slice(), k, &mut inv)
        .map_err(|condition| Error::RankDeficient { condition })?;
    let inv = DMatrix::from_column_slice(k, k, &inv);
    let coef = &inv * (x.transpose() * y);
    let resid = y - x * &coef;
    Ok(Ols { coef, resid, inv })
}

fn check(series: &[f64]) -> Result<()> {
    if series.len() < MIN_LENGTH {
        return Err(Error::TooShort {
            name: "unit-root series".into(),
            needed: MIN_LENGTH,
            got: series.len(),
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("series contains non-finite values".into()));
    }
    Ok(())
}

/// Regression of `Δy_t` on a constant, `y_{t-1}` and `lags` lagged
/// differences over `t = first ..= T-1`.
fn adf_regression(y: &[f64], lags: usize, first: usize) -> (DMatrix<f64>, DVector<f64>) {
    let n = y.len() - first;
    let k = 2 + lags;
    let mut x = DMatrix::zeros(n, k);
    let mut dy = DVector::zeros(n);
    for (r, t) in (first..y.len()).enumerate() {
        dy[r] = y[t] - y[t - 1];
        x[(r, 0)] = 1.0;
        x[(r, 1)] = y[t - 1];
        for i in 1..=lags {
            x[(r, 1 + i)] = y[t - i] - y[t - i - 1];
        }
    }
    (x, dy)
}

fn variance_floor(x: &DMatrix<f64>) -> f64 {
    let lev = x.column(1);
    VARIANCE_FLOOR * lev.dot(&lev) / lev.len() as f64
}

fn bic(resid: &DVector<f64>, k: usize) -> f64 {
    let n = resid.len() as f64;
    let ssr = resid.dot(resid).max(f64::MIN_POSITIVE);
    (ssr / n).ln() + k as f64 * n.ln() / n
}

/// ADF test with a constant. The augmentation order is chosen by BIC from
/// `0 ..= max_lag` (Schwert's rule when `None`) on a common sample, then
/// the chosen regression is refitted on all available observations.
pub fn adf_test(series: &[f64], max_lag: Option<usize>) -> Result<UnitRootResult> {
    check(series)?;
    let max_lag = max_lag
        .unwrap_or_else(|| schwert_max_lag(series.len()))
        .min(series.len().saturating_sub(8) / 2);
    let mut best = (f64::INFINITY, 0);
    for lags in 0..=max_lag {
        let (x, dy) = adf_regression(series, lags, max_lag + 1);
        let Ok(fit) = ols(&x, &dy) else { continue };
        let b = bic(&fit.resid, x.ncols());
        if b < best.0 {
            best = (b, lags);
        }
    }
    let lags = best.1;
    let (x, dy) = adf_regression(series, lags, lags + 1);
    let fit = ols(&x, &dy)?;
    let dof = (x.nrows() - x.ncols()) as f64;
    let s2 = (fit.resid.dot(&fit.resid) / dof).max(variance_floor(&x));
    let statistic = fit.coef[1] / (s2 * fit.inv[(1, 1)]).sqrt();
    Ok(UnitRootResult {
        test: UnitRootTest::Adf,
        statistic,
        p_value_band: PValueBand::from_statistic(statistic),
        lags_or_bandwidth: lags,
        deterministic_terms: "constant".into(),
    })
}

/// Phillips-Perron `Z_t` with a constant and Bartlett-kernel long-run
/// variance (bandwidth `floor(4 (T/100)^(2/9))` when `None`).
pub fn pp_test(series: &[f64], bandwidth: Option<usize>) -> Result<UnitRootResult> {
    check(series)?;
    let (x, dy) = adf_regression(series, 0, 1);
    let n = x.nrows();
    let bandwidth = bandwidth
        .unwrap_or_else(|| newey_west_bandwidth(series.len()))
        .min(n - 1);
    let fit = ols(&x, &dy)?;
    let u = &fit.resid;
    let floor = variance_floor(&x);
    let nf = n as f64;
    let ssr = u.dot(u);
    let s2 = (ssr / (nf - 2.0)).max(floor);
    let gamma0 = (ssr / nf).max(floor);
    let mut lambda2 = gamma0;
    for j in 1..=bandwidth {
        let gj: f64 = (j..n).map(|t| u[t] * u[t - j]).sum::<f64>() / nf;
        lambda2 += 2.0 * (1.0 - j as f64 / (bandwidth + 1) as f64) * gj;
    }
    let lambda2 = lambda2.max(floor);
    let se = (s2 * fit.inv[(1, 1)]).sqrt();
    let t_rho = fit.coef[1] / se;
    let statistic =
        (gamma0 / lambda2).sqrt() * t_rho - (lambda2 - gamma0) / (2.0 * lambda2.sqrt()) * (nf * se / s2.sqrt());
    Ok(UnitRootResult {
        test: UnitRootTest::Pp,
        statistic,
        p_value_band: PValueBand::from_statistic(statistic),
        lags_or_bandwidth: bandwidth,
        deterministic_terms: "constant".into(),
    })
}
