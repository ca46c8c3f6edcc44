//! Least-squares estimation of the bivariate VAR(p)
//! `y_t = c + A_1 y_{t-1} + ... + A_p y_{t-p} + e_t`, `y_t = [return_t, attention_t]`.
//!
//! Regressor layout, fixed crate-wide: column 0 is the intercept, then for
//! each lag `l = 1..=p` the pair `[return_{t-l}, attention_{t-l}]`, so the
//! regressor for variable `v` at lag `l` sits in column `1 + 2(l-1) + v`.

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::dataset::AlignedDataset;
use crate::linalg::SpdWork;
use crate::{Error, Result};

/// Equation / variable index of log returns in `y_t`.
pub const RETURNS: usize = 0;
/// Equation / variable index of attention in `y_t`.
pub const ATTENTION: usize = 1;

/// Default upper bound for BIC lag search.
pub const DEFAULT_MAX_LAG: usize = 12;

/// Observations required beyond the parameter count of one equation.
pub const IDENTIFIABILITY_MARGIN: usize = 10;

/// Inclusive observation range `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn full(len: usize) -> Self {
        Self::new(0, len.saturating_sub(1))
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarSpec {
    pub lag_order: usize,
    pub include_intercept: bool,
}

impl VarSpec {
    pub fn new(lag_order: usize) -> Self {
        Self {
            lag_order,
            include_intercept: true,
        }
    }

    /// Regressors per equation, `2p + 1`.
    pub fn width(&self) -> usize {
        2 * self.lag_order + 1
    }

    pub fn min_window(&self) -> usize {
        self.lag_order + self.width() + IDENTIFIABILITY_MARGIN
    }
}

/// Column of `variable` at `lag` (1-based) in the regressor matrix.
pub fn regressor_column(variable: usize, lag: usize) -> usize {
    debug_assert!(lag >= 1 && variable < 2);
    1 + 2 * (lag - 1) + variable
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarFit {
    pub lag_order: usize,
    /// 2 x (2p+1); row per equation.
    pub coefficients: DMatrix<f64>,
    /// (T_w - p) x 2.
    pub residuals: DMatrix<f64>,
    /// (T_w - p) x (2p+1).
    pub regressors: DMatrix<f64>,
    pub residual_covariance: Matrix2<f64>,
    pub sample_range: Window,
}

impl VarFit {
    pub fn observations(&self) -> usize {
        self.residuals.nrows()
    }

    /// Row-vectorised coefficient stack: equation 0's row, then equation 1's.
    pub fn stacked_coefficients(&self) -> Vec<f64> {
        let k = self.coefficients.ncols();
        let mut out = Vec::with_capacity(2 * k);
        for eq in 0..2 {
            for j in 0..k {
                out.push(self.coefficients[(eq, j)]);
            }
        }
        out
    }

    /// `X'X` as a dense matrix.
    pub fn gram(&self) -> DMatrix<f64> {
        self.regressors.transpose() * &self.regressors
    }
}

/// Borrowed `(returns, attention)` pair; the estimation routines work on
/// this so simulated paths need not satisfy [`AlignedDataset`] invariants.
#[derive(Clone, Copy, Debug)]
pub struct Bivariate<'a> {
    pub returns: &'a [f64],
    pub attention: &'a [f64],
}

impl<'a> Bivariate<'a> {
    pub fn new(returns: &'a [f64], attention: &'a [f64]) -> Self {
        assert_eq!(returns.len(), attention.len());
        Self { returns, attention }
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn variable(&self, v: usize) -> &'a [f64] {
        if v == RETURNS {
            self.returns
        } else {
            self.attention
        }
    }
}

impl<'a> From<&'a AlignedDataset> for Bivariate<'a> {
    fn from(d: &'a AlignedDataset) -> Self {
        Self::new(&d.returns, &d.attention)
    }
}

/// Regressor and response matrices for regression rows `first..=last`
/// (each row `t` needs `t >= p`).
pub fn design(data: Bivariate<'_>, p: usize, first: usize, last: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    debug_assert!(first >= p && last >= first);
    let n = last + 1 - first;
    let k = 2 * p + 1;
    let x = DMatrix::from_fn(n, k, |r, c| {
        if c == 0 {
            return 1.0;
        }
        let lag = (c - 1) / 2 + 1;
        let var = (c - 1) % 2;
        data.variable(var)[first + r - lag]
    });
    let y = DMatrix::from_fn(n, 2, |r, c| data.variable(c)[first + r]);
    (x, y)
}

fn check_window(data: Bivariate<'_>, spec: VarSpec, window: Window) -> Result<()> {
    if spec.lag_order == 0 {
        return Err(Error::Invalid("lag order must be at least 1".into()));
    }
    if window.start > window.end || window.end >= data.len() {
        return Err(Error::Invalid(format!(
            "window [{}, {}] outside data of length {}",
            window.start,
            window.end,
            data.len()
        )));
    }
    let needed = spec.min_window();
    if window.len() < needed {
        return Err(Error::WindowTooShort {
            start: window.start,
            end: window.end,
            needed,
            got: window.len(),
        });
    }
    Ok(())
}

/// Equation-by-equation least squares. `excluded[eq]` lists regressor
/// columns forced to zero in equation `eq`.
fn least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>, excluded: [&[usize]; 2]) -> Result<DMatrix<f64>> {
    let k = x.ncols();
    let gram = x.transpose() * x;
    let xty = x.transpose() * y;
    let mut coefs = DMatrix::zeros(2, k);
    let mut work = SpdWork::new(k);
    for eq in 0..2 {
        let keep: Vec<usize> = (0..k).filter(|c| !excluded[eq].contains(c)).collect();
        let m = keep.len();
        let mut sub = vec![0.0; m * m];
        for (i, &ci) in keep.iter().enumerate() {
            for (j, &cj) in keep.iter().enumerate() {
                sub[i * m + j] = gram[(ci, cj)];
            }
        }
        let mut inv = vec![0.0; m * m];
        work.inverse(&sub, m, &mut inv)
            .map_err(|condition| Error::RankDeficient { condition })?;
        for (i, &ci) in keep.iter().enumerate() {
            let b: f64 = keep
                .iter()
                .enumerate()
                .map(|(j, &cj)| inv[i * m + j] * xty[(cj, eq)])
                .sum();
            coefs[(eq, ci)] = b;
        }
    }
    Ok(coefs)
}

fn assemble(p: usize, x: DMatrix<f64>, y: DMatrix<f64>, coefficients: DMatrix<f64>, window: Window) -> VarFit {
    let residuals = &y - &x * coefficients.transpose();
    let n = residuals.nrows() as f64;
    let cov = residuals.transpose() * &residuals / n;
    let residual_covariance = Matrix2::new(
        cov[(0, 0)],
        0.5 * (cov[(0, 1)] + cov[(1, 0)]),
        0.5 * (cov[(0, 1)] + cov[(1, 0)]),
        cov[(1, 1)],
    );
    VarFit {
        lag_order: p,
        coefficients,
        residuals,
        regressors: x,
        residual_covariance,
        sample_range: window,
    }
}

/// Unrestricted VAR(p) on `window`; the first `p` observations of the
/// window serve as presample lags.
pub fn fit(data: &AlignedDataset, spec: VarSpec, window: Window) -> Result<VarFit> {
    fit_series(data.into(), spec, window)
}

pub fn fit_series(data: Bivariate<'_>, spec: VarSpec, window: Window) -> Result<VarFit> {
    check_window(data, spec, window)?;
    let p = spec.lag_order;
    let (x, y) = design(data, p, window.start + p, window.end);
    let coefs = least_squares(&x, &y, [&[], &[]])?;
    Ok(assemble(p, x, y, coefs, window))
}

/// VAR(p) with the lags of `source` removed from equation `target`.
pub fn fit_restricted(
    data: Bivariate<'_>,
    spec: VarSpec,
    window: Window,
    target: usize,
    source: usize,
) -> Result<VarFit> {
    check_window(data, spec, window)?;
    let p = spec.lag_order;
    let (x, y) = design(data, p, window.start + p, window.end);
    let cols: Vec<usize> = (1..=p).map(|l| regressor_column(source, l)).collect();
    let mut excluded: [&[usize]; 2] = [&[], &[]];
    excluded[target] = &cols;
    let coefs = least_squares(&x, &y, excluded)?;
    Ok(assemble(p, x, y, coefs, window))
}

/// BIC(p) for `p = 1..=max_lag` on the common sample that drops the first
/// `max_lag` observations of the window. Entries are `None` where the fit failed.
pub fn bic_table(data: Bivariate<'_>, window: Window, max_lag: usize) -> Result<Vec<Option<f64>>> {
    if max_lag == 0 {
        return Err(Error::Invalid("max_lag must be at least 1".into()));
    }
    if window.end >= data.len() {
        return Err(Error::Invalid("window outside data".into()));
    }
    let needed = VarSpec::new(max_lag).min_window();
    if window.len() < needed {
        return Err(Error::WindowTooShort {
            start: window.start,
            end: window.end,
            needed,
            got: window.len(),
        });
    }
    let first = window.start + max_lag;
    let t_star = (window.end + 1 - first) as f64;
    let mut out = Vec::with_capacity(max_lag);
    for p in 1..=max_lag {
        let (x, y) = design(data, p, first, window.end);
        let bic = least_squares(&x, &y, [&[], &[]]).ok().and_then(|coefs| {
            let e = &y - &x * coefs.transpose();
            let s = e.transpose() * &e / t_star;
            let det = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)];
            (det > 0.0).then(|| {
                let k = (2 * (2 * p + 1)) as f64;
                det.ln() + k * t_star.ln() / t_star
            })
        });
        out.push(bic);
    }
    Ok(out)
}

/// Lag order minimising BIC; ties go to the smaller order.
pub fn select_lag_bic(data: Bivariate<'_>, window: Window, max_lag: usize) -> Result<usize> {
    let table = bic_table(data, window, max_lag)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, b) in table.iter().enumerate() {
        if let Some(b) = *b {
            if best.is_none_or(|(_, cur)| b < cur) {
                best = Some((i + 1, b));
            }
        }
    }
    best.map(|(p, _)| p)
        .ok_or_else(|| Error::Degenerate("no candidate lag order could be estimated".into()))
}
