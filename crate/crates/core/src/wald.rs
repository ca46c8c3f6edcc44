//! Wald statistics for the null that one variable's lags are jointly zero
//! in another variable's equation.
//!
//! `W = (R b)' [R V R']^-1 (R b)` with `b` the row-vectorised coefficient
//! stack and `V` either `Omega (x) (X'X)^-1` (homoskedastic) or the White
//! sandwich `(I (x) G) [sum_t e_t e_t' (x) x_t x_t'] (I (x) G)`, `G = (X'X)^-1`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::SpdWork;
use crate::var::{regressor_column, VarFit, Window, ATTENTION, RETURNS};
use crate::{Error, Result};

/// Target-equation residual variance at or below this fraction of the
/// target variable's variance is treated as an exact fit (0/0 statistic).
pub const DEGENERATE_RATIO: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionMatrix {
    pub lag_order: usize,
    pub target_equation: usize,
    pub source_variable: usize,
    /// Selected positions in the stacked coefficient vector, one per lag.
    pub positions: Vec<usize>,
}

impl SelectionMatrix {
    pub fn new(lag_order: usize, target_equation: usize, source_variable: usize) -> Self {
        assert!(lag_order >= 1);
        let width = 2 * lag_order + 1;
        let positions = (1..=lag_order)
            .map(|l| target_equation * width + regressor_column(source_variable, l))
            .collect();
        Self {
            lag_order,
            target_equation,
            source_variable,
            positions,
        }
    }

    /// Regressor columns (within the target equation) that are restricted.
    pub fn columns(&self) -> Vec<usize> {
        (1..=self.lag_order)
            .map(|l| regressor_column(self.source_variable, l))
            .collect()
    }

    /// Dense `p x 2(2p+1)` 0/1 matrix.
    pub fn entries(&self) -> DMatrix<f64> {
        let cols = 2 * (2 * self.lag_order + 1);
        let mut m = DMatrix::zeros(self.lag_order, cols);
        for (row, &pos) in self.positions.iter().enumerate() {
            m[(row, pos)] = 1.0;
        }
        m
    }
}

/// Selection for "attention does not Granger-cause returns".
pub fn build_selection(p: usize) -> SelectionMatrix {
    SelectionMatrix::new(p, RETURNS, ATTENTION)
}

/// Selection for the reverse direction, returns -> attention.
pub fn build_reverse_selection(p: usize) -> SelectionMatrix {
    SelectionMatrix::new(p, ATTENTION, RETURNS)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaldResult {
    pub statistic: f64,
    pub dof: usize,
    pub robust: bool,
    pub window: Window,
}

fn check_dims(fit: &VarFit, r: &SelectionMatrix) -> Result<()> {
    if fit.lag_order != r.lag_order {
        return Err(Error::Invalid(format!(
            "selection built for p={} but fit has p={}",
            r.lag_order, fit.lag_order
        )));
    }
    Ok(())
}

fn check_degenerate(fit: &VarFit, target: usize) -> Result<()> {
    let fitted = &fit.regressors * fit.coefficients.row(target).transpose();
    let y: Vec<f64> = fitted
        .iter()
        .zip(fit.residuals.column(target).iter())
        .map(|(f, e)| f + e)
        .collect();
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var_y = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let resid = fit.residual_covariance[(target, target)];
    if !(resid > DEGENERATE_RATIO * var_y) {
        return Err(Error::Degenerate(format!(
            "target equation fits exactly (residual variance {resid:.3e}, series variance {var_y:.3e})"
        )));
    }
    Ok(())
}

fn gram_inverse(fit: &VarFit, work: &mut SpdWork) -> Result<DMatrix<f64>> {
    let k = fit.regressors.ncols();
    let gram = fit.gram();
    let flat: Vec<f64> = (0..k * k).map(|i| gram[(i / k, i % k)]).collect();
    let mut inv = vec![0.0; k * k];
    work.inverse(&flat, k, &mut inv)
        .map_err(|condition| Error::RankDeficient { condition })?;
    Ok(DMatrix::from_row_slice(k, k, &inv))
}

fn quadratic_form(
    fit: &VarFit,
    r: &SelectionMatrix,
    cov: &DMatrix<f64>,
    robust: bool,
    work: &mut SpdWork,
) -> Result<WaldResult> {
    let rm = r.entries();
    let b = DMatrix::from_column_slice(fit.coefficients.len(), 1, &fit.stacked_coefficients());
    let rb = &rm * &b;
    let middle = &rm * cov * rm.transpose();
    let p = r.lag_order;
    let flat: Vec<f64> = (0..p * p).map(|i| middle[(i / p, i % p)]).collect();
    let mut inv = vec![0.0; p * p];
    work.inverse(&flat, p, &mut inv)
        .map_err(|condition| Error::SingularMiddle { condition })?;
    let inv = DMatrix::from_row_slice(p, p, &inv);
    let w = (rb.transpose() * inv * &rb)[(0, 0)];
    Ok(WaldResult {
        statistic: w.max(0.0),
        dof: p,
        robust,
        window: fit.sample_range,
    })
}

pub fn wald_homoskedastic(fit: &VarFit, r: &SelectionMatrix) -> Result<WaldResult> {
    check_dims(fit, r)?;
    check_degenerate(fit, r.target_equation)?;
    let mut work = SpdWork::new(fit.regressors.ncols());
    let g = gram_inverse(fit, &mut work)?;
    let omega = DMatrix::from_fn(2, 2, |i, j| fit.residual_covariance[(i, j)]);
    let cov = omega.kronecker(&g);
    quadratic_form(fit, r, &cov, false, &mut work)
}

pub fn wald_robust(fit: &VarFit, r: &SelectionMatrix) -> Result<WaldResult> {
    check_dims(fit, r)?;
    check_degenerate(fit, r.target_equation)?;
    let k = fit.regressors.ncols();
    let mut work = SpdWork::new(k);
    let g = gram_inverse(fit, &mut work)?;
    let mut meat = DMatrix::<f64>::zeros(2 * k, 2 * k);
    for t in 0..fit.regressors.nrows() {
        let x = fit.regressors.row(t);
        let e = fit.residuals.row(t);
        for a in 0..2 {
            for c in 0..2 {
                let ee = e[a] * e[c];
                for i in 0..k {
                    for j in 0..k {
                        meat[(a * k + i, c * k + j)] += ee * x[i] * x[j];
                    }
                }
            }
        }
    }
    let bread = DMatrix::<f64>::identity(2, 2).kronecker(&g);
    let cov = &bread * meat * &bread;
    quadratic_form(fit, r, &cov, true, &mut work)
}

pub fn wald(fit: &VarFit, r: &SelectionMatrix, robust: bool) -> Result<WaldResult> {
    if robust {
        wald_robust(fit, r)
    } else {
        wald_homoskedastic(fit, r)
    }
}
