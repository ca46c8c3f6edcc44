//! Small dense symmetric positive-definite helpers on row-major slices.
//!
//! Regressor cross-products here are at most 25x25 and get factored
//! hundreds of thousands of times per sequence, so everything works in
//! caller-provided buffers instead of allocating matrices.

/// Largest accepted condition number (Frobenius norm, after unit-diagonal scaling).
pub const CONDITION_LIMIT: f64 = 1e12;

/// In-place lower Cholesky factor of `a` (n x n) into `l`. Returns false when
/// a pivot is not strictly positive.
pub fn cholesky(a: &[f64], n: usize, l: &mut [f64]) -> bool {
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return false;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
        for j in (i + 1)..n {
            l[i * n + j] = 0.0;
        }
    }
    true
}

/// Solves `L L' x = b` in place.
pub fn chol_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * b[k];
        }
        b[i] = sum / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut sum = b[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * b[k];
        }
        b[i] = sum / l[i * n + i];
    }
}

/// Full inverse from a Cholesky factor. `col` is scratch of length n.
pub fn chol_inverse(l: &[f64], n: usize, inv: &mut [f64], col: &mut [f64]) {
    for j in 0..n {
        col[..n].fill(0.0);
        col[j] = 1.0;
        chol_solve(l, n, col);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    // symmetrise away round-off
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (inv[i * n + j] + inv[j * n + i]);
            inv[i * n + j] = v;
            inv[j * n + i] = v;
        }
    }
}

/// Frobenius condition number of `D^-1/2 A D^-1/2`, given `A` and `A^-1`.
pub fn scaled_condition(a: &[f64], inv: &[f64], n: usize) -> f64 {
    let mut norm_a = 0.0;
    let mut norm_inv = 0.0;
    for i in 0..n {
        let di = a[i * n + i];
        for j in 0..n {
            let dj = a[j * n + j];
            let s = a[i * n + j] / (di * dj).sqrt();
            let si = inv[i * n + j] * (di * dj).sqrt();
            norm_a += s * s;
            norm_inv += si * si;
        }
    }
    (norm_a * norm_inv).sqrt()
}

/// Reusable buffers for guarded SPD inversion of dimension up to `cap`.
#[derive(Clone, Debug)]
pub struct SpdWork {
    l: Vec<f64>,
    col: Vec<f64>,
}

impl SpdWork {
    pub fn new(cap: usize) -> Self {
        Self {
            l: vec![0.0; cap * cap],
            col: vec![0.0; cap],
        }
    }

    /// Writes `a^-1` into `inv`. On failure returns the condition number
    /// (infinite when the factorisation breaks down).
    pub fn inverse(&mut self, a: &[f64], n: usize, inv: &mut [f64]) -> Result<(), f64> {
        if self.l.len() < n * n {
            *self = Self::new(n);
        }
        let l = &mut self.l[..n * n];
        if !cholesky(&a[..n * n], n, l) {
            return Err(f64::INFINITY);
        }
        chol_inverse(l, n, &mut inv[..n * n], &mut self.col);
        let cond = scaled_condition(a, inv, n);
        if !cond.is_finite() || cond > CONDITION_LIMIT {
            return Err(cond);
        }
        Ok(())
    }

    /// Cholesky factor of the last successful `inverse` call.
    pub fn factor(&self, n: usize) -> &[f64] {
        &self.l[..n * n]
    }
}

/// Convenience wrapper returning a fresh inverse.
pub fn spd_inverse(a: &[f64], n: usize) -> Result<Vec<f64>, f64> {
    let mut inv = vec![0.0; n * n];
    SpdWork::new(n).inverse(a, n, &mut inv)?;
    Ok(inv)
}
