//! Bootstrap critical values under the non-causal null.
//!
//! The null VAR (target equation without the source lags) is estimated on
//! the first `min_window + control_window - 1 + p` observations only. Each
//! replication simulates a path of that length from the first `p` actual
//! observations, computes the statistic sequence over all its admissible
//! endpoints, and keeps the maximum. The `(1 - size)` order statistic of
//! those maxima bounds the chance of any false detection over the first
//! `control_window + p` endpoints of a sample at `size`.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::procedures::{self, Algorithm, Direction, SequenceConfig};
use crate::rng::StreamRng;
use crate::var::{self, Bivariate, VarFit, VarSpec, Window};
use crate::{Error, Result, THREE_MONTHS};

pub const DEFAULT_REPLICATIONS: usize = 499;
pub const DEFAULT_SIZE: f64 = 0.05;

/// Simulated values beyond this magnitude mark an explosive path.
pub const EXPLOSIVE_BOUND: f64 = 1e8;
/// Largest tolerated share of discarded replications.
pub const MAX_DISCARD_SHARE: f64 = 0.10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Whole residual rows drawn with replacement.
    IidResidual,
    /// Residual rows in place, each multiplied by a Rademacher sign.
    WildRademacher,
}

impl Scheme {
    /// Pairing used when none is given: iid with the plain Wald, wild with the robust one.
    pub fn paired_with(robust: bool) -> Self {
        if robust {
            Scheme::WildRademacher
        } else {
            Scheme::IidResidual
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Scheme::IidResidual => "iid-residual",
            Scheme::WildRademacher => "wild-rademacher",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub replications: usize,
    pub size: f64,
    pub control_window: usize,
    pub min_window: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replications: DEFAULT_REPLICATIONS,
            size: DEFAULT_SIZE,
            control_window: THREE_MONTHS,
            min_window: THREE_MONTHS,
            seed: 0,
            scheme: Scheme::IidResidual,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Invalid("replications must be at least 1".into()));
        }
        if !(self.size > 0.0 && self.size < 1.0) {
            return Err(Error::Invalid(format!("size {} outside (0, 1)", self.size)));
        }
        if self.control_window == 0 {
            return Err(Error::Invalid("control window must be at least 1".into()));
        }
        Ok(())
    }

    /// Length of every simulated path for lag order `p`.
    pub fn path_len(&self, p: usize) -> usize {
        self.min_window + self.control_window - 1 + p
    }

    /// 1-based order statistic used as the critical value.
    pub fn order_statistic(&self) -> usize {
        let raw = (1.0 - self.size) * (self.replications + 1) as f64;
        // guard against 0.95 * 500 landing a hair above 475
        let k = (raw - 1e-9).ceil() as usize;
        k.clamp(1, self.replications)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueSequence {
    pub algorithm: Algorithm,
    pub robust: bool,
    pub quantile: f64,
    pub replications_used: usize,
    pub discarded: usize,
    /// Observation index of `values[0]`.
    pub first_index: usize,
    pub values: Vec<f64>,
}

impl CriticalValueSequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, index: usize) -> Option<f64> {
        index
            .checked_sub(self.first_index)
            .and_then(|i| self.values.get(i))
            .copied()
    }
}

/// Null model: `direction`'s target equation re-estimated without the
/// source lags; the other equation unrestricted.
pub fn fit_null_model(data: Bivariate<'_>, p: usize, window: Window, direction: Direction) -> Result<VarFit> {
    let sel = direction.selection(p);
    var::fit_restricted(data, VarSpec::new(p), window, sel.target_equation, sel.source_variable)
}

/// A simulated path, `(returns, attention)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Replication {
    pub returns: Vec<f64>,
    pub attention: Vec<f64>,
}

impl Replication {
    pub fn view(&self) -> Bivariate<'_> {
        Bivariate::new(&self.returns, &self.attention)
    }
}

#[derive(Debug)]
pub struct Explosive;

/// Simulates `length` observations of `null_fit`, the first `p` being
/// `initial`. Draw position `j` (0-based after the initial values) uses
/// residual row `j mod n` under the wild scheme.
pub fn generate_replication(
    null_fit: &VarFit,
    initial: &[[f64; 2]],
    length: usize,
    scheme: Scheme,
    rng: &mut StreamRng,
) -> std::result::Result<Replication, Explosive> {
    let p = null_fit.lag_order;
    assert!(initial.len() == p && length > p, "need p initial values and length > p");
    let n_res = null_fit.residuals.nrows();
    let mut y: Vec<[f64; 2]> = Vec::with_capacity(length);
    y.extend_from_slice(initial);
    for j in 0..length - p {
        let t = p + j;
        let shock = match scheme {
            Scheme::IidResidual => {
                let row = rng.below(n_res);
                [null_fit.residuals[(row, 0)], null_fit.residuals[(row, 1)]]
            }
            Scheme::WildRademacher => {
                let row = j % n_res;
                let s = rng.sign();
                [s * null_fit.residuals[(row, 0)], s * null_fit.residuals[(row, 1)]]
            }
        };
        let mut next = [0.0; 2];
        for (eq, out) in next.iter_mut().enumerate() {
            let c = &null_fit.coefficients;
            let mut v = c[(eq, 0)];
            for lag in 1..=p {
                let prev = y[t - lag];
                v += c[(eq, var::regressor_column(0, lag))] * prev[0];
                v += c[(eq, var::regressor_column(1, lag))] * prev[1];
            }
            *out = v + shock[eq];
        }
        if !(next[0].abs() <= EXPLOSIVE_BOUND && next[1].abs() <= EXPLOSIVE_BOUND) {
            return Err(Explosive);
        }
        y.push(next);
    }
    Ok(Replication {
        returns: y.iter().map(|v| v[0]).collect(),
        attention: y.iter().map(|v| v[1]).collect(),
    })
}

/// Maxima of the simulated statistic sequences, one per replication,
/// plus the number of discarded draws.
pub fn replication_maxima(
    data: Bivariate<'_>,
    algorithm: Algorithm,
    seq: &SequenceConfig,
    cfg: &BootstrapConfig,
) -> Result<(Vec<f64>, usize)> {
    cfg.validate()?;
    if cfg.min_window != seq.min_window {
        return Err(Error::Invalid(format!(
            "bootstrap minimum window {} differs from the sequence's {}",
            cfg.min_window, seq.min_window
        )));
    }
    let p = seq.lag_order;
    let len = cfg.path_len(p);
    if data.len() < len {
        return Err(Error::TooShort {
            name: "bootstrap initialisation sample".into(),
            needed: len,
            got: data.len(),
        });
    }
    let null_fit = fit_null_model(data, p, Window::new(0, len - 1), seq.direction)?;
    let initial: Vec<[f64; 2]> = (0..p).map(|t| [data.returns[t], data.attention[t]]).collect();
    let first_end = cfg.min_window - 1;
    let max_attempts = ((cfg.replications as f64 * MAX_DISCARD_SHARE).floor() as usize) + 1;

    let results: Vec<(Option<f64>, usize)> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = StreamRng::new(cfg.seed, r as u64);
            let mut discarded = 0;
            while discarded < max_attempts {
                let Ok(path) = generate_replication(&null_fit, &initial, len, cfg.scheme, &mut rng) else {
                    discarded += 1;
                    continue;
                };
                let max = procedures::sequence_over(path.view(), algorithm, seq, first_end, len - 1)
                    .ok()
                    .and_then(|s| s.max());
                match max {
                    Some(m) => return (Some(m), discarded),
                    None => discarded += 1,
                }
            }
            (None, discarded)
        })
        .collect();

    let discarded: usize = results.iter().map(|r| r.1).sum();
    let maxima: Vec<f64> = results.iter().filter_map(|r| r.0).collect();
    if discarded as f64 > MAX_DISCARD_SHARE * cfg.replications as f64 || maxima.len() < cfg.replications {
        return Err(Error::BootstrapDiscards {
            discarded,
            attempted: cfg.replications + discarded,
        });
    }
    Ok((maxima, discarded))
}

/// Critical value for `algorithm`, broadcast over the sample's admissible
/// endpoints `seq.min_window - 1 ..= len - 1`.
pub fn critical_values(
    data: Bivariate<'_>,
    algorithm: Algorithm,
    seq: &SequenceConfig,
    cfg: &BootstrapConfig,
) -> Result<CriticalValueSequence> {
    if cfg.scheme != Scheme::paired_with(seq.robust) {
        warn!(
            "{} bootstrap paired with the {} Wald statistic",
            cfg.scheme.label(),
            if seq.robust { "robust" } else { "homoskedastic" }
        );
    }
    let (mut maxima, discarded) = replication_maxima(data, algorithm, seq, cfg)?;
    maxima.sort_by(|a, b| a.total_cmp(b));
    let cv = maxima[cfg.order_statistic() - 1];
    if !(cv > 0.0) {
        return Err(Error::Degenerate(format!(
            "bootstrap critical value {cv} is not positive"
        )));
    }
    let first_index = seq.min_window - 1;
    let n = data.len().saturating_sub(first_index);
    Ok(CriticalValueSequence {
        algorithm,
        robust: seq.robust,
        quantile: 1.0 - cfg.size,
        replications_used: maxima.len(),
        discarded,
        first_index,
        values: vec![cv; n],
    })
}
