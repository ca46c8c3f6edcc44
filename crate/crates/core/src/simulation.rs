//! Monte Carlo harness: a bivariate VAR whose returns equation picks up
//! lagged attention only inside a known window, and an experiment runner
//! that pushes simulated samples through the full pipeline.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{self, BootstrapConfig};
use crate::dataset::AlignedDataset;
use crate::dating::{self, CausalEpisode};
use crate::procedures::{self, Algorithm, Engine, SequenceConfig};
use crate::rng::{derive_seed, StreamRng};
use crate::var::{self, Bivariate, Window, ATTENTION, RETURNS};
use crate::{Error, Result};

/// Discarded start-up draws before the first kept observation.
pub const BURN_IN: usize = 200;
/// Origination estimates this close to the truth count as accurate.
pub const DATING_TOLERANCE: i64 = 10;
/// Cells with a larger share of failed trials are aborted.
pub const MAX_FAILURE_SHARE: f64 = 0.20;

pub fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid epoch")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Noise {
    /// Independent normal innovations with standard deviation `sd` in both equations.
    Gaussian { sd: f64 },
    /// Standard normal attention innovations; returns innovations with
    /// conditional variance `alpha0 + alpha1 * u²`, `u` the previous
    /// attention innovation.
    Arch { alpha0: f64, alpha1: f64 },
}

impl Noise {
    /// Unconditional innovation variances `(returns, attention)`.
    pub fn variances(&self) -> (f64, f64) {
        match *self {
            Noise::Gaussian { sd } => (sd * sd, sd * sd),
            Noise::Arch { alpha0, alpha1 } => (alpha0 + alpha1, 1.0),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Noise::Gaussian { sd } => sd >= 0.0 && sd.is_finite(),
            Noise::Arch { alpha0, alpha1 } => alpha0 > 0.0 && alpha1 >= 0.0 && alpha1.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("invalid noise parameters {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchDgp {
    #[serde(rename = "T")]
    pub t: usize,
    pub p_true: usize,
    /// Rows for the returns and attention equations in regressor layout
    /// (intercept, then returns and attention per lag).
    pub base_coeffs: [Vec<f64>; 2],
    /// Coefficient `b` on each attention lag's deviation from its mean.
    pub causal_coeff: f64,
    /// Inclusive 0-based observation indices.
    pub causal_window: (usize, usize),
    pub noise: Noise,
    pub seed: u64,
}

impl SwitchDgp {
    /// Returns AR(1) and attention AR(1) around `attention_mean`, no causality.
    pub fn ar1_pair(
        t: usize,
        returns_ar: f64,
        attention_ar: f64,
        attention_mean: f64,
        noise: Noise,
        seed: u64,
    ) -> Self {
        Self {
            t,
            p_true: 1,
            base_coeffs: [
                vec![0.0, returns_ar, 0.0],
                vec![attention_mean * (1.0 - attention_ar), 0.0, attention_ar],
            ],
            causal_coeff: 0.0,
            causal_window: (1, t - 1),
            noise,
            seed,
        }
    }

    pub fn with_causality(mut self, coeff: f64, window: (usize, usize)) -> Self {
        self.causal_coeff = coeff;
        self.causal_window = window;
        self
    }

    /// Sets `b` so that [`SwitchDgp::standardized_effect`] equals `effect`.
    pub fn with_effect(mut self, effect: f64, window: (usize, usize)) -> Result<Self> {
        let (var_r, _) = self.noise.variances();
        let sd_a = self.attention_variance()?.sqrt();
        if sd_a == 0.0 {
            return Err(Error::Degenerate("attention has zero variance".into()));
        }
        self.causal_coeff = effect * var_r.sqrt() / sd_a;
        self.causal_window = window;
        Ok(self)
    }

    fn width(&self) -> usize {
        2 * self.p_true + 1
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p_true;
        if p == 0 {
            return Err(Error::Invalid("p_true must be at least 1".into()));
        }
        if self.base_coeffs.iter().any(|row| row.len() != self.width()) {
            return Err(Error::Invalid(format!(
                "coefficient rows need {} entries",
                self.width()
            )));
        }
        if self.base_coeffs.iter().flatten().any(|c| !c.is_finite()) || !self.causal_coeff.is_finite() {
            return Err(Error::Invalid("non-finite coefficient".into()));
        }
        if (1..=p).any(|l| self.base_coeffs[RETURNS][var::regressor_column(ATTENTION, l)] != 0.0) {
            return Err(Error::Invalid(
                "base attention-to-returns coefficients must be zero".into(),
            ));
        }
        let (te, tf) = self.causal_window;
        if te < p || tf >= self.t || te > tf {
            return Err(Error::Invalid(format!(
                "causal window [{te}, {tf}] must lie within [{p}, {}]",
                self.t - 1
            )));
        }
        if self.t < p + 2 {
            return Err(Error::Invalid(format!("T={} too short for p={p}", self.t)));
        }
        self.noise.validate()?;
        let radius = self.spectral_radius();
        if !(radius < 1.0) {
            return Err(Error::Invalid(format!(
                "base dynamics unstable (spectral radius {radius:.4})"
            )));
        }
        Ok(())
    }

    fn companion(&self) -> DMatrix<f64> {
        let p = self.p_true;
        let mut f = DMatrix::zeros(2 * p, 2 * p);
        for eq in 0..2 {
            for l in 1..=p {
                for v in 0..2 {
                    f[(eq, 2 * (l - 1) + v)] = self.base_coeffs[eq][var::regressor_column(v, l)];
                }
            }
        }
        for i in 2..2 * p {
            f[(i, i - 2)] = 1.0;
        }
        f
    }

    pub fn spectral_radius(&self) -> f64 {
        self.companion()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Unconditional means `(returns, attention)` of the base dynamics.
    pub fn means(&self) -> (f64, f64) {
        let mut a = nalgebra::Matrix2::identity();
        for l in 1..=self.p_true {
            for eq in 0..2 {
                for v in 0..2 {
                    a[(eq, v)] -= self.base_coeffs[eq][var::regressor_column(v, l)];
                }
            }
        }
        let c = nalgebra::Vector2::new(self.base_coeffs[0][0], self.base_coeffs[1][0]);
        let mu = a.lu().solve(&c).unwrap_or_else(nalgebra::Vector2::zeros);
        (mu[0], mu[1])
    }

    /// Unconditional attention variance of the base dynamics.
    pub fn attention_variance(&self) -> Result<f64> {
        self.validate_shape_and_stability()?;
        let f = self.companion();
        let n = f.nrows();
        let (var_r, var_a) = self.noise.variances();
        let mut q = DMatrix::zeros(n, n);
        q[(0, 0)] = var_r;
        q[(1, 1)] = var_a;
        let mut s = q.clone();
        for _ in 0..100_000 {
            let next = &f * &s * f.transpose() + &q;
            let done = (&next - &s).amax() <= 1e-14 * next.amax().max(f64::MIN_POSITIVE);
            s = next;
            if done {
                break;
            }
        }
        Ok(s[(1, 1)])
    }

    fn validate_shape_and_stability(&self) -> Result<()> {
        let w = self.width();
        if self.p_true == 0 || self.base_coeffs.iter().any(|r| r.len() != w) {
            return Err(Error::Invalid("malformed coefficient rows".into()));
        }
        if !(self.spectral_radius() < 1.0) {
            return Err(Error::Invalid("base dynamics unstable".into()));
        }
        Ok(())
    }

    /// `|b| * sd(attention) / sd(returns innovation)`.
    pub fn standardized_effect(&self) -> Result<f64> {
        let (var_r, _) = self.noise.variances();
        if var_r == 0.0 {
            return Ok(if self.causal_coeff == 0.0 { 0.0 } else { f64::INFINITY });
        }
        Ok(self.causal_coeff.abs() * self.attention_variance()?.sqrt() / var_r.sqrt())
    }
}

/// Simulates the DGP. Dates run daily from [`epoch`].
pub fn simulate_dgp(dgp: &SwitchDgp) -> Result<AlignedDataset> {
    dgp.validate()?;
    let p = dgp.p_true;
    let (mu_r, mu_a) = dgp.means();
    let mut rng = StreamRng::new(dgp.seed, 0);
    let total = BURN_IN + dgp.t;
    let mut r = vec![mu_r; p];
    let mut a = vec![mu_a; p];
    let mut prev_attention_shock = 0.0;
    let (te, tf) = dgp.causal_window;
    for step in p..total + p {
        let (er, ea) = match dgp.noise {
            Noise::Gaussian { sd } => (sd * rng.normal(), sd * rng.normal()),
            Noise::Arch { alpha0, alpha1 } => {
                let h = alpha0 + alpha1 * prev_attention_shock * prev_attention_shock;
                (h.sqrt() * rng.normal(), rng.normal())
            }
        };
        prev_attention_shock = ea;
        let mut next = [0.0; 2];
        for (eq, out) in next.iter_mut().enumerate() {
            let c = &dgp.base_coeffs[eq];
            let mut v = c[0];
            for l in 1..=p {
                v += c[var::regressor_column(RETURNS, l)] * r[step - l];
                v += c[var::regressor_column(ATTENTION, l)] * a[step - l];
            }
            *out = v;
        }
        // sample index of this draw once the burn-in and start values are dropped
        let kept = (step + 1).checked_sub(p + BURN_IN + 1);
        if let Some(i) = kept {
            if (te..=tf).contains(&i) {
                for l in 1..=p {
                    next[0] += dgp.causal_coeff * (a[step - l] - mu_a);
                }
            }
        }
        r.push(next[0] + er);
        a.push(next[1] + ea);
        if !(r[step].abs() < 1e8 && a[step].abs() < 1e8) {
            return Err(Error::Degenerate("simulated path exploded".into()));
        }
    }
    let returns = r[p + BURN_IN..].to_vec();
    let attention = a[p + BURN_IN..].to_vec();
    if let Some(bad) = attention.iter().find(|v| !(0.0..=100.0).contains(*v)) {
        return Err(Error::Invalid(format!(
            "simulated attention {bad} outside [0, 100]; raise the attention mean or lower the noise"
        )));
    }
    let start = epoch();
    let dates = (0..dgp.t).map(|i| start + chrono::Days::new(i as u64)).collect();
    let mut meta = BTreeMap::new();
    meta.insert("dgp_seed".to_string(), dgp.seed.to_string());
    meta.insert("causal_coeff".to_string(), dgp.causal_coeff.to_string());
    meta.insert("causal_window".to_string(), format!("{}-{}", te, tf));
    AlignedDataset::new(dates, attention, returns, "synthetic".to_string(), meta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LagChoice {
    Fixed(usize),
    /// BIC over `1..=max` on the full simulated sample.
    Bic(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub algorithm: Algorithm,
    pub robust: bool,
    pub lag: LagChoice,
    /// Replications, size, windows and scheme; the seed is derived per trial.
    pub bootstrap: BootstrapConfig,
    #[serde(default = "one")]
    pub min_duration: usize,
    #[serde(default)]
    pub engine: Engine,
}

fn one() -> usize {
    1
}

impl TestConfig {
    pub fn new(algorithm: Algorithm, robust: bool, lag: LagChoice, bootstrap: BootstrapConfig) -> Self {
        Self {
            algorithm,
            robust,
            lag,
            bootstrap,
            min_duration: 1,
            engine: Engine::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub name: String,
    pub dgp: SwitchDgp,
    pub test: TestConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub lag_order: usize,
    pub critical_value: f64,
    /// A statistic above the critical value among the first
    /// `control_window + p` endpoints.
    pub rejected_in_control: bool,
    pub episodes: usize,
    /// An episode overlaps the causal window (causal cells only).
    pub detected: Option<bool>,
    pub origination_bias: Option<i64>,
    pub termination_bias: Option<i64>,
    pub coverage: Option<f64>,
}

fn is_causal(dgp: &SwitchDgp) -> bool {
    dgp.causal_coeff != 0.0
}

/// One end-to-end trial: simulate, pick the lag, bootstrap, sequence, date.
pub fn run_trial(cell: &ExperimentCell, trial: usize, seed: u64) -> Result<TrialOutcome> {
    let dgp = SwitchDgp {
        seed: derive_seed(seed, &[cell.dgp.seed, trial as u64, 0]),
        ..cell.dgp.clone()
    };
    let data = simulate_dgp(&dgp)?;
    let view = Bivariate::from(&data);
    let test = &cell.test;
    let p = match test.lag {
        LagChoice::Fixed(p) => p,
        LagChoice::Bic(max) => var::select_lag_bic(view, Window::full(data.len()), max)?,
    };
    let mut seq = SequenceConfig::new(p, test.bootstrap.min_window, test.robust).with_engine(test.engine);
    seq.direction = procedures::Direction::AttentionToReturns;
    let boot = BootstrapConfig {
        seed: derive_seed(seed, &[cell.dgp.seed, trial as u64, 1]),
        ..test.bootstrap
    };
    let cv = bootstrap::critical_values(view, test.algorithm, &seq, &boot)?;
    let stats = procedures::sequence(view, test.algorithm, &seq)?;
    if stats.missing_fraction() > 0.10 {
        return Err(Error::Degenerate(format!(
            "{:.0}% of the sequence failed numerically",
            100.0 * stats.missing_fraction()
        )));
    }
    let episodes = dating::date_episodes(&stats, &cv, test.min_duration)?;
    let control_end = cv.first_index + boot.control_window + p - 1;
    let rejected_in_control = stats
        .points
        .iter()
        .zip(&cv.values)
        .any(|(pt, &c)| pt.index <= control_end && pt.statistic.is_some_and(|s| s > c));

    let mut out = TrialOutcome {
        trial,
        lag_order: p,
        critical_value: cv.values.first().copied().unwrap_or(f64::NAN),
        rejected_in_control,
        episodes: episodes.len(),
        detected: None,
        origination_bias: None,
        termination_bias: None,
        coverage: None,
    };
    if is_causal(&dgp) {
        let (te, tf) = dgp.causal_window;
        let hit = episodes.iter().find(|e| e.overlaps(te, tf));
        out.detected = Some(hit.is_some());
        out.origination_bias = hit.map(|e| e.start_index as i64 - te as i64);
        out.termination_bias = hit.map(|e| e.end_index as i64 - tf as i64);
        out.coverage = Some(coverage(&episodes, te, tf));
    }
    Ok(out)
}

/// Share of `te ..= tf` covered by any episode.
pub fn coverage(episodes: &[CausalEpisode], te: usize, tf: usize) -> f64 {
    let covered = (te..=tf).filter(|&i| episodes.iter().any(|e| e.contains(i))).count();
    covered as f64 / (tf - te + 1) as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: String,
    pub algorithm: Algorithm,
    pub robust: bool,
    pub t: usize,
    pub causal_coeff: f64,
    pub standardized_effect: f64,
    pub trials: usize,
    pub completed: usize,
    pub failures: usize,
    pub status: String,
    pub rejection_rate: f64,
    pub detection_rate: f64,
    pub mean_origination_bias: f64,
    pub mean_abs_origination_bias: f64,
    /// Share of all trials with an origination estimate within tolerance.
    pub origination_within_tolerance: f64,
    pub mean_termination_bias: f64,
    pub mean_coverage: f64,
    pub mean_lag: f64,
    pub mean_critical_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub summary: CellSummary,
    pub outcomes: Vec<TrialOutcome>,
    /// `(trial, message)` for every failed trial.
    pub failures: Vec<(usize, String)>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

pub fn run_cell(cell: &ExperimentCell, trials: usize, seed: u64) -> CellResult {
    let results: Vec<Result<TrialOutcome>> = (0..trials).into_par_iter().map(|i| run_trial(cell, i, seed)).collect();
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    let effect = cell.dgp.standardized_effect().unwrap_or(f64::NAN);
    let mut summary = CellSummary {
        cell: cell.name.clone(),
        algorithm: cell.test.algorithm,
        robust: cell.test.robust,
        t: cell.dgp.t,
        causal_coeff: cell.dgp.causal_coeff,
        standardized_effect: effect,
        trials,
        completed: outcomes.len(),
        failures: failures.len(),
        status: "ok".into(),
        rejection_rate: f64::NAN,
        detection_rate: f64::NAN,
        mean_origination_bias: f64::NAN,
        mean_abs_origination_bias: f64::NAN,
        origination_within_tolerance: f64::NAN,
        mean_termination_bias: f64::NAN,
        mean_coverage: f64::NAN,
        mean_lag: f64::NAN,
        mean_critical_value: f64::NAN,
    };
    if failures.len() as f64 > MAX_FAILURE_SHARE * trials as f64 || outcomes.is_empty() {
        let first = failures.first().map(|f| f.1.as_str()).unwrap_or("no trials");
        summary.status = format!("aborted: {} of {trials} trials failed ({first})", failures.len());
        return CellResult {
            summary,
            outcomes,
            failures,
        };
    }
    let n = outcomes.len() as f64;
    summary.rejection_rate = outcomes.iter().filter(|o| o.rejected_in_control).count() as f64 / n;
    summary.mean_lag = mean(outcomes.iter().map(|o| o.lag_order as f64));
    summary.mean_critical_value = mean(outcomes.iter().map(|o| o.critical_value));
    if is_causal(&cell.dgp) {
        summary.detection_rate = outcomes.iter().filter(|o| o.detected == Some(true)).count() as f64 / n;
        summary.mean_origination_bias = mean(outcomes.iter().filter_map(|o| o.origination_bias).map(|b| b as f64));
        summary.mean_abs_origination_bias = mean(
            outcomes
                .iter()
                .filter_map(|o| o.origination_bias)
                .map(|b| b.abs() as f64),
        );
        summary.origination_within_tolerance = outcomes
            .iter()
            .filter(|o| o.origination_bias.is_some_and(|b| b.abs() <= DATING_TOLERANCE))
            .count() as f64
            / n;
        summary.mean_termination_bias = mean(outcomes.iter().filter_map(|o| o.termination_bias).map(|b| b as f64));
        summary.mean_coverage = mean(outcomes.iter().filter_map(|o| o.coverage));
    }
    CellResult {
        summary,
        outcomes,
        failures,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentTable {
    pub trials: usize,
    pub seed: u64,
    pub cells: Vec<CellResult>,
}

/// Runs every cell; cells run in order, trials within a cell in parallel.
pub fn run_experiment(cells: &[ExperimentCell], trials: usize, seed: u64) -> Result<ExperimentTable> {
    if trials == 0 {
        return Err(Error::Invalid("trials must be at least 1".into()));
    }
    for c in cells {
        c.dgp.validate()?;
        c.test.bootstrap.validate()?;
    }
    let cells = cells.iter().map(|c| run_cell(c, trials, seed)).collect();
    Ok(ExperimentTable { trials, seed, cells })
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

impl ExperimentTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "cell",
            "algorithm",
            "robust",
            "T",
            "causal_coeff",
            "standardized_effect",
            "trials",
            "completed",
            "failures",
            "status",
            "rejection_rate",
            "detection_rate",
            "mean_origination_bias",
            "mean_abs_origination_bias",
            "origination_within_tolerance",
            "mean_termination_bias",
            "mean_coverage",
            "mean_lag",
            "mean_critical_value",
        ])?;
        for c in &self.cells {
            let s = &c.summary;
            w.write_record([
                s.cell.clone(),
                s.algorithm.to_string(),
                s.robust.to_string(),
                s.t.to_string(),
                num(s.causal_coeff),
                num(s.standardized_effect),
                s.trials.to_string(),
                s.completed.to_string(),
                s.failures.to_string(),
                s.status.clone(),
                num(s.rejection_rate),
                num(s.detection_rate),
                num(s.mean_origination_bias),
                num(s.mean_abs_origination_bias),
                num(s.origination_within_tolerance),
                num(s.mean_termination_bias),
                num(s.mean_coverage),
                num(s.mean_lag),
                num(s.mean_critical_value),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} cells, {} trials each, seed {}",
            self.cells.len(),
            self.trials,
            self.seed
        );
        for c in &self.cells {
            let s = &c.summary;
            let _ = write!(
                out,
                "{}: {} {} T={} b={}",
                s.cell,
                s.algorithm,
                if s.robust { "robust" } else { "homoskedastic" },
                s.t,
                s.causal_coeff
            );
            if s.status != "ok" {
                let _ = writeln!(out, " {}", s.status);
                continue;
            }
            let _ = write!(out, " rejection {:.3}", s.rejection_rate);
            if !s.detection_rate.is_nan() {
                let _ = write!(
                    out,
                    " detection {:.3} origination bias {:.2} (|.| {:.2}, within ±{} {:.3}) termination bias {:.2} coverage {:.3}",
                    s.detection_rate,
                    s.mean_origination_bias,
                    s.mean_abs_origination_bias,
                    DATING_TOLERANCE,
                    s.origination_within_tolerance,
                    s.mean_termination_bias,
                    s.mean_coverage
                );
            }
            if s.failures > 0 {
                let _ = write!(out, " ({} failed)", s.failures);
            }
            out.push('\n');
        }
        out
    }
}
