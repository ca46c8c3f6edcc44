//! Wald statistic sequences over time: forward (expanding) windows,
//! rolling windows of fixed width, and the recursive-evolving sup-Wald
//! `SW_e = max_{s <= e - m + 1} W(s, e)` with `m` the minimum window.
//!
//! Two engines produce the same numbers. [`Engine::Reference`] refits every
//! window from scratch through [`crate::var`] and [`crate::wald`].
//! [`Engine::Incremental`] (the default) keeps running cross-product sums
//! and only needs one new regression row per additional window, which is
//! what makes 499-replication bootstraps of the recursive-evolving
//! statistic affordable.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::SpdWork;
use crate::var::{self, regressor_column, Bivariate, VarSpec, Window, ATTENTION, RETURNS};
use crate::wald::{self, SelectionMatrix, DEGENERATE_RATIO};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Forward,
    Rolling,
    RecursiveEvolving,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Forward => "forward",
            Algorithm::Rolling => "rolling",
            Algorithm::RecursiveEvolving => "recursive-evolving",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "forward" => Some(Algorithm::Forward),
            "rolling" => Some(Algorithm::Rolling),
            "recursive-evolving" => Some(Algorithm::RecursiveEvolving),
            _ => None,
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Which causal direction is tested.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    #[default]
    AttentionToReturns,
    ReturnsToAttention,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::AttentionToReturns => "attention-to-returns",
            Direction::ReturnsToAttention => "returns-to-attention",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "attention-to-returns" => Some(Direction::AttentionToReturns),
            "returns-to-attention" => Some(Direction::ReturnsToAttention),
            _ => None,
        }
    }

    pub fn selection(self, p: usize) -> SelectionMatrix {
        match self {
            Direction::AttentionToReturns => SelectionMatrix::new(p, RETURNS, ATTENTION),
            Direction::ReturnsToAttention => SelectionMatrix::new(p, ATTENTION, RETURNS),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    #[default]
    Incremental,
    Reference,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceConfig {
    pub lag_order: usize,
    pub min_window: usize,
    pub robust: bool,
    #[serde(default)]
    pub direction: Direction,
    #[serde(default)]
    pub engine: Engine,
}

impl SequenceConfig {
    pub fn new(lag_order: usize, min_window: usize, robust: bool) -> Self {
        Self {
            lag_order,
            min_window,
            robust,
            direction: Direction::default(),
            engine: Engine::default(),
        }
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    fn validate(&self, len: usize) -> Result<()> {
        if self.lag_order == 0 {
            return Err(Error::Invalid("lag order must be at least 1".into()));
        }
        let needed = VarSpec::new(self.lag_order).min_window();
        if self.min_window < needed {
            return Err(Error::Invalid(format!(
                "minimum window {} too small for p={} (needs {needed})",
                self.min_window, self.lag_order
            )));
        }
        if len < self.min_window {
            return Err(Error::TooShort {
                name: "sample".into(),
                needed: self.min_window,
                got: len,
            });
        }
        Ok(())
    }
}

/// Sub-sample `[f1, f2]` in sample fractions, with minimum width `f0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionWindow {
    pub f1: f64,
    pub f2: f64,
    pub f0: f64,
}

impl FractionWindow {
    pub fn new(f1: f64, f2: f64, f0: f64) -> Result<Self> {
        if !(f0 > 0.0 && f1 >= 0.0 && f2 <= 1.0 && f2 - f1 >= f0) {
            return Err(Error::Invalid(format!(
                "fraction window ({f1}, {f2}) violates 0 < f0={f0} <= f2 - f1, f2 <= 1"
            )));
        }
        Ok(Self { f1, f2, f0 })
    }

    /// Window of observations `[start, end]` in a sample of `len`.
    pub fn from_indices(window: Window, min_window: usize, len: usize) -> Result<Self> {
        let n = len as f64;
        Self::new(
            window.start as f64 / n,
            (window.end + 1) as f64 / n,
            min_window as f64 / n,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatPoint {
    /// Observation index of the window end.
    pub index: usize,
    /// Missing when every admissible window at this endpoint failed.
    pub statistic: Option<f64>,
    /// Start index of the maximising window (recursive-evolving only).
    pub argmax_start: Option<usize>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatSequence {
    pub algorithm: Algorithm,
    pub robust: bool,
    pub lag_order: usize,
    pub min_window: usize,
    pub sample_len: usize,
    pub points: Vec<StatPoint>,
}

impl StatSequence {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first_index(&self) -> Option<usize> {
        self.points.first().map(|p| p.index)
    }

    pub fn values(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        self.points.iter().map(|p| p.statistic)
    }

    /// Largest non-missing statistic.
    pub fn max(&self) -> Option<f64> {
        self.values()
            .flatten()
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    }

    pub fn missing_fraction(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        self.points.iter().filter(|p| p.statistic.is_none()).count() as f64 / self.len() as f64
    }

    /// `f1` of the maximising window at point `i`, as a sample fraction.
    pub fn argmax_fraction(&self, i: usize) -> Option<f64> {
        self.points[i].argmax_start.map(|s| s as f64 / self.sample_len as f64)
    }
}

pub fn forward_sequence(data: Bivariate<'_>, cfg: &SequenceConfig) -> Result<StatSequence> {
    sequence(data, Algorithm::Forward, cfg)
}

pub fn rolling_sequence(data: Bivariate<'_>, cfg: &SequenceConfig) -> Result<StatSequence> {
    sequence(data, Algorithm::Rolling, cfg)
}

pub fn recursive_evolving_sequence(data: Bivariate<'_>, cfg: &SequenceConfig) -> Result<StatSequence> {
    sequence(data, Algorithm::RecursiveEvolving, cfg)
}

/// Statistic at every admissible endpoint `min_window - 1 ..= len - 1`.
pub fn sequence(data: Bivariate<'_>, algorithm: Algorithm, cfg: &SequenceConfig) -> Result<StatSequence> {
    cfg.validate(data.len())?;
    sequence_over(data, algorithm, cfg, cfg.min_window - 1, data.len() - 1)
}

/// Statistic at endpoints `first_end ..= last_end` only.
pub fn sequence_over(
    data: Bivariate<'_>,
    algorithm: Algorithm,
    cfg: &SequenceConfig,
    first_end: usize,
    last_end: usize,
) -> Result<StatSequence> {
    cfg.validate(data.len())?;
    if first_end < cfg.min_window - 1 || last_end >= data.len() || first_end > last_end {
        return Err(Error::Invalid(format!(
            "endpoint range [{first_end}, {last_end}] not admissible"
        )));
    }
    let points = match cfg.engine {
        Engine::Reference => reference_points(data, algorithm, cfg, first_end, last_end),
        Engine::Incremental => {
            let engine = Incremental::new(data, cfg);
            engine.points(algorithm, first_end, last_end)
        }
    };
    Ok(StatSequence {
        algorithm,
        robust: cfg.robust,
        lag_order: cfg.lag_order,
        min_window: cfg.min_window,
        sample_len: data.len(),
        points,
    })
}

fn point_from(index: usize, best: Option<(f64, usize)>, failure: Option<String>, algorithm: Algorithm) -> StatPoint {
    match best {
        Some((stat, start)) => StatPoint {
            index,
            statistic: Some(stat),
            argmax_start: (algorithm == Algorithm::RecursiveEvolving).then_some(start),
            note: None,
        },
        None => StatPoint {
            index,
            statistic: None,
            argmax_start: None,
            note: Some(failure.unwrap_or_else(|| "no admissible window".into())),
        },
    }
}

/// Tracks the maximum over windows; ties keep the first (latest start).
#[derive(Default)]
struct Best {
    best: Option<(f64, usize)>,
    failure: Option<String>,
}

impl Best {
    fn offer(&mut self, start: usize, r: Result<f64>) {
        match r {
            Ok(w) => {
                if self.best.is_none_or(|(b, _)| w > b) {
                    self.best = Some((w, start));
                }
            }
            Err(e) => {
                if self.failure.is_none() {
                    self.failure = Some(e.to_string());
                }
            }
        }
    }
}

fn reference_points(
    data: Bivariate<'_>,
    algorithm: Algorithm,
    cfg: &SequenceConfig,
    first_end: usize,
    last_end: usize,
) -> Vec<StatPoint> {
    let spec = VarSpec::new(cfg.lag_order);
    let sel = cfg.direction.selection(cfg.lag_order);
    let stat = |start: usize, end: usize| -> Result<f64> {
        let fit = var::fit_series(data, spec, Window::new(start, end))?;
        Ok(wald::wald(&fit, &sel, cfg.robust)?.statistic)
    };
    let m = cfg.min_window;
    (first_end..=last_end)
        .into_par_iter()
        .map(|e| {
            let mut best = Best::default();
            match algorithm {
                Algorithm::Forward => best.offer(0, stat(0, e)),
                Algorithm::Rolling => best.offer(e + 1 - m, stat(e + 1 - m, e)),
                Algorithm::RecursiveEvolving => {
                    for s in (0..=e + 1 - m).rev() {
                        best.offer(s, stat(s, e));
                    }
                }
            }
            point_from(e, best.best, best.failure, algorithm)
        })
        .collect()
}

/// Largest regressor count for which the robust statistic is assembled
/// from accumulated third and fourth moments; wider models loop over rows.
const MOMENT_MAX_K: usize = 7;

/// Centred copy of the data plus the per-window solver.
struct Incremental {
    returns: Vec<f64>,
    attention: Vec<f64>,
    p: usize,
    k: usize,
    target: usize,
    sel_cols: Vec<usize>,
    robust: bool,
    use_moments: bool,
    min_window: usize,
    idx3: Vec<usize>,
    idx4: Vec<usize>,
    n3: usize,
    n4: usize,
}

/// Running sums over a set of regression rows.
#[derive(Clone)]
struct Sums {
    n: usize,
    xx: Vec<f64>,
    xy: Vec<f64>,
    yy: f64,
    yyxx: Vec<f64>,
    yxxx: Vec<f64>,
    xxxx: Vec<f64>,
    x: Vec<f64>,
}

struct Scratch {
    work: SpdWork,
    inv: Vec<f64>,
    b: Vec<f64>,
    meat: Vec<f64>,
    u: Vec<f64>,
    middle: Vec<f64>,
    middle_inv: Vec<f64>,
    x: Vec<f64>,
}

impl Incremental {
    fn new(data: Bivariate<'_>, cfg: &SequenceConfig) -> Self {
        // Centre on the first minimum window so prefixes see identical inputs.
        let m = cfg.min_window.min(data.len());
        let centre = |v: &[f64]| {
            let c = v[..m].iter().sum::<f64>() / m as f64;
            v.iter().map(|x| x - c).collect::<Vec<_>>()
        };
        let p = cfg.lag_order;
        let k = 2 * p + 1;
        let sel = cfg.direction.selection(p);
        let use_moments = cfg.robust && k <= MOMENT_MAX_K;
        let (mut idx3, mut idx4, mut n3, mut n4) = (Vec::new(), Vec::new(), 0, 0);
        if use_moments {
            idx3 = vec![0; k * k * k];
            idx4 = vec![0; k * k * k * k];
            let mut map3 = std::collections::HashMap::new();
            let mut map4 = std::collections::HashMap::new();
            for a in 0..k {
                for b in 0..k {
                    for c in 0..k {
                        let mut key = [a, b, c];
                        key.sort_unstable();
                        let next = map3.len();
                        idx3[(a * k + b) * k + c] = *map3.entry(key).or_insert(next);
                        for d in 0..k {
                            let mut key = [a, b, c, d];
                            key.sort_unstable();
                            let next = map4.len();
                            idx4[((a * k + b) * k + c) * k + d] = *map4.entry(key).or_insert(next);
                        }
                    }
                }
            }
            n3 = map3.len();
            n4 = map4.len();
        }
        Self {
            returns: centre(data.returns),
            attention: centre(data.attention),
            p,
            k,
            target: sel.target_equation,
            sel_cols: sel.columns(),
            robust: cfg.robust,
            use_moments,
            min_window: cfg.min_window,
            idx3,
            idx4,
            n3,
            n4,
        }
    }

    fn var(&self, v: usize) -> &[f64] {
        if v == RETURNS {
            &self.returns
        } else {
            &self.attention
        }
    }

    fn fill_row(&self, t: usize, x: &mut [f64]) -> f64 {
        x[0] = 1.0;
        for lag in 1..=self.p {
            x[regressor_column(RETURNS, lag)] = self.returns[t - lag];
            x[regressor_column(ATTENTION, lag)] = self.attention[t - lag];
        }
        self.var(self.target)[t]
    }

    fn empty_sums(&self) -> Sums {
        let k = self.k;
        Sums {
            n: 0,
            xx: vec![0.0; k * k],
            xy: vec![0.0; k],
            yy: 0.0,
            yyxx: if self.use_moments { vec![0.0; k * k] } else { Vec::new() },
            yxxx: vec![0.0; self.n3],
            xxxx: vec![0.0; self.n4],
            x: vec![0.0; k],
        }
    }

    fn scratch(&self) -> Scratch {
        let k = self.k;
        let p = self.p;
        Scratch {
            work: SpdWork::new(k),
            inv: vec![0.0; k * k],
            b: vec![0.0; k],
            meat: vec![0.0; k * k],
            u: vec![0.0; p * k],
            middle: vec![0.0; p * p],
            middle_inv: vec![0.0; p * p],
            x: vec![0.0; k],
        }
    }

    /// Adds regression row `t` (response at `t`, lags `t-1..t-p`).
    fn add_row(&self, s: &mut Sums, t: usize) {
        let k = self.k;
        let mut x = std::mem::take(&mut s.x);
        let y = self.fill_row(t, &mut x);
        s.n += 1;
        s.yy += y * y;
        for a in 0..k {
            s.xy[a] += x[a] * y;
            for b in a..k {
                s.xx[a * k + b] += x[a] * x[b];
            }
        }
        if self.use_moments {
            let y2 = y * y;
            for a in 0..k {
                for b in a..k {
                    let xab = x[a] * x[b];
                    s.yyxx[a * k + b] += y2 * xab;
                    for c in b..k {
                        let xabc = xab * x[c];
                        s.yxxx[self.idx3[(a * k + b) * k + c]] += y * xabc;
                        for d in c..k {
                            s.xxxx[self.idx4[((a * k + b) * k + c) * k + d]] += xabc * x[d];
                        }
                    }
                }
            }
        }
        s.x = x;
    }

    /// Wald statistic for the rows accumulated in `s`, whose window is `[start, end]`.
    fn evaluate(&self, s: &Sums, start: usize, end: usize, sc: &mut Scratch) -> Result<f64> {
        let k = self.k;
        let p = self.p;
        let n = s.n as f64;
        // mirror the upper triangle
        let mut xx = s.xx.clone();
        for a in 0..k {
            for b in 0..a {
                xx[a * k + b] = xx[b * k + a];
            }
        }
        sc.work
            .inverse(&xx, k, &mut sc.inv)
            .map_err(|condition| Error::RankDeficient { condition })?;
        for a in 0..k {
            sc.b[a] = (0..k).map(|c| sc.inv[a * k + c] * s.xy[c]).sum();
        }
        let fitted: f64 = (0..k).map(|a| sc.b[a] * s.xy[a]).sum();
        let resid_var = (s.yy - fitted) / n;
        let mean_y = s.xy[0] / n;
        let var_y = s.yy / n - mean_y * mean_y;
        if !(resid_var > DEGENERATE_RATIO * var_y) {
            return Err(Error::Degenerate(format!(
                "target equation fits exactly (residual variance {resid_var:.3e}, series variance {var_y:.3e})"
            )));
        }
        // u = rows of (X'X)^-1 at the restricted columns
        for (i, &c) in self.sel_cols.iter().enumerate() {
            sc.u[i * k..(i + 1) * k].copy_from_slice(&sc.inv[c * k..(c + 1) * k]);
        }
        if !self.robust {
            for i in 0..p {
                for j in 0..p {
                    sc.middle[i * p + j] = resid_var * sc.inv[self.sel_cols[i] * k + self.sel_cols[j]];
                }
            }
        } else {
            self.meat(s, start, end, sc);
            for i in 0..p {
                for j in i..p {
                    let mut acc = 0.0;
                    for a in 0..k {
                        let ua = sc.u[i * k + a];
                        let row: f64 = (0..k).map(|b| sc.meat[a * k + b] * sc.u[j * k + b]).sum();
                        acc += ua * row;
                    }
                    sc.middle[i * p + j] = acc;
                    sc.middle[j * p + i] = acc;
                }
            }
        }
        let mut middle = std::mem::take(&mut sc.middle);
        let res = sc
            .work
            .inverse(&middle, p, &mut sc.middle_inv)
            .map_err(|condition| Error::SingularMiddle { condition });
        std::mem::swap(&mut sc.middle, &mut middle);
        res?;
        let mut w = 0.0;
        for i in 0..p {
            let bi = sc.b[self.sel_cols[i]];
            for j in 0..p {
                w += bi * sc.middle_inv[i * p + j] * sc.b[self.sel_cols[j]];
            }
        }
        Ok(w.max(0.0))
    }

    /// `sum_t e_t^2 x_t x_t'` for the target equation.
    fn meat(&self, s: &Sums, start: usize, end: usize, sc: &mut Scratch) {
        let k = self.k;
        sc.meat.fill(0.0);
        if self.use_moments {
            let b = &sc.b;
            for a in 0..k {
                for c in a..k {
                    let mut v = s.yyxx[a * k + c];
                    let base3 = (a * k + c) * k;
                    let mut lin = 0.0;
                    for d in 0..k {
                        lin += b[d] * s.yxxx[self.idx3[base3 + d]];
                    }
                    let mut quad = 0.0;
                    for d in 0..k {
                        let base4 = (base3 + d) * k;
                        let mut inner = 0.0;
                        for e in 0..k {
                            inner += b[e] * s.xxxx[self.idx4[base4 + e]];
                        }
                        quad += b[d] * inner;
                    }
                    v += -2.0 * lin + quad;
                    sc.meat[a * k + c] = v;
                    sc.meat[c * k + a] = v;
                }
            }
        } else {
            let mut x = std::mem::take(&mut sc.x);
            for t in (start + self.p)..=end {
                let y = self.fill_row(t, &mut x);
                let e = y - (0..k).map(|a| sc.b[a] * x[a]).sum::<f64>();
                let e2 = e * e;
                for a in 0..k {
                    for c in a..k {
                        sc.meat[a * k + c] += e2 * x[a] * x[c];
                    }
                }
            }
            for a in 0..k {
                for c in 0..a {
                    sc.meat[a * k + c] = sc.meat[c * k + a];
                }
            }
            sc.x = x;
        }
    }

    fn window_sums(&self, start: usize, end: usize) -> Sums {
        let mut s = self.empty_sums();
        for t in (start + self.p)..=end {
            self.add_row(&mut s, t);
        }
        s
    }

    fn points(&self, algorithm: Algorithm, first_end: usize, last_end: usize) -> Vec<StatPoint> {
        let m = self.min_window;
        match algorithm {
            Algorithm::Forward => {
                let mut sc = self.scratch();
                let mut sums = self.window_sums(0, first_end);
                let mut out = Vec::with_capacity(last_end + 1 - first_end);
                for e in first_end..=last_end {
                    if e > first_end {
                        self.add_row(&mut sums, e);
                    }
                    let mut best = Best::default();
                    best.offer(0, self.evaluate(&sums, 0, e, &mut sc));
                    out.push(point_from(e, best.best, best.failure, algorithm));
                }
                out
            }
            Algorithm::Rolling => (first_end..=last_end)
                .into_par_iter()
                .map_init(
                    || self.scratch(),
                    |sc, e| {
                        let start = e + 1 - m;
                        let sums = self.window_sums(start, e);
                        let mut best = Best::default();
                        best.offer(start, self.evaluate(&sums, start, e, sc));
                        point_from(e, best.best, best.failure, algorithm)
                    },
                )
                .collect(),
            Algorithm::RecursiveEvolving => (first_end..=last_end)
                .into_par_iter()
                .map_init(
                    || self.scratch(),
                    |sc, e| {
                        let first_start = e + 1 - m;
                        let mut sums = self.window_sums(first_start, e);
                        let mut best = Best::default();
                        best.offer(first_start, self.evaluate(&sums, first_start, e, sc));
                        for s in (0..first_start).rev() {
                            self.add_row(&mut sums, s + self.p);
                            best.offer(s, self.evaluate(&sums, s, e, sc));
                        }
                        point_from(e, best.best, best.failure, algorithm)
                    },
                )
                .collect(),
        }
    }
}
