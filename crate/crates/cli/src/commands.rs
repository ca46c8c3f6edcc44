use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use serde::Deserialize;
use serde_json::json;
use tvgc_core::bootstrap::{self, BootstrapConfig, Scheme};
use tvgc_core::dataset::{self, AlignedDataset};
use tvgc_core::dating;
use tvgc_core::procedures::{self, SequenceConfig};
use tvgc_core::simulation::{self, ExperimentCell, SwitchDgp, TestConfig};
use tvgc_core::stationarity;
use tvgc_core::var::{self, Bivariate, Window};

use crate::artifacts;
use crate::error::{CliError, Result};
use crate::manifest::{self, RunManifest};
use crate::svg::Chart;
use crate::{IngestArgs, PlotArgs, SimulateArgs, StationarityArgs, TestArgs};

/// Share of missing statistics beyond which `test` gives up.
const MAX_FAILURE_DENSITY: f64 = 0.10;

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn ingest(a: IngestArgs) -> Result<()> {
    let prices = dataset::load_raw_csv(&a.prices, "prices", "prices")?;
    let returns = dataset::log_returns(&prices)?;
    let mut segments = Vec::with_capacity(a.gsvi.len());
    for (i, path) in a.gsvi.iter().enumerate() {
        segments.push(dataset::load_raw_csv(
            path,
            &format!("gsvi segment {}", i + 1),
            "gsvi-segment",
        )?);
    }
    let stitched = dataset::stitch_gsvi(&segments, a.rescale_overlap, a.max_gap_days)?;
    for r in &stitched.rescales {
        info!(
            "segment {} ({}) rescaled by {} over {} overlapping days",
            r.segment + 1,
            a.gsvi[r.segment].display(),
            r.factor,
            r.overlap_days
        );
    }
    let mut data = dataset::align(&stitched.series, &returns, &a.country, 2)?;
    data.meta.extend(a.meta.iter().cloned());

    let out = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("aligned_{}.csv", a.country)));
    let manifest_path = manifest::sibling(&out);
    data.meta.insert("manifest".into(), file_name(&manifest_path));
    let mut buf = Vec::new();
    data.write_csv(&mut buf)?;
    manifest::write_file(&out, &buf)?;

    let mut m = RunManifest::new(
        "ingest",
        json!({
            "country": a.country,
            "rescale_overlap": a.rescale_overlap,
            "max_gap_days": a.max_gap_days,
            "meta": a.meta.iter().cloned().collect::<std::collections::BTreeMap<_, _>>(),
            "rescales": stitched.rescales,
            "rows": data.len(),
        }),
        None,
    );
    m.input(&a.prices)?;
    for p in &a.gsvi {
        m.input(p)?;
    }
    m.output(&out)?;
    m.write(&manifest_path)?;
    println!("wrote {} rows to {}", data.len(), out.display());
    Ok(())
}

pub fn stationarity(a: StationarityArgs) -> Result<()> {
    let data = AlignedDataset::load(&a.dataset)?;
    let mut rows = Vec::new();
    for (name, series) in [("attention", &data.attention), ("log_return", &data.returns)] {
        rows.push((name, stationarity::adf_test(series, a.max_lag)?));
        rows.push((name, stationarity::pp_test(series, a.bandwidth)?));
    }
    let mut table = format!(
        "{:<12}{:<6}{:>12}{:>7}  {}\n",
        "series", "test", "statistic", "lags", "p-value"
    );
    let mut csv = String::from("series,test,statistic,lags_or_bandwidth,p_value_band\n");
    for (name, r) in &rows {
        let _ = writeln!(
            table,
            "{:<12}{:<6}{:>12.4}{:>7}  {}",
            name,
            r.test.to_string(),
            r.statistic,
            r.lags_or_bandwidth,
            r.p_value_band
        );
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            name,
            r.test,
            artifacts::fmt_f64(r.statistic),
            r.lags_or_bandwidth,
            r.p_value_band
        );
    }
    print!("{table}");
    if let Some(out) = &a.out {
        manifest::write_file(out, csv.as_bytes())?;
        let mut m = RunManifest::new(
            "stationarity",
            json!({ "max_lag": a.max_lag, "bandwidth": a.bandwidth, "deterministic_terms": "constant" }),
            None,
        );
        m.input(&a.dataset)?;
        m.output(out)?;
        m.write(&manifest::sibling(out))?;
    }
    Ok(())
}

pub fn test(a: TestArgs) -> Result<()> {
    let data = AlignedDataset::load(&a.dataset)?;
    let view = Bivariate::from(&data);
    if data.len() < a.min_window {
        return Err(tvgc_core::Error::TooShort {
            name: a.dataset.display().to_string(),
            needed: a.min_window,
            got: data.len(),
        }
        .into());
    }
    let (p, lag_source) = match a.lag {
        Some(p) => (p, "fixed"),
        None => (var::select_lag_bic(view, Window::full(data.len()), a.max_lag)?, "bic"),
    };
    let mut seq = SequenceConfig::new(p, a.min_window, a.robust);
    seq.direction = a.direction;
    let scheme = a.scheme.unwrap_or(Scheme::paired_with(a.robust));
    let boot = BootstrapConfig {
        replications: a.reps,
        size: a.size,
        control_window: a.control_window,
        min_window: a.min_window,
        seed: a.seed,
        scheme,
    };
    let cv = bootstrap::critical_values(view, a.algorithm, &seq, &boot)?;
    let stats = procedures::sequence(view, a.algorithm, &seq)?;
    let failed = stats.points.iter().filter(|p| p.statistic.is_none()).count();
    if failed as f64 > MAX_FAILURE_DENSITY * stats.len() as f64 {
        return Err(CliError::FailureDensity {
            failed,
            total: stats.len(),
        });
    }
    let episodes = dating::date_episodes(&stats, &cv, a.min_duration)?;
    let report = dating::episode_report(&episodes, &data);

    let stats_path = a.out.join("stats.csv");
    let cv_path = a.out.join("cv.csv");
    let episodes_path = a.out.join("episodes.jsonl");
    let manifest_path = a.out.join("manifest.json");
    let mname = file_name(&manifest_path);
    manifest::write_file(
        &stats_path,
        artifacts::stats_csv(&stats, &data.dates, &mname).as_bytes(),
    )?;
    manifest::write_file(&cv_path, artifacts::cv_csv(&cv, &data.dates, &mname).as_bytes())?;
    manifest::write_file(&episodes_path, report.jsonl().as_bytes())?;

    let mut m = RunManifest::new(
        "test",
        json!({
            "algorithm": a.algorithm,
            "robust": a.robust,
            "direction": a.direction,
            "min_window": a.min_window,
            "control_window": a.control_window,
            "replications": a.reps,
            "size": a.size,
            "max_lag": a.max_lag,
            "lag_order": p,
            "lag_source": lag_source,
            "scheme": scheme,
            "min_duration": a.min_duration,
            "critical_value": cv.values.first(),
            "discarded_draws": cv.discarded,
        }),
        Some(a.seed),
    );
    m.input(&a.dataset)?;
    for path in [&stats_path, &cv_path, &episodes_path] {
        m.output(path)?;
    }
    m.write(&manifest_path)?;

    println!(
        "{} {} test, lag order {} ({}), critical value {:.4} from {} replications",
        a.algorithm,
        if a.robust { "robust" } else { "homoskedastic" },
        p,
        lag_source,
        cv.values.first().copied().unwrap_or(f64::NAN),
        cv.replications_used
    );
    if failed > 0 {
        println!("{failed} of {} endpoints without a statistic", stats.len());
    }
    print!("{}", report.text);
    println!("wrote {}", a.out.display());
    Ok(())
}

pub fn plot_data(a: PlotArgs) -> Result<()> {
    let (stats, dates) = artifacts::read_stats(&a.stats)?;
    let cv = artifacts::read_cv(&a.cv)?;
    // also checks that the two files cover the same endpoints
    let episodes = dating::date_episodes(&stats, &cv, a.min_duration)?;

    let mut csv = String::from("date,statistic,critical_value\n");
    for ((p, d), c) in stats.points.iter().zip(&dates).zip(&cv.values) {
        let date = d.map(|d| d.to_string()).unwrap_or_else(|| p.index.to_string());
        let stat = p.statistic.map(artifacts::fmt_f64).unwrap_or_default();
        let _ = writeln!(csv, "{date},{stat},{}", artifacts::fmt_f64(*c));
    }
    manifest::write_file(&a.out, csv.as_bytes())?;

    let mut m = RunManifest::new("plot-data", json!({ "min_duration": a.min_duration }), None);
    m.input(&a.stats)?;
    m.input(&a.cv)?;
    m.output(&a.out)?;
    if let Some(svg_path) = &a.svg {
        let values: Vec<Option<f64>> = stats.values().collect();
        let label =
            |d: Option<&Option<chrono::NaiveDate>>| d.and_then(|d| d.map(|d| d.to_string())).unwrap_or_default();
        let title = format!(
            "{} {} Wald, lag order {}",
            stats.algorithm,
            if stats.robust { "robust" } else { "homoskedastic" },
            stats.lag_order
        );
        let chart = Chart {
            title: &title,
            first_index: cv.first_index,
            statistic: &values,
            critical_value: &cv.values,
            episodes: &episodes,
            first_label: &label(dates.first()),
            last_label: &label(dates.last()),
        };
        manifest::write_file(svg_path, chart.render().as_bytes())?;
        m.output(svg_path)?;
    }
    m.write(&manifest::sibling(&a.out))?;
    println!(
        "wrote {} rows to {} ({} episodes)",
        stats.len(),
        a.out.display(),
        episodes.len()
    );
    Ok(())
}

#[derive(Debug, Deserialize)]
struct NamedDgp {
    name: String,
    /// Sets the causal coefficient from a standardized effect.
    #[serde(default)]
    standardized_effect: Option<f64>,
    #[serde(flatten)]
    dgp: SwitchDgp,
}

#[derive(Debug, Deserialize)]
struct NamedTest {
    name: String,
    #[serde(flatten)]
    test: TestConfig,
}

#[derive(Debug, Deserialize)]
struct Grid {
    dgps: Vec<NamedDgp>,
    tests: Vec<NamedTest>,
}

fn load_grid(path: &Path) -> Result<Vec<ExperimentCell>> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let grid: Grid = serde_json::from_str(&text).map_err(|e| CliError::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut cells = Vec::new();
    for d in &grid.dgps {
        let dgp = match d.standardized_effect {
            Some(e) => d.dgp.clone().with_effect(e, d.dgp.causal_window)?,
            None => d.dgp.clone(),
        };
        for t in &grid.tests {
            cells.push(ExperimentCell {
                name: format!("{}/{}", d.name, t.name),
                dgp: dgp.clone(),
                test: t.test,
            });
        }
    }
    if cells.is_empty() {
        return Err(CliError::Artifact {
            path: path.to_path_buf(),
            message: "grid has no cells".into(),
        });
    }
    Ok(cells)
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let cells = load_grid(&a.grid)?;
    let table = simulation::run_experiment(&cells, a.trials, a.seed)?;
    let csv = table.to_csv()?;
    manifest::write_file(&a.out, csv.as_bytes())?;
    let summary_path = a.out.with_extension("summary.txt");
    let summary = table.summary();
    manifest::write_file(&summary_path, summary.as_bytes())?;
    for c in &table.cells {
        for (trial, msg) in &c.failures {
            info!("{} trial {trial} failed: {msg}", c.summary.cell);
        }
    }
    let mut m = RunManifest::new("simulate", json!({ "trials": a.trials, "cells": cells }), Some(a.seed));
    m.input(&a.grid)?;
    m.output(&a.out)?;
    m.output(&summary_path)?;
    m.write(&manifest::sibling(&a.out))?;
    print!("{summary}");
    Ok(())
}
