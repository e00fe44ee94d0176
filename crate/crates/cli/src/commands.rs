//! The work behind each subcommand. Every command validates the whole
//! configuration first, returns its result as a value and writes its files
//! into the configured output directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use jsqps::baselines::StaticSplit;
use jsqps::methods::{MethodSettings, Registry};
use jsqps::operators::{OperatorSet, Scheme};
use jsqps::oracle;
use jsqps::pipeline::SpectralModel;
use jsqps::simulator::{self, histogram_density, SimEstimate};
use jsqps::talbot::DensitySeries;
use jsqps::ModelParams;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::cache::{self, CacheReport, CacheStatus};
use crate::config::RunConfig;
use crate::failure::{AtStage, Failure};
use crate::output::{num, write_csv, write_json, Table};

pub fn operators(cfg: &RunConfig) -> Result<(Arc<OperatorSet>, Option<CacheStatus>), Failure> {
    let spec = cfg.spectral.grid(&cfg.params).at("config")?;
    match &cfg.cache_dir {
        Some(dir) => {
            let (ops, status) = cache::load_or_build(dir, &spec)?;
            Ok((Arc::new(ops), Some(status)))
        }
        None => Ok((Arc::new(OperatorSet::build(&spec).at("operators")?), None)),
    }
}

pub fn spectral_model(cfg: &RunConfig) -> Result<(SpectralModel, Option<CacheStatus>), Failure> {
    let (ops, status) = operators(cfg)?;
    let model = SpectralModel::with_operators(&cfg.params, cfg.spectral, ops).at("qlen")?;
    Ok((model, status))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentsReport {
    pub method: String,
    pub params: ModelParams,
    pub n: usize,
    pub r2: f64,
    pub scheme: Scheme,
    /// `W*(0)`; only the spectral method reports it.
    pub m0_check: Option<f64>,
    pub moments: Vec<f64>,
    pub cache: Option<CacheStatus>,
    pub config_hash: String,
}

fn param_columns() -> Vec<String> {
    ["lambda", "mu1", "mu2", "a1"].map(String::from).to_vec()
}

fn param_values(p: &ModelParams) -> Vec<String> {
    vec![num(p.lambda), num(p.mu1), num(p.mu2), num(p.a1)]
}

fn moment_columns(prefix: &str, order: usize) -> Vec<String> {
    (1..=order).map(|k| format!("{prefix}{k}")).collect()
}

pub fn spectral_moments(cfg: &RunConfig) -> Result<MomentsReport, Failure> {
    let (model, status) = spectral_model(cfg)?;
    let res = model.moments(cfg.order).at("decondition")?;
    let spec = model.spec();
    Ok(MomentsReport {
        method: "spectral".into(),
        params: cfg.params,
        n: spec.n,
        r2: spec.r2(),
        scheme: cfg.spectral.scheme,
        m0_check: Some(res.m0_check),
        moments: res.m,
        cache: status,
        config_hash: cfg.hash(),
    })
}

pub fn cmd_moments(cfg: &RunConfig, method: &str) -> Result<MomentsReport, Failure> {
    cfg.validate()?;
    let report = if method == "spectral" {
        spectral_moments(cfg)?
    } else {
        let registry = registry(cfg, None);
        let m = registry.get(method).at("config")?;
        let spec = cfg.spectral.grid(&cfg.params).at("config")?;
        MomentsReport {
            method: method.into(),
            params: cfg.params,
            n: spec.n,
            r2: spec.r2(),
            scheme: cfg.spectral.scheme,
            m0_check: None,
            moments: m.moments(&cfg.params, cfg.order).at(m.name())?,
            cache: None,
            config_hash: cfg.hash(),
        }
    };
    let mut cols = param_columns();
    cols.extend(["method", "n", "r2", "m0_check"].map(String::from));
    cols.extend(moment_columns("m", cfg.order));
    let mut table = Table::new(cols);
    let mut row = param_values(&cfg.params);
    row.extend([
        report.method.clone(),
        report.n.to_string(),
        num(report.r2),
        report.m0_check.map_or("NA".into(), num),
    ]);
    row.extend(report.moments.iter().map(|v| num(*v)));
    table.push(row);
    write_csv(&cfg.out_dir, "moments", &table, &report.config_hash)?;
    write_json(&cfg.out_dir, "moments", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub series: DensitySeries,
    pub trapezoid_mass: f64,
    pub cache: Option<CacheStatus>,
    /// Simulation histogram over the same range, when requested.
    pub overlay: Option<DensitySeries>,
    pub config_hash: String,
}

pub fn cmd_density(cfg: &RunConfig, overlay: bool) -> Result<DensityReport, Failure> {
    cfg.validate()?;
    let (model, status) = spectral_model(cfg)?;
    let series = model
        .density(&cfg.tpoints.points(), cfg.talbot_nodes)
        .at("inversion")?;
    let hash = cfg.hash();
    let mut table = Table::new(["t", "w", "raw"]);
    for i in 0..series.t.len() {
        table.push([num(series.t[i]), num(series.w[i]), num(series.raw[i])]);
    }
    write_csv(&cfg.out_dir, "density", &table, &hash)?;
    let overlay = if overlay {
        let est = simulator::simulate(&cfg.sim_config()).at("simulate")?;
        write_histogram(cfg, &est, &hash)?;
        Some(histogram_density(&est))
    } else {
        None
    };
    let report = DensityReport {
        trapezoid_mass: series.trapezoid_mass(),
        series,
        cache: status,
        overlay,
        config_hash: hash,
    };
    write_json(&cfg.out_dir, "density", &report)?;
    Ok(report)
}

fn write_histogram(cfg: &RunConfig, est: &SimEstimate, hash: &str) -> Result<PathBuf, Failure> {
    let d = histogram_density(est);
    let mut table = Table::new(["bin_midpoint", "density", "std_error"]);
    for i in 0..d.t.len() {
        table.push([num(d.t[i]), num(d.w[i]), num(est.histogram.density_se[i])]);
    }
    write_csv(&cfg.out_dir, "histogram", &table, hash)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimEstimate, Failure> {
    cfg.validate()?;
    let est = simulator::simulate(&cfg.sim_config()).at("simulate")?;
    let hash = cfg.hash();
    let mut table = Table::new(["moment", "estimate", "ci95"]);
    for k in 0..est.moments.len() {
        table.push([(k + 1).to_string(), num(est.moments[k]), num(est.ci95[k])]);
    }
    write_csv(&cfg.out_dir, "simulate", &table, &hash)?;
    write_histogram(cfg, &est, &hash)?;
    write_json(&cfg.out_dir, "simulate", &est)?;
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub s_re: f64,
    pub s_im: f64,
    pub n_trunc: usize,
    pub w_re: f64,
    pub w_im: f64,
    pub config_hash: String,
}

pub fn cmd_oracle(cfg: &RunConfig, s: C64, n_trunc: Option<usize>) -> Result<OracleReport, Failure> {
    cfg.validate()?;
    let n_trunc = match n_trunc {
        Some(n) => n,
        None => oracle::settled_truncation(&cfg.params, s).at("oracle")?,
    };
    let w = oracle::wstar_direct(&cfg.params, s, n_trunc).at("oracle")?;
    let report = OracleReport {
        s_re: s.re,
        s_im: s.im,
        n_trunc,
        w_re: w.re,
        w_im: w.im,
        config_hash: cfg.hash(),
    };
    let mut table = Table::new(["s_re", "s_im", "n_trunc", "w_re", "w_im"]);
    table.push([num(s.re), num(s.im), n_trunc.to_string(), num(w.re), num(w.im)]);
    write_csv(&cfg.out_dir, "oracle", &table, &report.config_hash)?;
    write_json(&cfg.out_dir, "oracle", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub a1: f64,
    pub m0_check: f64,
    pub model: Vec<f64>,
    pub simulation: Option<Vec<f64>>,
    pub ci95: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Tie-break probability with the smallest mean response time.
    pub best_a1: f64,
    pub config_hash: String,
}

pub fn cmd_sweep_a1(cfg: &RunConfig, a1s: &[f64], with_sim: bool) -> Result<SweepReport, Failure> {
    if a1s.is_empty() {
        return Err(Failure::config("no a1 values to sweep".into()));
    }
    let mut rows = Vec::with_capacity(a1s.len());
    for &a1 in a1s {
        let mut row_cfg = cfg.clone();
        row_cfg.params.a1 = a1;
        row_cfg.validate()?;
        let m = spectral_moments(&row_cfg)?;
        let (simulation, ci95) = if with_sim {
            let est = simulator::simulate(&row_cfg.sim_config()).at("simulate")?;
            let k = cfg.order.min(simulator::MOMENTS);
            (Some(est.moments[..k].to_vec()), Some(est.ci95[..k].to_vec()))
        } else {
            (None, None)
        };
        rows.push(SweepRow {
            a1,
            m0_check: m.m0_check.unwrap_or(f64::NAN),
            model: m.moments,
            simulation,
            ci95,
        });
    }
    let best_a1 = rows
        .iter()
        .min_by(|a, b| a.model[0].total_cmp(&b.model[0]))
        .map(|r| r.a1)
        .unwrap_or(f64::NAN);
    let report = SweepReport {
        rows,
        best_a1,
        config_hash: cfg.hash(),
    };

    let mut cols = vec!["a1".to_string(), "m0_check".to_string()];
    cols.extend(moment_columns("m", cfg.order));
    if with_sim {
        let k = cfg.order.min(simulator::MOMENTS);
        cols.extend(moment_columns("sim_m", k));
        cols.extend(moment_columns("ci95_m", k));
    }
    let mut table = Table::new(cols);
    for row in &report.rows {
        let mut cells = vec![num(row.a1), num(row.m0_check)];
        cells.extend(row.model.iter().map(|v| num(*v)));
        for extra in [&row.simulation, &row.ci95].into_iter().flatten() {
            cells.extend(extra.iter().map(|v| num(*v)));
        }
        table.push(cells);
    }
    write_csv(&cfg.out_dir, "sweep_a1", &table, &report.config_hash)?;
    write_json(&cfg.out_dir, "sweep_a1", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub p1: f64,
    pub jsq_ps: Vec<f64>,
    /// Not computed by this tool.
    pub jsq_fcfs: Option<Vec<f64>>,
    pub static_ps: Vec<f64>,
    pub static_fcfs: Vec<f64>,
    pub config_hash: String,
}

fn registry(cfg: &RunConfig, p1: Option<f64>) -> Registry {
    Registry::standard(&MethodSettings {
        spectral: cfg.spectral,
        oracle_truncation: None,
        cycles: cfg.sim.cycles,
        seed: cfg.sim.seed,
        p1,
    })
}

pub fn cmd_compare(cfg: &RunConfig, p1: Option<f64>) -> Result<CompareReport, Failure> {
    cfg.validate()?;
    let split = match p1 {
        Some(p1) => StaticSplit::new(&cfg.params, p1),
        None => StaticSplit::balanced(&cfg.params),
    }
    .at("baselines")?;
    let registry = registry(cfg, Some(split.p1));
    let jsq_ps = spectral_moments(cfg)?.moments;
    let static_ps = registry
        .get("static-ps")
        .and_then(|m| m.moments(&cfg.params, cfg.order))
        .at("baselines")?;
    let static_fcfs = registry
        .get("static-fcfs")
        .and_then(|m| m.moments(&cfg.params, cfg.order))
        .at("baselines")?;
    let report = CompareReport {
        p1: split.p1,
        jsq_ps,
        jsq_fcfs: None,
        static_ps,
        static_fcfs,
        config_hash: cfg.hash(),
    };
    let mut table = Table::new(["moment", "jsq_ps", "jsq_fcfs", "static_ps", "static_fcfs"]);
    for k in 0..cfg.order {
        table.push([
            (k + 1).to_string(),
            num(report.jsq_ps[k]),
            "NA".to_string(),
            num(report.static_ps[k]),
            num(report.static_fcfs[k]),
        ]);
    }
    write_csv(&cfg.out_dir, "compare", &table, &report.config_hash)?;
    write_json(&cfg.out_dir, "compare", &report)?;
    Ok(report)
}

pub fn cmd_cache_build(cfg: &RunConfig) -> Result<CacheReport, Failure> {
    cfg.validate()?;
    let dir = cfg
        .cache_dir
        .as_deref()
        .ok_or_else(|| Failure::config("cache build needs a cache directory".into()))?;
    let (ops, _) = operators(cfg)?;
    cache::inspect(&cache::cache_path(dir, &ops.spec))
}

pub fn cmd_cache_inspect(path: &Path) -> Result<CacheReport, Failure> {
    cache::inspect(path)
}
