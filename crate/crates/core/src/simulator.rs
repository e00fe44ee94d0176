//! Regenerative discrete-event simulation of the two queues.
//!
//! A cycle starts with an arrival to the empty system and ends when the
//! system next empties. Cycles are grouped into `round(sqrt(cycles))`
//! batches; each batch runs on its own random stream, so batches can be
//! simulated in any order and merged deterministically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::talbot::DensitySeries;

pub const DEFAULT_CYCLES: usize = 500_000;
pub const MIN_CYCLES: usize = 100;
pub const DEFAULT_BIN_WIDTH: f64 = 0.05;
pub const DEFAULT_HIST_MAX: f64 = 40.0;
pub const MOMENTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    /// A departure removes a uniformly chosen job of the queue.
    #[default]
    UniformDeparture,
    /// Every job carries its remaining work, served at rate `μ/k`.
    AttainedService,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Routing {
    #[default]
    Jsq,
    /// Every arrival joins queue 1.
    FirstOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub cycles: usize,
    pub seed: u64,
    pub bin_width: f64,
    pub hist_max: f64,
    pub engine: Engine,
    pub routing: Routing,
}

impl SimConfig {
    pub fn new(params: ModelParams, cycles: usize, seed: u64) -> Self {
        SimConfig {
            params,
            cycles,
            seed,
            bin_width: DEFAULT_BIN_WIDTH,
            hist_max: DEFAULT_HIST_MAX,
            engine: Engine::default(),
            routing: Routing::default(),
        }
    }

    pub fn batches(&self) -> usize {
        (self.cycles as f64).sqrt().round() as usize
    }

    fn bins(&self) -> usize {
        (self.hist_max / self.bin_width).round() as usize
    }

    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.cycles < MIN_CYCLES {
            return Err(Error::InvalidParams(format!(
                "need at least {MIN_CYCLES} regeneration cycles, got {}",
                self.cycles
            )));
        }
        if !(self.bin_width > 0.0 && self.hist_max > self.bin_width) {
            return Err(Error::InvalidParams(format!(
                "histogram bin width {} and range {} are inconsistent",
                self.bin_width, self.hist_max
            )));
        }
        if self.routing == Routing::FirstOnly && self.params.lambda >= self.params.mu1 {
            return Err(Error::Unstable {
                lambda: self.params.lambda,
                capacity: self.params.mu1,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub overflow: u64,
    /// Batch-means standard error of each bin's density.
    pub density_se: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEstimate {
    pub moments: [f64; MOMENTS],
    /// 95% confidence half-widths.
    pub ci95: [f64; MOMENTS],
    pub histogram: Histogram,
    pub cycles_run: usize,
    pub batches: usize,
    pub jobs: u64,
    pub queue_jobs: [u64; 2],
    /// t statistic of the per-batch difference between jobs sent to queue 1
    /// and queue 2.
    pub routing_t: f64,
}

#[derive(Debug, Clone)]
struct BatchTotals {
    jobs: u64,
    power_sums: [f64; MOMENTS],
    counts: Vec<u64>,
    overflow: u64,
    queue_jobs: [u64; 2],
}

impl BatchTotals {
    fn new(bins: usize) -> Self {
        BatchTotals {
            jobs: 0,
            power_sums: [0.0; MOMENTS],
            counts: vec![0; bins],
            overflow: 0,
            queue_jobs: [0; 2],
        }
    }

    fn record(&mut self, t: f64, bin_width: f64) {
        self.jobs += 1;
        let mut p = 1.0;
        for sum in self.power_sums.iter_mut() {
            p *= t;
            *sum += p;
        }
        let bin = (t / bin_width) as usize;
        match self.counts.get_mut(bin) {
            Some(c) => *c += 1,
            None => self.overflow += 1,
        }
    }
}

struct CycleRunner<'a> {
    cfg: &'a SimConfig,
    rng: ChaCha8Rng,
    // arrival time, plus remaining work for the attained-service engine
    queues: [Vec<(f64, f64)>; 2],
    unit: Exp<f64>,
}

impl CycleRunner<'_> {
    fn exp(&mut self, rate: f64) -> f64 {
        self.unit.sample(&mut self.rng) / rate
    }

    fn route(&mut self) -> usize {
        if self.cfg.routing == Routing::FirstOnly {
            return 0;
        }
        let (n1, n2) = (self.queues[0].len(), self.queues[1].len());
        if n1 < n2 {
            0
        } else if n1 > n2 {
            1
        } else if self.rng.random::<f64>() < self.cfg.params.a1 {
            0
        } else {
            1
        }
    }

    fn arrive(&mut self, now: f64, totals: &mut BatchTotals) {
        let q = self.route();
        let work = self.unit.sample(&mut self.rng);
        self.queues[q].push((now, work));
        totals.queue_jobs[q] += 1;
    }

    fn run_cycle(&mut self, totals: &mut BatchTotals) {
        match self.cfg.engine {
            Engine::UniformDeparture => self.cycle_uniform(totals),
            Engine::AttainedService => self.cycle_attained(totals),
        }
    }

    fn cycle_uniform(&mut self, totals: &mut BatchTotals) {
        let p = self.cfg.params;
        let mut now = 0.0;
        self.arrive(now, totals);
        loop {
            let r1 = if self.queues[0].is_empty() { 0.0 } else { p.mu1 };
            let r2 = if self.queues[1].is_empty() { 0.0 } else { p.mu2 };
            let total = p.lambda + r1 + r2;
            if total == p.lambda {
                return;
            }
            now += self.exp(total);
            let u = self.rng.random::<f64>() * total;
            if u < p.lambda {
                self.arrive(now, totals);
                continue;
            }
            let q = if u < p.lambda + r1 { 0 } else { 1 };
            let k = self.rng.random_range(0..self.queues[q].len());
            let (arrived, _) = self.queues[q].swap_remove(k);
            totals.record(now - arrived, self.cfg.bin_width);
        }
    }

    fn cycle_attained(&mut self, totals: &mut BatchTotals) {
        let p = self.cfg.params;
        let rates = [p.mu1, p.mu2];
        let mut now = 0.0;
        self.arrive(now, totals);
        while !(self.queues[0].is_empty() && self.queues[1].is_empty()) {
            let next_arrival = if p.lambda > 0.0 { self.exp(p.lambda) } else { f64::INFINITY };
            // earliest completion per queue: least remaining work × k / μ
            let mut finish = [(f64::INFINITY, 0usize); 2];
            for q in 0..2 {
                let k = self.queues[q].len();
                if let Some((idx, job)) = self.queues[q]
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                {
                    finish[q] = (job.1 * k as f64 / rates[q], idx);
                }
            }
            let dt = next_arrival.min(finish[0].0).min(finish[1].0);
            for (queue, rate) in self.queues.iter_mut().zip(rates) {
                let done = dt * rate / queue.len() as f64;
                for job in queue.iter_mut() {
                    job.1 -= done;
                }
            }
            now += dt;
            if dt == next_arrival {
                self.arrive(now, totals);
            } else {
                let q = if dt == finish[0].0 { 0 } else { 1 };
                let (arrived, _) = self.queues[q].swap_remove(finish[q].1);
                totals.record(now - arrived, self.cfg.bin_width);
            }
        }
    }
}

fn run_batch(cfg: &SimConfig, batch: usize, cycles: usize) -> BatchTotals {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(batch as u64);
    let mut runner = CycleRunner {
        cfg,
        rng,
        queues: [Vec::new(), Vec::new()],
        unit: Exp::new(1.0).expect("unit rate"),
    };
    let mut totals = BatchTotals::new(cfg.bins());
    for _ in 0..cycles {
        runner.run_cycle(&mut totals);
    }
    totals
}

fn mean_and_half_width(samples: &[f64], quantile: f64) -> (f64, f64) {
    let b = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / b;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1.0);
    (mean, quantile * (var / b).sqrt())
}

pub fn simulate(cfg: &SimConfig) -> Result<SimEstimate> {
    cfg.validate()?;
    let batches = cfg.batches();
    let base = cfg.cycles / batches;
    let extra = cfg.cycles % batches;
    let per_batch: Vec<BatchTotals> = (0..batches)
        .into_par_iter()
        .map(|b| run_batch(cfg, b, base + usize::from(b < extra)))
        .collect();

    let bins = cfg.bins();
    let mut all = BatchTotals::new(bins);
    for t in &per_batch {
        all.jobs += t.jobs;
        for k in 0..MOMENTS {
            all.power_sums[k] += t.power_sums[k];
        }
        for (a, c) in all.counts.iter_mut().zip(&t.counts) {
            *a += c;
        }
        all.overflow += t.overflow;
        all.queue_jobs[0] += t.queue_jobs[0];
        all.queue_jobs[1] += t.queue_jobs[1];
    }

    let dof = (batches - 1) as f64;
    let t975 = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::InvalidParams(e.to_string()))?
        .inverse_cdf(0.975);
    let mut moments = [0.0; MOMENTS];
    let mut ci95 = [0.0; MOMENTS];
    for k in 0..MOMENTS {
        moments[k] = all.power_sums[k] / all.jobs as f64;
        let estimates: Vec<f64> = per_batch
            .iter()
            .map(|t| t.power_sums[k] / t.jobs as f64)
            .collect();
        ci95[k] = mean_and_half_width(&estimates, t975).1;
    }
    let density_se = (0..bins)
        .map(|i| {
            let d: Vec<f64> = per_batch
                .iter()
                .map(|t| t.counts[i] as f64 / (t.jobs as f64 * cfg.bin_width))
                .collect();
            mean_and_half_width(&d, 1.0).1
        })
        .collect();
    let diffs: Vec<f64> = per_batch
        .iter()
        .map(|t| t.queue_jobs[0] as f64 - t.queue_jobs[1] as f64)
        .collect();
    let (mean_diff, se_diff) = mean_and_half_width(&diffs, 1.0);
    let routing_t = if se_diff > 0.0 { mean_diff / se_diff } else { 0.0 };

    Ok(SimEstimate {
        moments,
        ci95,
        histogram: Histogram {
            bin_width: cfg.bin_width,
            counts: all.counts,
            overflow: all.overflow,
            density_se,
        },
        cycles_run: cfg.cycles,
        batches,
        jobs: all.jobs,
        queue_jobs: all.queue_jobs,
        routing_t,
    })
}

/// Histogram as a density at bin midpoints; mass beyond the range stays in
/// the overflow count.
pub fn histogram_density(est: &SimEstimate) -> DensitySeries {
    let h = &est.histogram;
    let scale = 1.0 / (est.jobs as f64 * h.bin_width);
    let t = (0..h.counts.len()).map(|i| (i as f64 + 0.5) * h.bin_width).collect();
    let w: Vec<f64> = h.counts.iter().map(|&c| c as f64 * scale).collect();
    DensitySeries {
        t,
        raw: w.clone(),
        w,
        nodes: 0,
        grid_n: None,
    }
}
