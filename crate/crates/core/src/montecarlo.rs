//! Replicated simulation and the statistical checks run on its output.
//!
//! Replicate `r` draws from the stream seeded by
//! [`stream_seed`](crate::rng::stream_seed)`(master_seed, r)`, and results
//! are collected in replicate order, so everything here is a pure function
//! of the configuration regardless of the worker count.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expectations::{azuma_bound, limit_coefficient_f64, ERROR_BOUND};
use crate::network::{generate_with, DegreeHistogram, GenerateOptions, DEFAULT_MEMORY_BUDGET};
use crate::powerlaw::{fit_exponent, ExponentFit, DEFAULT_K_MIN};
use crate::rng::stream_seed;
use crate::stats::{mean, median, ols_slope, sample_std};

pub const DEFAULT_K_REPORT_MAX: u32 = 10_000;

/// Standard errors allowed above the Azuma bound before a lambda is flagged.
pub const CONCENTRATION_SE_MULTIPLIER: f64 = 3.0;

/// Degrees covered by the concentration part of a [`SimulationSummary`].
pub const SUMMARY_CONCENTRATION_DEGREES: [u32; 4] = [3, 4, 5, 6];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationConfig {
    pub t: usize,
    pub replicates: u64,
    pub master_seed: u64,
    pub workers: usize,
    /// Degrees above this are lumped into the overflow bucket.
    pub k_report_max: u32,
    /// Memory allowed for the state each worker holds.
    pub memory_budget: usize,
}

impl SimulationConfig {
    pub fn new(t: usize, replicates: u64, master_seed: u64) -> Self {
        SimulationConfig {
            t,
            replicates,
            master_seed,
            workers: 1,
            k_report_max: DEFAULT_K_REPORT_MAX,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::Domain("replicates must be at least 1".into()));
        }
        if self.workers < 1 {
            return Err(Error::Domain("workers must be at least 1".into()));
        }
        if self.k_report_max < 3 {
            return Err(Error::Domain("k_report_max must be at least 3".into()));
        }
        self.generate_options().check_capacity(self.t)
    }

    fn generate_options(&self) -> GenerateOptions {
        GenerateOptions {
            memory_budget: self.memory_budget,
            ..GenerateOptions::default()
        }
    }
}

/// Vertices whose degree exceeded `k_report_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Overflow {
    pub vertices: u64,
    pub degree_sum: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicateSummary {
    pub index: u64,
    pub seed: u64,
    /// Truncated at `k_report_max`.
    pub histogram: DegreeHistogram,
    pub overflow: Overflow,
    pub max_degree: u32,
}

impl ReplicateSummary {
    pub fn t(&self) -> usize {
        self.histogram.t
    }

    pub fn count(&self, k: u32) -> u64 {
        self.histogram.count(k)
    }

    /// Histogram invariants, counting the overflow bucket.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let t = self.t() as u64;
        let vertices = self.histogram.vertex_total() + self.overflow.vertices;
        if vertices != t + 3 {
            return Err(format!(
                "replicate {}: {vertices} vertices, expected {}",
                self.index,
                t + 3
            ));
        }
        let degrees = self.histogram.degree_total() + self.overflow.degree_sum;
        if degrees != 6 * (t + 1) {
            return Err(format!(
                "replicate {}: degree sum {degrees}, expected {}",
                self.index,
                6 * (t + 1)
            ));
        }
        let min = self.histogram.min_degree().unwrap_or(u32::MAX);
        if t >= 1 && min < 3 {
            return Err(format!("replicate {}: min degree {min} < 3", self.index));
        }
        Ok(())
    }
}

fn run_one(config: &SimulationConfig, index: u64) -> Result<ReplicateSummary> {
    let seed = stream_seed(config.master_seed, index);
    let state = generate_with(config.t, seed, &config.generate_options())?.state;
    let max_degree = state.max_degree();
    let mut counts = vec![0u64; max_degree.min(config.k_report_max) as usize + 1];
    let mut overflow = Overflow::default();
    for &d in state.degrees() {
        if d <= config.k_report_max {
            counts[d as usize] += 1;
        } else {
            overflow.vertices += 1;
            overflow.degree_sum += u64::from(d);
        }
    }
    Ok(ReplicateSummary {
        index,
        seed,
        histogram: DegreeHistogram::from_counts(config.t, counts),
        overflow,
        max_degree,
    })
}

/// Runs every replicate on a pool of `config.workers` threads.
pub fn run_replicates(config: &SimulationConfig) -> Result<Vec<ReplicateSummary>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Capacity(format!("cannot start {} workers: {e}", config.workers)))?;
    pool.install(|| {
        (0..config.replicates)
            .into_par_iter()
            .map(|r| run_one(config, r))
            .collect()
    })
}

fn common_t(summaries: &[ReplicateSummary]) -> Result<usize> {
    let t = summaries
        .first()
        .ok_or_else(|| Error::Domain("no replicate summaries".into()))?
        .t();
    if summaries.iter().any(|s| s.t() != t) {
        return Err(Error::Domain("replicates were taken at different t".into()));
    }
    Ok(t)
}

fn counts_of(summaries: &[ReplicateSummary], k: u32) -> Vec<f64> {
    summaries.iter().map(|s| s.count(k) as f64).collect()
}

/// Default lambda sweep: multiples of `sqrt(t ln t)`, including 1x.
pub fn default_lambdas(t: usize) -> Vec<f64> {
    let t = t as f64;
    let base = (t * t.ln()).max(0.0).sqrt();
    [0.25, 0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|m| m * base)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailCheck {
    pub lambda: f64,
    /// Fraction of replicates with `|Z_k - mean| >= lambda`.
    pub empirical: f64,
    pub bound: f64,
    /// Binomial standard error at success probability `min(bound, 1)`.
    pub std_error: f64,
    pub flagged: bool,
    /// The bound is at least 1 and says nothing.
    pub vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub k: u32,
    pub t: usize,
    pub replicates: usize,
    /// Sample mean used as the centre.
    pub mean: f64,
    pub checks: Vec<TailCheck>,
}

impl ConcentrationReport {
    pub fn flagged(&self) -> impl Iterator<Item = &TailCheck> {
        self.checks.iter().filter(|c| c.flagged)
    }
}

/// Empirical tail frequencies of `Z_k` around its sample mean against the
/// Azuma bound. The true mean is not known at scale; the sample mean is
/// used in its place.
pub fn concentration_check(
    summaries: &[ReplicateSummary],
    k: u32,
    lambdas: &[f64],
) -> Result<ConcentrationReport> {
    if summaries.len() < 2 {
        return Err(Error::Domain(format!(
            "concentration needs at least 2 replicates, got {}",
            summaries.len()
        )));
    }
    let t = common_t(summaries)?;
    if t == 0 {
        return Err(Error::Domain("concentration is defined for t >= 1".into()));
    }
    let values = counts_of(summaries, k);
    let centre = mean(&values);
    let n = values.len() as f64;
    let checks = lambdas
        .iter()
        .map(|&lambda| {
            let hits = values
                .iter()
                .filter(|&&z| (z - centre).abs() >= lambda)
                .count();
            let empirical = hits as f64 / n;
            let bound = azuma_bound(lambda, t as u64);
            let p = bound.min(1.0);
            let std_error = (p * (1.0 - p) / n).sqrt();
            TailCheck {
                lambda,
                empirical,
                bound,
                std_error,
                flagged: empirical > bound + CONCENTRATION_SE_MULTIPLIER * std_error,
                vacuous: bound >= 1.0,
            }
        })
        .collect();
    Ok(ConcentrationReport {
        k,
        t,
        replicates: summaries.len(),
        mean: centre,
        checks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitDeviation {
    pub k: u32,
    /// Mean of `Z_k / t` over replicates.
    pub mean_fraction: f64,
    pub b_k: f64,
    /// `|mean_fraction - b_k|`.
    pub deviation: f64,
    /// Standard error of `mean_fraction`; zero for a single replicate.
    pub std_error: f64,
}

impl LimitDeviation {
    /// `deviation <= 3.6 / t + se_multiplier * std_error`.
    pub fn within(&self, t: usize, se_multiplier: f64) -> bool {
        self.deviation <= ERROR_BOUND / t as f64 + se_multiplier * self.std_error
    }
}

/// Per-degree deviation of the empirical frequency from `b_k`, `3 <= k <= k_max`.
pub fn check_limits(summaries: &[ReplicateSummary], k_max: u32) -> Result<Vec<LimitDeviation>> {
    let t = common_t(summaries)?;
    if t == 0 {
        return Err(Error::Domain("limits are defined for t >= 1".into()));
    }
    let n = summaries.len() as f64;
    Ok((3..=k_max)
        .map(|k| {
            let fractions: Vec<f64> = summaries
                .iter()
                .map(|s| s.count(k) as f64 / t as f64)
                .collect();
            let mean_fraction = mean(&fractions);
            let b_k = limit_coefficient_f64(u64::from(k));
            LimitDeviation {
                k,
                mean_fraction,
                b_k,
                deviation: (mean_fraction - b_k).abs(),
                std_error: sample_std(&fractions) / n.sqrt(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub t: usize,
    pub median_max_degree: f64,
    /// `median / sqrt(t)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxDegreeScaling {
    pub points: Vec<ScalingPoint>,
    /// Least-squares slope of `ln median` against `ln t`.
    pub slope: f64,
}

pub fn max_degree_scaling(
    t_list: &[usize],
    replicates: u64,
    master_seed: u64,
    workers: usize,
) -> Result<MaxDegreeScaling> {
    if t_list.len() < 3 {
        return Err(Error::Domain(format!(
            "need at least 3 values of t, got {}",
            t_list.len()
        )));
    }
    if t_list.windows(2).any(|w| w[0] >= w[1]) || t_list[0] == 0 {
        return Err(Error::Domain(
            "t values must be positive and strictly ascending".into(),
        ));
    }
    let mut points = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let config = SimulationConfig::new(t, replicates, master_seed).with_workers(workers);
        let maxima: Vec<f64> = run_replicates(&config)?
            .iter()
            .map(|s| f64::from(s.max_degree))
            .collect();
        let median_max_degree = median(&maxima);
        points.push(ScalingPoint {
            t,
            median_max_degree,
            ratio: median_max_degree / (t as f64).sqrt(),
        });
    }
    let log_points: Vec<(f64, f64)> = points
        .iter()
        .map(|p| ((p.t as f64).ln(), p.median_max_degree.ln()))
        .collect();
    Ok(MaxDegreeScaling {
        slope: ols_slope(&log_points),
        points,
    })
}

/// Sum of the replicate histograms.
pub fn pooled_histogram(summaries: &[ReplicateSummary]) -> Result<DegreeHistogram> {
    let t = common_t(summaries)?;
    let len = summaries
        .iter()
        .map(|s| s.histogram.counts().len())
        .max()
        .unwrap_or(0);
    let mut counts = vec![0u64; len];
    for s in summaries {
        for (total, n) in counts.iter_mut().zip(s.histogram.counts()) {
            *total += n;
        }
    }
    Ok(DegreeHistogram::from_counts(t, counts))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeStats {
    pub k: u32,
    pub mean: f64,
    pub stddev: f64,
    pub b_k: f64,
    /// `|mean / t - b_k|`.
    pub deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxDegreeStats {
    pub median: f64,
    pub ratio_sqrt_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationEntry {
    pub k: u32,
    pub lambda: f64,
    pub empirical: f64,
    pub bound: f64,
    pub std_error: f64,
    pub flagged: bool,
}

/// The document written by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub t: usize,
    pub replicates: u64,
    pub master_seed: u64,
    pub per_k: Vec<DegreeStats>,
    pub max_degree: MaxDegreeStats,
    pub concentration: Vec<ConcentrationEntry>,
    pub exponent: Option<ExponentFit>,
}

pub fn summarize(
    config: &SimulationConfig,
    summaries: &[ReplicateSummary],
) -> Result<SimulationSummary> {
    let t = common_t(summaries)?;
    let top = summaries
        .iter()
        .map(|s| s.max_degree)
        .max()
        .unwrap_or(0)
        .min(config.k_report_max);
    let per_k = (3..=top)
        .map(|k| {
            let values = counts_of(summaries, k);
            let m = mean(&values);
            let b_k = limit_coefficient_f64(u64::from(k));
            DegreeStats {
                k,
                mean: m,
                stddev: sample_std(&values),
                b_k,
                deviation: if t > 0 {
                    (m / t as f64 - b_k).abs()
                } else {
                    f64::NAN
                },
            }
        })
        .collect();

    let maxima: Vec<f64> = summaries.iter().map(|s| f64::from(s.max_degree)).collect();
    let median_max = median(&maxima);

    let mut concentration = Vec::new();
    if summaries.len() >= 2 && t >= 1 {
        let lambdas = default_lambdas(t);
        for k in SUMMARY_CONCENTRATION_DEGREES {
            let report = concentration_check(summaries, k, &lambdas)?;
            concentration.extend(report.checks.iter().map(|c| ConcentrationEntry {
                k,
                lambda: c.lambda,
                empirical: c.empirical,
                bound: c.bound,
                std_error: c.std_error,
                flagged: c.flagged,
            }));
        }
    }

    Ok(SimulationSummary {
        t,
        replicates: config.replicates,
        master_seed: config.master_seed,
        per_k,
        max_degree: MaxDegreeStats {
            median: median_max,
            ratio_sqrt_t: median_max / (t as f64).sqrt(),
        },
        concentration,
        exponent: fit_exponent(&pooled_histogram(summaries)?, DEFAULT_K_MIN).ok(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forced_histograms() {
        let one = run_replicates(&SimulationConfig::new(1, 50, 3)).unwrap();
        assert!(one
            .iter()
            .all(|s| s.histogram.iter().collect::<Vec<_>>() == vec![(3, 4)]));
        let three = run_replicates(&SimulationConfig::new(3, 10_000, 3)).unwrap();
        assert!(three
            .iter()
            .all(|s| s.histogram.iter().collect::<Vec<_>>() == vec![(3, 2), (4, 2), (5, 2)]));
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let config = SimulationConfig::new(500, 40, 9);
        let serial = run_replicates(&config).unwrap();
        let parallel = run_replicates(&config.with_workers(8)).unwrap();
        assert_eq!(serial, parallel);
        assert!(serial.iter().enumerate().all(|(i, s)| s.index == i as u64));
    }

    #[test]
    fn replicate_seed_reproduces_run() {
        let summaries = run_replicates(&SimulationConfig::new(200, 5, 1)).unwrap();
        for s in &summaries {
            let state = crate::network::generate(200, s.seed).unwrap();
            assert_eq!(state.degree_histogram(), s.histogram);
            s.check_invariants().unwrap();
        }
    }

    #[test]
    fn overflow_bucket() {
        let mut config = SimulationConfig::new(2000, 3, 4);
        config.k_report_max = 5;
        let summaries = run_replicates(&config).unwrap();
        for s in &summaries {
            assert!(s.overflow.vertices > 0);
            assert!(s.histogram.max_degree() <= 5);
            s.check_invariants().unwrap();
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(run_replicates(&SimulationConfig::new(10, 0, 1)).is_err());
        assert!(run_replicates(&SimulationConfig::new(10, 1, 1).with_workers(0)).is_err());
        let mut tight = SimulationConfig::new(10_000_000, 2, 1);
        tight.memory_budget = 1 << 20;
        assert!(matches!(run_replicates(&tight), Err(Error::Capacity(_))));
    }

    #[test]
    fn concentration_edge_cases() {
        let summaries = run_replicates(&SimulationConfig::new(100, 20, 2)).unwrap();
        assert!(concentration_check(&[], 3, &[1.0]).is_err());
        assert!(concentration_check(&summaries[..1], 3, &[1.0]).is_err());
        let report = concentration_check(&summaries, 3, &[0.0]).unwrap();
        assert_eq!(report.checks[0].empirical, 1.0);
        assert_eq!(report.checks[0].bound, 2.0);
        assert!(report.checks[0].vacuous);
        assert!(!report.checks[0].flagged);
    }

    #[test]
    fn concentration_flags_spread_beyond_the_bound() {
        // Synthetic counts alternating 0 and 1000 at t = 1000: every replicate
        // sits 500 from the mean, while the bound at lambda = 500 is ~0.062.
        let summaries: Vec<ReplicateSummary> = (0..100u64)
            .map(|i| ReplicateSummary {
                index: i,
                seed: i,
                histogram: DegreeHistogram::from_pairs(
                    1000,
                    &[(3, if i % 2 == 0 { 0 } else { 1000 })],
                ),
                overflow: Overflow::default(),
                max_degree: 3,
            })
            .collect();
        let report = concentration_check(&summaries, 3, &[500.0, 501.0]).unwrap();
        assert_eq!(report.mean, 500.0);
        assert!(report.checks[0].flagged);
        assert_eq!(report.checks[1].empirical, 0.0);
        assert!(!report.checks[1].flagged);
        assert_eq!(report.flagged().count(), 1);
    }

    #[test]
    fn limits_beyond_max_degree() {
        let summaries = run_replicates(&SimulationConfig::new(50, 4, 8)).unwrap();
        let top = summaries.iter().map(|s| s.max_degree).max().unwrap();
        let rows = check_limits(&summaries, top + 3).unwrap();
        let last = rows.last().unwrap();
        assert_eq!(last.mean_fraction, 0.0);
        assert_eq!(last.deviation, last.b_k);
    }

    #[test]
    fn scaling_at_tiny_t() {
        let scaling = max_degree_scaling(&[1, 2, 3], 5, 1, 1).unwrap();
        assert_eq!(scaling.points[0].median_max_degree, 3.0);
        assert_eq!(scaling.points[0].ratio, 3.0);
        assert!(max_degree_scaling(&[10, 100], 5, 1, 1).is_err());
        assert!(max_degree_scaling(&[10, 10, 100], 5, 1, 1).is_err());
    }

    #[test]
    fn summary_at_t3_has_zero_spread() {
        let config = SimulationConfig::new(3, 100, 1);
        let summaries = run_replicates(&config).unwrap();
        let summary = summarize(&config, &summaries).unwrap();
        assert_eq!(summary.per_k.len(), 3);
        assert!(summary.per_k.iter().all(|row| row.stddev == 0.0));
        assert!(summary.exponent.is_none());
    }
}
