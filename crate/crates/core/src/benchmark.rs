//! Repeated simulate → discover → estimate runs scored against the true
//! graph and Monte Carlo ground-truth curves.
//!
//! Repetition `r` samples with `derive_seed(seed, r)` unless the config
//! lists explicit seeds. The report embeds the resolved config, so feeding
//! a report back in as config reproduces it byte for byte.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ProxyMode, RunConfig, Target};
use crate::discovery::{discover_graph, graph_metrics, BipartiteGraph, GraphMetrics};
use crate::error::{Error, Result};
use crate::estimator::{cmae, fit_and_estimate, EffectCurve};
use crate::rng::derive_seed;

pub const REPORT_VERSION: u32 = 1;
const TRUTH_INDEX_BASE: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    /// `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(MeanStd { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRun {
    pub target: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cmae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRun {
    pub rep: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discovery: Option<GraphMetrics>,
    pub targets: Vec<TargetRun>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoverySummary {
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub target: String,
    /// Over the repetitions that produced an estimate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cmae: Option<MeanStd>,
    pub failures: usize,
    pub truth_seed: u64,
    pub truth: EffectCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub report_version: u32,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discovery: Option<DiscoverySummary>,
    pub targets: Vec<TargetSummary>,
    pub reps: Vec<RepRun>,
}

impl BenchmarkReport {
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn target(&self, name: &str) -> Option<&TargetSummary> {
        self.targets.iter().find(|t| t.target == name)
    }
}

/// Seeds for each repetition.
pub fn rep_seeds(config: &RunConfig) -> Vec<u64> {
    match &config.rep_seeds {
        Some(s) => s.clone(),
        None => (0..config.reps as u64).map(|r| derive_seed(config.seed, r)).collect(),
    }
}

/// Ground-truth curves for every target, in target order.
pub fn truth_curves(config: &RunConfig) -> Result<Vec<(u64, EffectCurve)>> {
    let spec = config
        .scm()?
        .ok_or_else(|| Error::Config("benchmarks need a built-in scenario".into()))?;
    config
        .parsed_targets()?
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let seed = derive_seed(config.seed, TRUTH_INDEX_BASE + k as u64);
            let grid = config.grid(t.treated.len());
            let curve =
                spec.ground_truth_curve(&t.outcome, &t.treated, &grid, config.replicates, seed)?;
            Ok((seed, curve))
        })
        .collect()
}

fn run_rep(
    config: &RunConfig,
    targets: &[Target],
    truths: &[(u64, EffectCurve)],
    truth_graph: &BipartiteGraph,
    rep: usize,
    seed: u64,
) -> Result<RepRun> {
    let dataset = config.load_dataset(seed)?;
    let need_graph = config.discovery || config.proxy_mode == ProxyMode::Auto;
    let mut warnings = Vec::new();
    let graph = if need_graph {
        let g = discover_graph(
            &dataset,
            config.bins(),
            config.strategy,
            config.alpha,
            config.proxy_rule,
        )?;
        warnings.extend(g.warnings.iter().cloned());
        Some(g)
    } else {
        None
    };
    let discovery = match (&graph, config.discovery) {
        (Some(g), true) => Some(graph_metrics(g, truth_graph)?),
        _ => None,
    };
    let targets = targets
        .iter()
        .zip(truths)
        .map(|(t, (_, truth))| {
            let mut run = TargetRun {
                target: t.to_string(),
                z: None,
                w: None,
                cmae: None,
                error: None,
            };
            let outcome = config.assignment(&dataset, t, graph.as_ref()).and_then(|a| {
                run.z = Some(a.z.clone());
                run.w = Some(a.w.clone());
                let fit = fit_and_estimate(&dataset, &a, &config.estimate_options(t.treated.len()))?;
                cmae(&fit.curve, truth)
            });
            match outcome {
                Ok(v) => run.cmae = Some(v),
                Err(e) => run.error = Some(format!("{}: {e}", e.category())),
            }
            run
        })
        .collect();
    Ok(RepRun {
        rep,
        seed,
        discovery,
        targets,
        warnings,
    })
}

/// Runs all repetitions on the current rayon pool. Output does not depend
/// on the number of threads.
pub fn run_benchmark(config: &RunConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    let spec = config
        .scm()?
        .ok_or_else(|| Error::Config("benchmarks need a built-in scenario".into()))?;
    let targets = config.parsed_targets()?;
    let truths = truth_curves(config)?;
    let truth_graph = BipartiteGraph::truth(&spec);
    let seeds = rep_seeds(config);
    let reps: Vec<RepRun> = seeds
        .par_iter()
        .enumerate()
        .map(|(r, &seed)| run_rep(config, &targets, &truths, &truth_graph, r, seed))
        .collect::<Result<_>>()?;

    let discovery = if config.discovery {
        let metric = |f: fn(&GraphMetrics) -> f64| {
            let v: Vec<f64> = reps.iter().filter_map(|r| r.discovery.as_ref().map(f)).collect();
            MeanStd::of(&v).expect("at least one repetition")
        };
        Some(DiscoverySummary {
            precision: metric(|m| m.precision),
            recall: metric(|m| m.recall),
            f1: metric(|m| m.f1),
        })
    } else {
        None
    };
    let summaries = targets
        .iter()
        .enumerate()
        .zip(truths)
        .map(|((k, t), (truth_seed, truth))| {
            let values: Vec<f64> = reps.iter().filter_map(|r| r.targets[k].cmae).collect();
            TargetSummary {
                target: t.to_string(),
                cmae: MeanStd::of(&values),
                failures: reps.len() - values.len(),
                truth_seed,
                truth,
            }
        })
        .collect();
    let mut echo = config.clone();
    echo.rep_seeds = Some(seeds);
    echo.jobs = None;
    echo.out = None;
    Ok(BenchmarkReport {
        report_version: REPORT_VERSION,
        config: echo,
        discovery,
        targets: summaries,
        reps,
    })
}
