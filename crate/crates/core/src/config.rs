//! Run configuration shared by the CLI and the benchmark harness.
//!
//! One flat JSON object. Every field has a default, so `{}` is a valid
//! config (it needs a data source before it can run). Unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::discovery::{select_proxies, BipartiteGraph, ProxyAssignment, ProxyRule};
use crate::discretize::BinningStrategy;
use crate::error::{Error, Result};
use crate::estimator::{default_grid, EstimateOptions};
use crate::proxytest::Bins;
use crate::scenarios::builtin_scenario;
use crate::scm::ScmSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProxyMode {
    /// Proxies selected from the discovered graph.
    #[default]
    Auto,
    /// Proxies selected from the scenario's true graph.
    Oracle,
    /// `z` and `w` given by name.
    Explicit,
}

impl std::str::FromStr for ProxyMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(ProxyMode::Auto),
            "oracle" => Ok(ProxyMode::Oracle),
            "explicit" => Ok(ProxyMode::Explicit),
            other => Err(Error::Config(format!("unknown proxy mode `{other}`"))),
        }
    }
}

/// A causal target `A_S → Y_j`, written `A1,A3->Y1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    pub treated: Vec<String>,
    pub outcome: String,
}

impl std::str::FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (lhs, rhs) = s
            .split_once("->")
            .ok_or_else(|| Error::Config(format!("target `{s}` is not of the form A1,A2->Y1")))?;
        let treated: Vec<String> = lhs
            .split(',')
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty())
            .collect();
        let outcome = rhs.trim().to_string();
        if treated.is_empty() || outcome.is_empty() {
            return Err(Error::Config(format!("target `{s}` is missing a side")));
        }
        Ok(Target { treated, outcome })
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}->{}", self.treated.join(","), self.outcome)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    pub n: usize,
    pub seed: u64,
    /// `[M, N, L]`.
    pub bins: [usize; 3],
    pub strategy: BinningStrategy,
    pub alpha: f64,
    pub proxy_rule: ProxyRule,
    /// Targets `A_S->Y_j`; `estimate` uses the first.
    pub targets: Vec<String>,
    pub proxy_mode: ProxyMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_q: Option<f64>,
    pub use_q: bool,
    pub grid_points: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
    /// Monte Carlo replicates per grid point for the ground truth.
    pub replicates: usize,
    /// Benchmark repetitions.
    pub reps: usize,
    /// Explicit per-repetition seeds. When absent they are derived from
    /// `seed`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rep_seeds: Option<Vec<u64>>,
    /// Score discovery against the true graph in benchmarks.
    pub discovery: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: None,
            csv: None,
            n: 600,
            seed: 0,
            bins: [15, 8, 5],
            strategy: BinningStrategy::Quantile,
            alpha: 0.05,
            proxy_rule: ProxyRule::SmallestOther,
            targets: vec!["A3->Y1".into()],
            proxy_mode: ProxyMode::Auto,
            z: None,
            w: None,
            lambda_h: None,
            lambda_q: None,
            use_q: true,
            grid_points: 10,
            grid_lo: 0.0,
            grid_hi: 1.0,
            replicates: 10_000,
            reps: 20,
            rep_seeds: None,
            discovery: true,
            out: None,
            jobs: None,
        }
    }
}

impl RunConfig {
    /// Parses a config document. A benchmark report is also accepted, in
    /// which case its embedded `config` is used.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let value = match value {
            serde_json::Value::Object(mut map) if map.contains_key("report_version") => map
                .remove("config")
                .ok_or_else(|| Error::Config("report has no embedded config".into()))?,
            v => v,
        };
        Ok(serde_json::from_value(value)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn bins(&self) -> Bins {
        Bins {
            m: self.bins[0],
            n: self.bins[1],
            l: self.bins[2],
        }
    }

    pub fn parsed_targets(&self) -> Result<Vec<Target>> {
        self.targets.iter().map(|t| t.parse()).collect()
    }

    pub fn grid(&self, dim: usize) -> Vec<Vec<f64>> {
        default_grid(self.grid_points, self.grid_lo, self.grid_hi, dim)
    }

    pub fn estimate_options(&self, dim: usize) -> EstimateOptions {
        let mut o = EstimateOptions::with_grid(self.grid(dim));
        o.lambda_h = self.lambda_h;
        o.lambda_q = self.lambda_q;
        o.use_q = self.use_q;
        o
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<()> {
        match (&self.scenario, &self.csv) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either `scenario` or `csv`, not both".into()))
            }
            (None, None) => return Err(Error::Config("no data source (`scenario` or `csv`)".into())),
            (Some(s), None) => {
                builtin_scenario(s)?;
                if self.n == 0 {
                    return Err(Error::Config("`n` must be positive".into()));
                }
            }
            (None, Some(_)) => {}
        }
        let b = self.bins;
        if b.iter().any(|&k| k < 2) {
            return Err(Error::Config(format!("bins {b:?}: every count must be at least 2")));
        }
        if b[0] <= b[1] {
            return Err(Error::Config(format!(
                "bins {b:?}: the treatment needs more bins than the proxy"
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        for lambda in [self.lambda_h, self.lambda_q].into_iter().flatten() {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::Config(format!("lambda {lambda} must be positive")));
            }
        }
        if self.grid_points == 0 || !(self.grid_hi >= self.grid_lo) {
            return Err(Error::Config("empty dose grid".into()));
        }
        if self.grid_points > 1 && self.grid_hi == self.grid_lo {
            return Err(Error::Config("grid with several points needs grid_hi > grid_lo".into()));
        }
        if self.replicates == 0 || self.reps == 0 {
            return Err(Error::Config("`replicates` and `reps` must be positive".into()));
        }
        if let Some(seeds) = &self.rep_seeds {
            if seeds.len() != self.reps {
                return Err(Error::Config(format!(
                    "{} rep_seeds for {} reps",
                    seeds.len(),
                    self.reps
                )));
            }
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("`jobs` must be positive".into()));
        }
        self.parsed_targets()?;
        if self.proxy_mode == ProxyMode::Explicit && (self.z.is_none() || self.w.is_none()) {
            return Err(Error::Config("explicit proxy mode needs both `z` and `w`".into()));
        }
        if self.proxy_mode == ProxyMode::Oracle && self.scenario.is_none() {
            return Err(Error::Config("oracle proxies need a built-in scenario".into()));
        }
        Ok(())
    }

    pub fn scm(&self) -> Result<Option<ScmSpec>> {
        self.scenario.as_deref().map(builtin_scenario).transpose()
    }

    /// Loads the CSV or samples the scenario with `seed`.
    pub fn load_dataset(&self, seed: u64) -> Result<Dataset> {
        match (&self.scenario, &self.csv) {
            (Some(s), None) => builtin_scenario(s)?.sample(self.n, seed),
            (None, Some(p)) => Dataset::read_csv(p),
            _ => Err(Error::Config("exactly one data source is required".into())),
        }
    }

    /// Resolves `(Z, W)` for `target`. `graph` is the discovered graph and
    /// is required in auto mode.
    pub fn assignment(
        &self,
        dataset: &Dataset,
        target: &Target,
        graph: Option<&BipartiteGraph>,
    ) -> Result<ProxyAssignment> {
        for name in target.treated.iter().chain(std::iter::once(&target.outcome)) {
            dataset.column(name)?;
        }
        let by_graph = |g: &BipartiteGraph| -> Result<ProxyAssignment> {
            let s = target
                .treated
                .iter()
                .map(|t| g.treatment_index(t))
                .collect::<Result<Vec<_>>>()?;
            select_proxies(g, &s, g.outcome_index(&target.outcome)?)
        };
        match self.proxy_mode {
            ProxyMode::Explicit => {
                let (z, w) = (self.z.clone().unwrap_or_default(), self.w.clone().unwrap_or_default());
                for name in [&z, &w] {
                    dataset.column(name)?;
                    if target.treated.contains(name) || *name == target.outcome {
                        return Err(Error::Config(format!(
                            "proxy `{name}` is part of the target"
                        )));
                    }
                }
                if z == w {
                    return Err(Error::Config("`z` and `w` must differ".into()));
                }
                Ok(ProxyAssignment {
                    treated: target.treated.clone(),
                    outcome: target.outcome.clone(),
                    z,
                    w,
                    case: None,
                })
            }
            ProxyMode::Oracle => {
                let spec = self
                    .scm()?
                    .ok_or_else(|| Error::Config("oracle proxies need a built-in scenario".into()))?;
                by_graph(&BipartiteGraph::truth(&spec))
            }
            ProxyMode::Auto => {
                let g = graph.ok_or_else(|| {
                    Error::Config("auto proxy mode needs a discovered graph".into())
                })?;
                by_graph(g)
            }
        }
    }
}
