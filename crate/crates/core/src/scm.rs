//! Declarative structural causal models over a latent confounder block `U`,
//! treatments `A` and outcomes `Y`.
//!
//! Each node is `intercept + Σ terms + noise`. A term is
//! `coefficient · f(argument)` where the argument is either an affine view of
//! one parent (`scale · parent + shift`) or a weighted sum of inner terms.
//! Roles are ordered `U → A → Y`; treatment–treatment and outcome–outcome
//! edges are rejected at construction.
//!
//! The JSON form mirrors these types one to one, for example
//!
//! ```json
//! {"nodes": [
//!   {"name": "U", "role": "confounder", "noise": {"law": "uniform", "lo": -1, "hi": 1}},
//!   {"name": "A", "role": "treatment", "noise": {"law": "normal", "mean": 0, "sd": 1},
//!    "terms": [{"coefficient": 1, "function": "linear",
//!               "argument": {"kind": "node", "node": "U"}}]},
//!   {"name": "Y", "role": "outcome", "noise": {"law": "normal", "mean": 0, "sd": 1},
//!    "intercept": 0.5,
//!    "terms": [{"coefficient": 2, "function": "sin",
//!               "argument": {"kind": "composite", "terms": [
//!                 {"coefficient": 1.4, "function": "linear", "argument": {"kind": "node", "node": "A"}},
//!                 {"coefficient": 2, "function": "square", "argument": {"kind": "node", "node": "U"}}]}}]}
//! ]}
//! ```

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Column, ColumnRole, Dataset};
use crate::error::{Error, Result};
use crate::estimator::EffectCurve;
use crate::rng::{inverse_normal_cdf, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Confounder,
    Treatment,
    Outcome,
}

impl NodeRole {
    fn rank(self) -> u8 {
        match self {
            NodeRole::Confounder => 0,
            NodeRole::Treatment => 1,
            NodeRole::Outcome => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum Noise {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl Noise {
    pub fn standard_normal() -> Self {
        Noise::Normal { mean: 0.0, sd: 1.0 }
    }

    #[inline]
    fn draw(&self, u: f64) -> f64 {
        match *self {
            Noise::Uniform { lo, hi } => lo + (hi - lo) * u,
            Noise::Normal { mean, sd } => {
                if sd == 0.0 {
                    mean
                } else {
                    mean + sd * inverse_normal_cdf(u)
                }
            }
        }
    }

    fn mean(&self) -> f64 {
        match *self {
            Noise::Uniform { lo, hi } => 0.5 * (lo + hi),
            Noise::Normal { mean, .. } => mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkFn {
    Linear,
    Tanh,
    Sin,
    Cos,
    Sigmoid,
    Square,
    Cube,
    ExpNeg,
}

impl LinkFn {
    pub const RANDOM_POOL: [LinkFn; 5] = [
        LinkFn::Linear,
        LinkFn::Tanh,
        LinkFn::Sin,
        LinkFn::Cos,
        LinkFn::Sigmoid,
    ];

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            LinkFn::Linear => x,
            LinkFn::Tanh => libm::tanh(x),
            LinkFn::Sin => libm::sin(x),
            LinkFn::Cos => libm::cos(x),
            LinkFn::Sigmoid => 1.0 / (1.0 + libm::exp(-x)),
            LinkFn::Square => x * x,
            LinkFn::Cube => x * x * x,
            LinkFn::ExpNeg => libm::exp(-x),
        }
    }
}

fn one() -> f64 {
    1.0
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Argument {
    Node {
        node: String,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        scale: f64,
        #[serde(default, skip_serializing_if = "is_zero")]
        shift: f64,
    },
    Composite {
        terms: Vec<Term>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coefficient: f64,
    pub function: LinkFn,
    pub argument: Argument,
}

impl Term {
    pub fn of(coefficient: f64, function: LinkFn, node: &str) -> Term {
        Term::scaled(coefficient, function, node, 1.0)
    }

    pub fn scaled(coefficient: f64, function: LinkFn, node: &str, scale: f64) -> Term {
        Term {
            coefficient,
            function,
            argument: Argument::Node {
                node: node.to_string(),
                scale,
                shift: 0.0,
            },
        }
    }

    pub fn composite(coefficient: f64, function: LinkFn, terms: Vec<Term>) -> Term {
        Term {
            coefficient,
            function,
            argument: Argument::Composite { terms },
        }
    }

    /// Parents reached through a chain of non-zero weights.
    fn effective_parents(&self, out: &mut Vec<String>) {
        if self.coefficient == 0.0 {
            return;
        }
        match &self.argument {
            Argument::Node { node, scale, .. } => {
                if *scale != 0.0 {
                    out.push(node.clone());
                }
            }
            Argument::Composite { terms } => {
                for t in terms {
                    t.effective_parents(out);
                }
            }
        }
    }

    fn all_parents(&self, out: &mut Vec<String>) {
        match &self.argument {
            Argument::Node { node, .. } => out.push(node.clone()),
            Argument::Composite { terms } => terms.iter().for_each(|t| t.all_parents(out)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub role: NodeRole,
    pub noise: Noise,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub intercept: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<Term>,
}

impl NodeSpec {
    pub fn new(name: &str, role: NodeRole, noise: Noise) -> Self {
        NodeSpec {
            name: name.to_string(),
            role,
            noise,
            intercept: 0.0,
            terms: Vec::new(),
        }
    }

    pub fn intercept(mut self, c: f64) -> Self {
        self.intercept = c;
        self
    }

    pub fn term(mut self, t: Term) -> Self {
        self.terms.push(t);
        self
    }
}

#[derive(Debug, Clone, Deserialize)]
struct RawScm {
    #[serde(default)]
    name: Option<String>,
    nodes: Vec<NodeSpec>,
}

/// A validated structural causal model. Node order is evaluation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScm")]
pub struct ScmSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    nodes: Vec<NodeSpec>,
    #[serde(skip)]
    compiled: Vec<CompiledNode>,
}

impl TryFrom<RawScm> for ScmSpec {
    type Error = Error;

    fn try_from(raw: RawScm) -> Result<Self> {
        let mut spec = ScmSpec::new(raw.nodes)?;
        spec.name = raw.name;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum CompiledArg {
    Node { index: usize, scale: f64, shift: f64 },
    Composite(Vec<CompiledTerm>),
}

#[derive(Debug, Clone, PartialEq)]
struct CompiledTerm {
    coefficient: f64,
    function: LinkFn,
    argument: CompiledArg,
}

impl CompiledTerm {
    #[inline]
    fn eval(&self, values: &[f64]) -> f64 {
        let x = match &self.argument {
            CompiledArg::Node { index, scale, shift } => scale * values[*index] + shift,
            CompiledArg::Composite(terms) => terms.iter().map(|t| t.eval(values)).sum(),
        };
        self.coefficient * self.function.apply(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct CompiledNode {
    intercept: f64,
    noise: Noise,
    terms: Vec<CompiledTerm>,
}

fn compile_term(t: &Term, index: &HashMap<&str, usize>) -> CompiledTerm {
    let argument = match &t.argument {
        Argument::Node { node, scale, shift } => CompiledArg::Node {
            index: index[node.as_str()],
            scale: *scale,
            shift: *shift,
        },
        Argument::Composite { terms } => {
            CompiledArg::Composite(terms.iter().map(|t| compile_term(t, index)).collect())
        }
    };
    CompiledTerm {
        coefficient: t.coefficient,
        function: t.function,
        argument,
    }
}

fn finite_term(t: &Term) -> bool {
    t.coefficient.is_finite()
        && match &t.argument {
            Argument::Node { scale, shift, .. } => scale.is_finite() && shift.is_finite(),
            Argument::Composite { terms } => !terms.is_empty() && terms.iter().all(finite_term),
        }
}

impl ScmSpec {
    pub fn new(mut nodes: Vec<NodeSpec>) -> Result<Self> {
        // Stable sort keeps declaration order within each role.
        nodes.sort_by_key(|n| n.role.rank());
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (k, node) in nodes.iter().enumerate() {
            if node.name.is_empty() || node.name.contains([',', ':', '\n', '"']) {
                return Err(Error::InvalidModel(format!("invalid node name `{}`", node.name)));
            }
            if index.insert(node.name.as_str(), k).is_some() {
                return Err(Error::InvalidModel(format!("duplicate node `{}`", node.name)));
            }
            let noise_ok = match node.noise {
                Noise::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
                Noise::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd >= 0.0,
            };
            if !noise_ok || !node.intercept.is_finite() || !node.terms.iter().all(finite_term) {
                return Err(Error::InvalidModel(format!(
                    "node `{}` has an invalid parameter",
                    node.name
                )));
            }
        }
        for node in &nodes {
            let mut parents = Vec::new();
            node.terms.iter().for_each(|t| t.all_parents(&mut parents));
            for p in parents {
                let &pk = index
                    .get(p.as_str())
                    .ok_or_else(|| Error::UnknownVariable(p.clone()))?;
                let parent_role = nodes[pk].role;
                if p == node.name {
                    return Err(Error::InvalidModel(format!("cycle: `{p}` references itself")));
                }
                let allowed = match node.role {
                    NodeRole::Confounder => false,
                    NodeRole::Treatment => parent_role == NodeRole::Confounder,
                    NodeRole::Outcome => parent_role != NodeRole::Outcome,
                };
                if !allowed {
                    return Err(Error::InvalidModel(format!(
                        "forbidden edge {p} ({:?}) -> {} ({:?})",
                        parent_role, node.name, node.role
                    )));
                }
            }
        }
        let compiled = nodes
            .iter()
            .map(|n| CompiledNode {
                intercept: n.intercept,
                noise: n.noise,
                terms: n.terms.iter().map(|t| compile_term(t, &index)).collect(),
            })
            .collect();
        Ok(ScmSpec {
            name: None,
            nodes,
            compiled,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn node_index(&self, name: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    fn names_with(&self, role: NodeRole) -> Vec<String> {
        self.nodes
            .iter()
            .filter(|n| n.role == role)
            .map(|n| n.name.clone())
            .collect()
    }

    pub fn confounder_names(&self) -> Vec<String> {
        self.names_with(NodeRole::Confounder)
    }

    pub fn treatment_names(&self) -> Vec<String> {
        self.names_with(NodeRole::Treatment)
    }

    pub fn outcome_names(&self) -> Vec<String> {
        self.names_with(NodeRole::Outcome)
    }

    /// Treatment → outcome adjacency implied by the structural equations
    /// (`[treatment][outcome]`), ignoring zero-weight references.
    pub fn true_adjacency(&self) -> Vec<Vec<bool>> {
        let treatments = self.treatment_names();
        let outcomes: Vec<&NodeSpec> = self
            .nodes
            .iter()
            .filter(|n| n.role == NodeRole::Outcome)
            .collect();
        treatments
            .iter()
            .map(|a| {
                outcomes
                    .iter()
                    .map(|y| {
                        let mut parents = Vec::new();
                        y.terms.iter().for_each(|t| t.effective_parents(&mut parents));
                        parents.iter().any(|p| p == a)
                    })
                    .collect()
            })
            .collect()
    }

    /// Evaluates one draw; `forced[k]` overrides node `k` (a do-intervention).
    #[inline]
    fn draw(&self, streams: &[Stream], counter: u64, forced: &[Option<f64>], out: &mut [f64]) {
        for (k, node) in self.compiled.iter().enumerate() {
            out[k] = match forced[k] {
                Some(v) => v,
                None => {
                    let structural: f64 =
                        node.intercept + node.terms.iter().map(|t| t.eval(out)).sum::<f64>();
                    structural + node.noise.draw(streams[k].uniform_at(counter))
                }
            };
        }
    }

    fn streams(&self, seed: u64) -> Vec<Stream> {
        (0..self.nodes.len())
            .map(|k| Stream::new(seed, k as u64))
            .collect()
    }

    /// Draws `n` samples of every node, latent confounders included
    /// (`[node][sample]`).
    pub fn sample_all(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(Error::Precondition("sample size must be at least 1".into()));
        }
        let streams = self.streams(seed);
        let forced = vec![None; self.nodes.len()];
        let mut cols = vec![Vec::with_capacity(n); self.nodes.len()];
        let mut row = vec![0.0; self.nodes.len()];
        for i in 0..n {
            self.draw(&streams, i as u64, &forced, &mut row);
            for (c, v) in cols.iter_mut().zip(&row) {
                c.push(*v);
            }
        }
        Ok(cols)
    }

    /// Draws `n` i.i.d. samples of the observed nodes. Confounders are latent
    /// and never exported.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        let cols = self.sample_all(n, seed)?;
        let columns = self
            .nodes
            .iter()
            .zip(cols)
            .filter_map(|(node, values)| {
                let role = match node.role {
                    NodeRole::Confounder => return None,
                    NodeRole::Treatment => ColumnRole::Treatment,
                    NodeRole::Outcome => ColumnRole::Outcome,
                };
                Some(Column {
                    name: node.name.clone(),
                    role,
                    values,
                })
            })
            .collect();
        Dataset::new(columns)
    }

    /// Monte Carlo estimate of `E[target | do(treated = a)]` at each grid
    /// point. Replicate `r` uses counter `r` on every node stream, so all
    /// grid points share the same exogenous draws.
    pub fn ground_truth_curve(
        &self,
        target: &str,
        treated: &[String],
        grid: &[Vec<f64>],
        replicates: usize,
        seed: u64,
    ) -> Result<EffectCurve> {
        if grid.is_empty() {
            return Err(Error::Precondition("grid must be nonempty".into()));
        }
        if replicates == 0 {
            return Err(Error::Precondition("replicates must be at least 1".into()));
        }
        let t = self.node_index(target)?;
        if self.nodes[t].role != NodeRole::Outcome {
            return Err(Error::UnknownVariable(format!("{target} is not an outcome")));
        }
        let mut treated_idx = Vec::with_capacity(treated.len());
        for name in treated {
            let k = self.node_index(name)?;
            if self.nodes[k].role != NodeRole::Treatment {
                return Err(Error::UnknownVariable(format!("{name} is not a treatment")));
            }
            treated_idx.push(k);
        }
        if treated_idx.is_empty() {
            return Err(Error::Precondition("treatment set must be nonempty".into()));
        }
        for a in grid {
            if a.len() != treated_idx.len() {
                return Err(Error::DimensionMismatch(format!(
                    "dose of length {} for {} treatments",
                    a.len(),
                    treated_idx.len()
                )));
            }
        }
        let streams = self.streams(seed);
        let stats: Vec<(f64, f64)> = grid
            .par_iter()
            .map(|dose| {
                let mut forced = vec![None; self.nodes.len()];
                for (&k, &v) in treated_idx.iter().zip(dose) {
                    forced[k] = Some(v);
                }
                let mut row = vec![0.0; self.nodes.len()];
                let (mut sum, mut sum_sq) = (0.0, 0.0);
                for r in 0..replicates {
                    self.draw(&streams, r as u64, &forced, &mut row);
                    sum += row[t];
                    sum_sq += row[t] * row[t];
                }
                let m = replicates as f64;
                let mean = sum / m;
                let var = if replicates > 1 {
                    ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0)
                } else {
                    0.0
                };
                (mean, (var / m).sqrt())
            })
            .collect();
        let mut curve = EffectCurve::new(grid.to_vec(), stats.iter().map(|s| s.0).collect())?;
        curve.n_used = replicates;
        curve.std_errors = Some(stats.iter().map(|s| s.1).collect());
        Ok(curve)
    }

    /// Expected value of each node's noise term (used for sanity checks).
    pub fn noise_mean(&self, name: &str) -> Result<f64> {
        Ok(self.nodes[self.node_index(name)?].noise.mean())
    }
}
