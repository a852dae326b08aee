//! Bipartite treatment → outcome graph discovery and proxy selection.
//!
//! Every candidate `(Z, W)` pair is checked against the conditional
//! independences
//!
//! ```text
//! Z ⊥ Y_j | A_S, A_{-S} \ {W, Z}, U
//! (Z, A_S) ⊥ W | A_{-S} \ {W, Z}, U
//! ```
//!
//! by d-separation in the DAG made of the latent `U` (a parent of every
//! treatment and outcome) and the estimated treatment → outcome edges.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::discretize::BinningStrategy;
use crate::error::{Error, Result};
use crate::proxytest::{test_edge, Bins};
use crate::scm::ScmSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    #[serde(rename = "I")]
    pub i_count: usize,
    #[serde(rename = "J")]
    pub j_count: usize,
    pub treatments: Vec<String>,
    pub outcomes: Vec<String>,
    /// `adjacency[i][j]` is the edge `A_i → Y_j`.
    pub adjacency: Vec<Vec<bool>>,
    pub p_values: Vec<Vec<f64>>,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl BipartiteGraph {
    /// A graph with known edges; p-values are 0 for edges and 1 otherwise.
    pub fn from_adjacency(
        treatments: Vec<String>,
        outcomes: Vec<String>,
        adjacency: Vec<Vec<bool>>,
    ) -> Result<Self> {
        if adjacency.len() != treatments.len()
            || adjacency.iter().any(|row| row.len() != outcomes.len())
        {
            return Err(Error::DimensionMismatch(format!(
                "adjacency does not match {} treatments × {} outcomes",
                treatments.len(),
                outcomes.len()
            )));
        }
        let p_values = adjacency
            .iter()
            .map(|row| row.iter().map(|&e| if e { 0.0 } else { 1.0 }).collect())
            .collect();
        Ok(BipartiteGraph {
            i_count: treatments.len(),
            j_count: outcomes.len(),
            treatments,
            outcomes,
            adjacency,
            p_values,
            alpha: 0.5,
            warnings: Vec::new(),
        })
    }

    /// The treatment → outcome graph implied by a model's equations.
    pub fn truth(spec: &ScmSpec) -> Self {
        BipartiteGraph::from_adjacency(
            spec.treatment_names(),
            spec.outcome_names(),
            spec.true_adjacency(),
        )
        .expect("adjacency built from the same spec")
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().flatten().filter(|&&e| e).count()
    }

    pub fn treatment_index(&self, name: &str) -> Result<usize> {
        self.treatments
            .iter()
            .position(|t| t == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn outcome_index(&self, name: &str) -> Result<usize> {
        self.outcomes
            .iter()
            .position(|t| t == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph bipartite {\n  rankdir=LR;\n");
        for t in &self.treatments {
            let _ = writeln!(out, "  \"{t}\" [shape=box];");
        }
        for y in &self.outcomes {
            let _ = writeln!(out, "  \"{y}\" [shape=ellipse];");
        }
        for (i, row) in self.adjacency.iter().enumerate() {
            for (j, &edge) in row.iter().enumerate() {
                if edge {
                    let _ = writeln!(
                        out,
                        "  \"{}\" -> \"{}\" [label=\"p={:.3e}\"];",
                        self.treatments[i], self.outcomes[j], self.p_values[i][j]
                    );
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

/// How the proxy treatment `A_{i'}` is chosen for the test of `A_i → Y_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProxyRule {
    /// The lowest-index treatment other than `A_i`.
    #[default]
    SmallestOther,
    /// Every other treatment; the edge is kept iff a strict majority reject.
    MajorityVote,
}

impl std::str::FromStr for ProxyRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smallest-other" => Ok(ProxyRule::SmallestOther),
            "majority-vote" | "all-others-majority-vote" => Ok(ProxyRule::MajorityVote),
            other => Err(Error::Config(format!("unknown proxy rule `{other}`"))),
        }
    }
}

/// Tests every treatment/outcome pair. A test that fails to run is recorded
/// as an edge with p-value 0 and a warning.
pub fn discover_graph(
    dataset: &Dataset,
    bins: Bins,
    strategy: BinningStrategy,
    alpha: f64,
    rule: ProxyRule,
) -> Result<BipartiteGraph> {
    let treatments = dataset.treatment_names();
    let outcomes = dataset.outcome_names();
    if treatments.len() < 2 {
        return Err(Error::Precondition(
            "discovery needs at least two treatments (one serves as proxy)".into(),
        ));
    }
    if outcomes.is_empty() {
        return Err(Error::Precondition("dataset has no outcome columns".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Precondition(format!("alpha {alpha} outside [0, 1]")));
    }
    let (ni, nj) = (treatments.len(), outcomes.len());
    let cells: Vec<(f64, Vec<String>)> = (0..ni * nj)
        .into_par_iter()
        .map(|cell| {
            let (i, j) = (cell / nj, cell % nj);
            let proxies: Vec<usize> = match rule {
                ProxyRule::SmallestOther => vec![if i == 0 { 1 } else { 0 }],
                ProxyRule::MajorityVote => (0..ni).filter(|&k| k != i).collect(),
            };
            let mut warnings = Vec::new();
            let mut ps: Vec<f64> = proxies
                .iter()
                .map(|&k| {
                    match test_edge(
                        dataset,
                        &treatments[i],
                        &outcomes[j],
                        &treatments[k],
                        bins,
                        strategy,
                        alpha,
                    ) {
                        Ok(r) => r.p_value,
                        Err(e) => {
                            warnings.push(format!(
                                "test {} -> {} (proxy {}) aborted: {e}",
                                treatments[i], outcomes[j], treatments[k]
                            ));
                            0.0
                        }
                    }
                })
                .collect();
            ps.sort_by(f64::total_cmp);
            // The (⌊k/2⌋+1)-th smallest p-value is below α exactly when a
            // strict majority of the k tests reject.
            (ps[ps.len() / 2], warnings)
        })
        .collect();
    let mut p_values = vec![vec![0.0; nj]; ni];
    let mut warnings = Vec::new();
    for (cell, (p, w)) in cells.into_iter().enumerate() {
        p_values[cell / nj][cell % nj] = p;
        warnings.extend(w);
    }
    let adjacency = p_values
        .iter()
        .map(|row| row.iter().map(|&p| p < alpha).collect())
        .collect();
    Ok(BipartiteGraph {
        i_count: ni,
        j_count: nj,
        treatments,
        outcomes,
        adjacency,
        p_values,
        alpha,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NullProxyCase {
    /// A missing edge `A_S → Y_{-j}` with at least three outcomes.
    #[serde(rename = "i")]
    I,
    /// A missing edge `A_{-S} → Y_j` with at least two other treatments.
    #[serde(rename = "ii")]
    Ii,
    /// A missing edge `A_{-S} → Y_{-j}`.
    #[serde(rename = "iii")]
    Iii,
    /// Single-treatment relaxation: any certified pair among the other
    /// treatments and outcomes.
    #[serde(rename = "remark")]
    Remark,
}

impl std::fmt::Display for NullProxyCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NullProxyCase::I => "i",
            NullProxyCase::Ii => "ii",
            NullProxyCase::Iii => "iii",
            NullProxyCase::Remark => "remark",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProxyAssignment {
    pub treated: Vec<String>,
    pub outcome: String,
    /// Treatment-inducing proxy.
    pub z: String,
    /// Outcome-inducing proxy.
    pub w: String,
    /// Branch that produced the pair; absent for user-supplied proxies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<NullProxyCase>,
}

fn validate_target(graph: &BipartiteGraph, s: &[usize], j: usize) -> Result<()> {
    if s.is_empty() {
        return Err(Error::Precondition("treatment set is empty".into()));
    }
    if let Some(&bad) = s.iter().find(|&&i| i >= graph.i_count) {
        return Err(Error::UnknownVariable(format!("treatment #{bad}")));
    }
    if j >= graph.j_count {
        return Err(Error::UnknownVariable(format!("outcome #{j}")));
    }
    let mut sorted = s.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != s.len() {
        return Err(Error::Precondition("treatment set has duplicates".into()));
    }
    Ok(())
}

/// First satisfied null-proxy branch in the order (iii), (i), (ii), or `None`.
pub fn check_null_proxy(
    graph: &BipartiteGraph,
    s: &[usize],
    j: usize,
) -> Result<Option<NullProxyCase>> {
    validate_target(graph, s, j)?;
    let others: Vec<usize> = (0..graph.i_count).filter(|i| !s.contains(i)).collect();
    let adj = &graph.adjacency;
    let missing = |i: usize, k: usize| !adj[i][k];
    let other_outcomes = || (0..graph.j_count).filter(move |&k| k != j);
    if others.iter().any(|&i| other_outcomes().any(|k| missing(i, k))) {
        return Ok(Some(NullProxyCase::Iii));
    }
    if graph.j_count >= 3 && s.iter().any(|&i| other_outcomes().any(|k| missing(i, k))) {
        return Ok(Some(NullProxyCase::I));
    }
    if others.len() >= 2 && others.iter().any(|&i| missing(i, j)) {
        return Ok(Some(NullProxyCase::Ii));
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    A(usize),
    Y(usize),
}

/// The latent-augmented DAG: node 0 is `U`, then treatments, then outcomes.
struct ProxyDag<'a> {
    graph: &'a BipartiteGraph,
}

impl ProxyDag<'_> {
    fn node(&self, v: Var) -> usize {
        match v {
            Var::A(i) => 1 + i,
            Var::Y(j) => 1 + self.graph.i_count + j,
        }
    }

    fn len(&self) -> usize {
        1 + self.graph.i_count + self.graph.j_count
    }

    fn parents(&self, node: usize) -> Vec<usize> {
        let ni = self.graph.i_count;
        if node == 0 {
            Vec::new()
        } else if node <= ni {
            vec![0]
        } else {
            let j = node - 1 - ni;
            std::iter::once(0)
                .chain((0..ni).filter(|&i| self.graph.adjacency[i][j]).map(|i| 1 + i))
                .collect()
        }
    }

    fn children(&self, node: usize) -> Vec<usize> {
        let ni = self.graph.i_count;
        if node == 0 {
            (1..self.len()).collect()
        } else if node <= ni {
            let i = node - 1;
            (0..self.graph.j_count)
                .filter(|&j| self.graph.adjacency[i][j])
                .map(|j| 1 + ni + j)
                .collect()
        } else {
            Vec::new()
        }
    }

    /// Whether every node in `x` is d-separated from every node in `y` given
    /// `z`, by the reachable-set (Bayes-ball) search.
    fn d_separated(&self, x: &[usize], y: &[usize], z: &[usize]) -> bool {
        let n = self.len();
        let mut observed = vec![false; n];
        z.iter().for_each(|&k| observed[k] = true);
        // Ancestors of the conditioning set activate colliders.
        let mut anc = observed.clone();
        let mut stack: Vec<usize> = z.to_vec();
        while let Some(v) = stack.pop() {
            for p in self.parents(v) {
                if !anc[p] {
                    anc[p] = true;
                    stack.push(p);
                }
            }
        }
        // (node, arrived from a child i.e. travelling up)
        let mut visited = vec![[false; 2]; n];
        let mut queue: Vec<(usize, bool)> = x.iter().map(|&k| (k, true)).collect();
        while let Some((v, up)) = queue.pop() {
            if visited[v][up as usize] {
                continue;
            }
            visited[v][up as usize] = true;
            if !observed[v] && y.contains(&v) {
                return false;
            }
            if up {
                if !observed[v] {
                    self.parents(v).into_iter().for_each(|p| queue.push((p, true)));
                    self.children(v).into_iter().for_each(|c| queue.push((c, false)));
                }
            } else {
                if !observed[v] {
                    self.children(v).into_iter().for_each(|c| queue.push((c, false)));
                }
                if anc[v] {
                    self.parents(v).into_iter().for_each(|p| queue.push((p, true)));
                }
            }
        }
        true
    }

    fn certifies(&self, s: &[usize], j: usize, z: Var, w: Var) -> bool {
        let zn = self.node(z);
        let wn = self.node(w);
        let a_s: Vec<usize> = s.iter().map(|&i| self.node(Var::A(i))).collect();
        let mut rest: Vec<usize> = (0..self.graph.i_count)
            .filter(|i| !s.contains(i))
            .map(|i| self.node(Var::A(i)))
            .filter(|&k| k != zn && k != wn)
            .collect();
        rest.push(0);
        let mut cond_z = rest.clone();
        cond_z.extend(&a_s);
        let yj = self.node(Var::Y(j));
        let mut lhs_w = a_s;
        lhs_w.push(zn);
        self.d_separated(&[zn], &[yj], &cond_z) && self.d_separated(&lhs_w, &[wn], &rest)
    }
}

fn name_of(graph: &BipartiteGraph, v: Var) -> String {
    match v {
        Var::A(i) => graph.treatments[i].clone(),
        Var::Y(j) => graph.outcomes[j].clone(),
    }
}

/// Picks an admissible `(Z, W)` pair for `E[Y_j | do(A_S)]`.
///
/// Branches are tried in the order (iii), (i), (ii), then the
/// single-treatment relaxation; the first candidate passing the
/// d-separation certificate is returned. In branch (iii), outcomes that are
/// children of `A_S` are preferred for `Z` (they carry the most information
/// about `A_S`), and `W` is the highest-index treatment with no edge into `Z`.
pub fn select_proxies(graph: &BipartiteGraph, s: &[usize], j: usize) -> Result<ProxyAssignment> {
    validate_target(graph, s, j)?;
    let dag = ProxyDag { graph };
    let adj = &graph.adjacency;
    let others: Vec<usize> = (0..graph.i_count).filter(|i| !s.contains(i)).collect();
    let other_outcomes: Vec<usize> = (0..graph.j_count).filter(|&k| k != j).collect();
    let mut candidates: Vec<(NullProxyCase, Var, Var)> = Vec::new();

    // (iii): Z = Y_b, W = A_a with a ∉ S, b ≠ j and no edge A_a → Y_b.
    // Children of A_S come first.
    let (mut z_order, rest): (Vec<usize>, Vec<usize>) = other_outcomes
        .iter()
        .partition(|&&b| s.iter().any(|&i| adj[i][b]));
    z_order.extend(rest);
    for &b in &z_order {
        for &a in others.iter().rev() {
            if !adj[a][b] {
                candidates.push((NullProxyCase::Iii, Var::Y(b), Var::A(a)));
            }
        }
    }
    // (i): W an outcome in Y_{-j} untouched by A_S, Z another outcome.
    if graph.j_count >= 3 {
        for &wb in &other_outcomes {
            if s.iter().all(|&i| !adj[i][wb]) {
                for &zb in &other_outcomes {
                    if zb != wb {
                        candidates.push((NullProxyCase::I, Var::Y(zb), Var::Y(wb)));
                    }
                }
            }
        }
    }
    // (ii): Z a treatment outside S with no edge into Y_j, W another one.
    if others.len() >= 2 {
        for &zc in &others {
            if !adj[zc][j] {
                for &wc in &others {
                    if wc != zc {
                        candidates.push((NullProxyCase::Ii, Var::A(zc), Var::A(wc)));
                    }
                }
            }
        }
    }
    // Relaxation for a single treatment.
    if s.len() == 1 {
        let pool: Vec<Var> = others
            .iter()
            .map(|&i| Var::A(i))
            .chain(other_outcomes.iter().map(|&k| Var::Y(k)))
            .collect();
        for &z in &pool {
            for &w in &pool {
                if z != w {
                    candidates.push((NullProxyCase::Remark, z, w));
                }
            }
        }
    }
    for (case, z, w) in candidates {
        if dag.certifies(s, j, z, w) {
            return Ok(ProxyAssignment {
                treated: s.iter().map(|&i| graph.treatments[i].clone()).collect(),
                outcome: graph.outcomes[j].clone(),
                z: name_of(graph, z),
                w: name_of(graph, w),
                case: Some(case),
            });
        }
    }
    Err(Error::AssumptionViolation)
}

/// Name-based wrapper around [`select_proxies`].
pub fn select_proxies_by_name(
    graph: &BipartiteGraph,
    treated: &[String],
    outcome: &str,
) -> Result<ProxyAssignment> {
    let s = treated
        .iter()
        .map(|t| graph.treatment_index(t))
        .collect::<Result<Vec<_>>>()?;
    select_proxies(graph, &s, graph.outcome_index(outcome)?)
}

/// Checks the two conditional independences for a given assignment on `graph`.
pub fn certify(graph: &BipartiteGraph, assignment: &ProxyAssignment) -> Result<bool> {
    let s = assignment
        .treated
        .iter()
        .map(|t| graph.treatment_index(t))
        .collect::<Result<Vec<_>>>()?;
    let j = graph.outcome_index(&assignment.outcome)?;
    let var = |name: &str| -> Result<Var> {
        graph
            .treatment_index(name)
            .map(Var::A)
            .or_else(|_| graph.outcome_index(name).map(Var::Y))
    };
    let (z, w) = (var(&assignment.z)?, var(&assignment.w)?);
    let involved = |v: Var| match v {
        Var::A(i) => s.contains(&i),
        Var::Y(k) => k == j,
    };
    if z == w || involved(z) || involved(w) {
        return Ok(false);
    }
    Ok(ProxyDag { graph }.certifies(&s, j, z, w))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Edge-set precision, recall and F1; each is reported as 0 when undefined.
pub fn graph_metrics(estimated: &BipartiteGraph, truth: &BipartiteGraph) -> Result<GraphMetrics> {
    if estimated.i_count != truth.i_count || estimated.j_count != truth.j_count {
        return Err(Error::DimensionMismatch(format!(
            "graphs are {}x{} and {}x{}",
            estimated.i_count, estimated.j_count, truth.i_count, truth.j_count
        )));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (er, tr) in estimated.adjacency.iter().zip(&truth.adjacency) {
        for (&e, &t) in er.iter().zip(tr) {
            match (e, t) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                _ => {}
            }
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(GraphMetrics {
        precision,
        recall,
        f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::synthetic_main;
    use proptest::prelude::*;

    fn graph(adj: Vec<Vec<bool>>) -> BipartiteGraph {
        let t = (1..=adj.len()).map(|i| format!("A{i}")).collect();
        let o = (1..=adj[0].len()).map(|j| format!("Y{j}")).collect();
        BipartiteGraph::from_adjacency(t, o, adj).unwrap()
    }

    fn pair(g: &BipartiteGraph, s: &[usize], j: usize) -> (String, String, NullProxyCase) {
        let p = select_proxies(g, s, j).unwrap();
        (p.z, p.w, p.case.unwrap())
    }

    #[test]
    fn truth_graph_pairings() {
        let g = BipartiteGraph::truth(&synthetic_main());
        assert_eq!(g.edge_count(), 11);
        assert_eq!(pair(&g, &[2], 0), ("Y3".into(), "A5".into(), NullProxyCase::Iii));
        assert_eq!(check_null_proxy(&g, &[2], 0).unwrap(), Some(NullProxyCase::Iii));
        assert_eq!(pair(&g, &[1], 1).0, "Y3");
        assert_eq!(pair(&g, &[1], 1).1, "A5");
        assert_eq!(pair(&g, &[0, 4], 3), ("Y2".into(), "A3".into(), NullProxyCase::Iii));
    }

    #[test]
    fn empty_two_by_two() {
        let g = graph(vec![vec![false; 2]; 2]);
        assert_eq!(check_null_proxy(&g, &[0], 0).unwrap(), Some(NullProxyCase::Iii));
        assert_eq!(pair(&g, &[0], 0), ("Y2".into(), "A2".into(), NullProxyCase::Iii));
    }

    #[test]
    fn complete_graph_violates() {
        let g = graph(vec![vec![true; 4]; 5]);
        assert_eq!(check_null_proxy(&g, &[2], 0).unwrap(), None);
        assert_eq!(
            select_proxies(&g, &[2], 0).unwrap_err().category(),
            "assumption-violation"
        );
        let g = graph(vec![vec![true; 2]; 2]);
        assert!(select_proxies(&g, &[0], 0).is_err());
    }

    #[test]
    fn case_i_uses_untouched_outcome_as_w() {
        // A_{-S} → everything, A_S misses Y3 only.
        let g = graph(vec![
            vec![true, true, false],
            vec![true, true, true],
        ]);
        assert_eq!(check_null_proxy(&g, &[0], 0).unwrap(), Some(NullProxyCase::I));
        let p = select_proxies(&g, &[0], 0).unwrap();
        assert_eq!((p.z.as_str(), p.w.as_str()), ("Y2", "Y3"));
        assert!(certify(&g, &p).unwrap());
    }

    #[test]
    fn case_ii_uses_treatments() {
        // Two outcomes, everything connected except A3 → Y1.
        let g = graph(vec![vec![true, true], vec![true, true], vec![false, true]]);
        assert_eq!(check_null_proxy(&g, &[0], 0).unwrap(), Some(NullProxyCase::Ii));
        let p = select_proxies(&g, &[0], 0).unwrap();
        assert_eq!((p.z.as_str(), p.w.as_str()), ("A3", "A2"));
    }

    fn any_certified_pair(g: &BipartiteGraph, s: &[usize], j: usize) -> bool {
        let pool: Vec<String> = (0..g.i_count)
            .filter(|i| !s.contains(i))
            .map(|i| g.treatments[i].clone())
            .chain((0..g.j_count).filter(|&k| k != j).map(|k| g.outcomes[k].clone()))
            .collect();
        pool.iter().any(|z| {
            pool.iter().filter(|w| *w != z).any(|w| {
                let a = ProxyAssignment {
                    treated: s.iter().map(|&i| g.treatments[i].clone()).collect(),
                    outcome: g.outcomes[j].clone(),
                    z: z.clone(),
                    w: w.clone(),
                    case: None,
                };
                certify(g, &a).unwrap()
            })
        })
    }

    #[test]
    fn exhaustive_small_graphs() {
        // Every 3x3 graph and every target: returned pairs are certified and
        // the search only gives up when no pair at all is certified.
        for bits in 0u32..512 {
            let adj: Vec<Vec<bool>> = (0..3)
                .map(|i| (0..3).map(|j| bits >> (3 * i + j) & 1 == 1).collect())
                .collect();
            let g = graph(adj);
            for s in [vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2], vec![1, 2]] {
                for j in 0..3 {
                    match select_proxies(&g, &s, j) {
                        Ok(p) => assert!(certify(&g, &p).unwrap()),
                        Err(e) => {
                            assert!(matches!(e, Error::AssumptionViolation));
                            assert!(!any_certified_pair(&g, &s, j), "{bits} {s:?} {j}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn branch_one_without_admissible_pair() {
        // A1 -> Y1, Y2 and A2 -> Y1, Y2. For S = {A1, A3}, j = Y3 the
        // missing edge A3 -> Y1 satisfies branch (i), yet every candidate W
        // is a child of A_S or a parent of every candidate Z.
        let g = graph(vec![
            vec![true, true, false],
            vec![true, true, false],
            vec![false, false, false],
        ]);
        assert_eq!(check_null_proxy(&g, &[0, 2], 2).unwrap(), Some(NullProxyCase::I));
        assert!(!any_certified_pair(&g, &[0, 2], 2));
        assert!(matches!(select_proxies(&g, &[0, 2], 2), Err(Error::AssumptionViolation)));
    }

    #[test]
    fn dot_and_json_output() {
        let g = BipartiteGraph::truth(&synthetic_main());
        let dot = g.to_dot();
        assert!(dot.contains("\"A3\" -> \"Y1\""));
        assert!(!dot.contains("\"A2\" -> \"Y3\""));
        let json = serde_json::to_value(&g).unwrap();
        assert_eq!(json["I"], 5);
        assert_eq!(json["J"], 4);
        let back: BipartiteGraph = serde_json::from_value(json).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn discovery_needs_two_treatments() {
        let spec = crate::scenarios::proxy_strength(1.0, crate::scenarios::ProxyLink::Linear, true);
        let ds = spec.sample(100, 1).unwrap();
        let one = Dataset::new(
            ds.columns().iter().filter(|c| c.name != "W").cloned().collect(),
        )
        .unwrap();
        let err = discover_graph(&one, Bins::SYNTHETIC, BinningStrategy::Quantile, 0.05, ProxyRule::SmallestOther)
            .unwrap_err();
        assert_eq!(err.category(), "precondition");
    }

    fn arb_graph() -> impl Strategy<Value = Vec<Vec<bool>>> {
        (2usize..5, 2usize..5).prop_flat_map(|(i, j)| {
            prop::collection::vec(prop::collection::vec(any::<bool>(), j), i)
        })
    }

    proptest! {
        #[test]
        fn selection_is_certified_and_deterministic(adj in arb_graph(), s0 in 0usize..5, j in 0usize..5) {
            let g = graph(adj);
            let s = [s0 % g.i_count];
            let j = j % g.j_count;
            if let Ok(p) = select_proxies(&g, &s, j) {
                prop_assert!(p.z != p.w);
                prop_assert!(certify(&g, &p).unwrap());
                prop_assert_eq!(select_proxies(&g, &s, j).unwrap(), p);
            } else {
                prop_assert_eq!(check_null_proxy(&g, &s, j).unwrap(), None);
            }
        }

        #[test]
        fn adding_edges_never_creates_a_branch(adj in arb_graph(), e in any::<(usize, usize)>(), j in 0usize..5) {
            let g = graph(adj);
            let j = j % g.j_count;
            let s = [0];
            let before = check_null_proxy(&g, &s, j).unwrap();
            let mut denser = g.clone();
            denser.adjacency[e.0 % g.i_count][e.1 % g.j_count] = true;
            let after = check_null_proxy(&denser, &s, j).unwrap();
            if before.is_none() {
                prop_assert!(after.is_none());
            }
        }
    }
}
