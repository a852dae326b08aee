//! Quantile and equal-width binning of continuous columns.
//!
//! Bins are right-closed: bin `b` holds `(edges[b], edges[b + 1]]`, and the
//! lowest bin also holds its lower edge. Quantile edges are order statistics
//! `x_(⌈k·n/B⌉)`, which gives counts that differ by at most one when all
//! values are distinct.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinningStrategy {
    #[default]
    Quantile,
    Uniform,
}

impl std::str::FromStr for BinningStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantile" => Ok(BinningStrategy::Quantile),
            "uniform" => Ok(BinningStrategy::Uniform),
            other => Err(Error::Config(format!("unknown binning strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub strategy: BinningStrategy,
    pub bins: usize,
}

impl BinningSpec {
    pub fn quantile(bins: usize) -> Self {
        BinningSpec {
            strategy: BinningStrategy::Quantile,
            bins,
        }
    }

    pub fn uniform(bins: usize) -> Self {
        BinningSpec {
            strategy: BinningStrategy::Uniform,
            bins,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedColumn {
    pub labels: Vec<usize>,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl BinnedColumn {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// Label of `x` under these edges. Values outside the fitted range fall
    /// into the boundary bins.
    pub fn label_of(&self, x: f64) -> usize {
        label_with(&self.edges, x)
    }

    /// Labels new data with the stored edges.
    pub fn transform(&self, values: &[f64]) -> Vec<usize> {
        values.iter().map(|&x| self.label_of(x)).collect()
    }
}

fn label_with(edges: &[f64], x: f64) -> usize {
    let interior = &edges[1..edges.len() - 1];
    interior.partition_point(|&e| e < x)
}

pub fn discretize(column: &[f64], spec: BinningSpec) -> Result<BinnedColumn> {
    let b = spec.bins;
    if b < 2 {
        return Err(Error::Precondition(format!("need at least 2 bins, got {b}")));
    }
    let n = column.len();
    if n < b {
        return Err(Error::Precondition(format!(
            "column of length {n} cannot fill {b} bins"
        )));
    }
    if let Some(row) = column.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            column: "<binned>".into(),
            row,
        });
    }
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let edges: Vec<f64> = match spec.strategy {
        BinningStrategy::Quantile => (0..=b)
            .map(|k| {
                if k == 0 {
                    lo
                } else {
                    sorted[(k * n).div_ceil(b) - 1]
                }
            })
            .collect(),
        BinningStrategy::Uniform => (0..=b)
            .map(|k| {
                if k == b {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / b as f64
                }
            })
            .collect(),
    };
    // The bottom bin is closed on both sides, so its two edges may coincide
    // (a bin holding only the minimum). Every other edge must be strictly
    // above its predecessor.
    let distinct = 1 + edges[1..].windows(2).filter(|w| w[1] > w[0]).count();
    if distinct < b || hi <= lo {
        return Err(Error::TooFewDistinctValues {
            needed: b,
            got: distinct.min(b - 1),
        });
    }
    let labels: Vec<usize> = column.iter().map(|&x| label_with(&edges, x)).collect();
    let mut counts = vec![0; b];
    for &l in &labels {
        counts[l] += 1;
    }
    Ok(BinnedColumn {
        labels,
        edges,
        counts,
    })
}
