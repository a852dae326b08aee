//! Proxy-based test of `H₀: A_i ⊥ Y_j | U`.
//!
//! With `Ā_i` cut into `M` bins, a proxy treatment `Ā_{i'}` into `N < M`
//! bins and `Ȳ_j` into `L` levels, the null hypothesis implies that each
//! conditional-frequency vector `q_l = P̂(Ȳ = l | Ā_i = ·)` lies in the span
//! of the rows of `Q = P̂(Ā_{i'} | Ā_i)`. The test regresses the whitened
//! stacked vector `Σ̂^{-1/2} q̂` on the whitened block design
//! `Σ̂^{-1/2} Q₀`, `Q₀ = diag(Qᵀ, …, Qᵀ)`, and compares `n·|ξ|²` of the
//! residual `ξ` with `χ²((M − N)(L − 1))`. Stacked vectors are level-major:
//! entry `(l, m)` sits at `l·M + m`.
//!
//! Quantile binning covers the observed range, so unbounded supports need no
//! separate tail truncation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::discretize::{discretize, BinnedColumn, BinningSpec, BinningStrategy};
use crate::error::{Error, Result};
use crate::linalg::{column_projector, condition_number_sym, inv_sqrt_sym};
use crate::stats::chi_square_sf;

pub const DEFAULT_MIN_COUNT: usize = 5;
const EIGEN_FLOOR: f64 = 1e-12;
const PINV_TOL: f64 = 1e-10;

/// Bin counts `(M, N, L)` for the tested treatment, the proxy and the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bins {
    pub m: usize,
    pub n: usize,
    pub l: usize,
}

impl Bins {
    pub const SYNTHETIC: Bins = Bins { m: 15, n: 8, l: 5 };
    pub const REAL: Bins = Bins { m: 10, n: 6, l: 5 };
}

impl Default for Bins {
    fn default() -> Self {
        Bins::SYNTHETIC
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTables {
    pub m: usize,
    pub n_proxy: usize,
    pub l: usize,
    pub n: usize,
    pub bin_counts: Vec<usize>,
    /// `N × M`, column `m` is `P̂(Ā_{i'} = · | Ā_i = m)`.
    pub q_matrix: DMatrix<f64>,
    /// Length `M(L − 1)`, level-major.
    pub q: DVector<f64>,
}

impl ProbabilityTables {
    /// `Q₀`: `L − 1` diagonal copies of `Qᵀ`.
    pub fn design(&self) -> DMatrix<f64> {
        let (m, nn, levels) = (self.m, self.n_proxy, self.l - 1);
        let qt = self.q_matrix.transpose();
        let mut q0 = DMatrix::zeros(m * levels, nn * levels);
        for l in 0..levels {
            q0.view_mut((l * m, l * nn), (m, nn)).copy_from(&qt);
        }
        q0
    }
}

pub fn build_tables(
    a_i: &BinnedColumn,
    a_proxy: &BinnedColumn,
    y: &BinnedColumn,
) -> Result<ProbabilityTables> {
    let (m, nn, l) = (a_i.bins(), a_proxy.bins(), y.bins());
    let n = a_i.labels.len();
    if a_proxy.labels.len() != n || y.labels.len() != n {
        return Err(Error::DimensionMismatch(
            "binned columns have different lengths".into(),
        ));
    }
    if m <= nn {
        return Err(Error::Precondition(format!(
            "tested treatment needs more bins than the proxy (M = {m}, N = {nn})"
        )));
    }
    if l < 2 {
        return Err(Error::Precondition("outcome needs at least 2 levels".into()));
    }
    let mut bin_counts = vec![0usize; m];
    let mut proxy_counts = DMatrix::<f64>::zeros(nn, m);
    let mut y_counts = DMatrix::<f64>::zeros(l, m);
    for k in 0..n {
        let b = a_i.labels[k];
        bin_counts[b] += 1;
        proxy_counts[(a_proxy.labels[k], b)] += 1.0;
        y_counts[(y.labels[k], b)] += 1.0;
    }
    if let Some(bin) = bin_counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyBin { bin });
    }
    let mut q_matrix = proxy_counts;
    let mut q = DVector::zeros(m * (l - 1));
    for b in 0..m {
        let c = bin_counts[b] as f64;
        q_matrix.column_mut(b).scale_mut(1.0 / c);
        for lev in 0..l - 1 {
            q[lev * m + b] = y_counts[(lev, b)] / c;
        }
    }
    Ok(ProbabilityTables {
        m,
        n_proxy: nn,
        l,
        n,
        bin_counts,
        q_matrix,
        q,
    })
}

/// Plug-in multinomial covariance of `√n (q̂ − q)`, plus a ridge of
/// `1e-8 · trace / dim`.
pub fn estimate_covariance(tables: &ProbabilityTables, min_count: usize) -> Result<DMatrix<f64>> {
    if let Some((bin, &count)) = tables
        .bin_counts
        .iter()
        .enumerate()
        .find(|(_, &c)| c < min_count)
    {
        return Err(Error::BinUnderflow {
            bin,
            count,
            min: min_count,
        });
    }
    let (m, levels) = (tables.m, tables.l - 1);
    let dim = m * levels;
    let mut sigma = DMatrix::zeros(dim, dim);
    for b in 0..m {
        let scale = tables.n as f64 / tables.bin_counts[b] as f64;
        for l1 in 0..levels {
            let p1 = tables.q[l1 * m + b];
            for l2 in 0..levels {
                let p2 = tables.q[l2 * m + b];
                let delta = if l1 == l2 { p1 } else { 0.0 };
                sigma[(l1 * m + b, l2 * m + b)] = (delta - p1 * p2) * scale;
            }
        }
    }
    let trace = sigma.trace();
    let eps = if trace > 0.0 { 1e-8 * trace / dim as f64 } else { 1e-8 };
    for k in 0..dim {
        sigma[(k, k)] += eps;
    }
    Ok(sigma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub min_bin_count: usize,
    pub covariance_condition: f64,
    pub design_rank: usize,
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub i: String,
    pub j: String,
    pub proxy: String,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub diagnostics: Diagnostics,
}

/// Whitened design `Σ̂^{-1/2} Q₀` and whitened response `Σ̂^{-1/2} q̂`.
pub fn whiten(
    tables: &ProbabilityTables,
    sigma: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let dim = tables.m * (tables.l - 1);
    if sigma.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}x{}, expected {dim}x{dim}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let s = inv_sqrt_sym(sigma, EIGEN_FLOOR)?;
    Ok((&s * tables.design(), &s * &tables.q))
}

/// `I − Π` for the projector onto the whitened design, and the design rank.
pub fn residual_projector(q2: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let (p, rank) = column_projector(q2, PINV_TOL);
    (DMatrix::identity(p.nrows(), p.ncols()) - p, rank)
}

pub fn projection_statistic(
    tables: &ProbabilityTables,
    sigma: &DMatrix<f64>,
    n: usize,
    alpha: f64,
) -> Result<TestResult> {
    let (q2, qw) = whiten(tables, sigma)?;
    let (resid, rank) = residual_projector(&q2);
    let xi = resid * qw;
    let statistic = n as f64 * xi.norm_squared();
    let dim = tables.m * (tables.l - 1);
    let dof = dim - rank;
    let full_rank = tables.n_proxy * (tables.l - 1);
    let p_value = if dof == 0 { 1.0 } else { chi_square_sf(statistic, dof) };
    Ok(TestResult {
        i: String::new(),
        j: String::new(),
        proxy: String::new(),
        m: tables.m,
        n: tables.n_proxy,
        l: tables.l,
        statistic,
        dof,
        p_value,
        reject: p_value < alpha,
        alpha,
        diagnostics: Diagnostics {
            min_bin_count: tables.bin_counts.iter().copied().min().unwrap_or(0),
            covariance_condition: condition_number_sym(sigma),
            design_rank: rank,
            rank_deficient: rank < full_rank,
        },
    })
}

/// Discretizes `A_i`, the proxy and `Y_j` and runs the full test.
pub fn test_edge(
    dataset: &Dataset,
    i: &str,
    j: &str,
    proxy: &str,
    bins: Bins,
    strategy: BinningStrategy,
    alpha: f64,
) -> Result<TestResult> {
    if proxy == i {
        return Err(Error::Precondition(format!(
            "proxy `{proxy}` is the tested treatment"
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Precondition(format!("alpha {alpha} outside [0, 1]")));
    }
    if bins.m <= bins.n {
        return Err(Error::Precondition(format!(
            "tested treatment needs more bins than the proxy (M = {}, N = {})",
            bins.m, bins.n
        )));
    }
    let bin = |name: &str, b: usize| -> Result<BinnedColumn> {
        let col = dataset.column(name)?;
        discretize(&col.values, BinningSpec { strategy, bins: b })
    };
    let a_bins = bin(i, bins.m)?;
    let p_bins = bin(proxy, bins.n)?;
    let y_bins = bin(j, bins.l)?;
    let tables = build_tables(&a_bins, &p_bins, &y_bins)?;
    let sigma = estimate_covariance(&tables, DEFAULT_MIN_COUNT)?;
    let mut result = projection_statistic(&tables, &sigma, dataset.n(), alpha)?;
    result.i = i.to_string();
    result.j = j.to_string();
    result.proxy = proxy.to_string();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn binned(labels: Vec<usize>, bins: usize) -> BinnedColumn {
        let mut counts = vec![0; bins];
        labels.iter().for_each(|&l| counts[l] += 1);
        BinnedColumn {
            labels,
            edges: (0..=bins).map(|k| k as f64).collect(),
            counts,
        }
    }

    fn random_labels(seed: u64, tag: u64, n: usize, bins: usize) -> Vec<usize> {
        let s = Stream::new(seed, tag);
        (0..n as u64)
            .map(|c| (s.uniform_at(c) * bins as f64) as usize)
            .collect()
    }

    #[test]
    fn deterministic_proxy_gives_one_hot_columns() {
        let labels: Vec<usize> = (0..60).map(|k| k % 4).collect();
        let a = binned(labels.clone(), 4);
        let p = binned(labels.iter().map(|&l| l.min(2)).collect(), 3);
        let y = binned(random_labels(1, 1, 60, 2), 2);
        let t = build_tables(&a, &p, &y).unwrap();
        for col in t.q_matrix.column_iter() {
            assert_eq!(col.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(col.sum(), 1.0);
        }
    }

    #[test]
    fn constant_outcome_gives_unit_frequencies() {
        let a = binned((0..40).map(|k| k % 5).collect(), 5);
        let p = binned((0..40).map(|k| k % 3).collect(), 3);
        let y = binned(vec![0; 40], 2);
        let t = build_tables(&a, &p, &y).unwrap();
        assert_eq!(t.q, DVector::from_element(5, 1.0));
    }

    #[test]
    fn independent_labels_give_flat_proxy_columns() {
        let n = 60_000;
        let (m, nn) = (6, 4);
        let a = binned(random_labels(3, 0, n, m), m);
        let p = binned(random_labels(3, 1, n, nn), nn);
        let y = binned(random_labels(3, 2, n, 3), 3);
        let t = build_tables(&a, &p, &y).unwrap();
        for (b, col) in t.q_matrix.column_iter().enumerate() {
            let tol = 3.0 * (nn as f64 / t.bin_counts[b] as f64).sqrt();
            for v in col.iter() {
                assert!((v - 1.0 / nn as f64).abs() < tol);
            }
            assert!((col.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tables_reject_empty_bins_and_bad_shapes() {
        let a = binned(vec![0, 0, 1, 1], 3);
        let p = binned(vec![0, 1, 0, 1], 2);
        let y = binned(vec![0, 1, 0, 1], 2);
        assert!(matches!(build_tables(&a, &p, &y), Err(Error::EmptyBin { bin: 2 })));
        let a = binned(vec![0, 1, 0, 1], 2);
        assert_eq!(build_tables(&a, &p, &y).unwrap_err().category(), "precondition");
    }

    #[test]
    fn binary_outcome_covariance_closed_form() {
        // Equal bins, p̂ = 1/2 in every bin: variance (1/4)·(n / n_m) = M/4.
        let m = 4;
        let labels: Vec<usize> = (0..80).map(|k| k % m).collect();
        let yl: Vec<usize> = (0..80).map(|k| (k / m) % 2).collect();
        let t = build_tables(&binned(labels.clone(), m), &binned(labels.iter().map(|&l| l % 2).collect(), 2), &binned(yl, 2)).unwrap();
        assert!(t.q.iter().all(|&v| v == 0.5));
        let sigma = estimate_covariance(&t, 5).unwrap();
        let eps = 1e-8 * (0.25 * m as f64);
        for k in 0..m {
            assert!((sigma[(k, k)] - (0.25 * m as f64 + eps)).abs() < 1e-15);
        }
        assert!((sigma.clone() - DMatrix::from_diagonal(&sigma.diagonal())).amax() == 0.0);
    }

    #[test]
    fn degenerate_frequencies_are_positive_definite_after_jitter() {
        let m = 3;
        let labels: Vec<usize> = (0..30).map(|k| k % m).collect();
        // Bin 0 always sees level 0, so its block is singular before jitter.
        let yl: Vec<usize> = labels.iter().enumerate().map(|(k, &b)| if b == 0 { 0 } else { k % 3 }).collect();
        let t = build_tables(&binned(labels.clone(), m), &binned(labels.iter().map(|&l| l % 2).collect(), 2), &binned(yl, 3)).unwrap();
        let sigma = estimate_covariance(&t, 5).unwrap();
        assert_eq!(sigma, sigma.transpose());
        let min = sigma.clone().symmetric_eigen().eigenvalues.min();
        assert!(min > 0.0);
    }

    #[test]
    fn underflow_reported() {
        let labels: Vec<usize> = (0..12).map(|k| k % 3).collect();
        let t = build_tables(&binned(labels.clone(), 3), &binned(labels.iter().map(|&l| l % 2).collect(), 2), &binned(labels.iter().map(|&l| l % 2).collect(), 2)).unwrap();
        assert!(matches!(
            estimate_covariance(&t, 5),
            Err(Error::BinUnderflow { count: 4, min: 5, .. })
        ));
    }

    #[test]
    fn proxy_equal_to_treatment_is_rejected() {
        let ds = crate::scenarios::synthetic_main().sample(200, 1).unwrap();
        let err = test_edge(&ds, "A1", "Y1", "A1", Bins::SYNTHETIC, BinningStrategy::Quantile, 0.05).unwrap_err();
        assert_eq!(err.category(), "precondition");
    }
}
