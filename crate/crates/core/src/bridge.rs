//! Kernel bridge functions.
//!
//! The outcome bridge `h` and treatment bridge `q` solve
//!
//! ```text
//! E[Y − h(A, W) | A, Z] = 0        E[q(A, Z) − 1/p(A | W) | A, W] = 0
//! ```
//!
//! and are fitted by penalized maximum moment restriction (PMMR). For `h`,
//! with `K_g` the Gram matrix on `(a, z)` and `K_m` the Gram matrix on
//! `(a, w)`, the empirical objective over `h = K_m α` is
//!
//! ```text
//! R(α) = (1/n²) (y − K_m α)ᵀ K_g (y − K_m α) + λ αᵀ K_m α
//! ```
//!
//! whose stationarity condition, after cancelling one `K_m`, is
//! `(K_g K_m + n² λ I) α = K_g y`. The `q` problem is the mirror image with
//! the two kernels swapped and target `1/p̂(a_i | w_i)`.
//!
//! Both kernels are Gaussian, `exp(−‖x − x′‖² / ℓ)` on the stacked input
//! `(a, w)` or `(a, z)`, with `ℓ = γ⁻¹` the median squared distance over that
//! input.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::discovery::ProxyAssignment;
use crate::error::{Error, Result};
use crate::linalg::solve_refined;

const MEDIAN_CAP: usize = 2000;

/// Columns used by the bridges and the estimator: dose rows for `A_S`, the
/// outcome, and the two proxies.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyData {
    pub doses: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
}

impl ProxyData {
    pub fn new(doses: Vec<Vec<f64>>, y: Vec<f64>, z: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if doses.len() != n || z.len() != n || w.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "doses {}, y {n}, z {}, w {}",
                doses.len(),
                z.len(),
                w.len()
            )));
        }
        let d = doses.first().map_or(0, |r| r.len());
        if n > 0 && d == 0 {
            return Err(Error::Precondition("dose vectors are empty".into()));
        }
        if doses.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch("ragged dose rows".into()));
        }
        let finite = doses.iter().flatten().chain(&y).chain(&z).chain(&w).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidDataset("non-finite value in bridge inputs".into()));
        }
        Ok(ProxyData { doses, y, z, w })
    }

    pub fn from_dataset(dataset: &Dataset, assignment: &ProxyAssignment) -> Result<Self> {
        let cols = assignment
            .treated
            .iter()
            .map(|name| {
                let c = dataset.column(name)?;
                if c.role != crate::dataset::ColumnRole::Treatment {
                    return Err(Error::Config(format!("`{name}` is not a treatment column")));
                }
                Ok(c.values.as_slice())
            })
            .collect::<Result<Vec<_>>>()?;
        if cols.is_empty() {
            return Err(Error::Precondition("treatment set is empty".into()));
        }
        let doses = (0..dataset.n())
            .map(|r| cols.iter().map(|c| c[r]).collect())
            .collect();
        let y = dataset.column(&assignment.outcome)?.values.clone();
        let z = dataset.column(&assignment.z)?.values.clone();
        let w = dataset.column(&assignment.w)?.values.clone();
        ProxyData::new(doses, y, z, w)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dose_dim(&self) -> usize {
        self.doses.first().map_or(0, |r| r.len())
    }

    fn with_proxy(&self, proxy: &[f64]) -> Vec<Vec<f64>> {
        self.doses
            .iter()
            .zip(proxy)
            .map(|(d, &v)| {
                let mut p = d.clone();
                p.push(v);
                p
            })
            .collect()
    }

    /// `(a_i, w_i)` points.
    pub fn aw(&self) -> Vec<Vec<f64>> {
        self.with_proxy(&self.w)
    }

    /// `(a_i, z_i)` points.
    pub fn az(&self) -> Vec<Vec<f64>> {
        self.with_proxy(&self.z)
    }
}

/// Median of pairwise squared Euclidean distances, over at most 2000 points
/// taken at a fixed stride.
pub fn median_trick(points: &[Vec<f64>]) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Precondition("median trick needs at least 2 points".into()));
    }
    let idx: Vec<usize> = if n > MEDIAN_CAP {
        (0..MEDIAN_CAP).map(|k| k * n / MEDIAN_CAP).collect()
    } else {
        (0..n).collect()
    };
    let mut d2: Vec<f64> = idx
        .par_iter()
        .enumerate()
        .flat_map_iter(|(a, &i)| {
            idx[a + 1..].iter().map(move |&j| sq_dist(&points[i], &points[j]))
        })
        .collect();
    let m = d2.len();
    let (_, &mut upper, _) = d2.select_nth_unstable_by(m / 2, f64::total_cmp);
    let median = if m % 2 == 1 {
        upper
    } else {
        let lower = d2[..m / 2].iter().cloned().fold(f64::MIN, f64::max);
        0.5 * (lower + upper)
    };
    if !(median > 0.0) {
        return Err(Error::Degenerate(
            "median pairwise distance is zero (points are identical)".into(),
        ));
    }
    Ok(median)
}

#[inline]
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Product of Gaussian kernels over consecutive coordinate blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductRbf {
    /// `(block width, lengthscale γ⁻¹)` in coordinate order.
    pub blocks: Vec<(usize, f64)>,
}

impl ProductRbf {
    pub fn single(dim: usize, lengthscale: f64) -> Self {
        ProductRbf {
            blocks: vec![(dim, lengthscale)],
        }
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.0).sum()
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut start = 0;
        let mut exponent = 0.0;
        for &(width, scale) in &self.blocks {
            exponent += sq_dist(&x[start..start + width], &y[start..start + width]) / scale;
            start += width;
        }
        libm::exp(-exponent)
    }
}

pub fn gram(x: &[Vec<f64>], y: &[Vec<f64>], kernel: &ProductRbf) -> Result<DMatrix<f64>> {
    let d = kernel.dim();
    if x.iter().chain(y).any(|p| p.len() != d) {
        return Err(Error::DimensionMismatch(format!(
            "kernel expects points of dimension {d}"
        )));
    }
    let rows: Vec<Vec<f64>> = x
        .par_iter()
        .map(|xi| y.iter().map(|yj| kernel.eval(xi, yj)).collect())
        .collect();
    Ok(DMatrix::from_fn(x.len(), y.len(), |i, j| rows[i][j]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// `γ⁻¹` of the kernel on `(a, w)`.
    pub aw_lengthscale: f64,
    /// `γ⁻¹` of the kernel on `(a, z)`.
    pub az_lengthscale: f64,
    pub lambda_h: f64,
    pub lambda_q: f64,
    /// Added to the Gram diagonals, relative to the unit kernel diagonal.
    pub jitter: f64,
    /// Fit each bridge to its centered target and carry the mean as an
    /// intercept.
    #[serde(default)]
    pub center_targets: bool,
}

pub const DEFAULT_JITTER: f64 = 1e-9;
pub const DEFAULT_LAMBDA: f64 = 0.2;

impl KernelConfig {
    /// Median-heuristic lengthscale for each kernel, taken over its full
    /// input vectors.
    pub fn from_data(data: &ProxyData, lambda_h: f64, lambda_q: f64) -> Result<Self> {
        let config = KernelConfig {
            aw_lengthscale: median_trick(&data.aw())?,
            az_lengthscale: median_trick(&data.az())?,
            lambda_h,
            lambda_q,
            jitter: DEFAULT_JITTER,
            center_targets: true,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.aw_lengthscale,
            self.az_lengthscale,
            self.lambda_h,
            self.lambda_q,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0))
            || !(self.jitter >= 0.0 && self.jitter.is_finite())
        {
            return Err(Error::Config(format!(
                "kernel lengthscales and regularizers must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Kernel on `(a, w)`.
    pub fn kernel_aw(&self, dose_dim: usize) -> ProductRbf {
        ProductRbf::single(dose_dim + 1, self.aw_lengthscale)
    }

    /// Kernel on `(a, z)`.
    pub fn kernel_az(&self, dose_dim: usize) -> ProductRbf {
        ProductRbf::single(dose_dim + 1, self.az_lengthscale)
    }
}

/// Regularizers per target for the built-in benchmark, `(λ_h, λ_q)`.
pub fn tabulated_lambdas(treated: &[String], outcome: &str) -> (f64, f64) {
    let t: Vec<&str> = treated.iter().map(String::as_str).collect();
    match (t.as_slice(), outcome) {
        (["A3"], "Y1") => (0.05, 0.2),
        (["A2"], "Y2") => (0.2, 1.0),
        (["A1", "A3"], "Y1") => (0.2, 1.0),
        (["A1", "A5"], "Y4") => (0.2, 0.2),
        _ => (DEFAULT_LAMBDA, DEFAULT_LAMBDA),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BridgeKind {
    OutcomeH,
    TreatmentQ,
}

/// `f(a, v) = offset + Σ_i α_i k(anchor_i, (a, v))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeModel {
    pub kind: BridgeKind,
    /// Training points `(a_i, w_i)` for `h`, `(a_i, z_i)` for `q`.
    pub anchors: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
    pub kernel: ProductRbf,
    pub config: KernelConfig,
}

/// Anything that can be evaluated as `f(a, v)`: fitted models, closed-form
/// oracles, constants.
pub trait Bridge: Sync {
    fn eval(&self, dose: &[f64], proxy: f64) -> f64;
}

impl<F: Fn(&[f64], f64) -> f64 + Sync> Bridge for F {
    fn eval(&self, dose: &[f64], proxy: f64) -> f64 {
        self(dose, proxy)
    }
}

impl Bridge for BridgeModel {
    fn eval(&self, dose: &[f64], proxy: f64) -> f64 {
        let mut x = Vec::with_capacity(dose.len() + 1);
        x.extend_from_slice(dose);
        x.push(proxy);
        self.offset
            + self
                .anchors
                .iter()
                .zip(&self.alpha)
                .map(|(p, a)| a * self.kernel.eval(p, &x))
                .sum::<f64>()
    }
}

impl BridgeModel {
    pub fn dose_dim(&self) -> usize {
        self.kernel.dim() - 1
    }
}

pub fn predict(model: &BridgeModel, dose: &[f64], proxy: f64) -> Result<f64> {
    if dose.len() != model.dose_dim() {
        return Err(Error::DimensionMismatch(format!(
            "dose of length {}, model expects {}",
            dose.len(),
            model.dose_dim()
        )));
    }
    Ok(model.eval(dose, proxy))
}

/// `R(α) = (1/n²) rᵀ K_res r + λ αᵀ K_rep α` with `r = t − K_rep α`.
pub fn pmmr_objective(
    k_res: &DMatrix<f64>,
    k_rep: &DMatrix<f64>,
    target: &DVector<f64>,
    alpha: &DVector<f64>,
    lambda: f64,
) -> f64 {
    let n = target.len() as f64;
    let r = target - k_rep * alpha;
    (r.dot(&(k_res * &r))) / (n * n) + lambda * alpha.dot(&(k_rep * alpha))
}

/// `∇R(α) = (2/n²) K_rep [(K_res K_rep + n²λ I) α − K_res t]`.
pub fn pmmr_gradient(
    k_res: &DMatrix<f64>,
    k_rep: &DMatrix<f64>,
    target: &DVector<f64>,
    alpha: &DVector<f64>,
    lambda: f64,
) -> DVector<f64> {
    let n = target.len() as f64;
    let inner = k_res * (k_rep * alpha) + alpha * (n * n * lambda) - k_res * target;
    k_rep * inner * (2.0 / (n * n))
}

/// Solves `(K_res K_rep + n²λ I) α = K_res t`.
pub fn solve_pmmr(
    k_res: &DMatrix<f64>,
    k_rep: &DMatrix<f64>,
    target: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    let n = target.len();
    if k_res.shape() != (n, n) || k_rep.shape() != (n, n) {
        return Err(Error::DimensionMismatch("Gram matrices and target disagree".into()));
    }
    if target.iter().all(|&t| t == 0.0) {
        return Ok(DVector::zeros(n));
    }
    let mut system = k_res * k_rep;
    let ridge = (n * n) as f64 * lambda;
    for k in 0..n {
        system[(k, k)] += ridge;
    }
    solve_refined(&system, &(k_res * target))
}

/// The jittered Gram matrices `(K_g on (a, z), K_m on (a, w))`.
pub fn bridge_grams(data: &ProxyData, config: &KernelConfig) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = data.dose_dim();
    let az = data.az();
    let aw = data.aw();
    let mut kg = gram(&az, &az, &config.kernel_az(d))?;
    let mut km = gram(&aw, &aw, &config.kernel_aw(d))?;
    for k in 0..data.n() {
        kg[(k, k)] += config.jitter;
        km[(k, k)] += config.jitter;
    }
    Ok((kg, km))
}

const MIN_BRIDGE_N: usize = 10;

fn centered(target: &[f64], center: bool) -> (DVector<f64>, f64) {
    let offset = if center {
        target.iter().sum::<f64>() / target.len() as f64
    } else {
        0.0
    };
    let v = DVector::from_iterator(target.len(), target.iter().map(|t| t - offset));
    if center && v.iter().all(|x| x.abs() <= 1e-14 * offset.abs()) {
        return (DVector::zeros(target.len()), offset);
    }
    (v, offset)
}

fn check_fit_inputs(data: &ProxyData, config: &KernelConfig) -> Result<()> {
    if data.n() < MIN_BRIDGE_N {
        return Err(Error::Precondition(format!(
            "bridge fitting needs at least {MIN_BRIDGE_N} samples, got {}",
            data.n()
        )));
    }
    config.validate()
}

/// Fits `h(a, w)`.
pub fn fit_outcome_bridge(data: &ProxyData, config: &KernelConfig) -> Result<BridgeModel> {
    check_fit_inputs(data, config)?;
    let (kg, km) = bridge_grams(data, config)?;
    let (y, offset) = centered(&data.y, config.center_targets);
    let alpha = solve_pmmr(&kg, &km, &y, config.lambda_h)?;
    Ok(BridgeModel {
        kind: BridgeKind::OutcomeH,
        anchors: data.aw(),
        alpha: alpha.iter().copied().collect(),
        offset,
        kernel: config.kernel_aw(data.dose_dim()),
        config: *config,
    })
}

/// Fits `q(a, z)` against the target `1/p̂(a_i | w_i)`.
pub fn fit_treatment_bridge(
    data: &ProxyData,
    config: &KernelConfig,
    propensity: &PropensityEstimate,
) -> Result<BridgeModel> {
    check_fit_inputs(data, config)?;
    if propensity.values.len() != data.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} propensity values for {} samples",
            propensity.values.len(),
            data.n()
        )));
    }
    let (kg, km) = bridge_grams(data, config)?;
    let inverse: Vec<f64> = propensity.values.iter().map(|p| 1.0 / p).collect();
    let (t, offset) = centered(&inverse, config.center_targets);
    let alpha = solve_pmmr(&km, &kg, &t, config.lambda_q)?;
    Ok(BridgeModel {
        kind: BridgeKind::TreatmentQ,
        anchors: data.az(),
        alpha: alpha.iter().copied().collect(),
        offset,
        kernel: config.kernel_az(data.dose_dim()),
        config: *config,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityConfig {
    /// Candidate bandwidths are `10^e` for `points` values of `e` evenly
    /// spaced in `[lo_exp, hi_exp]`, in units of each column's standard
    /// deviation.
    pub lo_exp: f64,
    pub hi_exp: f64,
    pub points: usize,
    pub folds: usize,
    pub floor: f64,
}

impl Default for PropensityConfig {
    fn default() -> Self {
        PropensityConfig {
            lo_exp: -1.0,
            hi_exp: 0.0,
            points: 20,
            folds: 3,
            floor: 1e-3,
        }
    }
}

impl PropensityConfig {
    pub fn grid(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![10f64.powf(self.hi_exp)];
        }
        (0..self.points)
            .map(|k| {
                let e = self.lo_exp + (self.hi_exp - self.lo_exp) * k as f64 / (self.points - 1) as f64;
                libm::pow(10.0, e)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityEstimate {
    /// `p̂(a_i | w_i)` in the original units of the dose.
    pub values: Vec<f64>,
    /// Selected bandwidths, in standard-deviation units.
    pub dose_bandwidth: f64,
    pub proxy_bandwidth: f64,
    pub floored: Vec<bool>,
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Conditional kernel density `p̂(a | w) = Σ K(a − a_j) K(w − w_j) / Σ K(w − w_j)`
/// with Gaussian kernels. Both bandwidths are picked jointly by contiguous
/// k-fold cross-validated log-likelihood.
pub fn estimate_propensity(
    doses: &[Vec<f64>],
    w: &[f64],
    config: &PropensityConfig,
) -> Result<PropensityEstimate> {
    let n = w.len();
    if doses.len() != n {
        return Err(Error::DimensionMismatch("doses and proxy differ in length".into()));
    }
    if n < 30 {
        return Err(Error::Precondition(format!(
            "propensity estimation needs at least 30 samples, got {n}"
        )));
    }
    if config.folds < 2 || config.points == 0 || !(config.floor > 0.0) {
        return Err(Error::Config("invalid propensity configuration".into()));
    }
    let d = doses[0].len();
    let w_sd = std_dev(w);
    if !(w_sd > 0.0) {
        return Err(Error::Degenerate("proxy has zero variance".into()));
    }
    let a_sd: Vec<f64> = (0..d)
        .map(|c| {
            let col: Vec<f64> = doses.iter().map(|r| r[c]).collect();
            let s = std_dev(&col);
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let a: Vec<Vec<f64>> = doses
        .iter()
        .map(|r| r.iter().zip(&a_sd).map(|(x, s)| x / s).collect())
        .collect();
    let ws: Vec<f64> = w.iter().map(|x| x / w_sd).collect();
    let jacobian: f64 = a_sd.iter().product();
    let grid = config.grid();
    let g = grid.len();
    let norm = |b: f64| libm::pow((2.0 * std::f64::consts::PI).sqrt() * b, d as f64);

    let fold_of = |i: usize| i * config.folds / n;
    // Held-out log-likelihood for every (dose bandwidth, proxy bandwidth).
    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let fi = fold_of(i);
            let mut num = vec![0.0; g * g];
            let mut den = vec![0.0; g];
            let mut ka = vec![0.0; g];
            let mut kw = vec![0.0; g];
            for j in 0..n {
                if fold_of(j) == fi {
                    continue;
                }
                let da = sq_dist(&a[i], &a[j]);
                let dw = (ws[i] - ws[j]) * (ws[i] - ws[j]);
                for (k, &b) in grid.iter().enumerate() {
                    ka[k] = libm::exp(-0.5 * da / (b * b));
                    kw[k] = libm::exp(-0.5 * dw / (b * b));
                }
                for bw in 0..g {
                    den[bw] += kw[bw];
                    for ba in 0..g {
                        num[ba * g + bw] += ka[ba] * kw[bw];
                    }
                }
            }
            let mut out = vec![0.0; g * g];
            for ba in 0..g {
                for bw in 0..g {
                    let p = if den[bw] > 0.0 {
                        num[ba * g + bw] / den[bw] / norm(grid[ba]) / jacobian
                    } else {
                        0.0
                    };
                    out[ba * g + bw] = libm::log(p.max(config.floor));
                }
            }
            out
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(vec![0.0; g * g], |mut acc, v| {
            acc.iter_mut().zip(v).for_each(|(x, y)| *x += y);
            acc
        });
    // First maximum in row-major order keeps ties deterministic.
    let mut best = 0;
    for k in 1..g * g {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    let (ba, bw) = (grid[best / g], grid[best % g]);
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..n {
                let kw = libm::exp(-0.5 * (ws[i] - ws[j]) * (ws[i] - ws[j]) / (bw * bw));
                den += kw;
                num += kw * libm::exp(-0.5 * sq_dist(&a[i], &a[j]) / (ba * ba));
            }
            num / den / norm(ba) / jacobian
        })
        .collect();
    let floored: Vec<bool> = values.iter().map(|&p| !(p >= config.floor)).collect();
    let values = values
        .into_iter()
        .map(|p| if p >= config.floor { p } else { config.floor })
        .collect();
    Ok(PropensityEstimate {
        values,
        dose_bandwidth: ba,
        proxy_bandwidth: bw,
        floored,
    })
}
