//! Kernel doubly robust dose-response estimation.
//!
//! For a dose `a` the estimate is the sample mean of
//!
//! ```text
//! K_h(A − a) · q(a, Z) · (Y − h(a, W)) + h(a, W)
//! ```
//!
//! with `K_h(u) = φ(u/h)/h` the Gaussian density kernel (a product over
//! coordinates for joint doses). For a Gaussian kernel the second moment
//! `κ₂(K) = ∫u²K(u)du` is 1 and the roughness `∫K(u)²du` is `1/(2√π)`; they set
//! the leading `h²` bias and `1/(nh)` variance terms. No bias correction is
//! applied.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridge::{
    estimate_propensity, fit_outcome_bridge, fit_treatment_bridge, tabulated_lambdas, Bridge,
    BridgeModel, KernelConfig, PropensityConfig, PropensityEstimate, ProxyData,
};
use crate::dataset::Dataset;
use crate::discovery::ProxyAssignment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectCurve {
    pub grid: Vec<Vec<f64>>,
    pub estimates: Vec<f64>,
    pub n_used: usize,
    /// Per-coordinate smoothing bandwidth (kernel estimator only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_errors: Option<Vec<f64>>,
}

impl EffectCurve {
    pub fn new(grid: Vec<Vec<f64>>, estimates: Vec<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::Precondition("grid must be nonempty".into()));
        }
        if grid.len() != estimates.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} grid points and {} estimates",
                grid.len(),
                estimates.len()
            )));
        }
        let d = grid[0].len();
        if d == 0 || grid.iter().any(|g| g.len() != d) {
            return Err(Error::DimensionMismatch("inconsistent dose dimension".into()));
        }
        if d == 1 && grid.windows(2).any(|w| !(w[1][0] > w[0][0])) {
            return Err(Error::Precondition("scalar grid must be strictly increasing".into()));
        }
        Ok(EffectCurve {
            grid,
            estimates,
            n_used: 0,
            bandwidth: None,
            std_errors: None,
        })
    }

    pub fn dose_dim(&self) -> usize {
        self.grid[0].len()
    }

    pub fn to_csv_string(&self) -> String {
        let d = self.dose_dim();
        let mut out = String::new();
        if d == 1 {
            out.push_str("a");
        } else {
            let names: Vec<String> = (1..=d).map(|k| format!("a{k}")).collect();
            out.push_str(&names.join(","));
        }
        out.push_str(",estimate\n");
        for (g, e) in self.grid.iter().zip(&self.estimates) {
            for v in g {
                let _ = write!(out, "{v:.16e},");
            }
            let _ = writeln!(out, "{e:.16e}");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    /// A self-contained SVG line chart of the curve against the first dose
    /// coordinate, optionally overlaid with a reference curve.
    pub fn to_svg(&self, title: &str, reference: Option<&EffectCurve>) -> String {
        let (w, h, pad) = (640.0, 400.0, 50.0);
        let xs: Vec<f64> = self.grid.iter().map(|g| g[0]).collect();
        let mut ys: Vec<f64> = self.estimates.clone();
        if let Some(r) = reference {
            ys.extend(&r.estimates);
        }
        let (x0, x1) = bounds(&xs);
        let (y0, y1) = bounds(&ys);
        let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        let line = |c: &EffectCurve| -> String {
            c.grid
                .iter()
                .zip(&c.estimates)
                .map(|(g, e)| format!("{:.2},{:.2}", px(g[0]), py(*e)))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
            w / 2.0,
            escape_xml(title)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{pad}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{b}" stroke="black"/>"#,
            b = h - pad,
            r = w - pad
        );
        for (v, x) in [(x0, px(x0)), (x1, px(x1))] {
            let _ = writeln!(
                svg,
                r#"<text x="{x:.2}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{v:.3}</text>"#,
                h - pad + 18.0
            );
        }
        for (v, y) in [(y0, py(y0)), (y1, py(y1))] {
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{y:.2}" font-family="sans-serif" font-size="12" text-anchor="end">{v:.3}</text>"#,
                pad - 6.0
            );
        }
        if let Some(r) = reference {
            let _ = writeln!(
                svg,
                r##"<polyline fill="none" stroke="#999999" stroke-dasharray="6,4" stroke-width="2" points="{}"/>"##,
                line(r)
            );
        }
        let _ = writeln!(
            svg,
            r##"<polyline fill="none" stroke="#1f77b4" stroke-width="2" points="{}"/>"##,
            line(self)
        );
        svg.push_str("</svg>\n");
        svg
    }
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// `points` evenly spaced doses in `[lo, hi]`, repeated across `dim`
/// coordinates (the diagonal for joint treatments).
pub fn default_grid(points: usize, lo: f64, hi: f64, dim: usize) -> Vec<Vec<f64>> {
    (0..points)
        .map(|k| {
            let t = if points == 1 {
                lo
            } else {
                lo + (hi - lo) * k as f64 / (points - 1) as f64
            };
            vec![t; dim]
        })
        .collect()
}

/// `1.5 · σ̂ · n^{-1/5}` from a standard deviation and sample size.
pub fn bandwidth_from(sd: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Precondition("bandwidth needs n >= 2".into()));
    }
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::Degenerate("zero-variance dose column".into()));
    }
    Ok(1.5 * sd * libm::pow(n as f64, -0.2))
}

/// Rule-of-thumb bandwidth for one dose column, using the sample standard
/// deviation (divisor `n − 1`).
pub fn bandwidth_rule(column: &[f64]) -> Result<f64> {
    let n = column.len();
    if n < 2 {
        return Err(Error::Precondition("bandwidth needs n >= 2".into()));
    }
    let mean = column.iter().sum::<f64>() / n as f64;
    let var = column.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    bandwidth_from(var.sqrt(), n)
}

pub fn bandwidths_for(data: &ProxyData) -> Result<Vec<f64>> {
    (0..data.dose_dim())
        .map(|c| bandwidth_rule(&data.doses.iter().map(|r| r[c]).collect::<Vec<_>>()))
        .collect()
}

/// `K_h(u) = φ(u / h) / h`.
#[inline]
pub fn gaussian_kernel(u: f64, h: f64) -> f64 {
    let t = u / h;
    libm::exp(-0.5 * t * t) / (h * (2.0 * std::f64::consts::PI).sqrt())
}

fn check_dose(data: &ProxyData, a: &[f64]) -> Result<()> {
    if a.len() != data.dose_dim() {
        return Err(Error::DimensionMismatch(format!(
            "dose of length {}, data has {} treatments",
            a.len(),
            data.dose_dim()
        )));
    }
    if data.n() == 0 {
        return Err(Error::Precondition("no samples".into()));
    }
    Ok(())
}

/// Per-sample doubly robust terms at dose `a`.
pub fn pkdr_terms(
    data: &ProxyData,
    h: &dyn Bridge,
    q: &dyn Bridge,
    a: &[f64],
    h_bw: &[f64],
) -> Result<Vec<f64>> {
    check_dose(data, a)?;
    if h_bw.len() != a.len() || h_bw.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::Precondition("one positive bandwidth per dose coordinate".into()));
    }
    Ok((0..data.n())
        .map(|i| {
            let hw = h.eval(a, data.w[i]);
            let k: f64 = data.doses[i]
                .iter()
                .zip(a)
                .zip(h_bw)
                .map(|((x, a), b)| gaussian_kernel(x - a, *b))
                .product();
            if k == 0.0 {
                hw
            } else {
                k * q.eval(a, data.z[i]) * (data.y[i] - hw) + hw
            }
        })
        .collect())
}

pub fn pkdr_estimate(
    data: &ProxyData,
    h: &dyn Bridge,
    q: &dyn Bridge,
    a: &[f64],
    h_bw: &[f64],
) -> Result<f64> {
    let t = pkdr_terms(data, h, q, a, h_bw)?;
    Ok(t.iter().sum::<f64>() / t.len() as f64)
}

/// Estimate together with the standard error of the sample mean.
pub fn pkdr_with_se(
    data: &ProxyData,
    h: &dyn Bridge,
    q: &dyn Bridge,
    a: &[f64],
    h_bw: &[f64],
) -> Result<(f64, f64)> {
    let t = pkdr_terms(data, h, q, a, h_bw)?;
    Ok(mean_and_se(&t))
}

fn mean_and_se(t: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let mean = t.iter().sum::<f64>() / n;
    if t.len() < 2 {
        return (mean, 0.0);
    }
    let var = t.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdrEstimate {
    pub value: f64,
    pub matched: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Indicator version for discrete doses: mean of
/// `1(A = a) q(a, Z)(Y − h(a, W)) + h(a, W)`. Without any sample at `a` the
/// correction is dropped and a warning returned.
pub fn pdr_estimate(
    data: &ProxyData,
    h: &dyn Bridge,
    q: &dyn Bridge,
    a: &[f64],
) -> Result<PdrEstimate> {
    check_dose(data, a)?;
    let mut matched = 0;
    let mut sum = 0.0;
    for i in 0..data.n() {
        let hw = h.eval(a, data.w[i]);
        sum += hw;
        if data.doses[i].as_slice() == a {
            matched += 1;
            sum += q.eval(a, data.z[i]) * (data.y[i] - hw);
        }
    }
    let warning = (matched == 0)
        .then(|| format!("no sample has dose {a:?}; reporting the outcome-bridge mean only"));
    Ok(PdrEstimate {
        value: sum / data.n() as f64,
        matched,
        warning,
    })
}

pub fn effect_curve(
    data: &ProxyData,
    h: &dyn Bridge,
    q: &dyn Bridge,
    grid: &[Vec<f64>],
    h_bw: &[f64],
) -> Result<EffectCurve> {
    if grid.is_empty() {
        return Err(Error::Precondition("grid must be nonempty".into()));
    }
    let stats = grid
        .par_iter()
        .map(|a| pkdr_terms(data, h, q, a, h_bw).map(|t| mean_and_se(&t)))
        .collect::<Result<Vec<_>>>()?;
    let mut curve = EffectCurve::new(grid.to_vec(), stats.iter().map(|s| s.0).collect())?;
    curve.n_used = data.n();
    curve.bandwidth = Some(h_bw.to_vec());
    curve.std_errors = Some(stats.iter().map(|s| s.1).collect());
    Ok(curve)
}

/// Mean absolute difference between two curves on the same grid.
pub fn cmae(estimate: &EffectCurve, truth: &EffectCurve) -> Result<f64> {
    let aligned = estimate.grid.len() == truth.grid.len()
        && estimate
            .grid
            .iter()
            .zip(&truth.grid)
            .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12));
    if !aligned {
        return Err(Error::DimensionMismatch("curves are on different grids".into()));
    }
    Ok(estimate
        .estimates
        .iter()
        .zip(&truth.estimates)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / estimate.estimates.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub lambda_h: Option<f64>,
    pub lambda_q: Option<f64>,
    /// When false the treatment bridge is skipped and the curve is the mean
    /// of `h(a, W)`.
    pub use_q: bool,
    pub grid: Vec<Vec<f64>>,
    pub propensity: PropensityConfig,
}

impl EstimateOptions {
    pub fn with_grid(grid: Vec<Vec<f64>>) -> Self {
        EstimateOptions {
            lambda_h: None,
            lambda_q: None,
            use_q: true,
            grid,
            propensity: PropensityConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedEstimate {
    pub assignment: ProxyAssignment,
    pub config: KernelConfig,
    pub curve: EffectCurve,
    pub h: BridgeModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<BridgeModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propensity: Option<PropensityEstimate>,
}

/// Fits both bridges for `assignment` and evaluates the curve.
pub fn fit_and_estimate(
    dataset: &Dataset,
    assignment: &ProxyAssignment,
    options: &EstimateOptions,
) -> Result<FittedEstimate> {
    let data = ProxyData::from_dataset(dataset, assignment)?;
    let (lh, lq) = tabulated_lambdas(&assignment.treated, &assignment.outcome);
    let config = KernelConfig::from_data(
        &data,
        options.lambda_h.unwrap_or(lh),
        options.lambda_q.unwrap_or(lq),
    )?;
    let h = fit_outcome_bridge(&data, &config)?;
    let h_bw = bandwidths_for(&data)?;
    let (q, propensity) = if options.use_q {
        let p = estimate_propensity(&data.doses, &data.w, &options.propensity)?;
        let q = fit_treatment_bridge(&data, &config, &p)?;
        (Some(q), Some(p))
    } else {
        (None, None)
    };
    let zero = |_: &[f64], _: f64| 0.0;
    let q_ref: &dyn Bridge = match &q {
        Some(m) => m,
        None => &zero,
    };
    let curve = effect_curve(&data, &h, q_ref, &options.grid, &h_bw)?;
    Ok(FittedEstimate {
        assignment: assignment.clone(),
        config,
        curve,
        h,
        q,
        propensity,
    })
}
