//! Oracles shared by the integration tests.
#![allow(dead_code)]

use proxcausal::bridge::ProxyData;
use proxcausal::rng::Stream;

/// `U ~ N(0,1)`, `A = U + e_a`, `W = U + e_w`, `Z = U + e_z`,
/// `Y = 2A + U + ε`, with independent centered normal noises of the given
/// variances and `Var ε = 1`. `E[Y | do(a)] = 2a`.
#[derive(Debug, Clone, Copy)]
pub struct LinearGaussian {
    pub var_a: f64,
    pub var_w: f64,
    pub var_z: f64,
}

/// Closed-form treatment bridge `q(a, z) = exp(γz² + κz + δ)`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticExpBridge {
    pub gamma: f64,
    pub kappa_per_a: f64,
    pub delta0: f64,
    pub delta2: f64,
}

impl QuadraticExpBridge {
    pub fn eval(&self, a: f64, z: f64) -> f64 {
        (self.gamma * z * z + self.kappa_per_a * a * z + self.delta0 + self.delta2 * a * a).exp()
    }
}

impl LinearGaussian {
    pub const DEFAULT: LinearGaussian = LinearGaussian {
        var_a: 4.0,
        var_w: 1.0,
        var_z: 1.0,
    };

    pub fn sample(&self, n: usize, seed: u64) -> ProxyData {
        let s = Stream::new(seed, 0x11);
        let (sa, sw, sz) = (self.var_a.sqrt(), self.var_w.sqrt(), self.var_z.sqrt());
        let mut doses = Vec::with_capacity(n);
        let (mut y, mut z, mut w) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..n as u64 {
            let u = s.normal_at(5 * i);
            let a = u + sa * s.normal_at(5 * i + 1);
            w.push(u + sw * s.normal_at(5 * i + 2));
            z.push(u + sz * s.normal_at(5 * i + 3));
            y.push(2.0 * a + u + s.normal_at(5 * i + 4));
            doses.push(vec![a]);
        }
        ProxyData::new(doses, y, z, w).unwrap()
    }

    pub fn truth(&self, a: f64) -> f64 {
        2.0 * a
    }

    /// `h(a, w) = 2a + w` solves `E[Y − h(A, W) | A, Z] = 0` because
    /// `E[W | A, Z] = E[U | A, Z]`.
    pub fn h(&self, a: f64, w: f64) -> f64 {
        2.0 * a + w
    }

    /// Conditional law of `A` given `W = w`: mean `ρw`, variance `s2`.
    pub fn a_given_w(&self) -> (f64, f64) {
        let rho = 1.0 / (1.0 + self.var_w);
        (rho, 1.0 + self.var_a - rho)
    }

    pub fn inverse_propensity(&self, a: f64, w: f64) -> f64 {
        let (rho, s2) = self.a_given_w();
        (2.0 * std::f64::consts::PI * s2).sqrt() * ((a - rho * w).powi(2) / (2.0 * s2)).exp()
    }

    /// Law of `Z` given `A = a, W = w`: `N(m_a a + m_w w, τ²)`.
    pub fn z_given_aw(&self) -> (f64, f64, f64) {
        let v = 1.0 / (1.0 + 1.0 / self.var_a + 1.0 / self.var_w);
        (v / self.var_a, v / self.var_w, v + self.var_z)
    }

    /// Solves `E[q(a, Z) | A = a, W = w] = 1/p(a | w)` within the family
    /// `exp(γz² + κz + δ)` by matching Gaussian moment generating functions.
    pub fn q(&self) -> QuadraticExpBridge {
        let (rho, s2) = self.a_given_w();
        let (m_a, m_w, tau2) = self.z_given_aw();
        // a − ρw = c0·a − c1·μ with μ = m_a a + m_w w.
        let c1 = rho / m_w;
        let c0 = 1.0 + rho * m_a / m_w;
        let g = c1 * c1 / (2.0 * s2);
        let d = 1.0 / (1.0 + 2.0 * g * tau2);
        let gamma = g * d;
        // κ = −2 g d (c0/c1) a; δ = ½log(2π s2) + g (c0/c1)² a² + ½ log d − κ²τ²/(2d).
        let r = c0 / c1;
        let kappa_per_a = -2.0 * g * d * r;
        let delta0 = 0.5 * (2.0 * std::f64::consts::PI * s2).ln() + 0.5 * d.ln();
        let delta2 = g * r * r - kappa_per_a * kappa_per_a * tau2 / (2.0 * d);
        QuadraticExpBridge {
            gamma,
            kappa_per_a,
            delta0,
            delta2,
        }
    }
}

/// Minimizes the PMMR objective by conjugate gradients on its quadratic
/// form, using plain vectors and no factorization.
pub fn cg_pmmr(k_res: &[Vec<f64>], k_rep: &[Vec<f64>], t: &[f64], lambda: f64) -> Vec<f64> {
    let n = t.len();
    let nn = (n * n) as f64;
    let mv = |m: &[Vec<f64>], v: &[f64]| -> Vec<f64> {
        m.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    };
    // Hessian/2: H v = K_rep K_res K_rep v / n² + λ K_rep v.
    let hess = |v: &[f64]| -> Vec<f64> {
        let kv = mv(k_rep, v);
        let a = mv(k_rep, &mv(k_res, &kv));
        a.iter().zip(&kv).map(|(x, y)| x / nn + lambda * y).collect()
    };
    let b: Vec<f64> = mv(k_rep, &mv(k_res, t)).iter().map(|x| x / nn).collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let mut x = vec![0.0; n];
    for _restart in 0..20 {
        let hx = hess(&x);
        let mut r: Vec<f64> = b.iter().zip(&hx).map(|(a, c)| a - c).collect();
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        for _ in 0..4 * n {
            if rr.sqrt() <= 1e-15 * dot(&b, &b).sqrt().max(1e-300) {
                break;
            }
            let hp = hess(&p);
            let step = rr / dot(&p, &hp);
            for k in 0..n {
                x[k] += step * p[k];
                r[k] -= step * hp[k];
            }
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for k in 0..n {
                p[k] = r[k] + beta * p[k];
            }
        }
    }
    x
}

/// `Q(s, x)` upper tail of the chi-square law with `k` degrees of freedom by
/// adaptive Simpson integration of its density, with `Γ(k/2)` from the
/// half-integer recursion.
pub fn chi_square_sf_by_quadrature(x: f64, k: u32) -> f64 {
    let half = k as f64 / 2.0;
    let mut gamma = if k % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut s = if k % 2 == 0 { 1.0 } else { 0.5 };
    while s < half {
        gamma *= s;
        s += 1.0;
    }
    let log_norm = -(half * 2f64.ln()) - gamma.ln();
    let density = move |t: f64| -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        ((half - 1.0) * t.ln() - t / 2.0 + log_norm).exp()
    };
    // Past x + 600 the remaining mass is far below 1e-40 for k ≤ 40.
    let (lo, hi) = (x, x + 600.0);
    let pieces = 600;
    let width = (hi - lo) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let a = lo + i as f64 * width;
            adaptive_simpson(&density, a, a + width, 1e-15, 40)
        })
        .sum()
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let c = 0.5 * (a + b);
    let (fa, fb, fc) = (f(a), f(b), f(c));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_step(f, a, b, fa, fb, fc, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let (d, e) = (0.5 * (a + c), 0.5 * (c + b));
    let (fd, fe) = (f(d), f(e));
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, c, fa, fc, fd, left, tol / 2.0, depth - 1)
        + simpson_step(f, c, b, fc, fb, fe, right, tol / 2.0, depth - 1)
}

pub fn to_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}
