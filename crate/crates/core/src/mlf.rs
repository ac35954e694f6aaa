//! Two-parameter Mittag-Leffler function E_{α,β}(z) for real z ≤ 1 and
//! 0 < α ≤ 1, plus the per-mode kernels built from it.
//!
//! Three regimes are used:
//!
//! * `|z| ≤ taylor_radius`: the defining power series Σ z^k / Γ(αk + β),
//!   summed with Neumaier compensation.
//! * `z ≤ -asymptotic_threshold`: the algebraic expansion
//!   -Σ_{k≥1} z^{-k} / Γ(β - αk), truncated at its smallest term.
//! * in between: for α < 1 the Hankel contour collapsed onto the negative
//!   real axis, giving a real integral with a known power singularity at the
//!   origin; for α = 1 Kummer's transformation of ₁F₁(1; β; z), which sums
//!   positive terms only.
//!
//! The series radius is kept small on purpose. For α = 1/2 the terms of the
//! series at z = -10 reach 1e43 while the sum is 0.05, so a radius of 10
//! would lose every digit.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature;
use nalgebra::{Complex, ComplexField};

/// Reciprocal gamma function, exactly zero at the poles of Γ.
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return 0.0;
    }
    if x > 171.5 {
        return 0.0;
    }
    if x == x.floor() && x <= 30.0 {
        // exact factorials; the Lanczos approximation is off by a few ulp here
        return 1.0 / (1..x as u64).fold(1.0, |acc, k| acc * k as f64);
    }
    1.0 / gamma(x)
}

/// A single evaluation request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlQuery {
    pub alpha: f64,
    pub beta: f64,
    pub z: f64,
}

impl MlQuery {
    pub fn new(alpha: f64, beta: f64, z: f64) -> Self {
        Self { alpha, beta, z }
    }
}

/// Regime boundaries. The default seams are |z| = 1 and z = -50.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regimes {
    pub taylor_radius: f64,
    pub asymptotic_threshold: f64,
    /// Largest positive argument accepted.
    pub z_max: f64,
}

impl Default for Regimes {
    fn default() -> Self {
        Self {
            taylor_radius: 1.0,
            asymptotic_threshold: 50.0,
            z_max: 1.0,
        }
    }
}

impl Regimes {
    pub fn validate(&self) -> Result<()> {
        if !(self.taylor_radius > 0.0 && self.taylor_radius < self.asymptotic_threshold) {
            return Err(Error::InvalidArgument(format!(
                "regime seams must satisfy 0 < taylor_radius < asymptotic_threshold (got {} and {})",
                self.taylor_radius, self.asymptotic_threshold
            )));
        }
        if !(self.z_max >= 0.0 && self.z_max <= self.taylor_radius) {
            return Err(Error::InvalidArgument(
                "z_max must lie in [0, taylor_radius]".into(),
            ));
        }
        Ok(())
    }
}

fn check_params(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "Mittag-Leffler order alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "Mittag-Leffler parameter beta must be positive, got {beta}"
        )));
    }
    Ok(())
}

/// E_{α,β}(z) with the default regime seams.
pub fn mittag_leffler(q: MlQuery) -> Result<f64> {
    mittag_leffler_with(q, &Regimes::default())
}

pub fn mittag_leffler_with(q: MlQuery, regimes: &Regimes) -> Result<f64> {
    let MlQuery { alpha, beta, z } = q;
    check_params(alpha, beta)?;
    regimes.validate()?;
    if !z.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "argument must be finite, got {z}"
        )));
    }
    if z > regimes.z_max {
        return Err(Error::InvalidArgument(format!(
            "argument {z} exceeds the supported maximum {}",
            regimes.z_max
        )));
    }
    if alpha == 1.0 && beta == 1.0 {
        return Ok(z.exp());
    }
    if z.abs() <= regimes.taylor_radius {
        return taylor(alpha, beta, z);
    }
    let x = -z;
    if x >= regimes.asymptotic_threshold {
        return asymptotic(alpha, beta, x);
    }
    if alpha == 1.0 {
        kummer(beta, x)
    } else {
        contour(alpha, beta, x)
    }
}

fn neumaier_add(sum: &mut f64, comp: &mut f64, v: f64) {
    let t = *sum + v;
    if sum.abs() >= v.abs() {
        *comp += (*sum - t) + v;
    } else {
        *comp += (v - t) + *sum;
    }
    *sum = t;
}

fn taylor(alpha: f64, beta: f64, z: f64) -> Result<f64> {
    let (mut sum, mut comp) = (0.0, 0.0);
    let mut zk = 1.0;
    for k in 0..4000 {
        let c = rgamma(alpha * k as f64 + beta);
        let term = zk * c;
        neumaier_add(&mut sum, &mut comp, term);
        let s = (sum + comp).abs();
        // once αk+β > 2 the coefficients decrease, so a tiny term ends the series
        if alpha * k as f64 + beta > 2.0 && (term.abs() <= 1e-17 * s || zk == 0.0) {
            return Ok(sum + comp);
        }
        zk *= z;
    }
    Err(Error::Convergence(format!(
        "power series for E_{{{alpha},{beta}}}({z}) did not converge"
    )))
}

/// Bound on |1/Γ(β - αk)| that ignores the accidental zeros near poles:
/// by reflection |1/Γ(-y)| ≤ Γ(1 + y)/π.
fn coef_envelope(alpha: f64, beta: f64, k: usize) -> f64 {
    let y = alpha * k as f64 - beta;
    let direct = rgamma(beta - alpha * k as f64).abs();
    if y >= 0.0 {
        direct.max(statrs::function::gamma::ln_gamma(1.0 + y).exp() / PI)
    } else {
        direct
    }
}

/// Algebraic expansion for E_{α,β}(-x), x large. For α = 1 and integer β
/// the exponential part is added back, which makes the formula exact.
fn asymptotic(alpha: f64, beta: f64, x: f64) -> Result<f64> {
    let (mut sum, mut comp) = (0.0, 0.0);
    let mut prev = f64::INFINITY;
    let mut xk = 1.0;
    let mut last = 0.0;
    for k in 1..400 {
        xk /= x;
        let c = rgamma(beta - alpha * k as f64);
        if c == 0.0 && alpha == 1.0 {
            // integer β: all remaining coefficients vanish
            last = 0.0;
            break;
        }
        let env = xk * coef_envelope(alpha, beta, k);
        if env > prev {
            break;
        }
        let term = if k % 2 == 1 { xk * c } else { -xk * c };
        neumaier_add(&mut sum, &mut comp, term);
        prev = env;
        last = env;
        if last <= 1e-17 * (sum + comp).abs() {
            break;
        }
    }
    let mut val = sum + comp;
    if alpha == 1.0 && beta == beta.floor() {
        val += (-x).exp() * (-x).powi(1 - beta as i32);
    }
    if last > 1e-13 * val.abs().max(1e-300) {
        return Err(Error::Convergence(format!(
            "asymptotic expansion for E_{{{alpha},{beta}}}(-{x}) stalled at relative term {:e}",
            last / val.abs()
        )));
    }
    Ok(val)
}

/// E_{1,β}(-x) = e^{-x} ₁F₁(β-1; β; x) / Γ(β), with
/// ₁F₁(β-1; β; x) = Σ_k (β-1)/(β-1+k) x^k/k!.
fn kummer(beta: f64, x: f64) -> Result<f64> {
    let (mut sum, mut comp) = (0.0, 0.0);
    let mut p = (-x).exp(); // e^{-x} x^k / k!
    for k in 0..2000 {
        let kf = k as f64;
        let coef = if k == 0 {
            1.0
        } else {
            (beta - 1.0) / (beta - 1.0 + kf)
        };
        let term = p * coef;
        neumaier_add(&mut sum, &mut comp, term);
        if kf > x && term.abs() <= 1e-17 * (sum + comp).abs() {
            return Ok((sum + comp) * rgamma(beta));
        }
        p *= x / (kf + 1.0);
    }
    Err(Error::Convergence(format!(
        "Kummer series for E_{{1,{beta}}}(-{x})"
    )))
}

/// Collapsed Hankel contour for 0 < α < 1:
///
/// E_{α,β}(-x) = 1/(πα) ∫_0^∞ e^{-s^{1/α}} s^{(1-β)/α}
///               [s sin πβ + x sin π(β-α)] / (s² + 2xs cos πα + x²) ds,
///
/// valid for β < 1 + α. Larger β are first lowered with
/// E_{α,β}(z) = (E_{α,β-α}(z) - 1/Γ(β-α)) / z.
fn contour(alpha: f64, beta: f64, x: f64) -> Result<f64> {
    if beta >= 1.0 + 0.75 * alpha {
        let lower = contour(alpha, beta - alpha, x)?;
        return Ok((lower - rgamma(beta - alpha)) / -x);
    }
    let gamma_exp = (1.0 - beta) / alpha;
    let inv_alpha = 1.0 / alpha;
    // The bracket over the quadratic is Im[e^{iπβ} / (s - q)] with
    // q = -x e^{iπα}, so the integral is Im[e^{iπβ} ∫ w(s)/(s - q) ds].
    let rot = Complex::new((PI * beta).cos(), (PI * beta).sin());
    let q = -x * Complex::new((PI * alpha).cos(), (PI * alpha).sin());
    let weight = |s: f64| (-s.powf(inv_alpha)).exp() * s.powf(gamma_exp);
    let s_max = 80f64.powf(alpha);
    let w_max = s_max.powf(0.25);

    // As α → 1 the pole approaches the real axis at r = Re q. Subtracting
    // the first-order Taylor part of w at r leaves a bounded integrand and
    // the subtracted part integrates in closed form.
    let r = q.re;
    let (w0, w1) = if r > 0.0 && r < s_max {
        let w0 = weight(r);
        (
            w0,
            w0 * (gamma_exp / r - inv_alpha * r.powf(inv_alpha - 1.0)),
        )
    } else {
        (0.0, 0.0)
    };
    // s = t^4 removes the power singularity at s = 0
    let integrand = |t: f64| {
        let s = t * t * t * t;
        let w = if s == 0.0 { 0.0 } else { weight(s) };
        let num = w - w0 - w1 * (s - r);
        (rot * (4.0 * t * t * t * num) / (s - q)).im
    };
    let mut breaks = Vec::new();
    if r > 0.0 {
        let width = -q.im;
        for s in [r - 4.0 * width, r - width, r, r + width, r + 4.0 * width] {
            if s > 0.0 && s < s_max {
                breaks.push(s.powf(0.25));
            }
        }
    }
    let v = quadrature::adaptive(integrand, 0.0, w_max, &breaks, 1e-15, 4000)?;
    let log = (s_max - q).ln() - (-q).ln();
    let closed = rot * (w0 * log + w1 * (s_max + (q - r) * log));
    Ok((v + closed.im) / (PI * alpha))
}

/// k_α(t) = t^{α-1} E_{α,α}(λ t^α), the per-mode kernel of the forward
/// propagator.
pub fn ml_kernel(alpha: f64, lambda: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "kernel is singular at t = 0 and undefined for t < 0 (got t = {t})"
        )));
    }
    if lambda > 0.0 {
        return Err(Error::InvalidArgument(format!(
            "eigenvalue must be ≤ 0, got {lambda}"
        )));
    }
    let e = mittag_leffler(MlQuery::new(alpha, alpha, lambda * t.powf(alpha)))?;
    Ok(t.powf(alpha - 1.0) * e)
}

const CHEB_PIECES: usize = 24;
const CHEB_DEGREE: usize = 24;

/// Fast evaluator of E_{α,β}(z) on z ≤ 0 for fixed (α, β).
///
/// Series and asymptotic coefficients are precomputed; the middle range is
/// replaced by piecewise Chebyshev interpolants of the contour integral on
/// geometrically spaced subintervals of |z|.
#[derive(Debug, Clone)]
pub struct MittagLeffler {
    alpha: f64,
    beta: f64,
    regimes: Regimes,
    taylor_coef: Vec<f64>,
    asym_coef: Vec<f64>,
    edges: Vec<f64>,
    cheb: Vec<[f64; CHEB_DEGREE]>,
    exp_only: bool,
}

impl MittagLeffler {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        Self::with_regimes(alpha, beta, Regimes::default())
    }

    pub fn with_regimes(alpha: f64, beta: f64, regimes: Regimes) -> Result<Self> {
        check_params(alpha, beta)?;
        regimes.validate()?;
        let exp_only = alpha == 1.0 && beta == 1.0;

        let mut taylor_coef = Vec::new();
        let r = regimes.taylor_radius;
        let mut rk = 1.0;
        for k in 0..4000 {
            let c = rgamma(alpha * k as f64 + beta);
            taylor_coef.push(c);
            if alpha * k as f64 + beta > 2.0 && (c * rk) <= 1e-18 {
                break;
            }
            rk *= r;
        }

        let mut asym_coef = Vec::new();
        let x0 = regimes.asymptotic_threshold;
        let mut prev = f64::INFINITY;
        let mut xk = 1.0;
        for k in 1..400 {
            xk /= x0;
            let c = rgamma(beta - alpha * k as f64);
            let env = xk * coef_envelope(alpha, beta, k);
            if env > prev {
                break;
            }
            asym_coef.push(if k % 2 == 1 { c } else { -c });
            prev = env;
            if env < 1e-18 {
                break;
            }
        }

        let lo = regimes.taylor_radius;
        let hi = regimes.asymptotic_threshold;
        let edges: Vec<f64> = (0..=CHEB_PIECES)
            .map(|i| lo * (hi / lo).powf(i as f64 / CHEB_PIECES as f64))
            .collect();
        let mut cheb = Vec::with_capacity(CHEB_PIECES);
        if !exp_only {
            let n = CHEB_DEGREE;
            for w in edges.windows(2) {
                let (a, b) = (w[0], w[1]);
                let mut vals = [0.0; CHEB_DEGREE];
                for (j, v) in vals.iter_mut().enumerate() {
                    let theta = PI * (j as f64 + 0.5) / n as f64;
                    let x = 0.5 * (a + b) + 0.5 * (b - a) * theta.cos();
                    *v = if alpha == 1.0 {
                        kummer(beta, x)?
                    } else {
                        contour(alpha, beta, x)?
                    };
                }
                let mut coef = [0.0; CHEB_DEGREE];
                for (m, c) in coef.iter_mut().enumerate() {
                    let s: f64 = vals
                        .iter()
                        .enumerate()
                        .map(|(j, v)| v * (PI * m as f64 * (j as f64 + 0.5) / n as f64).cos())
                        .sum();
                    *c = 2.0 * s / n as f64;
                }
                coef[0] *= 0.5;
                cheb.push(coef);
            }
        }
        Ok(Self {
            alpha,
            beta,
            regimes,
            taylor_coef,
            asym_coef,
            edges,
            cheb,
            exp_only,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// E_{α,β}(z). Arguments above `z_max` are a caller bug.
    pub fn eval(&self, z: f64) -> f64 {
        debug_assert!(z <= self.regimes.z_max, "argument {z} above z_max");
        if self.exp_only {
            return z.exp();
        }
        let x = -z;
        if z.abs() <= self.regimes.taylor_radius {
            // Horner on the precomputed coefficients
            return self
                .taylor_coef
                .iter()
                .rev()
                .fold(0.0, |acc, &c| acc * z + c);
        }
        if x >= self.regimes.asymptotic_threshold {
            let inv = 1.0 / x;
            let mut v = self
                .asym_coef
                .iter()
                .rev()
                .fold(0.0, |acc, &c| acc * inv + c)
                * inv;
            if self.alpha == 1.0 && self.beta == self.beta.floor() {
                v += (-x).exp() * (-x).powi(1 - self.beta as i32);
            }
            return v;
        }
        let i = match self.edges.binary_search_by(|e| e.total_cmp(&x)) {
            Ok(i) => i.min(CHEB_PIECES - 1),
            Err(i) => i.saturating_sub(1).min(CHEB_PIECES - 1),
        };
        let (a, b) = (self.edges[i], self.edges[i + 1]);
        let u = (2.0 * x - a - b) / (b - a);
        let c = &self.cheb[i];
        let (mut b1, mut b2) = (0.0, 0.0);
        for &ck in c.iter().skip(1).rev() {
            let t = 2.0 * u * b1 - b2 + ck;
            b2 = b1;
            b1 = t;
        }
        u * b1 - b2 + c[0]
    }
}
