//! Quadrature rules: Gauss-Legendre and Gauss-Jacobi (Golub-Welsch), and an
//! adaptive Gauss-Kronrod integrator for the few places where the integrand
//! has an interior peak or a mild endpoint singularity.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Nodes and weights of a rule on the reference interval [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped affinely onto [a, b]. The weight function of
    /// the rule is not rescaled; callers that use a Jacobi weight must account
    /// for the Jacobian of the weight themselves (see [`GaussJacobi`]).
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Gauss-Jacobi rule for the weight (1 - x)^a (1 + x)^b on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussJacobi {
    pub a: f64,
    pub b: f64,
    pub rule: Rule,
}

impl GaussJacobi {
    pub fn new(n: usize, a: f64, b: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "quadrature order must be positive".into(),
            ));
        }
        if !(a > -1.0 && b > -1.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Jacobi exponents must exceed -1 (got a={a}, b={b})"
            )));
        }
        let mut jm = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let k = i as f64;
            let s = 2.0 * k + a + b;
            let diag = if i == 0 {
                (b - a) / (a + b + 2.0)
            } else {
                (b * b - a * a) / (s * (s + 2.0))
            };
            jm[(i, i)] = diag;
            if i + 1 < n {
                let k1 = k + 1.0;
                let s1 = 2.0 * k1 + a + b;
                // (k1 + a + b) / (s1 - 1) cancels to 1 at k1 = 1
                let ratio = if i == 0 {
                    1.0
                } else {
                    (k1 + a + b) / (s1 - 1.0)
                };
                let num = 4.0 * k1 * (k1 + a) * (k1 + b) * ratio;
                let den = s1 * s1 * (s1 + 1.0);
                let off = (num / den).sqrt();
                jm[(i, i + 1)] = off;
                jm[(i + 1, i)] = off;
            }
        }
        // total mass of the weight: 2^(a+b+1) B(a+1, b+1)
        let mu0 = ((a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
            - ln_gamma(a + b + 2.0))
        .exp();
        let eig = SymmetricEigen::new(jm);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], mu0 * v0 * v0)
            })
            .collect();
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        Ok(Self {
            a,
            b,
            rule: Rule { nodes, weights },
        })
    }

    /// Integrate (hi - t)^a (t - lo)^b f(t) over [lo, hi].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        let half = 0.5 * (hi - lo);
        let scale = half.powf(1.0 + self.a + self.b);
        let mid = 0.5 * (hi + lo);
        scale
            * self
                .rule
                .nodes
                .iter()
                .zip(&self.rule.weights)
                .map(|(&x, &w)| w * f(mid + half * x))
                .sum::<f64>()
    }
}

/// Gauss-Legendre rule with `n` nodes.
pub fn gauss_legendre(n: usize) -> Result<Rule> {
    Ok(GaussJacobi::new(n, 0.0, 0.0)?.rule)
}

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
// Digits kept as published.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut abs = WGK[7] * fc.abs();
    for i in 0..7 {
        let dx = h * XGK[i];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        kron += WGK[i] * (f1 + f2);
        abs += WGK[i] * (f1.abs() + f2.abs());
        if i % 2 == 1 {
            gauss += WG[i / 2] * (f1 + f2);
        }
    }
    (kron * h, ((kron - gauss) * h).abs(), abs * h.abs())
}

/// Adaptive Gauss-Kronrod integration over [a, b], split first at the given
/// interior breakpoints. Stops when the summed error estimate is below
/// `rel_tol` times the integral of |f|, or after `max_intervals` panels.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    rel_tol: f64,
    max_intervals: usize,
) -> Result<f64> {
    let mut edges = vec![a];
    edges.extend(breakpoints.iter().copied().filter(|&p| p > a && p < b));
    edges.push(b);
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut abs_total = 0.0;
    for w in edges.windows(2) {
        let (v, e, s) = gk15(&mut f, w[0], w[1]);
        abs_total += s;
        panels.push((w[0], w[1], v, e));
    }
    loop {
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= rel_tol * abs_total.max(f64::MIN_POSITIVE) || abs_total == 0.0 {
            break;
        }
        if panels.len() >= max_intervals {
            return Err(Error::Convergence(format!(
                "adaptive quadrature: error estimate {err:e} after {} panels",
                panels.len()
            )));
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("at least one panel");
        let (lo, hi, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            // cannot split further in floating point
            break;
        }
        let (v1, e1, s1) = gk15(&mut f, lo, mid);
        let (v2, e2, s2) = gk15(&mut f, mid, hi);
        abs_total += s1 + s2;
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    let mut sum = 0.0;
    let mut comp = 0.0;
    for p in &panels {
        // Neumaier summation
        let t = sum + p.2;
        if sum.abs() >= p.2.abs() {
            comp += (sum - t) + p.2;
        } else {
            comp += (p.2 - t) + sum;
        }
        sum = t;
    }
    Ok(sum + comp)
}
