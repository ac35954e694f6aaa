//! Fractional solution operators in spectral coordinates.
//!
//! Every mode evolves independently, so operators act as per-mode scalings
//! by Mittag-Leffler kernels. The weakly singular time integrals (control
//! response and controllability Gram matrix) are handled by product
//! integration and by a substitution σ = τ^α that moves the singularity
//! into a Jacobi weight.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlf::{mittag_leffler, rgamma, MittagLeffler, MlQuery};
use crate::quadrature::{adaptive, gauss_legendre, GaussJacobi, Rule};
use crate::spectral::{eigenvalue, mode_count, ModeIndex, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    pub alpha: f64,
    /// Final time T.
    pub t_final: f64,
    /// Restrict α to (2/3, 1] instead of (1/2, 1].
    pub strict: bool,
}

impl FracParams {
    pub fn strict(alpha: f64, t_final: f64) -> Result<Self> {
        let p = Self {
            alpha,
            t_final,
            strict: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn relaxed(alpha: f64, t_final: f64) -> Result<Self> {
        let p = Self {
            alpha,
            t_final,
            strict: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let lo = if self.strict { 2.0 / 3.0 } else { 0.5 };
        if !(self.alpha > lo && self.alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha = {} outside ({lo:.6}, 1]{}",
                self.alpha,
                if self.strict && self.alpha > 0.5 && self.alpha <= 1.0 {
                    "; relaxed mode accepts (1/2, 1]"
                } else {
                    ""
                }
            )));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "final time must be positive, got {}",
                self.t_final
            )));
        }
        Ok(())
    }

    /// Grading exponent min(4, 2/(2α-1)) of control meshes toward T. The
    /// control is resolved through w = u (T-τ)^{1-α}, which still has a
    /// boundary layer of width |λ|^{-1/α} at T for the fast modes.
    pub fn control_grading(&self) -> f64 {
        (2.0 / (2.0 * self.alpha - 1.0)).min(4.0)
    }
}

/// Control samples on [0, T); the control behaves like (T-t)^{α-1} near T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Exponent of the endpoint singularity, α - 1.
    pub exponent: f64,
    /// lim_{t→T} u(t)(T-t)^{1-α}, when known exactly.
    pub tail_amplitude: Option<f64>,
}

impl ControlSignal {
    pub fn new(times: Vec<f64>, values: Vec<f64>, exponent: f64) -> Result<Self> {
        let s = Self {
            times,
            values,
            exponent,
            tail_amplitude: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.values.len() || self.times.is_empty() {
            return Err(Error::Dimension(format!(
                "control has {} times and {} values",
                self.times.len(),
                self.values.len()
            )));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "control mesh must be strictly increasing".into(),
            ));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "control values must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Coefficients c_k of the interpolating polynomial Σ c_k x^k through
/// (xs, ys), via Newton divided differences.
fn monomial_coeffs(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut d = ys.to_vec();
    for level in 1..n {
        for i in (level..n).rev() {
            d[i] = (d[i] - d[i - 1]) / (xs[i] - xs[i - level]);
        }
    }
    // Horner in Newton form: p = d0 + (x - x0)(d1 + (x - x1)(d2 + ...))
    let mut c = vec![0.0; n];
    c[0] = d[n - 1];
    for i in (0..n - 1).rev() {
        // c <- c·(x - xs[i]) + d[i]
        for k in (1..n).rev() {
            c[k] = c[k - 1] - xs[i] * c[k];
        }
        c[0] = d[i] - xs[i] * c[0];
    }
    c
}

/// Controllability Gram matrix in the eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub min_eigenvalue: f64,
    /// Eigenvalues in ascending order.
    pub spectrum: Vec<f64>,
    pub zero_modes: Vec<ModeIndex>,
}

impl GramMatrix {
    /// Wraps a symmetric matrix; zero modes are the vanishing diagonal entries.
    pub fn from_entries(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(Error::Dimension(format!(
                "Gram matrix must be square, got {:?}",
                entries.shape()
            )));
        }
        let order = order_of(n)?;
        let dmax = entries
            .diagonal()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let zero_modes = (0..n)
            .filter(|&i| entries[(i, i)].abs() <= 1e-24 * dmax)
            .map(|i| ModeIndex::from_flat(i, order))
            .collect();
        let mut spectrum: Vec<f64> = SymmetricEigen::new(entries.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        spectrum.sort_by(f64::total_cmp);
        Ok(Self {
            entries,
            min_eigenvalue: spectrum[0],
            spectrum,
            zero_modes,
        })
    }

    pub fn order(&self) -> usize {
        (self.entries.nrows() as f64).sqrt().round() as usize - 1
    }

    pub fn apply(&self, a: &[f64]) -> Vec<f64> {
        (&self.entries * DVector::from_column_slice(a))
            .as_slice()
            .to_vec()
    }

    /// ⟨a, G a⟩^{1/2}.
    pub fn norm_of(&self, a: &[f64]) -> f64 {
        let v = DVector::from_column_slice(a);
        v.dot(&(&self.entries * &v)).max(0.0).sqrt()
    }
}

/// Order J of a coefficient vector of length (J+1)².
pub fn order_of(len: usize) -> Result<usize> {
    let n = (len as f64).sqrt().round() as usize;
    if n == 0 || n * n != len {
        return Err(Error::Dimension(format!(
            "{len} is not a square number of modes"
        )));
    }
    Ok(n - 1)
}

/// Distinct eigenvalues of a basis of order J and, for every mode, the
/// index of its eigenvalue in that list.
fn distinct_eigenvalues(order: usize) -> (Vec<f64>, Vec<usize>) {
    let mut slots: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..mode_count(order) {
        let m = ModeIndex::from_flat(i, order);
        let key = m.j * m.j + m.k * m.k;
        let next = slots.len();
        slots.entry(key).or_insert(next);
    }
    let mut lambdas = vec![0.0; slots.len()];
    for (&key, &slot) in &slots {
        lambdas[slot] = -(key as f64);
    }
    let index = (0..mode_count(order))
        .map(|i| {
            let m = ModeIndex::from_flat(i, order);
            slots[&(m.j * m.j + m.k * m.k)]
        })
        .collect();
    (lambdas, index)
}

/// Precomputed Mittag-Leffler evaluators for one α.
#[derive(Debug, Clone)]
pub struct FracOps {
    params: FracParams,
    /// E_{α,α}
    e_aa: MittagLeffler,
    /// E_{α,1}
    e_a1: MittagLeffler,
    /// E_{α,α+1}
    e_a_a1: MittagLeffler,
    /// E_{α,α+2}
    e_a_a2: MittagLeffler,
    gl8: Rule,
}

impl FracOps {
    pub fn new(params: FracParams) -> Result<Self> {
        params.validate()?;
        let a = params.alpha;
        Ok(Self {
            params,
            e_aa: MittagLeffler::new(a, a)?,
            e_a1: MittagLeffler::new(a, 1.0)?,
            e_a_a1: MittagLeffler::new(a, a + 1.0)?,
            e_a_a2: MittagLeffler::new(a, a + 2.0)?,
            gl8: gauss_legendre(8)?,
        })
    }

    pub fn params(&self) -> &FracParams {
        &self.params
    }

    /// t^{α-1} E_{α,α}(λ t^α) for t > 0.
    pub fn kernel(&self, lambda: f64, t: f64) -> f64 {
        let a = self.params.alpha;
        t.powf(a - 1.0) * self.e_aa.eval(lambda * t.powf(a))
    }

    /// ∫_0^s kernel = s^α E_{α,α+1}(λ s^α).
    pub(crate) fn kernel_antiderivative(&self, lambda: f64, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let sa = s.powf(self.params.alpha);
        sa * self.e_a_a1.eval(lambda * sa)
    }

    /// Second antiderivative s^{α+1} E_{α,α+2}(λ s^α).
    pub(crate) fn kernel_second_antiderivative(&self, lambda: f64, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let sa = s.powf(self.params.alpha);
        s * sa * self.e_a_a2.eval(lambda * sa)
    }

    pub fn propagate_free(&self, y0: &SpectralField, t: f64) -> Result<SpectralField> {
        let p = &self.params;
        if !(t > 0.0 && t <= p.t_final) {
            return Err(Error::InvalidArgument(format!(
                "free propagation needs t in (0, T]; got t = {t} (solutions are singular at t = 0 for α < 1)"
            )));
        }
        let order = y0.order();
        let coeffs = y0
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, a)| a * self.kernel(eigenvalue(ModeIndex::from_flat(i, order)), t))
            .collect();
        SpectralField::from_coeffs(order, coeffs)
    }

    pub fn adjoint_state(&self, phi0: &SpectralField, t: f64) -> Result<SpectralField> {
        let p = &self.params;
        if !(0.0..=p.t_final).contains(&t) {
            return Err(Error::InvalidArgument(format!(
                "adjoint state needs t in [0, T]; got {t}"
            )));
        }
        let order = phi0.order();
        let r = (p.t_final - t).powf(p.alpha);
        let coeffs = phi0
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, a)| {
                a * self
                    .e_a1
                    .eval(eigenvalue(ModeIndex::from_flat(i, order)) * r)
            })
            .collect();
        SpectralField::from_coeffs(order, coeffs)
    }

    pub fn hum_control_value(&self, phi0: &SpectralField, b: &[f64], t: f64) -> Result<f64> {
        let p = &self.params;
        check_actuator(phi0, b)?;
        if !(t >= 0.0 && t < p.t_final) {
            return Err(Error::InvalidArgument(format!(
                "control is singular at T; need t in [0, T), got {t}"
            )));
        }
        let order = phi0.order();
        let s = p.t_final - t;
        Ok(phi0
            .coeffs()
            .iter()
            .zip(b)
            .enumerate()
            .filter(|(_, (a, bn))| **a != 0.0 && **bn != 0.0)
            .map(|(i, (a, bn))| a * bn * self.kernel(eigenvalue(ModeIndex::from_flat(i, order)), s))
            .sum())
    }

    pub fn sample_control(
        &self,
        phi0: &SpectralField,
        b: &[f64],
        mesh: &[f64],
    ) -> Result<ControlSignal> {
        check_actuator(phi0, b)?;
        if mesh.iter().any(|&t| !(t >= 0.0 && t < self.params.t_final)) {
            return Err(Error::InvalidArgument(
                "control mesh must lie in [0, T)".into(),
            ));
        }
        let values = mesh
            .iter()
            .map(|&t| self.hum_control_value(phi0, b, t))
            .collect::<Result<Vec<_>>>()?;
        let amp: f64 = phi0
            .coeffs()
            .iter()
            .zip(b)
            .map(|(a, bn)| a * bn)
            .sum::<f64>()
            * rgamma(self.params.alpha);
        let mut sig = ControlSignal::new(mesh.to_vec(), values, self.params.alpha - 1.0)?;
        sig.tail_amplitude = Some(amp);
        Ok(sig)
    }

    /// ∫_0^t k_λ(t-τ) u(τ) dτ for every distinct λ, by product integration
    /// against the piecewise-linear interpolant of u.
    fn response(&self, u: &ControlSignal, lambdas: &[f64], t: f64) -> Result<Vec<f64>> {
        let p = &self.params;
        let tau = &u.times;
        let n = tau.len();
        let mut out = vec![0.0; lambdas.len()];
        if t == 0.0 {
            return Ok(out);
        }
        let last = tau[n - 1];
        let at_final = (t - p.t_final).abs() <= 1e-14 * p.t_final;
        if t > last && !at_final {
            return Err(Error::InvalidArgument(format!(
                "control mesh ends at {last} and does not cover t = {t}"
            )));
        }
        if at_final {
            for (slot, &lambda) in lambdas.iter().enumerate() {
                out[slot] = self.final_response(u, lambda)?;
            }
            return Ok(out);
        }
        // intervals fully inside [0, t]
        let full = tau.iter().take_while(|&&x| x <= t).count();
        for (slot, &lambda) in lambdas.iter().enumerate() {
            let mut acc = 0.0;
            let mut a_prev = self.kernel_antiderivative(lambda, t - tau[0]);
            let mut k2_prev = self.kernel_second_antiderivative(lambda, t - tau[0]);
            for i in 0..full.saturating_sub(1) {
                // s1 = t - τ_i, s0 = t - τ_{i+1}
                let h = tau[i + 1] - tau[i];
                let s0 = t - tau[i + 1];
                let a0 = self.kernel_antiderivative(lambda, s0);
                let k2_0 = self.kernel_second_antiderivative(lambda, s0);
                let dk2 = (k2_prev - k2_0) / h;
                acc += u.values[i] * (a_prev - dk2) + u.values[i + 1] * (dk2 - a0);
                a_prev = a0;
                k2_prev = k2_0;
            }
            let j = full - 1;
            if t > tau[j] {
                // partial interval [τ_j, t] with u(t) interpolated
                let h = t - tau[j];
                let theta = h / (tau[j + 1] - tau[j]);
                let ut = (1.0 - theta) * u.values[j] + theta * u.values[j + 1];
                let dk2 = k2_prev / h;
                acc += u.values[j] * (a_prev - dk2) + ut * dk2;
            }
            out[slot] = acc;
        }
        Ok(out)
    }

    /// Response at t = T. There the kernel and the control share the
    /// endpoint, so u = s^{α-1} w with s = T - τ and w is interpolated by
    /// local cubics instead of u; the weight s^{2α-2} E_{α,α}(λ s^α) is
    /// integrated by its power series near s = 0 and by Gauss-Legendre on
    /// intervals with s1 ≤ 2 s0.
    fn final_response(&self, u: &ControlSignal, lambda: f64) -> Result<f64> {
        let a = self.params.alpha;
        let t_final = self.params.t_final;
        let tau = &u.times;
        let n = tau.len();
        let w_end = match u.tail_amplitude {
            Some(v) => v,
            None => {
                if n < 2 {
                    return Err(Error::InvalidArgument(
                        "cannot extrapolate the control tail from a single sample".into(),
                    ));
                }
                let (s1, s2) = (t_final - tau[n - 1], t_final - tau[n - 2]);
                let (w1, w2) = (
                    u.values[n - 1] * s1.powf(1.0 - a),
                    u.values[n - 2] * s2.powf(1.0 - a),
                );
                w1 + (w1 - w2) * s1 / (s2 - s1)
            }
        };
        // nodes in s, decreasing from T to 0
        let s_nodes: Vec<f64> = tau.iter().map(|t| t_final - t).chain([0.0]).collect();
        let w: Vec<f64> = s_nodes[..n]
            .iter()
            .zip(&u.values)
            .map(|(s, v)| v * s.powf(1.0 - a))
            .chain([w_end])
            .collect();
        let mut acc = 0.0;
        for i in 0..n {
            let (s1, s0) = (s_nodes[i], s_nodes[i + 1]);
            let lo = i.saturating_sub(1).min(n.saturating_sub(3));
            let hi = (lo + 4).min(n + 1);
            let xs: Vec<f64> = s_nodes[lo..hi].iter().map(|s| s - s0).collect();
            let c = monomial_coeffs(&xs, &w[lo..hi]);
            if s0 == 0.0 || s1 > 2.0 * s0 {
                let m = self.singular_moments(lambda, s0, s1, c.len())?;
                acc += c.iter().zip(&m).map(|(ck, mk)| ck * mk).sum::<f64>();
            } else {
                acc += self
                    .gl8
                    .mapped(s0, s1)
                    .map(|(x, wq)| {
                        let xa = x.powf(a);
                        let p = c.iter().rev().fold(0.0, |acc, ck| acc * (x - s0) + ck);
                        wq * xa * xa / (x * x) * self.e_aa.eval(lambda * xa) * p
                    })
                    .sum::<f64>();
            }
        }
        Ok(acc)
    }

    /// m_k = ∫ (s - s0)^k s^{2α-2} E_{α,α}(λ s^α) ds over [s0, s1] for
    /// k < count, by the power series of E.
    fn singular_moments(&self, lambda: f64, s0: f64, s1: f64, count: usize) -> Result<Vec<f64>> {
        let a = self.params.alpha;
        if (lambda * s1.powf(a)).abs() > 10.0 {
            return Err(Error::InvalidArgument(format!(
                "control interval near T too long for mode λ = {lambda}; refine the control mesh"
            )));
        }
        let pow_diff = |e: f64| s1.powf(e) - if s0 > 0.0 { s0.powf(e) } else { 0.0 };
        let mut m = vec![0.0; count];
        let mut lk = 1.0;
        for k in 0..200 {
            let e = 2.0 * a - 1.0 + a * k as f64;
            let c = lk * rgamma(a * k as f64 + a);
            // ∫ s^{e-1+j}, then (s - s0)^q expanded binomially
            let p: Vec<f64> = (0..count)
                .map(|j| pow_diff(e + j as f64) / (e + j as f64))
                .collect();
            for (q, mq) in m.iter_mut().enumerate() {
                let mut binom = 1.0;
                let mut term = 0.0;
                for j in (0..=q).rev() {
                    term += binom * (-s0).powi((q - j) as i32) * p[j];
                    binom = binom * j as f64 / (q - j + 1) as f64;
                }
                *mq += c * term;
            }
            if k > 2 && (c * p[0]).abs() <= 1e-17 * m[0].abs() {
                break;
            }
            lk *= lambda;
        }
        Ok(m)
    }

    /// φ₁ coefficients driven by `u`; column i holds time t_eval[i].
    pub fn controlled_state(
        &self,
        u: &ControlSignal,
        b: &[f64],
        t_eval: &[f64],
    ) -> Result<DMatrix<f64>> {
        u.validate()?;
        let order = order_of(b.len())?;
        let p = &self.params;
        if u.times[0] != 0.0 {
            return Err(Error::InvalidArgument(
                "control mesh must start at t = 0".into(),
            ));
        }
        if u.times[u.times.len() - 1] >= p.t_final {
            return Err(Error::InvalidArgument(
                "control mesh must exclude t = T".into(),
            ));
        }
        if t_eval.iter().any(|&t| !(0.0..=p.t_final).contains(&t)) {
            return Err(Error::InvalidArgument(
                "evaluation times must lie in [0, T]".into(),
            ));
        }
        let (lambdas, index) = distinct_eigenvalues(order);
        let mut out = DMatrix::zeros(b.len(), t_eval.len());
        if u.values.iter().all(|v| *v == 0.0) && u.tail_amplitude.unwrap_or(0.0) == 0.0 {
            return Ok(out);
        }
        // only eigenvalues carried by the actuator matter
        let mut used = vec![false; lambdas.len()];
        for (n, bn) in b.iter().enumerate() {
            if *bn != 0.0 {
                used[index[n]] = true;
            }
        }
        let active: Vec<usize> = (0..lambdas.len()).filter(|&d| used[d]).collect();
        let active_lambdas: Vec<f64> = active.iter().map(|&d| lambdas[d]).collect();
        let mut slot_of = vec![usize::MAX; lambdas.len()];
        for (s, &d) in active.iter().enumerate() {
            slot_of[d] = s;
        }
        for (c, &t) in t_eval.iter().enumerate() {
            let r = self.response(u, &active_lambdas, t)?;
            for (n, bn) in b.iter().enumerate() {
                if *bn != 0.0 {
                    out[(n, c)] = bn * r[slot_of[index[n]]];
                }
            }
        }
        Ok(out)
    }

    pub fn gram_matrix(&self, b: &[f64], quad_order: usize) -> Result<GramMatrix> {
        let order = order_of(b.len())?;
        let a = self.params.alpha;
        if a <= 0.5 {
            return Err(Error::InvalidArgument(format!(
                "Gram matrix needs α > 1/2: τ^(2α-2) is not integrable at τ = 0 for α = {a}"
            )));
        }
        let (lambdas, index) = distinct_eigenvalues(order);
        let (nodes, weights) = gram_rule(
            a,
            self.params.t_final,
            lambdas.iter().fold(0.0, |m, l| l.abs().max(m)),
            quad_order,
        )?;
        let values = DMatrix::from_fn(lambdas.len(), nodes.len(), |d, q| {
            self.e_aa.eval(lambdas[d] * nodes[q])
        });
        let weighted = DMatrix::from_fn(lambdas.len(), nodes.len(), |d, q| {
            values[(d, q)] * weights[q]
        });
        let inner = &weighted * values.transpose();
        let size = b.len();
        let mut g = DMatrix::zeros(size, size);
        for m in 0..size {
            for n in m..size {
                let (dm, dn) = (index[m].min(index[n]), index[m].max(index[n]));
                let v = b[m] * b[n] * inner[(dm, dn)] / a;
                g[(m, n)] = v;
                g[(n, m)] = v;
            }
        }
        let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let zero_modes = b
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() <= 1e-12 * bmax.max(f64::MIN_POSITIVE))
            .map(|(i, _)| ModeIndex::from_flat(i, order))
            .collect();
        let mut spectrum: Vec<f64> = SymmetricEigen::new(g.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        spectrum.sort_by(f64::total_cmp);
        Ok(GramMatrix {
            entries: g,
            min_eigenvalue: spectrum[0],
            spectrum,
            zero_modes,
        })
    }
}

impl FracOps {
    /// ‖u‖_{L²(0,T)} of the HUM control generated by `phi0`, integrated
    /// directly from u² (not through the Gram matrix).
    pub fn control_l2_norm(
        &self,
        phi0: &SpectralField,
        b: &[f64],
        quad_order: usize,
    ) -> Result<f64> {
        check_actuator(phi0, b)?;
        let order = phi0.order();
        let a = self.params.alpha;
        let terms: Vec<(f64, f64)> = phi0
            .coeffs()
            .iter()
            .zip(b)
            .enumerate()
            .filter(|(_, (c, bn))| **c != 0.0 && **bn != 0.0)
            .map(|(i, (c, bn))| (eigenvalue(ModeIndex::from_flat(i, order)), c * bn))
            .collect();
        if terms.is_empty() {
            return Ok(0.0);
        }
        let lambda_max = terms.iter().fold(0.0f64, |m, (l, _)| m.max(l.abs()));
        let (nodes, weights) = gram_rule(a, self.params.t_final, lambda_max, quad_order)?;
        // u(T - s) = s^{α-1} Σ c_n E_{α,α}(λ_n σ) with σ = s^α
        let total: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(&sigma, &w)| {
                let v: f64 = terms
                    .iter()
                    .map(|(l, c)| c * self.e_aa.eval(l * sigma))
                    .sum();
                w * v * v
            })
            .sum();
        Ok((total / a).max(0.0).sqrt())
    }
}

/// Nodes σ and weights for ∫_0^{T^α} σ^{1-1/α} f(σ) dσ: a Gauss-Jacobi
/// panel at the origin followed by Gauss-Legendre panels on dyadic
/// intervals, fine enough near 0 to resolve E(λσ) for |λ| ≤ lambda_max.
fn gram_rule(alpha: f64, t_final: f64, lambda_max: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let top = t_final.powf(alpha);
    let panels = if lambda_max * top > 1.0 {
        (lambda_max * top).log2().ceil() as usize
    } else {
        0
    };
    let first = top * 0.5f64.powi(panels as i32);
    let expo = 1.0 - 1.0 / alpha;
    let gj = GaussJacobi::new(n, 0.0, expo)?;
    let half = 0.5 * first;
    let scale = half.powf(1.0 + expo);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (x, w) in gj.rule.nodes.iter().zip(&gj.rule.weights) {
        nodes.push(half * (1.0 + x));
        weights.push(scale * w);
    }
    let gl = gauss_legendre(n)?;
    for k in 0..panels {
        let hi = top * 0.5f64.powi(k as i32);
        for (x, w) in gl.mapped(0.5 * hi, hi) {
            nodes.push(x);
            weights.push(w * x.powf(expo));
        }
    }
    Ok((nodes, weights))
}

fn check_actuator(phi0: &SpectralField, b: &[f64]) -> Result<()> {
    if b.len() != phi0.coeffs().len() {
        return Err(Error::Dimension(format!(
            "actuator has {} coefficients but the field has {}",
            b.len(),
            phi0.coeffs().len()
        )));
    }
    Ok(())
}

/// Control mesh of `n` points on [0, T), graded toward T (see
/// [`FracParams::control_grading`]).
pub fn control_mesh(p: &FracParams, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidArgument(
            "control mesh needs at least 2 points".into(),
        ));
    }
    let r = p.control_grading();
    Ok((0..n)
        .map(|i| p.t_final * (1.0 - (1.0 - i as f64 / n as f64).powf(r)))
        .collect())
}

pub fn propagate_free(y0: &SpectralField, p: &FracParams, t: f64) -> Result<SpectralField> {
    FracOps::new(*p)?.propagate_free(y0, t)
}

pub fn adjoint_state(phi0: &SpectralField, p: &FracParams, t: f64) -> Result<SpectralField> {
    FracOps::new(*p)?.adjoint_state(phi0, t)
}

pub fn hum_control_value(phi0: &SpectralField, b: &[f64], p: &FracParams, t: f64) -> Result<f64> {
    FracOps::new(*p)?.hum_control_value(phi0, b, t)
}

pub fn sample_control(
    phi0: &SpectralField,
    b: &[f64],
    p: &FracParams,
    mesh: &[f64],
) -> Result<ControlSignal> {
    FracOps::new(*p)?.sample_control(phi0, b, mesh)
}

pub fn controlled_state(
    u: &ControlSignal,
    b: &[f64],
    p: &FracParams,
    t_eval: &[f64],
) -> Result<DMatrix<f64>> {
    FracOps::new(*p)?.controlled_state(u, b, t_eval)
}

pub fn gram_matrix(b: &[f64], p: &FracParams, quad_order: usize) -> Result<GramMatrix> {
    FracOps::new(*p)?.gram_matrix(b, quad_order)
}

/// Returns (I^{1-α}[s^{α-1}E_{α,α}(λ s^α)](t), E_α(λ t^α)).
pub fn riesz_check_identity(
    alpha: f64,
    lambda: f64,
    t: f64,
    quad_order: usize,
) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("need t > 0, got {t}")));
    }
    let z = lambda * t.powf(alpha);
    let rhs = mittag_leffler(MlQuery::new(alpha, 1.0, z))?;
    if alpha == 1.0 {
        // I^0 is the identity
        return Ok((mittag_leffler(MlQuery::new(1.0, 1.0, z))?, rhs));
    }
    // s = t v^{1/α}: lhs = 1/(αΓ(1-α)) ∫_0^1 (1 - v^{1/α})^{-α} E_{α,α}(z v) dv
    let e = |v: f64| mittag_leffler(MlQuery::new(alpha, alpha, z * v)).unwrap_or(f64::NAN);
    let one_minus = |v: f64| -(v.ln() / alpha).exp_m1();
    let near_zero = adaptive(
        |v| one_minus(v).powf(-alpha) * e(v),
        0.0,
        0.5,
        &[],
        1e-14,
        2000,
    )?;
    // (1 - v^{1/α})^{-α} = (1 - v)^{-α} g(v), g smooth up to v = 1
    let g = |v: f64| {
        if v >= 1.0 {
            alpha.powf(alpha)
        } else {
            ((1.0 - v) / one_minus(v)).powf(alpha)
        }
    };
    let gj = GaussJacobi::new(quad_order, -alpha, 0.0)?;
    let near_one = gj.integrate(0.5, 1.0, |v| g(v) * e(v));
    let lhs = (near_zero + near_one) * rgamma(1.0 - alpha) / alpha;
    if !lhs.is_finite() {
        return Err(Error::Unknown(
            "Riesz check produced a non-finite value".into(),
        ));
    }
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const INV_GAMMA_075: f64 = 0.816_048_939_098_262_98;
    const INV_GAMMA_175: f64 = 1.088_065_252_131_017_3;
    // E_{0.75,0.75}(-2·2^0.75), E_{0.75,0.75}(-2), E_{0.75,1}(-2)
    const E_AA_M2X: f64 = 0.029_628_474_297_848_387_924;
    const E_AA_M2: f64 = 0.084_363_572_245_660_564_019;
    const E_A1_M2: f64 = 0.202_078_483_412_954_454_35;

    fn params(alpha: f64, t: f64) -> FracParams {
        FracParams::relaxed(alpha, t).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(FracParams::strict(0.6, 1.0).is_err());
        assert!(FracParams::relaxed(0.6, 1.0).is_ok());
        assert!(FracParams::relaxed(0.5, 1.0).is_err());
        assert!(FracParams::relaxed(1.01, 1.0).is_err());
        assert!(FracParams::strict(0.75, 0.0).is_err());
    }

    #[test]
    fn free_propagation() {
        let y = SpectralField::mode(2, ModeIndex::new(1, 1), 1.0);
        let p1 = params(1.0, 3.0);
        let out = propagate_free(&y, &p1, 1.5).unwrap();
        assert!((out.get(ModeIndex::new(1, 1)) - (-3.0f64).exp()).abs() < 1e-14);

        let c = SpectralField::mode(2, ModeIndex::new(0, 0), 1.0);
        let out = propagate_free(&c, &params(0.75, 2.0), 1.0).unwrap();
        assert!((out.coeffs()[0] - INV_GAMMA_075).abs() < 1e-14);

        let out = propagate_free(&y, &params(0.75, 2.0), 2.0).unwrap();
        let want = 2f64.powf(-0.25) * E_AA_M2X;
        assert!((out.get(ModeIndex::new(1, 1)) - want).abs() < 1e-14);
        assert!(propagate_free(&y, &p1, 0.0).is_err());
    }

    #[test]
    fn adjoint() {
        let y = SpectralField::from_coeffs(1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = params(0.75, 2.0);
        assert_eq!(adjoint_state(&y, &p, 2.0).unwrap(), y);
        let out = adjoint_state(&y, &params(1.0, 2.0), 0.5).unwrap();
        assert!((out.coeffs()[3] - 4.0 * (-3.0f64).exp()).abs() < 1e-14);
        let out = adjoint_state(&y, &p, 1.0).unwrap();
        assert!((out.coeffs()[3] - 4.0 * E_A1_M2).abs() < 1e-13);
    }

    #[test]
    fn control_values() {
        let order = 2;
        let b: Vec<f64> = (0..9).map(|i| 0.3 + i as f64).collect();
        let p = params(0.75, 2.0);
        let zero = SpectralField::zeros(order);
        assert_eq!(hum_control_value(&zero, &b, &p, 0.7).unwrap(), 0.0);

        let mut bp = vec![0.0; 9];
        bp[0] = PI;
        let a = SpectralField::mode(order, ModeIndex::new(0, 0), 1.0);
        assert!((hum_control_value(&a, &bp, &params(1.0, 2.0), 1.0).unwrap() - PI).abs() < 1e-14);

        let m = ModeIndex::new(1, 1);
        let a = SpectralField::mode(order, m, 1.0);
        let v = hum_control_value(&a, &b, &p, 1.0).unwrap();
        assert!((v - b[m.flat(order)] * E_AA_M2).abs() < 1e-13);
        assert!(hum_control_value(&a, &b, &p, 2.0).is_err());
        assert!(sample_control(&a, &b, &p, &[0.0, 2.0]).is_err());
    }

    fn single_mode_signal(p: &FracParams, value: f64, n: usize) -> ControlSignal {
        let mesh: Vec<f64> = (0..n).map(|i| p.t_final * i as f64 / n as f64).collect();
        ControlSignal::new(mesh.clone(), vec![value; n], p.alpha - 1.0).unwrap()
    }

    #[test]
    fn controlled_state_cases() {
        let p = params(0.75, 2.0);
        let b = vec![1.0];
        let zero = single_mode_signal(&p, 0.0, 16);
        assert!(controlled_state(&zero, &b, &p, &[0.5, 1.0])
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));

        let p1 = params(1.0, 3.0);
        let one = single_mode_signal(&p1, 1.0, 30);
        let out = controlled_state(&one, &b, &p1, &[2.0]).unwrap();
        assert!((out[(0, 0)] - 2.0).abs() < 1e-13);

        let one = single_mode_signal(&p, 1.0, 20);
        let out = controlled_state(&one, &b, &p, &[1.0, 0.55]).unwrap();
        assert!((out[(0, 0)] - INV_GAMMA_175).abs() < 1e-13);
        assert!((out[(0, 1)] - 0.55f64.powf(0.75) * INV_GAMMA_175).abs() < 1e-13);

        // λ = -1 heat mode with u ≡ 1: (1 - e^{-t})
        let b4 = vec![0.0, 1.0, 0.0, 0.0];
        let out = controlled_state(&single_mode_signal(&p1, 1.0, 9), &b4, &p1, &[1.7]).unwrap();
        assert!((out[(1, 0)] - (1.0 - (-1.7f64).exp())).abs() < 1e-12);

        // coverage: a mesh ending at 1.0 does not reach 1.5 < T
        let short = ControlSignal::new(vec![0.0, 0.5, 1.0], vec![1.0; 3], -0.25).unwrap();
        assert!(controlled_state(&short, &b, &p, &[1.5]).is_err());
    }

    #[test]
    fn gram_cases() {
        let g = gram_matrix(&[1.0], &params(1.0, 2.0), 32).unwrap();
        assert!((g.entries[(0, 0)] - 2.0).abs() < 1e-13);

        let g = gram_matrix(&[1.0], &params(0.75, 2.0), 64).unwrap();
        let want = 2f64.powf(0.5) / 0.5 * INV_GAMMA_075 * INV_GAMMA_075;
        assert!((g.entries[(0, 0)] - want).abs() < 1e-12 * want);

        let mut b = vec![0.0; 16];
        b[0] = PI;
        let g = gram_matrix(&b, &params(0.75, 2.0), 32).unwrap();
        let rank = g.spectrum.iter().filter(|e| **e > 1e-10).count();
        assert_eq!(rank, 1);
        assert_eq!(g.zero_modes.len(), 15);

        assert!(FracParams::relaxed(0.5, 1.0).is_err());
    }

    #[test]
    fn gram_entry_against_adaptive_oracle() {
        // b_m b_n ∫_0^T τ^{2α-2} E(λ_m τ^α) E(λ_n τ^α) dτ by adaptive quadrature in τ
        let p = params(0.75, 2.0);
        let b: Vec<f64> = (0..16).map(|i| 1.0 + 0.1 * i as f64).collect();
        let g = gram_matrix(&b, &p, 64).unwrap();
        for &(m, n) in &[(0usize, 5usize), (5, 5), (3, 14), (15, 15)] {
            let lm = eigenvalue(ModeIndex::from_flat(m, 3));
            let ln = eigenvalue(ModeIndex::from_flat(n, 3));
            let f = |s: f64| {
                let e =
                    |l: f64| mittag_leffler(MlQuery::new(0.75, 0.75, l * s.powf(0.75))).unwrap();
                s.powf(-0.5) * e(lm) * e(ln)
            };
            // split off the τ^{-1/2} singularity with τ = w²
            let oracle = adaptive(
                |w: f64| 2.0 * w * f(w * w),
                0.0,
                2f64.sqrt(),
                &[],
                1e-14,
                4000,
            )
            .unwrap();
            let want = b[m] * b[n] * oracle;
            assert!(
                (g.entries[(m, n)] - want).abs() < 1e-11 * want.abs().max(1e-3),
                "{m} {n}"
            );
        }
    }

    #[test]
    fn riesz_identity_grid() {
        for &alpha in &[0.6, 0.75, 0.9, 1.0] {
            for &lambda in &[0.0, -1.0, -5.0, -50.0] {
                for &t in &[0.25, 1.0, 2.0] {
                    let (l, r) = riesz_check_identity(alpha, lambda, t, 64).unwrap();
                    assert!(
                        (l - r).abs() <= 1e-8,
                        "α={alpha} λ={lambda} t={t}: {l} vs {r}"
                    );
                }
            }
        }
    }

    #[test]
    fn duality_with_gram() {
        let order = 3;
        let p = params(0.75, 2.0);
        let ops = FracOps::new(p).unwrap();
        let b: Vec<f64> = (0..16).map(|i| ((i * 7 % 5) as f64 - 1.5) * 0.4).collect();
        let a: Vec<f64> = (0..16).map(|i| ((i * 3 % 7) as f64 - 3.0) * 0.2).collect();
        let phi0 = SpectralField::from_coeffs(order, a.clone()).unwrap();
        let mesh = control_mesh(&p, 1024).unwrap();
        let u = ops.sample_control(&phi0, &b, &mesh).unwrap();
        let phi1 = ops.controlled_state(&u, &b, &[2.0]).unwrap();
        let g = ops.gram_matrix(&b, 64).unwrap();
        let ga = g.apply(&a);
        for n in 0..16 {
            assert!(
                (phi1[(n, 0)] - ga[n]).abs() < 1e-6,
                "mode {n}: {} vs {}",
                phi1[(n, 0)],
                ga[n]
            );
        }
    }
}
