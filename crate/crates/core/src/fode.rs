//! Semilinear Volterra subsystem for φ₂ and the hypothesis diagnostics.
//!
//! φ₂(t) = ∫_0^t P_α(t-τ) N(φ₀ + φ₁ + φ₂)(τ) dτ is marched on a mesh graded
//! toward t = 0 with a product-integration predictor-corrector: rectangle
//! weights predict, trapezoid weights correct. Kernel moments come from the
//! closed-form antiderivatives of t^{α-1}E_{α,α}(λt^α).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;

use crate::error::{Error, Result};
use crate::fracops::{order_of, FracOps, FracParams};
use crate::mlf::rgamma;
use crate::spectral::{eigenvalue, ModeIndex, SpectralGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeMesh {
    nodes: Vec<f64>,
    grading: f64,
}

impl TimeMesh {
    /// t_i = T (i/M)^r, i = 0..=M.
    pub fn graded(t_final: f64, intervals: usize, grading: f64) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::InvalidArgument(
                "time mesh needs at least one interval".into(),
            ));
        }
        if !(grading >= 1.0 && grading.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grading exponent must be ≥ 1, got {grading}"
            )));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        let m = intervals as f64;
        let mut nodes: Vec<f64> = (0..=intervals)
            .map(|i| t_final * (i as f64 / m).powf(grading))
            .collect();
        nodes[intervals] = t_final;
        Ok(Self { nodes, grading })
    }

    pub fn uniform(t_final: f64, intervals: usize) -> Result<Self> {
        Self::graded(t_final, intervals, 1.0)
    }

    /// Default grading 2/α resolves the t^{α-1} behaviour imported from φ₀.
    pub fn default_for(p: &FracParams, intervals: usize) -> Result<Self> {
        Self::graded(p.t_final, intervals, 2.0 / p.alpha)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn t_final(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NonlinearKind {
    None,
    /// N(v) = C v (1 - v / Kcap)
    Logistic {
        c: f64,
        kcap: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearSpec {
    #[serde(flatten)]
    pub kind: NonlinearKind,
    /// Constants of ‖Ny‖ ≤ L‖y‖ + K‖y‖², user-supplied.
    #[serde(default)]
    pub l_const: f64,
    #[serde(default)]
    pub k_const: f64,
}

impl NonlinearSpec {
    pub fn none() -> Self {
        Self {
            kind: NonlinearKind::None,
            l_const: 0.0,
            k_const: 0.0,
        }
    }

    pub fn logistic(c: f64, kcap: f64, l_const: f64, k_const: f64) -> Result<Self> {
        let s = Self {
            kind: NonlinearKind::Logistic { c, kcap },
            l_const,
            k_const,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l_const >= 0.0 && self.k_const >= 0.0) {
            return Err(Error::InvalidArgument(
                "L and K must be non-negative".into(),
            ));
        }
        match self.kind {
            NonlinearKind::None => Ok(()),
            NonlinearKind::Logistic { c, kcap } => {
                if !(c > 0.0 && kcap > 0.0 && c.is_finite() && kcap.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "logistic needs C > 0 and Kcap > 0 (got C={c}, Kcap={kcap})"
                    )));
                }
                if self.l_const == 0.0 && self.k_const == 0.0 {
                    return Err(Error::InvalidArgument(
                        "a nonlinear model needs (L, K) ≠ (0, 0)".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self.kind, NonlinearKind::None)
    }

    fn eval(&self, v: f64) -> f64 {
        match self.kind {
            NonlinearKind::None => 0.0,
            NonlinearKind::Logistic { c, kcap } => c * v * (1.0 - v / kcap),
        }
    }
}

/// Pointwise N on grid values, in place.
pub fn apply_nonlinearity(values: &mut [f64], spec: &NonlinearSpec) {
    for v in values.iter_mut() {
        *v = spec.eval(*v);
    }
}

/// Per-mode coefficients on a time mesh; column i is the state at t_i.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub mesh: TimeMesh,
    pub coeffs: DMatrix<f64>,
}

impl StateTrajectory {
    pub fn final_coeffs(&self) -> Vec<f64> {
        self.coeffs
            .column(self.coeffs.ncols() - 1)
            .iter()
            .copied()
            .collect()
    }
}

/// N applied to a coefficient vector through the P×P grid.
pub fn nonlinear_coeffs(coeffs: &[f64], spec: &NonlinearSpec, grid: &SpectralGrid) -> Vec<f64> {
    if spec.is_none() {
        return vec![0.0; coeffs.len()];
    }
    let mut values = grid.to_grid(coeffs);
    apply_nonlinearity(values.as_mut_slice(), spec);
    grid.from_grid(&values)
}

/// Solve for φ₂ given φ₀ and φ₁ sampled at the mesh nodes (modes × nodes).
/// Column 0 of the sources may be non-finite (φ₀ is singular at t = 0 for
/// α < 1); the nonlinearity is then held constant on the first interval.
pub fn solve_phi2(
    phi0: &DMatrix<f64>,
    phi1: &DMatrix<f64>,
    spec: &NonlinearSpec,
    ops: &FracOps,
    mesh: &TimeMesh,
    grid: &SpectralGrid,
) -> Result<StateTrajectory> {
    spec.validate()?;
    let modes = phi0.nrows();
    let order = order_of(modes)?;
    let nodes = mesh.nodes();
    let nt = nodes.len();
    if phi0.shape() != (modes, nt) || phi1.shape() != (modes, nt) {
        return Err(Error::Dimension(format!(
            "sources must be {modes} × {nt}, got {:?} and {:?}",
            phi0.shape(),
            phi1.shape()
        )));
    }
    if grid.order() != order {
        return Err(Error::Dimension(format!(
            "grid is built for order {} but the state has order {order}",
            grid.order()
        )));
    }
    if (mesh.t_final() - ops.params().t_final).abs() > 1e-12 * ops.params().t_final {
        return Err(Error::InvalidArgument("time mesh does not end at T".into()));
    }
    let mut phi2 = DMatrix::zeros(modes, nt);
    if spec.is_none() {
        return Ok(StateTrajectory {
            mesh: mesh.clone(),
            coeffs: phi2,
        });
    }
    let source = phi0 + phi1;
    for i in 1..nt {
        if source.column(i).iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "source is not finite at node {i}"
            )));
        }
    }
    let singular_start = source.column(0).iter().any(|v| !v.is_finite());

    let lambdas: Vec<f64> = (0..modes)
        .map(|n| eigenvalue(ModeIndex::from_flat(n, order)))
        .collect();
    let mut distinct: Vec<f64> = lambdas.clone();
    distinct.sort_by(|a, b| b.total_cmp(a));
    distinct.dedup();
    let slot: Vec<usize> = lambdas
        .iter()
        .map(|l| distinct.iter().position(|d| d == l).unwrap())
        .collect();

    // F history, modes × nodes
    let mut f = DMatrix::zeros(modes, nt);
    let eval_f = |state: &[f64], src: &[f64]| -> Vec<f64> {
        let y: Vec<f64> = state.iter().zip(src).map(|(a, b)| a + b).collect();
        nonlinear_coeffs(&y, spec, grid)
    };
    if !singular_start {
        let col: Vec<f64> = source.column(0).iter().copied().collect();
        f.set_column(
            0,
            &nalgebra::DVector::from_vec(eval_f(&vec![0.0; modes], &col)),
        );
    }

    let mut a_row = vec![0.0; nt];
    let mut k2_row = vec![0.0; nt];
    let mut pred_hist = vec![0.0; modes];
    let mut corr_hist = vec![0.0; modes];
    let mut last_w = vec![0.0; distinct.len()];
    for i in 1..nt {
        let t = nodes[i];
        let src: Vec<f64> = source.column(i).iter().copied().collect();
        if singular_start && i == 1 {
            // F_0 stands in for the (undefined) value at t = 0
            let guess = eval_f(&vec![0.0; modes], &src);
            f.set_column(0, &nalgebra::DVector::from_vec(guess));
        }
        pred_hist.iter_mut().for_each(|v| *v = 0.0);
        corr_hist.iter_mut().for_each(|v| *v = 0.0);
        for (d, &lambda) in distinct.iter().enumerate() {
            for j in 0..=i {
                a_row[j] = ops.kernel_antiderivative(lambda, t - nodes[j]);
                k2_row[j] = ops.kernel_second_antiderivative(lambda, t - nodes[j]);
            }
            // rectangle (left value) and trapezoid weights on [t_j, t_{j+1}]
            for n in (0..modes).filter(|&n| slot[n] == d) {
                let mut p = 0.0;
                let mut c = 0.0;
                for j in 0..i {
                    let h = nodes[j + 1] - nodes[j];
                    let m0 = a_row[j] - a_row[j + 1];
                    let dk2 = (k2_row[j] - k2_row[j + 1]) / h;
                    let w_left = a_row[j] - dk2;
                    p += m0 * f[(n, j)];
                    c += w_left * f[(n, j)];
                    if j + 1 < i {
                        c += (dk2 - a_row[j + 1]) * f[(n, j + 1)];
                    }
                }
                pred_hist[n] = p;
                corr_hist[n] = c;
            }
            let h = nodes[i] - nodes[i - 1];
            last_w[d] = (k2_row[i - 1] - k2_row[i]) / h - a_row[i];
        }
        let predicted = pred_hist.clone();
        let f_pred = eval_f(&predicted, &src);
        let corrected: Vec<f64> = (0..modes)
            .map(|n| corr_hist[n] + last_w[slot[n]] * f_pred[n])
            .collect();
        if corrected.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { node: i, time: t });
        }
        let f_new = eval_f(&corrected, &src);
        if f_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { node: i, time: t });
        }
        phi2.set_column(i, &nalgebra::DVector::from_vec(corrected));
        f.set_column(i, &nalgebra::DVector::from_vec(f_new));
        if singular_start && i == 1 {
            let f1 = f.column(1).clone_owned();
            f.set_column(0, &f1);
        }
    }
    Ok(StateTrajectory {
        mesh: mesh.clone(),
        coeffs: phi2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H0Violation {
    /// max over nodes of ‖Ny‖ - (L‖y‖ + K‖y‖²); positive means violated.
    pub max_violation: f64,
    pub node: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H0Report {
    pub l2: H0Violation,
    pub sup: H0Violation,
}

impl H0Report {
    pub fn violated(&self) -> bool {
        self.l2.max_violation > 0.0 || self.sup.max_violation > 0.0
    }
}

/// Checks the user-supplied (L, K) growth bound on every finite column of a
/// trajectory, with grid L² and sup norms.
pub fn h0_diagnostic(
    columns: &DMatrix<f64>,
    spec: &NonlinearSpec,
    grid: &SpectralGrid,
) -> H0Report {
    let mut l2 = H0Violation {
        max_violation: f64::NEG_INFINITY,
        node: 0,
    };
    let mut sup = l2;
    for (i, col) in columns.column_iter().enumerate() {
        if col.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let coeffs: Vec<f64> = col.iter().copied().collect();
        let y = grid.to_grid(&coeffs);
        let mut ny = y.clone();
        apply_nonlinearity(ny.as_mut_slice(), spec);
        let bound = |norm: f64| spec.l_const * norm + spec.k_const * norm * norm;
        let (yl, nl) = (grid.l2_norm(&y), grid.l2_norm(&ny));
        let (ys, ns) = (y.amax(), ny.amax());
        let vl = nl - bound(yl);
        let vs = ns - bound(ys);
        if vl > l2.max_violation {
            l2 = H0Violation {
                max_violation: vl,
                node: i,
            };
        }
        if vs > sup.max_violation {
            sup = H0Violation {
                max_violation: vs,
                node: i,
            };
        }
    }
    H0Report { l2, sup }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub value: f64,
    pub satisfied: bool,
    /// C(T, φ₀)
    pub c_term: f64,
}

/// Small-time condition 1 - (3MT^αK/Γ(1+α)) exp(MLT^α/Γ(1+α)) C(T, φ₀) > 0.
pub fn gronwall_time_condition(
    m_const: f64,
    spec: &NonlinearSpec,
    p: &FracParams,
    phi0_gnorm: f64,
    y0_norm: f64,
    b_norm: f64,
) -> Result<GronwallReport> {
    let a = p.alpha;
    if 2.0 * a - 1.0 <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "B(α, 2α-1) needs α > 1/2, got α = {a}"
        )));
    }
    let (l, k, t) = (spec.l_const, spec.k_const, p.t_final);
    let rg = rgamma(a);
    let first = m_const
        * m_const
        * l
        * t.powf(2.0 * a - 1.0)
        * rg
        * rg
        * (y0_norm * beta(a, a) + (t / a) * b_norm * phi0_gnorm * beta(a, a + 1.0));
    let second = 3.0
        * m_const.powi(3)
        * k
        * t.powf(3.0 * a - 2.0)
        * rg.powi(3)
        * (y0_norm * y0_norm * beta(a, 2.0 * a - 1.0)
            + (t * t / (a * a))
                * b_norm
                * b_norm
                * phi0_gnorm
                * phi0_gnorm
                * beta(a, 2.0 * a + 1.0));
    let c_term = first + second;
    let rg1 = rgamma(1.0 + a);
    let value =
        1.0 - 3.0 * m_const * t.powf(a) * k * rg1 * (m_const * l * t.powf(a) * rg1).exp() * c_term;
    Ok(GronwallReport {
        value,
        satisfied: value > 0.0,
        c_term,
    })
}
