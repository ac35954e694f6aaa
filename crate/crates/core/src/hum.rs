//! Fixed-point HUM driver.
//!
//! The unknown adjoint datum φ₀ solves C_l φ₀ = χ*_ω y_d - L_o - O_N φ₀ with
//! C_l = M_ω G in coefficient space. Each iteration rebuilds the control from
//! the current φ₀, runs the linear and nonlinear state pieces forward, and
//! re-solves the linear system with the updated nonlinear term.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fode::{
    gronwall_time_condition, h0_diagnostic, solve_phi2, GronwallReport, H0Report, NonlinearSpec,
    StateTrajectory, TimeMesh,
};
use crate::fracops::{control_mesh, ControlSignal, FracOps, FracParams, GramMatrix};
use crate::spectral::{
    actuator_coefficients, error_on_segment, error_with_mass, mass_matrix, project_function,
    segment_rule, Actuator, BoundarySegment, ErrorNorm, ModeIndex, Rect, SpectralField,
    SpectralGrid,
};

pub type Field2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type Field1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Discretization and solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Discretization {
    /// Basis order J; (J+1)² modes.
    pub order: usize,
    /// Time intervals M of the φ₂ mesh.
    pub intervals: usize,
    /// Grading exponent of the φ₂ mesh; `None` picks 2/α.
    pub grading: Option<f64>,
    /// Nodes per panel of the Gram and control-norm quadrature.
    pub quad_order: usize,
    /// Pseudo-spectral grid size P for the nonlinearity.
    pub grid_points: usize,
    /// Grid size for projecting y₀ and the desired extension.
    pub projection_points: usize,
    /// Samples of the control on [0, T).
    pub control_nodes: usize,
    /// Gauss-Legendre samples along Γ for the trace error.
    pub trace_samples: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            order: 12,
            intervals: 256,
            grading: None,
            quad_order: 64,
            grid_points: 26,
            projection_points: 64,
            control_nodes: 1024,
            trace_samples: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Stop once ‖Δφ₀‖_G ≤ eps · max(1, ‖φ₀‖_G).
    pub eps: f64,
    pub max_iters: usize,
    /// Ridge term added to C_l.
    pub reg: f64,
    /// Singular values below rank_tol · σ_max are dropped.
    pub rank_tol: f64,
    pub norm: ErrorNorm,
    /// Semigroup bound M of the Gronwall condition.
    pub m_const: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            eps: 1e-8,
            max_iters: 50,
            reg: 0.0,
            rank_tol: 1e-12,
            norm: ErrorNorm::L2,
            m_const: 1.0,
        }
    }
}

#[derive(Clone)]
pub struct HumProblem {
    pub params: FracParams,
    pub omega: Rect,
    pub gamma: BoundarySegment,
    pub actuator: Actuator,
    pub y0: Field2,
    pub y_d_ext: Field2,
    pub z_d: Field1,
    pub nonlinear: NonlinearSpec,
    pub disc: Discretization,
    pub solver: SolverSettings,
    pub phi0_init: Option<SpectralField>,
}

impl fmt::Debug for HumProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HumProblem")
            .field("params", &self.params)
            .field("omega", &self.omega)
            .field("gamma", &self.gamma)
            .field("actuator", &self.actuator)
            .field("nonlinear", &self.nonlinear)
            .field("disc", &self.disc)
            .field("solver", &self.solver)
            .finish_non_exhaustive()
    }
}

impl HumProblem {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.omega.validate()?;
        self.actuator.validate()?;
        self.nonlinear.validate()?;
        if !self.gamma.lies_on_boundary_of(&self.omega) {
            return Err(Error::InvalidArgument(format!(
                "Γ = {:?} [{}, {}] must lie on an edge of ω that is also an edge of Ω",
                self.gamma.edge, self.gamma.lo, self.gamma.hi
            )));
        }
        let d = &self.disc;
        let need = 2 * (d.order + 1);
        if d.grid_points < need || d.projection_points < need {
            return Err(Error::InvalidArgument(format!(
                "grid sizes must be at least 2(J+1) = {need} (got P = {}, projection = {})",
                d.grid_points, d.projection_points
            )));
        }
        if d.intervals == 0 || d.quad_order < 2 || d.control_nodes < 2 || d.trace_samples < 8 {
            return Err(Error::InvalidArgument(
                "need intervals ≥ 1, quad_order ≥ 2, control_nodes ≥ 2, trace_samples ≥ 8".into(),
            ));
        }
        if let Some(r) = d.grading {
            if !(r >= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "mesh grading must be ≥ 1, got {r}"
                )));
            }
        }
        let s = &self.solver;
        if !(s.eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "eps must be positive, got {}",
                s.eps
            )));
        }
        if s.max_iters == 0 {
            return Err(Error::InvalidArgument(
                "max_iters must be at least 1".into(),
            ));
        }
        if !(s.reg >= 0.0) || !(s.rank_tol >= 0.0 && s.rank_tol < 1.0) || !(s.m_const > 0.0) {
            return Err(Error::InvalidArgument(
                "need reg ≥ 0, 0 ≤ rank_tol < 1, M > 0".into(),
            ));
        }
        if let Some(p) = &self.phi0_init {
            if p.order() != d.order {
                return Err(Error::Dimension("initial φ₀ has the wrong order".into()));
            }
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<TimeMesh> {
        let r = self.disc.grading.unwrap_or(2.0 / self.params.alpha);
        TimeMesh::graded(self.params.t_final, self.disc.intervals, r)
    }
}

/// ‖y_d_ext|_Γ - z_d‖_{L²(Γ)} straight from the pointwise definitions.
pub fn trace_inconsistency(prob: &HumProblem) -> Result<f64> {
    let s: f64 = segment_rule(&prob.gamma, prob.disc.trace_samples)?
        .into_iter()
        .map(|(s, w)| {
            let (x, y) = prob.gamma.point(s);
            w * ((prob.y_d_ext)(x, y) - (prob.z_d)(s)).powi(2)
        })
        .sum();
    Ok(s.sqrt())
}

/// Minimum-norm least-squares solver for (M_ω G + reg I) x = rhs.
#[derive(Debug, Clone)]
pub struct ClSolver {
    svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    cutoff: f64,
    rank: usize,
    singular_values: Vec<f64>,
}

impl ClSolver {
    pub fn new(gram: &GramMatrix, m_omega: &DMatrix<f64>, reg: f64, rank_tol: f64) -> Result<Self> {
        let n = gram.entries.nrows();
        if m_omega.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "M_ω is {:?} but the Gram matrix is {n}×{n}",
                m_omega.shape()
            )));
        }
        let mut a = m_omega * &gram.entries;
        for i in 0..n {
            a[(i, i)] += reg;
        }
        let svd = SVD::new(a, true, true);
        let smax = svd.singular_values.max();
        let cutoff = rank_tol * smax;
        let rank = svd
            .singular_values
            .iter()
            .filter(|s| **s > cutoff && **s > 0.0)
            .count();
        if rank == 0 {
            return Err(Error::Uncontrollable(
                "the controllability operator M_ω G has rank 0: the actuator cannot influence ω"
                    .into(),
            ));
        }
        let mut singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
        singular_values.sort_by(|a, b| b.total_cmp(a));
        Ok(Self {
            svd,
            cutoff,
            rank,
            singular_values,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let u = self.svd.u.as_ref().expect("SVD computed with U");
        let vt = self.svd.v_t.as_ref().expect("SVD computed with Vᵀ");
        if rhs.len() != u.nrows() {
            return Err(Error::Dimension(format!(
                "rhs has {} entries, expected {}",
                rhs.len(),
                u.nrows()
            )));
        }
        let r = DVector::from_column_slice(rhs);
        let mut coef = u.transpose() * r;
        for (i, c) in coef.iter_mut().enumerate() {
            let s = self.svd.singular_values[i];
            *c = if s > self.cutoff && s > 0.0 {
                *c / s
            } else {
                0.0
            };
        }
        Ok((vt.transpose() * coef).as_slice().to_vec())
    }
}

/// One-shot form of [`ClSolver`]; returns the solution and effective rank.
pub fn solve_cl(
    gram: &GramMatrix,
    m_omega: &DMatrix<f64>,
    rhs: &[f64],
    reg: f64,
) -> Result<(Vec<f64>, usize)> {
    let s = ClSolver::new(gram, m_omega, reg, SolverSettings::default().rank_tol)?;
    Ok((s.solve(rhs)?, s.rank()))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub iterations: usize,
    pub converged: bool,
    /// ‖φ₀^{k+1} - φ₀^k‖_G per iteration.
    pub residual_history: Vec<f64>,
    pub gram_min_eig: f64,
    pub gram_max_eig: f64,
    pub effective_rank: usize,
    pub zero_modes: Vec<(usize, usize)>,
    pub error_omega: f64,
    pub error_gamma: f64,
    pub control_energy: f64,
    pub phi0_gnorm: f64,
    pub gronwall_value: f64,
    pub gronwall_satisfied: bool,
    /// Max of ‖Ny‖ - (L‖y‖ + K‖y‖²) over the closed-loop trajectory, grid L².
    pub h0_margin: f64,
    /// Same with grid sup norms.
    pub h0_margin_sup: f64,
    /// Projection residuals of y₀ and of the desired extension.
    pub projection_residuals: Vec<f64>,
    /// ‖y_d_ext|_Γ - z_d‖_{L²(Γ)}.
    pub trace_inconsistency: f64,
}

/// Everything that does not depend on the iterate.
pub struct Setup {
    pub ops: FracOps,
    pub b: Vec<f64>,
    pub gram: GramMatrix,
    pub m_omega: DMatrix<f64>,
    pub solver: ClSolver,
    pub y0: SpectralField,
    pub y_d: SpectralField,
    pub projection_residuals: Vec<f64>,
    pub rhs_base: Vec<f64>,
    pub lo: Vec<f64>,
    pub mesh: TimeMesh,
    pub phi0_traj: DMatrix<f64>,
    pub control_times: Vec<f64>,
    pub grid: SpectralGrid,
}

impl Setup {
    pub fn new(prob: &HumProblem) -> Result<Self> {
        prob.validate()?;
        let d = &prob.disc;
        let ops = FracOps::new(prob.params)?;
        let b = actuator_coefficients(&prob.actuator, d.order);
        let gram = ops.gram_matrix(&b, d.quad_order)?;
        let m_omega = mass_matrix(&prob.omega, d.order);
        let solver = ClSolver::new(&gram, &m_omega, prob.solver.reg, prob.solver.rank_tol)?;
        let Targets {
            rhs_base,
            lo,
            y0,
            y_d,
            projection_residuals,
        } = targets(prob, &ops, &m_omega)?;
        let mesh = prob.mesh()?;
        let phi0_traj = free_trajectory(&ops, &y0, &mesh)?;
        let control_times = control_mesh(&prob.params, d.control_nodes)?;
        let grid = SpectralGrid::new(d.order, d.grid_points)?;
        Ok(Self {
            ops,
            b,
            gram,
            m_omega,
            solver,
            y0,
            y_d,
            projection_residuals,
            rhs_base,
            lo,
            mesh,
            phi0_traj,
            control_times,
            grid,
        })
    }

    fn control(&self, phi0: &SpectralField) -> Result<ControlSignal> {
        self.ops.sample_control(phi0, &self.b, &self.control_times)
    }

    /// φ₁ and φ₂ trajectories driven by the control of `phi0`.
    fn forced_parts(
        &self,
        prob: &HumProblem,
        phi0: &SpectralField,
    ) -> Result<(DMatrix<f64>, StateTrajectory)> {
        let u = self.control(phi0)?;
        let phi1 = self.ops.controlled_state(&u, &self.b, self.mesh.nodes())?;
        let phi2 = solve_phi2(
            &self.phi0_traj,
            &phi1,
            &prob.nonlinear,
            &self.ops,
            &self.mesh,
            &self.grid,
        )?;
        Ok((phi1, phi2))
    }
}

struct Targets {
    rhs_base: Vec<f64>,
    lo: Vec<f64>,
    y0: SpectralField,
    y_d: SpectralField,
    projection_residuals: Vec<f64>,
}

fn targets(prob: &HumProblem, ops: &FracOps, m_omega: &DMatrix<f64>) -> Result<Targets> {
    let d = &prob.disc;
    let y0 = project_function(|x, y| (prob.y0)(x, y), d.order, d.projection_points)?;
    let yd = project_function(|x, y| (prob.y_d_ext)(x, y), d.order, d.projection_points)?;
    let free_t = ops.propagate_free(&y0.field, prob.params.t_final)?;
    let rhs_base = (m_omega * yd.field.to_vector()).as_slice().to_vec();
    let lo = (m_omega * free_t.to_vector()).as_slice().to_vec();
    Ok(Targets {
        rhs_base,
        lo,
        y0: y0.field,
        y_d: yd.field,
        projection_residuals: vec![y0.residual, yd.residual],
    })
}

/// (rhs_base, L_o) = (M_ω ŷ_d, M_ω P_α(T) ŷ₀).
pub fn assemble_targets(prob: &HumProblem) -> Result<(Vec<f64>, Vec<f64>)> {
    prob.validate()?;
    let ops = FracOps::new(prob.params)?;
    let m_omega = mass_matrix(&prob.omega, prob.disc.order);
    let t = targets(prob, &ops, &m_omega)?;
    Ok((t.rhs_base, t.lo))
}

/// P_α(t_i) y₀ at the mesh nodes; column 0 is NaN for α < 1 (singular).
fn free_trajectory(ops: &FracOps, y0: &SpectralField, mesh: &TimeMesh) -> Result<DMatrix<f64>> {
    let n = y0.coeffs().len();
    let mut out = DMatrix::zeros(n, mesh.len());
    for (i, &t) in mesh.nodes().iter().enumerate() {
        if t == 0.0 {
            let v = if ops.params().alpha == 1.0 {
                1.0
            } else {
                f64::NAN
            };
            for (r, c) in y0.coeffs().iter().enumerate() {
                out[(r, 0)] = if v.is_nan() && *c == 0.0 { 0.0 } else { c * v };
            }
            continue;
        }
        let col = ops.propagate_free(y0, t)?;
        out.set_column(i, &col.to_vector());
    }
    Ok(out)
}

pub fn g_norm(phi0: &SpectralField, b: &[f64], p: &FracParams, quad_order: usize) -> Result<f64> {
    FracOps::new(*p)?.control_l2_norm(phi0, b, quad_order)
}

/// Result of running the system forward with the control of a given φ₀.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub final_state: SpectralField,
    /// φ₀ + φ₁ + φ₂ at the mesh nodes (column 0 may be non-finite).
    pub trajectory: StateTrajectory,
    pub control: ControlSignal,
    pub error_omega: f64,
    pub error_gamma: f64,
}

fn closed_loop_with(setup: &Setup, prob: &HumProblem, phi0: &SpectralField) -> Result<ClosedLoop> {
    if phi0.coeffs().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("φ₀ must be finite".into()));
    }
    let (phi1, phi2) = setup.forced_parts(prob, phi0)?;
    let total = &setup.phi0_traj + &phi1 + &phi2.coeffs;
    let last = total.ncols() - 1;
    let final_state = SpectralField::from_coeffs(
        prob.disc.order,
        total.column(last).iter().copied().collect(),
    )?;
    let error_omega = error_with_mass(&final_state, &setup.y_d, &setup.m_omega, prob.solver.norm)?;
    let error_gamma = error_on_segment(
        &final_state,
        |s| (prob.z_d)(s),
        &prob.gamma,
        prob.disc.trace_samples,
    )?;
    Ok(ClosedLoop {
        final_state,
        trajectory: StateTrajectory {
            mesh: setup.mesh.clone(),
            coeffs: total,
        },
        control: setup.control(phi0)?,
        error_omega,
        error_gamma,
    })
}

pub fn simulate_closed_loop(prob: &HumProblem, phi0_star: &SpectralField) -> Result<ClosedLoop> {
    let setup = Setup::new(prob)?;
    closed_loop_with(&setup, prob, phi0_star)
}

/// Full output of a run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub phi0: SpectralField,
    pub report: RunReport,
    pub closed_loop: ClosedLoop,
    pub y_d: SpectralField,
}

pub fn fixed_point(prob: &HumProblem) -> Result<(SpectralField, RunReport)> {
    let out = run(prob)?;
    Ok((out.phi0, out.report))
}

/// Fixed-point iteration followed by the closed-loop simulation and the
/// diagnostics.
pub fn run(prob: &HumProblem) -> Result<RunOutcome> {
    let setup = Setup::new(prob)?;
    let order = prob.disc.order;
    let mut phi0 = prob
        .phi0_init
        .clone()
        .unwrap_or_else(|| SpectralField::zeros(order));
    let base: Vec<f64> = setup
        .rhs_base
        .iter()
        .zip(&setup.lo)
        .map(|(r, l)| r - l)
        .collect();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..prob.solver.max_iters {
        iterations += 1;
        let rhs = if prob.nonlinear.is_none() {
            base.clone()
        } else {
            let (_, phi2) = setup.forced_parts(prob, &phi0)?;
            let o_n = &setup.m_omega * DVector::from_vec(phi2.final_coeffs());
            base.iter().zip(o_n.iter()).map(|(b, o)| b - o).collect()
        };
        let next = SpectralField::from_coeffs(order, setup.solver.solve(&rhs)?)?;
        let step = setup.gram.norm_of(next.sub(&phi0)?.coeffs());
        history.push(step);
        let size = setup.gram.norm_of(next.coeffs());
        phi0 = next;
        if step <= prob.solver.eps * size.max(1.0) {
            converged = true;
            break;
        }
    }

    let closed_loop = closed_loop_with(&setup, prob, &phi0)?;
    let phi0_gnorm = setup.gram.norm_of(phi0.coeffs());
    let control_energy = setup
        .ops
        .control_l2_norm(&phi0, &setup.b, prob.disc.quad_order)?;
    let b_norm = setup.b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let gronwall: GronwallReport = gronwall_time_condition(
        prob.solver.m_const,
        &prob.nonlinear,
        &prob.params,
        phi0_gnorm,
        setup.y0.norm(),
        b_norm,
    )?;
    let h0: H0Report = h0_diagnostic(&closed_loop.trajectory.coeffs, &prob.nonlinear, &setup.grid);
    let report = RunReport {
        iterations,
        converged,
        residual_history: history,
        gram_min_eig: setup.gram.min_eigenvalue,
        gram_max_eig: *setup.gram.spectrum.last().unwrap_or(&0.0),
        effective_rank: setup.solver.rank(),
        zero_modes: setup
            .gram
            .zero_modes
            .iter()
            .map(|m: &ModeIndex| (m.j, m.k))
            .collect(),
        error_omega: closed_loop.error_omega,
        error_gamma: closed_loop.error_gamma,
        control_energy,
        phi0_gnorm,
        gronwall_value: gronwall.value,
        gronwall_satisfied: gronwall.satisfied,
        h0_margin: h0.l2.max_violation,
        h0_margin_sup: h0.sup.max_violation,
        projection_residuals: setup.projection_residuals.clone(),
        trace_inconsistency: trace_inconsistency(prob)?,
    };
    Ok(RunOutcome {
        phi0,
        report,
        closed_loop,
        y_d: setup.y_d,
    })
}
