//! Cosine eigenbasis of the Neumann Laplacian on Ω = (0, π)².
//!
//! ξ_{jk}(x, y) = c_j c_k cos(jx) cos(ky) with c_0 = 1/√π and c_j = √(2/π),
//! eigenvalue -(j² + k²). Fields of order J carry (J+1)² coefficients stored
//! row-major in (j, k): index = j (J + 1) + k. Every file dump uses the same
//! ordering.

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub j: usize,
    pub k: usize,
}

impl ModeIndex {
    pub fn new(j: usize, k: usize) -> Self {
        Self { j, k }
    }

    pub fn flat(self, order: usize) -> usize {
        self.j * (order + 1) + self.k
    }

    pub fn from_flat(i: usize, order: usize) -> Self {
        Self {
            j: i / (order + 1),
            k: i % (order + 1),
        }
    }
}

/// Number of modes in a basis of order J.
pub fn mode_count(order: usize) -> usize {
    (order + 1) * (order + 1)
}

pub fn eigenvalue(m: ModeIndex) -> f64 {
    -((m.j * m.j + m.k * m.k) as f64)
}

/// Eigenvalues of all modes of order J, in storage order.
pub fn eigenvalues(order: usize) -> Vec<f64> {
    (0..mode_count(order))
        .map(|i| eigenvalue(ModeIndex::from_flat(i, order)))
        .collect()
}

/// L²(0, π) normalisation of cos(jx).
pub fn norm_const(j: usize) -> f64 {
    if j == 0 {
        1.0 / PI.sqrt()
    } else {
        (2.0 / PI).sqrt()
    }
}

pub fn eval_basis(m: ModeIndex, x: f64, y: f64) -> f64 {
    norm_const(m.j) * norm_const(m.k) * (m.j as f64 * x).cos() * (m.k as f64 * y).cos()
}

/// ∫_a^b cos(jx) cos(j2 x) dx in closed form.
pub fn cos_overlap_1d(j: usize, j2: usize, a: f64, b: f64) -> f64 {
    let sin_part = |n: f64| ((n * b).sin() - (n * a).sin()) / (2.0 * n);
    match (j, j2) {
        (0, 0) => b - a,
        _ if j == j2 => 0.5 * (b - a) + sin_part(2.0 * j as f64),
        _ => {
            let d = j as f64 - j2 as f64;
            sin_part(d) + sin_part((j + j2) as f64)
        }
    }
}

/// ∫_a^b cos(jx) dx.
fn cos_integral_1d(j: usize, a: f64, b: f64) -> f64 {
    if j == 0 {
        b - a
    } else {
        let n = j as f64;
        ((n * b).sin() - (n * a).sin()) / n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        let r = Self { x0, x1, y0, y1 };
        r.validate()?;
        Ok(r)
    }

    pub fn domain() -> Self {
        Self {
            x0: 0.0,
            x1: PI,
            y0: 0.0,
            y1: PI,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let inside = |lo: f64, hi: f64| 0.0 <= lo && lo < hi && hi <= PI;
        if inside(self.x0, self.x1) && inside(self.y0, self.y1) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "rectangle [{}, {}]×[{}, {}] must be non-degenerate and inside [0, π]²",
                self.x0, self.x1, self.y0, self.y1
            )))
        }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    /// x = 0
    West,
    /// x = π
    East,
    /// y = 0
    South,
    /// y = π
    North,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySegment {
    pub edge: Edge,
    pub lo: f64,
    pub hi: f64,
}

impl BoundarySegment {
    pub fn new(edge: Edge, lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo < hi && hi <= PI) {
            return Err(Error::InvalidArgument(format!(
                "boundary segment [{lo}, {hi}] must satisfy 0 ≤ lo < hi ≤ π"
            )));
        }
        Ok(Self { edge, lo, hi })
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// Point of Ω̄ at arc parameter s ∈ [lo, hi].
    pub fn point(&self, s: f64) -> (f64, f64) {
        match self.edge {
            Edge::West => (0.0, s),
            Edge::East => (PI, s),
            Edge::South => (s, 0.0),
            Edge::North => (s, PI),
        }
    }

    /// True when the segment lies on an edge of `r` that is also an edge of Ω.
    pub fn lies_on_boundary_of(&self, r: &Rect) -> bool {
        let tol = 1e-12;
        let (on_edge, lo, hi) = match self.edge {
            Edge::West => (r.x0.abs() <= tol, r.y0, r.y1),
            Edge::East => ((r.x1 - PI).abs() <= tol, r.y0, r.y1),
            Edge::South => (r.y0.abs() <= tol, r.x0, r.x1),
            Edge::North => ((r.y1 - PI).abs() <= tol, r.x0, r.x1),
        };
        on_edge && self.lo >= lo - tol && self.hi <= hi + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Actuator {
    Zonal { region: Rect },
    Pointwise { b1: f64, b2: f64 },
}

impl Actuator {
    pub fn validate(&self) -> Result<()> {
        match self {
            Actuator::Zonal { region } => region.validate(),
            Actuator::Pointwise { b1, b2 } => {
                let ok = |v: f64| (0.0..=PI).contains(&v);
                if ok(*b1) && ok(*b2) {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "pointwise actuator ({b1}, {b2}) lies outside [0, π]²"
                    )))
                }
            }
        }
    }
}

/// Coefficients of a function on the truncated eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    order: usize,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            coeffs: vec![0.0; mode_count(order)],
        }
    }

    pub fn from_coeffs(order: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != mode_count(order) {
            return Err(Error::Dimension(format!(
                "order {order} needs {} coefficients, got {}",
                mode_count(order),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "field coefficients must be finite".into(),
            ));
        }
        Ok(Self { order, coeffs })
    }

    /// Single-mode field c·ξ_m.
    pub fn mode(order: usize, m: ModeIndex, c: f64) -> Self {
        let mut f = Self::zeros(order);
        f.coeffs[m.flat(order)] = c;
        f
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn get(&self, m: ModeIndex) -> f64 {
        self.coeffs[m.flat(self.order)]
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coeffs)
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let n = self.order + 1;
        let cx: Vec<f64> = (0..n)
            .map(|j| norm_const(j) * (j as f64 * x).cos())
            .collect();
        let cy: Vec<f64> = (0..n)
            .map(|k| norm_const(k) * (k as f64 * y).cos())
            .collect();
        self.coeffs
            .chunks(n)
            .zip(&cx)
            .map(|(row, c)| c * row.iter().zip(&cy).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }

    fn check_same_order(&self, other: &Self) -> Result<()> {
        if self.order != other.order {
            return Err(Error::Dimension(format!(
                "field orders differ ({} vs {})",
                self.order, other.order
            )));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_order(other)?;
        Ok(Self {
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_order(other)?;
        Ok(Self {
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            order: self.order,
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }
}

pub fn eval_field(fld: &SpectralField, points: &[(f64, f64)]) -> Vec<f64> {
    points.iter().map(|&(x, y)| fld.eval(x, y)).collect()
}

/// Matrix of ∫_region ξ_m ξ_n in storage order.
pub fn mass_matrix(region: &Rect, order: usize) -> DMatrix<f64> {
    let n = order + 1;
    let ox = DMatrix::from_fn(n, n, |j, j2| {
        norm_const(j) * norm_const(j2) * cos_overlap_1d(j, j2, region.x0, region.x1)
    });
    let oy = DMatrix::from_fn(n, n, |k, k2| {
        norm_const(k) * norm_const(k2) * cos_overlap_1d(k, k2, region.y0, region.y1)
    });
    let size = mode_count(order);
    let mut m = DMatrix::zeros(size, size);
    for a in 0..size {
        let ma = ModeIndex::from_flat(a, order);
        for b in a..size {
            let mb = ModeIndex::from_flat(b, order);
            let v = ox[(ma.j, mb.j)] * oy[(ma.k, mb.k)];
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    m
}

/// B* in the eigenbasis: ∫_D ξ_n (zonal) or ξ_n(b1, b2) (pointwise).
pub fn actuator_coefficients(act: &Actuator, order: usize) -> Vec<f64> {
    (0..mode_count(order))
        .map(|i| {
            let m = ModeIndex::from_flat(i, order);
            match act {
                Actuator::Zonal { region } => {
                    norm_const(m.j)
                        * norm_const(m.k)
                        * cos_integral_1d(m.j, region.x0, region.x1)
                        * cos_integral_1d(m.k, region.y0, region.y1)
                }
                Actuator::Pointwise { b1, b2 } => eval_basis(m, *b1, *b2),
            }
        })
        .collect()
}

/// Tensor Gauss-Legendre grid on Ω with the basis tabulated at its nodes;
/// used for projections and pseudo-spectral products.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// table[p, j] = c_j cos(j x_p)
    table: DMatrix<f64>,
}

impl SpectralGrid {
    /// Grid of P×P nodes for fields of order J; P must be at least 2(J+1).
    pub fn new(order: usize, points: usize) -> Result<Self> {
        if points < 2 * (order + 1) {
            return Err(Error::InvalidArgument(format!(
                "grid size {points} aliases a basis of order {order}; need at least {}",
                2 * (order + 1)
            )));
        }
        let rule: Rule = gauss_legendre(points)?;
        let (nodes, weights): (Vec<f64>, Vec<f64>) = rule.mapped(0.0, PI).unzip();
        let table = DMatrix::from_fn(points, order + 1, |p, j| {
            norm_const(j) * (j as f64 * nodes[p]).cos()
        });
        Ok(Self {
            order,
            nodes,
            weights,
            table,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Values on the grid; entry (p, q) is the value at (x_p, y_q).
    pub fn to_grid(&self, coeffs: &[f64]) -> DMatrix<f64> {
        let n = self.order + 1;
        let a = DMatrix::from_row_slice(n, n, coeffs);
        &self.table * a * self.table.transpose()
    }

    /// Quadrature projection of grid values onto the basis.
    pub fn from_grid(&self, values: &DMatrix<f64>) -> Vec<f64> {
        let p = self.size();
        let weighted = DMatrix::from_fn(p, p, |i, j| {
            values[(i, j)] * self.weights[i] * self.weights[j]
        });
        let a = self.table.transpose() * weighted * &self.table;
        // row-major flattening
        let n = self.order + 1;
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                out.push(a[(j, k)]);
            }
        }
        out
    }

    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> DMatrix<f64> {
        let p = self.size();
        DMatrix::from_fn(p, p, |i, j| f(self.nodes[i], self.nodes[j]))
    }

    /// Discrete L² norm over Ω of grid values.
    pub fn l2_norm(&self, values: &DMatrix<f64>) -> f64 {
        let p = self.size();
        let mut s = 0.0;
        for i in 0..p {
            for j in 0..p {
                s += self.weights[i] * self.weights[j] * values[(i, j)].powi(2);
            }
        }
        s.sqrt()
    }
}

/// Result of projecting a pointwise function onto the basis.
#[derive(Debug, Clone)]
pub struct Projection {
    pub field: SpectralField,
    /// Discrete L² norm of f - Π_J f on the quadrature grid.
    pub residual: f64,
}

pub fn project_function<F: Fn(f64, f64) -> f64>(
    f: F,
    order: usize,
    points: usize,
) -> Result<Projection> {
    let grid = SpectralGrid::new(order, points)?;
    let values = grid.sample(&f);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "function is not finite on the projection grid".into(),
        ));
    }
    let coeffs = grid.from_grid(&values);
    let back = grid.to_grid(&coeffs);
    let residual = grid.l2_norm(&(values - back));
    Ok(Projection {
        field: SpectralField::from_coeffs(order, coeffs)?,
        residual,
    })
}

/// Gauss-Legendre nodes and weights along a segment.
pub fn segment_rule(seg: &BoundarySegment, samples: usize) -> Result<Vec<(f64, f64)>> {
    Ok(gauss_legendre(samples)?.mapped(seg.lo, seg.hi).collect())
}

/// Field values at `samples` Gauss-Legendre nodes along the segment;
/// returns (arc parameter, value) pairs.
pub fn trace_values(
    fld: &SpectralField,
    seg: &BoundarySegment,
    samples: usize,
) -> Result<Vec<(f64, f64)>> {
    if samples < 2 {
        return Err(Error::InvalidArgument(
            "trace needs at least 2 samples".into(),
        ));
    }
    Ok(segment_rule(seg, samples)?
        .into_iter()
        .map(|(s, _)| {
            let (x, y) = seg.point(s);
            (s, fld.eval(x, y))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorNorm {
    #[default]
    L2,
    H1Weighted,
}

/// √(dᵀ M_region d) with d = a - b; the H¹-weighted variant scales mode m
/// of d by √(1 + |λ_m|) first.
pub fn error_on_region(
    a: &SpectralField,
    b: &SpectralField,
    region: &Rect,
    norm: ErrorNorm,
) -> Result<f64> {
    let mass = mass_matrix(region, a.order());
    error_with_mass(a, b, &mass, norm)
}

pub fn error_with_mass(
    a: &SpectralField,
    b: &SpectralField,
    mass: &DMatrix<f64>,
    norm: ErrorNorm,
) -> Result<f64> {
    let d = a.sub(b)?;
    let order = d.order();
    let mut dv = d.to_vector();
    if norm == ErrorNorm::H1Weighted {
        for (i, v) in dv.iter_mut().enumerate() {
            *v *= (1.0 + eigenvalue(ModeIndex::from_flat(i, order)).abs()).sqrt();
        }
    }
    if mass.nrows() != dv.len() {
        return Err(Error::Dimension(
            "mass matrix does not match field order".into(),
        ));
    }
    Ok(dv.dot(&(mass * &dv)).max(0.0).sqrt())
}

/// Gauss-Legendre L² norm over the segment of (trace - target).
pub fn error_on_segment<F: Fn(f64) -> f64>(
    fld: &SpectralField,
    target: F,
    seg: &BoundarySegment,
    samples: usize,
) -> Result<f64> {
    if samples < 8 {
        return Err(Error::InvalidArgument(
            "segment error needs at least 8 samples".into(),
        ));
    }
    let s: f64 = segment_rule(seg, samples)?
        .into_iter()
        .map(|(s, w)| {
            let (x, y) = seg.point(s);
            w * (fld.eval(x, y) - target(s)).powi(2)
        })
        .sum();
    Ok(s.sqrt())
}

/// Plain-text dump: `# J=<J> P=<P>` then P² lines `x y value`, x outer.
pub fn write_grid_dump<W: Write>(
    out: &mut W,
    fld: &SpectralField,
    grid: &SpectralGrid,
) -> io::Result<()> {
    writeln!(out, "# J={} P={}", fld.order(), grid.size())?;
    let values = grid.to_grid(fld.coeffs());
    for (p, &x) in grid.nodes().iter().enumerate() {
        for (q, &y) in grid.nodes().iter().enumerate() {
            writeln!(out, "{:.16e} {:.16e} {:.16e}", x, y, values[(p, q)])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive;

    #[test]
    fn eigenvalues_and_basis_values() {
        assert_eq!(eigenvalue(ModeIndex::new(0, 0)), 0.0);
        assert_eq!(eigenvalue(ModeIndex::new(1, 1)), -2.0);
        assert_eq!(eigenvalue(ModeIndex::new(3, 4)), -25.0);
        assert!((eval_basis(ModeIndex::new(0, 0), 0.3, 2.0) - 1.0 / PI).abs() < 1e-15);
        assert!((eval_basis(ModeIndex::new(1, 0), 0.0, 1.1) - 2f64.sqrt() / PI).abs() < 1e-15);
        assert!(eval_basis(ModeIndex::new(2, 2), PI / 4.0, PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn overlap_closed_forms() {
        assert!((cos_overlap_1d(0, 0, 0.0, PI) - PI).abs() < 1e-15);
        assert!((cos_overlap_1d(1, 1, 0.0, PI) - PI / 2.0).abs() < 1e-15);
        assert!(cos_overlap_1d(1, 2, 0.0, PI).abs() < 1e-15);
        let oracle = adaptive(
            |x: f64| x.cos() * (2.0 * x).cos(),
            0.0,
            PI / 2.0,
            &[],
            1e-15,
            100,
        )
        .unwrap();
        assert!((cos_overlap_1d(1, 2, 0.0, PI / 2.0) - oracle).abs() < 1e-14);
        // both argument orders
        assert!((cos_overlap_1d(2, 1, 0.0, PI / 2.0) - oracle).abs() < 1e-14);
    }

    #[test]
    fn mass_matrix_cases() {
        let m = mass_matrix(&Rect::domain(), 5);
        let id = DMatrix::<f64>::identity(36, 36);
        assert!((m - id).amax() < 1e-12);
        let half = Rect::new(0.0, PI / 2.0, 0.0, PI).unwrap();
        assert!((mass_matrix(&half, 3)[(0, 0)] - 0.5).abs() < 1e-15);

        // 2-D Gauss oracle for ((1,0),(1,0)) on [0,0.3]×[0,0.5]
        let r = Rect::new(0.0, 0.3, 0.0, 0.5).unwrap();
        let gl = gauss_legendre(20).unwrap();
        let mut oracle = 0.0;
        for (x, wx) in gl.mapped(r.x0, r.x1) {
            for (y, wy) in gl.mapped(r.y0, r.y1) {
                oracle += wx * wy * eval_basis(ModeIndex::new(1, 0), x, y).powi(2);
            }
        }
        let idx = ModeIndex::new(1, 0).flat(2);
        assert!((mass_matrix(&r, 2)[(idx, idx)] - oracle).abs() < 1e-14);
    }

    #[test]
    fn actuator_cases() {
        let b = actuator_coefficients(
            &Actuator::Zonal {
                region: Rect::domain(),
            },
            3,
        );
        assert!((b[0] - PI).abs() < 1e-14);
        assert!(b[1..].iter().all(|v| v.abs() < 1e-14));
        let p = actuator_coefficients(&Actuator::Pointwise { b1: 0.0, b2: 0.5 }, 3);
        // mode (0,1): c_0 c_1 cos(0) cos(0.5)
        let want = (1.0 / PI.sqrt()) * (2.0 / PI).sqrt() * 0.5f64.cos();
        assert!((p[ModeIndex::new(0, 1).flat(3)] - want).abs() < 1e-15);

        let d = Rect::new(0.5, 1.0, 0.7, 1.0).unwrap();
        let z = actuator_coefficients(&Actuator::Zonal { region: d }, 2);
        let inner = |x: f64| {
            adaptive(
                |y: f64| eval_basis(ModeIndex::new(1, 1), x, y),
                0.7,
                1.0,
                &[],
                1e-15,
                100,
            )
            .unwrap()
        };
        let oracle = adaptive(inner, 0.5, 1.0, &[], 1e-15, 100).unwrap();
        assert!((z[ModeIndex::new(1, 1).flat(2)] - oracle).abs() < 1e-14);
    }

    #[test]
    fn projection_cases() {
        let p = project_function(|_, _| 1.0, 4, 16).unwrap();
        assert!((p.field.coeffs()[0] - PI).abs() < 1e-12);
        assert!(p.field.coeffs()[1..].iter().all(|v| v.abs() < 1e-12));

        let m = ModeIndex::new(1, 1);
        let p = project_function(|x, y| eval_basis(m, x, y), 4, 16).unwrap();
        for (i, c) in p.field.coeffs().iter().enumerate() {
            let want = if i == m.flat(4) { 1.0 } else { 0.0 };
            assert!((c - want).abs() < 1e-12);
        }
        assert!(p.residual < 1e-12);

        let p = project_function(|x, y| (x * y).sqrt(), 8, 64).unwrap();
        let want = 4.0 * PI * PI / 9.0;
        let one_d = adaptive(|x: f64| x.sqrt(), 0.0, PI, &[], 1e-15, 500).unwrap();
        assert!((one_d * one_d / PI - want).abs() < 1e-12);
        assert!((p.field.coeffs()[0] - want).abs() < 1e-4 * want);
        assert!(p.residual > 0.0);

        assert!(project_function(|_, _| 1.0, 4, 9).is_err());
    }

    #[test]
    fn traces_and_segment_errors() {
        let west = BoundarySegment::new(Edge::West, 0.0, PI).unwrap();
        let c = SpectralField::mode(3, ModeIndex::new(0, 0), 2.0);
        for (_, v) in trace_values(&c, &west, 5).unwrap() {
            assert!((v - 2.0 / PI).abs() < 1e-15);
        }
        let f = SpectralField::mode(3, ModeIndex::new(0, 2), 1.0);
        for (s, v) in trace_values(&f, &west, 7).unwrap() {
            let want = norm_const(0) * norm_const(2) * (2.0 * s).cos();
            assert!((v - want).abs() < 1e-15);
        }
        let mixed = c.add(&f).unwrap();
        for ((_, a), ((_, b), (_, c2))) in trace_values(&mixed, &west, 6).unwrap().into_iter().zip(
            trace_values(&c, &west, 6)
                .unwrap()
                .into_iter()
                .zip(trace_values(&f, &west, 6).unwrap()),
        ) {
            assert!((a - b - c2).abs() < 1e-14);
        }

        let own = |s: f64| f.eval(0.0, s);
        assert!(error_on_segment(&f, own, &west, 16).unwrap() <= 1e-14);
        let short = BoundarySegment::new(Edge::West, 0.0, 0.5).unwrap();
        let e = error_on_segment(&SpectralField::zeros(2), |_| 1.0, &short, 8).unwrap();
        assert!((e - 0.5f64.sqrt()).abs() < 1e-14);
        let g = SpectralField::mode(3, ModeIndex::new(0, 1), 1.0);
        let e = error_on_segment(&g, |_| 0.0, &west, 16).unwrap();
        let want = norm_const(0) * norm_const(1) * (PI / 2.0).sqrt();
        assert!((e - want).abs() < 1e-14);
        assert!(error_on_segment(&g, |_| 0.0, &west, 4).is_err());
    }

    #[test]
    fn region_error_cases() {
        let a = SpectralField::mode(3, ModeIndex::new(1, 1), 1.0);
        assert_eq!(
            error_on_region(&a, &a, &Rect::domain(), ErrorNorm::L2).unwrap(),
            0.0
        );
        let d = SpectralField::mode(3, ModeIndex::new(0, 0), 1.0);
        let z = SpectralField::zeros(3);
        assert!(
            (error_on_region(&d, &z, &Rect::domain(), ErrorNorm::L2).unwrap() - 1.0).abs() < 1e-14
        );

        let q = Rect::new(0.0, PI / 2.0, 0.0, PI / 2.0).unwrap();
        let gl = gauss_legendre(30).unwrap();
        let mut oracle = 0.0;
        for (x, wx) in gl.mapped(0.0, PI / 2.0) {
            for (y, wy) in gl.mapped(0.0, PI / 2.0) {
                oracle += wx * wy * eval_basis(ModeIndex::new(1, 1), x, y).powi(2);
            }
        }
        let e = error_on_region(&a, &z, &q, ErrorNorm::L2).unwrap();
        assert!((e - oracle.sqrt()).abs() < 1e-13);
        let h1 = error_on_region(&a, &z, &Rect::domain(), ErrorNorm::H1Weighted).unwrap();
        assert!((h1 - 3f64.sqrt()).abs() < 1e-13);
        assert!(error_on_region(&a, &SpectralField::zeros(2), &q, ErrorNorm::L2).is_err());
    }

    #[test]
    fn grid_dump_layout() {
        let f = SpectralField::mode(1, ModeIndex::new(0, 0), PI);
        let grid = SpectralGrid::new(1, 4).unwrap();
        let mut buf = Vec::new();
        write_grid_dump(&mut buf, &f, &grid).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# J=1 P=4");
        assert_eq!(lines.len(), 17);
        let v: f64 = lines[1].split_whitespace().nth(2).unwrap().parse().unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn segment_geometry() {
        let omega = Rect::new(0.0, 0.3, 0.0, 0.5).unwrap();
        assert!(BoundarySegment::new(Edge::West, 0.0, 0.5)
            .unwrap()
            .lies_on_boundary_of(&omega));
        assert!(!BoundarySegment::new(Edge::West, 0.0, 0.7)
            .unwrap()
            .lies_on_boundary_of(&omega));
        assert!(!BoundarySegment::new(Edge::East, 0.0, 0.5)
            .unwrap()
            .lies_on_boundary_of(&omega));
        assert!(BoundarySegment::new(Edge::West, 0.5, 0.5).is_err());
    }
}
