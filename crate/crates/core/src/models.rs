//! Built-in functions and the catalog of experiment presets.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fode::NonlinearSpec;
use crate::fracops::FracParams;
use crate::hum::{Discretization, HumProblem, SolverSettings};
use crate::spectral::{eval_basis, Actuator, BoundarySegment, Edge, ModeIndex, Rect};

/// A named closed-form function with bound parameters.
///
/// | name          | formula                                  | params (default)          |
/// |---------------|------------------------------------------|---------------------------|
/// | `steady_1d`   | amp (1 - μ cos 2s)                       | mu, amp (1)               |
/// | `ext_2d`      | amp (1 - μ cos 2x)(1 - δ cos 2y)         | mu, delta, amp (1)        |
/// | `sqrt_xy`     | √(xy)                                    |                           |
/// | `sqrt_xy_exp` | √(xy) e^{xy}                             |                           |
/// | `constant`    | c                                        | c                         |
/// | `mode`        | c ξ_jk(x, y)                             | j, k, c (1)               |
///
/// Two-variable functions evaluated on a segment use (0, s); one-variable
/// functions evaluated on Ω use y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFunction {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

const NAMES: &[(&str, &[&str], &[&str])] = &[
    ("steady_1d", &["mu"], &["amp"]),
    ("ext_2d", &["mu", "delta"], &["amp"]),
    ("sqrt_xy", &[], &[]),
    ("sqrt_xy_exp", &[], &[]),
    ("constant", &["c"], &[]),
    ("mode", &["j", "k"], &["c"]),
];

pub fn builtin_names() -> Vec<&'static str> {
    NAMES.iter().map(|(n, ..)| *n).collect()
}

pub fn builtin(name: &str, params: &[(&str, f64)]) -> Result<NamedFunction> {
    let f = NamedFunction {
        name: name.to_string(),
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    };
    f.validate()?;
    Ok(f)
}

impl NamedFunction {
    pub fn validate(&self) -> Result<()> {
        let Some((_, required, optional)) = NAMES.iter().find(|(n, ..)| *n == self.name) else {
            return Err(Error::InvalidArgument(format!(
                "unknown function '{}'; known: {}",
                self.name,
                builtin_names().join(", ")
            )));
        };
        for r in *required {
            if !self.params.contains_key(*r) {
                return Err(Error::InvalidArgument(format!(
                    "function '{}' needs parameter '{r}'",
                    self.name
                )));
            }
        }
        for (k, v) in &self.params {
            if !required.contains(&k.as_str()) && !optional.contains(&k.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "function '{}' has no parameter '{k}'",
                    self.name
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "parameter '{k}' must be finite"
                )));
            }
        }
        if self.name == "mode" {
            for key in ["j", "k"] {
                let v = self.params[key];
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "mode index {key} must be a non-negative integer"
                    )));
                }
            }
        }
        Ok(())
    }

    fn p(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    pub fn eval2(&self, x: f64, y: f64) -> f64 {
        match self.name.as_str() {
            "steady_1d" => self.eval1(y),
            "ext_2d" => {
                self.p("amp", 1.0)
                    * (1.0 - self.p("mu", 0.0) * (2.0 * x).cos())
                    * (1.0 - self.p("delta", 0.0) * (2.0 * y).cos())
            }
            "sqrt_xy" => (x * y).sqrt(),
            "sqrt_xy_exp" => (x * y).sqrt() * (x * y).exp(),
            "constant" => self.p("c", 0.0),
            "mode" => {
                let m = ModeIndex::new(self.p("j", 0.0) as usize, self.p("k", 0.0) as usize);
                self.p("c", 1.0) * eval_basis(m, x, y)
            }
            _ => f64::NAN,
        }
    }

    pub fn eval1(&self, s: f64) -> f64 {
        match self.name.as_str() {
            "steady_1d" => self.p("amp", 1.0) * (1.0 - self.p("mu", 0.0) * (2.0 * s).cos()),
            _ => self.eval2(0.0, s),
        }
    }

    pub fn field2(&self) -> crate::hum::Field2 {
        let f = self.clone();
        Arc::new(move |x, y| f.eval2(x, y))
    }

    pub fn field1(&self) -> crate::hum::Field1 {
        let f = self.clone();
        Arc::new(move |s| f.eval1(s))
    }
}

/// Serializable description of a full experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub alpha: f64,
    pub t_final: f64,
    #[serde(default = "default_strict")]
    pub strict: bool,
    pub omega: Rect,
    pub gamma: BoundarySegment,
    pub actuator: Actuator,
    pub y0: NamedFunction,
    pub y_d_ext: NamedFunction,
    pub z_d: NamedFunction,
    pub nonlinear: NonlinearSpec,
    #[serde(default)]
    pub disc: Discretization,
    #[serde(default)]
    pub solver: SolverSettings,
}

fn default_strict() -> bool {
    true
}

impl ProblemSpec {
    pub fn build(&self) -> Result<HumProblem> {
        for f in [&self.y0, &self.y_d_ext, &self.z_d] {
            f.validate()?;
        }
        let params = FracParams {
            alpha: self.alpha,
            t_final: self.t_final,
            strict: self.strict,
        };
        let prob = HumProblem {
            params,
            omega: self.omega,
            gamma: self.gamma,
            actuator: self.actuator,
            y0: self.y0.field2(),
            y_d_ext: self.y_d_ext.field2(),
            z_d: self.z_d.field1(),
            nonlinear: self.nonlinear,
            disc: self.disc,
            solver: self.solver,
            phi0_init: None,
        };
        prob.validate()?;
        Ok(prob)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub label: String,
    pub description: String,
    pub problem: ProblemSpec,
    /// Error on Γ reported by the source tables, when there is one.
    pub paper_error_gamma: Option<f64>,
}

fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Rect {
    Rect { x0, x1, y0, y1 }
}

fn west(hi: f64) -> BoundarySegment {
    BoundarySegment {
        edge: Edge::West,
        lo: 0.0,
        hi,
    }
}

fn f(name: &str, params: &[(&str, f64)]) -> NamedFunction {
    NamedFunction {
        name: name.to_string(),
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

/// Logistic N(v) = C v (1 - v/Kcap) with the pointwise growth constants
/// L = C and K = C / Kcap.
fn logistic(c: f64, kcap: f64) -> NonlinearSpec {
    NonlinearSpec {
        kind: crate::fode::NonlinearKind::Logistic { c, kcap },
        l_const: c,
        k_const: c / kcap,
    }
}

fn example1_problem(actuator: Rect, omega: Rect) -> ProblemSpec {
    ProblemSpec {
        alpha: 0.75,
        t_final: 2.0,
        strict: true,
        omega,
        gamma: west(0.5),
        actuator: Actuator::Zonal { region: actuator },
        y0: f("sqrt_xy", &[]),
        y_d_ext: f("ext_2d", &[("mu", 0.5), ("delta", 0.5)]),
        z_d: f("steady_1d", &[("mu", 0.5)]),
        nonlinear: logistic(1.0, 100.0),
        disc: Discretization::default(),
        solver: SolverSettings::default(),
    }
}

fn example2_problem(omega: Rect, point: (f64, f64)) -> ProblemSpec {
    ProblemSpec {
        alpha: 0.8,
        t_final: 2.0,
        strict: true,
        omega,
        gamma: west(0.4),
        actuator: Actuator::Pointwise {
            b1: point.0,
            b2: point.1,
        },
        y0: f("sqrt_xy_exp", &[]),
        y_d_ext: f("ext_2d", &[("mu", 0.5), ("delta", 0.5), ("amp", 2.0)]),
        z_d: f("steady_1d", &[("mu", 0.5), ("amp", 100.0)]),
        nonlinear: logistic(1.0, 1.0),
        disc: Discretization::default(),
        solver: SolverSettings::default(),
    }
}

// rectangles are (x0, x1, y0, y1)
type Bounds = (f64, f64, f64, f64);

const TABLE1: [(Bounds, Bounds, f64); 6] = [
    ((0.5, 1.0, 0.7, 1.0), (0.0, 0.5, 0.0, 0.7), 0.1179),
    ((0.5, 1.0, 0.7, 1.0), (0.0, 1.0, 0.0, 1.0), 0.6392),
    ((0.3, 0.5, 0.7, 1.0), (0.0, 0.3, 0.0, 0.5), 0.0554),
    ((0.3, 0.5, 0.7, 1.0), (0.0, 0.1, 0.0, 0.7), 0.0069),
    ((0.0, 0.3, 0.0, 0.1), (0.0, 0.5, 0.0, 0.5), 0.0953),
    ((0.0, 0.3, 0.0, 0.1), (0.0, 0.5, 0.0, 0.7), 0.1081),
];

const TABLE2: [(Bounds, (f64, f64), f64); 6] = [
    ((0.0, 0.3, 0.0, 0.4), (0.0, 1.0), 0.3884),
    ((0.0, 0.3, 0.0, 0.4), (0.0, 0.3), 0.1022),
    ((0.0, 0.5, 0.0, 1.0), (0.0, 0.5), 0.3969),
    ((0.0, 0.5, 0.0, 1.0), (0.0, 0.1), 0.0639),
    ((0.0, 1.0, 0.0, 0.5), (0.0, 0.5), 0.0363),
    ((0.0, 1.0, 0.0, 0.5), (0.0, 0.3), 0.0552),
];

fn tuple_rect(r: (f64, f64, f64, f64)) -> Rect {
    rect(r.0, r.1, r.2, r.3)
}

pub fn preset_labels() -> Vec<String> {
    let mut v: Vec<String> = [
        "example1",
        "example1_rescaled",
        "example2",
        "example2_rescaled",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    v.extend((1..=6).map(|i| format!("table1_row{i}")));
    v.extend((1..=6).map(|i| format!("table2_row{i}")));
    v
}

/// Labels of the rows of table 1 or 2, in table order.
pub fn table_labels(table: usize) -> Result<Vec<String>> {
    match table {
        1 | 2 => Ok((1..=6).map(|i| format!("table{table}_row{i}")).collect()),
        _ => Err(Error::InvalidArgument(format!(
            "there is no table {table}; choose 1 or 2"
        ))),
    }
}

pub fn preset(label: &str) -> Result<ExperimentPreset> {
    let mk = |description: String, problem: ProblemSpec, paper: Option<f64>| ExperimentPreset {
        label: label.to_string(),
        description,
        problem,
        paper_error_gamma: paper,
    };
    let ex1_d = rect(0.5, 1.0, 0.7, 1.0);
    let ex1_w = rect(0.0, 0.3, 0.0, 0.5);
    match label {
        "example1" => Ok(mk(
            "zonal actuator, logistic C=1 K=100, alpha=0.75, extension as printed (mu = delta = 0.5)".into(),
            example1_problem(ex1_d, ex1_w),
            None,
        )),
        "example1_rescaled" => {
            let mut p = example1_problem(ex1_d, ex1_w);
            // extension whose trace on x = 0 equals z_d
            p.y_d_ext = f("ext_2d", &[("mu", 0.5), ("delta", 0.5), ("amp", 2.0)]);
            Ok(mk(
                "example1 with the extension scaled by 2 so that its trace on Gamma equals z_d".into(),
                p,
                None,
            ))
        }
        "example2" => Ok(mk(
            "pointwise actuator at (0, 0.5), logistic C=1 K=1, alpha=0.8, z_d and extension as printed".into(),
            example2_problem(rect(0.0, 0.3, 0.0, 0.4), (0.0, 0.5)),
            None,
        )),
        "example2_rescaled" => {
            let mut p = example2_problem(rect(0.0, 0.3, 0.0, 0.4), (0.0, 0.5));
            p.z_d = f("steady_1d", &[("mu", 0.5), ("amp", 1.0)]);
            Ok(mk(
                "example2 with z_d replaced by the trace of the extension".into(),
                p,
                None,
            ))
        }
        _ => {
            let parse_row = |prefix: &str| -> Option<usize> {
                label
                    .strip_prefix(prefix)
                    .and_then(|r| r.parse::<usize>().ok())
                    .filter(|r| (1..=6).contains(r))
            };
            if let Some(r) = parse_row("table1_row") {
                let (d, w, e) = TABLE1[r - 1];
                let (d, w) = (tuple_rect(d), tuple_rect(w));
                return Ok(mk(
                    format!("table 1 row {r}: actuator {}, omega {}", fmt_rect(&d), fmt_rect(&w)),
                    example1_problem(d, w),
                    Some(e),
                ));
            }
            if let Some(r) = parse_row("table2_row") {
                let (w, pt, e) = TABLE2[r - 1];
                let w = tuple_rect(w);
                return Ok(mk(
                    format!("table 2 row {r}: omega {}, point ({}, {})", fmt_rect(&w), pt.0, pt.1),
                    example2_problem(w, pt),
                    Some(e),
                ));
            }
            Err(Error::InvalidArgument(format!(
                "unknown preset '{label}'; known: {}",
                preset_labels().join(", ")
            )))
        }
    }
}

pub fn fmt_rect(r: &Rect) -> String {
    format!("[{}, {}]x[{}, {}]", r.x0, r.x1, r.y0, r.y1)
}

pub fn fmt_actuator(a: &Actuator) -> String {
    match a {
        Actuator::Zonal { region } => fmt_rect(region),
        Actuator::Pointwise { b1, b2 } => format!("({b1}, {b2})"),
    }
}
