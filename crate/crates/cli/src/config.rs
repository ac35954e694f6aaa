//! Run configuration: a TOML file naming a preset or describing a problem
//! inline, plus command-line overrides.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;

use frachum_core::models::{preset, ProblemSpec};
use frachum_core::spectral::ErrorNorm;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub preset: Option<String>,
    pub problem: Option<ProblemSpec>,
    pub output_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    L2,
    H1,
}

/// Flags shared by `run`, `sweep` and `check`.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Basis order J
    #[arg(long = "order", short = 'J')]
    pub order: Option<usize>,
    /// Time intervals M of the nonlinear solve
    #[arg(long)]
    pub intervals: Option<usize>,
    #[arg(long)]
    pub quad_order: Option<usize>,
    /// Pseudo-spectral grid size
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub control_nodes: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Ridge added to the controllability operator
    #[arg(long)]
    pub reg: Option<f64>,
    /// Relative singular-value cutoff of the least-squares solve
    #[arg(long)]
    pub rank_tol: Option<f64>,
    #[arg(long, value_enum)]
    pub norm: Option<NormArg>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Accept 1/2 < alpha <= 2/3
    #[arg(long)]
    pub relaxed: bool,
}

impl Overrides {
    pub fn apply(&self, p: &mut ProblemSpec) {
        let d = &mut p.disc;
        if let Some(j) = self.order {
            d.order = j;
            // keep the grids admissible unless they were set explicitly
            d.grid_points = d.grid_points.max(2 * (j + 1));
            d.projection_points = d.projection_points.max(2 * (j + 1));
        }
        if let Some(v) = self.intervals {
            d.intervals = v;
        }
        if let Some(v) = self.quad_order {
            d.quad_order = v;
        }
        if let Some(v) = self.grid_points {
            d.grid_points = v;
        }
        if let Some(v) = self.control_nodes {
            d.control_nodes = v;
        }
        let s = &mut p.solver;
        if let Some(v) = self.eps {
            s.eps = v;
        }
        if let Some(v) = self.max_iters {
            s.max_iters = v;
        }
        if let Some(v) = self.reg {
            s.reg = v;
        }
        if let Some(v) = self.rank_tol {
            s.rank_tol = v;
        }
        if let Some(n) = self.norm {
            s.norm = match n {
                NormArg::L2 => ErrorNorm::L2,
                NormArg::H1 => ErrorNorm::H1Weighted,
            };
        }
        if let Some(a) = self.alpha {
            p.alpha = a;
        }
        if self.relaxed {
            p.strict = false;
        }
    }
}

/// Where the problem comes from before overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct Source {
    /// TOML configuration file
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    /// Built-in preset label (see `frachum check --list`)
    #[arg(long, short = 'p')]
    pub preset: Option<String>,
}

pub struct Resolved {
    pub label: String,
    pub spec: ProblemSpec,
    pub output_dir: Option<PathBuf>,
}

impl Source {
    pub fn resolve(&self, ov: &Overrides) -> Result<Resolved, String> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let label = self.preset.clone().or(file.preset.clone());
        let (label, mut spec) = match (label, file.problem) {
            (Some(_), Some(_)) if self.preset.is_none() => {
                return Err("config sets both `preset` and `[problem]`; pick one".into())
            }
            (Some(l), _) => {
                let p = preset(&l).map_err(|e| e.to_string())?;
                (l, p.problem)
            }
            (None, Some(p)) => ("custom".to_string(), p),
            (None, None) => {
                return Err("give --preset, or --config with `preset` or `[problem]`".into())
            }
        };
        ov.apply(&mut spec);
        Ok(Resolved {
            label,
            spec,
            output_dir: file.output_dir,
        })
    }
}
