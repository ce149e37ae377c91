//! Run configuration: TOML file plus command-line overrides.
//!
//! ```toml
//! [problem]
//! alpha = 1.5
//! xi = 0.25
//! grid_n = 256
//!
//! [operator]
//! file = "a.csv"          # or: inline = "3,3\n...", or: builtin = "section4", k = 1
//!
//! [rhs]
//! builtin = "zero"        # or: section4, or the affine form below
//! c_file = "c.csv"        # C and D of f = C u + D v + g(t); zero when absent
//! d_inline = "3,3\n..."
//! profile = "sqrt_t"      # g(t) = amplitude * profile(t)
//! amplitude = [1.0, 0.0, 0.0]
//!
//! [growth]                # optional; constants with exact L1 norms
//! a1 = 0.1
//! b1 = 0.1
//!
//! [solver]
//! damping = 0.5
//!
//! [probes]
//! samples = 100
//! ```
//!
//! A config may instead name a builtin problem with `[problem] builtin = "section4"`
//! and `k`, in which case `alpha`, `xi`, `[operator]` and `[rhs]` must be absent.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use fbvp::fracops::Order;
use fbvp::hypotheses::{GrowthFn, GrowthSpec, ProbeOptions};
use fbvp::linops::{parse_matrix_csv, LinOp};
use fbvp::registry::{ExampleId, Section4Rhs};
use fbvp::resonance::{smallest_valid_grid, xi_node, ProblemSpec};
use fbvp::rhs::{AffineRhs, Profile, RightHandSide, ZeroRhs};
use fbvp::solver::{InitialGuess, SolveOptions};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use thiserror::Error;

/// Smallest accepted grid.
pub const MIN_GRID: usize = 8;
pub const DEFAULT_GRID: usize = 256;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl From<fbvp::Error> for ConfigError {
    fn from(e: fbvp::Error) -> Self {
        Self::Invalid(e.to_string())
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub problem: ProblemSection,
    pub operator: Option<OperatorSection>,
    pub rhs: Option<RhsSection>,
    pub growth: Option<GrowthSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub probes: ProbeSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub alpha: Option<f64>,
    pub xi: Option<f64>,
    pub grid_n: Option<usize>,
    pub builtin: Option<String>,
    pub k: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    pub file: Option<PathBuf>,
    pub inline: Option<String>,
    pub builtin: Option<String>,
    pub k: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhsSection {
    pub builtin: Option<String>,
    pub c_file: Option<PathBuf>,
    pub c_inline: Option<String>,
    pub d_file: Option<PathBuf>,
    pub d_inline: Option<String>,
    pub profile: Option<String>,
    pub amplitude: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthSection {
    #[serde(default)]
    pub a1: f64,
    #[serde(default)]
    pub b1: f64,
    #[serde(default)]
    pub a2: f64,
    #[serde(default)]
    pub b2: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub gamma1: f64,
    #[serde(default)]
    pub gamma2: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub damping: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol_fixed_point: Option<f64>,
    pub tol_residual: Option<f64>,
    pub tol_pde: Option<f64>,
    /// `zero` or `random_kernel`.
    pub init: Option<String>,
    pub init_scale: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub samples: Option<usize>,
    pub h1_samples: Option<usize>,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub norm_max: Option<f64>,
}

/// Command-line values that override the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub builtin: Option<String>,
    pub k: Option<usize>,
    pub grid: Option<usize>,
    pub damping: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
}

/// Where the problem came from, for the report.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    Builtin(ExampleId),
    File(PathBuf),
}

/// Everything a run needs.
pub struct RunConfig {
    pub source: ProblemSource,
    pub spec: ProblemSpec,
    pub growth: Option<GrowthSpec>,
    pub solver: SolveOptions,
    pub probes: ProbeOptions,
    pub seed: u64,
}

impl std::fmt::Debug for RunConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RunConfig")
            .field("source", &self.source)
            .field("spec", &self.spec)
            .field("growth", &self.growth.is_some())
            .field("solver", &self.solver)
            .field("probes", &self.probes)
            .finish()
    }
}

pub fn parse_file(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_str(&text, path)
}

pub fn parse_str(text: &str, path: &Path) -> Result<FileConfig> {
    toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Combines an optional config file with overrides into a [`RunConfig`].
pub fn resolve(file: Option<(&FileConfig, &Path)>, ov: &Overrides) -> Result<RunConfig> {
    let empty = FileConfig::default();
    let (cfg, base) = match file {
        Some((c, p)) => (c, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (&empty, PathBuf::new()),
    };
    let seed = ov.seed.or(cfg.solver.seed).unwrap_or(0);
    let grid_n = ov.grid.or(cfg.problem.grid_n).unwrap_or(DEFAULT_GRID);
    if grid_n < MIN_GRID {
        return Err(ConfigError::Invalid(format!(
            "grid N must be at least {MIN_GRID}, got {grid_n}"
        )));
    }

    let builtin = ov.builtin.clone().or_else(|| cfg.problem.builtin.clone());
    let (source, spec, default_growth) = match builtin {
        Some(name) => {
            if ov.builtin.is_none()
                && (cfg.problem.alpha.is_some() || cfg.problem.xi.is_some() || cfg.operator.is_some() || cfg.rhs.is_some())
            {
                return Err(ConfigError::Invalid(
                    "a builtin problem fixes alpha, xi, [operator] and [rhs]; remove them".into(),
                ));
            }
            let k = ov.k.or(cfg.problem.k).unwrap_or(1);
            let id = ExampleId::parse(&name, k)?;
            check_grid(id.build(MIN_GRID.max(4))?.xi, grid_n)?;
            (ProblemSource::Builtin(id), id.build(grid_n)?, id.growth())
        }
        None => {
            if file.is_none() {
                return Err(ConfigError::Invalid(
                    "no problem given: use --config PATH or --builtin NAME".into(),
                ));
            }
            let spec = custom_spec(cfg, &base, grid_n)?;
            let path = file.map(|(_, p)| p.to_path_buf()).unwrap_or_default();
            (ProblemSource::File(path), spec, None)
        }
    };

    let growth = match &cfg.growth {
        Some(g) => Some(growth_spec(g)?),
        None => default_growth,
    };

    let s = &cfg.solver;
    let defaults = SolveOptions::default();
    let initial = match s.init.as_deref().unwrap_or("zero") {
        "zero" => InitialGuess::Zero,
        "random_kernel" => InitialGuess::RandomKernel {
            scale: s.init_scale.unwrap_or(1.0),
        },
        other => {
            return Err(ConfigError::Invalid(format!(
                "solver.init must be \"zero\" or \"random_kernel\", got {other:?}"
            )))
        }
    };
    let solver = SolveOptions {
        damping: ov.damping.or(s.damping).unwrap_or(defaults.damping),
        max_iter: ov.max_iter.or(s.max_iter).unwrap_or(defaults.max_iter),
        tol_fixed_point: s.tol_fixed_point.unwrap_or(defaults.tol_fixed_point),
        tol_residual: s.tol_residual.unwrap_or(defaults.tol_residual),
        tol_pde: s.tol_pde.unwrap_or(defaults.tol_pde),
        initial,
        seed,
    };
    solver.validate()?;

    let p = &cfg.probes;
    let pd = ProbeOptions::default();
    let probes = ProbeOptions {
        h1_samples: p.h1_samples.unwrap_or(pd.h1_samples),
        samples: p.samples.unwrap_or(pd.samples),
        a1: p.a1.unwrap_or(pd.a1),
        a2: p.a2.unwrap_or(pd.a2),
        norm_max: p.norm_max,
        seed,
    };

    Ok(RunConfig {
        source,
        spec,
        growth,
        solver,
        probes,
        seed,
    })
}

fn check_grid(xi: f64, grid_n: usize) -> Result<()> {
    if xi_node(xi, grid_n).is_none() {
        let hint = match smallest_valid_grid(xi, MIN_GRID, 1 << 20) {
            Some(n) => format!("the smallest valid N is {n}"),
            None => "no N up to 2^20 puts xi on a node".to_string(),
        };
        return Err(ConfigError::Invalid(format!(
            "xi * N must be an integer (xi = {xi}, N = {grid_n}); {hint}"
        )));
    }
    Ok(())
}

fn read_matrix(base: &Path, file: &Option<PathBuf>, inline: &Option<String>, what: &str) -> Result<Option<LinOp>> {
    let text = match (file, inline) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid(format!("{what}: give a file or inline CSV, not both")))
        }
        (Some(f), None) => {
            let path = base.join(f);
            fs::read_to_string(&path).map_err(|source| ConfigError::Io { path, source })?
        }
        (None, Some(s)) => s.clone(),
        (None, None) => return Ok(None),
    };
    parse_matrix_csv(&text)
        .map(Some)
        .map_err(|e| ConfigError::Invalid(format!("{what}: {e}")))
}

fn custom_spec(cfg: &FileConfig, base: &Path, grid_n: usize) -> Result<ProblemSpec> {
    let alpha = cfg
        .problem
        .alpha
        .ok_or_else(|| ConfigError::Invalid("problem.alpha is required".into()))?;
    let ord = Order::new(alpha).map_err(|_| {
        ConfigError::Invalid(format!("problem.alpha must lie in (1, 2], got {alpha}"))
    })?;
    let xi = cfg
        .problem
        .xi
        .ok_or_else(|| ConfigError::Invalid("problem.xi is required".into()))?;
    if !(xi > 0.0 && xi < 1.0) {
        return Err(ConfigError::Invalid(format!("problem.xi must lie in (0, 1), got {xi}")));
    }
    check_grid(xi, grid_n)?;

    let op = cfg
        .operator
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid("[operator] section is required".into()))?;
    let a = match (&op.builtin, read_matrix(base, &op.file, &op.inline, "operator")?) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid("operator: give one of file, inline, builtin".into()))
        }
        (Some(name), None) => match ExampleId::parse(name, op.k.unwrap_or(1))? {
            ExampleId::Section4 { k } => fbvp::registry::section4_operator(k)?,
        },
        (None, Some(a)) => a,
        (None, None) => {
            return Err(ConfigError::Invalid("operator: one of file, inline, builtin is required".into()))
        }
    };
    if !a.is_square() {
        return Err(ConfigError::Invalid(format!(
            "operator must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    let rhs = rhs_from(cfg.rhs.as_ref(), base, n)?;
    Ok(ProblemSpec::new(ord, xi, a, rhs, grid_n)?)
}

fn rhs_from(section: Option<&RhsSection>, base: &Path, n: usize) -> Result<Arc<dyn RightHandSide>> {
    let Some(r) = section else {
        return Err(ConfigError::Invalid("[rhs] section is required".into()));
    };
    let affine_keys = r.c_file.is_some()
        || r.c_inline.is_some()
        || r.d_file.is_some()
        || r.d_inline.is_some()
        || r.profile.is_some()
        || r.amplitude.is_some();
    if let Some(name) = &r.builtin {
        if affine_keys {
            return Err(ConfigError::Invalid("rhs: builtin excludes the affine keys".into()));
        }
        return match name.as_str() {
            "zero" => Ok(Arc::new(ZeroRhs { dim: n })),
            "section4" => {
                if n % 3 != 0 || n == 0 {
                    return Err(ConfigError::Invalid(format!(
                        "rhs section4 needs a dimension divisible by 3, got {n}"
                    )));
                }
                Ok(Arc::new(Section4Rhs { k: n / 3 }))
            }
            other => Err(ConfigError::Invalid(format!(
                "unknown rhs builtin {other:?}; expected zero, section4 or the affine keys"
            ))),
        };
    }
    let square = |m: Option<LinOp>, what: &str| -> Result<DMatrix<f64>> {
        match m {
            None => Ok(DMatrix::zeros(n, n)),
            Some(m) if m.nrows() == n && m.ncols() == n => Ok(m.into_matrix()),
            Some(m) => Err(ConfigError::Invalid(format!(
                "rhs {what} must be {n}x{n}, got {}x{}",
                m.nrows(),
                m.ncols()
            ))),
        }
    };
    let c = square(read_matrix(base, &r.c_file, &r.c_inline, "rhs C")?, "C")?;
    let d = square(read_matrix(base, &r.d_file, &r.d_inline, "rhs D")?, "D")?;
    let profile = Profile::parse(r.profile.as_deref().unwrap_or("zero"))?;
    let amplitude = match &r.amplitude {
        None => DVector::zeros(n),
        Some(v) if v.len() == n => DVector::from_vec(v.clone()),
        Some(v) => {
            return Err(ConfigError::Invalid(format!(
                "rhs amplitude must have {n} entries, got {}",
                v.len()
            )))
        }
    };
    if amplitude.iter().any(|v| !v.is_finite()) {
        return Err(ConfigError::Invalid("rhs amplitude must be finite".into()));
    }
    Ok(Arc::new(AffineRhs::new(c, d, amplitude, profile)?))
}

fn growth_spec(g: &GrowthSection) -> Result<GrowthSpec> {
    for (name, v) in [("a1", g.a1), ("b1", g.b1), ("a2", g.a2), ("b2", g.b2), ("c", g.c)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(ConfigError::Invalid(format!(
                "growth.{name} must be finite and >= 0, got {v}"
            )));
        }
    }
    let spec = GrowthSpec {
        a1: GrowthFn::constant(g.a1),
        b1: GrowthFn::constant(g.b1),
        a2: GrowthFn::constant(g.a2),
        b2: GrowthFn::constant(g.b2),
        c: GrowthFn::constant(g.c),
        gamma1: g.gamma1,
        gamma2: g.gamma2,
    };
    spec.validate()?;
    Ok(spec)
}
