//! JSON run configuration.
//!
//! One document per run: the analysis name, an optional seed and output
//! prefix, a `problem` section for the reliability analyses, and exactly one
//! section named after the analysis. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use relkit_core::bayes::PriorSpec;
use relkit_core::field::{CorrelationLengths, FieldMethod, GridSpec};
use relkit_core::form::{FormOptions, StartPoint};
use relkit_core::limit_state::{DifferenceScheme, GradientSettings, LimitStateExpr};
use relkit_core::prob::{CorrelationMatrix, Marginal};
use relkit_core::subset::{Kernel, SubsetConfig};
use relkit_core::ReliabilityProblem;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analysis {
    Form,
    Subset,
    Mcs,
    Field,
    Gibbs,
}

impl Analysis {
    pub fn name(self) -> &'static str {
        match self {
            Analysis::Form => "form",
            Analysis::Subset => "subset",
            Analysis::Mcs => "mcs",
            Analysis::Field => "field",
            Analysis::Gibbs => "gibbs",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub analysis: Analysis,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub problem: Option<ProblemSection>,
    pub form: Option<FormSection>,
    pub subset: Option<SubsetSection>,
    pub mcs: Option<McsSection>,
    pub field: Option<FieldSection>,
    pub gibbs: Option<GibbsSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub variables: Vec<VariableSpec>,
    /// Defaults to the identity.
    pub correlation: Option<Vec<Vec<f64>>>,
    pub limit_state: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    #[default]
    Normal,
    Lognormal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub name: Option<String>,
    #[serde(default)]
    pub distribution: Distribution,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Forward,
    Central,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FormSection {
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub gradient_step: Option<f64>,
    #[serde(default)]
    pub gradient_scheme: Scheme,
    pub start: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    #[default]
    JointWalk,
    Mmh,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SubsetSection {
    pub n_samples: Option<usize>,
    pub p0: Option<f64>,
    pub max_levels: Option<usize>,
    pub proposal_std: Option<f64>,
    #[serde(default)]
    pub kernel: KernelName,
    /// Independent repetitions with seeds `seed, seed + 1, …`.
    pub runs: Option<usize>,
    #[serde(default)]
    pub record_levels: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McsSection {
    pub n_samples: u64,
    pub block_size: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    pub domain_x: f64,
    pub domain_y: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthsSection {
    pub lx: f64,
    pub ly: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    #[default]
    Cholesky,
    Spectral,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub grid: GridSection,
    pub lengths: LengthsSection,
    #[serde(default)]
    pub method: MethodName,
    pub standardize: Option<bool>,
    pub realizations: Option<usize>,
    pub max_lag: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub mu0: Option<Vec<f64>>,
    pub sigma0: Option<Vec<Vec<f64>>>,
    pub nu0: Option<f64>,
    pub psi0: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsSection {
    /// CSV with a header row; relative paths resolve against the config file.
    pub data: PathBuf,
    pub num_iterations: usize,
    pub burn_in: usize,
    pub level: Option<f64>,
    #[serde(default)]
    pub prior: PriorSection,
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ProblemConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Config(format!("file not found: {}", path.display())),
        _ => CliError::Config(format!("cannot read {}: {e}", path.display())),
    })?;
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    parse_config(&text, &base)
}

/// Parses a configuration document; relative paths resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<ProblemConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: ProblemConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = pointer(&e.path().to_string());
        CliError::Config(format!("{path}: {}", e.inner()))
    })?;
    cfg.resolve_paths(base);
    cfg.validate()?;
    Ok(cfg)
}

/// `a.b[2].c` -> `/a/b/2/c`
fn pointer(path: &str) -> String {
    if path == "." {
        return "/".into();
    }
    let mut out = String::new();
    for part in path.split('.') {
        for seg in part.split('[') {
            let seg = seg.trim_end_matches(']');
            if !seg.is_empty() {
                out.push('/');
                out.push_str(seg);
            }
        }
    }
    out
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

impl ProblemConfig {
    fn resolve_paths(&mut self, base: &Path) {
        if let Some(g) = &mut self.gibbs {
            if g.data.is_relative() {
                g.data = base.join(&g.data);
            }
        }
        if let Some(o) = &mut self.output {
            if o.is_relative() {
                *o = base.join(&*o);
            }
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let present: Vec<&str> = [
            ("form", self.form.is_some()),
            ("subset", self.subset.is_some()),
            ("mcs", self.mcs.is_some()),
            ("field", self.field.is_some()),
            ("gibbs", self.gibbs.is_some()),
        ]
        .iter()
        .filter(|(_, p)| *p)
        .map(|(n, _)| *n)
        .collect();
        let name = self.analysis.name();
        if present != [name] {
            return Err(invalid(
                "/",
                format!("expected exactly one analysis section `{name}`, found [{}]", present.join(", ")),
            ));
        }
        let needs_problem = matches!(self.analysis, Analysis::Form | Analysis::Subset | Analysis::Mcs);
        match (&self.problem, needs_problem) {
            (None, true) => return Err(invalid("/problem", "missing section")),
            (Some(_), false) => return Err(invalid("/problem", format!("not used by `{name}`"))),
            _ => {}
        }
        if let Some(p) = &self.problem {
            validate_problem(p)?;
        }
        if let Some(f) = &self.form {
            self.form_options(f)?;
        }
        if let Some(s) = &self.subset {
            self.subset_config(s)?;
        }
        if let Some(m) = &self.mcs {
            if m.n_samples == 0 {
                return Err(invalid("/mcs/n_samples", "must be at least 1"));
            }
            if m.block_size == Some(0) {
                return Err(invalid("/mcs/block_size", "must be at least 1"));
            }
        }
        if let Some(f) = &self.field {
            field_inputs(f)?;
        }
        if let Some(g) = &self.gibbs {
            if g.num_iterations <= g.burn_in {
                return Err(invalid("/gibbs/burn_in", "must be smaller than num_iterations"));
            }
            if let Some(l) = g.level {
                if !(l > 0.0 && l < 1.0) {
                    return Err(invalid("/gibbs/level", format!("must be in (0, 1), got {l}")));
                }
            }
            if !g.data.is_file() {
                return Err(invalid("/gibbs/data", format!("file not found: {}", g.data.display())));
            }
        }
        Ok(())
    }

    /// The reliability problem; only valid for form, subset and mcs configs.
    pub fn reliability_problem(&self) -> Result<ReliabilityProblem, CliError> {
        let p = self.problem.as_ref().ok_or_else(|| invalid("/problem", "missing section"))?;
        build_problem(p)
    }

    pub fn form_options(&self, f: &FormSection) -> Result<FormOptions, CliError> {
        let mut o = FormOptions::default();
        if let Some(v) = f.max_iter {
            if v == 0 {
                return Err(invalid("/form/max_iter", "must be at least 1"));
            }
            o.max_iter = v;
        }
        if let Some(v) = f.tol {
            if !(v > 0.0) {
                return Err(invalid("/form/tol", format!("must be > 0, got {v}")));
            }
            o.tol = v;
        }
        let scheme = match f.gradient_scheme {
            Scheme::Forward => DifferenceScheme::Forward,
            Scheme::Central => DifferenceScheme::Central,
        };
        let step = f.gradient_step.unwrap_or(GradientSettings::default().step());
        o.gradient = GradientSettings::new(step, scheme).map_err(|e| invalid("/form/gradient_step", e))?;
        if let Some(x0) = &f.start {
            let n = self.problem.as_ref().map_or(0, |p| p.variables.len());
            if x0.len() != n {
                return Err(invalid("/form/start", format!("expected {n} values, found {}", x0.len())));
            }
            o.start = StartPoint::Custom(x0.clone());
        }
        Ok(o)
    }

    pub fn subset_config(&self, s: &SubsetSection) -> Result<SubsetConfig, CliError> {
        let d = SubsetConfig::default();
        let cfg = SubsetConfig {
            n_samples: s.n_samples.unwrap_or(d.n_samples),
            p0: s.p0.unwrap_or(d.p0),
            max_levels: s.max_levels.unwrap_or(d.max_levels),
            proposal_std: s.proposal_std.unwrap_or(d.proposal_std),
            kernel: match s.kernel {
                KernelName::JointWalk => Kernel::ListingJointWalk,
                KernelName::Mmh => Kernel::ComponentwiseMmh,
            },
            seed: self.seed,
            record_levels: s.record_levels,
        };
        if !(cfg.p0 > 0.0 && cfg.p0 < 1.0) {
            return Err(invalid("/subset/p0", format!("must be in (0, 1), got {}", cfg.p0)));
        }
        if s.runs == Some(0) {
            return Err(invalid("/subset/runs", "must be at least 1"));
        }
        cfg.validate().map_err(|e| invalid("/subset", e))?;
        Ok(cfg)
    }
}

fn validate_problem(p: &ProblemSection) -> Result<(), CliError> {
    build_problem(p).map(|_| ())
}

fn build_problem(p: &ProblemSection) -> Result<ReliabilityProblem, CliError> {
    let n = p.variables.len();
    if n == 0 {
        return Err(invalid("/problem/variables", "at least one variable is required"));
    }
    let mut marginals = Vec::with_capacity(n);
    for (k, v) in p.variables.iter().enumerate() {
        let m = match v.distribution {
            Distribution::Normal => Marginal::normal(v.mean, v.sd),
            Distribution::Lognormal => Marginal::lognormal(v.mean, v.sd),
        };
        marginals.push(m.map_err(|e| invalid(&format!("/problem/variables/{k}"), e))?);
    }
    let corr = match &p.correlation {
        None => CorrelationMatrix::identity(n),
        Some(rows) => {
            if rows.len() != n {
                return Err(invalid("/problem/correlation", format!("expected {n} rows, found {}", rows.len())));
            }
            for (i, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return Err(invalid(
                        &format!("/problem/correlation/{i}"),
                        format!("expected {n} entries, found {}", row.len()),
                    ));
                }
                for (j, &r) in row.iter().enumerate() {
                    if !(-1.0..=1.0).contains(&r) {
                        return Err(invalid(
                            &format!("/problem/correlation/{i}/{j}"),
                            format!("|ρ| must be ≤ 1, got {r}"),
                        ));
                    }
                    if i == j && r != 1.0 {
                        return Err(invalid(
                            &format!("/problem/correlation/{i}/{j}"),
                            format!("diagonal must be 1, got {r}"),
                        ));
                    }
                }
            }
            CorrelationMatrix::from_rows(rows).map_err(|e| invalid("/problem/correlation", e))?
        }
    };
    let g = LimitStateExpr::parse(&p.limit_state, n)
        .map_err(|e| CliError::Expression(format!("/problem/limit_state: {e}")))?;
    ReliabilityProblem::new(marginals, corr, g).map_err(|e| invalid("/problem", e))
}

pub(crate) fn field_inputs(f: &FieldSection) -> Result<(GridSpec, CorrelationLengths, FieldMethod, usize), CliError> {
    let g = &f.grid;
    let grid = GridSpec::new(g.nx, g.ny, g.domain_x, g.domain_y).map_err(|e| invalid("/field/grid", e))?;
    let lengths = CorrelationLengths::new(f.lengths.lx, f.lengths.ly).map_err(|e| invalid("/field/lengths", e))?;
    let method = match f.method {
        MethodName::Cholesky => FieldMethod::Cholesky { standardize: f.standardize.unwrap_or(true) },
        MethodName::Spectral => {
            if f.standardize == Some(false) {
                return Err(invalid("/field/standardize", "the spectral method always standardizes"));
            }
            if !g.nx.is_power_of_two() || !g.ny.is_power_of_two() {
                return Err(invalid("/field/grid", "the spectral method needs power-of-two nx and ny"));
            }
            FieldMethod::Spectral
        }
    };
    let realizations = f.realizations.unwrap_or(1);
    if realizations == 0 {
        return Err(invalid("/field/realizations", "must be at least 1"));
    }
    Ok((grid, lengths, method, realizations))
}

pub(crate) fn prior_spec(p: &PriorSection, n: usize) -> Result<PriorSpec, CliError> {
    let mut prior = PriorSpec::default_for(n);
    let square = |rows: &Vec<Vec<f64>>, key: &str| -> Result<DMatrix<f64>, CliError> {
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(invalid(&format!("/gibbs/prior/{key}"), format!("expected a {n}x{n} matrix")));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    };
    if let Some(m) = &p.mu0 {
        if m.len() != n {
            return Err(invalid("/gibbs/prior/mu0", format!("expected {n} values, found {}", m.len())));
        }
        prior.mu0 = DVector::from_column_slice(m);
    }
    if let Some(s) = &p.sigma0 {
        prior.sigma0 = square(s, "sigma0")?;
    }
    if let Some(s) = &p.psi0 {
        prior.psi0 = square(s, "psi0")?;
    }
    if let Some(v) = p.nu0 {
        prior.nu0 = v;
    }
    prior.validate(n).map_err(|e| invalid("/gibbs/prior", e))?;
    Ok(prior)
}
