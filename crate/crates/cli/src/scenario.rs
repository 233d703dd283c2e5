//! Scenario documents: schema validation, typed parsing and the semantic
//! checks the schema cannot express.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use decoherence_core::oracle::GridScheme;
use decoherence_core::spectral::{CouplingModel, FormFactor};
use decoherence_core::superselection::WeylCombination;
use decoherence_core::{EnvironmentState, MomentumInterval, TimeGrid, WeylLabel};
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::Value;

use crate::report::{CliError, CliResult};

pub const SCHEMA: &str = include_str!("../../../docs/scenario.schema.json");
pub const SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_POSITION_MODES: usize = 2000;
pub const DEFAULT_ORACLE_MODES: usize = 512;
pub const DEFAULT_ORACLE_TOLERANCE: f64 = 1e-4;
/// Discretized fields recur after a time set by the grid spacing, so the
/// oracle is only compared on an initial window.
pub const DEFAULT_ORACLE_T_MAX: f64 = 20.0;
pub const DEFAULT_DENSITY_SAMPLES: usize = 200;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelSection,
    pub form_factor: FormFactorSection,
    #[serde(default)]
    pub environment: Option<EnvironmentSection>,
    pub labels: Vec<LabelSpec>,
    #[serde(default)]
    pub superselection: Option<SuperselectionSection>,
    pub time_grid: TimeGrid,
    #[serde(default)]
    pub oracle: Option<OracleSection>,
    #[serde(default)]
    pub spectral_density: Option<DensitySection>,
    #[serde(default)]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Velocity,
    Position,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub omega0: Option<f64>,
    pub modes: Option<usize>,
    pub grid_scheme: Option<GridScheme>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormFactorSection {
    pub sigma: Option<f64>,
    pub lambda: Option<f64>,
    pub amplitude: Option<f64>,
    pub coupling_norm: Option<f64>,
    /// Two-column `ω,J` CSV, relative to the scenario file.
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentKind {
    Vacuum,
    Thermal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub kind: EnvironmentKind,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSpec {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub a: f64,
    pub b: f64,
    #[serde(default = "one")]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperselectionSection {
    /// Defaults to the scenario labels with unit coefficients.
    pub terms: Option<Vec<TermSpec>>,
    pub i1: [f64; 2],
    pub i2: [f64; 2],
    pub fit_window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub enabled: bool,
    pub modes: Option<usize>,
    pub scheme: Option<GridScheme>,
    pub tolerance: Option<f64>,
    pub t_max: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySection {
    pub samples: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// Scenario resolved into core types.
#[derive(Debug, Clone)]
pub struct Plan {
    pub name: Option<String>,
    pub kind: ModelKind,
    pub coupling: CouplingModel,
    pub modes: usize,
    pub grid_scheme: GridScheme,
    pub form_factor: FormFactor,
    pub environment: EnvironmentState,
    pub labels: Vec<WeylLabel>,
    pub superselection: Option<SuperselectionPlan>,
    pub times: Vec<f64>,
    pub oracle: Option<OraclePlan>,
    pub density_samples: usize,
    /// Output directory from the scenario, resolved against its location.
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct SuperselectionPlan {
    pub combination: WeylCombination,
    pub i1: MomentumInterval,
    pub i2: MomentumInterval,
    pub fit_window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy)]
pub struct OraclePlan {
    pub modes: usize,
    pub scheme: GridScheme,
    pub tolerance: f64,
    pub t_max: f64,
}

fn validator() -> &'static jsonschema::Validator {
    static VALIDATOR: OnceLock<jsonschema::Validator> = OnceLock::new();
    VALIDATOR.get_or_init(|| {
        let schema: Value = serde_json::from_str(SCHEMA).expect("bundled schema is valid JSON");
        jsonschema::validator_for(&schema).expect("bundled schema compiles")
    })
}

/// Schema violations, first error first, with the offending location.
pub fn schema_check(doc: &Value) -> CliResult<()> {
    let mut errors = validator().iter_errors(doc);
    match errors.next() {
        None => Ok(()),
        Some(e) => {
            let path = e.instance_path().to_string();
            let field = if path.is_empty() { "/".to_string() } else { path };
            Err(CliError::config(field, e.to_string()))
        }
    }
}

/// Reads, validates and resolves a scenario file. Performs no heavy
/// computation beyond reading a tabulated form factor.
pub fn load(path: &Path) -> CliResult<Plan> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("/", format!("cannot read {}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| CliError::config("/", format!("not valid JSON: {e}")))?;
    schema_check(&doc)?;
    let scenario: Scenario = serde_json::from_value(doc).map_err(|e| CliError::config("/", e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    scenario.resolve(base)
}

impl Scenario {
    pub fn resolve(self, base: &Path) -> CliResult<Plan> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(
                "/schema_version",
                format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        let (coupling, modes, grid_scheme) = self.model.resolve()?;
        let form_factor = self.form_factor.resolve(base)?;
        let environment = match &self.environment {
            None => EnvironmentState::Vacuum,
            Some(env) => env.resolve()?,
        };
        if self.labels.is_empty() {
            return Err(CliError::config("/labels", "at least one label is required"));
        }
        let labels: Vec<WeylLabel> = self.labels.iter().map(|l| WeylLabel::new(l.a, l.b)).collect();
        if labels.iter().any(|l| !(l.a.is_finite() && l.b.is_finite())) {
            return Err(CliError::config("/labels", "labels must be finite"));
        }
        self.time_grid.validate().map_err(|e| CliError::in_field("/time_grid", e))?;
        if self.time_grid.t_max > decoherence_core::spectral::MAX_TIME {
            return Err(CliError::config(
                "/time_grid/t_max",
                format!("t_max exceeds the supported range {:e}", decoherence_core::spectral::MAX_TIME),
            ));
        }
        let times = self.time_grid.points().map_err(|e| CliError::in_field("/time_grid", e))?;
        let superselection = match &self.superselection {
            None => None,
            Some(s) => Some(s.resolve(&labels)?),
        };
        let oracle = match &self.oracle {
            Some(o) if o.enabled => Some(o.resolve()?),
            _ => None,
        };
        let density_samples = match (&self.spectral_density, self.model.kind) {
            (Some(_), ModelKind::Velocity) => {
                return Err(CliError::config(
                    "/spectral_density",
                    "the spectral density is defined for the position model only",
                ))
            }
            (Some(d), ModelKind::Position) => d.samples,
            (None, _) => DEFAULT_DENSITY_SAMPLES,
        };
        if density_samples < 2 {
            return Err(CliError::config("/spectral_density/samples", "need at least 2 samples"));
        }
        let output_dir = self.output.and_then(|o| o.dir).map(|d| base.join(d));
        Ok(Plan {
            name: self.name,
            kind: self.model.kind,
            coupling,
            modes,
            grid_scheme,
            form_factor,
            environment,
            labels,
            superselection,
            times,
            oracle,
            density_samples,
            output_dir,
        })
    }
}

impl ModelSection {
    fn resolve(&self) -> CliResult<(CouplingModel, usize, GridScheme)> {
        match self.kind {
            ModelKind::Velocity => {
                for (set, field) in [
                    (self.omega0.is_some(), "/model/omega0"),
                    (self.modes.is_some(), "/model/modes"),
                    (self.grid_scheme.is_some(), "/model/grid_scheme"),
                ] {
                    if set {
                        return Err(CliError::config(field, "only valid for the position model"));
                    }
                }
                Ok((CouplingModel::Velocity, 0, GridScheme::Midpoint))
            }
            ModelKind::Position => {
                let omega0 =
                    self.omega0.ok_or_else(|| CliError::config("/model/omega0", "the position model needs omega0"))?;
                if !(omega0.is_finite() && omega0 > 0.0) {
                    return Err(CliError::config("/model/omega0", format!("omega0 = {omega0} must be positive")));
                }
                let modes = self.modes.unwrap_or(DEFAULT_POSITION_MODES);
                if modes < 2 {
                    return Err(CliError::config("/model/modes", "need at least 2 modes"));
                }
                Ok((CouplingModel::Position { omega0 }, modes, self.grid_scheme.unwrap_or(GridScheme::Geometric)))
            }
        }
    }
}

impl FormFactorSection {
    fn resolve(&self, base: &Path) -> CliResult<FormFactor> {
        let field = "/form_factor";
        if self.amplitude.is_some() && self.coupling_norm.is_some() {
            return Err(CliError::config(field, "give either amplitude or coupling_norm, not both"));
        }
        if let Some(table) = &self.table {
            for (set, name) in [(self.sigma.is_some(), "sigma"), (self.lambda.is_some(), "lambda")] {
                if set {
                    return Err(CliError::config(
                        format!("{field}/{name}"),
                        "not allowed with a tabulated form factor",
                    ));
                }
            }
            let path = base.join(table);
            let file = std::fs::File::open(&path).map_err(|e| {
                CliError::config(format!("{field}/table"), format!("cannot read {}: {e}", path.display()))
            })?;
            let j = FormFactor::from_csv(file).map_err(|e| CliError::in_field("/form_factor/table", e))?;
            return match (self.amplitude, self.coupling_norm) {
                (Some(c), _) => j.with_amplitude(c).map_err(|e| CliError::in_field("/form_factor/amplitude", e)),
                (_, Some(norm)) => {
                    let current = decoherence_core::spectral::weighted_norm_sq(&j, -2)
                        .map_err(|e| CliError::in_field("/form_factor/table", e))?
                        .value;
                    if !(current > 0.0) {
                        return Err(CliError::config("/form_factor/table", "table has zero coupling norm"));
                    }
                    j.with_amplitude((norm / current).sqrt())
                        .map_err(|e| CliError::in_field("/form_factor/coupling_norm", e))
                }
                (None, None) => Ok(j),
            };
        }
        let sigma = self.sigma.ok_or_else(|| CliError::config(format!("{field}/sigma"), "sigma is required"))?;
        let lambda = self.lambda.ok_or_else(|| CliError::config(format!("{field}/lambda"), "lambda is required"))?;
        match (self.amplitude, self.coupling_norm) {
            (Some(c), None) => FormFactor::power_exp(sigma, lambda, c).map_err(|e| CliError::in_field(field, e)),
            (None, Some(norm)) => {
                FormFactor::with_coupling_norm(sigma, lambda, norm).map_err(|e| CliError::in_field(field, e))
            }
            _ => Err(CliError::config(format!("{field}/amplitude"), "amplitude or coupling_norm is required")),
        }
    }
}

impl EnvironmentSection {
    fn resolve(&self) -> CliResult<EnvironmentState> {
        match (self.kind, self.beta) {
            (EnvironmentKind::Vacuum, None) => Ok(EnvironmentState::Vacuum),
            (EnvironmentKind::Vacuum, Some(_)) => {
                Err(CliError::config("/environment/beta", "beta is only valid for a thermal environment"))
            }
            (EnvironmentKind::Thermal, Some(beta)) => {
                EnvironmentState::thermal(beta).map_err(|e| CliError::in_field("/environment/beta", e))
            }
            (EnvironmentKind::Thermal, None) => {
                Err(CliError::config("/environment/beta", "a thermal environment needs beta"))
            }
        }
    }
}

fn interval(field: &str, [lo, hi]: [f64; 2]) -> CliResult<MomentumInterval> {
    MomentumInterval::new(lo, hi).map_err(|e| CliError::in_field(field, e))
}

impl SuperselectionSection {
    fn resolve(&self, labels: &[WeylLabel]) -> CliResult<SuperselectionPlan> {
        let terms: Vec<(Complex64, WeylLabel)> = match &self.terms {
            Some(terms) => terms.iter().map(|t| (Complex64::new(t.re, t.im), WeylLabel::new(t.a, t.b))).collect(),
            None => labels.iter().map(|l| (Complex64::new(1.0, 0.0), *l)).collect(),
        };
        let combination = WeylCombination::new(terms).map_err(|e| CliError::in_field("/superselection/terms", e))?;
        let i1 = interval("/superselection/i1", self.i1)?;
        let i2 = interval("/superselection/i2", self.i2)?;
        if i1.distance(&i2) <= 0.0 {
            return Err(CliError::config("/superselection", "intervals i1 and i2 must be disjoint and apart"));
        }
        let fit_window = match self.fit_window {
            None => None,
            Some([t0, t1]) if t0 > 0.0 && t1 > t0 => Some((t0, t1)),
            Some(_) => return Err(CliError::config("/superselection/fit_window", "need 0 < t_from < t_to")),
        };
        Ok(SuperselectionPlan { combination, i1, i2, fit_window })
    }
}

impl OracleSection {
    fn resolve(&self) -> CliResult<OraclePlan> {
        let modes = self.modes.unwrap_or(DEFAULT_ORACLE_MODES);
        if modes < 2 {
            return Err(CliError::config("/oracle/modes", "need at least 2 modes"));
        }
        let tolerance = self.tolerance.unwrap_or(DEFAULT_ORACLE_TOLERANCE);
        if !(tolerance > 0.0) {
            return Err(CliError::config("/oracle/tolerance", "tolerance must be positive"));
        }
        let t_max = self.t_max.unwrap_or(DEFAULT_ORACLE_T_MAX);
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(CliError::config("/oracle/t_max", "t_max must be positive"));
        }
        Ok(OraclePlan { modes, scheme: self.scheme.unwrap_or(GridScheme::Midpoint), tolerance, t_max })
    }
}
