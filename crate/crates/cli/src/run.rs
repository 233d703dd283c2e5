//! Executes a resolved scenario. Everything is computed in memory first;
//! nothing touches the disk until the whole run has succeeded.

use decoherence_core::curve::fmt_f64;
use decoherence_core::oracle::{oracle_chi, oracle_position, ComparisonReport, ModeSystem};
use decoherence_core::spectral::{
    boundedness_check, ir_classify, weighted_norm_sq, Boundedness, CouplingModel, IrClass,
};
use decoherence_core::superselection::{superselection_sweep, DecayModel};
use decoherence_core::{DecoherenceCurve, FriedrichsOperator, Growth, VelocityModel};
use rayon::prelude::*;
use serde::Serialize;

use crate::report::{CliError, CliResult, ErrorKind};
use crate::scenario::{ModelKind, Plan};

/// Tolerance of the spectral sum rules (mass and first moment).
pub const SUM_RULE_TOLERANCE: f64 = 1e-6;

/// One named output file.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Classification summary shared by `check` and `run`.
#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub model: &'static str,
    pub coupling_norm: f64,
    pub norm_bound: f64,
    pub boundedness: Boundedness,
    pub ir_class: Option<IrClass>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub classification: Classification,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_sq: Option<f64>,
    pub environment: decoherence_core::EnvironmentState,
    pub samples: usize,
    pub artifacts: Vec<String>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub passed: bool,
}

#[derive(Debug)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub summary: Summary,
}

fn model_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Velocity => "velocity",
        ModelKind::Position => "position",
    }
}

/// Boundedness and infrared class; cheap, no time evolution.
pub fn classify(plan: &Plan, warnings: &mut Vec<String>) -> CliResult<Classification> {
    let norm = weighted_norm_sq(&plan.form_factor, -2).map_err(|e| CliError::in_field("/form_factor", e))?;
    if !norm.converged {
        warnings.push(format!("coupling norm quadrature not converged (error estimate {:e})", norm.abs_error_estimate));
    }
    let boundedness =
        boundedness_check(&plan.form_factor, plan.coupling).map_err(|e| CliError::in_field("/form_factor", e))?;
    let ir_class = match ir_classify(&plan.form_factor) {
        Ok(c) => Some(c),
        Err(e) => {
            warnings.push(format!("infrared class: {e}"));
            None
        }
    };
    Ok(Classification {
        model: model_name(plan.kind),
        coupling_norm: norm.value,
        norm_bound: plan.coupling.norm_bound(),
        boundedness,
        ir_class,
    })
}

fn json<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::new(ErrorKind::Io, e.to_string()))?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn core_bytes(f: impl FnOnce(&mut Vec<u8>) -> decoherence_core::Result<()>) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    f(&mut out)?;
    Ok(out)
}

/// The analytic model behind the curves.
enum Model {
    Velocity(VelocityModel),
    Position(Box<FriedrichsOperator>),
}

impl Model {
    fn build(plan: &Plan) -> CliResult<Self> {
        let j = plan.form_factor.clone();
        Ok(match plan.coupling {
            CouplingModel::Velocity => Model::Velocity(VelocityModel::new(j)?),
            CouplingModel::Position { omega0 } => {
                Model::Position(Box::new(FriedrichsOperator::with_modes(omega0, j, plan.modes, plan.grid_scheme)?))
            }
        })
    }

    fn curve(&self, plan: &Plan, label: decoherence_core::WeylLabel) -> CliResult<DecoherenceCurve> {
        Ok(match self {
            Model::Velocity(m) => m.curve(label, &plan.times, plan.environment)?,
            Model::Position(op) => op.curve(label, &plan.times, plan.environment)?,
        })
    }

    fn decay(&self) -> DecayModel<'_> {
        match self {
            Model::Velocity(m) => DecayModel::Velocity(m),
            Model::Position(op) => DecayModel::Position(op),
        }
    }
}

/// Runs the scenario and assembles every artifact plus the summary.
pub fn execute(plan: &Plan, strict: bool) -> CliResult<Outcome> {
    let mut warnings = Vec::new();
    let classification = classify(plan, &mut warnings)?;
    if classification.boundedness == Boundedness::Supercritical {
        return Err(CliError::new(
            ErrorKind::ModelUnbounded,
            format!(
                "Hamiltonian is unbounded from below (coupling norm {} > bound {})",
                classification.coupling_norm, classification.norm_bound
            ),
        ));
    }
    let model = Model::build(plan)?;
    let mut artifacts = Vec::new();
    let mut checks = Vec::new();

    let curves = plan.labels.par_iter().map(|&l| model.curve(plan, l)).collect::<CliResult<Vec<_>>>()?;
    for (k, curve) in curves.iter().enumerate() {
        artifacts.push(Artifact { name: format!("curve_{k}.csv"), bytes: core_bytes(|w| curve.write_csv(w))? });
        artifacts.push(Artifact { name: format!("curve_{k}.json"), bytes: json(curve)? });
        warnings.extend(curve.metadata.notes.iter().map(|n| format!("curve {k}: {n}")));
    }
    if let Model::Velocity(_) = model {
        let conserved = curves.iter().all(|c| c.b_t.iter().all(|&b| b == c.metadata.label.b));
        checks.push(Check {
            name: "momentum_conserved".into(),
            passed: conserved,
            detail: "b(t) equals b at every sample".into(),
        });
    }
    if let Some(growth) = curves.first().map(|c| c.metadata.envelope_growth) {
        if growth == Growth::Undetermined {
            warnings.push("time grid spans under three decades; envelope growth undetermined".into());
        }
    }

    if let Some(s) = &plan.superselection {
        let table = superselection_sweep(
            &s.combination,
            &s.i1,
            &s.i2,
            model.decay(),
            &plan.times,
            plan.environment,
            s.fit_window,
        )
        .map_err(|e| CliError::in_field("/superselection", e))?;
        if table.non_uniform {
            warnings.push("position coupling: the interval bound is indicative, decay is not uniform in a".into());
        }
        artifacts.push(Artifact { name: "superselection.csv".into(), bytes: core_bytes(|w| table.write_csv(w))? });
        artifacts.push(Artifact { name: "superselection.json".into(), bytes: json(&table)? });
    }

    if let Model::Position(op) = &model {
        let density = op.spectral_density(plan.density_samples)?;
        let mass_err = (density.total_mass - 1.0).abs();
        let lambda0 = op.omega0() * op.omega0();
        let moment_err = (density.first_moment - lambda0).abs();
        checks.push(Check {
            name: "spectral_sum_rules".into(),
            passed: mass_err <= SUM_RULE_TOLERANCE && moment_err <= SUM_RULE_TOLERANCE * lambda0.max(1.0),
            detail: format!("|mass - 1| = {mass_err:e}, |first moment - omega0^2| = {moment_err:e}"),
        });
        let mut csv = String::from("lambda,rho00\n");
        for (l, r) in density.lambdas.iter().zip(&density.rho00) {
            csv.push_str(&format!("{},{}\n", fmt_f64(*l), fmt_f64(*r)));
        }
        artifacts.push(Artifact { name: "spectral_density.csv".into(), bytes: csv.into_bytes() });
        artifacts.push(Artifact { name: "spectral_density.json".into(), bytes: json(&density)? });
    }

    if let Some(o) = &plan.oracle {
        let sys = ModeSystem::build(&plan.form_factor, plan.coupling, o.modes, o.scheme)?;
        let times: Vec<f64> = plan.times.iter().copied().filter(|&t| t <= o.t_max).collect();
        if times.len() < plan.times.len() {
            warnings.push(format!("oracle compared only for t <= {}", o.t_max));
        }
        let reports = plan
            .labels
            .par_iter()
            .flat_map_iter(|&label| {
                let sys = &sys;
                times
                    .iter()
                    .flat_map(move |&t| [oracle_position(sys, label, t), oracle_chi(sys, label, t, plan.environment)])
            })
            .collect::<decoherence_core::Result<Vec<ComparisonReport>>>()?;
        let worst = reports.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
        checks.push(Check {
            name: "oracle_agreement".into(),
            passed: worst <= o.tolerance,
            detail: format!("max |analytic - oracle| = {worst:e} at N = {} (tolerance {:e})", o.modes, o.tolerance),
        });
        #[derive(Serialize)]
        struct OracleFile<'a> {
            modes: usize,
            tolerance: f64,
            t_max: f64,
            max_abs_diff: f64,
            comparisons: &'a [ComparisonReport],
        }
        let file = OracleFile {
            modes: o.modes,
            tolerance: o.tolerance,
            t_max: o.t_max,
            max_abs_diff: worst,
            comparisons: &reports,
        };
        artifacts.push(Artifact { name: "oracle.json".into(), bytes: json(&file)? });
    }

    if strict && !warnings.is_empty() {
        checks.push(Check { name: "strict".into(), passed: false, detail: format!("{} warning(s)", warnings.len()) });
    }
    let alpha_sq = match &model {
        Model::Velocity(m) => Some(m.alpha_sq()),
        Model::Position(_) => None,
    };
    let mut names: Vec<String> = artifacts.iter().map(|a| a.name.clone()).collect();
    names.push(SUMMARY_FILE.into());
    let passed = checks.iter().all(|c| c.passed);
    let summary = Summary {
        schema_version: crate::scenario::SCHEMA_VERSION,
        name: plan.name.clone(),
        classification,
        alpha_sq,
        environment: plan.environment,
        samples: plan.times.len(),
        artifacts: names,
        checks,
        warnings,
        passed,
    };
    artifacts.push(Artifact { name: SUMMARY_FILE.into(), bytes: json(&summary)? });
    Ok(Outcome { artifacts, summary })
}

pub const SUMMARY_FILE: &str = "summary.json";
