//! Run configuration: a flat TOML file that pins the model, the prior, the
//! grid and the per-subcommand options. The metadata file written next to
//! solver output is the same format with every optional field resolved, so
//! it can be fed back in as a config and reproduce the run.

use serde::{Deserialize, Serialize};
use spikectrl_core::hjb::{CflReport, GridSpec, DEFAULT_CONTROL_POINTS};
use spikectrl_core::model::Model;
use spikectrl_core::prior::Prior;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `ou_exp`, `ou_sigmoid`, `const_unit` or `custom`.
    pub model: String,
    /// Cap applied to the intensity shape of `ou_exp`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intensity_cap: Option<f64>,
    /// Piecewise-linear `(y, g)` table, required for `model = "custom"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_table: Option<Vec<[f64; 2]>>,

    /// Prior as `(lambda, weight)` atoms...
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<[f64; 2]>>,
    /// ...or as a named density with support and node count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature_nodes: Option<usize>,

    pub kappa: f64,
    pub horizon: f64,
    pub seed: u64,
    pub grid: GridConfig,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluate: Option<EvaluateConfig>,

    /// Written by `solve` into the run metadata; ignored as input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nt: usize,
    #[serde(default = "default_y_min")]
    pub y_min: f64,
    #[serde(default = "default_y_max")]
    pub y_max: f64,
    pub ny: usize,
    /// Defaults to `horizon * g_max` so the dynamics cannot leave the grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_max: Option<f64>,
    pub nz: usize,
    /// Defaults to the smallest count whose prior-predictive tail under the
    /// dominating rate stays below 1e-6.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u32>,
    #[serde(default = "default_gamma_max")]
    pub gamma_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control_points: Option<usize>,
}

fn default_y_min() -> f64 {
    -1.0
}

fn default_y_max() -> f64 {
    3.0
}

fn default_gamma_max() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_paths")]
    pub paths: usize,
    /// Fixed true rate; omit to draw it from the prior per path.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_true: Option<f64>,
    pub dt_record: f64,
    #[serde(default = "default_policy")]
    pub policy: String,
    #[serde(default)]
    pub y0: f64,
}

fn default_paths() -> usize {
    1
}

fn default_policy() -> String {
    "pde".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    pub paths: usize,
    /// Evaluation points as `[t, y, z, n]` rows.
    pub points: Vec<[f64; 4]>,
    #[serde(default = "default_scheme_tolerance")]
    pub scheme_tolerance: f64,
}

fn default_scheme_tolerance() -> f64 {
    0.02
}

/// Solver diagnostics recorded into the metadata file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    pub cfl_number: f64,
    pub dt: f64,
    pub dt_max: f64,
    pub value_at_origin: f64,
    pub lambda_max: f64,
    pub g_max: f64,
}

/// Fully resolved ingredients of a run.
pub struct Resolved {
    pub model: Model,
    pub prior: Prior,
    pub spec: GridSpec,
    pub cfl: CflReport,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("bad config: {e}")))
    }

    pub fn build_model(&self) -> Result<Model, CliError> {
        let model = match self.model.as_str() {
            "ou_exp" => match self.intensity_cap {
                Some(cap) if cap > 0.0 => Model::ou_exp(cap),
                Some(cap) => {
                    return Err(CliError::Validation(format!(
                        "intensity_cap must be > 0, got {cap}"
                    )))
                }
                None => Model::builtin("ou_exp")?,
            },
            "custom" => {
                let table = self.g_table.clone().ok_or_else(|| {
                    CliError::Validation("model = \"custom\" needs a g_table".into())
                })?;
                Model::custom(table.into_iter().map(|[y, g]| (y, g)).collect())?
            }
            other => Model::builtin(other)?,
        };
        Ok(model)
    }

    pub fn build_prior(&self) -> Result<Prior, CliError> {
        match (&self.atoms, &self.density) {
            (Some(_), Some(_)) => Err(CliError::Validation(
                "give either atoms or a density, not both".into(),
            )),
            (Some(atoms), None) => Ok(Prior::from_atoms(
                &atoms.iter().map(|&[l, w]| (l, w)).collect::<Vec<_>>(),
            )?),
            (None, Some(name)) => {
                let support = self.support.ok_or_else(|| {
                    CliError::Validation("a density prior needs a support".into())
                })?;
                let k = self.quadrature_nodes.unwrap_or(64);
                match name.as_str() {
                    "uniform" => Ok(Prior::from_density(|_| 1.0, (support[0], support[1]), k)?),
                    other => Err(CliError::Validation(format!(
                        "unknown density '{other}' (only \"uniform\" is built in)"
                    ))),
                }
            }
            (None, None) => Err(CliError::Validation(
                "config needs a prior: atoms or density".into(),
            )),
        }
    }

    /// Resolve model, prior and grid, filling defaulted fields and
    /// revalidating everything.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let model = self.build_model()?;
        let prior = self.build_prior()?;
        let spec = GridSpec {
            horizon: self.horizon,
            nt: self.grid.nt,
            y_min: self.grid.y_min,
            y_max: self.grid.y_max,
            ny: self.grid.ny,
            z_max: self
                .grid
                .z_max
                .unwrap_or_else(|| self.horizon * model.g_max()),
            nz: self.grid.nz,
            n_max: self
                .grid
                .n_max
                .unwrap_or_else(|| GridSpec::suggest_n_max(&prior, &model, self.horizon, 1e-6)),
            gamma_max: self.grid.gamma_max,
            control_points: self.grid.control_points.unwrap_or(DEFAULT_CONTROL_POINTS),
            kappa: self.kappa,
        };
        if let Some(sim) = &self.simulate {
            if sim.paths == 0 {
                return Err(CliError::Validation("simulate.paths must be >= 1".into()));
            }
            if sim.dt_record <= 0.0 {
                return Err(CliError::Validation(
                    "simulate.dt_record must be > 0".into(),
                ));
            }
            if !matches!(sim.policy.as_str(), "pde" | "zero") {
                return Err(CliError::Validation(format!(
                    "simulate.policy must be \"pde\" or \"zero\", got '{}'",
                    sim.policy
                )));
            }
        }
        if let Some(eval) = &self.evaluate {
            if eval.paths < 2 {
                return Err(CliError::Validation(
                    "evaluate.paths must be >= 2 (a standard error needs two samples)".into(),
                ));
            }
            if eval.points.is_empty() {
                return Err(CliError::Validation(
                    "evaluate.points must be nonempty".into(),
                ));
            }
        }
        let cfl = spec.validate(&model, &prior)?;
        Ok(Resolved {
            model,
            prior,
            spec,
            cfl,
        })
    }

    /// The config with all defaults made explicit, plus diagnostics; this is
    /// what `solve` writes as the run metadata.
    pub fn resolved_copy(&self, resolved: &Resolved, value_at_origin: f64) -> RunConfig {
        let mut out = self.clone();
        out.grid.z_max = Some(resolved.spec.z_max);
        out.grid.n_max = Some(resolved.spec.n_max);
        out.grid.control_points = Some(resolved.spec.control_points);
        out.diagnostics = Some(Diagnostics {
            cfl_number: resolved.cfl.cfl_number,
            dt: resolved.cfl.dt,
            dt_max: resolved.cfl.dt_max,
            value_at_origin,
            lambda_max: resolved.prior.lambda_max(),
            g_max: resolved.model.g_max(),
        });
        out
    }
}
