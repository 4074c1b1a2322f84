//! Scenario configuration documents (JSON).

use std::fs;
use std::path::{Path, PathBuf};

use cranelab::model::{CraneParams, Field, InitialData, Regime, RegimeKind, TensionProfile};
use cranelab::solver::ModePart;
use cranelab::spectral::{Rect, ScanAxis, ScanParam};
use cranelab::Grid;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Free-form label copied into the summary.
    #[serde(default)]
    pub name: Option<String>,
    pub regime: RegimeSpec,
    pub params: ParamsSpec,
    #[serde(default)]
    pub tension: TensionSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub spectrum: SpectrumSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RegimeSpec {
    pub kind: RegimeKind,
    /// Whether the run claims the convergence hypotheses; they are checked
    /// before simulating.
    #[serde(default)]
    pub convergent: bool,
}

impl From<RegimeSpec> for Regime {
    fn from(r: RegimeSpec) -> Self {
        Regime {
            kind: r.kind,
            convergent: r.convergent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub enum AutoKeyword {
    #[serde(rename = "auto")]
    Auto,
}

/// A number, or `"auto"` to pick the value by the positivity probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum CrossWeight {
    Value(f64),
    Auto(AutoKeyword),
}

impl Default for CrossWeight {
    fn default() -> Self {
        CrossWeight::Auto(AutoKeyword::Auto)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    /// Platform mass `m`.
    pub platform_mass: f64,
    /// Load mass `M`.
    pub load_mass: f64,
    /// Delayed feedback gain `alpha`; its modulus is used.
    pub delay_gain: f64,
    /// Instantaneous boundary velocity gain `beta`, ignored for `beta0`.
    #[serde(default)]
    pub velocity_gain: f64,
    /// Interior damping `sigma`.
    pub damping: f64,
    /// Delay `tau`.
    pub delay: f64,
    /// Delay-channel weight `K`.
    pub delay_weight: f64,
    /// Weight `varpi` of the bracket term in the state norm.
    #[serde(default)]
    pub cross_weight: CrossWeight,
}

impl ParamsSpec {
    /// Parameters with `varpi` filled in (`None` leaves `"auto"` unresolved
    /// as 0).
    pub fn to_params(&self, varpi: Option<f64>) -> CraneParams {
        CraneParams {
            platform_mass: self.platform_mass,
            load_mass: self.load_mass,
            delay_gain: self.delay_gain,
            velocity_gain: self.velocity_gain,
            damping: self.damping,
            delay: self.delay,
            delay_weight: self.delay_weight,
            cross_weight: match self.cross_weight {
                CrossWeight::Value(v) => v,
                CrossWeight::Auto(_) => varpi.unwrap_or(0.0),
            },
        }
        .normalized()
    }

    pub fn from_params(p: &CraneParams, cross_weight: CrossWeight) -> Self {
        Self {
            platform_mass: p.platform_mass,
            load_mass: p.load_mass,
            delay_gain: p.delay_gain,
            velocity_gain: p.velocity_gain,
            damping: p.damping,
            delay: p.delay,
            delay_weight: p.delay_weight,
            cross_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TensionSpec {
    Constant {
        value: f64,
    },
    /// `[x, a]` points, linearly interpolated onto the grid.
    Table {
        points: Vec<[f64; 2]>,
        /// Positive lower bound the samples must respect.
        floor: f64,
    },
}

impl Default for TensionSpec {
    fn default() -> Self {
        TensionSpec::Constant { value: 1.0 }
    }
}

impl TensionSpec {
    pub fn profile(&self, grid: &Grid) -> Result<TensionProfile, CliError> {
        match self {
            TensionSpec::Constant { value } => Ok(TensionProfile::constant(*value)),
            TensionSpec::Table { points, floor } => {
                let table = Field::table(points.clone()).map_err(|e| CliError::Config(format!("tension: {e}")))?;
                TensionProfile::from_fn(grid, *floor, |x| table.eval(x))
                    .map_err(|e| CliError::Config(format!("tension: {e}")))
            }
        }
    }

    /// Value of the tension when it is the same everywhere.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            TensionSpec::Constant { value } => Some(*value),
            TensionSpec::Table { points, .. } => {
                let first = points.first()?[1];
                points.iter().all(|p| p[1] == first).then_some(first)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Displacement, velocity and velocity history given as fields.
    Fields {
        displacement: Field,
        velocity: Field,
        /// Platform velocity on `[-tau, 0]`.
        history: Field,
    },
    /// One real projection of the separable solution `e^{lambda t} f(x)`
    /// (constant tension only).
    Mode {
        re: f64,
        im: f64,
        #[serde(default = "real_part")]
        part: ModePart,
    },
}

fn real_part() -> ModePart {
    ModePart::Real
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Fields {
            displacement: Field::Zero,
            velocity: Field::Zero,
            history: Field::Zero,
        }
    }
}

impl InitialSpec {
    pub fn fields(data: InitialData) -> Self {
        InitialSpec::Fields {
            displacement: data.displacement,
            velocity: data.velocity,
            history: data.history,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    /// Number of grid intervals `N`.
    #[serde(default = "default_intervals")]
    pub intervals: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    /// Distance to equilibrium counted as converged.
    #[serde(default = "default_convergence_tol")]
    pub convergence_tol: f64,
    /// Rate-fit window `[t_lo, t_hi]`; default: last half of the run, or the
    /// last 30% before a blow-up.
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
}

fn default_intervals() -> usize {
    200
}
fn default_cfl() -> f64 {
    0.5
}
fn default_t_final() -> f64 {
    20.0
}
fn default_sample_every() -> usize {
    1
}
fn default_convergence_tol() -> f64 {
    1e-3
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            intervals: default_intervals(),
            cfl: default_cfl(),
            t_final: default_t_final(),
            sample_every: default_sample_every(),
            convergence_tol: default_convergence_tol(),
            fit_window: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    /// Search rectangle; default `[-5 sigma, 3 sigma] x [-40, 40]`.
    #[serde(default)]
    pub region: Option<Rect>,
    #[serde(default = "default_root_tol")]
    pub root_tol: f64,
    /// Smallest subdivision cell diameter.
    #[serde(default = "default_min_cell")]
    pub min_cell: f64,
}

fn default_root_tol() -> f64 {
    1e-8
}
fn default_min_cell() -> f64 {
    1e-3
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        Self {
            region: None,
            root_tol: default_root_tol(),
            min_cell: default_min_cell(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub param: ScanParam,
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn axis(&self) -> ScanAxis {
        ScanAxis::linspace(self.param, self.from, self.to, self.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Rows of the output matrix.
    pub axis1: AxisSpec,
    /// Columns of the output matrix.
    pub axis2: AxisSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory for all output files (created if missing).
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// File name prefix.
    #[serde(default)]
    pub prefix: String,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            prefix: String::new(),
        }
    }
}

impl OutputSpec {
    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(format!("{}{file}", self.prefix))
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Structural checks that do not depend on the regime hypotheses.
    pub fn check(&self) -> Result<(), CliError> {
        let p = &self.params;
        let numbers = [
            p.platform_mass,
            p.load_mass,
            p.delay_gain,
            p.velocity_gain,
            p.damping,
            p.delay,
            p.delay_weight,
        ];
        if numbers.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Config("parameters must be finite".into()));
        }
        if !(p.delay > 0.0) {
            return Err(CliError::Config("delay must be positive".into()));
        }
        if !(p.platform_mass > 0.0 && p.load_mass > 0.0) {
            return Err(CliError::Config("masses must be positive".into()));
        }
        if self.simulation.intervals < Grid::MIN_INTERVALS {
            return Err(CliError::Config(format!(
                "simulation.intervals must be at least {}",
                Grid::MIN_INTERVALS
            )));
        }
        if let Some(sweep) = &self.sweep {
            for a in [sweep.axis1, sweep.axis2] {
                if !(a.from.is_finite() && a.to.is_finite()) || a.count == 0 {
                    return Err(CliError::Config("sweep axes need finite ranges and count >= 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Grid::new(self.simulation.intervals).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// JSON schema of [`ScenarioConfig`].
pub fn config_schema() -> String {
    serde_json::to_string_pretty(&schemars::schema_for!(ScenarioConfig)).expect("schema serializes")
}
