//! Domain types of the crane model, hypothesis checks and the equilibrium
//! constant selected by the initial data.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::grid::{trapezoid, Grid};

/// Tension modulus `a(x)` sampled on a uniform grid over `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensionProfile {
    samples: Vec<f64>,
    floor: f64,
}

impl TensionProfile {
    /// Samples are taken at `x_i = i / (len - 1)`. Values below `floor` are
    /// accepted here and reported by [`validate_params`].
    pub fn from_samples(samples: Vec<f64>, floor: f64) -> Result<Self, ModelError> {
        if samples.len() < 2 {
            return Err(ModelError::TensionTooShort);
        }
        if let Some(index) = samples.iter().position(|a| !a.is_finite()) {
            return Err(ModelError::NonFiniteTension { index });
        }
        Ok(Self { samples, floor })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            samples: vec![value, value],
            floor: value,
        }
    }

    pub fn from_fn(grid: &Grid, floor: f64, a: impl Fn(f64) -> f64) -> Result<Self, ModelError> {
        Self::from_samples(grid.nodes().map(a).collect(), floor)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_constant(&self) -> bool {
        let first = self.samples[0];
        self.samples.iter().all(|&a| a == first)
    }

    /// Linear interpolation between samples.
    pub fn at(&self, x: f64) -> f64 {
        let n = self.samples.len() - 1;
        let pos = (x.clamp(0.0, 1.0) * n as f64).min(n as f64);
        let i = (pos.floor() as usize).min(n - 1);
        let w = pos - i as f64;
        (1.0 - w) * self.samples[i] + w * self.samples[i + 1]
    }

    /// Nodal values on `grid`, resampled by linear interpolation when the
    /// sampling differs.
    pub fn on_grid(&self, grid: &Grid) -> Vec<f64> {
        if self.samples.len() == grid.len() {
            self.samples.clone()
        } else {
            grid.nodes().map(|x| self.at(x)).collect()
        }
    }
}

/// Physical constants, feedback gains and norm weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CraneParams {
    /// Platform mass at `x = 0`.
    pub platform_mass: f64,
    /// Load mass at `x = 1`.
    pub load_mass: f64,
    /// Gain on the delayed boundary velocity (stored as its modulus).
    pub delay_gain: f64,
    /// Gain on the instantaneous boundary velocity.
    pub velocity_gain: f64,
    /// Interior damping coefficient.
    pub damping: f64,
    /// Input delay.
    pub delay: f64,
    /// Weight of the delay channel in the energy and the norm.
    pub delay_weight: f64,
    /// Weight of the conserved-bracket term in the state norm.
    pub cross_weight: f64,
}

impl CraneParams {
    /// Boundary velocity gain actually acting in `regime`.
    pub fn boundary_gain(&self, regime: RegimeKind) -> f64 {
        match regime {
            RegimeKind::General => self.velocity_gain,
            RegimeKind::Beta0 => 0.0,
        }
    }

    /// Coefficient of `y(0)` in the conserved bracket.
    pub fn endpoint_coefficient(&self, regime: RegimeKind) -> f64 {
        self.boundary_gain(regime) - self.delay_gain
    }

    /// Returns a copy with the delay gain replaced by its modulus.
    pub fn normalized(mut self) -> Self {
        self.delay_gain = self.delay_gain.abs();
        self
    }
}

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    /// Boundary feedback with both the delayed and the instantaneous velocity.
    General,
    /// No instantaneous boundary velocity feedback.
    Beta0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regime {
    pub kind: RegimeKind,
    /// Whether the run claims the convergence hypotheses; checked by
    /// [`validate_params`].
    pub convergent: bool,
}

impl Regime {
    pub const fn general(convergent: bool) -> Self {
        Self {
            kind: RegimeKind::General,
            convergent,
        }
    }

    pub const fn beta0(convergent: bool) -> Self {
        Self {
            kind: RegimeKind::Beta0,
            convergent,
        }
    }
}

/// Scalar function of one variable used for initial data.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Field {
    Zero,
    Constant { value: f64 },
    /// `amplitude * sin(frequency * pi * x)`
    Sine { amplitude: f64, frequency: f64 },
    /// `amplitude * cos(frequency * pi * x)`
    Cosine { amplitude: f64, frequency: f64 },
    /// `c0 + c1 x + c2 x^2 + ...`
    Polynomial { coefficients: Vec<f64> },
    /// Piecewise-linear interpolation through `[x, value]` points, constant
    /// outside the table.
    Table { points: Vec<[f64; 2]> },
}

impl Field {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Field::Zero => 0.0,
            Field::Constant { value } => *value,
            Field::Sine {
                amplitude,
                frequency,
            } => amplitude * (frequency * PI * x).sin(),
            Field::Cosine {
                amplitude,
                frequency,
            } => amplitude * (frequency * PI * x).cos(),
            Field::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
            }
            Field::Table { points } => interpolate_table(points, x),
        }
    }

    pub fn table(points: Vec<[f64; 2]>) -> Result<Self, ModelError> {
        let increasing = points.windows(2).all(|w| w[1][0] > w[0][0]);
        if points.len() < 2 || !increasing || points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ModelError::BadTable);
        }
        Ok(Field::Table { points })
    }

    /// Table through the nodes of `grid` shifted and scaled onto `[lo, hi]`.
    pub fn from_nodal(lo: f64, hi: f64, values: &[f64]) -> Self {
        let n = values.len() - 1;
        let points = values
            .iter()
            .enumerate()
            .map(|(i, &v)| [lo + (hi - lo) * i as f64 / n as f64, v])
            .collect();
        Field::Table { points }
    }
}

fn interpolate_table(points: &[[f64; 2]], x: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if x <= first[0] {
        return first[1];
    }
    if x >= last[0] {
        return last[1];
    }
    let j = points.partition_point(|p| p[0] <= x);
    let (a, b) = (points[j - 1], points[j]);
    let w = (x - a[0]) / (b[0] - a[0]);
    (1.0 - w) * a[1] + w * b[1]
}

/// Initial displacement, velocity and velocity history.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    /// `y(x, 0)` on `[0, 1]`.
    pub displacement: Field,
    /// `y_t(x, 0)` on `[0, 1]`.
    pub velocity: Field,
    /// `y_t(0, s)` for `s` in `[-delay, 0]`.
    pub history: Field,
}

impl InitialData {
    pub fn zero() -> Self {
        Self {
            displacement: Field::Zero,
            velocity: Field::Zero,
            history: Field::Zero,
        }
    }

    /// History value at `s = 0` agrees with the initial velocity at `x = 0`.
    pub fn is_compatible(&self, tol: f64) -> bool {
        (self.history.eval(0.0) - self.velocity.eval(0.0)).abs() <= tol
    }
}

/// One named hypothesis that the parameters fail.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "hypothesis", rename_all = "snake_case")]
pub enum Violation {
    /// Some tension sample falls below the positive floor.
    TensionFloor { min_sample: f64, floor: f64 },
    /// A physical constant that must be strictly positive is not.
    NonPositive { name: &'static str, value: f64 },
    /// Delayed gain is not smaller than the boundary velocity gain.
    GainOrdering { delay_gain: f64, velocity_gain: f64 },
    /// Delay weight outside the open window `(alpha, 2 beta - alpha)`.
    DelayWeightWindow { delay_weight: f64, lower: f64, upper: f64 },
    /// Delay weight does not exceed the delayed gain.
    DelayWeightFloor { delay_weight: f64, delay_gain: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TensionFloor { min_sample, floor } => write!(
                f,
                "tension floor violated: min a(x) = {min_sample} but need a(x) >= a0 = {floor} > 0"
            ),
            Violation::NonPositive { name, value } => {
                write!(f, "{name} must be positive, got {value}")
            }
            Violation::GainOrdering {
                delay_gain,
                velocity_gain,
            } => write!(
                f,
                "gain ordering violated: need alpha < beta, got alpha = {delay_gain}, beta = {velocity_gain}"
            ),
            Violation::DelayWeightWindow {
                delay_weight,
                lower,
                upper,
            } => write!(
                f,
                "delay weight window violated: need {lower} < K < {upper}, got K = {delay_weight}"
            ),
            Violation::DelayWeightFloor {
                delay_weight,
                delay_gain,
            } => write!(
                f,
                "delay weight floor violated: need K > alpha = {delay_gain}, got K = {delay_weight}"
            ),
        }
    }
}

/// Outcome of [`validate_params`]; empty when every hypothesis holds.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub violations: Vec<Violation>,
}

impl HypothesisReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.violations.iter().map(ToString::to_string).collect()
    }
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("all hypotheses hold");
        }
        f.write_str(&self.messages().join("; "))
    }
}

/// Checks positivity of the constants and the tension, plus the gain and
/// weight conditions when `regime.convergent` is set.
pub fn validate_params(
    params: &CraneParams,
    profile: &TensionProfile,
    regime: Regime,
) -> HypothesisReport {
    let mut violations = Vec::new();

    let min_sample = profile.min();
    if !(profile.floor() > 0.0 && min_sample >= profile.floor()) {
        violations.push(Violation::TensionFloor {
            min_sample,
            floor: profile.floor(),
        });
    }

    let positive = [
        ("platform mass m", params.platform_mass),
        ("load mass M", params.load_mass),
        ("damping sigma", params.damping),
        ("delay tau", params.delay),
        ("delay gain alpha", params.delay_gain),
        ("delay weight K", params.delay_weight),
        ("cross weight varpi", params.cross_weight),
    ];
    for (name, value) in positive {
        if !(value > 0.0) {
            violations.push(Violation::NonPositive { name, value });
        }
    }

    if regime.convergent {
        let alpha = params.delay_gain;
        let k = params.delay_weight;
        match regime.kind {
            RegimeKind::General => {
                let beta = params.velocity_gain;
                if !(alpha < beta) {
                    violations.push(Violation::GainOrdering {
                        delay_gain: alpha,
                        velocity_gain: beta,
                    });
                }
                let upper = 2.0 * beta - alpha;
                if !(alpha < k && k < upper) {
                    violations.push(Violation::DelayWeightWindow {
                        delay_weight: k,
                        lower: alpha,
                        upper,
                    });
                }
            }
            RegimeKind::Beta0 => {
                if !(k > alpha) {
                    violations.push(Violation::DelayWeightFloor {
                        delay_weight: k,
                        delay_gain: alpha,
                    });
                }
            }
        }
    }

    HypothesisReport { violations }
}

/// Which expression turns the conserved bracket into the limit value.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaFormula {
    /// Bracket divided by `beta - alpha` (resp. `-alpha` without velocity
    /// feedback), as in the closed-form limit statements.
    ClosedForm,
    /// Bracket divided by `sigma + beta - alpha` (resp. `sigma - alpha`), the
    /// value a constant state `(zeta, 0, 0, 0, 0)` gives to the bracket.
    ConservationDerived,
}

/// Initial value of the conserved bracket, integrals by the trapezoid rule on
/// `grid`. The boundary velocities are read off the initial velocity field.
pub fn initial_bracket(init: &InitialData, params: &CraneParams, regime: RegimeKind, grid: &Grid) -> f64 {
    let alpha = params.delay_gain;
    let tau = params.delay;
    let integrand: Vec<f64> = grid
        .nodes()
        .map(|x| {
            params.damping * init.displacement.eval(x)
                + init.velocity.eval(x)
                + alpha * tau * init.history.eval(-tau * x)
        })
        .collect();
    let xi0 = init.velocity.eval(0.0);
    let eta0 = init.velocity.eval(1.0);
    trapezoid(&integrand, grid.dx())
        + params.platform_mass * xi0
        + params.load_mass * eta0
        + params.endpoint_coefficient(regime) * init.displacement.eval(0.0)
}

/// Denominator turning the bracket into the limit constant.
pub fn zeta_denominator(params: &CraneParams, regime: RegimeKind, formula: ZetaFormula) -> f64 {
    let c = params.endpoint_coefficient(regime);
    match formula {
        ZetaFormula::ClosedForm => c,
        ZetaFormula::ConservationDerived => params.damping + c,
    }
}

/// Limit value from an already computed bracket.
pub fn zeta_from_bracket(
    bracket: f64,
    params: &CraneParams,
    regime: RegimeKind,
    formula: ZetaFormula,
) -> Result<f64, ModelError> {
    let denom = zeta_denominator(params, regime, formula);
    if denom == 0.0 {
        let what = match (formula, regime) {
            (ZetaFormula::ClosedForm, RegimeKind::General) => "beta - alpha = 0",
            (ZetaFormula::ClosedForm, RegimeKind::Beta0) => "alpha = 0",
            (ZetaFormula::ConservationDerived, RegimeKind::General) => "sigma + beta - alpha = 0",
            (ZetaFormula::ConservationDerived, RegimeKind::Beta0) => "sigma - alpha = 0",
        };
        return Err(ModelError::DegenerateParameters(what.to_string()));
    }
    Ok(bracket / denom)
}

/// Constant `zeta` of the equilibrium `(zeta, 0, 0, 0, 0)` reached from `init`.
pub fn equilibrium_constant(
    init: &InitialData,
    params: &CraneParams,
    regime: Regime,
    formula: ZetaFormula,
    grid: &Grid,
) -> Result<f64, ModelError> {
    let bracket = initial_bracket(init, params, regime.kind, grid);
    zeta_from_bracket(bracket, params, regime.kind, formula)
}
