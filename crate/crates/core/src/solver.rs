//! Method-of-lines discretization of the closed-loop crane system.
//!
//! The cable is discretized with a conservative centered second difference
//! for `(a y_x)_x` (midpoint-averaged tension), the boundary fluxes with
//! one-sided three-point stencils, and the delay channel
//! `tau u_t + u_x = 0` with an upwind-biased stencil fed by the platform
//! velocity at `x = 0`. Time stepping is classical RK4.

use num_complex::Complex64;
use serde::Serialize;

use crate::diagnostics::{EnergyMeter, EnergySample};
use crate::error::{ModelError, SolverError};
use crate::grid::Grid;
use crate::model::{
    equilibrium_constant, validate_params, CraneParams, InitialData, Regime, RegimeKind, TensionProfile,
    ZetaFormula,
};

/// Magnitude above which a state entry counts as blown up.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

/// Discrete state `(y, z, u, xi, eta)` at time `t`.
///
/// `xi == z[0]`, `eta == z[N]` and `u[0] == xi` hold after every accepted step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CraneState {
    pub t: f64,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub xi: f64,
    pub eta: f64,
}

impl CraneState {
    pub fn zeros(grid: &Grid) -> Self {
        let n = grid.len();
        Self {
            t: 0.0,
            y: vec![0.0; n],
            z: vec![0.0; n],
            u: vec![0.0; n],
            xi: 0.0,
            eta: 0.0,
        }
    }

    /// Builds a state from nodal arrays, deriving `xi`, `eta` from `z`.
    pub fn from_arrays(y: Vec<f64>, z: Vec<f64>, u: Vec<f64>) -> Result<Self, ModelError> {
        let n = y.len();
        if n < Grid::MIN_INTERVALS + 1 || z.len() != n || u.len() != n {
            return Err(ModelError::GridTooCoarse {
                intervals: n.saturating_sub(1),
            });
        }
        let xi = z[0];
        let eta = z[n - 1];
        Ok(Self {
            t: 0.0,
            y,
            z,
            u,
            xi,
            eta,
        })
    }

    pub fn intervals(&self) -> usize {
        self.y.len() - 1
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.intervals()).expect("state arrays always span a valid grid")
    }

    fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.y
            .iter()
            .chain(&self.z)
            .chain(&self.u)
            .copied()
            .chain([self.xi, self.eta])
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.entries().all(f64::is_finite)
    }

    fn blown_up(&self) -> bool {
        self.entries().any(|v| !v.is_finite() || v.abs() > BLOW_UP_THRESHOLD)
    }

    fn with_increment(&self, rates: &StateRates, h: f64) -> Self {
        let axpy = |x: &[f64], d: &[f64]| x.iter().zip(d).map(|(a, b)| a + h * b).collect();
        Self {
            t: self.t + h,
            y: axpy(&self.y, &rates.dy),
            z: axpy(&self.z, &rates.dz),
            u: axpy(&self.u, &rates.du),
            xi: self.xi + h * rates.dxi,
            eta: self.eta + h * rates.deta,
        }
    }

    /// `self - other` componentwise, keeping `self.t`.
    pub fn difference(&self, other: &Self) -> Self {
        let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        Self {
            t: self.t,
            y: sub(&self.y, &other.y),
            z: sub(&self.z, &other.z),
            u: sub(&self.u, &other.u),
            xi: self.xi - other.xi,
            eta: self.eta - other.eta,
        }
    }

    /// Linear combination `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let lin = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
        Self {
            t: self.t,
            y: lin(&self.y, &other.y),
            z: lin(&self.z, &other.z),
            u: lin(&self.u, &other.u),
            xi: a * self.xi + b * other.xi,
            eta: a * self.eta + b * other.eta,
        }
    }
}

/// Time derivative of a [`CraneState`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateRates {
    pub dy: Vec<f64>,
    pub dz: Vec<f64>,
    pub du: Vec<f64>,
    pub dxi: f64,
    pub deta: f64,
}

impl StateRates {
    fn combine_rk4(k1: &Self, k2: &Self, k3: &Self, k4: &Self) -> Self {
        let mix = |a: &[f64], b: &[f64], c: &[f64], d: &[f64]| {
            a.iter()
                .zip(b)
                .zip(c)
                .zip(d)
                .map(|(((a, b), c), d)| (a + 2.0 * b + 2.0 * c + d) / 6.0)
                .collect()
        };
        Self {
            dy: mix(&k1.dy, &k2.dy, &k3.dy, &k4.dy),
            dz: mix(&k1.dz, &k2.dz, &k3.dz, &k4.dz),
            du: mix(&k1.du, &k2.du, &k3.du, &k4.du),
            dxi: (k1.dxi + 2.0 * k2.dxi + 2.0 * k3.dxi + k4.dxi) / 6.0,
            deta: (k1.deta + 2.0 * k2.deta + 2.0 * k3.deta + k4.deta) / 6.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.dy
            .iter()
            .chain(&self.dz)
            .chain(&self.du)
            .chain([&self.dxi, &self.deta])
            .all(|v| v.is_finite())
    }
}

/// Semi-discrete right-hand side with the tension coefficients resolved on a
/// fixed grid.
#[derive(Debug, Clone)]
pub struct Dynamics {
    params: CraneParams,
    regime: RegimeKind,
    grid: Grid,
    a_half: Vec<f64>,
    a_max: f64,
}

impl Dynamics {
    pub fn new(params: &CraneParams, profile: &TensionProfile, regime: RegimeKind, grid: Grid) -> Self {
        let a = profile.on_grid(&grid);
        let a_half = a.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Self {
            params: *params,
            regime,
            grid,
            a_half,
            a_max: a.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn params(&self) -> &CraneParams {
        &self.params
    }

    pub fn rates(&self, s: &CraneState) -> Result<StateRates, SolverError> {
        let n = self.grid.intervals();
        if s.y.len() != n + 1 {
            return Err(SolverError::Config(format!(
                "state has {} nodes, dynamics expects {}",
                s.y.len(),
                n + 1
            )));
        }
        let p = &self.params;
        let dx = self.grid.dx();
        let inv_dx2 = 1.0 / (dx * dx);

        // half-cell closure: the end nodes carry mass m + dx/2 (M + dx/2) and
        // see the first cell flux, so the trapezoid bracket is conserved and
        // the staggered energy dissipates exactly in the semi-discrete system
        let half = 0.5 * dx;
        let flux_left = self.a_half[0] * (s.y[1] - s.y[0]) / dx;
        let flux_right = self.a_half[n - 1] * (s.y[n] - s.y[n - 1]) / dx;
        let dxi = (flux_left + p.delay_gain * s.u[n] - p.boundary_gain(self.regime) * s.xi - p.damping * half * s.xi)
            / (p.platform_mass + half);
        let deta = (-flux_right - p.damping * half * s.eta) / (p.load_mass + half);

        let mut dz = Vec::with_capacity(n + 1);
        dz.push(dxi);
        for i in 1..n {
            let right = self.a_half[i] * (s.y[i + 1] - s.y[i]);
            let left = self.a_half[i - 1] * (s.y[i] - s.y[i - 1]);
            dz.push((right - left) * inv_dx2 - p.damping * s.z[i]);
        }
        dz.push(deta);

        // transport with speed 1/tau in flux form: second-order upwind fluxes
        // (3 u_i - u_{i-1}) / 2, and an inflow flux that absorbs the half
        // trapezoid weight of the slaved node u[0], so the channel changes
        // the bracket only through its outflow
        let c = 1.0 / (p.delay * dx);
        let mut du = Vec::with_capacity(n + 1);
        du.push(dxi);
        du.push(c * 1.5 * (s.u[0] - s.u[1]) - 0.5 * dxi);
        for i in 2..=n {
            du.push(-0.5 * c * (3.0 * s.u[i] - 4.0 * s.u[i - 1] + s.u[i - 2]));
        }

        let rates = StateRates {
            dy: s.z.clone(),
            dz,
            du,
            dxi,
            deta,
        };
        if rates.is_finite() {
            Ok(rates)
        } else {
            Err(SolverError::Diverged {
                t: s.t,
                last_finite: Box::new(s.clone()),
            })
        }
    }

    /// One classical RK4 step.
    pub fn step(&self, s: &CraneState, dt: f64) -> Result<CraneState, SolverError> {
        let k1 = self.rates(s)?;
        let k2 = self.rates(&s.with_increment(&k1, 0.5 * dt))?;
        let k3 = self.rates(&s.with_increment(&k2, 0.5 * dt))?;
        let k4 = self.rates(&s.with_increment(&k3, dt))?;
        let mut next = s.with_increment(&StateRates::combine_rk4(&k1, &k2, &k3, &k4), dt);
        next.t = s.t + dt;
        let n = next.intervals();
        next.xi = next.z[0];
        next.eta = next.z[n];
        next.u[0] = next.xi;
        if next.blown_up() {
            return Err(SolverError::Diverged {
                t: next.t,
                last_finite: Box::new(s.clone()),
            });
        }
        Ok(next)
    }

    /// Largest stable step for Courant number `cfl`: wave speed
    /// `sqrt(max a)`, transport speed `1 / tau`.
    pub fn time_step(&self, cfl: f64) -> f64 {
        let dx = self.grid.dx();
        cfl * (dx / self.a_max.sqrt()).min(self.params.delay * dx)
    }
}

/// Samples the initial data on `grid`.
pub fn discretize(init: &InitialData, params: &CraneParams, grid: &Grid) -> CraneState {
    let tau = params.delay;
    let y = grid.nodes().map(|x| init.displacement.eval(x)).collect();
    let z: Vec<f64> = grid.nodes().map(|x| init.velocity.eval(x)).collect();
    let u = grid.nodes().map(|x| init.history.eval(-x * tau)).collect();
    let xi = z[0];
    let eta = z[z.len() - 1];
    CraneState {
        t: 0.0,
        y,
        z,
        u,
        xi,
        eta,
    }
}

/// Time derivative of `state`.
pub fn rhs(
    state: &CraneState,
    params: &CraneParams,
    profile: &TensionProfile,
    regime: Regime,
) -> Result<StateRates, SolverError> {
    Dynamics::new(params, profile, regime.kind, state.grid()).rates(state)
}

/// Advances `state` by `dt` with RK4.
pub fn step(
    state: &CraneState,
    params: &CraneParams,
    profile: &TensionProfile,
    regime: Regime,
    dt: f64,
) -> Result<CraneState, SolverError> {
    Dynamics::new(params, profile, regime.kind, state.grid()).step(state, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub grid: Grid,
    /// Courant number in `(0, 1]`.
    pub cfl: f64,
    pub t_final: f64,
    /// Diagnostics are recorded every `sample_every` steps.
    pub sample_every: usize,
    pub regime: Regime,
    /// Distance to equilibrium that counts as converged.
    pub convergence_tol: f64,
    /// Run even when the regime hypotheses fail.
    pub force: bool,
}

impl SimConfig {
    pub fn new(grid: Grid, t_final: f64, regime: Regime) -> Self {
        Self {
            grid,
            cfl: 0.5,
            t_final,
            sample_every: 1,
            regime,
            convergence_tol: 1e-3,
            force: false,
        }
    }

    fn check(&self) -> Result<(), SolverError> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(SolverError::Config(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(SolverError::Config(format!("t_final must be positive, got {}", self.t_final)));
        }
        if self.sample_every == 0 {
            return Err(SolverError::Config("sample_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of steps and the uniform step that lands exactly on `t_final`.
    pub fn schedule(&self, dynamics: &Dynamics) -> (usize, f64) {
        let dt_max = dynamics.time_step(self.cfl);
        let steps = ((self.t_final / dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        (steps, self.t_final / steps as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SimEvent {
    /// First time the distance to the equilibrium fell below the tolerance.
    Converged { t: f64, dist_eq: f64 },
    /// A state entry became non-finite or exceeded the blow-up threshold.
    Diverged { t: f64, step: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct Simulation {
    pub samples: Vec<EnergySample>,
    pub final_state: CraneState,
    pub events: Vec<SimEvent>,
    pub dt: f64,
    pub steps: usize,
    /// Equilibrium constant used for `dist_eq`, when defined.
    pub zeta: Option<f64>,
}

impl Simulation {
    pub fn diverged(&self) -> bool {
        self.events.iter().any(|e| matches!(e, SimEvent::Diverged { .. }))
    }

    pub fn blow_up_time(&self) -> Option<f64> {
        self.events.iter().find_map(|e| match e {
            SimEvent::Diverged { t, .. } => Some(*t),
            _ => None,
        })
    }
}

/// Runs the discretized system from `init` and records diagnostics.
///
/// `dist_eq` is measured against the conservation-derived equilibrium.
pub fn simulate(
    init: &InitialData,
    params: &CraneParams,
    profile: &TensionProfile,
    config: &SimConfig,
) -> Result<Simulation, SolverError> {
    let zeta = equilibrium_constant(
        init,
        params,
        config.regime,
        ZetaFormula::ConservationDerived,
        &config.grid,
    )
    .ok();
    let state = discretize(init, params, &config.grid);
    simulate_from(state, params, profile, config, zeta)
}

/// Runs the discretized system from an explicit discrete state.
pub fn simulate_from(
    initial: CraneState,
    params: &CraneParams,
    profile: &TensionProfile,
    config: &SimConfig,
    zeta: Option<f64>,
) -> Result<Simulation, SolverError> {
    config.check()?;
    if !config.force {
        let report = validate_params(params, profile, config.regime);
        if !report.is_empty() {
            return Err(SolverError::Hypotheses(report));
        }
    }
    if initial.intervals() != config.grid.intervals() {
        return Err(SolverError::Config("initial state does not match the grid".into()));
    }

    let dynamics = Dynamics::new(params, profile, config.regime.kind, config.grid);
    let meter = EnergyMeter::new(params, profile, config.regime.kind, config.grid);
    let (steps, dt) = config.schedule(&dynamics);

    let mut events = Vec::new();
    let mut samples = Vec::with_capacity(steps / config.sample_every + 1);
    let mut converged = false;
    let mut record = |state: &CraneState, samples: &mut Vec<EnergySample>, events: &mut Vec<SimEvent>| {
        let sample = meter.sample(state, zeta);
        if !converged {
            if let Some(d) = sample.dist_eq.filter(|&d| d < config.convergence_tol) {
                converged = true;
                events.push(SimEvent::Converged { t: sample.t, dist_eq: d });
            }
        }
        samples.push(sample);
    };

    let mut state = initial;
    state.t = 0.0;
    record(&state, &mut samples, &mut events);
    for k in 1..=steps {
        match dynamics.step(&state, dt) {
            Ok(mut next) => {
                // exact time stamps, no accumulated drift
                next.t = k as f64 * dt;
                state = next;
            }
            Err(SolverError::Diverged { t, .. }) => {
                events.push(SimEvent::Diverged { t, step: k });
                break;
            }
            Err(e) => return Err(e),
        }
        if k % config.sample_every == 0 {
            record(&state, &mut samples, &mut events);
        }
    }

    Ok(Simulation {
        samples,
        final_state: state,
        events,
        dt,
        steps,
        zeta,
    })
}

/// Which real projection of a complex mode to use as data.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModePart {
    Real,
    Imag,
}

impl ModePart {
    fn take(self, v: Complex64) -> f64 {
        match self {
            ModePart::Real => v.re,
            ModePart::Imag => v.im,
        }
    }
}

/// Separable solution profile `f(x)` of `y = e^{lambda t} f(x)` for constant
/// unit tension.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSolution {
    pub lambda: Complex64,
    /// Principal `sqrt(lambda^2 + sigma lambda)`; zero selects the affine form.
    pub s: Complex64,
    pub k1: Complex64,
    pub k2: Complex64,
    /// `f` on the grid nodes.
    pub values: Vec<Complex64>,
    /// `f_x(1) + M lambda^2 f(1)`, zero exactly at characteristic roots.
    pub boundary_residual: Complex64,
}

impl ModeSolution {
    fn affine(&self) -> bool {
        self.s == Complex64::new(0.0, 0.0)
    }

    pub fn value_at(&self, x: f64) -> Complex64 {
        if self.affine() {
            self.k1 + self.k2 * x
        } else {
            self.k1 * (-self.s * x).exp() + self.k2 * (self.s * x).exp()
        }
    }

    pub fn derivative_at(&self, x: f64) -> Complex64 {
        if self.affine() {
            self.k2
        } else {
            self.s * (-self.k1 * (-self.s * x).exp() + self.k2 * (self.s * x).exp())
        }
    }

    /// Real data `(y, z, u)` of the mode at `t = 0`, with the delay channel
    /// filled by the mode's own past `lambda e^{-lambda tau x} f(0)`.
    pub fn initial_state(&self, delay: f64, grid: &Grid, part: ModePart) -> CraneState {
        let l = self.lambda;
        let f0 = self.values[0];
        let y = self.values.iter().map(|&f| part.take(f)).collect();
        let z: Vec<f64> = self.values.iter().map(|&f| part.take(l * f)).collect();
        let mut u: Vec<f64> = grid
            .nodes()
            .map(|x| part.take(l * (-l * delay * x).exp() * f0))
            .collect();
        u[0] = z[0];
        CraneState::from_arrays(y, z, u).expect("grid-sized arrays")
    }
}

/// Coefficient `lambda (alpha e^{-lambda tau} - m lambda - beta)` of the
/// platform boundary condition.
pub(crate) fn platform_coefficient(lambda: Complex64, params: &CraneParams, regime: RegimeKind) -> Complex64 {
    let beta = params.boundary_gain(regime);
    lambda * (params.delay_gain * (-lambda * params.delay).exp() - params.platform_mass * lambda - beta)
}

/// Builds the mode for `lambda` satisfying the platform boundary condition
/// exactly; the load boundary condition is left as `boundary_residual`.
/// Assumes unit tension.
pub fn mode_solution(lambda: Complex64, params: &CraneParams, regime: RegimeKind, grid: &Grid) -> ModeSolution {
    let s2 = lambda * lambda + params.damping * lambda;
    let s = s2.sqrt();
    let a = platform_coefficient(lambda, params, regime);
    let b = params.load_mass * lambda * lambda;

    let affine_limit = s.norm() <= 1e-9 * (1.0 + lambda.norm());
    let (s, k1, k2) = if affine_limit {
        // f = k1 + k2 x with f_x(0) + a f(0) = 0
        let k2 = -a;
        let scale = 1.0f64.max(k2.norm());
        (Complex64::new(0.0, 0.0), Complex64::new(1.0 / scale, 0.0), k2 / scale)
    } else {
        // k1 (a - s) + k2 (a + s) = 0
        let k1 = a + s;
        let k2 = -(a - s);
        let scale = k1.norm().max(k2.norm());
        (s, k1 / scale, k2 / scale)
    };

    let mut mode = ModeSolution {
        lambda,
        s,
        k1,
        k2,
        values: Vec::new(),
        boundary_residual: Complex64::new(0.0, 0.0),
    };
    mode.values = grid.nodes().map(|x| mode.value_at(x)).collect();
    mode.boundary_residual = mode.derivative_at(1.0) + b * mode.value_at(1.0);
    mode
}
