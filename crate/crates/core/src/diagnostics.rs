//! Energies, the weighted state norm, the conserved bracket and exponential
//! rate fitting. All integrals use the composite trapezoid rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::DiagnosticsError;
use crate::grid::{nodal_gradient, trapezoid, Grid};
use crate::model::{CraneParams, Regime, RegimeKind, TensionProfile};
use crate::solver::CraneState;

/// Diagnostics recorded along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    pub e0: f64,
    pub e1: f64,
    /// `e0 + e1`
    pub e_total: f64,
    pub norm_h: f64,
    pub conserved: f64,
    pub dist_eq: Option<f64>,
}

/// Evaluates the diagnostics for a fixed parameter set and grid.
#[derive(Debug, Clone)]
pub struct EnergyMeter {
    params: CraneParams,
    regime: RegimeKind,
    a_half: Vec<f64>,
    dx: f64,
}

impl EnergyMeter {
    pub fn new(params: &CraneParams, profile: &TensionProfile, regime: RegimeKind, grid: Grid) -> Self {
        Self {
            params: *params,
            regime,
            a_half: profile.on_grid(&grid).windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
            dx: grid.dx(),
        }
    }

    pub fn with_cross_weight(mut self, varpi: f64) -> Self {
        self.params.cross_weight = varpi;
        self
    }

    /// `int (z z' + a y_x y'_x + K tau u u') dx + m xi xi' + M eta eta'`,
    /// with the gradient term taken cell by cell (the energy the scheme
    /// dissipates).
    fn energy_form(&self, a: &CraneState, b: &CraneState) -> f64 {
        let p = &self.params;
        let ktau = p.delay_weight * p.delay;
        let integrand: Vec<f64> = (0..a.y.len())
            .map(|i| a.z[i] * b.z[i] + ktau * a.u[i] * b.u[i])
            .collect();
        let gradient: f64 = self
            .a_half
            .iter()
            .enumerate()
            .map(|(i, ah)| ah * (a.y[i + 1] - a.y[i]) * (b.y[i + 1] - b.y[i]))
            .sum::<f64>()
            / self.dx;
        trapezoid(&integrand, self.dx) + gradient + p.platform_mass * a.xi * b.xi + p.load_mass * a.eta * b.eta
    }

    pub fn e0(&self, s: &CraneState) -> f64 {
        0.5 * self.energy_form(s, s)
    }

    pub fn conserved(&self, s: &CraneState) -> f64 {
        let p = &self.params;
        let at = p.delay_gain * p.delay;
        let integrand: Vec<f64> = (0..s.y.len())
            .map(|i| p.damping * s.y[i] + s.z[i] + at * s.u[i])
            .collect();
        trapezoid(&integrand, self.dx)
            + p.platform_mass * s.xi
            + p.load_mass * s.eta
            + p.endpoint_coefficient(self.regime) * s.y[0]
    }

    pub fn e1(&self, s: &CraneState) -> f64 {
        let f = self.conserved(s);
        0.5 * f * f
    }

    /// Weighted inner product: energy form plus `varpi` times the product of
    /// the conserved brackets.
    pub fn inner(&self, a: &CraneState, b: &CraneState) -> f64 {
        self.energy_form(a, b) + self.params.cross_weight * self.conserved(a) * self.conserved(b)
    }

    pub fn norm(&self, s: &CraneState) -> Result<f64, DiagnosticsError> {
        let q = self.inner(s, s);
        if q < 0.0 {
            return Err(DiagnosticsError::VarpiTooLarge {
                varpi: self.params.cross_weight,
                value: q,
            });
        }
        Ok(q.sqrt())
    }

    /// Norm of `state - (zeta, 0, 0, 0, 0)`.
    pub fn distance(&self, s: &CraneState, zeta: f64) -> Result<f64, DiagnosticsError> {
        let mut shifted = s.clone();
        shifted.y.iter_mut().for_each(|v| *v -= zeta);
        self.norm(&shifted)
    }

    pub fn sample(&self, s: &CraneState, zeta: Option<f64>) -> EnergySample {
        let e0 = self.e0(s);
        let conserved = self.conserved(s);
        let e1 = 0.5 * conserved * conserved;
        EnergySample {
            t: s.t,
            e0,
            e1,
            e_total: e0 + e1,
            norm_h: self.norm(s).unwrap_or(f64::NAN),
            conserved,
            dist_eq: zeta.map(|z| self.distance(s, z).unwrap_or(f64::NAN)),
        }
    }
}

pub fn energy_e0(state: &CraneState, params: &CraneParams, profile: &TensionProfile) -> f64 {
    // E0 does not depend on the regime
    EnergyMeter::new(params, profile, RegimeKind::General, state.grid()).e0(state)
}

pub fn energy_e1(state: &CraneState, params: &CraneParams, regime: Regime) -> f64 {
    let f = conserved_functional(state, params, regime);
    0.5 * f * f
}

/// Bracket whose time derivative vanishes along every solution.
pub fn conserved_functional(state: &CraneState, params: &CraneParams, regime: Regime) -> f64 {
    EnergyMeter::new(params, &TensionProfile::constant(1.0), regime.kind, state.grid()).conserved(state)
}

/// Weighted norm of `state`, or the inner product with `other` when given.
pub fn state_norm_h(
    state: &CraneState,
    other: Option<&CraneState>,
    params: &CraneParams,
    profile: &TensionProfile,
    regime: Regime,
) -> Result<f64, DiagnosticsError> {
    let meter = EnergyMeter::new(params, profile, regime.kind, state.grid());
    match other {
        Some(o) => Ok(meter.inner(state, o)),
        None => meter.norm(state),
    }
}

pub fn distance_to_equilibrium(
    state: &CraneState,
    zeta: f64,
    params: &CraneParams,
    profile: &TensionProfile,
    regime: Regime,
) -> Result<f64, DiagnosticsError> {
    EnergyMeter::new(params, profile, regime.kind, state.grid()).distance(state, zeta)
}

const VARPI_SCAN_STEPS: i32 = 30;
const PROBE_COUNT: usize = 24;
const PROBE_SEED: u64 = 0x5eed_c4a9e;
/// Minimum ratio of the weighted form to the plain `H^1 x L^2 x L^2 x R^2`
/// norm accepted by the positivity probe.
const PROBE_FLOOR: f64 = 1e-10;

/// Seeded random smooth states plus the constant displacement, the direction
/// the energy form alone cannot see.
pub fn probe_states(grid: &Grid) -> Vec<CraneState> {
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let mut probes = Vec::with_capacity(PROBE_COUNT + 1);
    let mut constant = CraneState::zeros(grid);
    constant.y.iter_mut().for_each(|v| *v = 1.0);
    probes.push(constant);
    for _ in 0..PROBE_COUNT {
        let field = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let c: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            grid.nodes()
                .map(|x| {
                    c[0] + c[1] * (std::f64::consts::PI * x).cos()
                        + c[2] * (2.0 * std::f64::consts::PI * x).sin()
                        + c[3] * x * x
                })
                .collect()
        };
        let y = field(&mut rng);
        let z = field(&mut rng);
        let mut u = field(&mut rng);
        u[0] = z[0];
        probes.push(CraneState::from_arrays(y, z, u).expect("grid-sized arrays"));
    }
    probes
}

fn plain_norm_squared(s: &CraneState, dx: f64) -> f64 {
    let yx = nodal_gradient(&s.y, dx);
    let integrand: Vec<f64> = (0..s.y.len())
        .map(|i| s.y[i] * s.y[i] + yx[i] * yx[i] + s.z[i] * s.z[i] + s.u[i] * s.u[i])
        .collect();
    trapezoid(&integrand, dx) + s.xi * s.xi + s.eta * s.eta
}

fn passes_probe(meter: &EnergyMeter, probes: &[CraneState], dx: f64) -> bool {
    probes
        .iter()
        .all(|p| meter.inner(p, p) > PROBE_FLOOR * plain_norm_squared(p, dx))
}

/// Largest `varpi` in `{1, 1/2, ..., 2^-30}` for which the weighted form is
/// positive on the probe set, halved for margin. Falls back to `2^-30`.
///
/// The form grows with `varpi`, so the scan stops at the cap whenever the
/// bracket sees constant displacements (`sigma + beta - alpha != 0`).
pub fn auto_varpi(params: &CraneParams, profile: &TensionProfile, regime: Regime, grid: &Grid) -> f64 {
    let probes = probe_states(grid);
    let base = EnergyMeter::new(params, profile, regime.kind, *grid);
    (0..=VARPI_SCAN_STEPS)
        .map(|k| 2f64.powi(-k))
        .find(|&w| passes_probe(&base.clone().with_cross_weight(w), &probes, grid.dx()))
        .map(|w| 0.5 * w)
        .unwrap_or(2f64.powi(-VARPI_SCAN_STEPS))
}

/// Whether `varpi` passes the same positivity probe `auto_varpi` uses.
pub fn varpi_is_admissible(
    varpi: f64,
    params: &CraneParams,
    profile: &TensionProfile,
    regime: Regime,
    grid: &Grid,
) -> bool {
    let meter = EnergyMeter::new(params, profile, regime.kind, *grid).with_cross_weight(varpi);
    passes_probe(&meter, &probe_states(grid), grid.dx())
}

/// Least-squares line through `(t, ln v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 10;

pub fn fit_exponential_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit, DiagnosticsError> {
    let points: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 && t <= window.1)
        .collect();
    if points.len() < MIN_FIT_SAMPLES {
        return Err(DiagnosticsError::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            found: points.len(),
        });
    }
    if let Some(&(t, value)) = points.iter().find(|&&(_, v)| !(v > 0.0)) {
        return Err(DiagnosticsError::NonPositive { t, value });
    }

    let n = points.len() as f64;
    let t_mean = points.iter().map(|p| p.0).sum::<f64>() / n;
    let l_mean = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut stl, mut sll) = (0.0, 0.0, 0.0);
    for &(t, v) in &points {
        let dt = t - t_mean;
        let dl = v.ln() - l_mean;
        stt += dt * dt;
        stl += dt * dl;
        sll += dl * dl;
    }
    let rate = stl / stt;
    let intercept = l_mean - rate * t_mean;
    let ss_res: f64 = points
        .iter()
        .map(|&(t, v)| {
            let r = v.ln() - (intercept + rate * t);
            r * r
        })
        .sum();
    let r_squared = if sll > 0.0 { (1.0 - ss_res / sll).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RateFit {
        rate,
        intercept,
        r_squared,
        window,
        samples: points.len(),
    })
}

/// Last half of the run, or the last 30% before a blow-up.
pub fn default_fit_window(t_start: f64, t_end: f64, blow_up: Option<f64>) -> (f64, f64) {
    match blow_up {
        Some(tb) => (t_start + 0.7 * (tb - t_start), tb),
        None => (t_start + 0.5 * (t_end - t_start), t_end),
    }
}

/// Multiplies each value by `e^{-shift t}`: the trajectory of the generator
/// shifted by `-shift` times the identity.
pub fn shifted_series(series: &[(f64, f64)], shift: f64) -> Vec<(f64, f64)> {
    series.iter().map(|&(t, v)| (t, v * (-shift * t).exp())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CraneParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params() -> CraneParams {
        CraneParams {
            platform_mass: 1.0,
            load_mass: 1.0,
            delay_gain: 0.5,
            velocity_gain: 1.5,
            damping: 1.0,
            delay: 0.5,
            delay_weight: 1.0,
            cross_weight: 0.5,
        }
    }

    fn unit() -> TensionProfile {
        TensionProfile::constant(1.0)
    }

    fn grid() -> Grid {
        Grid::new(20).unwrap()
    }

    #[test]
    fn zero_state_diagnostics_vanish() {
        let s = CraneState::zeros(&grid());
        let p = params();
        assert_eq!(energy_e0(&s, &p, &unit()), 0.0);
        assert_eq!(energy_e1(&s, &p, Regime::general(true)), 0.0);
        assert_eq!(conserved_functional(&s, &p, Regime::general(true)), 0.0);
        assert_eq!(state_norm_h(&s, None, &p, &unit(), Regime::general(true)).unwrap(), 0.0);
    }

    #[test]
    fn e0_unit_velocity() {
        let mut s = CraneState::zeros(&grid());
        s.z.iter_mut().for_each(|v| *v = 1.0);
        s.xi = 1.0;
        s.eta = 1.0;
        assert_relative_eq!(energy_e0(&s, &params(), &unit()), 1.5, epsilon = 1e-14);
    }

    #[test]
    fn e0_linear_displacement() {
        let g = grid();
        let mut s = CraneState::zeros(&g);
        s.y = g.nodes().collect();
        assert_relative_eq!(energy_e0(&s, &params(), &unit()), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn e1_unit_displacement() {
        let mut s = CraneState::zeros(&grid());
        s.y.iter_mut().for_each(|v| *v = 1.0);
        assert_relative_eq!(conserved_functional(&s, &params(), Regime::general(true)), 2.0, epsilon = 1e-14);
        assert_relative_eq!(energy_e1(&s, &params(), Regime::general(true)), 2.0, epsilon = 1e-14);
        // without velocity feedback the endpoint coefficient is -alpha
        assert_relative_eq!(conserved_functional(&s, &params(), Regime::beta0(false)), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn varpi_zero_gives_twice_e0() {
        let probes = probe_states(&grid());
        let p = CraneParams {
            cross_weight: 0.0,
            ..params()
        };
        for s in &probes[1..] {
            let q = state_norm_h(s, Some(s), &p, &unit(), Regime::general(true)).unwrap();
            assert_relative_eq!(q, 2.0 * energy_e0(s, &p, &unit()), epsilon = 1e-12);
        }
    }

    #[test]
    fn distance_of_equilibrium_is_zero() {
        let mut s = CraneState::zeros(&grid());
        s.y.iter_mut().for_each(|v| *v = 0.8);
        let d = distance_to_equilibrium(&s, 0.8, &params(), &unit(), Regime::general(true)).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn distance_from_zero_state() {
        let s = CraneState::zeros(&grid());
        let p = params();
        let d = distance_to_equilibrium(&s, 1.0, &p, &unit(), Regime::general(true)).unwrap();
        let bracket = p.damping * -1.0 + (p.velocity_gain - p.delay_gain) * -1.0;
        assert_relative_eq!(d * d, p.cross_weight * bracket * bracket, epsilon = 1e-14);
    }

    #[test]
    fn negative_varpi_is_reported() {
        let mut s = CraneState::zeros(&grid());
        s.y.iter_mut().for_each(|v| *v = 1.0);
        let p = CraneParams {
            cross_weight: -1.0,
            ..params()
        };
        let err = state_norm_h(&s, None, &p, &unit(), Regime::general(true));
        assert!(matches!(err, Err(DiagnosticsError::VarpiTooLarge { .. })));
    }

    #[test]
    fn auto_varpi_scan() {
        let g = grid();
        let p = params();
        let w = auto_varpi(&p, &unit(), Regime::general(true), &g);
        assert!(w > 0.0);
        assert!(varpi_is_admissible(w, &p, &unit(), Regime::general(true), &g));
        let quadrupled = 4.0 * w;
        assert!(quadrupled > 1.0 || !varpi_is_admissible(quadrupled, &p, &unit(), Regime::general(true), &g));
    }

    #[test]
    fn auto_varpi_fallback_when_constants_invisible() {
        // sigma == alpha without velocity feedback: constants have zero bracket
        let p = CraneParams {
            damping: 0.5,
            ..params()
        };
        let w = auto_varpi(&p, &unit(), Regime::beta0(false), &grid());
        assert_eq!(w, 2f64.powi(-30));
    }

    #[test]
    fn fit_recovers_decay() {
        let series: Vec<(f64, f64)> = (0..50).map(|k| k as f64 * 0.1).map(|t| (t, (-2.0 * t).exp())).collect();
        let fit = fit_exponential_rate(&series, (0.0, 5.0)).unwrap();
        assert!((fit.rate + 2.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_growth_and_intercept() {
        let series: Vec<(f64, f64)> = (0..30).map(|k| k as f64 * 0.2).map(|t| (t, 3.0 * (0.7 * t).exp())).collect();
        let fit = fit_exponential_rate(&series, (0.0, 10.0)).unwrap();
        assert_relative_eq!(fit.rate, 0.7, epsilon = 1e-10);
        assert_relative_eq!(fit.intercept, 3f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn fit_errors() {
        let short: Vec<(f64, f64)> = (0..5).map(|k| (k as f64, 1.0)).collect();
        assert!(matches!(
            fit_exponential_rate(&short, (0.0, 10.0)),
            Err(DiagnosticsError::TooFewSamples { .. })
        ));
        let mut bad: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, 1.0)).collect();
        bad[7].1 = 0.0;
        assert!(matches!(
            fit_exponential_rate(&bad, (0.0, 30.0)),
            Err(DiagnosticsError::NonPositive { .. })
        ));
    }

    #[test]
    fn fit_windows() {
        assert_eq!(default_fit_window(0.0, 20.0, None), (10.0, 20.0));
        let (lo, hi) = default_fit_window(0.0, 20.0, Some(10.0));
        assert_relative_eq!(lo, 7.0, epsilon = 1e-12);
        assert_eq!(hi, 10.0);
    }

    fn random_state(seed: [f64; 6], g: &Grid) -> CraneState {
        let y = g.nodes().map(|x| seed[0] + seed[1] * x * x).collect();
        let z: Vec<f64> = g.nodes().map(|x| seed[2] * (3.0 * x).sin() + seed[3]).collect();
        let mut u: Vec<f64> = g.nodes().map(|x| seed[4] * x + seed[5]).collect();
        u[0] = z[0];
        CraneState::from_arrays(y, z, u).unwrap()
    }

    proptest! {
        #[test]
        fn e1_is_half_bracket_squared(c in proptest::array::uniform6(-2.0..2.0f64)) {
            let s = random_state(c, &grid());
            for regime in [Regime::general(true), Regime::beta0(false)] {
                let f = conserved_functional(&s, &params(), regime);
                prop_assert!((2.0 * energy_e1(&s, &params(), regime) - f * f).abs() <= 1e-12 * (1.0 + f * f));
            }
        }

        #[test]
        fn inner_product_is_symmetric(a in proptest::array::uniform6(-2.0..2.0f64), b in proptest::array::uniform6(-2.0..2.0f64)) {
            let g = grid();
            let (sa, sb) = (random_state(a, &g), random_state(b, &g));
            let r = Regime::general(true);
            let ab = state_norm_h(&sa, Some(&sb), &params(), &unit(), r).unwrap();
            let ba = state_norm_h(&sb, Some(&sa), &params(), &unit(), r).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab.abs()));
        }

        #[test]
        fn weighted_norm_is_a_norm(
            a in proptest::array::uniform6(-2.0..2.0f64),
            b in proptest::array::uniform6(-2.0..2.0f64),
            k in -4.0..4.0f64,
        ) {
            let g = grid();
            let p = CraneParams { cross_weight: auto_varpi(&params(), &unit(), Regime::general(true), &g), ..params() };
            let r = Regime::general(true);
            let norm = |s: &CraneState| state_norm_h(s, None, &p, &unit(), r).unwrap();
            let (sa, sb) = (random_state(a, &g), random_state(b, &g));
            if a.iter().any(|v| v.abs() > 1e-3) {
                prop_assert!(norm(&sa) > 0.0);
            }
            let scaled = sa.combine(k, &sb, 0.0);
            prop_assert!((norm(&scaled) - k.abs() * norm(&sa)).abs() <= 1e-10 * (1.0 + norm(&sa)));
            let sum = sa.combine(1.0, &sb, 1.0);
            prop_assert!(norm(&sum) <= norm(&sa) + norm(&sb) + 1e-12);
        }
    }
}
