//! The four commands: simulate, spectrum, witness and sweep.

use std::fs;
use std::path::{Path, PathBuf};

use cranelab::diagnostics::{auto_varpi, default_fit_window, fit_exponential_rate, EnergyMeter, EnergySample, RateFit};
use cranelab::model::{
    equilibrium_constant, validate_params, zeta_from_bracket, CraneParams, InitialData, Regime, RegimeKind,
    TensionProfile, ZetaFormula,
};
use cranelab::solver::{discretize, mode_solution, simulate_from, CraneState, SimConfig, SimEvent};
use cranelab::spectral::{
    find_roots_with, instability_witness_beta0, instability_witness_general, spectral_abscissa, stability_scan,
    CharProblem, Rect, Root, RootSearch, ScanCell, StabilityMap, WITNESS_TOL,
};
use cranelab::Grid;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{CrossWeight, InitialSpec, ScenarioConfig};
use crate::error::CliError;

/// Roots closer to the origin than this are the equilibrium mode.
const EQUILIBRIUM_TOL: f64 = 1e-6;

/// A configuration with the grid, tension and `varpi` resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub grid: Grid,
    pub profile: TensionProfile,
    pub params: CraneParams,
    pub regime: Regime,
    pub varpi_auto: bool,
}

impl Scenario {
    pub fn resolve(config: &ScenarioConfig) -> Result<Self, CliError> {
        let grid = config.grid()?;
        let profile = config.tension.profile(&grid)?;
        let regime: Regime = config.regime.into();
        let (params, varpi_auto) = match config.params.cross_weight {
            CrossWeight::Value(_) => (config.params.to_params(None), false),
            CrossWeight::Auto(_) => {
                let draft = config.params.to_params(Some(1.0));
                let varpi = auto_varpi(&draft, &profile, regime, &grid);
                (config.params.to_params(Some(varpi)), true)
            }
        };
        Ok(Self {
            config: config.clone(),
            grid,
            profile,
            params,
            regime,
            varpi_auto,
        })
    }

    fn require_unit_tension(&self, what: &str) -> Result<(), CliError> {
        match self.config.tension.constant_value() {
            Some(v) if v == 1.0 => Ok(()),
            _ => Err(CliError::Config(format!("{what} needs constant unit tension"))),
        }
    }

    /// Discrete initial state and the field data it came from, if any.
    pub fn initial_state(&self) -> Result<(CraneState, Option<InitialData>), CliError> {
        match &self.config.initial {
            InitialSpec::Fields {
                displacement,
                velocity,
                history,
            } => {
                let data = InitialData {
                    displacement: displacement.clone(),
                    velocity: velocity.clone(),
                    history: history.clone(),
                };
                Ok((discretize(&data, &self.params, &self.grid), Some(data)))
            }
            InitialSpec::Mode { re, im, part } => {
                self.require_unit_tension("mode initial data")?;
                let mode = mode_solution(Complex64::new(*re, *im), &self.params, self.regime.kind, &self.grid);
                Ok((mode.initial_state(self.params.delay, &self.grid, *part), None))
            }
        }
    }

    fn zeta(&self, state: &CraneState, data: Option<&InitialData>, formula: ZetaFormula) -> Option<f64> {
        match data {
            Some(d) => equilibrium_constant(d, &self.params, self.regime, formula, &self.grid).ok(),
            None => {
                let meter = EnergyMeter::new(&self.params, &self.profile, self.regime.kind, self.grid);
                zeta_from_bracket(meter.conserved(state), &self.params, self.regime.kind, formula).ok()
            }
        }
    }

    pub fn char_problem(&self) -> CharProblem {
        CharProblem::new(self.regime.kind, self.params)
    }

    pub fn region(&self) -> Rect {
        self.config
            .spectrum
            .region
            .unwrap_or_else(|| Rect::default_for(self.params.damping))
    }

    pub fn root_search(&self) -> RootSearch {
        RootSearch {
            min_cell: self.config.spectrum.min_cell,
            ..RootSearch::default()
        }
    }

    fn out_path(&self, out_dir: Option<&Path>, file: &str) -> Result<PathBuf, CliError> {
        let mut output = self.config.output.clone();
        if let Some(dir) = out_dir {
            output.dir = dir.to_path_buf();
        }
        fs::create_dir_all(&output.dir)?;
        Ok(output.path(file))
    }
}

/// Shortest round-trip text, in exponent form for very small or large
/// magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimulateOptions {
    pub force: bool,
    pub expect_divergence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaReport {
    pub conservation_derived: Option<f64>,
    pub closed_form: Option<f64>,
    /// `closed_form - conservation_derived`
    pub discrepancy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Series that was fitted: `dist_eq` or `normH`.
    pub quantity: String,
    #[serde(flatten)]
    pub fit: RateFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub name: Option<String>,
    pub regime: RegimeKind,
    pub convergent: bool,
    pub params: CraneParams,
    pub varpi_auto: bool,
    pub hypotheses: Vec<String>,
    pub forced: bool,
    pub zeta: ZetaReport,
    pub fit: Option<FitReport>,
    pub fit_error: Option<String>,
    pub events: Vec<SimEvent>,
    pub diverged: bool,
    pub intervals: usize,
    pub dt: f64,
    pub steps: usize,
    pub samples: usize,
    pub final_t: f64,
    pub final_dist_eq: Option<f64>,
    pub final_norm_h: Option<f64>,
    pub trajectory_csv: PathBuf,
    pub summary_json: PathBuf,
}

fn write_trajectory(path: &Path, samples: &[EnergySample]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "E0", "E1", "E_total", "normH", "conserved", "dist_eq"])?;
    for s in samples {
        w.write_record([
            num(s.t),
            num(s.e0),
            num(s.e1),
            num(s.e_total),
            num(s.norm_h),
            num(s.conserved),
            s.dist_eq.map(num).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the scenario, writes the trajectory CSV and the summary JSON.
///
/// A blow-up without `expect_divergence` still writes both files before
/// returning [`CliError::BlowUp`].
pub fn cmd_simulate(
    config: &ScenarioConfig,
    options: SimulateOptions,
    out_dir: Option<&Path>,
) -> Result<SimulateSummary, CliError> {
    let scn = Scenario::resolve(config)?;
    let report = validate_params(&scn.params, &scn.profile, scn.regime);
    if !report.is_empty() && !options.force {
        return Err(CliError::Config(format!("hypotheses violated: {report}")));
    }
    let (state, data) = scn.initial_state()?;
    let zeta_cons = scn.zeta(&state, data.as_ref(), ZetaFormula::ConservationDerived);
    let zeta_closed = scn.zeta(&state, data.as_ref(), ZetaFormula::ClosedForm);

    let sim_spec = config.simulation;
    let sim_config = SimConfig {
        cfl: sim_spec.cfl,
        sample_every: sim_spec.sample_every,
        convergence_tol: sim_spec.convergence_tol,
        force: options.force,
        ..SimConfig::new(scn.grid, sim_spec.t_final, scn.regime)
    };
    let sim = simulate_from(state, &scn.params, &scn.profile, &sim_config, zeta_cons)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let use_dist = scn.regime.convergent && zeta_cons.is_some();
    let quantity = if use_dist { "dist_eq" } else { "normH" };
    let series: Vec<(f64, f64)> = sim
        .samples
        .iter()
        .map(|s| (s.t, if use_dist { s.dist_eq.unwrap_or(f64::NAN) } else { s.norm_h }))
        .collect();
    let last_t = sim.samples.last().map_or(0.0, |s| s.t);
    let window = sim_spec
        .fit_window
        .unwrap_or_else(|| default_fit_window(0.0, last_t, sim.blow_up_time()));
    let (fit, fit_error) = match fit_exponential_rate(&series, window) {
        Ok(fit) => (
            Some(FitReport {
                quantity: quantity.into(),
                fit,
            }),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    };

    let csv_path = scn.out_path(out_dir, "trajectory.csv")?;
    let json_path = scn.out_path(out_dir, "summary.json")?;
    write_trajectory(&csv_path, &sim.samples)?;

    let last = sim.samples.last();
    let summary = SimulateSummary {
        name: config.name.clone(),
        regime: scn.regime.kind,
        convergent: scn.regime.convergent,
        params: scn.params,
        varpi_auto: scn.varpi_auto,
        hypotheses: report.messages(),
        forced: options.force,
        zeta: ZetaReport {
            conservation_derived: zeta_cons,
            closed_form: zeta_closed,
            discrepancy: zeta_cons.zip(zeta_closed).map(|(c, p)| p - c),
        },
        fit,
        fit_error,
        diverged: sim.diverged(),
        events: sim.events.clone(),
        intervals: scn.grid.intervals(),
        dt: sim.dt,
        steps: sim.steps,
        samples: sim.samples.len(),
        final_t: last_t,
        final_dist_eq: last.and_then(|s| s.dist_eq).and_then(finite),
        final_norm_h: last.and_then(|s| finite(s.norm_h)),
        trajectory_csv: csv_path,
        summary_json: json_path.clone(),
    };
    fs::write(&json_path, serde_json::to_string_pretty(&summary).expect("summary serializes"))?;

    match sim.blow_up_time() {
        Some(t) if !options.expect_divergence => Err(CliError::BlowUp { t }),
        _ => Ok(summary),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub region: Rect,
    pub roots: Vec<Root>,
    /// Largest real part, the equilibrium mode excluded.
    pub abscissa: Option<f64>,
    pub roots_csv: PathBuf,
}

/// Locates the characteristic roots in the configured region and writes
/// them as CSV, the equilibrium mode labelled.
pub fn cmd_spectrum(config: &ScenarioConfig, out_dir: Option<&Path>) -> Result<SpectrumReport, CliError> {
    let scn = Scenario::resolve(config)?;
    scn.require_unit_tension("the characteristic equation")?;
    let region = scn.region();
    let roots = find_roots_with(&scn.char_problem(), &region, config.spectrum.root_tol, &scn.root_search())
        .map_err(|e| CliError::Config(e.to_string()))?;

    let path = scn.out_path(out_dir, "roots.csv")?;
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["re", "im", "residual", "multiplicity", "converged", "label"])?;
    for r in &roots {
        let label = if r.is_equilibrium_mode(EQUILIBRIUM_TOL) { "equilibrium mode" } else { "" };
        w.write_record([
            num(r.lambda.re),
            num(r.lambda.im),
            num(r.residual),
            r.multiplicity.to_string(),
            r.converged.to_string(),
            label.to_string(),
        ])?;
    }
    w.flush()?;

    Ok(SpectrumReport {
        region,
        abscissa: spectral_abscissa(&roots, EQUILIBRIUM_TOL),
        roots,
        roots_csv: path,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessArgs {
    pub sigma: f64,
    pub m: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub regime: RegimeKind,
    pub params: CraneParams,
    pub lambda: f64,
    pub residual: f64,
    pub tol: f64,
}

impl WitnessReport {
    pub fn passed(&self) -> bool {
        self.residual < self.tol
    }
}

/// Builds the closed-form parameter set with a root at `lambda = sigma`:
/// without velocity feedback when `alpha` is absent, otherwise with
/// `beta` (default 0) and a constructed delay.
pub fn cmd_witness(args: WitnessArgs) -> Result<WitnessReport, CliError> {
    if !(args.sigma > 0.0 && args.m > 0.0) {
        return Err(CliError::Config("--sigma and --m must be positive".into()));
    }
    let (regime, params, root) = match (args.alpha, args.beta) {
        (None, None) => {
            let (p, r) = instability_witness_beta0(args.sigma, args.m);
            (RegimeKind::Beta0, p, r)
        }
        (None, Some(_)) => return Err(CliError::Config("--beta needs --alpha".into())),
        (Some(alpha), beta) => {
            let (p, r) = instability_witness_general(args.sigma, args.m, alpha, beta.unwrap_or(0.0))
                .map_err(|e| CliError::Infeasible(e.to_string()))?;
            (RegimeKind::General, p, r)
        }
    };
    let report = WitnessReport {
        regime,
        params,
        lambda: root.lambda.re,
        residual: root.residual,
        tol: WITNESS_TOL,
    };
    if report.passed() {
        Ok(report)
    } else {
        Err(CliError::ResidualCheck {
            residual: report.residual,
            tol: report.tol,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub map: StabilityMap,
    pub matrix_csv: PathBuf,
}

fn cell_text(c: &ScanCell) -> String {
    match c {
        ScanCell::Abscissa { value, .. } => num(*value),
        ScanCell::NoRootFound => "no-root-found".into(),
        ScanCell::Failed => "failed".into(),
    }
}

fn param_name(p: cranelab::spectral::ScanParam) -> String {
    serde_json::to_value(p)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// Spectral abscissa over the configured two-parameter grid, written as a
/// matrix: rows follow `axis1`, columns `axis2`.
pub fn cmd_sweep(config: &ScenarioConfig, out_dir: Option<&Path>) -> Result<SweepReport, CliError> {
    let scn = Scenario::resolve(config)?;
    scn.require_unit_tension("the characteristic equation")?;
    let sweep = config
        .sweep
        .ok_or_else(|| CliError::Config("no sweep section in the configuration".into()))?;
    let (axis1, axis2) = (sweep.axis1.axis(), sweep.axis2.axis());
    let map = stability_scan(
        &scn.char_problem(),
        &axis1,
        &axis2,
        &scn.region(),
        config.spectrum.root_tol,
        &scn.root_search(),
    );

    let path = scn.out_path(out_dir, "sweep.csv")?;
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec![format!("{}\\{}", param_name(axis1.param), param_name(axis2.param))];
    header.extend(axis2.values.iter().map(|&v| num(v)));
    w.write_record(&header)?;
    for (v1, row) in axis1.values.iter().zip(&map.cells) {
        let mut record = vec![num(*v1)];
        record.extend(row.iter().map(cell_text));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(SweepReport { map, matrix_csv: path })
}
