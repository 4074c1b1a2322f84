//! Built-in scenarios: the convergent closed loop, its decay rate, and the two
//! parameter families with a growing mode at `lambda = sigma`.

use cranelab::model::{CraneParams, Field, InitialData, RegimeKind};
use cranelab::solver::ModePart;
use cranelab::spectral::{general_witness_bound, instability_witness_beta0, instability_witness_general, Rect, ScanParam};

use crate::config::{
    AxisSpec, CrossWeight, InitialSpec, OutputSpec, ParamsSpec, RegimeSpec, ScenarioConfig, SimulationSpec,
    SpectrumSpec, SweepSpec, TensionSpec,
};

pub const PRESET_NAMES: [&str; 4] = ["convergence", "decay-rate", "witness-beta0", "witness-general"];

/// `alpha = 0.5 < beta = 1.5`, `K = 1` inside `(alpha, 2 beta - alpha)`.
pub fn convergent_params() -> CraneParams {
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

fn sine_displacement() -> InitialData {
    InitialData {
        displacement: Field::Sine {
            amplitude: 1.0,
            frequency: 1.0,
        },
        velocity: Field::Zero,
        history: Field::Zero,
    }
}

fn convergent_sweep() -> SweepSpec {
    SweepSpec {
        axis1: AxisSpec {
            param: ScanParam::DelayGain,
            from: 0.1,
            to: 3.0,
            count: 12,
        },
        axis2: AxisSpec {
            param: ScanParam::Delay,
            from: 0.25,
            to: 2.0,
            count: 8,
        },
    }
}

fn output(name: &str) -> OutputSpec {
    OutputSpec {
        prefix: format!("{name}_"),
        ..OutputSpec::default()
    }
}

pub fn convergence() -> ScenarioConfig {
    ScenarioConfig {
        name: Some("convergence".into()),
        regime: RegimeSpec {
            kind: RegimeKind::General,
            convergent: true,
        },
        params: ParamsSpec::from_params(&convergent_params(), CrossWeight::default()),
        tension: TensionSpec::default(),
        initial: InitialSpec::fields(sine_displacement()),
        simulation: SimulationSpec {
            intervals: 200,
            t_final: 40.0,
            sample_every: 10,
            ..SimulationSpec::default()
        },
        spectrum: SpectrumSpec::default(),
        sweep: Some(convergent_sweep()),
        output: output("convergence"),
    }
}

pub fn decay_rate() -> ScenarioConfig {
    ScenarioConfig {
        name: Some("decay-rate".into()),
        initial: InitialSpec::fields(InitialData {
            displacement: Field::Sine {
                amplitude: 1.0,
                frequency: 1.0,
            },
            velocity: Field::Cosine {
                amplitude: 0.3,
                frequency: 2.0,
            },
            history: Field::Constant { value: 0.3 },
        }),
        simulation: SimulationSpec {
            fit_window: Some((20.0, 40.0)),
            ..convergence().simulation
        },
        output: output("decay-rate"),
        ..convergence()
    }
}

fn witness_config(name: &str, kind: RegimeKind, params: CraneParams) -> ScenarioConfig {
    let sigma = params.damping;
    ScenarioConfig {
        name: Some(name.into()),
        regime: RegimeSpec {
            kind,
            convergent: false,
        },
        params: ParamsSpec::from_params(&params, CrossWeight::Value(params.cross_weight)),
        tension: TensionSpec::default(),
        initial: InitialSpec::Mode {
            re: sigma,
            im: 0.0,
            part: ModePart::Real,
        },
        simulation: SimulationSpec {
            intervals: 200,
            t_final: 30.0,
            sample_every: 10,
            ..SimulationSpec::default()
        },
        spectrum: SpectrumSpec {
            region: Some(Rect::new((-3.0, 3.0), (-15.0, 15.0))),
            ..SpectrumSpec::default()
        },
        sweep: None,
        output: output(name),
    }
}

/// `sigma = 1`, `m = 1`, no instantaneous velocity feedback.
pub fn witness_beta0() -> ScenarioConfig {
    let (params, _) = instability_witness_beta0(1.0, 1.0);
    witness_config("witness-beta0", RegimeKind::Beta0, params)
}

/// `sigma = 1`, `m = 1`, `beta = 1` and `alpha` half a unit above the
/// feasibility bound.
pub fn witness_general() -> ScenarioConfig {
    let (sigma, m, beta) = (1.0, 1.0, 1.0);
    let alpha = general_witness_bound(sigma, m, beta) + 0.5;
    let (params, _) = instability_witness_general(sigma, m, alpha, beta).expect("alpha above the bound");
    witness_config("witness-general", RegimeKind::General, params)
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    match name {
        "convergence" => Some(convergence()),
        "decay-rate" => Some(decay_rate()),
        "witness-beta0" => Some(witness_beta0()),
        "witness-general" => Some(witness_general()),
        _ => None,
    }
}
