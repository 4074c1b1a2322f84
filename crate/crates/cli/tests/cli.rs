use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cranelab::model::{Field, InitialData};
use cranelab::spectral::Rect;
use cranelab_cli::commands::SimulateSummary;
use cranelab_cli::config::{config_schema, InitialSpec};
use cranelab_cli::presets::{self, PRESET_NAMES};
use cranelab_cli::ScenarioConfig;
use tempfile::TempDir;

fn cranelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cranelab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, config: &ScenarioConfig) -> PathBuf {
    let path = dir.join("scenario.json");
    fs::write(&path, config.to_json()).unwrap();
    path
}

fn short(mut config: ScenarioConfig, t_final: f64, intervals: usize) -> ScenarioConfig {
    config.simulation.t_final = t_final;
    config.simulation.intervals = intervals;
    config.output.prefix.clear();
    config
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_owned).collect())
        .collect();
    (header, rows)
}

fn simulate(config: &ScenarioConfig, extra: &[&str]) -> (TempDir, Output) {
    let dir = TempDir::new().unwrap();
    let path = write_config(dir.path(), config);
    let out = dir.path().join("out");
    let mut args = vec!["simulate", path.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let output = cranelab(&args);
    (dir, output)
}

#[test]
fn zero_data_stays_at_zero() {
    let mut config = short(presets::convergence(), 2.0, 40);
    config.initial = InitialSpec::fields(InitialData {
        displacement: Field::Zero,
        velocity: Field::Zero,
        history: Field::Zero,
    });
    let (dir, out) = simulate(&config, &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let (header, rows) = read_rows(&dir.path().join("out/trajectory.csv"));
    assert_eq!(header, ["t", "E0", "E1", "E_total", "normH", "conserved", "dist_eq"]);
    assert!(!rows.is_empty());
    for row in &rows {
        for cell in &row[1..] {
            assert_eq!(cell.parse::<f64>().unwrap(), 0.0, "{row:?}");
        }
    }
}

#[test]
fn sample_count_and_summary_reparse() {
    let mut config = short(presets::convergence(), 3.0, 50);
    config.simulation.sample_every = 7;
    let (dir, out) = simulate(&config, &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let text = fs::read_to_string(dir.path().join("out/summary.json")).unwrap();
    let summary: SimulateSummary = serde_json::from_str(&text).unwrap();
    let (_, rows) = read_rows(&dir.path().join("out/trajectory.csv"));
    assert_eq!(rows.len(), summary.steps / 7 + 1);
    assert_eq!(summary.samples, rows.len());
    assert_eq!(summary.intervals, 50);
    assert!(!summary.diverged);
    let z = summary.zeta;
    let gap = z.closed_form.unwrap() - z.conservation_derived.unwrap();
    assert!((z.discrepancy.unwrap() - gap).abs() < 1e-15);
}

#[test]
fn runs_are_deterministic() {
    let config = short(presets::decay_rate(), 2.0, 40);
    let (a, out_a) = simulate(&config, &[]);
    let (b, out_b) = simulate(&config, &[]);
    assert_eq!(code(&out_a), 0);
    assert_eq!(code(&out_b), 0);
    let csv_a = fs::read(a.path().join("out/trajectory.csv")).unwrap();
    let csv_b = fs::read(b.path().join("out/trajectory.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
}

#[test]
fn blow_up_exit_codes() {
    let config = short(presets::witness_beta0(), 40.0, 50);
    let (dir, out) = simulate(&config, &[]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    // files are still written
    assert!(dir.path().join("out/summary.json").exists());

    let (_, out) = simulate(&config, &["--expect-divergence"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn violated_hypotheses_need_force() {
    let mut config = short(presets::convergence(), 1.0, 20);
    config.params.delay_gain = 2.0;
    let (_, out) = simulate(&config, &[]);
    assert_eq!(code(&out), 1);
    let (_, out) = simulate(&config, &["--force"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_input_exits_with_one() {
    assert_eq!(code(&cranelab(&["frobnicate"])), 1);
    assert_eq!(code(&cranelab(&["simulate", "/nonexistent/scenario.json"])), 1);
    assert_eq!(code(&cranelab(&["preset", "nope"])), 1);
    assert_eq!(code(&cranelab(&["--help"])), 0);

    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"params": {"unknown_knob": 1}}"#).unwrap();
    assert_eq!(code(&cranelab(&["simulate", path.to_str().unwrap()])), 1);
}

#[test]
fn witness_exit_codes() {
    let out = cranelab(&["witness", "--sigma", "1", "--m", "1", "--json"]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["regime"], "beta0");
    assert!(report["residual"].as_f64().unwrap() < 1e-10);

    // alpha = beta is below the gain bound
    let out = cranelab(&["witness", "--sigma", "1", "--m", "1", "--alpha", "1", "--beta", "1"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha >= beta"));

    let out = cranelab(&["witness", "--sigma", "1", "--m", "1", "--beta", "1"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn empty_region_gives_header_only() {
    let mut config = short(presets::convergence(), 1.0, 20);
    config.spectrum.region = Some(Rect::new((1.0, 1.0), (-1.0, 1.0)));
    let dir = TempDir::new().unwrap();
    let path = write_config(dir.path(), &config);
    let out_dir = dir.path().join("out");
    let out = cranelab(&["spectrum", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_rows(&out_dir.join("roots.csv"));
    assert_eq!(header, ["re", "im", "residual", "multiplicity", "converged", "label"]);
    assert!(rows.is_empty());
}

#[test]
fn witness_spectrum_has_root_at_sigma() {
    let mut config = presets::witness_general();
    config.spectrum.region = Some(Rect::new((-0.5, 1.5), (-2.0, 2.0)));
    let dir = TempDir::new().unwrap();
    let path = write_config(dir.path(), &config);
    let out_dir = dir.path().join("out");
    let out = cranelab(&["spectrum", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let (_, rows) = read_rows(&out_dir.join("witness-general_roots.csv"));
    let sigma = config.params.damping;
    let hit = rows.iter().any(|r| {
        let re: f64 = r[0].parse().unwrap();
        let im: f64 = r[1].parse().unwrap();
        (re - sigma).abs() < 1e-8 && im.abs() < 1e-8
    });
    assert!(hit, "{rows:?}");
    assert!(rows.iter().any(|r| r[5] == "equilibrium mode"));
}

#[test]
fn sweep_matrix_shape() {
    let mut config = short(presets::convergence(), 1.0, 20);
    let sweep = config.sweep.as_mut().unwrap();
    sweep.axis1.count = 3;
    sweep.axis2.count = 2;
    config.spectrum.region = Some(Rect::new((-2.0, 1.0), (-6.0, 6.0)));
    let dir = TempDir::new().unwrap();
    let path = write_config(dir.path(), &config);
    let out_dir = dir.path().join("out");
    let out = cranelab(&["sweep", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_rows(&out_dir.join("sweep.csv"));
    assert_eq!(header.len(), 3);
    assert_eq!(header[0], "delay_gain\\delay");
    assert_eq!(rows.len(), 3);
}

#[test]
fn presets_print_as_loadable_json() {
    for name in PRESET_NAMES {
        let out = cranelab(&["preset", name]);
        assert_eq!(code(&out), 0);
        let config = ScenarioConfig::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
        assert_eq!(config, presets::preset(name).unwrap());
    }
}

#[test]
fn shipped_schema_is_current() {
    let docs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/config.schema.json");
    let shipped: serde_json::Value = serde_json::from_str(&fs::read_to_string(docs).unwrap()).unwrap();
    let current: serde_json::Value = serde_json::from_str(&config_schema()).unwrap();
    assert_eq!(shipped, current, "regenerate with `cranelab schema`");
}

#[test]
fn shipped_examples_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= PRESET_NAMES.len());
}
