use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use spectr_cli::output::read_spectrum_csv;
use spectr_core::linalg::{c, matrix_to_pairs};
use spectr_core::random::{random_instance, seeded};
use spectr_core::{
    gamma_apply, solve, CMat, CovarianceInPGamma, DualVariable, Metric, RangeGammaBasis, SolveOptions, SpectralDensity,
    SpectrumRole, StateSpaceFilter,
};
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn spectr(args: &[&str]) -> Run {
    spectr_with_threads(args, "2")
}

fn spectr_with_threads(args: &[&str], threads: &str) -> Run {
    let Output { status, stdout, stderr } =
        Command::new(env!("CARGO_BIN_EXE_spectr")).args(args).env("SPECTR_THREADS", threads).output().expect("spawn spectr");
    Run {
        code: status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&stdout).into_owned(),
        stderr: String::from_utf8_lossy(&stderr).into_owned(),
    }
}

fn write_problem(dir: &TempDir, value: &Value) -> PathBuf {
    let path = dir.path().join("problem.json");
    fs::write(&path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
    path
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn scalar(x: f64) -> CMat {
    CMat::from_element(1, 1, c(x, 0.0))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn first_order() -> Value {
    json!({"A": [[[0.5, 0.0]]], "B": [[[1.0, 0.0]]]})
}

fn two_state_filter() -> StateSpaceFilter {
    let a = CMat::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.2, 0.0), c(0.0, 0.0), c(-0.3, 0.0)]);
    let b = CMat::from_row_slice(2, 1, &[c(1.0, 0.0), c(1.0, 0.0)]);
    StateSpaceFilter::new(a, b).unwrap()
}

/// A two-state scalar problem whose Σ is the covariance of white input.
fn two_state_problem(extra: Value) -> Value {
    let filter = two_state_filter();
    let mut v = json!({
        "A": matrix_to_pairs(filter.a()),
        "B": matrix_to_pairs(filter.b()),
        "Sigma": matrix_to_pairs(filter.lyapunov_sigma().as_matrix()),
        "Psi": {"grid": (0..256).map(|k| 1.2 + 0.6 * (std::f64::consts::TAU * k as f64 / 256.0).sin()).collect::<Vec<_>>()},
    });
    v.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
    v
}

#[test]
fn feasibility_accepts_gamma_of_identity() {
    let dir = TempDir::new().unwrap();
    let filter = two_state_filter();
    let problem = write_problem(
        &dir,
        &json!({
            "A": matrix_to_pairs(filter.a()),
            "B": matrix_to_pairs(filter.b()),
            "Sigma": matrix_to_pairs(filter.lyapunov_sigma().as_matrix()),
        }),
    );
    let out = dir.path().join("out");
    let run = spectr(&["feasibility", p(&problem), "--output", p(&out)]);
    assert_eq!(run.code, 0, "{}{}", run.stdout, run.stderr);
    assert!(run.stdout.contains("verdict: feasible"));
    let cert = read_json(&out.join("certificate.json"));
    assert_eq!(cert["feasible"], true);
    assert!(cert["equation_residual"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn feasibility_rejects_negative_scalar() {
    let dir = TempDir::new().unwrap();
    let mut v = first_order();
    v["Sigma"] = json!([[[-1.0, 0.0]]]);
    let problem = write_problem(&dir, &v);
    let run = spectr(&["feasibility", p(&problem)]);
    assert_eq!(run.code, 2);
    assert!(run.stdout.contains("not positive definite"), "{}", run.stdout);
}

#[test]
fn missing_field_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let problem = write_problem(&dir, &json!({"A": [[[0.5, 0.0]]], "Sigma": [[[1.0, 0.0]]]}));
    let run = spectr(&["feasibility", p(&problem)]);
    assert_eq!(run.code, 1);
    assert!(run.stderr.contains("`B`"), "{}", run.stderr);
}

#[test]
fn unknown_field_reports_its_path() {
    let dir = TempDir::new().unwrap();
    let mut v = first_order();
    v["solver"] = json!({"tolerance": 1e-9});
    let problem = write_problem(&dir, &v);
    let run = spectr(&["feasibility", p(&problem)]);
    assert_eq!(run.code, 1);
    assert!(run.stderr.contains("solver.tolerance"), "{}", run.stderr);
}

#[test]
fn missing_problem_file_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let run = spectr(&["feasibility", p(&dir.path().join("absent.json"))]);
    assert_eq!(run.code, 1);
}

#[test]
fn kl_scalar_optimum_is_constant() {
    let dir = TempDir::new().unwrap();
    let problem = write_problem(&dir, &json!({"A": [[[0.0, 0.0]]], "B": [[[1.0, 0.0]]], "Sigma": [[[4.0, 0.0]]], "Psi": "white"}));
    let out = dir.path().join("out");
    let run = spectr(&["solve", p(&problem), "--metric", "kl", "--output", p(&out)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let (thetas, samples) = read_spectrum_csv(&fs::read_to_string(out.join("spectrum.csv")).unwrap()).unwrap();
    assert_eq!(thetas.len(), 512);
    for s in samples {
        assert!((s[(0, 0)].re - 4.0).abs() <= 1e-10 && s[(0, 0)].im == 0.0);
    }
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["solver"]["converged"], true);
    assert_eq!(report["metric"], "kl");
}

#[test]
fn kl_refuses_multivariable_input() {
    let dir = TempDir::new().unwrap();
    let problem = write_problem(
        &dir,
        &json!({
            "A": [[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.2, 0.0]]],
            "B": [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]],
            "Sigma": [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]],
        }),
    );
    let run = spectr(&["solve", p(&problem), "--metric", "kl", "--output", p(&dir.path().join("out"))]);
    assert_eq!(run.code, 1);
    assert!(run.stderr.contains("Kullback-Leibler approximation is scalar-only"), "{}", run.stderr);
}

#[test]
fn hellinger_dual_vanishes_when_prior_matches() {
    let dir = TempDir::new().unwrap();
    let inst = random_instance(&mut seeded(21), 3, 2, 128).unwrap();
    let psi_value = CMat::from_row_slice(2, 2, &[c(1.5, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(1.0, 0.0)]);
    let psi = SpectralDensity::constant(&psi_value, 128, SpectrumRole::Prior).unwrap();
    let sigma = gamma_apply(&inst.grid, &psi).unwrap();
    let problem = write_problem(
        &dir,
        &json!({
            "A": matrix_to_pairs(inst.filter.a()),
            "B": matrix_to_pairs(inst.filter.b()),
            "Sigma": matrix_to_pairs(sigma.as_matrix()),
            "Psi": {"constant": matrix_to_pairs(&psi_value)},
            "grid_points": 128,
        }),
    );
    let out = dir.path().join("out");
    let run = spectr(&["solve", p(&problem), "--metric", "hellinger", "--output", p(&out)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let dual: DualVariable = serde_json::from_slice(&fs::read(out.join("dual.json")).unwrap()).unwrap();
    assert!(dual.coordinates.iter().all(|x| x.abs() <= 1e-8), "{:?}", dual.coordinates);
}

#[test]
fn infeasible_sigma_exits_two_and_suggests_estimate() {
    let dir = TempDir::new().unwrap();
    let mut v = first_order();
    v["Sigma"] = json!([[[-2.0, 0.0]]]);
    let problem = write_problem(&dir, &v);
    let run = spectr(&["solve", p(&problem), "--metric", "hellinger", "--output", p(&dir.path().join("out"))]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("estimate"), "{}", run.stderr);
}

#[test]
fn iteration_cap_exits_three_with_artifacts() {
    let dir = TempDir::new().unwrap();
    let problem = write_problem(&dir, &two_state_problem(json!({})));
    let out = dir.path().join("out");
    let run = spectr(&["solve", p(&problem), "--metric", "kl", "--max-iter", "1", "--output", p(&out)]);
    assert_eq!(run.code, 3, "{}", run.stderr);
    assert_eq!(read_json(&out.join("report.json"))["solver"]["converged"], false);
    assert!(out.join("spectrum.csv").exists() && out.join("dual.json").exists());
}

#[test]
fn written_artifacts_reload_exactly() {
    let dir = TempDir::new().unwrap();
    let problem = write_problem(&dir, &two_state_problem(json!({"grid_points": 256})));
    let out = dir.path().join("out");
    let run = spectr(&["solve", p(&problem), "--metric", "kl", "--output", p(&out)]);
    assert_eq!(run.code, 0, "{}", run.stderr);

    let filter = two_state_filter();
    let grid = filter.eval_transfer(256).unwrap();
    let basis = RangeGammaBasis::compute(&grid);
    let sigma = CovarianceInPGamma::certify(&filter, filter.lyapunov_sigma(), &basis).unwrap();
    let psi = SpectralDensity::from_fn(256, SpectrumRole::Prior, |t| {
        let k = (t * 256.0 / std::f64::consts::TAU).round();
        scalar(1.2 + 0.6 * (std::f64::consts::TAU * k / 256.0).sin())
    })
    .unwrap();
    let sol = solve(Metric::KullbackLeibler, &grid, &basis, &sigma, &psi, &SolveOptions::default()).unwrap();

    let (thetas, samples) = read_spectrum_csv(&fs::read_to_string(out.join("spectrum.csv")).unwrap()).unwrap();
    assert_eq!(thetas.as_slice(), grid.thetas());
    assert!(thetas.windows(2).all(|w| w[1] > w[0]));
    for (a, b) in samples.iter().zip(sol.spectrum.samples()) {
        assert!((a - b).norm() <= 1e-15 * b.norm());
    }
    let dual: DualVariable = serde_json::from_slice(&fs::read(out.join("dual.json")).unwrap()).unwrap();
    assert_eq!(dual, sol.dual);
}

#[test]
fn doubling_the_grid_changes_the_spectrum_smoothly() {
    let dir = TempDir::new().unwrap();
    let mut v = two_state_problem(json!({}));
    v["Psi"] = json!({"constant": 1.5});
    let problem = write_problem(&dir, &v);
    let load = |k: &str| {
        let out = dir.path().join(format!("out{k}"));
        let run = spectr(&["solve", p(&problem), "--metric", "hellinger", "--grid", k, "--output", p(&out)]);
        assert_eq!(run.code, 0, "{}", run.stderr);
        read_spectrum_csv(&fs::read_to_string(out.join("spectrum.csv")).unwrap()).unwrap().1
    };
    let (coarse, fine) = (load("512"), load("1024"));
    for (k, s) in coarse.iter().enumerate() {
        let t = &fine[2 * k];
        assert!((s - t).norm() <= 1e-6 * t.norm(), "k={k}");
    }
}

#[test]
fn estimate_from_synthesis_recovers_lyapunov_covariance() {
    let dir = TempDir::new().unwrap();
    let mut v = first_order();
    v["synthesis"] = json!({"phi_true": "white", "samples": 16384, "seed": 7});
    let problem = write_problem(&dir, &v);
    let out = dir.path().join("out");
    let run = spectr(&["estimate", p(&problem), "--metric", "hellinger", "--output", p(&out)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let bar = read_json(&out.join("sigma_bar.json"));
    let value = bar["sigma"][0][0][0].as_f64().unwrap();
    assert!((value - 4.0 / 3.0).abs() <= 0.05 * 4.0 / 3.0, "{value}");
    assert_eq!(bar["certificate"]["feasible"], true);
    assert!(bar["repair"]["method"].is_string());
    for name in ["sigma_hat.json", "spectrum.csv", "report.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
    assert_eq!(read_json(&out.join("report.json"))["estimation"]["seed"], 7);
}

#[test]
fn estimate_reads_a_data_file() {
    let dir = TempDir::new().unwrap();
    let mut rows = String::from("y0_re,y0_im\n");
    for s in 0..400 {
        let t = s as f64;
        rows.push_str(&format!("{},{}\n", (0.7 * t).sin(), (1.3 * t).cos()));
    }
    fs::write(dir.path().join("y.csv"), rows).unwrap();
    let mut v = first_order();
    v["data"] = json!("y.csv");
    let problem = write_problem(&dir, &v);
    let out = dir.path().join("out");
    let run = spectr(&["estimate", p(&problem), "--metric", "kl", "--output", p(&out)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["estimation"]["samples"], 400);
    assert_eq!(report["estimation"]["burn_in"], 100);
}

#[test]
fn estimate_with_too_few_samples_fails() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("y.csv"), "y0_re,y0_im\n1.0,0.0\n").unwrap();
    let mut v = two_state_problem(json!({}));
    v.as_object_mut().unwrap().remove("Sigma");
    v["data"] = json!("y.csv");
    let problem = write_problem(&dir, &v);
    let run = spectr(&["estimate", p(&problem), "--metric", "kl", "--output", p(&dir.path().join("out"))]);
    assert_eq!(run.code, 1, "{}", run.stderr);
}

#[test]
fn estimate_rejects_a_wrong_data_header() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("y.csv"), "re,im\n1.0,0.0\n").unwrap();
    let mut v = first_order();
    v["data"] = json!("y.csv");
    let problem = write_problem(&dir, &v);
    let run = spectr(&["estimate", p(&problem), "--metric", "kl", "--output", p(&dir.path().join("out"))]);
    assert_eq!(run.code, 1);
    assert!(run.stderr.contains("y0_re,y0_im"), "{}", run.stderr);
}

#[test]
fn continuity_table_decays() {
    let dir = TempDir::new().unwrap();
    let problem = write_problem(&dir, &two_state_problem(json!({})));
    let out = dir.path().join("out");
    let run = spectr(&["experiment", "continuity", p(&problem), "--metric", "kl", "--seed", "4", "--output", p(&out)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let summary = read_json(&out.join("summary.json"));
    assert!(summary["dual_decay_ratio"].as_f64().unwrap() <= 0.1, "{summary}");
    assert!(summary["primal_decay_ratio"].as_f64().unwrap() <= 0.1, "{summary}");
    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 5 + 1);
}

#[test]
fn continuity_with_one_t_has_no_ratios() {
    let dir = TempDir::new().unwrap();
    let problem = write_problem(&dir, &two_state_problem(json!({})));
    let out = dir.path().join("out");
    let run = spectr(&[
        "experiment", "continuity", p(&problem), "--metric", "hellinger", "--t-list", "0.01", "--output", p(&out),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let summary = read_json(&out.join("summary.json"));
    assert!(summary["dual_decay_ratio"].is_null() && summary["primal_decay_ratio"].is_null());
    assert!(summary["dual_slope"].is_null());
    // header, the perturbed row and the baseline
    assert_eq!(fs::read_to_string(out.join("table.csv")).unwrap().lines().count(), 3);
}

#[test]
fn consistency_median_error_shrinks() {
    let dir = TempDir::new().unwrap();
    let mut v = first_order();
    v["synthesis"] = json!({"phi_true": {"constant": 2.0}, "samples": 1024});
    v["Psi"] = json!("white");
    let problem = write_problem(&dir, &v);
    let out = dir.path().join("out");
    let run = spectr(&[
        "experiment", "consistency", p(&problem), "--metric", "kl", "--n-list", "256,16384", "--trials", "20", "--seed",
        "11", "--output", p(&out),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let summary = read_json(&out.join("summary.json"));
    assert!(summary["median_ratio"].as_f64().unwrap() <= 0.3, "{summary}");
    assert_eq!(fs::read_to_string(out.join("table.csv")).unwrap().lines().count(), 1 + 40);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let mut v = first_order();
    v["synthesis"] = json!({"phi_true": "white", "samples": 4096, "seed": 3});
    let problem = write_problem(&dir, &v);
    let run_once = |name: &str| {
        let out = dir.path().join(name);
        assert_eq!(spectr(&["estimate", p(&problem), "--metric", "kl", "--output", p(&out)]).code, 0);
        ["sigma_hat.json", "sigma_bar.json", "spectrum.csv", "dual.json", "report.json"]
            .map(|f| fs::read(out.join(f)).unwrap())
    };
    assert_eq!(run_once("a"), run_once("b"));
}

#[test]
fn experiment_output_does_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let mut v = first_order();
    v["synthesis"] = json!({"phi_true": {"constant": 2.0}, "samples": 1024});
    let problem = write_problem(&dir, &v);
    let tables = ["1", "4"].map(|threads| {
        let out = dir.path().join(format!("threads{threads}"));
        let args = [
            "experiment", "consistency", p(&problem), "--metric", "hellinger", "--n-list", "256,1024", "--trials", "6",
            "--output", p(&out),
        ];
        assert_eq!(spectr_with_threads(&args, threads).code, 0);
        ["table.csv", "summary.json"].map(|f| fs::read(out.join(f)).unwrap())
    });
    assert_eq!(tables[0], tables[1]);
}
