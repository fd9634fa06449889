use std::fs;
use std::path::Path;

use serde::Serialize;
use spectr_core::estimation::{
    consistency_experiment, continuity_experiment, default_burn_in, run_state_recursion, sample_covariance,
    ConsistencyConfig, ConsistencySummary, ProcessSynthesizer, RowStatus, Sample, DEFAULT_TAPS,
};
use spectr_core::gamma::{gamma_apply, RepairInfo};
use spectr_core::linalg::{c, matrix_to_pairs};
use spectr_core::random::{random_range_direction, seeded};
use spectr_core::{
    feasibility, nearest_feasible, solve, CovarianceInPGamma, Error as CoreError, FeasibilityCertificate, FrequencyGrid,
    HermitianMatrix, Metric, RangeGammaBasis, Solution, SolveReport, SpectrumRole, StateSpaceFilter,
};

use crate::error::{CliError, CliResult, EXIT_INFEASIBLE, EXIT_OK};
use crate::output::{atomic_write, json_bytes, spectrum_csv, table_csv, write_json};
use crate::problem::{spectrum_from_spec, LoadedProblem};

pub const DEFAULT_T_LIST: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];

/// Filter, grid and basis shared by every command.
struct Setup {
    problem: LoadedProblem,
    filter: StateSpaceFilter,
    grid: FrequencyGrid,
    basis: RangeGammaBasis,
}

impl Setup {
    fn new(path: &Path, grid_flag: Option<usize>) -> CliResult<Self> {
        let problem = LoadedProblem::load(path)?;
        let filter = problem.filter()?;
        let grid = filter.eval_transfer(problem.grid_points(grid_flag))?;
        let basis = RangeGammaBasis::compute(&grid);
        Ok(Self { problem, filter, grid, basis })
    }

    fn m(&self) -> usize {
        self.filter.input_dim()
    }

    fn k(&self) -> usize {
        self.grid.len()
    }

    fn certify(&self, sigma: HermitianMatrix) -> CliResult<CovarianceInPGamma> {
        if sigma.dim() != self.filter.state_dim() {
            return Err(CliError::Invalid(format!(
                "Sigma is {0}x{0} but the filter has n = {1}",
                sigma.dim(),
                self.filter.state_dim()
            )));
        }
        CovarianceInPGamma::certify(&self.filter, sigma, &self.basis).map_err(|e| match e {
            CoreError::Infeasible(cert) => CliError::Infeasible(format!(
                "Sigma is not a feasible state covariance ({}); `spectr estimate` repairs estimates into the feasible set",
                verdict(&cert)
            )),
            other => other.into(),
        })
    }
}

fn check_metric(metric: Metric, m: usize) -> CliResult<()> {
    if metric == Metric::KullbackLeibler && m != 1 {
        return Err(CoreError::NotScalar(m).into());
    }
    Ok(())
}

fn verdict(cert: &FeasibilityCertificate) -> String {
    if cert.feasible {
        return "feasible".into();
    }
    let mut reasons = Vec::new();
    if !cert.is_positive_definite() {
        reasons.push(format!("not positive definite (min eigenvalue {:e})", cert.min_eigenvalue));
    }
    if !cert.in_range() {
        reasons.push(format!("not in Range Gamma (projection residual {:e})", cert.projection_residual));
    }
    if cert.h.is_none() {
        reasons.push(format!("covariance equation has no solution H (residual {:e})", cert.equation_residual));
    }
    format!("infeasible: {}", reasons.join("; "))
}

#[derive(Serialize)]
struct FeasibilityReport<'a> {
    verdict: String,
    #[serde(flatten)]
    certificate: &'a FeasibilityCertificate,
}

pub fn cmd_feasibility(problem: &Path, grid: Option<usize>, output: Option<&Path>) -> CliResult<i32> {
    let setup = Setup::new(problem, grid)?;
    let sigma = setup.problem.sigma()?.ok_or_else(|| CliError::Invalid("feasibility requires Sigma".into()))?;
    if sigma.dim() != setup.filter.state_dim() {
        return Err(CliError::Invalid(format!("Sigma is {0}x{0} but the filter has n = {1}", sigma.dim(), setup.filter.state_dim())));
    }
    let cert = feasibility(&setup.filter, &sigma, &setup.basis)?;
    let report = FeasibilityReport { verdict: verdict(&cert), certificate: &cert };
    println!("verdict: {}", report.verdict);
    println!("equation residual: {:e}", cert.equation_residual);
    println!("projection residual: {:e}", cert.projection_residual);
    println!("min eigenvalue: {:e}", cert.min_eigenvalue);
    match &cert.h {
        Some(h) => println!("H: {}", serde_json::to_string(&matrix_to_pairs(h)).unwrap_or_default()),
        None => println!("H: none"),
    }
    if let Some(dir) = output {
        write_json(&dir.join("certificate.json"), &report)?;
    }
    Ok(if cert.feasible { EXIT_OK } else { EXIT_INFEASIBLE })
}

#[derive(Serialize)]
struct RunReport<'a> {
    metric: Metric,
    grid_points: usize,
    state_dim: usize,
    input_dim: usize,
    range_dim: usize,
    constraint_residual: f64,
    relative_constraint_residual: f64,
    solver: &'a SolveReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimation: Option<EstimationInfo>,
}

#[derive(Clone, Serialize)]
struct EstimationInfo {
    samples: usize,
    burn_in: usize,
    source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

/// Writes `spectrum.csv`, `dual.json`, `report.json`; maps non-convergence
/// to exit 3 once the artifacts are on disk.
fn emit_solution(
    setup: &Setup,
    metric: Metric,
    sigma: &CovarianceInPGamma,
    solution: &Solution,
    estimation: Option<EstimationInfo>,
    output: &Path,
) -> CliResult<i32> {
    let report = RunReport {
        metric,
        grid_points: setup.k(),
        state_dim: setup.filter.state_dim(),
        input_dim: setup.m(),
        range_dim: setup.basis.dim(),
        constraint_residual: solution.constraint_residual,
        relative_constraint_residual: solution.constraint_residual / sigma.sigma().frobenius(),
        solver: &solution.report,
        estimation,
    };
    let files: [(&str, Vec<u8>); 3] = [
        ("spectrum.csv", spectrum_csv(setup.grid.thetas(), &solution.spectrum).into_bytes()),
        ("dual.json", json_bytes(&solution.dual)?),
        ("report.json", json_bytes(&report)?),
    ];
    for (name, bytes) in files {
        atomic_write(&output.join(name), &bytes)?;
    }
    println!("constraint residual: {:e}", solution.constraint_residual);
    println!("iterations: {}", solution.report.iterations);
    if !solution.report.converged {
        return Err(CliError::NotConverged(format!(
            "solver did not converge after {} iterations (gradient norm {:e}); artifacts written with converged=false",
            solution.report.iterations, solution.report.gradient_norm
        )));
    }
    Ok(EXIT_OK)
}

pub struct SolveFlags {
    pub metric: Metric,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
}

pub fn cmd_solve(problem: &Path, flags: &SolveFlags, output: &Path) -> CliResult<i32> {
    let setup = Setup::new(problem, flags.grid)?;
    check_metric(flags.metric, setup.m())?;
    let sigma = setup.problem.sigma()?.ok_or_else(|| CliError::Invalid("solve requires Sigma".into()))?;
    let sigma = setup.certify(sigma)?;
    let psi = setup.problem.psi(setup.m(), setup.k())?;
    let options = setup.problem.solve_options(flags.tol, flags.max_iter)?;
    let solution = solve(flags.metric, &setup.grid, &setup.basis, &sigma, &psi, &options)?;
    emit_solution(&setup, flags.metric, &sigma, &solution, None, output)
}

#[derive(Serialize)]
struct SigmaHatFile<'a> {
    samples: usize,
    burn_in: usize,
    sigma: &'a HermitianMatrix,
}

#[derive(Serialize)]
struct SigmaBarFile<'a> {
    sigma: &'a HermitianMatrix,
    repair: Option<&'a RepairInfo>,
    certificate: &'a FeasibilityCertificate,
}

fn read_samples(path: &Path, m: usize) -> CliResult<Vec<Sample>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    let expected: Vec<String> = (0..m).flat_map(|i| [format!("y{i}_re"), format!("y{i}_im")]).collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(CliError::Invalid(format!(
            "{}: expected header {}",
            path.display(),
            expected.join(",")
        )));
    }
    reader
        .records()
        .enumerate()
        .map(|(row, record)| {
            let record = record.map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
            let values = record
                .iter()
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Invalid(format!("{} row {}: {e}", path.display(), row + 1)))?;
            Ok(Sample::from_iterator(m, (0..m).map(|i| c(values[2 * i], values[2 * i + 1]))))
        })
        .collect()
}

pub fn cmd_estimate(problem: &Path, flags: &SolveFlags, output: &Path) -> CliResult<i32> {
    let setup = Setup::new(problem, flags.grid)?;
    check_metric(flags.metric, setup.m())?;
    let (m, n) = (setup.m(), setup.filter.state_dim());
    let (y, source, seed) = match (setup.problem.data_path(), &setup.problem.file.synthesis) {
        (Some(path), _) => (read_samples(&path, m)?, path.display().to_string(), None),
        (None, Some(syn)) => {
            let phi = spectrum_from_spec("synthesis.phi_true", &syn.phi_true, m, setup.k(), SpectrumRole::True)?;
            let seed = flags.seed.unwrap_or(syn.seed);
            let synth = ProcessSynthesizer::new(&phi, syn.taps.unwrap_or(DEFAULT_TAPS))?;
            (synth.generate(syn.samples, seed), "synthesis".to_string(), Some(seed))
        }
        (None, None) => return Err(CliError::Invalid("estimate requires `data` or `synthesis`".into())),
    };
    let count = y.len();
    let burn_in = setup.problem.file.burn_in.unwrap_or_else(|| default_burn_in(n).min(count.saturating_sub(n)));
    let traj = run_state_recursion(&setup.filter, y, None)?;
    let sigma_hat = sample_covariance(&traj, burn_in)?;
    let sigma_bar = nearest_feasible(&sigma_hat, &setup.basis, &setup.filter)?;

    write_json(&output.join("sigma_hat.json"), &SigmaHatFile { samples: count, burn_in, sigma: &sigma_hat })?;
    write_json(
        &output.join("sigma_bar.json"),
        &SigmaBarFile { sigma: sigma_bar.sigma(), repair: sigma_bar.repair(), certificate: sigma_bar.certificate() },
    )?;

    let psi = setup.problem.psi(m, setup.k())?;
    let options = setup.problem.solve_options(flags.tol, flags.max_iter)?;
    let solution = solve(flags.metric, &setup.grid, &setup.basis, &sigma_bar, &psi, &options)?;
    let info = EstimationInfo { samples: count, burn_in, source, seed };
    emit_solution(&setup, flags.metric, &sigma_bar, &solution, Some(info), output)
}

pub struct ExperimentFlags {
    pub solve: SolveFlags,
    pub t_list: Option<Vec<f64>>,
    pub n_list: Option<Vec<usize>>,
    pub trials: Option<usize>,
}

#[derive(Serialize)]
struct ContinuitySummaryFile {
    kind: &'static str,
    metric: Metric,
    seed: u64,
    t_list: Vec<f64>,
    dual_decay_ratio: Option<f64>,
    primal_decay_ratio: Option<f64>,
    dual_slope: Option<f64>,
    dual_monotone: bool,
    primal_monotone: bool,
    infeasible_rows: usize,
    failed_rows: usize,
}

#[derive(Serialize)]
struct ConsistencySummaryFile<'a> {
    kind: &'static str,
    metric: Metric,
    master_seed: u64,
    trials: usize,
    n_list: Vec<usize>,
    per_n: &'a [ConsistencySummary],
    median_ratio: Option<f64>,
    primal_median_decreasing: bool,
    sigma_bar_median_decreasing: bool,
}

pub fn cmd_continuity(problem: &Path, flags: &ExperimentFlags, output: &Path) -> CliResult<i32> {
    let setup = Setup::new(problem, flags.solve.grid)?;
    check_metric(flags.solve.metric, setup.m())?;
    let spec = &setup.problem.file.experiment;
    let seed = flags.solve.seed.or(spec.seed).unwrap_or(0);
    let t_list = flags.t_list.clone().or_else(|| spec.t_list.clone()).unwrap_or_else(|| DEFAULT_T_LIST.to_vec());
    if t_list.is_empty() {
        return Err(CliError::Invalid("t-list is empty".into()));
    }

    // Sigma from the file, else Γ(Φ_true) of the synthesis spec, else Γ(I)
    let sigma = match (setup.problem.sigma()?, &setup.problem.file.synthesis) {
        (Some(s), _) => s,
        (None, Some(syn)) => {
            let phi = spectrum_from_spec("synthesis.phi_true", &syn.phi_true, setup.m(), setup.k(), SpectrumRole::True)?;
            gamma_apply(&setup.grid, &phi)?
        }
        (None, None) => setup.basis.project(&setup.filter.lyapunov_sigma()),
    };
    let sigma = setup.certify(sigma)?;
    let psi = setup.problem.psi(setup.m(), setup.k())?;
    let options = setup.problem.solve_options(flags.solve.tol, flags.solve.max_iter)?;
    let direction = random_range_direction(&mut seeded(seed), &setup.basis);
    let table = continuity_experiment(
        &setup.filter,
        &setup.grid,
        &setup.basis,
        &sigma,
        &psi,
        &direction,
        &t_list,
        flags.solve.metric,
        &options,
    )?;
    let summary = ContinuitySummaryFile {
        kind: "continuity",
        metric: table.metric,
        seed,
        t_list: table.perturbed_rows().map(|r| r.t).collect(),
        dual_decay_ratio: table.dual_decay_ratio,
        primal_decay_ratio: table.primal_decay_ratio,
        dual_slope: table.dual_slope,
        dual_monotone: table.dual_monotone,
        primal_monotone: table.primal_monotone,
        infeasible_rows: table.rows.iter().filter(|r| r.status == RowStatus::Infeasible).count(),
        failed_rows: table.rows.iter().filter(|r| matches!(r.status, RowStatus::Failed | RowStatus::NotConverged)).count(),
    };
    atomic_write(&output.join("table.csv"), &table_csv(&table.rows)?)?;
    write_json(&output.join("summary.json"), &summary)?;
    println!("dual decay ratio: {}", fmt_opt(summary.dual_decay_ratio));
    println!("primal decay ratio: {}", fmt_opt(summary.primal_decay_ratio));
    Ok(EXIT_OK)
}

pub fn cmd_consistency(problem: &Path, flags: &ExperimentFlags, output: &Path) -> CliResult<i32> {
    let setup = Setup::new(problem, flags.solve.grid)?;
    check_metric(flags.solve.metric, setup.m())?;
    let spec = &setup.problem.file.experiment;
    let syn = setup
        .problem
        .file
        .synthesis
        .as_ref()
        .ok_or_else(|| CliError::Invalid("consistency requires `synthesis.phi_true`".into()))?;
    let phi_true = spectrum_from_spec("synthesis.phi_true", &syn.phi_true, setup.m(), setup.k(), SpectrumRole::True)?;
    let psi = setup.problem.psi(setup.m(), setup.k())?;
    let defaults = ConsistencyConfig::default();
    let config = ConsistencyConfig {
        n_list: flags.n_list.clone().or_else(|| spec.n_list.clone()).unwrap_or(defaults.n_list),
        trials: flags.trials.or(spec.trials).unwrap_or(defaults.trials),
        seed: flags.solve.seed.or(spec.seed).unwrap_or(syn.seed),
        taps: spec.taps.or(syn.taps).unwrap_or(DEFAULT_TAPS),
        burn_in: setup.problem.file.burn_in,
        solver: setup.problem.solve_options(flags.solve.tol, flags.solve.max_iter)?,
    };
    if config.n_list.is_empty() || config.trials == 0 {
        return Err(CliError::Invalid("n-list and trials must be non-empty".into()));
    }
    let table = consistency_experiment(&setup.filter, &setup.grid, &setup.basis, &phi_true, &psi, flags.solve.metric, &config)?;
    let summary = ConsistencySummaryFile {
        kind: "consistency",
        metric: table.metric,
        master_seed: table.master_seed,
        trials: table.trials,
        n_list: table.summary.iter().map(|s| s.samples).collect(),
        per_n: &table.summary,
        median_ratio: table.median_ratio,
        primal_median_decreasing: table.primal_median_decreasing,
        sigma_bar_median_decreasing: table.sigma_bar_median_decreasing,
    };
    atomic_write(&output.join("table.csv"), &table_csv(&table.rows)?)?;
    write_json(&output.join("summary.json"), &summary)?;
    println!("median ratio: {}", fmt_opt(summary.median_ratio));
    Ok(EXIT_OK)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "null".into())
}
