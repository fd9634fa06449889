use rayon::prelude::*;
use serde::Serialize;

use super::{default_burn_in, run_state_recursion, sample_covariance, DEFAULT_TAPS};
use super::synthesis::ProcessSynthesizer;
use crate::circle::{FrequencyGrid, StateSpaceFilter};
use crate::error::{Error, Result};
use crate::gamma::{gamma_apply, nearest_feasible, CovarianceInPGamma, RangeGammaBasis};
use crate::linalg::HermitianMatrix;
use crate::solver::{solve, Metric, SolveOptions, Solution};
use crate::spectrum::SpectralDensity;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Ok,
    NotConverged,
    Infeasible,
    Failed,
}

impl RowStatus {
    fn of(solution: &Solution) -> Self {
        if solution.report.converged {
            RowStatus::Ok
        } else {
            RowStatus::NotConverged
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuityRow {
    pub t: f64,
    /// `‖Λ̂(Σ+tΔ) - Λ̂(Σ)‖_F`.
    pub dual_error: Option<f64>,
    /// `max_k ‖Φ̂(Σ+tΔ) - Φ̂(Σ)‖₂`.
    pub primal_error: Option<f64>,
    pub iterations: Option<usize>,
    pub status: RowStatus,
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuityTable {
    pub metric: Metric,
    /// Sorted by decreasing `t`; the `t = 0` baseline comes last.
    pub rows: Vec<ContinuityRow>,
    /// Error at the smallest positive `t` over error at the largest.
    pub dual_decay_ratio: Option<f64>,
    pub primal_decay_ratio: Option<f64>,
    /// Least-squares slope of `log(dual error)` against `log t`.
    pub dual_slope: Option<f64>,
    pub dual_monotone: bool,
    pub primal_monotone: bool,
}

impl ContinuityTable {
    pub fn perturbed_rows(&self) -> impl Iterator<Item = &ContinuityRow> {
        self.rows.iter().filter(|r| r.t > 0.0)
    }
}

/// Solves at `Σ` and at `Σ + tΔ` for each `t`, warm-starting every
/// perturbed solve from the baseline optimum. Perturbations that leave
/// P_Γ are kept as `infeasible` rows; the call fails only if none is
/// feasible.
#[allow(clippy::too_many_arguments)]
pub fn continuity_experiment(
    filter: &StateSpaceFilter,
    grid: &FrequencyGrid,
    basis: &RangeGammaBasis,
    sigma: &CovarianceInPGamma,
    psi: &SpectralDensity,
    direction: &HermitianMatrix,
    t_list: &[f64],
    metric: Metric,
    options: &SolveOptions,
) -> Result<ContinuityTable> {
    if t_list.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::Numerical("t-list entries must be positive and finite".into()));
    }
    let base = solve(metric, grid, basis, sigma, psi, options)?;
    let warm = SolveOptions { initial: Some(base.dual.coordinates.clone()), ..options.clone() };

    let mut ts = t_list.to_vec();
    ts.sort_by(|a, b| b.total_cmp(a));
    ts.dedup();

    let mut rows: Vec<ContinuityRow> = ts
        .par_iter()
        .map(|&t| {
            let perturbed = sigma.sigma() + &(direction * t);
            let certified = match CovarianceInPGamma::certify(filter, perturbed, basis) {
                Ok(s) => s,
                Err(e) => return failed_row(t, RowStatus::Infeasible, e),
            };
            match solve(metric, grid, basis, &certified, psi, &warm) {
                Ok(sol) => ContinuityRow {
                    t,
                    dual_error: Some(coordinate_distance(&sol.dual.coordinates, &base.dual.coordinates)),
                    primal_error: sol.spectrum.sup_distance(&base.spectrum).ok(),
                    iterations: Some(sol.report.iterations),
                    status: RowStatus::of(&sol),
                    message: None,
                },
                Err(e) => failed_row(t, RowStatus::Failed, e),
            }
        })
        .collect();
    if rows.iter().all(|r| r.status == RowStatus::Infeasible) {
        return Err(Error::InfeasiblePerturbation);
    }
    rows.push(ContinuityRow {
        t: 0.0,
        dual_error: Some(0.0),
        primal_error: Some(0.0),
        iterations: Some(base.report.iterations),
        status: RowStatus::of(&base),
        message: None,
    });

    let measured = |f: fn(&ContinuityRow) -> Option<f64>| -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|r| r.t > 0.0 && r.status == RowStatus::Ok)
            .filter_map(|r| f(r).map(|e| (r.t, e)))
            .collect()
    };
    let dual = measured(|r| r.dual_error);
    let primal = measured(|r| r.primal_error);
    Ok(ContinuityTable {
        metric,
        dual_decay_ratio: decay_ratio(&dual),
        primal_decay_ratio: decay_ratio(&primal),
        dual_slope: log_log_slope(&dual),
        dual_monotone: nearly_monotone(&dual),
        primal_monotone: nearly_monotone(&primal),
        rows,
    })
}

fn failed_row(t: f64, status: RowStatus, e: Error) -> ContinuityRow {
    ContinuityRow { t, dual_error: None, primal_error: None, iterations: None, status, message: Some(e.to_string()) }
}

fn coordinate_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Last over first of `(t, error)` pairs listed by decreasing `t`.
fn decay_ratio(points: &[(f64, f64)]) -> Option<f64> {
    match (points.first(), points.last()) {
        (Some(first), Some(last)) if points.len() >= 2 && first.1 > 0.0 => Some(last.1 / first.1),
        _ => None,
    }
}

pub(crate) fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points.iter().filter(|(t, e)| *t > 0.0 && *e > 0.0).map(|(t, e)| (t.ln(), e.ln())).collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Errors listed by decreasing `t` should not increase. One increase of at
/// most 5% (relative) is tolerated.
pub(crate) fn nearly_monotone(points: &[(f64, f64)]) -> bool {
    let mut inversions = 0;
    for w in points.windows(2) {
        let (prev, next) = (w[0].1, w[1].1);
        if next > prev {
            if next - prev > 0.05 * prev.abs().max(next.abs()) {
                return false;
            }
            inversions += 1;
        }
    }
    inversions <= 1
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyConfig {
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub taps: usize,
    /// Defaults to `max(10n, 100)`, clamped so that at least `n` states remain.
    pub burn_in: Option<usize>,
    pub solver: SolveOptions,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self {
            n_list: vec![1 << 8, 1 << 10, 1 << 12, 1 << 14],
            trials: 20,
            seed: 0,
            taps: DEFAULT_TAPS,
            burn_in: None,
            solver: SolveOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyRow {
    pub samples: usize,
    pub trial: usize,
    pub seed: u64,
    /// `‖Σ̂ - Σ_true‖_F`.
    pub sigma_hat_error: Option<f64>,
    /// `‖Σ̄ - Σ_true‖_F`.
    pub sigma_bar_error: Option<f64>,
    /// `‖Σ̂ - Π(Σ̂)‖_F`.
    pub projection_residual: Option<f64>,
    pub blend_weight: Option<f64>,
    /// `max_k ‖Φ̂(Σ̄) - Φ̂(Σ_true)‖₂`.
    pub primal_error: Option<f64>,
    pub iterations: Option<usize>,
    pub status: RowStatus,
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencySummary {
    pub samples: usize,
    pub completed: usize,
    pub failed: usize,
    pub median_primal_error: Option<f64>,
    pub max_primal_error: Option<f64>,
    pub median_sigma_hat_error: Option<f64>,
    pub median_sigma_bar_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyTable {
    pub metric: Metric,
    pub master_seed: u64,
    pub trials: usize,
    /// Ordered by `(samples, trial)`.
    pub rows: Vec<ConsistencyRow>,
    pub summary: Vec<ConsistencySummary>,
    /// Median primal error at the largest `N` over that at the smallest.
    pub median_ratio: Option<f64>,
    pub primal_median_decreasing: bool,
    pub sigma_bar_median_decreasing: bool,
}

/// Monte-Carlo estimate of how fast `Φ̂(Σ̄)` approaches `Φ̂(Σ_true)` as
/// the record length grows. Trial `i` draws its noise from seed
/// `master ^ i`; failed trials become rows with a status instead of
/// aborting the run.
pub fn consistency_experiment(
    filter: &StateSpaceFilter,
    grid: &FrequencyGrid,
    basis: &RangeGammaBasis,
    phi_true: &SpectralDensity,
    psi: &SpectralDensity,
    metric: Metric,
    config: &ConsistencyConfig,
) -> Result<ConsistencyTable> {
    let n = filter.state_dim();
    let sigma_true = CovarianceInPGamma::certify(filter, gamma_apply(grid, phi_true)?, basis)?;
    let reference = solve(metric, grid, basis, &sigma_true, psi, &config.solver)?;
    let synth = ProcessSynthesizer::new(phi_true, config.taps)?;

    let mut n_list = config.n_list.clone();
    n_list.sort_unstable();
    n_list.dedup();
    if let Some(&smallest) = n_list.first() {
        if smallest < n + 1 {
            return Err(Error::TooFewSamples { available: smallest, required: n + 1 });
        }
    }
    let jobs: Vec<(usize, usize)> =
        n_list.iter().flat_map(|&len| (0..config.trials).map(move |trial| (len, trial))).collect();

    let rows: Vec<ConsistencyRow> = jobs
        .par_iter()
        .map(|&(len, trial)| {
            let seed = config.seed ^ trial as u64;
            let mut row = ConsistencyRow {
                samples: len,
                trial,
                seed,
                sigma_hat_error: None,
                sigma_bar_error: None,
                projection_residual: None,
                blend_weight: None,
                primal_error: None,
                iterations: None,
                status: RowStatus::Failed,
                message: None,
            };
            let outcome = (|| -> Result<()> {
                let y = synth.generate(len, seed);
                let traj = run_state_recursion(filter, y, None)?;
                let burn = config.burn_in.unwrap_or_else(|| default_burn_in(n)).min(len - n);
                let sigma_hat = sample_covariance(&traj, burn)?;
                row.sigma_hat_error = Some((&sigma_hat - sigma_true.sigma()).frobenius());
                let sigma_bar = match nearest_feasible(&sigma_hat, basis, filter) {
                    Ok(s) => s,
                    Err(e) => {
                        row.status = RowStatus::Infeasible;
                        return Err(e);
                    }
                };
                row.sigma_bar_error = Some((sigma_bar.sigma() - sigma_true.sigma()).frobenius());
                if let Some(info) = sigma_bar.repair() {
                    row.projection_residual = Some(info.projection_residual);
                    row.blend_weight = Some(info.blend_weight);
                }
                let sol = solve(metric, grid, basis, &sigma_bar, psi, &config.solver)?;
                row.primal_error = Some(sol.spectrum.sup_distance(&reference.spectrum)?);
                row.iterations = Some(sol.report.iterations);
                row.status = RowStatus::of(&sol);
                Ok(())
            })();
            if let Err(e) = outcome {
                row.message = Some(e.to_string());
            }
            row
        })
        .collect();

    let summary: Vec<ConsistencySummary> = n_list
        .iter()
        .map(|&len| {
            let group: Vec<&ConsistencyRow> = rows.iter().filter(|r| r.samples == len).collect();
            let ok: Vec<&&ConsistencyRow> = group.iter().filter(|r| r.status == RowStatus::Ok).collect();
            let primal: Vec<f64> = ok.iter().filter_map(|r| r.primal_error).collect();
            ConsistencySummary {
                samples: len,
                completed: ok.len(),
                failed: group.len() - ok.len(),
                median_primal_error: median(&primal),
                max_primal_error: primal.iter().copied().reduce(f64::max),
                median_sigma_hat_error: median(&group.iter().filter_map(|r| r.sigma_hat_error).collect::<Vec<_>>()),
                median_sigma_bar_error: median(&group.iter().filter_map(|r| r.sigma_bar_error).collect::<Vec<_>>()),
            }
        })
        .collect();

    let median_ratio = match (summary.first(), summary.last()) {
        (Some(first), Some(last)) if summary.len() >= 2 => match (first.median_primal_error, last.median_primal_error) {
            (Some(a), Some(b)) if a > 0.0 => Some(b / a),
            _ => None,
        },
        _ => None,
    };
    let primal_median_decreasing = strictly_decreasing(summary.iter().map(|s| s.median_primal_error));
    let sigma_bar_median_decreasing = strictly_decreasing(summary.iter().map(|s| s.median_sigma_bar_error));

    Ok(ConsistencyTable {
        metric,
        master_seed: config.seed,
        trials: config.trials,
        rows,
        summary,
        median_ratio,
        primal_median_decreasing,
        sigma_bar_median_decreasing,
    })
}

pub(crate) fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) { 0.5 * (v[mid - 1] + v[mid]) } else { v[mid] })
}

fn strictly_decreasing(values: impl Iterator<Item = Option<f64>>) -> bool {
    let v: Option<Vec<f64>> = values.collect();
    match v {
        Some(v) if v.len() >= 2 => v.windows(2).all(|w| w[1] < w[0]),
        _ => false,
    }
}
