//! Damped Newton minimization over an open convex domain.
//!
//! Steps are halved until the trial point is strictly inside the domain and
//! satisfies the Armijo condition. Close to the optimum the predicted decrease
//! falls below what f64 can resolve in the objective; there a step is also
//! accepted when it reduces the gradient norm without raising the value by
//! more than rounding noise.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Objective with a domain indicator and analytic derivatives.
pub trait DualObjective {
    fn dim(&self) -> usize;
    /// Positive exactly on the (open) domain.
    fn margin(&self, x: &[f64]) -> f64;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<DVector<f64>>;
    fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Absolute gradient-norm tolerance.
    pub gradient_tolerance: f64,
    pub max_iter: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub dual_value: f64,
    pub gradient_tolerance: f64,
    /// Halvings spent in each accepted line search.
    pub backtracks: Vec<usize>,
    /// Domain margin at every iterate, starting point included.
    pub margins: Vec<f64>,
    /// Dual value at every iterate, starting point included.
    pub values: Vec<f64>,
    pub termination: Termination,
    pub converged: bool,
    #[serde(skip)]
    pub wall_time: Duration,
}

pub fn minimize<O: DualObjective + ?Sized>(
    objective: &O,
    start: &[f64],
    options: &NewtonOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let timer = Instant::now();
    let mut x = start.to_vec();
    let margin0 = objective.margin(&x);
    if !(margin0 > 0.0) {
        return Err(Error::DomainViolation { margin: margin0 });
    }
    let mut value = objective.value(&x)?;
    let mut grad = objective.gradient(&x)?;
    let mut report = SolveReport {
        iterations: 0,
        gradient_norm: grad.norm(),
        dual_value: value,
        gradient_tolerance: options.gradient_tolerance,
        backtracks: Vec::new(),
        margins: vec![margin0],
        values: vec![value],
        termination: Termination::MaxIterations,
        converged: false,
        wall_time: Duration::ZERO,
    };

    loop {
        let gnorm = grad.norm();
        report.gradient_norm = gnorm;
        report.dual_value = value;
        if gnorm <= options.gradient_tolerance {
            report.termination = Termination::Converged;
            report.converged = true;
            break;
        }
        if report.iterations >= options.max_iter {
            report.termination = Termination::MaxIterations;
            break;
        }

        let hess = objective.hessian(&x)?;
        let mut step = newton_direction(&hess, &grad);
        let mut slope = grad.dot(&step);
        if !(slope < 0.0) {
            step = -&grad;
            slope = -gnorm * gnorm;
        }
        let noise_regime = -slope <= 1e-10 * (1.0 + value.abs());

        let mut alpha = 1.0;
        let mut halvings = 0;
        let accepted = loop {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + alpha * s).collect();
            let margin = objective.margin(&trial);
            if margin > 0.0 {
                let trial_value = objective.value(&trial)?;
                if trial_value <= value + options.armijo * alpha * slope {
                    break Some((trial, trial_value, margin, None));
                }
                if noise_regime && trial_value <= value + 1e-12 * (1.0 + value.abs()) {
                    let trial_grad = objective.gradient(&trial)?;
                    if trial_grad.norm() < gnorm {
                        break Some((trial, trial_value, margin, Some(trial_grad)));
                    }
                }
            }
            if halvings >= options.max_backtracks {
                break None;
            }
            alpha *= options.backtrack;
            halvings += 1;
        };

        let Some((trial, trial_value, margin, trial_grad)) = accepted else {
            report.termination = Termination::LineSearchFailed;
            break;
        };
        x = trial;
        value = trial_value;
        grad = match trial_grad {
            Some(g) => g,
            None => objective.gradient(&x)?,
        };
        report.iterations += 1;
        report.backtracks.push(halvings);
        report.margins.push(margin);
        report.values.push(value);
    }

    report.wall_time = timer.elapsed();
    Ok((x, report))
}

// Solves H p = -g; shifts the diagonal when H is not numerically positive definite.
fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let sym = (hess + hess.transpose()) * 0.5;
    let mut shift = 0.0;
    let scale = sym.diagonal().amax().max(f64::MIN_POSITIVE);
    for _ in 0..40 {
        let shifted = &sym + DMatrix::identity(sym.nrows(), sym.ncols()) * shift;
        if let Some(chol) = shifted.cholesky() {
            let p = chol.solve(&(-grad));
            if p.iter().all(|v| v.is_finite()) {
                return p;
            }
        }
        shift = if shift == 0.0 { 1e-12 * scale } else { shift * 10.0 };
    }
    -grad
}

#[cfg(test)]
mod tests {
    use super::*;

    // f(x) = Σ (x_i - log x_i), domain x > 0, minimum at x = 1.
    struct LogBarrier;

    impl DualObjective for LogBarrier {
        fn dim(&self) -> usize {
            2
        }
        fn margin(&self, x: &[f64]) -> f64 {
            x.iter().copied().fold(f64::INFINITY, f64::min)
        }
        fn value(&self, x: &[f64]) -> Result<f64> {
            Ok(x.iter().map(|v| v - v.ln()).sum())
        }
        fn gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
            Ok(DVector::from_iterator(2, x.iter().map(|v| 1.0 - 1.0 / v)))
        }
        fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
            Ok(DMatrix::from_diagonal(&DVector::from_iterator(2, x.iter().map(|v| 1.0 / (v * v)))))
        }
    }

    fn options() -> NewtonOptions {
        NewtonOptions { gradient_tolerance: 1e-12, max_iter: 100, armijo: 1e-4, backtrack: 0.5, max_backtracks: 60 }
    }

    #[test]
    fn converges_from_far_start_and_stays_inside() {
        let (x, report) = minimize(&LogBarrier, &[30.0, 1e-3], &options()).unwrap();
        assert!(report.converged);
        assert!((x[0] - 1.0).abs() < 1e-10 && (x[1] - 1.0).abs() < 1e-10);
        assert!(report.margins.iter().all(|m| *m > 0.0));
        assert!(report.values.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn rejects_start_outside_domain() {
        assert!(matches!(minimize(&LogBarrier, &[-1.0, 1.0], &options()), Err(Error::DomainViolation { .. })));
    }

    #[test]
    fn reports_iteration_cap() {
        let opts = NewtonOptions { max_iter: 1, ..options() };
        let (_, report) = minimize(&LogBarrier, &[30.0, 30.0], &opts).unwrap();
        assert!(!report.converged);
        assert_eq!(report.termination, Termination::MaxIterations);
        assert_eq!(report.iterations, 1);
    }
}
