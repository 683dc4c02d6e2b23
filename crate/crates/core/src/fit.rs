//! Dense Levenberg-Marquardt least squares.
//!
//! Problems are small (at most a dozen parameters, a few thousand residuals),
//! so the Jacobian is formed by central differences and the damped normal
//! equations are solved with a Cholesky factorisation.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("fit needs at least {needed} residuals, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("fit did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("residuals are not finite at the initial guess")]
    BadInitialGuess,
    #[error("degenerate data: {0}")]
    Degenerate(String),
}

/// Solver settings.
#[derive(Debug, Clone, Copy)]
pub struct LevenbergMarquardt {
    pub max_iterations: usize,
    /// Relative cost decrease below which an accepted step counts as converged.
    pub tolerance: f64,
}

impl Default for LevenbergMarquardt {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-12,
        }
    }
}

/// Result of a converged fit.
#[derive(Debug, Clone)]
pub struct Solution {
    pub params: Vec<f64>,
    /// Half the sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
    /// Diagonal of `s² (JᵀJ)⁻¹` with `s² = Σr²/(n − p)`, in parameter units.
    pub covariance_diagonal: Vec<f64>,
    pub residual_rms: f64,
}

impl LevenbergMarquardt {
    /// Minimises `½ Σ r_i(p)²`.
    ///
    /// `scales` gives the typical magnitude of each parameter; the solver works
    /// in `p / scale` so that finite-difference steps and damping are balanced.
    /// A residual function may signal an invalid parameter vector by writing a
    /// non-finite value, which makes the step get rejected.
    pub fn minimize<F>(
        &self,
        initial: &[f64],
        scales: &[f64],
        n_residuals: usize,
        residuals: F,
    ) -> Result<Solution, FitError>
    where
        F: Fn(&[f64], &mut [f64]),
    {
        let n_params = initial.len();
        assert_eq!(scales.len(), n_params);
        if n_residuals < n_params {
            return Err(FitError::TooFewPoints {
                needed: n_params,
                got: n_residuals,
            });
        }

        let to_phys =
            |q: &[f64]| -> Vec<f64> { q.iter().zip(scales).map(|(q, s)| q * s).collect() };
        let eval = |q: &[f64], out: &mut [f64]| -> f64 {
            residuals(&to_phys(q), out);
            let c = 0.5 * out.iter().map(|r| r * r).sum::<f64>();
            if c.is_finite() {
                c
            } else {
                f64::INFINITY
            }
        };

        let mut q: Vec<f64> = initial.iter().zip(scales).map(|(p, s)| p / s).collect();
        let mut r = vec![0.0; n_residuals];
        let mut cost = eval(&q, &mut r);
        if !cost.is_finite() {
            return Err(FitError::BadInitialGuess);
        }

        let mut jac = DMatrix::<f64>::zeros(n_residuals, n_params);
        let mut trial_r = vec![0.0; n_residuals];
        let mut lambda = 1e-3;
        let mut converged = false;
        let mut iterations = 0;

        while iterations < self.max_iterations {
            iterations += 1;
            jacobian(&eval, &q, &mut jac, n_residuals);
            let jtj = jac.transpose() * &jac;
            let jtr = jac.transpose() * DVector::from_column_slice(&r);

            let mut accepted = false;
            for _ in 0..40 {
                let mut damped = jtj.clone();
                for i in 0..n_params {
                    damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
                }
                let Some(chol) = damped.cholesky() else {
                    lambda *= 10.0;
                    continue;
                };
                let step = chol.solve(&(-&jtr));
                let trial: Vec<f64> = q.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let trial_cost = eval(&trial, &mut trial_r);
                if trial_cost < cost {
                    let decrease = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                    let step_small =
                        step.norm() <= 1e-12 * (1.0 + DVector::from_column_slice(&q).norm());
                    q = trial;
                    std::mem::swap(&mut r, &mut trial_r);
                    cost = trial_cost;
                    lambda = (lambda * 0.3).max(1e-15);
                    accepted = true;
                    if decrease < self.tolerance || step_small || cost == 0.0 {
                        converged = true;
                    }
                    break;
                }
                lambda *= 10.0;
                if lambda > 1e16 {
                    break;
                }
            }
            if !accepted {
                // No downhill direction left: at a minimum to working precision.
                converged = true;
            }
            if converged {
                break;
            }
        }
        if !converged {
            return Err(FitError::NoConvergence { iterations });
        }

        jacobian(&eval, &q, &mut jac, n_residuals);
        let jtj = jac.transpose() * &jac;
        let dof = (n_residuals - n_params).max(1) as f64;
        let s2 = 2.0 * cost / dof;
        let covariance_diagonal = match jtj.try_inverse() {
            Some(inv) => (0..n_params)
                .map(|i| s2 * inv[(i, i)] * scales[i] * scales[i])
                .collect(),
            None => vec![f64::NAN; n_params],
        };

        Ok(Solution {
            params: to_phys(&q),
            cost,
            iterations,
            covariance_diagonal,
            residual_rms: (2.0 * cost / n_residuals as f64).sqrt(),
        })
    }
}

fn jacobian<E>(eval: &E, q: &[f64], jac: &mut DMatrix<f64>, n_residuals: usize)
where
    E: Fn(&[f64], &mut [f64]) -> f64,
{
    let mut plus = vec![0.0; n_residuals];
    let mut minus = vec![0.0; n_residuals];
    let mut probe = q.to_vec();
    for j in 0..q.len() {
        let h = 1e-6 * (1.0 + q[j].abs());
        probe[j] = q[j] + h;
        eval(&probe, &mut plus);
        probe[j] = q[j] - h;
        eval(&probe, &mut minus);
        probe[j] = q[j];
        for i in 0..n_residuals {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
}
