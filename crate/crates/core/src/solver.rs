//! Newton iteration for the two MGF-matching equations
//!
//! ```text
//! M(τ_i; μ, σ) − C_i = 0,   i = 1, 2
//! ```
//!
//! in the normal parameters `(μ, σ)` of the approximating lognormal, using
//! the analytic Jacobian. The start point is the moment-matched lognormal.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::mgf::{univariate_mgf, univariate_mgf_partials, MgfConstants, TPair};
use crate::moments::{
    normal_mean_from_lognormal, normal_var_from_lognormal, sum_mean_var, SumSpec,
};

const SINGULAR_DET: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Convergence threshold on `max |r_i|`.
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-10,
            max_iterations: 200,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Validation(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Validation(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One point visited by the iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonStep {
    pub mu_x: f64,
    pub sigma_x: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub mu_x: f64,
    pub sigma_x: f64,
    /// Newton updates applied; zero when the start point already converged.
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    /// Every iterate including the start point.
    pub trace: Vec<NewtonStep>,
}

/// Normal parameters of the lognormal with mean `E[S]` and variance `V[S]`.
pub fn initial_point(spec: &SumSpec) -> Result<(f64, f64)> {
    let (mean, var) = sum_mean_var(spec);
    if !(mean > 0.0) {
        return Err(Error::Domain(format!(
            "sum mean must be positive to start newton, got {mean}"
        )));
    }
    let mu = normal_mean_from_lognormal(mean, var)?;
    let sigma = normal_var_from_lognormal(mean, mean, var)?.sqrt();
    Ok((mu, sigma))
}

/// `M(τ_i; μ, σ) − C_i` for both equations.
pub fn residuals(mu_x: f64, sigma_x: f64, tpair: &TPair, constants: &MgfConstants) -> [f64; 2] {
    [
        univariate_mgf(tpair.t1, mu_x, sigma_x) - constants.c1,
        univariate_mgf(tpair.t2, mu_x, sigma_x) - constants.c2,
    ]
}

/// Rows are equations, columns are `∂/∂μ` and `∂/∂σ`.
pub fn jacobian(mu_x: f64, sigma_x: f64, tpair: &TPair) -> [[f64; 2]; 2] {
    let (a, b) = univariate_mgf_partials(tpair.t1, mu_x, sigma_x);
    let (c, d) = univariate_mgf_partials(tpair.t2, mu_x, sigma_x);
    [[a, b], [c, d]]
}

fn max_abs(r: [f64; 2]) -> f64 {
    let m = r[0].abs().max(r[1].abs());
    // f64::max drops NaN
    if r[0].is_nan() || r[1].is_nan() {
        f64::NAN
    } else {
        m
    }
}

/// Newton solve started from [`initial_point`].
pub fn newton_solve(
    tpair: &TPair,
    constants: &MgfConstants,
    spec: &SumSpec,
    config: &SolverConfig,
) -> Result<SolveOutcome> {
    let start = initial_point(spec)?;
    newton_solve_from(start, tpair, constants, config)
}

/// Newton solve from an explicit `(μ, σ)` start.
///
/// No damping or line search. A step that lands on `σ < 0` is reflected to
/// `|σ|`; the equations are even in `σ` because the nodes are symmetric.
pub fn newton_solve_from(
    start: (f64, f64),
    tpair: &TPair,
    constants: &MgfConstants,
    config: &SolverConfig,
) -> Result<SolveOutcome> {
    config.validate()?;
    let (mut mu, mut sigma) = start;
    let mut trace = Vec::new();
    let mut best = NewtonStep {
        mu_x: mu,
        sigma_x: sigma,
        residual: f64::INFINITY,
    };

    for iteration in 0..=config.max_iterations {
        let r = residuals(mu, sigma, tpair, constants);
        let residual = max_abs(r);
        let step = NewtonStep {
            mu_x: mu,
            sigma_x: sigma,
            residual,
        };
        trace.push(step);
        if !residual.is_finite() {
            return Err(Error::NoConvergence {
                iterations: iteration,
                mu: best.mu_x,
                sigma: best.sigma_x,
                residual: best.residual,
            });
        }
        if residual < best.residual {
            best = step;
        }
        if residual < config.epsilon {
            return Ok(SolveOutcome {
                mu_x: mu,
                sigma_x: sigma,
                iterations: iteration,
                final_residual: residual,
                converged: true,
                trace,
            });
        }
        if iteration == config.max_iterations {
            break;
        }

        let j = jacobian(mu, sigma, tpair);
        let a = Matrix2::new(j[0][0], j[0][1], j[1][0], j[1][1]);
        let det = a.determinant();
        let singular = || Error::SingularJacobian {
            iterations: iteration,
            mu,
            sigma,
        };
        if !(det.abs() >= SINGULAR_DET) {
            return Err(singular());
        }
        let b = Vector2::new(-r[0], -r[1]);
        let delta = a.col_piv_qr().solve(&b).ok_or_else(singular)?;
        mu += delta[0];
        sigma = (sigma + delta[1]).abs();
    }

    Err(Error::NoConvergence {
        iterations: config.max_iterations,
        mu: best.mu_x,
        sigma: best.sigma_x,
        residual: best.residual,
    })
}
