//! End-to-end fit of a single lognormal to a weighted lognormal sum, plus
//! CDF and quantile evaluation of the fitted distribution.

use log::warn;

use crate::error::{Error, Result};
use crate::factorize::factorize;
use crate::mgf::{mgf_constants, MgfConstants, TPair};
use crate::moments::{lognormal_from_normal, underlying_system, NormalSystem, SumSpec, THETA};
use crate::normal;
use crate::solver::{initial_point, newton_solve_from, SolveOutcome, SolverConfig};

/// Alternative-form lognormal `e^(θX)`, `X ~ N(mu_x, sigma_x²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lognormal {
    pub mu_x: f64,
    pub sigma_x: f64,
}

impl Lognormal {
    pub fn mean(&self) -> f64 {
        lognormal_from_normal(self.mu_x, self.sigma_x).0
    }

    pub fn variance(&self) -> f64 {
        lognormal_from_normal(self.mu_x, self.sigma_x).1
    }

    pub fn median(&self) -> f64 {
        (THETA * self.mu_x).exp()
    }

    /// `P(Y ≤ s)`; zero for `s ≤ 0`.
    pub fn cdf(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s.is_infinite() {
            return 1.0;
        }
        normal::cdf((s.ln() / THETA - self.mu_x) / self.sigma_x)
    }

    /// The `s` with `P(Y ≤ s) = p`, for `p` in `(0, 1)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!(
                "probability must lie in (0, 1), got {p}"
            )));
        }
        Ok((THETA * (self.mu_x + self.sigma_x * normal::quantile(p))).exp())
    }
}

/// The fitted lognormal together with how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxResult {
    pub lognormal_mean: f64,
    pub lognormal_variance: f64,
    pub normal_mu: f64,
    pub normal_sigma: f64,
    pub tpair: TPair,
    pub constants: MgfConstants,
    pub solver: SolveOutcome,
}

impl ApproxResult {
    pub fn lognormal(&self) -> Lognormal {
        Lognormal {
            mu_x: self.normal_mu,
            sigma_x: self.normal_sigma,
        }
    }

    pub fn cdf(&self, s: f64) -> f64 {
        self.lognormal().cdf(s)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.lognormal().quantile(p)
    }
}

/// `P(S ≤ s)` under the fitted lognormal.
pub fn approx_cdf(result: &ApproxResult, s: f64) -> f64 {
    result.cdf(s)
}

pub fn approx_quantile(result: &ApproxResult, p: f64) -> Result<f64> {
    result.quantile(p)
}

/// A validated, factorized problem ready to be fitted at any t-pair.
///
/// Splitting the setup from the fit lets the tuner reuse one normal system
/// and one set of per-t constants across many t-pairs.
#[derive(Debug, Clone)]
pub struct Approximator {
    spec: SumSpec,
    system: NormalSystem,
    start: (f64, f64),
}

impl Approximator {
    pub fn new(spec: SumSpec) -> Result<Self> {
        let mut system = underlying_system(&spec)?;
        factorize(&mut system)?;
        let start = initial_point(&spec)?;
        Ok(Self {
            spec,
            system,
            start,
        })
    }

    pub fn spec(&self) -> &SumSpec {
        &self.spec
    }

    /// Normal system with its Cholesky factor set.
    pub fn system(&self) -> &NormalSystem {
        &self.system
    }

    /// Newton start point, the moment-matched normal parameters.
    pub fn start(&self) -> (f64, f64) {
        self.start
    }

    pub fn constant(&self, t: f64) -> Result<f64> {
        crate::mgf::sum_mgf_constant(t, &self.spec, &self.system)
    }

    pub fn constants(&self, tpair: &TPair) -> Result<MgfConstants> {
        mgf_constants(tpair, &self.spec, &self.system)
    }

    /// Fit using precomputed constants for `tpair`.
    pub fn fit_with_constants(
        &self,
        tpair: &TPair,
        constants: MgfConstants,
        config: &SolverConfig,
    ) -> Result<ApproxResult> {
        let solver = newton_solve_from(self.start, tpair, &constants, config)?;
        let (lognormal_mean, lognormal_variance) =
            lognormal_from_normal(solver.mu_x, solver.sigma_x);
        Ok(ApproxResult {
            lognormal_mean,
            lognormal_variance,
            normal_mu: solver.mu_x,
            normal_sigma: solver.sigma_x,
            tpair: *tpair,
            constants,
            solver,
        })
    }

    pub fn fit(&self, tpair: &TPair, config: &SolverConfig) -> Result<ApproxResult> {
        if tpair.is_repeated() {
            warn!(
                "the t-values are equal (t1 = t2 = {}); one equation is used for two unknowns",
                tpair.t1
            );
        }
        let constants = self.constants(tpair)?;
        self.fit_with_constants(tpair, constants, config)
    }
}

/// Validate, convert, factorize, compute both MGF constants and solve.
pub fn approximate(spec: &SumSpec, tpair: &TPair, config: &SolverConfig) -> Result<ApproxResult> {
    config.validate()?;
    Approximator::new(spec.clone())?.fit(tpair, config)
}

/// The lognormal with mean `E[S]` and variance `V[S]`, no solve involved.
pub fn moment_matched(spec: &SumSpec) -> Result<Lognormal> {
    let (mu_x, sigma_x) = initial_point(spec)?;
    Ok(Lognormal { mu_x, sigma_x })
}
