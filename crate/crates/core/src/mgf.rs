//! Quadrature approximations of moment generating functions at `t < 0`.
//!
//! For a single alternative-form lognormal `e^(θX)`, `X ~ N(μ, σ²)`:
//!
//! ```text
//! M(t) ≈ (1/√π) ∑_j w_j exp(t·e^(θ(√2 σ t_j + μ)))
//! ```
//!
//! For the weighted sum, the normal vector is decorrelated through its
//! Cholesky factor `L` so the n-dimensional integral becomes a tensor
//! product of the 12-node rule, i.e. a sum over all `12^n` node tuples.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::moments::{NormalSystem, SumSpec, THETA};
use crate::quadrature::{GAUSS_HERMITE_12, ORDER};

/// Default cap on the number of quadrature terms, `12^8`.
pub const DEFAULT_TERM_BUDGET: u64 = 429_981_696;

/// Dimension from which the outermost node index is spread over threads.
const PARALLEL_MIN_DIM: usize = 5;

/// The two negative MGF evaluation points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TPair {
    pub t1: f64,
    pub t2: f64,
}

impl TPair {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        for (name, t) in [("t1", t1), ("t2", t2)] {
            if !(t < 0.0) || !t.is_finite() {
                return Err(Error::Validation(format!(
                    "{name} must be a finite negative number, got {t}"
                )));
            }
        }
        Ok(Self { t1, t2 })
    }

    /// Equal points give one equation in two unknowns.
    pub fn is_repeated(&self) -> bool {
        self.t1 == self.t2
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.t1, self.t2]
    }
}

/// The sum's approximate MGF at `t1` and `t2`, the right-hand sides the
/// approximating lognormal has to match.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfConstants {
    pub c1: f64,
    pub c2: f64,
}

impl MgfConstants {
    pub fn as_array(&self) -> [f64; 2] {
        [self.c1, self.c2]
    }
}

#[inline]
fn node_exponent(mu_x: f64, sigma_x: f64, node: f64) -> f64 {
    (THETA * (SQRT_2 * sigma_x * node + mu_x)).exp()
}

/// Quadrature MGF of `e^(θX)`, `X ~ N(mu_x, sigma_x²)`, valid for `t < 0`.
pub fn univariate_mgf(t: f64, mu_x: f64, sigma_x: f64) -> f64 {
    GAUSS_HERMITE_12.hermite_sum(|u| (t * node_exponent(mu_x, sigma_x, u)).exp()) / PI.sqrt()
}

/// Partial derivatives of [`univariate_mgf`] with respect to `mu_x` and
/// `sigma_x`.
pub fn univariate_mgf_partials(t: f64, mu_x: f64, sigma_x: f64) -> (f64, f64) {
    let mut d_mu = 0.0;
    let mut d_sigma = 0.0;
    for (u, w) in GAUSS_HERMITE_12.pairs() {
        let e = node_exponent(mu_x, sigma_x, u);
        let term = w * (t * e).exp() * e;
        d_mu += term;
        d_sigma += u * term;
    }
    let scale = THETA * t / PI.sqrt();
    (scale * d_mu, scale * SQRT_2 * d_sigma)
}

/// Quadrature MGF of `S = ∑ a_i e^(θX_i)` at `t`, using the default term
/// budget.
pub fn sum_mgf_constant(t: f64, spec: &SumSpec, normal: &NormalSystem) -> Result<f64> {
    sum_mgf_constant_with_budget(t, spec, normal, DEFAULT_TERM_BUDGET)
}

/// As [`sum_mgf_constant`], failing with [`Error::Capacity`] when `12^n`
/// exceeds `max_terms`.
///
/// Terms are enumerated depth first over node indices with a running
/// product, one dimension per level. For large `n` the outermost index is
/// split across threads; the twelve partial sums are always added in index
/// order, so the result does not depend on the thread count.
pub fn sum_mgf_constant_with_budget(
    t: f64,
    spec: &SumSpec,
    normal: &NormalSystem,
    max_terms: u64,
) -> Result<f64> {
    if !(t < 0.0) || !t.is_finite() {
        return Err(Error::Validation(format!(
            "mgf argument must be finite and negative, got {t}"
        )));
    }
    let n = spec.dim();
    if normal.dim() != n {
        return Err(Error::Validation(format!(
            "normal system has {} terms, spec has {n}",
            normal.dim()
        )));
    }
    let chol = normal
        .chol
        .as_ref()
        .ok_or_else(|| Error::Validation("normal system has not been factorized".into()))?;
    let fits = (ORDER as u64)
        .checked_pow(n as u32)
        .is_some_and(|terms| terms <= max_terms);
    if !fits {
        return Err(Error::Capacity {
            dim: n,
            budget: max_terms,
        });
    }

    let walker = Walker {
        t,
        n,
        weights: spec.weights().as_slice(),
        means: normal.means.as_slice(),
        chol: (0..n)
            .map(|i| (0..=i).map(|j| chol[(i, j)]).collect())
            .collect(),
    };

    let outer = |k: usize| {
        let mut roots = vec![0.0; n];
        let mut sum = 0.0;
        let (node, weight) = (GAUSS_HERMITE_12.nodes()[k], GAUSS_HERMITE_12.weights()[k]);
        roots[0] = node;
        let first = weight * walker.factor(0, &roots);
        if n == 1 {
            sum = first;
        } else {
            walker.descend(1, first, &mut roots, &mut sum);
        }
        sum
    };
    let partials: Vec<f64> = if n >= PARALLEL_MIN_DIM {
        (0..ORDER).into_par_iter().map(outer).collect()
    } else {
        (0..ORDER).map(outer).collect()
    };
    let total: f64 = partials.iter().sum();
    Ok(total / PI.powf(n as f64 / 2.0))
}

/// Both constants for a t-pair.
pub fn mgf_constants(tpair: &TPair, spec: &SumSpec, normal: &NormalSystem) -> Result<MgfConstants> {
    Ok(MgfConstants {
        c1: sum_mgf_constant(tpair.t1, spec, normal)?,
        c2: sum_mgf_constant(tpair.t2, spec, normal)?,
    })
}

struct Walker<'a> {
    t: f64,
    n: usize,
    weights: &'a [f64],
    means: &'a [f64],
    /// Row `i` holds `L[i][0..=i]`.
    chol: Vec<Vec<f64>>,
}

impl Walker<'_> {
    /// `exp(t·a_i·e^(θ(√2 (L r)_i + μ_i)))` for the roots chosen so far.
    #[inline]
    fn factor(&self, dim: usize, roots: &[f64]) -> f64 {
        let z: f64 = self.chol[dim].iter().zip(roots).map(|(l, r)| l * r).sum();
        let e = (THETA * (SQRT_2 * z + self.means[dim])).exp();
        (self.t * self.weights[dim] * e).exp()
    }

    fn descend(&self, dim: usize, running: f64, roots: &mut [f64], sum: &mut f64) {
        for (node, weight) in GAUSS_HERMITE_12.pairs() {
            roots[dim] = node;
            let product = running * weight * self.factor(dim, roots);
            if dim + 1 == self.n {
                *sum += product;
            } else {
                self.descend(dim + 1, product, roots, sum);
            }
        }
    }
}
