//! Conversions between lognormal moments and the parameters of the
//! underlying normal variables, and the first two moments of a weighted sum.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Scale of the decibel convention: `10^(x/10) = e^(θx)`.
pub const THETA: f64 = std::f64::consts::LN_10 / 10.0;

/// Absolute tolerance for covariance symmetry.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Mean of `X` such that `e^(θX)` has mean `mu_y` and variance `var_y`.
pub fn normal_mean_from_lognormal(mu_y: f64, var_y: f64) -> Result<f64> {
    if !(mu_y > 0.0) || !mu_y.is_finite() {
        return Err(Error::Domain(format!(
            "lognormal mean must be positive, got {mu_y}"
        )));
    }
    if !(var_y >= 0.0) || !var_y.is_finite() {
        return Err(Error::Domain(format!(
            "lognormal variance must be non-negative, got {var_y}"
        )));
    }
    Ok((mu_y.ln() - 0.5 * (var_y / (mu_y * mu_y)).ln_1p()) / THETA)
}

/// Covariance of the underlying normals `X_i, X_j` given the lognormal means
/// and the lognormal covariance. With `i = j` this is the normal variance.
pub fn normal_var_from_lognormal(mu_yi: f64, mu_yj: f64, cov_ij: f64) -> Result<f64> {
    if !(mu_yi > 0.0) || !(mu_yj > 0.0) {
        return Err(Error::Domain(format!(
            "lognormal means must be positive, got {mu_yi} and {mu_yj}"
        )));
    }
    let ratio = cov_ij / (mu_yi * mu_yj).abs();
    if !(1.0 + ratio > 0.0) {
        return Err(Error::Domain(format!(
            "covariance {cov_ij} is too negative for means {mu_yi}, {mu_yj}: 1 + cov/|mu_i mu_j| = {}",
            1.0 + ratio
        )));
    }
    Ok(ratio.ln_1p() / (THETA * THETA))
}

/// Mean and variance of `e^(θX)` for `X ~ N(mu_x, sigma_x²)`.
pub fn lognormal_from_normal(mu_x: f64, sigma_x: f64) -> (f64, f64) {
    let s2 = (THETA * sigma_x).powi(2);
    let mean = (THETA * mu_x + 0.5 * s2).exp();
    let variance = (2.0 * THETA * mu_x + s2).exp() * s2.exp_m1();
    (mean, variance)
}

/// A weighted sum `S = ∑ a_i Y_i` of correlated lognormals, described by the
/// lognormal means, the lognormal covariance matrix and the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SumSpec {
    means: DVector<f64>,
    cov: DMatrix<f64>,
    weights: DVector<f64>,
}

impl SumSpec {
    pub fn new(means: DVector<f64>, cov: DMatrix<f64>, weights: DVector<f64>) -> Result<Self> {
        let n = means.len();
        if n == 0 {
            return Err(Error::Validation(
                "at least one lognormal term is required".into(),
            ));
        }
        if weights.len() != n {
            return Err(Error::Validation(format!(
                "{} weights given for {} means",
                weights.len(),
                n
            )));
        }
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::Validation(format!(
                "covariance is {}x{}, expected {n}x{n}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if let Some(i) = means.iter().position(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::Validation(format!(
                "mean {i} must be positive and finite, got {}",
                means[i]
            )));
        }
        if let Some(i) = weights.iter().position(|a| !a.is_finite()) {
            return Err(Error::Validation(format!("weight {i} is not finite")));
        }
        if cov.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation(
                "covariance has non-finite entries".into(),
            ));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::Asymmetric {
                        row: i,
                        col: j,
                        upper: cov[(i, j)],
                        lower: cov[(j, i)],
                    });
                }
            }
            if !(cov[(i, i)] > 0.0) {
                return Err(Error::Validation(format!(
                    "variance {i} must be positive, got {}",
                    cov[(i, i)]
                )));
            }
        }
        Ok(Self {
            means,
            cov,
            weights,
        })
    }

    /// Builds a spec from plain slices; `cov` is row-major.
    pub fn from_rows(means: &[f64], cov: &[Vec<f64>], weights: &[f64]) -> Result<Self> {
        let n = cov.len();
        if let Some(i) = cov.iter().position(|row| row.len() != n) {
            return Err(Error::Validation(format!(
                "covariance row {i} has {} entries, expected {n}",
                cov[i].len()
            )));
        }
        let flat: Vec<f64> = cov.iter().flatten().copied().collect();
        Self::new(
            DVector::from_column_slice(means),
            DMatrix::from_row_slice(n, n, &flat),
            DVector::from_column_slice(weights),
        )
    }

    /// Two-term sum `alpha·Y1 + beta·Y2` with variances and one covariance.
    pub fn two_term(
        means: [f64; 2],
        variances: [f64; 2],
        covariance: f64,
        weights: [f64; 2],
    ) -> Result<Self> {
        Self::from_rows(
            &means,
            &[
                vec![variances[0], covariance],
                vec![covariance, variances[1]],
            ],
            &weights,
        )
    }

    /// A single weighted lognormal.
    pub fn single(mean: f64, variance: f64, weight: f64) -> Result<Self> {
        Self::from_rows(&[mean], &[vec![variance]], &[weight])
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &DVector<f64> {
        &self.means
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Same lognormals, different weights.
    pub fn with_weights(&self, weights: DVector<f64>) -> Result<Self> {
        Self::new(self.means.clone(), self.cov.clone(), weights)
    }

    /// Reorders the terms: term `k` of the result is term `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.dim();
        if perm.len() != n {
            return Err(Error::Validation("permutation length mismatch".into()));
        }
        let means = DVector::from_fn(n, |k, _| self.means[perm[k]]);
        let weights = DVector::from_fn(n, |k, _| self.weights[perm[k]]);
        let cov = DMatrix::from_fn(n, n, |r, c| self.cov[(perm[r], perm[c])]);
        Self::new(means, cov, weights)
    }
}

/// Means and covariance of the underlying normal vector, plus its lower
/// Cholesky factor once [`crate::factorize::factorize`] has run.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalSystem {
    pub means: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub chol: Option<DMatrix<f64>>,
}

impl NormalSystem {
    pub fn dim(&self) -> usize {
        self.means.len()
    }

    /// Correlation of normal components `i` and `j`.
    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        self.cov[(i, j)] / (self.cov[(i, i)] * self.cov[(j, j)]).sqrt()
    }
}

/// Elementwise conversion of a lognormal spec to its underlying normal system.
pub fn underlying_system(spec: &SumSpec) -> Result<NormalSystem> {
    let n = spec.dim();
    let mu_y = spec.means();
    let cov_y = spec.cov();
    let mut means = DVector::zeros(n);
    for i in 0..n {
        means[i] = normal_mean_from_lognormal(mu_y[i], cov_y[(i, i)])
            .map_err(|e| with_context(e, &format!("term {i}")))?;
    }
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            cov[(i, j)] = normal_var_from_lognormal(mu_y[i], mu_y[j], cov_y[(i, j)])
                .map_err(|e| with_context(e, &format!("entry ({i},{j})")))?;
        }
    }
    Ok(NormalSystem {
        means,
        cov,
        chol: None,
    })
}

fn with_context(err: Error, ctx: &str) -> Error {
    match err {
        Error::Domain(msg) => Error::Domain(format!("{ctx}: {msg}")),
        other => other,
    }
}

/// `E[S] = a'μ` and `V[S] = a'Σa`.
pub fn sum_mean_var(spec: &SumSpec) -> (f64, f64) {
    let a = spec.weights();
    let mean = a.dot(spec.means());
    let var = (spec.cov() * a).dot(a);
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn worked_example() -> SumSpec {
        SumSpec::two_term([1.0, 2.0], [3.0, 4.0], 1.73, [1.5, 2.5]).unwrap()
    }

    #[test]
    fn theta_value() {
        assert!((THETA - 0.23025850929940457).abs() < 1e-16);
    }

    #[test]
    fn normal_mean_examples() {
        assert!((normal_mean_from_lognormal(1.0, 3.0).unwrap() + 3.0103).abs() < 5e-5);
        assert!((normal_mean_from_lognormal(2.0, 4.0).unwrap() - 1.5051).abs() < 5e-5);
        assert_eq!(normal_mean_from_lognormal(1.0, 0.0).unwrap(), 0.0);
        assert!(matches!(
            normal_mean_from_lognormal(0.0, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(normal_mean_from_lognormal(-1.0, 1.0).is_err());
    }

    #[test]
    fn normal_var_examples() {
        assert!((normal_var_from_lognormal(1.0, 1.0, 3.0).unwrap() - 26.1471).abs() < 5e-5);
        assert!((normal_var_from_lognormal(1.0, 2.0, 1.73).unwrap() - 11.7554).abs() < 5e-5);
        assert_eq!(normal_var_from_lognormal(5.0, 5.0, 0.0).unwrap(), 0.0);
        // 1 + cov/|mu mu| = 0
        assert!(matches!(
            normal_var_from_lognormal(1.0, 2.0, -2.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn lognormal_from_normal_examples() {
        assert_eq!(lognormal_from_normal(0.0, 0.0), (1.0, 0.0));
        let (m, v) = lognormal_from_normal(-3.0103, 26.1471f64.sqrt());
        assert!((m - 1.0).abs() < 1e-3);
        assert!((v - 3.0).abs() < 1e-3 * 3.0);
    }

    #[test]
    fn worked_example_system() {
        let sys = underlying_system(&worked_example()).unwrap();
        assert!((sys.means[0] + 3.0103).abs() < 5e-5);
        assert!((sys.means[1] - 1.5051).abs() < 5e-5);
        assert!((sys.cov[(0, 0)] - 26.1471).abs() < 5e-5);
        assert!((sys.cov[(1, 1)] - 13.0736).abs() < 5e-5);
        assert!((sys.cov[(0, 1)] - 11.7554).abs() < 5e-5);
        assert_eq!(sys.cov[(0, 1)], sys.cov[(1, 0)]);
        assert!((sys.correlation(0, 1) - 0.635813).abs() < 5e-7);
        assert!(sys.chol.is_none());
    }

    #[test]
    fn diagonal_stays_independent() {
        let spec = SumSpec::from_rows(
            &[1.0, 2.0, 3.0],
            &[
                vec![0.5, 0.0, 0.0],
                vec![0.0, 1.5, 0.0],
                vec![0.0, 0.0, 2.5],
            ],
            &[1.0, 1.0, 1.0],
        )
        .unwrap();
        let sys = underlying_system(&spec).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(sys.cov[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn finance_system_round_trips() {
        let spec = SumSpec::from_rows(
            &[1.0837, 1.0214],
            &[vec![0.04635409, 0.00078], vec![0.00078, 0.00680625]],
            &[0.25, 0.75],
        )
        .unwrap();
        let sys = underlying_system(&spec).unwrap();
        for i in 0..2 {
            let (m, v) = lognormal_from_normal(sys.means[i], sys.cov[(i, i)].sqrt());
            assert!((m - spec.means()[i]).abs() < 1e-10 * m);
            assert!((v - spec.cov()[(i, i)]).abs() < 1e-10 * v);
        }
        // E[Y1 Y2] = exp(θ(μ1+μ2) + θ²(σ1²+σ2²+2σ12)/2)
        let cross = (THETA * (sys.means[0] + sys.means[1])
            + 0.5 * THETA * THETA * (sys.cov[(0, 0)] + sys.cov[(1, 1)] + 2.0 * sys.cov[(0, 1)]))
            .exp();
        let cov = cross - spec.means()[0] * spec.means()[1];
        assert!((cov - 0.00078).abs() < 1e-10);
    }

    #[test]
    fn sum_moments() {
        let (m, v) = sum_mean_var(&worked_example());
        assert!((m - 6.5).abs() < 1e-12);
        assert!((v - 44.725).abs() < 1e-12);
        let zero = worked_example()
            .with_weights(DVector::from_vec(vec![0.0, 0.0]))
            .unwrap();
        assert_eq!(sum_mean_var(&zero), (0.0, 0.0));
        let single = SumSpec::single(1.7, 0.3, 1.0).unwrap();
        assert_eq!(sum_mean_var(&single), (1.7, 0.3));
    }

    #[test]
    fn validation_paths() {
        assert!(matches!(
            SumSpec::from_rows(&[1.0, 2.0], &[vec![1.0, 0.5], vec![0.4, 1.0]], &[1.0, 1.0]),
            Err(Error::Asymmetric { row: 0, col: 1, .. })
        ));
        assert!(matches!(
            SumSpec::from_rows(&[1.0, -2.0], &[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0]),
            Err(Error::Validation(_))
        ));
        assert!(
            SumSpec::from_rows(&[1.0, 2.0], &[vec![1.0, 0.0], vec![0.0, 0.0]], &[1.0, 1.0])
                .is_err()
        );
        assert!(
            SumSpec::from_rows(&[1.0, 2.0], &[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0]).is_err()
        );
        assert!(SumSpec::from_rows(&[], &[], &[]).is_err());
        assert!(SumSpec::from_rows(&[1.0], &[vec![1.0, 2.0]], &[1.0]).is_err());
    }

    #[test]
    fn too_negative_covariance_reports_entry() {
        let spec = SumSpec::two_term([1.0, 1.0], [4.0, 4.0], -1.5, [1.0, 1.0]).unwrap();
        match underlying_system(&spec) {
            Err(Error::Domain(msg)) => assert!(msg.contains("(0,1)"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn round_trip(mu in 1e-3f64..1e3, cv in 1e-3f64..10.0) {
            let var = (cv * mu).powi(2);
            let mx = normal_mean_from_lognormal(mu, var).unwrap();
            let vx = normal_var_from_lognormal(mu, mu, var).unwrap();
            let (m, v) = lognormal_from_normal(mx, vx.sqrt());
            prop_assert!(((m - mu) / mu).abs() < 1e-10);
            prop_assert!(((v - var) / var).abs() < 1e-10);
        }

        #[test]
        fn correlation_sign_preserved(m1 in 0.1f64..5.0, m2 in 0.1f64..5.0, c in -0.0099f64..5.0) {
            let x = normal_var_from_lognormal(m1, m2, c).unwrap();
            prop_assert_eq!(x.partial_cmp(&0.0), c.partial_cmp(&0.0));
        }
    }
}
