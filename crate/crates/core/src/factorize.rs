//! Positive-definiteness check and lower Cholesky factor of the normal
//! covariance. The factor drives the decorrelating change of variables used
//! by both the MGF quadrature and the simulator.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::moments::{NormalSystem, SYMMETRY_TOL};

fn check_symmetric(cov: &DMatrix<f64>) -> Result<()> {
    if !cov.is_square() {
        return Err(Error::Validation(format!(
            "covariance is {}x{}, not square",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let n = cov.nrows();
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
    }
    Ok(())
}

/// Smallest eigenvalue of a symmetric matrix. The caller decides what to do
/// with a non-positive answer.
pub fn check_positive_definite(cov: &DMatrix<f64>) -> Result<f64> {
    check_symmetric(cov)?;
    if cov.nrows() == 0 {
        return Err(Error::Validation("empty covariance matrix".into()));
    }
    let eig = nalgebra::SymmetricEigen::new(cov.clone());
    Ok(eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min))
}

/// Lower-triangular `L` with positive diagonal and `L·L' = cov`.
pub fn cholesky_lower(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(cov)?;
    let n = cov.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = cov[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::CholeskyBreakdown { pivot: j, value: d });
        }
        let pivot = d.sqrt();
        l[(j, j)] = pivot;
        for i in (j + 1)..n {
            let mut s = cov[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / pivot;
        }
    }
    Ok(l)
}

/// Eigenvalue check followed by factorization; fills `system.chol`.
///
/// The eigenvalue test runs first so an invalid covariance is reported as
/// such rather than as a numerical pivot failure.
pub fn factorize(system: &mut NormalSystem) -> Result<()> {
    let min_eigenvalue = check_positive_definite(&system.cov)?;
    if !(min_eigenvalue > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue });
    }
    system.chol = Some(cholesky_lower(&system.cov)?);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn worked_cov() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[26.1471, 11.7554, 11.7554, 13.0736])
    }

    fn random_pd(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
        a.transpose() * &a + DMatrix::identity(n, n)
    }

    fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn min_eigenvalue_examples() {
        let id = DMatrix::<f64>::identity(2, 2);
        assert!((check_positive_definite(&id).unwrap() - 1.0).abs() < 1e-14);

        let c = worked_cov();
        let tr = c[(0, 0)] + c[(1, 1)];
        let det = c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)];
        let oracle = 0.5 * (tr - (tr * tr - 4.0 * det).sqrt());
        let got = check_positive_definite(&c).unwrap();
        assert!((got - oracle).abs() < 1e-10);
        assert!((got - 6.1598).abs() < 1e-3);

        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!((check_positive_definite(&bad).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 1.0]);
        assert!(matches!(
            check_positive_definite(&m),
            Err(Error::Asymmetric { row: 0, col: 1, .. })
        ));
        assert!(cholesky_lower(&m).is_err());
    }

    #[test]
    fn diagonal_factor() {
        let l = cholesky_lower(&DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0])).unwrap();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]));
    }

    #[test]
    fn closed_form_two_by_two() {
        let (s1, s2, rho): (f64, f64, f64) = (5.1134, 3.6157, 0.635811);
        let cov = DMatrix::from_row_slice(2, 2, &[s1 * s1, rho * s1 * s2, rho * s1 * s2, s2 * s2]);
        let l = cholesky_lower(&cov).unwrap();
        let expected =
            DMatrix::from_row_slice(2, 2, &[s1, 0.0, rho * s2, s2 * (1.0 - rho * rho).sqrt()]);
        assert!((l - expected).amax() < 1e-12);
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cov = random_pd(4, &mut rng);
        let l = cholesky_lower(&cov).unwrap();
        assert!(rel_frobenius(&(&l * l.transpose()), &cov) < 1e-10);
        for i in 0..4 {
            assert!(l[(i, i)] > 0.0);
            for j in (i + 1)..4 {
                assert_eq!(l[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn breakdown_names_pivot() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        assert!(matches!(
            cholesky_lower(&m),
            Err(Error::CholeskyBreakdown { pivot: 2, .. })
        ));
    }

    #[test]
    fn factorize_rejects_indefinite_before_pivoting() {
        let mut sys = NormalSystem {
            means: nalgebra::DVector::zeros(2),
            cov: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
            chol: None,
        };
        assert!(matches!(
            factorize(&mut sys),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(sys.chol.is_none());
    }

    proptest! {
        #[test]
        fn decorrelates(n in 1usize..=6, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cov = random_pd(n, &mut rng);
            let l = cholesky_lower(&cov).unwrap();
            let linv = l.clone().try_inverse().unwrap();
            let half = (&linv * &cov * linv.transpose()) * 0.5;
            let target = DMatrix::<f64>::identity(n, n) * 0.5;
            prop_assert!((half - target).amax() < 1e-9);
            prop_assert!(rel_frobenius(&(&l * l.transpose()), &cov) < 1e-10);
        }
    }
}
