//! Standard normal CDF and quantile.

use std::f64::consts::SQRT_2;

use statrs::function::erf::erfc_inv;

/// `Φ(x)`.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// `Φ⁻¹(p)` for `p` in `(0, 1)`; infinite at the endpoints, NaN outside.
pub fn quantile(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    -SQRT_2 * erfc_inv(2.0 * p)
}
