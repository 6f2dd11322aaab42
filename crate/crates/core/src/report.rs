//! The stock/bond portfolio problem and the four-method quantile comparison
//! (simulation, moment matching, and two MGF t-pairs).

use crate::approximator::{moment_matched, Approximator};
use crate::error::{Error, Result};
use crate::mgf::TPair;
use crate::moments::SumSpec;
use crate::montecarlo::{simulated_quantiles, SimConfig};
use crate::solver::SolverConfig;

/// Probabilities reported in every comparison row.
pub const PROBABILITY_COLUMNS: [f64; 9] = [0.01, 0.05, 0.10, 0.30, 0.50, 0.80, 0.90, 0.95, 0.99];

/// Equity ratios of the reference comparison.
pub const EQUITY_RATIOS: [f64; 3] = [0.25, 0.50, 0.75];

/// Mean real compounding returns of stocks and bonds.
pub const PORTFOLIO_MEANS: [f64; 2] = [1.0837, 1.0214];

/// Their covariance matrix (standard deviations 0.2153 and 0.0825).
pub const PORTFOLIO_COV: [[f64; 2]; 2] = [[0.04635409, 0.00078], [0.00078, 0.00680625]];

/// t-pair tuned for CDF accuracy.
pub const MGF1_TPAIR: (f64, f64) = (-1.0, -0.2);

/// Near-zero t-pair; collapses onto the moment-matched fit.
pub const MGF2_TPAIR: (f64, f64) = (-0.001, -0.005);

/// `S = alpha·(1 + r_s) + (1 − alpha)·(1 + r_b)`.
pub fn portfolio_spec(alpha: f64) -> Result<SumSpec> {
    SumSpec::from_rows(
        &PORTFOLIO_MEANS,
        &[PORTFOLIO_COV[0].to_vec(), PORTFOLIO_COV[1].to_vec()],
        &[alpha, 1.0 - alpha],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Simulation,
    MomentMatch,
    Mgf1,
    Mgf2,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Simulation,
        Method::MomentMatch,
        Method::Mgf1,
        Method::Mgf2,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Method::Simulation => "Simulation",
            Method::MomentMatch => "M-M",
            Method::Mgf1 => "MGF(1)",
            Method::Mgf2 => "MGF(2)",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub method: Method,
    pub alpha: f64,
    /// Domain values `s` with `P(S ≤ s)` equal to each column probability.
    pub quantiles: Vec<f64>,
}

/// Quantiles of the lognormal fitted at `tpair` for the given probabilities.
pub fn mgf_quantiles(
    spec: &SumSpec,
    tpair: &TPair,
    solver: &SolverConfig,
    probabilities: &[f64],
) -> Result<Vec<f64>> {
    let fit = Approximator::new(spec.clone())?.fit(tpair, solver)?;
    probabilities.iter().map(|&p| fit.quantile(p)).collect()
}

/// Quantiles of the moment-matched lognormal, computed directly.
pub fn moment_matched_quantiles(spec: &SumSpec, probabilities: &[f64]) -> Result<Vec<f64>> {
    let ln = moment_matched(spec)?;
    probabilities.iter().map(|&p| ln.quantile(p)).collect()
}

/// One row per method and equity ratio, methods outermost.
pub fn comparison_table(
    alphas: &[f64],
    sim: &SimConfig,
    solver: &SolverConfig,
) -> Result<Vec<ComparisonRow>> {
    if let Some(a) = alphas
        .iter()
        .find(|a| !(a.is_finite() && **a > 0.0 && **a < 1.0))
    {
        return Err(Error::Validation(format!(
            "equity ratio must lie in (0, 1), got {a}"
        )));
    }
    let mgf1 = TPair::new(MGF1_TPAIR.0, MGF1_TPAIR.1)?;
    let mgf2 = TPair::new(MGF2_TPAIR.0, MGF2_TPAIR.1)?;
    let mut rows = Vec::new();
    for method in Method::ALL {
        for &alpha in alphas {
            let spec = portfolio_spec(alpha)?;
            let quantiles = match method {
                Method::Simulation => simulated_quantiles(&spec, &PROBABILITY_COLUMNS, sim)?,
                Method::MomentMatch => moment_matched_quantiles(&spec, &PROBABILITY_COLUMNS)?,
                Method::Mgf1 => mgf_quantiles(&spec, &mgf1, solver, &PROBABILITY_COLUMNS)?,
                Method::Mgf2 => mgf_quantiles(&spec, &mgf2, solver, &PROBABILITY_COLUMNS)?,
            };
            rows.push(ComparisonRow {
                method,
                alpha,
                quantiles,
            });
        }
    }
    Ok(rows)
}

/// Rounds to four decimals, the reporting precision of the table.
pub fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// CSV with header `method,alpha,0.01,...,0.99` and cells to 4 decimals.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("method,alpha");
    for p in PROBABILITY_COLUMNS {
        out.push_str(&format!(",{p:.2}"));
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!("{},{:.2}", row.method.label(), row.alpha));
        for q in &row.quantiles {
            out.push_str(&format!(",{:.4}", round4(*q)));
        }
        out.push('\n');
    }
    out
}
