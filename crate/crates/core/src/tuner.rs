//! Grid search over integer-indexed t-pairs for the pair whose fitted
//! lognormal best reproduces a simulated CDF, scored by the (weighted) sum of
//! absolute relative deviations.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Deserialize;

use crate::approximator::{ApproxResult, Approximator};
use crate::error::{Error, Result};
use crate::mgf::{MgfConstants, TPair};
use crate::moments::SumSpec;
use crate::montecarlo::CdfGrid;
use crate::solver::SolverConfig;

/// One step of a piecewise-constant weight: applies to `s < below`
/// (or to everything left over when `below` is absent).
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Band {
    #[serde(default)]
    pub below: Option<f64>,
    pub weight: f64,
}

/// Weight attached to each grid point's deviation.
#[derive(Clone, Default)]
pub enum WeightFn {
    #[default]
    Uniform,
    /// 1 below 0.75, 15 on [0.75, 1.10], 50 above 1.10.
    TailEmphasis,
    /// First band whose `below` exceeds `s`; zero if none matches.
    Bands(Vec<Band>),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for WeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFn::Uniform => write!(f, "Uniform"),
            WeightFn::TailEmphasis => write!(f, "TailEmphasis"),
            WeightFn::Bands(b) => f.debug_tuple("Bands").field(b).finish(),
            WeightFn::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl WeightFn {
    /// Looks up a named preset: `uniform` or `tail-emphasis`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "uniform" | "unit" | "none" => Some(WeightFn::Uniform),
            "tail-emphasis" | "banded" => Some(WeightFn::TailEmphasis),
            _ => None,
        }
    }

    /// Parses a JSON array of bands, e.g.
    /// `[{"below": 0.75, "weight": 1}, {"weight": 5}]`.
    pub fn from_json(text: &str) -> Result<Self> {
        let bands: Vec<Band> = serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("weight bands: {e}")))?;
        if bands.is_empty() {
            return Err(Error::Validation("weight bands: empty list".into()));
        }
        if let Some(b) = bands
            .iter()
            .find(|b| !(b.weight >= 0.0) || !b.weight.is_finite())
        {
            return Err(Error::Validation(format!(
                "weight bands: weight must be non-negative, got {}",
                b.weight
            )));
        }
        Ok(WeightFn::Bands(bands))
    }

    pub fn weight(&self, s: f64) -> f64 {
        match self {
            WeightFn::Uniform => 1.0,
            WeightFn::TailEmphasis => {
                if s < 0.75 {
                    1.0
                } else if s <= 1.10 {
                    15.0
                } else {
                    50.0
                }
            }
            WeightFn::Bands(bands) => bands
                .iter()
                .find(|b| b.below.is_none_or(|edge| s < edge))
                .map_or(0.0, |b| b.weight),
            WeightFn::Custom(f) => f(s),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightFn::Uniform => "uniform",
            WeightFn::TailEmphasis => "tail-emphasis",
            WeightFn::Bands(_) => "bands",
            WeightFn::Custom(_) => "custom",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TunerConfig {
    /// Largest t index searched.
    pub upper_limit: u32,
    /// Index `i` maps to `t = −i / (upper_limit / precision)`, with integer
    /// division in the denominator.
    pub precision: u32,
    pub weight: WeightFn,
    /// Worker threads; 0 picks the machine's parallelism.
    pub threads: usize,
}

impl Default for TunerConfig {
    fn default() -> Self {
        Self {
            upper_limit: 100,
            precision: 10,
            weight: WeightFn::Uniform,
            threads: 0,
        }
    }
}

impl TunerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.upper_limit < 2 {
            return Err(Error::Validation(format!(
                "upper limit must be at least 2, got {}",
                self.upper_limit
            )));
        }
        if self.precision < 1 || self.precision > self.upper_limit {
            return Err(Error::Validation(format!(
                "these optimization settings will not work: precision {} must lie in 1..={}",
                self.precision, self.upper_limit
            )));
        }
        Ok(())
    }

    fn divisor(&self) -> u32 {
        self.upper_limit / self.precision
    }

    /// The MGF argument for grid index `index`.
    pub fn t_value(&self, index: u32) -> f64 {
        -(index as f64) / self.divisor() as f64
    }

    /// The t-pair for an index pair.
    pub fn tpair(&self, i: u32, j: u32) -> Result<TPair> {
        TPair::new(self.t_value(i), self.t_value(j))
    }

    /// `C(upper_limit, 2)`.
    pub fn pair_count(&self) -> u64 {
        let n = self.upper_limit as u64;
        n * (n - 1) / 2
    }
}

#[derive(Debug, Clone)]
pub struct TunerResult {
    pub best_score: f64,
    pub best_tpair: TPair,
    pub best_indices: (u32, u32),
    pub best_result: ApproxResult,
    /// Pairs solved and scored.
    pub evaluated: u64,
    /// Pairs whose solve failed.
    pub skipped: u64,
}

/// `∑ w(s_k)·|F(s_k) − p_k| / p_k` over grid points with `p_k > 0`.
pub fn objective(result: &ApproxResult, truth: &CdfGrid, weight: &WeightFn) -> f64 {
    truth
        .iter()
        .filter(|&(_, p)| p > 0.0)
        .map(|(s, p)| weight.weight(s) * (result.cdf(s) - p).abs() / p)
        .sum()
}

struct Candidate {
    score: f64,
    indices: (u32, u32),
    result: ApproxResult,
}

impl Candidate {
    /// Lower score wins; ties go to the lexicographically smaller pair.
    fn beats(&self, other: &Candidate) -> bool {
        self.score
            .total_cmp(&other.score)
            .then(self.indices.cmp(&other.indices))
            .is_lt()
    }
}

#[derive(Default)]
struct Tally {
    best: Option<Candidate>,
    evaluated: u64,
    skipped: u64,
}

impl Tally {
    fn offer(&mut self, c: Candidate) {
        if self.best.as_ref().is_none_or(|b| c.beats(b)) {
            self.best = Some(c);
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.evaluated += other.evaluated;
        self.skipped += other.skipped;
        if let Some(c) = other.best {
            self.offer(c);
        }
        self
    }
}

/// A prepared search: factorized problem plus the MGF constant for every
/// grid index, shared by all pairs.
pub struct TSetSearch<'a> {
    approximator: Approximator,
    constants: Vec<f64>,
    truth: &'a CdfGrid,
    config: &'a TunerConfig,
    solver: &'a SolverConfig,
}

impl<'a> TSetSearch<'a> {
    pub fn new(
        spec: &SumSpec,
        truth: &'a CdfGrid,
        config: &'a TunerConfig,
        solver: &'a SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        solver.validate()?;
        let approximator = Approximator::new(spec.clone())?;
        let constants = (1..=config.upper_limit)
            .into_par_iter()
            .map(|i| approximator.constant(config.t_value(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            approximator,
            constants,
            truth,
            config,
            solver,
        })
    }

    /// Fit and score one index pair.
    pub fn evaluate(&self, i: u32, j: u32) -> Result<(f64, ApproxResult)> {
        let tpair = self.config.tpair(i, j)?;
        let constants = MgfConstants {
            c1: self.constants[i as usize - 1],
            c2: self.constants[j as usize - 1],
        };
        let result = self
            .approximator
            .fit_with_constants(&tpair, constants, self.solver)?;
        let score = objective(&result, self.truth, &self.config.weight);
        Ok((score, result))
    }

    fn row(&self, i: u32) -> Tally {
        let mut tally = Tally::default();
        for j in (i + 1)..=self.config.upper_limit {
            match self.evaluate(i, j) {
                Ok((score, result)) if score.is_finite() => {
                    tally.evaluated += 1;
                    tally.offer(Candidate {
                        score,
                        indices: (i, j),
                        result,
                    });
                }
                _ => tally.skipped += 1,
            }
        }
        tally
    }

    /// Exhaustive search over `1 <= i < j <= upper_limit`.
    pub fn run(&self) -> Result<TunerResult> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.threads)
            .build()
            .map_err(|e| Error::Validation(format!("cannot start worker threads: {e}")))?;
        let tally = pool.install(|| {
            (1..self.config.upper_limit)
                .into_par_iter()
                .map(|i| self.row(i))
                .reduce(Tally::default, Tally::merge)
        });
        let Tally {
            best,
            evaluated,
            skipped,
        } = tally;
        let best = best
            .ok_or_else(|| Error::Optimization(format!("all {skipped} t-pairs failed to solve")))?;
        Ok(TunerResult {
            best_score: best.score,
            best_tpair: best.result.tpair,
            best_indices: best.indices,
            best_result: best.result,
            evaluated,
            skipped,
        })
    }
}

/// Find the t-pair minimizing [`objective`] against `truth`.
pub fn optimize_tset(
    spec: &SumSpec,
    truth: &CdfGrid,
    config: &TunerConfig,
    solver: &SolverConfig,
) -> Result<TunerResult> {
    TSetSearch::new(spec, truth, config, solver)?.run()
}
