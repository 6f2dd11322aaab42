//! Monte-Carlo ground truth for the CDF of `S = ∑ a_i e^(θX_i)`.
//!
//! Each sample draws independent standard normals `z`, recorrelates them as
//! `u = L z + μ`, exponentiates and sums. Samples are generated in fixed-size
//! blocks, each with its own ChaCha8 stream selected by `(seed, block)`, so
//! the counts depend only on the seed and the sample size, never on how the
//! blocks are spread over threads.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factorize::factorize;
use crate::moments::{underlying_system, SumSpec, THETA};

/// Samples per random stream.
pub const BLOCK_SIZE: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub sample_size: u64,
    pub seed: u64,
    /// Worker threads; 0 picks the machine's parallelism.
    pub threads: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sample_size: 10_000_000,
            seed: 42,
            threads: 0,
        }
    }
}

/// Domain values with their cumulative probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfGrid {
    pub domain: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// `s_i = (i + 1)·h/k` for `i = 0..k`.
pub fn default_grid(h: f64, k: usize) -> Result<Vec<f64>> {
    if !(h > 0.0) || !h.is_finite() || k == 0 {
        return Err(Error::Validation(format!(
            "grid needs h > 0 and k >= 1, got h={h}, k={k}"
        )));
    }
    Ok((0..k).map(|i| (i + 1) as f64 * (h / k as f64)).collect())
}

fn validate_domain(domain: &[f64]) -> Result<()> {
    if domain.is_empty() {
        return Err(Error::Validation("grid domain is empty".into()));
    }
    if let Some(i) = domain.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::Validation(format!(
            "grid value {i} must be positive and finite, got {}",
            domain[i]
        )));
    }
    if let Some(i) = domain.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Validation(format!(
            "grid domain must be strictly increasing (rows {} and {})",
            i,
            i + 1
        )));
    }
    Ok(())
}

impl CdfGrid {
    pub fn new(domain: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        validate_domain(&domain)?;
        if probabilities.len() != domain.len() {
            return Err(Error::Validation(format!(
                "{} probabilities for {} domain values",
                probabilities.len(),
                domain.len()
            )));
        }
        if let Some(i) = probabilities.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Validation(format!(
                "probability {i} outside [0, 1]: {}",
                probabilities[i]
            )));
        }
        if let Some(i) = probabilities.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::Validation(format!(
                "probabilities decrease between rows {} and {}",
                i,
                i + 1
            )));
        }
        Ok(Self {
            domain,
            probabilities,
        })
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.domain
            .iter()
            .copied()
            .zip(self.probabilities.iter().copied())
    }

    /// Inverse of the piecewise-linear interpolant through the grid. `None`
    /// when `p` is not bracketed by the grid's probabilities.
    pub fn quantile(&self, p: f64) -> Option<f64> {
        let k = self.probabilities.partition_point(|&q| q < p);
        if k == self.len() {
            return None;
        }
        if self.probabilities[k] == p || k == 0 {
            return (self.probabilities[k] == p).then_some(self.domain[k]);
        }
        let (p0, p1) = (self.probabilities[k - 1], self.probabilities[k]);
        let (s0, s1) = (self.domain[k - 1], self.domain[k]);
        Some(s0 + (p - p0) / (p1 - p0) * (s1 - s0))
    }

    /// Writes `#`-prefixed metadata lines, a `s,p` header and one row per
    /// point with 10 significant digits.
    pub fn write_csv<W: Write>(
        &self,
        mut out: W,
        metadata: &[(&str, String)],
    ) -> std::io::Result<()> {
        for (key, value) in metadata {
            writeln!(out, "# {key}={value}")?;
        }
        writeln!(out, "s,p")?;
        for (s, p) in self.iter() {
            writeln!(out, "{},{}", format_sig(s), format_sig(p))?;
        }
        out.flush()
    }

    /// Parses CSV written by [`CdfGrid::write_csv`]; `#` lines are skipped.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = reader
            .headers()
            .map_err(|e| Error::Validation(format!("truth csv: {e}")))?
            .clone();
        if headers.len() != 2 || &headers[0] != "s" || &headers[1] != "p" {
            return Err(Error::Validation(format!(
                "truth csv header must be `s,p`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut domain = Vec::new();
        let mut probabilities = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Validation(format!("truth csv: {e}")))?;
            let parse = |field: &str| {
                field
                    .parse::<f64>()
                    .map_err(|e| Error::Validation(format!("truth csv row {row}: `{field}`: {e}")))
            };
            domain.push(parse(&record[0])?);
            probabilities.push(parse(&record[1])?);
        }
        Self::new(domain, probabilities)
    }
}

/// Ten significant digits, scientific notation outside `[1e-4, 1e10)`.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    if (-4..10).contains(&exponent) {
        let decimals = (9 - exponent).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.9e}")
    }
}

/// Draws sums `S` from the true joint distribution.
#[derive(Debug, Clone)]
pub struct SumSampler {
    chol: Vec<Vec<f64>>,
    means: Vec<f64>,
    weights: Vec<f64>,
}

impl SumSampler {
    pub fn new(spec: &SumSpec) -> Result<Self> {
        let mut system = underlying_system(spec)?;
        factorize(&mut system)?;
        let l = system.chol.as_ref().expect("factorized");
        let n = spec.dim();
        Ok(Self {
            chol: (0..n)
                .map(|i| (0..=i).map(|j| l[(i, j)]).collect())
                .collect(),
            means: system.means.iter().copied().collect(),
            weights: spec.weights().iter().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    /// The random stream for one block.
    pub fn stream(seed: u64, block: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block);
        rng
    }

    /// One sample of `S`; `z` is scratch space of length `dim`.
    pub fn draw<R: Rng>(&self, rng: &mut R, z: &mut [f64]) -> f64 {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let mut s = 0.0;
        for (i, row) in self.chol.iter().enumerate() {
            let u: f64 = row.iter().zip(z.iter()).map(|(l, z)| l * z).sum::<f64>() + self.means[i];
            s += self.weights[i] * (THETA * u).exp();
        }
        s
    }

    /// Feeds every sample of block `block` (of `len` samples) to `visit`.
    pub fn for_each_in_block<F: FnMut(f64)>(&self, seed: u64, block: u64, len: u64, mut visit: F) {
        let mut rng = Self::stream(seed, block);
        let mut z = vec![0.0; self.dim()];
        for _ in 0..len {
            visit(self.draw(&mut rng, &mut z));
        }
    }

    /// Sizes of the blocks covering `sample_size` samples; the last one
    /// takes the remainder.
    pub fn blocks(sample_size: u64) -> impl Iterator<Item = (u64, u64)> + Clone {
        let full = sample_size / BLOCK_SIZE;
        let rest = sample_size % BLOCK_SIZE;
        (0..full)
            .map(|b| (b, BLOCK_SIZE))
            .chain((rest > 0).then_some((full, rest)))
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Validation(format!("cannot start {threads} worker threads: {e}")))
}

/// Empirical `P(S ≤ s_k)` for every grid value.
pub fn simulate_cdf(spec: &SumSpec, grid_domain: &[f64], config: &SimConfig) -> Result<CdfGrid> {
    validate_domain(grid_domain)?;
    if config.sample_size == 0 {
        return Err(Error::Validation("sample size must be at least 1".into()));
    }
    let sampler = SumSampler::new(spec)?;
    let k = grid_domain.len();
    let blocks: Vec<(u64, u64)> = SumSampler::blocks(config.sample_size).collect();

    // histogram of the first grid index with s_k >= S, then a prefix sum
    let histogram = thread_pool(config.threads)?.install(|| {
        blocks
            .par_iter()
            .fold(
                || vec![0u64; k + 1],
                |mut hist, &(block, len)| {
                    sampler.for_each_in_block(config.seed, block, len, |s| {
                        hist[grid_domain.partition_point(|&d| d < s)] += 1;
                    });
                    hist
                },
            )
            .reduce(
                || vec![0u64; k + 1],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    });

    let n = config.sample_size as f64;
    let mut running = 0u64;
    let probabilities = histogram[..k]
        .iter()
        .map(|&c| {
            running += c;
            running as f64 / n
        })
        .collect();
    CdfGrid::new(grid_domain.to_vec(), probabilities)
}

/// Points in the grid used to invert a simulated CDF.
const QUANTILE_GRID_POINTS: usize = 20_000;

/// Empirical quantiles of `S`, read off a fine simulated CDF grid by linear
/// interpolation. The grid spans the moment-matched lognormal's
/// `[1e-6, 1 − 1e-6]` quantile range, widened by 25% on each side.
pub fn simulated_quantiles(
    spec: &SumSpec,
    probabilities: &[f64],
    config: &SimConfig,
) -> Result<Vec<f64>> {
    let reference = crate::approximator::moment_matched(spec)?;
    let lo = reference.quantile(1e-6)?;
    let hi = reference.quantile(1.0 - 1e-6)?;
    let (lo, hi) = (lo - 0.25 * (hi - lo), hi + 0.25 * (hi - lo));
    let lo = lo.max(hi * 1e-9);
    let step = (hi - lo) / (QUANTILE_GRID_POINTS - 1) as f64;
    let domain: Vec<f64> = (0..QUANTILE_GRID_POINTS)
        .map(|i| lo + i as f64 * step)
        .collect();
    let grid = simulate_cdf(spec, &domain, config)?;
    probabilities
        .iter()
        .map(|&p| {
            grid.quantile(p).ok_or_else(|| {
                Error::Validation(format!(
                    "probability {p} is outside the simulated range [{}, {}]",
                    grid.probabilities[0],
                    grid.probabilities[grid.len() - 1]
                ))
            })
        })
        .collect()
}
