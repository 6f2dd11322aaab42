//! Twelve-point Gauss-Hermite rule for integrals of the form
//! `∫ g(u) e^(-u²) du` over the real line.
//!
//! The abscissas and weights are the tabulated Abramowitz & Stegun values,
//! stored verbatim rather than recomputed, so every downstream constant is
//! reproducible digit for digit.

/// Number of nodes in the rule.
pub const ORDER: usize = 12;

/// Positive abscissas, innermost first. Each appears as a ± pair.
pub const POSITIVE_NODES: [f64; ORDER / 2] = [
    0.314240376254,
    0.947788391240,
    1.597682635153,
    2.279507080501,
    3.020637025121,
    3.889724897870,
];

/// Weights matching [`POSITIVE_NODES`]; both members of a ± pair share one.
pub const PAIR_WEIGHTS: [f64; ORDER / 2] = [
    0.5701352362625,
    0.2604923102642,
    0.05160798561588,
    0.003905390584629,
    0.000085736870435880,
    0.000000265855168436,
];

/// The full rule, laid out as `(-x1, +x1, -x2, +x2, ...)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureRule {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
}

impl QuadratureRule {
    pub const fn new() -> Self {
        let mut nodes = [0.0; ORDER];
        let mut weights = [0.0; ORDER];
        let mut k = 0;
        while k < ORDER / 2 {
            nodes[2 * k] = -POSITIVE_NODES[k];
            nodes[2 * k + 1] = POSITIVE_NODES[k];
            weights[2 * k] = PAIR_WEIGHTS[k];
            weights[2 * k + 1] = PAIR_WEIGHTS[k];
            k += 1;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64; ORDER] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64; ORDER] {
        &self.weights
    }

    /// `(node, weight)` pairs in rule order.
    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `∑ w_j g(t_j)`, approximating `∫ g(u) e^(-u²) du`.
    ///
    /// A non-finite `g` at any node yields a non-finite sum; callers check.
    pub fn hermite_sum<F>(&self, mut g: F) -> f64
    where
        F: FnMut(f64) -> f64,
    {
        self.pairs().map(|(t, w)| w * g(t)).sum()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::new()
    }
}

/// The shared rule instance.
pub const GAUSS_HERMITE_12: QuadratureRule = QuadratureRule::new();

/// Convenience wrapper over [`GAUSS_HERMITE_12`].
pub fn hermite_sum<F>(g: F) -> f64
where
    F: FnMut(f64) -> f64,
{
    GAUSS_HERMITE_12.hermite_sum(g)
}
