//! Prior over the unknown jump rate and the reduced posterior family.
//!
//! The prior is a finite weighted node set on `[0, lambda_max]` — either
//! exact atoms or Gauss-Legendre quadrature nodes of a density. Conditioning
//! on an observed path enters only through the pair `(n, z)` (jump count and
//! accumulated `∫ g`): the posterior keeps the same nodes with weights
//! reweighted by `λ^n e^{-λz}`. All weight manipulation runs in log domain
//! with max-subtraction, since `λ^n e^{-λz}` underflows long before the
//! posterior itself degenerates.

use crate::error::{Error, Result};

/// One support point of a [`Prior`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorNode {
    pub lambda: f64,
    pub weight: f64,
}

/// How the node set was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    /// Exact atoms of a discrete prior.
    Atomic,
    /// Quadrature nodes of a continuous density.
    QuadratureOfDensity,
}

/// A probability measure on `[0, lambda_max]` given by weighted nodes,
/// sorted strictly increasing in lambda, weights normalized to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    nodes: Vec<PriorNode>,
    lambda_max: f64,
    kind: PriorKind,
}

/// Sufficient statistics of the observation history: jump count offset `n`
/// and accumulated `z = ∫ g(Y_u) du`. Together with the prior they pin down
/// the posterior exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorState {
    pub n: u32,
    pub z: f64,
}

impl PosteriorState {
    pub fn new(n: u32, z: f64) -> Result<Self> {
        if !z.is_finite() || z < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "posterior state needs z >= 0, got {z}"
            )));
        }
        Ok(Self { n, z })
    }
}

impl Prior {
    /// Build a prior from `(lambda, weight)` atoms. Weights are normalized,
    /// atoms sorted, exact duplicates merged by weight addition.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidPrior("empty atom list".into()));
        }
        for &(lambda, weight) in atoms {
            if !lambda.is_finite() || lambda < 0.0 {
                return Err(Error::InvalidPrior(format!(
                    "atom lambda must be finite and >= 0, got {lambda}"
                )));
            }
            if !weight.is_finite() || weight <= 0.0 {
                return Err(Error::InvalidPrior(format!(
                    "atom weight must be finite and > 0, got {weight}"
                )));
            }
        }
        let mut sorted: Vec<(f64, f64)> = atoms.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut nodes: Vec<PriorNode> = Vec::with_capacity(sorted.len());
        for (lambda, weight) in sorted {
            match nodes.last_mut() {
                Some(last) if last.lambda == lambda => last.weight += weight,
                _ => nodes.push(PriorNode { lambda, weight }),
            }
        }
        let total: f64 = nodes.iter().map(|n| n.weight).sum();
        for node in &mut nodes {
            node.weight /= total;
        }
        let lambda_max = nodes.last().expect("nonempty").lambda;
        Ok(Self {
            nodes,
            lambda_max,
            kind: PriorKind::Atomic,
        })
    }

    /// Discretize a density on `[a, b]` with `k` Gauss-Legendre nodes.
    /// Weights are the quadrature weights times the density, normalized.
    pub fn from_density(
        density: impl Fn(f64) -> f64,
        support: (f64, f64),
        k: usize,
    ) -> Result<Self> {
        let (a, b) = support;
        if !(a.is_finite() && b.is_finite()) || a < 0.0 || a >= b {
            return Err(Error::InvalidPrior(format!(
                "support must satisfy 0 <= a < b, got [{a}, {b}]"
            )));
        }
        if k < 2 {
            return Err(Error::InvalidPrior(format!(
                "need at least 2 quadrature nodes, got {k}"
            )));
        }
        let (xs, ws) = gauss_legendre(k);
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut nodes = Vec::with_capacity(k);
        for (x, w) in xs.iter().zip(ws.iter()) {
            let lambda = mid + half * x;
            let d = density(lambda);
            if !d.is_finite() || d < 0.0 {
                return Err(Error::InvalidPrior(format!(
                    "density must be finite and >= 0, got {d} at lambda={lambda}"
                )));
            }
            nodes.push(PriorNode {
                lambda,
                weight: w * half * d,
            });
        }
        let total: f64 = nodes.iter().map(|n| n.weight).sum();
        if total <= 0.0 {
            return Err(Error::InvalidPrior(
                "density integrates to zero on the support".into(),
            ));
        }
        nodes.retain(|n| n.weight > 0.0);
        for node in &mut nodes {
            node.weight /= total;
        }
        Ok(Self {
            nodes,
            lambda_max: b,
            kind: PriorKind::QuadratureOfDensity,
        })
    }

    pub fn nodes(&self) -> &[PriorNode] {
        &self.nodes
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn kind(&self) -> PriorKind {
        self.kind
    }

    /// Log weight of each node after conditioning on `(n, z)`, unnormalized:
    /// `ln w_i + n ln λ_i - λ_i z`. Nodes at `λ = 0` get `-∞` once `n >= 1`.
    fn log_terms(&self, n: u32, z: f64) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|node| {
                if node.lambda == 0.0 {
                    if n == 0 {
                        node.weight.ln()
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    node.weight.ln() + f64::from(n) * node.lambda.ln() - node.lambda * z
                }
            })
            .collect()
    }

    /// `log Φ(n, z)` where `Φ(n, z) = Σ_i w_i λ_i^n e^{-λ_i z}` is the
    /// partition function of the reweighted family. Returns `-∞` when all
    /// mass sits at `λ = 0` and `n >= 1`.
    ///
    /// `z` may be negative: the sum converges for any real `z` on compact
    /// support, and finite-difference probes need values just below 0.
    pub fn log_partition(&self, n: u32, z: f64) -> f64 {
        if n == 0 && z == 0.0 {
            // Weights are normalized by construction.
            return 0.0;
        }
        log_sum_exp(&self.log_terms(n, z))
    }

    /// Posterior node weights given `(n, z)`, normalized to one. The weight
    /// of a `λ = 0` node is exactly zero whenever `n >= 1`.
    pub fn posterior_weights(&self, n: u32, z: f64) -> Result<Vec<PriorNode>> {
        let terms = self.log_terms(n, z);
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::DegeneratePosterior { n, z });
        }
        let mut sum = 0.0;
        let mut weights: Vec<f64> = terms
            .iter()
            .map(|&t| {
                let w = (t - max).exp();
                sum += w;
                w
            })
            .collect();
        for w in &mut weights {
            *w /= sum;
        }
        Ok(self
            .nodes
            .iter()
            .zip(weights)
            .map(|(node, weight)| PriorNode {
                lambda: node.lambda,
                weight,
            })
            .collect())
    }

    fn central_moments(&self, n: u32, z: f64) -> Result<(f64, f64, f64)> {
        let weights = self.posterior_weights(n, z)?;
        let mean: f64 = weights.iter().map(|w| w.weight * w.lambda).sum();
        let mut m2 = 0.0;
        let mut m3 = 0.0;
        for w in &weights {
            let d = w.lambda - mean;
            m2 += w.weight * d * d;
            m3 += w.weight * d * d * d;
        }
        Ok((mean, m2, m3))
    }

    /// Posterior mean `Ξ(n, z) = Φ(n+1, z) / Φ(n, z)`, in `[0, lambda_max]`.
    pub fn posterior_mean(&self, n: u32, z: f64) -> Result<f64> {
        Ok(self.central_moments(n, z)?.0)
    }

    /// Posterior variance `Ψ(n, z)`, in `[0, lambda_max^2 / 4]`.
    pub fn posterior_variance(&self, n: u32, z: f64) -> Result<f64> {
        Ok(self.central_moments(n, z)?.1)
    }

    /// Analytic `∂_z Ψ(n, z)`, which equals minus the third central moment
    /// of the posterior; bounded by `lambda_max^3 / 2` in absolute value.
    /// When the posterior is concentrated at 0 the variance stays 0 and so
    /// does the derivative.
    pub fn posterior_variance_dz(&self, n: u32, z: f64) -> Result<f64> {
        Ok(-self.central_moments(n, z)?.2)
    }

    pub fn prior_mean(&self) -> f64 {
        self.posterior_mean(0, 0.0).expect("prior has mass")
    }

    pub fn prior_variance(&self) -> f64 {
        self.posterior_variance(0, 0.0).expect("prior has mass")
    }
}

/// `log Σ exp(x_i)` with max-subtraction; `-∞` if every input is `-∞`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// Legendre recurrence. Exact (up to rounding) for polynomials of degree
/// `2k - 1`, which is what makes moment ratios of smooth densities converge
/// spectrally.
fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; k];
    let mut ws = vec![0.0; k];
    let kf = k as f64;
    for i in 0..k.div_ceil(2) {
        // Tricomi initial guess for the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (kf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_k and P_k' by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=k {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = kf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        ws[i] = w;
        xs[k - 1 - i] = x;
        ws[k - 1 - i] = w;
    }
    (xs, ws)
}
