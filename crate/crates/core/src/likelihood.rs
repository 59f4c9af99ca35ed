//! Change-of-measure weight of an observed path.
//!
//! Under the reference measure the jump process is a rate-1 Poisson process;
//! reweighting a path by
//! `L(λ) = Π_i λ g(Y_{τ_i-}) · exp((t1 - t0) - λ ∫ g(Y_u) du)`
//! turns it into the process with intensity `λ g(Y)`. The weight depends on
//! the path only through the jump-time shape values and the accumulated
//! integral, which is all [`PathRecord`] stores.

use crate::error::{Error, Result};
use crate::prior::{log_sum_exp, Prior, PriorNode};

/// Sufficient statistics of a path segment for likelihood evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub t0: f64,
    pub t1: f64,
    /// Jump times, strictly increasing, in `(t0, t1]`.
    pub jump_times: Vec<f64>,
    /// `g(Y_{τ-})` at each jump, same length as `jump_times`.
    pub g_at_jumps: Vec<f64>,
    /// `∫_{t0}^{t1} g(Y_u) du`.
    pub integral_g: f64,
}

impl PathRecord {
    pub fn new(
        t0: f64,
        t1: f64,
        jump_times: Vec<f64>,
        g_at_jumps: Vec<f64>,
        integral_g: f64,
    ) -> Result<Self> {
        if t1 < t0 {
            return Err(Error::InvalidArgument(format!(
                "path record needs t1 >= t0, got [{t0}, {t1}]"
            )));
        }
        if jump_times.len() != g_at_jumps.len() {
            return Err(Error::InvalidArgument(
                "jump_times and g_at_jumps must have the same length".into(),
            ));
        }
        if !jump_times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "jump times must be strictly increasing".into(),
            ));
        }
        if let (Some(first), Some(last)) = (jump_times.first(), jump_times.last()) {
            if *first <= t0 || *last > t1 + 1e-12 {
                return Err(Error::InvalidArgument(
                    "jump times must lie in (t0, t1]".into(),
                ));
            }
        }
        if !integral_g.is_finite() || integral_g < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "integral_g must be finite and >= 0, got {integral_g}"
            )));
        }
        Ok(Self {
            t0,
            t1,
            jump_times,
            g_at_jumps,
            integral_g,
        })
    }

    pub fn jumps(&self) -> usize {
        self.jump_times.len()
    }

    /// `log L(λ)`. Returns `-∞` when the path is impossible under `λ`:
    /// a jump with `λ = 0`, or a jump where the shape vanished.
    pub fn log_weight(&self, lambda: f64) -> f64 {
        let mut log_l = (self.t1 - self.t0) - lambda * self.integral_g;
        for &g in &self.g_at_jumps {
            let rate = lambda * g;
            if rate <= 0.0 {
                return f64::NEG_INFINITY;
            }
            log_l += rate.ln();
        }
        log_l
    }
}

/// Posterior node weights after reweighting the prior by the path likelihood,
/// computed as a softmax over `ln w_i + log L(λ_i)`.
pub fn posterior_from_path(prior: &Prior, path: &PathRecord) -> Result<Vec<PriorNode>> {
    let terms: Vec<f64> = prior
        .nodes()
        .iter()
        .map(|node| node.weight.ln() + path.log_weight(node.lambda))
        .collect();
    let norm = log_sum_exp(&terms);
    if norm == f64::NEG_INFINITY {
        return Err(Error::DegeneratePosterior {
            n: path.jumps() as u32,
            z: path.integral_g,
        });
    }
    Ok(prior
        .nodes()
        .iter()
        .zip(terms)
        .map(|(node, t)| PriorNode {
            lambda: node.lambda,
            weight: (t - norm).exp(),
        })
        .collect())
}
