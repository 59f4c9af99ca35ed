//! Independent Monte Carlo estimate of the cost of a policy.
//!
//! Paths are simulated under the reference measure — jumps from a rate-1
//! Poisson process, independent of everything else — and each path's cost
//! `∫ γ²/2 + κ Ψ(n + ΔN, z_T)` is weighted by the averaged likelihood
//! `⟨L⟩ = Σ_i w_i L(λ_i)` over the posterior nodes at the starting state.
//! This estimates the same quantity the PDE solver computes, through an
//! entirely different route, which makes it the cross-check of record for
//! the solver and its extracted policy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hjb::{GridPolicy, ValueGrid};
use crate::likelihood::PathRecord;
use crate::model::{FlowState, Model};
use crate::policy::Policy;
use crate::prior::Prior;

#[derive(Debug, Clone, Copy)]
pub struct EvalParams {
    pub t0: f64,
    pub y0: f64,
    pub z0: f64,
    pub n0: u32,
    /// Terminal time (absolute, > t0).
    pub horizon: f64,
    pub kappa: f64,
    pub paths: usize,
    /// Upper bound on the RK4 micro-step of the closed-loop flow.
    pub dt_flow: f64,
    pub seed: u64,
}

/// Monte Carlo estimate with its uncertainty and cost decomposition.
#[derive(Debug, Clone, Copy)]
pub struct EvalReport {
    pub estimate: f64,
    pub std_error: f64,
    pub paths: usize,
    /// Mean weighted control cost `⟨L⟩ ∫ γ²/2`.
    pub control_cost_part: f64,
    /// Mean weighted terminal cost `⟨L⟩ κ Ψ`.
    pub variance_part: f64,
}

/// Estimate the expected cost of `policy` started from `(t0, y0, z0, n0)`.
///
/// The policy is evaluated closed-loop: it reads the simulated path's own
/// jump count and accumulated `z`, never the latent rate. All jump times of
/// a path are drawn before any state is touched, so two policies evaluated
/// with the same seed see identical Poisson skeletons (common random
/// numbers).
pub fn evaluate(
    model: &Model,
    prior: &Prior,
    policy: &impl Policy,
    params: &EvalParams,
) -> Result<EvalReport> {
    if params.paths < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 paths for a standard error, got {}",
            params.paths
        )));
    }
    if params.t0 >= params.horizon {
        return Err(Error::InvalidArgument(format!(
            "evaluation window must satisfy t0 < horizon, got [{}, {}]",
            params.t0, params.horizon
        )));
    }
    if params.dt_flow <= 0.0 || params.kappa <= 0.0 {
        return Err(Error::InvalidArgument(
            "dt_flow and kappa must be > 0".into(),
        ));
    }
    let base_weights = prior.posterior_weights(params.n0, params.z0)?;

    let samples: Vec<(f64, f64, f64)> = (0..params.paths)
        .into_par_iter()
        .map(|p| -> Result<(f64, f64, f64)> {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(p as u64);

            // Rate-1 Poisson skeleton on (t0, horizon], drawn up front.
            let mut jump_times = Vec::new();
            let mut s = params.t0;
            loop {
                let gap: f64 = Exp1.sample(&mut rng);
                s += gap;
                if s > params.horizon {
                    break;
                }
                jump_times.push(s);
            }

            let mut state = FlowState {
                t: params.t0,
                y: params.y0,
                z: params.z0,
            };
            let mut n = params.n0;
            let mut control_cost = 0.0;
            let mut g_at_jumps = Vec::with_capacity(jump_times.len());
            for segment_end in jump_times.iter().copied().chain([params.horizon]) {
                while state.t < segment_end - 1e-15 {
                    let dt = params.dt_flow.min(segment_end - state.t);
                    let gamma = policy.control(state.t, state.y, state.z, n);
                    if !gamma.is_finite() {
                        return Err(Error::NonFinite(format!(
                            "policy output at t={}, y={}, z={}, n={n}",
                            state.t, state.y, state.z
                        )));
                    }
                    control_cost += 0.5 * gamma * gamma * dt;
                    state = model.flow_step(state, gamma, dt)?;
                }
                state.t = segment_end;
                if segment_end < params.horizon {
                    g_at_jumps.push(model.shape(state.y));
                    state.y = 0.0;
                    n += 1;
                }
            }

            let record = PathRecord::new(
                params.t0,
                params.horizon,
                jump_times,
                g_at_jumps,
                state.z - params.z0,
            )?;
            let weight: f64 = base_weights
                .iter()
                .filter(|node| node.weight > 0.0)
                .map(|node| node.weight * record.log_weight(node.lambda).exp())
                .sum();
            let terminal = params.kappa * prior.posterior_variance(n, state.z)?;
            Ok((
                weight * (control_cost + terminal),
                weight * control_cost,
                weight * terminal,
            ))
        })
        .collect::<Result<_>>()?;

    let count = samples.len() as f64;
    let mean: f64 = samples.iter().map(|s| s.0).sum::<f64>() / count;
    let var: f64 = samples
        .iter()
        .map(|s| (s.0 - mean) * (s.0 - mean))
        .sum::<f64>()
        / (count - 1.0);
    Ok(EvalReport {
        estimate: mean,
        std_error: (var / count).sqrt(),
        paths: samples.len(),
        control_cost_part: samples.iter().map(|s| s.1).sum::<f64>() / count,
        variance_part: samples.iter().map(|s| s.2).sum::<f64>() / count,
    })
}

/// One row of a PDE-versus-Monte-Carlo comparison.
#[derive(Debug, Clone, Copy)]
pub struct PointComparison {
    pub t: f64,
    pub y: f64,
    pub z: f64,
    pub n: u32,
    pub pde_value: f64,
    pub mc: EvalReport,
    pub gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub points: Vec<PointComparison>,
    pub scheme_tolerance: f64,
}

impl ComparisonReport {
    pub fn all_pass(&self) -> bool {
        self.points.iter().all(|p| p.pass)
    }

    /// Structured key/value rendering, one line per point.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            out.push_str(&format!(
                "point t={} y={} z={} n={} pde={:.6} mc={:.6} se={:.2e} gap={:+.2e} tol={:.2e} {}\n",
                p.t,
                p.y,
                p.z,
                p.n,
                p.pde_value,
                p.mc.estimate,
                p.mc.std_error,
                p.gap,
                p.tolerance,
                if p.pass { "PASS" } else { "FAIL" }
            ));
        }
        out.push_str(&format!(
            "overall {} (scheme tolerance {})\n",
            if self.all_pass() { "PASS" } else { "FAIL" },
            self.scheme_tolerance
        ));
        out
    }

    /// Per-point CSV with header.
    pub fn write_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "t,y,z,n,pde,mc,std_error,gap,tolerance,pass")?;
        for p in &self.points {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                p.t,
                p.y,
                p.z,
                p.n,
                p.pde_value,
                p.mc.estimate,
                p.mc.std_error,
                p.gap,
                p.tolerance,
                p.pass
            )?;
        }
        Ok(())
    }
}

/// Evaluate the grid's own policy by Monte Carlo at each point and compare
/// with the grid value; a point passes when the gap is within
/// `3 · std_error + scheme_tolerance`.
#[allow(clippy::too_many_arguments)]
pub fn compare_to_pde(
    grid: &ValueGrid,
    model: &Model,
    prior: &Prior,
    points: &[(f64, f64, f64, u32)],
    paths: usize,
    dt_flow: f64,
    seed: u64,
    scheme_tolerance: f64,
) -> Result<ComparisonReport> {
    let policy = GridPolicy::new(grid);
    let mut rows = Vec::with_capacity(points.len());
    for &(t, y, z, n) in points {
        let pde_value = grid.eval_value(t, y, z, n);
        let mc = evaluate(
            model,
            prior,
            &policy,
            &EvalParams {
                t0: t,
                y0: y,
                z0: z,
                n0: n,
                horizon: grid.spec().horizon,
                kappa: grid.spec().kappa,
                paths,
                dt_flow,
                seed,
            },
        )?;
        let gap = pde_value - mc.estimate;
        let tolerance = 3.0 * mc.std_error + scheme_tolerance;
        rows.push(PointComparison {
            t,
            y,
            z,
            n,
            pde_value,
            mc,
            gap,
            tolerance,
            pass: gap.abs() <= tolerance,
        });
    }
    Ok(ComparisonReport {
        points: rows,
        scheme_tolerance,
    })
}
