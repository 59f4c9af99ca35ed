//! Explicit monotone finite-difference solver for the dynamic programming
//! equation of the probing problem, on a `(t, y, z, n)` grid.
//!
//! The value function satisfies, backward from `v(T, y, z, n) = κ Ψ(n, z)`,
//!
//! ```text
//! ∂_t v + min_γ { γ²/2 + (b(y)+γ) ∂_y v } + g(y) ∂_z v
//!       + θ_n(y, z) [ v(t, 0, z, n+1) - v(t, y, z, n) ] = 0,
//! ```
//!
//! where `θ_n(y, z) = Ξ(n, z) g(y)` is the posterior-mean jump intensity and
//! the nonlocal term couples each level `n` to the reset state at level
//! `n + 1`. The scheme upwinds the `y`-transport per candidate control (by
//! the sign of `b + γ`) and the `z`-transport by the sign of `g >= 0`, which
//! keeps every stencil weight nonnegative under the CFL condition; the jump
//! term enters as a positive zero-order coupling. Controls are restricted to
//! a uniform odd-sized grid on `[-gamma_max, gamma_max]`, so the minimizer
//! of the piecewise-quadratic control cost can be located in O(1) per node.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::policy::Policy;
use crate::prior::Prior;

/// Number of control grid points used when none is specified.
pub const DEFAULT_CONTROL_POINTS: usize = 81;

/// Rectangular grid specification for the backward solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Terminal time `T`.
    pub horizon: f64,
    /// Number of time intervals (`nt + 1` stored slices).
    pub nt: usize,
    pub y_min: f64,
    pub y_max: f64,
    /// Number of y nodes; the reset point y = 0 must land on a node.
    pub ny: usize,
    /// z spans `[0, z_max]`; must cover `horizon * g_max`.
    pub z_max: f64,
    pub nz: usize,
    /// Largest tracked jump count; jumps from level `n_max` stay at `n_max`.
    pub n_max: u32,
    /// Controls are clamped to `[-gamma_max, gamma_max]`.
    pub gamma_max: f64,
    /// Number of discrete control points (odd so that 0 is included).
    pub control_points: usize,
    /// Weight of the terminal posterior-variance cost.
    pub kappa: f64,
}

/// CFL diagnostics produced by [`GridSpec::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CflReport {
    /// `dt * (transport + jump rates)`; must be <= 1.
    pub cfl_number: f64,
    pub dt: f64,
    /// Largest stable time step for this grid.
    pub dt_max: f64,
}

impl GridSpec {
    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn dz(&self) -> f64 {
        self.z_max / (self.nz - 1) as f64
    }

    pub fn n_levels(&self) -> usize {
        self.n_max as usize + 1
    }

    pub fn y_nodes(&self) -> Vec<f64> {
        (0..self.ny)
            .map(|i| self.y_min + i as f64 * self.dy())
            .collect()
    }

    pub fn z_nodes(&self) -> Vec<f64> {
        (0..self.nz).map(|j| j as f64 * self.dz()).collect()
    }

    /// Index of the y node at the reset target 0.
    pub fn reset_index(&self) -> Result<usize> {
        let idx = (-self.y_min / self.dy()).round();
        let y_at = self.y_min + idx * self.dy();
        if idx < 0.0 || idx as usize >= self.ny || y_at.abs() > 1e-9 * self.dy().max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "y = 0 must be a grid node (nearest node sits at {y_at:.3e})"
            )));
        }
        Ok(idx as usize)
    }

    pub fn control_grid(&self) -> Vec<f64> {
        let m = self.control_points;
        let step = 2.0 * self.gamma_max / (m - 1) as f64;
        (0..m).map(|k| -self.gamma_max + k as f64 * step).collect()
    }

    /// Check grid shape, reset-node alignment, z coverage and the CFL bound.
    pub fn validate(&self, model: &Model, prior: &Prior) -> Result<CflReport> {
        if self.nt < 1 {
            return Err(Error::InvalidGrid("nt must be >= 1".into()));
        }
        if self.ny < 2 || self.nz < 2 {
            return Err(Error::InvalidGrid("ny and nz must be >= 2".into()));
        }
        if !(self.y_min < 0.0 && self.y_max > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "need y_min < 0 < y_max so the reset target is interior, got [{}, {}]",
                self.y_min, self.y_max
            )));
        }
        if self.horizon <= 0.0 {
            return Err(Error::InvalidGrid("horizon must be > 0".into()));
        }
        if self.gamma_max <= 0.0 || self.kappa <= 0.0 {
            return Err(Error::InvalidGrid("gamma_max and kappa must be > 0".into()));
        }
        if self.control_points < 3 || self.control_points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(
                "control_points must be odd and >= 3".into(),
            ));
        }
        self.reset_index()?;
        let needed = self.horizon * model.g_max();
        if self.z_max + 1e-12 < needed {
            return Err(Error::InvalidGrid(format!(
                "z_max = {} cannot contain the dynamics; need at least horizon * g_max = {needed}",
                self.z_max
            )));
        }
        let rate = (model.max_abs_drift(self.y_min, self.y_max) + self.gamma_max) / self.dy()
            + model.g_max() / self.dz()
            + prior.lambda_max() * model.g_max();
        let cfl_number = self.dt() * rate;
        if cfl_number > 1.0 + 1e-12 {
            return Err(Error::CflViolation {
                cfl_number,
                dt_max: 1.0 / rate,
            });
        }
        Ok(CflReport {
            cfl_number,
            dt: self.dt(),
            dt_max: 1.0 / rate,
        })
    }

    /// Smallest `n_max` whose prior-predictive tail under the dominating
    /// rate `lambda_max * g_max` stays below `tail_prob`.
    pub fn suggest_n_max(prior: &Prior, model: &Model, horizon: f64, tail_prob: f64) -> u32 {
        let cap = 400u32;
        for n in 0..cap {
            let tail: f64 = prior
                .nodes()
                .iter()
                .map(|node| node.weight * poisson_tail(node.lambda * model.g_max() * horizon, n))
                .sum();
            if tail < tail_prob {
                return n;
            }
        }
        cap
    }
}

/// `P(N > n)` for `N ~ Poisson(mean)`.
pub fn poisson_tail(mean: f64, n: u32) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let mut term = (-mean).exp();
    let mut cdf = term;
    for k in 1..=n {
        term *= mean / k as f64;
        cdf += term;
    }
    (1.0 - cdf).max(0.0)
}

/// Clamped Hamiltonian `-min_{|γ| <= gamma_max} [ γ²/2 + (b(y)+γ) p1 + g(y) p2 ]`
/// together with the minimizing control `γ* = -clamp(p1)`.
pub fn hamiltonian(model: &Model, y: f64, p1: f64, p2: f64, gamma_max: f64) -> (f64, f64) {
    let c = p1.clamp(-gamma_max, gamma_max);
    let argmin = -c;
    let value = c * p1 - 0.5 * c * c - model.drift(y) * p1 - model.shape(y) * p2;
    (value, argmin)
}

/// Posterior-mean jump intensity `θ_n(y, z) = Ξ(n, z) g(y)`.
pub fn posterior_intensity(prior: &Prior, model: &Model, y: f64, z: f64, n: u32) -> Result<f64> {
    Ok(prior.posterior_mean(n, z)? * model.shape(y))
}

/// Solved value function and feedback policy on the grid.
#[derive(Debug, Clone)]
pub struct ValueGrid {
    spec: GridSpec,
    y_nodes: Vec<f64>,
    z_nodes: Vec<f64>,
    /// `v(t_k, y_i, z_j, n)`, index `((k * ny + i) * nz + j) * n_levels + n`.
    values: Vec<f64>,
    /// Minimizing control at the same nodes.
    policy: Vec<f64>,
}

impl ValueGrid {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn policy(&self) -> &[f64] {
        &self.policy
    }

    pub fn node_index(&self, k: usize, i: usize, j: usize, n: u32) -> usize {
        ((k * self.spec.ny + i) * self.spec.nz + j) * self.spec.n_levels() + n as usize
    }

    pub fn value_at_node(&self, k: usize, i: usize, j: usize, n: u32) -> f64 {
        self.values[self.node_index(k, i, j, n)]
    }

    pub fn policy_at_node(&self, k: usize, i: usize, j: usize, n: u32) -> f64 {
        self.policy[self.node_index(k, i, j, n)]
    }

    fn interpolate(&self, data: &[f64], t: f64, y: f64, z: f64, n: u32) -> f64 {
        let spec = &self.spec;
        let lev = spec.n_levels();
        let n = (n as usize).min(spec.n_max as usize);
        let locate = |x: f64, lo: f64, step: f64, count: usize| -> (usize, f64) {
            let clamped = x.clamp(lo, lo + step * (count - 1) as f64);
            let pos = (clamped - lo) / step;
            let idx = (pos.floor() as usize).min(count - 2);
            (idx, (pos - idx as f64).clamp(0.0, 1.0))
        };
        let (k0, ft) = locate(t, 0.0, spec.dt(), spec.nt + 1);
        let (i0, fy) = locate(y, spec.y_min, spec.dy(), spec.ny);
        let (j0, fz) = locate(z, 0.0, spec.dz(), spec.nz);
        let at = |k: usize, i: usize, j: usize| data[((k * spec.ny + i) * spec.nz + j) * lev + n];
        let mut acc = 0.0;
        for (dk, wt) in [(0, 1.0 - ft), (1, ft)] {
            if wt == 0.0 {
                continue;
            }
            for (di, wy) in [(0, 1.0 - fy), (1, fy)] {
                if wy == 0.0 {
                    continue;
                }
                for (dj, wz) in [(0, 1.0 - fz), (1, fz)] {
                    if wz == 0.0 {
                        continue;
                    }
                    acc += wt * wy * wz * at(k0 + dk, i0 + di, j0 + dj);
                }
            }
        }
        acc
    }

    /// Multilinear interpolation of the value in `(t, y, z)`; `y`, `z` are
    /// clamped into the grid box and `n` to `n_max`. Exact at nodes.
    pub fn eval_value(&self, t: f64, y: f64, z: f64, n: u32) -> f64 {
        self.interpolate(&self.values, t, y, z, n)
    }

    /// Multilinear interpolation of the feedback control.
    pub fn eval_policy(&self, t: f64, y: f64, z: f64, n: u32) -> f64 {
        self.interpolate(&self.policy, t, y, z, n)
    }

    /// CSV export: header `t,y,z,n,v,gamma`, row-major over `(t, y, z, n)`,
    /// 17 significant digits so values round-trip bit-exactly.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "t,y,z,n,v,gamma")?;
        let spec = &self.spec;
        let dt = spec.dt();
        for k in 0..=spec.nt {
            let t = k as f64 * dt;
            for (i, &y) in self.y_nodes.iter().enumerate() {
                for (j, &z) in self.z_nodes.iter().enumerate() {
                    for n in 0..spec.n_levels() {
                        let idx = ((k * spec.ny + i) * spec.nz + j) * spec.n_levels() + n;
                        writeln!(
                            out,
                            "{t:.16e},{y:.16e},{z:.16e},{n},{:.16e},{:.16e}",
                            self.values[idx], self.policy[idx]
                        )?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Rebuild a grid from its CSV export and the matching spec.
    pub fn read_csv(
        spec: &GridSpec,
        model: &Model,
        prior: &Prior,
        input: &mut impl BufRead,
    ) -> Result<Self> {
        spec.validate(model, prior)?;
        let expected = (spec.nt + 1) * spec.ny * spec.nz * spec.n_levels();
        let mut values = Vec::with_capacity(expected);
        let mut policy = Vec::with_capacity(expected);
        let mut lines = input.lines();
        let header = lines
            .next()
            .transpose()
            .map_err(|e| Error::InvalidArgument(format!("value CSV: {e}")))?
            .unwrap_or_default();
        if header.trim() != "t,y,z,n,v,gamma" {
            return Err(Error::InvalidArgument(format!(
                "value CSV: unexpected header '{header}'"
            )));
        }
        for line in lines {
            let line = line.map_err(|e| Error::InvalidArgument(format!("value CSV: {e}")))?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let mut nth = |idx: usize| -> Result<f64> {
                fields
                    .nth(idx)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("value CSV: bad row '{line}'")))
            };
            values.push(nth(4)?);
            policy.push(nth(0)?);
        }
        if values.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "value CSV: got {} rows, grid needs {expected}",
                values.len()
            )));
        }
        Ok(Self {
            spec: spec.clone(),
            y_nodes: spec.y_nodes(),
            z_nodes: spec.z_nodes(),
            values,
            policy,
        })
    }
}

/// Feedback policy read off a solved grid.
pub struct GridPolicy<'a> {
    grid: &'a ValueGrid,
}

impl<'a> GridPolicy<'a> {
    pub fn new(grid: &'a ValueGrid) -> Self {
        Self { grid }
    }
}

impl Policy for GridPolicy<'_> {
    fn control(&self, t: f64, y: f64, z: f64, n: u32) -> f64 {
        self.grid.eval_policy(t, y, z, n)
    }
}

/// Precomputed per-node coefficients shared by the solver entry points.
struct Stepper {
    ny: usize,
    nz: usize,
    lev: usize,
    dt: f64,
    inv_dy: f64,
    inv_dz: f64,
    reset_index: usize,
    gamma_max: f64,
    /// Control grid spacing and its reciprocal.
    dgamma: f64,
    inv_dgamma: f64,
    /// Control count.
    m: usize,
    drift: Vec<f64>,
    shape: Vec<f64>,
    /// `Ξ(n, z_j)` laid out as `[j * n_levels + n]`, matching the slices.
    post_mean: Vec<f64>,
    /// Terminal `κ Ψ(n, z_j)`, same layout.
    terminal: Vec<f64>,
}

impl Stepper {
    fn build(model: &Model, prior: &Prior, spec: &GridSpec) -> Result<Self> {
        let y_nodes = spec.y_nodes();
        let z_nodes = spec.z_nodes();
        let lev = spec.n_levels();
        let mut post_mean = vec![0.0; lev * spec.nz];
        let mut terminal = vec![0.0; lev * spec.nz];
        for (j, &z) in z_nodes.iter().enumerate() {
            for n in 0..lev {
                post_mean[j * lev + n] = prior.posterior_mean(n as u32, z)?;
                terminal[j * lev + n] = spec.kappa * prior.posterior_variance(n as u32, z)?;
            }
        }
        Ok(Self {
            ny: spec.ny,
            nz: spec.nz,
            lev,
            dt: spec.dt(),
            inv_dy: 1.0 / spec.dy(),
            inv_dz: 1.0 / spec.dz(),
            reset_index: spec.reset_index()?,
            gamma_max: spec.gamma_max,
            dgamma: 2.0 * spec.gamma_max / (spec.control_points - 1) as f64,
            inv_dgamma: (spec.control_points - 1) as f64 / (2.0 * spec.gamma_max),
            m: spec.control_points,
            drift: y_nodes.iter().map(|&y| model.drift(y)).collect(),
            shape: y_nodes.iter().map(|&y| model.shape(y)).collect(),
            post_mean,
            terminal,
        })
    }

    fn terminal_slice(&self) -> Vec<f64> {
        // v(T, ·) = κ Ψ(n, z), independent of y.
        let row = self.nz * self.lev;
        let mut slice = vec![0.0; self.ny * row];
        for i in 0..self.ny {
            slice[i * row..(i + 1) * row].copy_from_slice(&self.terminal);
        }
        slice
    }

    /// Best control on the discrete grid restricted to `[lo_k, hi_k]` for
    /// the convex branch cost `γ²/2 + (b + γ) d`. The continuous minimizer
    /// is `-d`; on a uniform grid the discrete argmin is one of its two
    /// neighbors, clamped into the admissible index range.
    #[inline(always)]
    fn branch_min(&self, b: f64, d: f64, lo_k: isize, hi_k: isize) -> Option<(f64, f64)> {
        if lo_k > hi_k {
            return None;
        }
        let pos = (self.gamma_max - d) * self.inv_dgamma;
        let kf = (pos.floor() as isize).clamp(lo_k, hi_k);
        let kc = (pos.ceil() as isize).clamp(lo_k, hi_k);
        let eval = |k: isize| {
            let gamma = -self.gamma_max + k as f64 * self.dgamma;
            let a = b + gamma;
            (0.5 * gamma * gamma + a * d, gamma)
        };
        let best = eval(kf);
        if kc != kf {
            let other = eval(kc);
            if other.0 < best.0 {
                return Some(other);
            }
        }
        Some(best)
    }

    /// One backward step: read the `k+1` slice, write values and controls of
    /// the `k` slice. Node updates are independent, so rows are processed in
    /// parallel.
    fn step(&self, v_next: &[f64], v_out: &mut [f64], pol_out: &mut [f64]) {
        let row = self.nz * self.lev;
        let lev = self.lev;
        let kmax = (self.m - 1) as isize;
        v_out
            .par_chunks_mut(row)
            .zip(pol_out.par_chunks_mut(row))
            .enumerate()
            .for_each(|(i, (v_row, p_row))| {
                let b = self.drift[i];
                let g = self.shape[i];
                let dt = self.dt;
                let here = &v_next[i * row..(i + 1) * row];
                // Boundary rows fall back to the interior-side difference,
                // i.e. linear extrapolation of the value past the edge.
                let above = (i + 1 < self.ny).then(|| &v_next[(i + 1) * row..(i + 2) * row]);
                let below = (i > 0).then(|| &v_next[(i - 1) * row..i * row]);
                let reset_row = &v_next[self.reset_index * row..(self.reset_index + 1) * row];
                // Split index of the control grid at γ = -b: candidates with
                // γ >= -b move right (forward difference), the rest move left.
                let split = (self.gamma_max - b) * self.inv_dgamma;
                let lo_p = (split.ceil() as isize).max(0);
                let hi_m = (split.floor() as isize).min(kmax);
                for j in 0..self.nz {
                    let base = j * lev;
                    let here_j = &here[base..base + lev];
                    let above_j = above.map(|r| &r[base..base + lev]);
                    let below_j = below.map(|r| &r[base..base + lev]);
                    let (z_row, z_sign) = if j + 1 < self.nz {
                        (&here[base + lev..base + 2 * lev], 1.0)
                    } else {
                        (&here[base - lev..base], -1.0)
                    };
                    let reset_j = &reset_row[base..base + lev];
                    let mean_j = &self.post_mean[base..base + lev];
                    let out_j = &mut v_row[base..base + lev];
                    let pol_j = &mut p_row[base..base + lev];
                    for n in 0..lev {
                        let v_c = here_j[n];
                        // At the y edges both one-sided differences collapse
                        // onto the available one.
                        let fwd = above_j.map(|r| (r[n] - v_c) * self.inv_dy);
                        let bwd = below_j.map(|r| (v_c - r[n]) * self.inv_dy);
                        let dy_p = fwd.unwrap_or_else(|| bwd.unwrap());
                        let dy_m = bwd.unwrap_or(dy_p);
                        let dz = z_sign * (z_row[n] - v_c) * self.inv_dz;
                        let theta = mean_j[n] * g;
                        let n_next = if n + 1 < lev { n + 1 } else { n };
                        let jump_gain = reset_j[n_next] - v_c;
                        // Control minimization over the two upwind branches,
                        // lower branch first so ties resolve to smaller γ.
                        let lower = self.branch_min(b, dy_m, 0, hi_m);
                        let upper = self.branch_min(b, dy_p, lo_p, kmax);
                        let (q, gamma) = match (lower, upper) {
                            (Some(l), Some(u)) => {
                                if u.0 < l.0 {
                                    u
                                } else {
                                    l
                                }
                            }
                            (Some(l), None) => l,
                            (None, Some(u)) => u,
                            (None, None) => unreachable!("control grid is nonempty"),
                        };
                        out_j[n] = v_c + dt * (q + g * dz + theta * jump_gain);
                        pol_j[n] = gamma;
                    }
                }
            });
    }
}

/// Solve backward over the whole grid, retaining every time slice of the
/// value and the policy.
pub fn solve(model: &Model, prior: &Prior, spec: &GridSpec) -> Result<ValueGrid> {
    spec.validate(model, prior)?;
    let stepper = Stepper::build(model, prior, spec)?;
    let slice_len = spec.ny * spec.nz * spec.n_levels();
    let mut values = vec![0.0; (spec.nt + 1) * slice_len];
    let mut policy = vec![0.0; (spec.nt + 1) * slice_len];
    values[spec.nt * slice_len..].copy_from_slice(&stepper.terminal_slice());
    for k in (0..spec.nt).rev() {
        let (head, tail) = values.split_at_mut((k + 1) * slice_len);
        let v_next = &tail[..slice_len];
        let v_out = &mut head[k * slice_len..];
        let pol_out = &mut policy[k * slice_len..(k + 1) * slice_len];
        stepper.step(v_next, v_out, pol_out);
    }
    Ok(ValueGrid {
        spec: spec.clone(),
        y_nodes: spec.y_nodes(),
        z_nodes: spec.z_nodes(),
        values,
        policy,
    })
}

/// Solve backward keeping only two slices; returns the `t = 0` value slice,
/// indexed `(i * nz + j) * n_levels + n`. Used for refinement studies where
/// retaining the full grid would be wasteful.
pub fn solve_initial_slice(model: &Model, prior: &Prior, spec: &GridSpec) -> Result<Vec<f64>> {
    spec.validate(model, prior)?;
    let stepper = Stepper::build(model, prior, spec)?;
    let slice_len = spec.ny * spec.nz * spec.n_levels();
    let mut v_next = stepper.terminal_slice();
    let mut v_cur = vec![0.0; slice_len];
    let mut pol_scratch = vec![0.0; slice_len];
    for _ in 0..spec.nt {
        stepper.step(&v_next, &mut v_cur, &mut pol_scratch);
        std::mem::swap(&mut v_next, &mut v_cur);
    }
    Ok(v_next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;
    use crate::prior::Prior;

    fn small_spec() -> GridSpec {
        GridSpec {
            horizon: 1.0,
            nt: 60,
            y_min: -1.0,
            y_max: 1.0,
            ny: 21,
            z_max: 2.0,
            nz: 21,
            n_max: 3,
            gamma_max: 2.0,
            control_points: 21,
            kappa: 1.0,
        }
    }

    #[test]
    fn hamiltonian_hand_values() {
        let exp = Model::builtin("ou_exp").unwrap();
        let (h, g) = hamiltonian(&exp, 1.0, 0.0, 0.0, 4.0);
        assert_eq!((h, g), (0.0, 0.0));
        // y = 1: b = -1, g = 1, p = (1, 1).
        let (h, g) = hamiltonian(&exp, 1.0, 1.0, 1.0, 4.0);
        assert!((h - 0.5).abs() < 1e-14);
        assert_eq!(g, -1.0);
    }

    #[test]
    fn hamiltonian_clamped_matches_scan() {
        // Constrained quadratic minimum at the boundary of the control box.
        let unit = Model::builtin("const_unit").unwrap();
        let (h, g) = hamiltonian(&unit, 0.3, 10.0, 1.0, 2.0);
        assert_eq!(g, -2.0);
        // Oracle: dense scan of -min over the admissible controls.
        let mut best = f64::INFINITY;
        for k in 0..=400_000 {
            let gamma = -2.0 + 4.0 * k as f64 / 400_000.0;
            let q = 0.5 * gamma * gamma + (unit.drift(0.3) + gamma) * 10.0 + unit.shape(0.3) * 1.0;
            best = best.min(q);
        }
        assert!((h + best).abs() < 1e-9, "h = {h}, -min = {}", -best);
    }

    #[test]
    fn posterior_intensity_values() {
        let exp = Model::builtin("ou_exp").unwrap();
        let two = Prior::from_atoms(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
        let th = posterior_intensity(&two, &exp, 1.0, 0.0, 0).unwrap();
        assert!((th - 0.5).abs() < 1e-14);

        let unit = Model::builtin("const_unit").unwrap();
        let dirac = Prior::from_atoms(&[(1.0, 1.0)]).unwrap();
        for (y, z, n) in [(0.0, 0.0, 0), (1.5, 3.0, 4)] {
            assert_eq!(posterior_intensity(&dirac, &unit, y, z, n).unwrap(), 1.0);
        }

        let dead = Model::custom(vec![(0.0, 0.0), (1.0, 0.0), (2.0, 1.0)]).unwrap();
        assert_eq!(posterior_intensity(&two, &dead, 0.5, 0.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn gridspec_validation_errors() {
        let unit = Model::builtin("const_unit").unwrap();
        let two = Prior::from_atoms(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();

        let mut bad = small_spec();
        bad.nz = 1;
        assert!(bad.validate(&unit, &two).is_err());

        let mut bad = small_spec();
        bad.y_min = 0.1;
        assert!(bad.validate(&unit, &two).is_err());

        // y = 0 off the node lattice.
        let mut bad = small_spec();
        bad.y_min = -0.93;
        assert!(matches!(
            bad.validate(&unit, &two),
            Err(Error::InvalidGrid(_))
        ));

        // z range cannot contain the dynamics.
        let mut bad = small_spec();
        bad.z_max = 0.5;
        assert!(bad.validate(&unit, &two).is_err());

        // Time step too large.
        let mut bad = small_spec();
        bad.nt = 2;
        assert!(matches!(
            bad.validate(&unit, &two),
            Err(Error::CflViolation { .. })
        ));

        assert!(small_spec().validate(&unit, &two).is_ok());
    }

    #[test]
    fn suggest_n_max_tracks_rate() {
        let unit = Model::builtin("const_unit").unwrap();
        let dirac = Prior::from_atoms(&[(1.0, 1.0)]).unwrap();
        let n = GridSpec::suggest_n_max(&dirac, &unit, 1.0, 1e-6);
        // Poisson(1): P(N > 8) ≈ 1.1e-6, P(N > 9) ≈ 1.1e-7.
        assert_eq!(n, 9);
        let zero = Prior::from_atoms(&[(0.0, 1.0)]).unwrap();
        assert_eq!(GridSpec::suggest_n_max(&zero, &unit, 1.0, 1e-6), 0);
    }

    #[test]
    fn poisson_tail_reference_values() {
        assert!((poisson_tail(1.0, 0) - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
        assert_eq!(poisson_tail(0.0, 3), 0.0);
        assert!(poisson_tail(5.0, 40) < 1e-12);
    }

    #[test]
    fn terminal_slice_is_kappa_psi() {
        let unit = Model::builtin("const_unit").unwrap();
        let two = Prior::from_atoms(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
        let mut spec = small_spec();
        spec.kappa = 2.0;
        let grid = solve(&unit, &two, &spec).unwrap();
        for (i, _) in spec.y_nodes().iter().enumerate() {
            for (j, &z) in spec.z_nodes().iter().enumerate() {
                for n in 0..=spec.n_max {
                    let expect = 2.0 * two.posterior_variance(n, z).unwrap();
                    let got = grid.value_at_node(spec.nt, i, j, n);
                    assert!((got - expect).abs() < 1e-14, "({i},{j},{n})");
                }
            }
        }
    }

    #[test]
    fn dirac_prior_solves_to_zero() {
        // No uncertainty: terminal cost and value vanish, control stays 0.
        let unit = Model::builtin("const_unit").unwrap();
        let dirac = Prior::from_atoms(&[(1.0, 1.0)]).unwrap();
        let spec = small_spec();
        let grid = solve(&unit, &dirac, &spec).unwrap();
        assert!(grid.values().iter().all(|&v| v == 0.0));
        assert!(grid.policy().iter().all(|&p| p == 0.0));
        assert_eq!(grid.eval_policy(1.0, 0.3, 0.1, 0), 0.0);
    }

    #[test]
    fn degenerate_posterior_level_is_an_error() {
        // All prior mass at λ = 0 with jump levels to fill: the n >= 1
        // tables cannot be built.
        let unit = Model::builtin("const_unit").unwrap();
        let dead = Prior::from_atoms(&[(0.0, 1.0)]).unwrap();
        let spec = small_spec();
        assert!(matches!(
            solve(&unit, &dead, &spec),
            Err(Error::DegeneratePosterior { .. })
        ));
    }

    #[test]
    fn value_bounds_hold() {
        let unit = Model::builtin("const_unit").unwrap();
        let two = Prior::from_atoms(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
        let spec = small_spec();
        let grid = solve(&unit, &two, &spec).unwrap();
        let cap = spec.kappa * two.lambda_max() * two.lambda_max() / 4.0;
        for &v in grid.values() {
            assert!(v >= 0.0 && v <= cap + 1e-9, "v = {v}");
        }
    }

    #[test]
    fn interpolation_identities() {
        let unit = Model::builtin("const_unit").unwrap();
        let two = Prior::from_atoms(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
        let spec = small_spec();
        let grid = solve(&unit, &two, &spec).unwrap();
        // Exact at a node.
        let (k, i, j, n) = (17, 5, 9, 1);
        let t = k as f64 * spec.dt();
        let y = spec.y_nodes()[i];
        let z = spec.z_nodes()[j];
        assert_eq!(grid.eval_value(t, y, z, n), grid.value_at_node(k, i, j, n));
        assert_eq!(
            grid.eval_policy(t, y, z, n),
            grid.policy_at_node(k, i, j, n)
        );
        // Midpoint in y averages the two neighbors.
        let mid = grid.eval_value(t, y + 0.5 * spec.dy(), z, n);
        let avg = 0.5 * (grid.value_at_node(k, i, j, n) + grid.value_at_node(k, i + 1, j, n));
        assert!((mid - avg).abs() < 1e-15);
        // Out-of-box queries clamp.
        assert_eq!(
            grid.eval_value(t, spec.y_max + 5.0, z, n),
            grid.value_at_node(k, spec.ny - 1, j, n)
        );
        // n clamps to n_max.
        assert_eq!(
            grid.eval_value(t, y, z, 99),
            grid.value_at_node(k, i, j, spec.n_max)
        );
    }

    #[test]
    fn csv_round_trip() {
        let unit = Model::builtin("const_unit").unwrap();
        let two = Prior::from_atoms(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
        let mut spec = small_spec();
        spec.ny = 7;
        spec.nz = 9;
        spec.y_min = -1.0;
        spec.y_max = 2.0;
        let grid = solve(&unit, &two, &spec).unwrap();
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        let mut reader = std::io::BufReader::new(buf.as_slice());
        let back = ValueGrid::read_csv(&spec, &unit, &two, &mut reader).unwrap();
        assert_eq!(grid.values(), back.values());
        assert_eq!(grid.policy(), back.policy());
    }
}
