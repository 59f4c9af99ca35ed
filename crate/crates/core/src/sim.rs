//! Trajectory simulation under the true measure: the rate parameter is fixed
//! or drawn from the prior, jumps come from exact thinning against the
//! dominating rate `λ g_max`, and the posterior statistics are tracked along
//! the way.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::likelihood::PathRecord;
use crate::model::{FlowState, Model};
use crate::policy::Policy;
use crate::prior::Prior;

/// How the realized rate parameter is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    Fixed(f64),
    SampleFromPrior,
}

#[derive(Debug, Clone, Copy)]
pub struct SimParams {
    pub horizon: f64,
    /// Spacing of the recorded output grid (decoupled from integration).
    pub dt_record: f64,
    /// Upper bound on the RK4 micro-step between events.
    pub dt_flow: f64,
    pub y0: f64,
    pub lambda: LambdaChoice,
    pub seed: u64,
    /// Sub-stream of the master seed; path `i` of a batch uses stream `i`,
    /// so parallel generation is reproducible regardless of scheduling.
    pub stream: u64,
}

/// A simulated path with posterior statistics on the recording grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub y_path: Vec<f64>,
    pub gamma_path: Vec<f64>,
    pub n_path: Vec<u32>,
    pub z_path: Vec<f64>,
    pub post_mean: Vec<f64>,
    pub post_var: Vec<f64>,
    pub jump_times: Vec<f64>,
    /// `g(Y)` just before each jump; with the jump times and `z` this is
    /// everything a likelihood evaluation needs.
    pub g_at_jumps: Vec<f64>,
    pub lambda_true: f64,
    pub seed: u64,
    pub stream: u64,
    /// `∫ Ξ(n_u, z_u) g(Y_u) du` over the whole run; `N_T` minus this is a
    /// martingale increment and should average to zero over paths.
    pub compensator: f64,
}

impl Trajectory {
    pub fn jumps(&self) -> u32 {
        self.jump_times.len() as u32
    }

    /// Sufficient statistics of the full run for likelihood evaluation.
    pub fn path_record(&self) -> Result<PathRecord> {
        let t1 = *self.times.last().expect("nonempty trajectory");
        PathRecord::new(
            0.0,
            t1,
            self.jump_times.clone(),
            self.g_at_jumps.clone(),
            *self.z_path.last().expect("nonempty trajectory"),
        )
    }

    /// CSV with header `t,y,gamma,n,z,post_mean,post_var`.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "t,y,gamma,n,z,post_mean,post_var")?;
        for idx in 0..self.times.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e}",
                self.times[idx],
                self.y_path[idx],
                self.gamma_path[idx],
                self.n_path[idx],
                self.z_path[idx],
                self.post_mean[idx],
                self.post_var[idx]
            )?;
        }
        Ok(())
    }

    /// CSV of the jump times, header `tau`.
    pub fn write_jumps_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "tau")?;
        for tau in &self.jump_times {
            writeln!(out, "{tau:.16e}")?;
        }
        Ok(())
    }
}

/// Simulate one controlled trajectory.
///
/// Candidate events arrive from an exponential clock at the dominating rate
/// `λ g_max` and are accepted with probability `g(Y)/g_max`, so jump times
/// carry no discretization bias; only the flow between candidates is
/// integrated numerically.
pub fn simulate(
    model: &Model,
    prior: &Prior,
    policy: &impl Policy,
    params: &SimParams,
) -> Result<Trajectory> {
    if params.horizon <= 0.0 || params.dt_record <= 0.0 || params.dt_flow <= 0.0 {
        return Err(Error::InvalidArgument(
            "horizon, dt_record and dt_flow must be > 0".into(),
        ));
    }
    if !params.y0.is_finite() {
        return Err(Error::NonFinite("initial potential".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(params.stream);

    let lambda = match params.lambda {
        LambdaChoice::Fixed(x) => {
            if !(0.0..=prior.lambda_max()).contains(&x) {
                return Err(Error::InvalidArgument(format!(
                    "lambda must lie in [0, {}], got {x}",
                    prior.lambda_max()
                )));
            }
            x
        }
        LambdaChoice::SampleFromPrior => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut drawn = prior.nodes()[0].lambda;
            for node in prior.nodes() {
                acc += node.weight;
                if u <= acc {
                    drawn = node.lambda;
                    break;
                }
                drawn = node.lambda;
            }
            drawn
        }
    };

    let dominating = lambda * model.g_max();
    let exp_clock = if dominating > 0.0 {
        Some(Exp::new(dominating).expect("positive rate"))
    } else {
        None
    };

    let horizon = params.horizon;
    let mut state = FlowState {
        t: 0.0,
        y: params.y0,
        z: 0.0,
    };
    let mut n: u32 = 0;
    let mut compensator = 0.0;
    let mut comp_rate = prior.posterior_mean(0, 0.0)? * model.shape(state.y);

    let records = (horizon / params.dt_record).round() as usize;
    let mut traj = Trajectory {
        times: Vec::with_capacity(records + 2),
        y_path: Vec::new(),
        gamma_path: Vec::new(),
        n_path: Vec::new(),
        z_path: Vec::new(),
        post_mean: Vec::new(),
        post_var: Vec::new(),
        jump_times: Vec::new(),
        g_at_jumps: Vec::new(),
        lambda_true: lambda,
        seed: params.seed,
        stream: params.stream,
        compensator: 0.0,
    };

    let record = |state: &FlowState, n: u32, gamma: f64, traj: &mut Trajectory| -> Result<()> {
        traj.times.push(state.t);
        traj.y_path.push(state.y);
        traj.gamma_path.push(gamma);
        traj.n_path.push(n);
        traj.z_path.push(state.z);
        traj.post_mean.push(prior.posterior_mean(n, state.z)?);
        traj.post_var.push(prior.posterior_variance(n, state.z)?);
        Ok(())
    };

    let mut next_record = 0.0f64;
    let mut next_candidate = match &exp_clock {
        Some(clock) => clock.sample(&mut rng),
        None => f64::INFINITY,
    };

    loop {
        // Records fire before a coincident candidate so a row always shows
        // the pre-jump state.
        let target = next_record.min(next_candidate).min(horizon);

        // Integrate the closed-loop flow up to the next event.
        while state.t < target - 1e-15 {
            let dt = params.dt_flow.min(target - state.t);
            let gamma = policy.control(state.t, state.y, state.z, n);
            if !gamma.is_finite() {
                return Err(Error::NonFinite(format!(
                    "policy output at t={}, y={}, z={}, n={n}",
                    state.t, state.y, state.z
                )));
            }
            state = model.flow_step(state, gamma, dt)?;
            let rate = prior.posterior_mean(n, state.z)? * model.shape(state.y);
            compensator += 0.5 * (comp_rate + rate) * dt;
            comp_rate = rate;
        }
        state.t = target;

        if target == next_record || target == horizon {
            let gamma = policy.control(state.t, state.y, state.z, n);
            record(&state, n, gamma, &mut traj)?;
            if target == horizon {
                break;
            }
            next_record += params.dt_record;
            if next_record > horizon {
                next_record = horizon;
            }
            continue;
        }

        // Candidate event: thin against the dominating rate.
        let g_here = model.shape(state.y);
        let accept: f64 = rng.gen();
        if accept * model.g_max() < g_here {
            traj.jump_times.push(state.t);
            traj.g_at_jumps.push(g_here);
            state.y = 0.0;
            n += 1;
            comp_rate = prior.posterior_mean(n, state.z)? * model.shape(state.y);
        }
        next_candidate = state.t
            + exp_clock
                .as_ref()
                .expect("candidate needs clock")
                .sample(&mut rng);
    }

    traj.compensator = compensator;
    Ok(traj)
}

/// Simulate `paths` independent trajectories on streams `0..paths`.
pub fn simulate_batch(
    model: &Model,
    prior: &Prior,
    policy: &impl Policy,
    params: &SimParams,
    paths: usize,
) -> Result<Vec<Trajectory>> {
    (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut per_path = *params;
            per_path.stream = params.stream + p as u64;
            simulate(model, prior, policy, &per_path)
        })
        .collect()
}

/// Recompute the posterior statistics of a recorded trajectory from its
/// `(n, z)` columns. Matches the recorded values exactly by construction.
pub fn posterior_trace(trajectory: &Trajectory, prior: &Prior) -> Result<Vec<(f64, f64, f64)>> {
    trajectory
        .times
        .iter()
        .zip(trajectory.n_path.iter().zip(&trajectory.z_path))
        .map(|(&t, (&n, &z))| {
            let state = crate::prior::PosteriorState::new(n, z)?;
            Ok((
                t,
                prior.posterior_mean(state.n, state.z)?,
                prior.posterior_variance(state.n, state.z)?,
            ))
        })
        .collect()
}
