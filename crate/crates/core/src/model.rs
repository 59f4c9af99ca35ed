//! Controlled dynamics between jumps: drift `b`, intensity shape `g`, the
//! reset map, and RK4 integration of the deterministic flow
//! `dy/dt = b(y) + γ`, `dz/dt = g(y)`.

use crate::error::{Error, Result};

/// `g` is capped at `e^2` by default, i.e. at its value for y = 2; optimal
/// trajectories stay near y ≈ 1, so the cap rarely binds.
pub const DEFAULT_EXP_CAP: f64 = 7.38905609893065; // e^2

#[derive(Debug, Clone, PartialEq)]
enum Dynamics {
    /// b(y) = -y, g(y) = min(exp(2(y-1)), cap).
    OuExp { cap: f64 },
    /// b(y) = -y, g(y) = 1 / (1 + exp(-100(y-1))), a smoothed step at y = 1.
    OuSigmoid,
    /// b = 0, g ≡ 1: jump rate independent of the state. Useful as a test
    /// model because control then has no effect on the information gained.
    ConstUnit,
    /// b(y) = -y, g given by a piecewise-linear table, constant outside it.
    Custom { table: Vec<(f64, f64)> },
}

/// Drift, intensity shape and their bounds. Paired with a rate `λ`, the jump
/// intensity is `λ · g(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    name: String,
    dynamics: Dynamics,
    g_max: f64,
    intensity_cap: f64,
    b_prime_bound: f64,
    g_log_deriv_bound: f64,
}

/// State carried along the deterministic flow between jumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub y: f64,
    pub z: f64,
}

impl Model {
    /// Look up a builtin model by name.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "ou_exp" => Ok(Self::ou_exp(DEFAULT_EXP_CAP)),
            "ou_sigmoid" => Ok(Self {
                name: "ou_sigmoid".into(),
                dynamics: Dynamics::OuSigmoid,
                g_max: 1.0,
                intensity_cap: 1.0,
                b_prime_bound: 1.0,
                g_log_deriv_bound: 100.0,
            }),
            "const_unit" => Ok(Self {
                name: "const_unit".into(),
                dynamics: Dynamics::ConstUnit,
                g_max: 1.0,
                intensity_cap: 1.0,
                b_prime_bound: 0.0,
                g_log_deriv_bound: 0.0,
            }),
            other => Err(Error::InvalidModel(format!("unknown model '{other}'"))),
        }
    }

    /// `ou_exp` with an explicit cap on `g`.
    pub fn ou_exp(cap: f64) -> Self {
        Self {
            name: "ou_exp".into(),
            dynamics: Dynamics::OuExp { cap },
            g_max: cap,
            intensity_cap: cap,
            b_prime_bound: 1.0,
            g_log_deriv_bound: 2.0,
        }
    }

    /// Drift b(y) = -y with `g` given by a piecewise-linear table
    /// (constant extrapolation outside the listed range).
    pub fn custom(table: Vec<(f64, f64)>) -> Result<Self> {
        if table.len() < 2 {
            return Err(Error::InvalidModel(
                "piecewise-linear g table needs at least 2 points".into(),
            ));
        }
        for pair in table.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::InvalidModel(
                    "g table y-coordinates must be strictly increasing".into(),
                ));
            }
        }
        let mut g_max = 0.0f64;
        let mut g_min = f64::INFINITY;
        let mut slope_max = 0.0f64;
        for pair in table.windows(2) {
            slope_max = slope_max.max(((pair[1].1 - pair[0].1) / (pair[1].0 - pair[0].0)).abs());
        }
        for &(_, g) in &table {
            if !g.is_finite() || g < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "g table values must be finite and >= 0, got {g}"
                )));
            }
            g_max = g_max.max(g);
            g_min = g_min.min(g);
        }
        if g_max <= 0.0 {
            return Err(Error::InvalidModel("g table is identically zero".into()));
        }
        let g_log_deriv_bound = if g_min > 0.0 {
            slope_max / g_min
        } else {
            f64::INFINITY
        };
        Ok(Self {
            name: "custom".into(),
            dynamics: Dynamics::Custom { table },
            g_max,
            intensity_cap: g_max,
            b_prime_bound: 1.0,
            g_log_deriv_bound,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn drift(&self, y: f64) -> f64 {
        match self.dynamics {
            Dynamics::ConstUnit => 0.0,
            _ => -y,
        }
    }

    pub fn shape(&self, y: f64) -> f64 {
        match &self.dynamics {
            Dynamics::OuExp { cap } => (2.0 * (y - 1.0)).exp().min(*cap),
            Dynamics::OuSigmoid => 1.0 / (1.0 + (-100.0 * (y - 1.0)).exp()),
            Dynamics::ConstUnit => 1.0,
            Dynamics::Custom { table } => {
                let first = table[0];
                let last = table[table.len() - 1];
                if y <= first.0 {
                    return first.1;
                }
                if y >= last.0 {
                    return last.1;
                }
                let idx = table.partition_point(|&(x, _)| x <= y);
                let (x0, g0) = table[idx - 1];
                let (x1, g1) = table[idx];
                g0 + (g1 - g0) * (y - x0) / (x1 - x0)
            }
        }
    }

    pub fn g_max(&self) -> f64 {
        self.g_max
    }

    pub fn intensity_cap(&self) -> f64 {
        self.intensity_cap
    }

    pub fn b_prime_bound(&self) -> f64 {
        self.b_prime_bound
    }

    pub fn g_log_deriv_bound(&self) -> f64 {
        self.g_log_deriv_bound
    }

    /// Largest `|b|` over `[y_min, y_max]`; enters the CFL bound.
    pub fn max_abs_drift(&self, y_min: f64, y_max: f64) -> f64 {
        match self.dynamics {
            Dynamics::ConstUnit => 0.0,
            _ => y_min.abs().max(y_max.abs()),
        }
    }

    /// One RK4 step of the flow with the control held constant.
    pub fn flow_step(&self, state: FlowState, gamma: f64, dt: f64) -> Result<FlowState> {
        if !gamma.is_finite() {
            return Err(Error::NonFinite(format!("control gamma = {gamma}")));
        }
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
        }
        if !state.y.is_finite() || !state.z.is_finite() {
            return Err(Error::NonFinite("flow state".into()));
        }
        let f = |y: f64| (self.drift(y) + gamma, self.shape(y));
        let (ky1, kz1) = f(state.y);
        let (ky2, kz2) = f(state.y + 0.5 * dt * ky1);
        let (ky3, kz3) = f(state.y + 0.5 * dt * ky2);
        let (ky4, kz4) = f(state.y + dt * ky3);
        Ok(FlowState {
            t: state.t + dt,
            y: state.y + dt / 6.0 * (ky1 + 2.0 * ky2 + 2.0 * ky3 + ky4),
            z: state.z + dt / 6.0 * (kz1 + 2.0 * kz2 + 2.0 * kz3 + kz4),
        })
    }

    /// Advance the flow by `duration` using steps of at most `dt_max`.
    pub fn flow(
        &self,
        mut state: FlowState,
        gamma: f64,
        duration: f64,
        dt_max: f64,
    ) -> Result<FlowState> {
        if duration <= 0.0 {
            return Ok(state);
        }
        let steps = (duration / dt_max).ceil().max(1.0) as usize;
        let dt = duration / steps as f64;
        for _ in 0..steps {
            state = self.flow_step(state, gamma, dt)?;
        }
        Ok(state)
    }
}

/// The jump transition: potential resets to zero, `t` and `z` are kept.
pub fn reset(state: FlowState) -> FlowState {
    FlowState {
        t: state.t,
        y: 0.0,
        z: state.z,
    }
}
