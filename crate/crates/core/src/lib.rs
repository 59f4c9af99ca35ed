//! Numerical toolkit for optimally probing a jump process whose rate
//! parameter is unknown.
//!
//! The state is a controlled potential `Y` that resets to zero at jumps of a
//! point process with intensity `Λ g(Y)`, where `Λ` is random with a known
//! prior. The controller observes only jump times and pays `∫ γ²/2` for the
//! input current, plus `κ · Var(posterior)` at the horizon. The crate
//! provides:
//!
//! - [`prior`]: the prior and the two-statistic posterior family `(n, z)`;
//! - [`model`]: drift/shape catalog and the flow integrator;
//! - [`likelihood`]: change-of-measure path weights;
//! - [`hjb`]: an explicit monotone finite-difference solver for the dynamic
//!   programming equation on a `(t, y, z, n)` grid, with policy extraction;
//! - [`sim`]: exact thinning simulation of controlled trajectories with
//!   posterior tracking;
//! - [`mceval`]: an independent Monte Carlo estimate of the cost of any
//!   policy under the reference measure, used to cross-check the solver.
//!
//! End to end on a desk-scale problem:
//!
//! ```
//! use spikectrl_core::{hjb, mceval, sim};
//! use spikectrl_core::{GridPolicy, GridSpec, LambdaChoice, Model, Prior, SimParams};
//!
//! let model = Model::builtin("const_unit")?;
//! let prior = Prior::from_atoms(&[(0.0, 0.5), (1.0, 0.5)])?;
//! let spec = GridSpec {
//!     horizon: 1.0, nt: 60, y_min: -1.0, y_max: 1.0, ny: 11,
//!     z_max: 2.0, nz: 11, n_max: 3, gamma_max: 2.0,
//!     control_points: 21, kappa: 1.0,
//! };
//! let grid = hjb::solve(&model, &prior, &spec)?;
//!
//! // Simulate one controlled path under the true dynamics.
//! let traj = sim::simulate(&model, &prior, &GridPolicy::new(&grid), &SimParams {
//!     horizon: 1.0, dt_record: 0.1, dt_flow: 0.005, y0: 0.0,
//!     lambda: LambdaChoice::Fixed(1.0), seed: 7, stream: 0,
//! })?;
//! assert_eq!(traj.post_mean[0], prior.prior_mean());
//!
//! // Cross-check the solved value by Monte Carlo.
//! let report = mceval::evaluate(&model, &prior, &GridPolicy::new(&grid), &mceval::EvalParams {
//!     t0: 0.0, y0: 0.0, z0: 0.0, n0: 0, horizon: 1.0, kappa: 1.0,
//!     paths: 2000, dt_flow: 0.01, seed: 7,
//! })?;
//! let gap = (grid.eval_value(0.0, 0.0, 0.0, 0) - report.estimate).abs();
//! assert!(gap < 3.0 * report.std_error + 0.05);
//! # Ok::<(), spikectrl_core::Error>(())
//! ```

pub mod error;
pub mod hjb;
pub mod likelihood;
pub mod mceval;
pub mod model;
pub mod policy;
pub mod prior;
pub mod sim;

pub use error::{Error, Result};
pub use hjb::{GridPolicy, GridSpec, ValueGrid};
pub use likelihood::PathRecord;
pub use model::{FlowState, Model};
pub use policy::{Policy, ZeroPolicy};
pub use prior::{PosteriorState, Prior, PriorNode};
pub use sim::{LambdaChoice, SimParams, Trajectory};
