//! Structural properties of the solved value function beyond the acceptance
//! gate: stability of discrete Lipschitz constants under refinement,
//! dominance of the solved policy over doing nothing, and agreement of the
//! stored policy with the value gradient.

use spikectrl_core::hjb::{self, GridSpec};
use spikectrl_core::mceval::{self, EvalParams};
use spikectrl_core::model::Model;
use spikectrl_core::policy::ZeroPolicy;
use spikectrl_core::prior::Prior;

fn bump() -> Prior {
    Prior::from_atoms(&[(0.0, 1.0), (0.25, 2.0), (0.5, 4.0), (0.75, 2.0), (1.0, 1.0)]).unwrap()
}

fn small_fig_spec() -> GridSpec {
    GridSpec {
        horizon: 1.0,
        nt: 120,
        y_min: -0.5,
        y_max: 1.0,
        ny: 31,
        z_max: 7.38905609893065,
        nz: 41,
        n_max: 6,
        gamma_max: 2.0,
        control_points: 41,
        kappa: 30.0,
    }
}

/// Largest one-sided difference quotients of the t = 0 slice.
fn discrete_lipschitz(grid: &hjb::ValueGrid) -> (f64, f64) {
    let spec = grid.spec();
    let (mut ly, mut lz) = (0.0f64, 0.0f64);
    for i in 0..spec.ny {
        for j in 0..spec.nz {
            for n in 0..=spec.n_max {
                let v = grid.value_at_node(0, i, j, n);
                if i + 1 < spec.ny {
                    ly = ly.max((grid.value_at_node(0, i + 1, j, n) - v).abs() / spec.dy());
                }
                if j + 1 < spec.nz {
                    lz = lz.max((grid.value_at_node(0, i, j + 1, n) - v).abs() / spec.dz());
                }
            }
        }
    }
    (ly, lz)
}

#[test]
fn lipschitz_constants_stable_under_refinement() {
    let model = Model::builtin("ou_exp").unwrap();
    let prior = bump();
    let coarse_spec = small_fig_spec();
    let coarse = hjb::solve(&model, &prior, &coarse_spec).unwrap();
    let fine_spec = GridSpec {
        nt: coarse_spec.nt * 2,
        ny: (coarse_spec.ny - 1) * 2 + 1,
        nz: (coarse_spec.nz - 1) * 2 + 1,
        ..coarse_spec.clone()
    };
    let fine = hjb::solve(&model, &prior, &fine_spec).unwrap();
    let (ly0, lz0) = discrete_lipschitz(&coarse);
    let (ly1, lz1) = discrete_lipschitz(&fine);
    assert!(ly0.is_finite() && lz0.is_finite());
    assert!(
        ly1 <= 1.1 * ly0 + 1e-9,
        "y-Lipschitz grew under refinement: {ly0} -> {ly1}"
    );
    assert!(
        lz1 <= 1.1 * lz0 + 1e-9,
        "z-Lipschitz grew under refinement: {lz0} -> {lz1}"
    );
}

#[test]
fn value_bounded_and_nonnegative() {
    let model = Model::builtin("ou_exp").unwrap();
    let prior = bump();
    let spec = small_fig_spec();
    let grid = hjb::solve(&model, &prior, &spec).unwrap();
    let cap = spec.kappa * prior.lambda_max() * prior.lambda_max() / 4.0;
    for &v in grid.values() {
        assert!(v >= 0.0 && v <= cap + 1e-9, "value {v} outside [0, {cap}]");
    }
}

#[test]
fn zero_policy_never_beats_the_value() {
    let model = Model::builtin("ou_exp").unwrap();
    let prior = bump();
    let spec = small_fig_spec();
    let grid = hjb::solve(&model, &prior, &spec).unwrap();
    // Coarse grid, so allow a visible scheme tolerance on top of noise.
    let scheme_tolerance = 0.05 * spec.kappa * prior.prior_variance();
    for (y, z, n) in [(0.0, 0.0, 0u32), (0.5, 0.3, 1), (-0.25, 1.0, 0)] {
        let report = mceval::evaluate(
            &model,
            &prior,
            &ZeroPolicy,
            &EvalParams {
                t0: 0.0,
                y0: y,
                z0: z,
                n0: n,
                horizon: spec.horizon,
                kappa: spec.kappa,
                paths: 20_000,
                dt_flow: spec.dt() / 2.0,
                seed: 7,
            },
        )
        .unwrap();
        let v = grid.eval_value(0.0, y, z, n);
        assert!(
            v <= report.estimate + 3.0 * report.std_error + scheme_tolerance,
            "v = {v} exceeds J(zero) = {} ± {} at (y={y}, z={z}, n={n})",
            report.estimate,
            report.std_error
        );
    }
}

#[test]
fn stored_policy_tracks_value_gradient() {
    let model = Model::builtin("ou_exp").unwrap();
    let prior = bump();
    let spec = small_fig_spec();
    let grid = hjb::solve(&model, &prior, &spec).unwrap();
    let dgamma = 2.0 * spec.gamma_max / (spec.control_points - 1) as f64;
    for k in [0usize, spec.nt / 2, spec.nt - 1] {
        for i in 1..spec.ny - 1 {
            for j in 0..spec.nz {
                for n in 0..=spec.n_max {
                    // The minimizing control saw a one-sided difference of
                    // the k+1 slice; it can differ from the clamped central
                    // gradient by half a control step plus the curvature gap
                    // between one-sided and centered differences.
                    let up = grid.value_at_node(k + 1, i + 1, j, n);
                    let mid = grid.value_at_node(k + 1, i, j, n);
                    let down = grid.value_at_node(k + 1, i - 1, j, n);
                    let central = (up - down) / (2.0 * spec.dy());
                    let curvature_gap = 0.5 * (up - 2.0 * mid + down).abs() / spec.dy();
                    let want = (-central).clamp(-spec.gamma_max, spec.gamma_max);
                    let got = grid.policy_at_node(k, i, j, n);
                    let tol = 0.5 * dgamma + curvature_gap + 1e-9;
                    assert!(
                        (got - want).abs() <= tol,
                        "policy {got} vs -D_y v {want} (tol {tol}) at k={k}, i={i}, j={j}, n={n}"
                    );
                }
            }
        }
    }
}
