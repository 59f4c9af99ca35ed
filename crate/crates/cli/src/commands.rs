//! Subcommand implementations. All artifacts are plain CSV plus one TOML
//! metadata file; floats are written with 17 significant digits so repeated
//! runs with the same config and seed produce byte-identical output.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use spikectrl_core::hjb::{self, ValueGrid};
use spikectrl_core::mceval;
use spikectrl_core::policy::ZeroPolicy;
use spikectrl_core::sim::{self, LambdaChoice, SimParams};
use spikectrl_core::GridPolicy;

use crate::config::{Resolved, RunConfig};
use crate::CliError;

pub const VALUE_CSV: &str = "value_policy.csv";
pub const META_TOML: &str = "run_meta.toml";

pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub lambda_true: Option<f64>,
    pub policy: Option<String>,
}

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", out.display())))
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = out.join(name);
    Ok(BufWriter::new(File::create(&path).map_err(|e| {
        CliError::Validation(format!("cannot write {}: {e}", path.display()))
    })?))
}

pub fn cmd_solve(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let resolved = config.resolve()?;
    ensure_out_dir(out)?;
    println!(
        "grid: nt={} ny={} nz={} n_max={} | dt={:.6} dy={:.4} dz={:.4}",
        resolved.spec.nt,
        resolved.spec.ny,
        resolved.spec.nz,
        resolved.spec.n_max,
        resolved.spec.dt(),
        resolved.spec.dy(),
        resolved.spec.dz()
    );
    println!(
        "cfl: number={:.4} (dt_max={:.6})",
        resolved.cfl.cfl_number, resolved.cfl.dt_max
    );
    let grid = hjb::solve(&resolved.model, &resolved.prior, &resolved.spec)?;
    let value_at_origin = grid.eval_value(0.0, 0.0, 0.0, 0);
    println!("v(0, 0, 0, 0) = {value_at_origin:.6}");

    let mut w = create(out, VALUE_CSV)?;
    grid.write_csv(&mut w)
        .map_err(|e| CliError::Validation(format!("write {VALUE_CSV}: {e}")))?;
    w.flush()
        .map_err(|e| CliError::Validation(format!("write {VALUE_CSV}: {e}")))?;

    let meta = config.resolved_copy(&resolved, value_at_origin);
    let text = toml::to_string_pretty(&meta)
        .map_err(|e| CliError::Validation(format!("serialize metadata: {e}")))?;
    std::fs::write(out.join(META_TOML), text)
        .map_err(|e| CliError::Validation(format!("write {META_TOML}: {e}")))?;
    println!("wrote {} and {} in {}", VALUE_CSV, META_TOML, out.display());
    Ok(())
}

fn load_grid(resolved: &Resolved, out: &Path) -> Result<ValueGrid, CliError> {
    let path = out.join(VALUE_CSV);
    let file = File::open(&path).map_err(|_| {
        CliError::Validation(format!(
            "no solved value grid at {}; run `solve` first or use --policy zero",
            path.display()
        ))
    })?;
    let mut reader = BufReader::new(file);
    Ok(ValueGrid::read_csv(
        &resolved.spec,
        &resolved.model,
        &resolved.prior,
        &mut reader,
    )?)
}

pub fn cmd_simulate(config: &RunConfig, out: &Path, over: &Overrides) -> Result<(), CliError> {
    let resolved = config.resolve()?;
    let sim_cfg = config
        .simulate
        .clone()
        .ok_or_else(|| CliError::Validation("config has no [simulate] section".into()))?;
    ensure_out_dir(out)?;

    let policy_kind = over.policy.clone().unwrap_or(sim_cfg.policy.clone());
    let grid = match policy_kind.as_str() {
        "pde" => Some(load_grid(&resolved, out)?),
        "zero" => None,
        other => {
            return Err(CliError::Validation(format!(
                "policy must be \"pde\" or \"zero\", got '{other}'"
            )))
        }
    };
    let lambda = match over.lambda_true.or(sim_cfg.lambda_true) {
        Some(x) => LambdaChoice::Fixed(x),
        None => LambdaChoice::SampleFromPrior,
    };
    let params = SimParams {
        horizon: resolved.spec.horizon,
        dt_record: sim_cfg.dt_record,
        dt_flow: resolved.spec.dt() / 4.0,
        y0: sim_cfg.y0,
        lambda,
        seed: over.seed.unwrap_or(config.seed),
        stream: 0,
    };
    let paths = over.paths.unwrap_or(sim_cfg.paths);
    let trajectories = match &grid {
        Some(g) => sim::simulate_batch(
            &resolved.model,
            &resolved.prior,
            &GridPolicy::new(g),
            &params,
            paths,
        )?,
        None => sim::simulate_batch(
            &resolved.model,
            &resolved.prior,
            &ZeroPolicy,
            &params,
            paths,
        )?,
    };
    for (idx, traj) in trajectories.iter().enumerate() {
        let mut w = create(out, &format!("trajectory_{idx:03}.csv"))?;
        traj.write_csv(&mut w)
            .map_err(|e| CliError::Validation(format!("write trajectory: {e}")))?;
        let mut w = create(out, &format!("jumps_{idx:03}.csv"))?;
        traj.write_jumps_csv(&mut w)
            .map_err(|e| CliError::Validation(format!("write jumps: {e}")))?;
    }
    println!(
        "simulated {paths} path(s) with the {policy_kind} policy into {}",
        out.display()
    );
    Ok(())
}

pub fn cmd_evaluate(config: &RunConfig, out: &Path, over: &Overrides) -> Result<(), CliError> {
    let resolved = config.resolve()?;
    let eval_cfg = config
        .evaluate
        .clone()
        .ok_or_else(|| CliError::Validation("config has no [evaluate] section".into()))?;
    let paths = over.paths.unwrap_or(eval_cfg.paths);
    if paths < 2 {
        return Err(CliError::Validation(
            "evaluate needs at least 2 paths for a standard error".into(),
        ));
    }
    ensure_out_dir(out)?;
    let grid = load_grid(&resolved, out)?;
    let points: Vec<(f64, f64, f64, u32)> = eval_cfg
        .points
        .iter()
        .map(|&[t, y, z, n]| (t, y, z, n as u32))
        .collect();
    let report = mceval::compare_to_pde(
        &grid,
        &resolved.model,
        &resolved.prior,
        &points,
        paths,
        resolved.spec.dt() / 2.0,
        over.seed.unwrap_or(config.seed),
        eval_cfg.scheme_tolerance,
    )?;
    print!("{}", report.render_text());
    let mut w = create(out, "evaluate_report.csv")?;
    report
        .write_csv(&mut w)
        .map_err(|e| CliError::Validation(format!("write report: {e}")))?;
    if report.all_pass() {
        Ok(())
    } else {
        Err(CliError::Acceptance(
            "PDE value and Monte Carlo estimate disagree beyond tolerance".into(),
        ))
    }
}

pub fn cmd_export_policy(config: &RunConfig, out: &Path, time: f64) -> Result<(), CliError> {
    let resolved = config.resolve()?;
    let grid = load_grid(&resolved, out)?;
    let spec = &resolved.spec;
    if !(0.0..=spec.horizon).contains(&time) {
        return Err(CliError::Validation(format!(
            "time {time} outside [0, {}]",
            spec.horizon
        )));
    }
    let k = ((time / spec.dt()).round() as usize).min(spec.nt);
    let t = k as f64 * spec.dt();
    let name = format!("policy_slice_{k:05}.csv");
    let mut w = create(out, &name)?;
    writeln!(w, "t,y,z,n,v,gamma").map_err(|e| CliError::Validation(e.to_string()))?;
    let y_nodes = spec.y_nodes();
    let z_nodes = spec.z_nodes();
    for (i, &y) in y_nodes.iter().enumerate() {
        for (j, &z) in z_nodes.iter().enumerate() {
            for n in 0..=spec.n_max {
                writeln!(
                    w,
                    "{t:.16e},{y:.16e},{z:.16e},{n},{:.16e},{:.16e}",
                    grid.value_at_node(k, i, j, n),
                    grid.policy_at_node(k, i, j, n)
                )
                .map_err(|e| CliError::Validation(e.to_string()))?;
            }
        }
    }
    w.flush().map_err(|e| CliError::Validation(e.to_string()))?;
    println!("wrote {} (slice at t = {t})", out.join(name).display());
    Ok(())
}
