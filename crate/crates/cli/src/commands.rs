use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use delaystab::fdtd::{self, Discretization, PhysicalParams};
use delaystab::modal::{dde_integrate, DdeProblem};
use delaystab::quasipoly::{
    find_roots_certified, spectral_abscissa, ABSCISSA_TOLERANCE, ROOT_TOLERANCE,
};
use delaystab::stability::{
    admissible_alpha_interval, boundary_lines, check_stabilizing, k_index, k_max_for, region_grid,
    PARITY_NOTE,
};
use delaystab::{ControlParams, Execution, ModalQuasipolynomial, ModeSpec, Rectangle, SimConfig};
use serde_json::json;

use crate::config::RunConfigFile;
use crate::error::{CliError, Result};
use crate::output::{flag, num, real, resolve_dir, Run};
use crate::{Cli, Command, ModeArgs};

const MAX_SWEEP_ROWS: usize = 10_000_000;

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Analyze {
            mode,
            tau,
            alpha,
            re_min,
            re_max,
            im_min,
            im_max,
            grid_density,
        } => analyze(
            cli,
            *mode,
            *tau,
            *alpha,
            [*re_min, *re_max, *im_min, *im_max],
            *grid_density,
        ),
        Command::Design {
            mode,
            tau,
            alpha,
            tau_min,
            tau_max,
            tau_step,
        } => match (tau, tau_min) {
            (Some(t), _) => design_single(cli, *mode, *t, *alpha),
            (None, Some(lo)) => design_sweep(
                cli,
                *mode,
                *lo,
                tau_max.expect("clap requires tau_max"),
                tau_step.expect("clap requires tau_step"),
            ),
            (None, None) => Err(CliError::Input(
                "give --tau or --tau-min/--tau-max/--tau-step".into(),
            )),
        },
        Command::Region {
            beta_min,
            beta_max,
            alpha_min,
            alpha_max,
            resolution,
            sequential,
        } => {
            let pi2 = PI * PI;
            region(
                cli,
                (beta_min.unwrap_or(0.0), beta_max.unwrap_or(9.0 * pi2)),
                (
                    alpha_min.unwrap_or(-4.0 * pi2),
                    alpha_max.unwrap_or(4.0 * pi2),
                ),
                *resolution,
                if *sequential {
                    Execution::Sequential
                } else {
                    Execution::Parallel
                },
            )
        }
        Command::Simulate { config } => simulate(cli, config),
        Command::Oracle {
            mode,
            tau,
            alpha,
            zeta0,
            zeta1,
            dt,
            t_final,
        } => oracle(cli, *mode, *tau, *alpha, (*zeta0, *zeta1), *dt, *t_final),
    }
}

fn say(cli: &Cli, msg: impl AsRef<str>) {
    if !cli.quiet {
        println!("{}", msg.as_ref());
    }
}

fn start(cli: &Cli, command: &'static str, config_dir: Option<&str>, input: &[u8]) -> Result<Run> {
    let dir = resolve_dir(cli.out.as_deref(), config_dir);
    Run::start(dir, command, input, cli.seed)
}

/// Hash input for flag-driven commands.
fn args_fingerprint(cli: &Cli) -> Vec<u8> {
    format!("{:?}", cli.command).into_bytes()
}

fn mode_spec(m: ModeArgs) -> Result<ModeSpec> {
    Ok(ModeSpec::new(m.n, m.ell)?)
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Input(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn analyze(
    cli: &Cli,
    m: ModeArgs,
    tau: f64,
    alpha: f64,
    bounds: [Option<f64>; 4],
    density: usize,
) -> Result<()> {
    let mode = mode_spec(m)?;
    let q = ModalQuasipolynomial::new(mode.beta(), alpha, tau)?;
    let r = q.rhp_root_bound();
    let rect = Rectangle::new(
        bounds[0].unwrap_or(-3.0),
        bounds[1].unwrap_or(r),
        bounds[2].unwrap_or(0.0),
        bounds[3].unwrap_or(3.0 * r),
    )?;
    let set = find_roots_certified(&q, &rect, density, ROOT_TOLERANCE)?;
    if set.uncertain_multiplicity {
        return Err(CliError::Numerical(format!(
            "winding count {} disagrees with {} refined roots after retries",
            set.winding_count,
            set.roots.len()
        )));
    }
    let abscissa = spectral_abscissa(&q, ABSCISSA_TOLERANCE)?;

    let mut roots = set.roots.clone();
    roots.sort_by(|a, b| {
        b.value
            .re
            .total_cmp(&a.value.re)
            .then(a.value.im.total_cmp(&b.value.im))
    });
    let rows: Vec<Vec<String>> = roots
        .iter()
        .map(|r| vec![real(r.value.re), real(r.value.im), real(r.residual)])
        .collect();

    let mut run = start(cli, "analyze", None, &args_fingerprint(cli))?;
    run.write_csv("spectrum.csv", &["re", "im", "residual"], &rows)?;
    let w = set.rectangle;
    run.write_json(
        "abscissa.json",
        &json!({
            "abscissa": num(abscissa),
            "tolerance": ABSCISSA_TOLERANCE,
            "stable": abscissa < 0.0,
            "n": mode.n(),
            "ell": mode.ell(),
            "beta": num(q.beta()),
            "alpha": num(alpha),
            "tau": num(tau),
            "roots_in_window": roots.len(),
            "window": [num(w.re_min), num(w.re_max), num(w.im_min), num(w.im_max)],
        }),
    )?;
    say(
        cli,
        format!(
            "{} roots in window, spectral abscissa {abscissa:.9}",
            roots.len()
        ),
    );
    run.finish()?;
    Ok(())
}

fn design_row(mode: &ModeSpec, tau: f64) -> Vec<String> {
    let k = k_index(mode, tau);
    let iv = admissible_alpha_interval(mode, tau);
    vec![
        real(tau),
        k.map(|k| k.to_string()).unwrap_or_default(),
        real(iv.lo),
        real(iv.hi),
        flag(iv.is_empty()).to_string(),
    ]
}

const DESIGN_HEADER: [&str; 5] = ["tau", "k", "alpha_lo", "alpha_hi", "is_empty"];

fn design_single(cli: &Cli, m: ModeArgs, tau: f64, alpha: Option<f64>) -> Result<()> {
    let mode = mode_spec(m)?;
    positive("tau", tau)?;
    let mut run = start(cli, "design", None, &args_fingerprint(cli))?;
    run.write_csv("design.csv", &DESIGN_HEADER, &[design_row(&mode, tau)])?;
    if let Some(alpha) = alpha {
        let params = ControlParams::new(tau, alpha)?;
        let cert = check_stabilizing(&mode, &params);
        let k = cert.k.map_or("none".to_string(), |k| k.to_string());
        println!(
            "k={k} alpha_interval=({}, {}) alpha={alpha} satisfied={}",
            cert.alpha_interval.lo, cert.alpha_interval.hi, cert.satisfied
        );
        println!("note: {PARITY_NOTE}");
        run.detail("satisfied", cert.satisfied);
    }
    run.finish()?;
    Ok(())
}

fn design_sweep(cli: &Cli, m: ModeArgs, lo: f64, hi: f64, step: f64) -> Result<()> {
    let mode = mode_spec(m)?;
    positive("tau_min", lo)?;
    positive("tau_step", step)?;
    if !(hi.is_finite() && hi >= lo) {
        return Err(CliError::Input(
            "tau_max must be finite and at least tau_min".into(),
        ));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if count > MAX_SWEEP_ROWS {
        return Err(CliError::Input(format!(
            "sweep of {count} delays is too large"
        )));
    }
    let rows: Vec<Vec<String>> = (0..count)
        .map(|i| design_row(&mode, lo + i as f64 * step))
        .collect();
    let empty = rows.iter().filter(|r| r[4] == "true").count();
    let mut run = start(cli, "design", None, &args_fingerprint(cli))?;
    run.write_csv("design.csv", &DESIGN_HEADER, &rows)?;
    say(
        cli,
        format!("{count} delays, {empty} without a stabilizing gain"),
    );
    run.finish()?;
    Ok(())
}

fn region(
    cli: &Cli,
    beta: (f64, f64),
    alpha: (f64, f64),
    resolution: usize,
    exec: Execution,
) -> Result<()> {
    let grid = region_grid(beta, alpha, resolution, exec)?;
    let bad = grid.invalid_fraction();
    if bad > 0.01 {
        return Err(CliError::Numerical(format!(
            "{:.2}% of region cells have no certified count",
            100.0 * bad
        )));
    }
    let mut rows = Vec::with_capacity(grid.counts.len());
    for (i, b) in grid.beta_tilde_axis.iter().enumerate() {
        for (j, a) in grid.alpha_tilde_axis.iter().enumerate() {
            let idx = grid.index(i, j);
            rows.push(vec![
                real(*b),
                real(*a),
                grid.counts[idx].map(|c| c.to_string()).unwrap_or_default(),
                flag(grid.analytic_stable[idx]).to_string(),
            ]);
        }
    }
    let mut lines = Vec::new();
    for line in boundary_lines(k_max_for(beta.1)) {
        let ends = match line.slope {
            Some(s) => [
                (beta.0, s * beta.0 + line.intercept),
                (beta.1, s * beta.1 + line.intercept),
            ],
            None if line.intercept >= beta.0 && line.intercept <= beta.1 => {
                [(line.intercept, alpha.0), (line.intercept, alpha.1)]
            }
            None => continue,
        };
        for (b, a) in ends {
            lines.push(vec![
                line.label.clone(),
                line.k.to_string(),
                real(b),
                real(a),
            ]);
        }
    }
    let mut run = start(cli, "region", None, &args_fingerprint(cli))?;
    run.write_csv(
        "region.csv",
        &["beta_tilde", "alpha_tilde", "count", "analytic_stable"],
        &rows,
    )?;
    run.write_csv(
        "region_boundaries.csv",
        &["label", "k", "beta_tilde", "alpha_tilde"],
        &lines,
    )?;
    run.detail("invalid_fraction", bad);
    let stable = grid.counts.iter().filter(|c| **c == Some(0)).count();
    say(
        cli,
        format!(
            "{} cells, {stable} with no right-half-plane roots",
            rows.len()
        ),
    );
    run.finish()?;
    Ok(())
}

fn simulate(cli: &Cli, path: &Path) -> Result<()> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let text =
        std::str::from_utf8(&bytes).map_err(|_| CliError::Input("config is not UTF-8".into()))?;
    let cfg = RunConfigFile::parse(text)?;
    let mode = ModeSpec::new(cfg.mode.n, cfg.mode.ell)?;
    let d = &cfg.discretization;
    let mut disc = Discretization::new(d.dx, d.dt, d.t_final);
    disc.snap_dt_to_delay = d.snap_dt_to_delay;
    let sim = match &cfg.physical {
        Some(p) => SimConfig::physical(
            PhysicalParams {
                l: p.l,
                c: p.c,
                ell: mode.ell(),
                tau: cfg.control.tau,
                alpha: cfg.control.alpha,
            },
            disc,
        )?,
        None => SimConfig::dimensionless(mode.ell(), cfg.control.tau, cfg.control.alpha, disc)?,
    };
    let u0 = sim.sine_mode(mode.n(), cfg.initial.zeta0);
    let u1 = sim.sine_mode(mode.n(), cfg.initial.zeta1 / sim.time_scale);
    let out = fdtd::run(
        &sim,
        &u0,
        &u1,
        &cfg.outputs.snapshot_times,
        cfg.outputs.energy_stride,
    )?;

    let scale = sim.time_scale;
    let e = &out.energy;
    let energy_rows: Vec<Vec<String>> = (0..e.len())
        .map(|i| {
            vec![
                real(e.times[i]),
                real(e.field_energy[i]),
                real(e.weighted_energy[i]),
                real(e.times[i] / scale),
            ]
        })
        .collect();
    let grid = sim.grid();
    let mut snap_rows = Vec::new();
    for (t, frame) in out.snapshots.times.iter().zip(&out.snapshots.frames) {
        for (x, u) in grid.iter().zip(frame) {
            snap_rows.push(vec![real(*t), real(*x), real(*u), real(t / scale)]);
        }
    }
    let window = match cfg.outputs.decay_window {
        Some([a, b]) => (a, b),
        None => (2.0 * sim.tau_eff, sim.t_final),
    };
    let fit = e.decay_fit(window);
    let fit_json = match &fit {
        Ok(f) => json!({
            "rate": num(f.rate),
            "r_squared": num(f.r_squared),
            "window_start": num(f.window_start),
            "window_end": num(f.window_end),
            "n_peaks": f.n_peaks,
        }),
        Err(err) => {
            eprintln!("warning: decay fit unavailable: {err}");
            json!({
                "rate": null,
                "r_squared": null,
                "window_start": num(window.0),
                "window_end": num(window.1),
                "n_peaks": 0,
            })
        }
    };

    let mut run = start(cli, "simulate", cfg.outputs.directory.as_deref(), &bytes)?;
    run.write_csv(
        "energy.csv",
        &["t", "field_energy", "weighted_energy", "t_dimensionless"],
        &energy_rows,
    )?;
    run.write_csv(
        "snapshots.csv",
        &["t", "x", "u", "t_dimensionless"],
        &snap_rows,
    )?;
    run.write_json("decay_fit.json", &fit_json)?;
    run.detail("dx", sim.dx);
    run.detail("dt", sim.dt);
    run.detail("cells", sim.cells);
    run.detail("courant", sim.courant());
    run.detail("time_scale", sim.time_scale);
    run.detail("tau_eff", sim.tau_eff);
    run.detail("alpha_eff", sim.alpha_eff);
    run.detail("delay_steps", sim.delay_steps);
    run.detail("delay_rounding_error", sim.delay_rounding_error);
    run.detail("energy_weight", sim.energy_weight);
    if let Ok(f) = fit {
        say(
            cli,
            format!(
                "field energy decay rate {:.6} (r^2 = {:.4})",
                f.rate, f.r_squared
            ),
        );
    }
    run.finish()?;
    Ok(())
}

fn oracle(
    cli: &Cli,
    m: ModeArgs,
    tau: f64,
    alpha: f64,
    zeta: (f64, f64),
    dt: f64,
    t_final: f64,
) -> Result<()> {
    let mode = mode_spec(m)?;
    positive("tau", tau)?;
    if !alpha.is_finite() || !zeta.0.is_finite() || !zeta.1.is_finite() {
        return Err(CliError::Input(
            "alpha, zeta0 and zeta1 must be finite".into(),
        ));
    }
    let beta = mode.beta();
    let problem = DdeProblem::new(beta, alpha, tau, zeta.0, zeta.1);
    let trace = dde_integrate(&problem, dt, t_final)?;
    let energy = trace.energy(beta, mode.ell());
    let rows: Vec<Vec<String>> = (0..trace.len())
        .map(|i| {
            vec![
                real(trace.times[i]),
                real(trace.y[i]),
                real(trace.ydot[i]),
                real(energy[i]),
            ]
        })
        .collect();
    let mut run = start(cli, "oracle", None, &args_fingerprint(cli))?;
    run.write_csv("modal.csv", &["t", "y", "ydot", "energy"], &rows)?;
    run.detail("dt_requested", dt);
    run.detail("dt", trace.dt);
    run.detail("delay_steps", trace.delay_steps);
    say(cli, format!("{} samples at dt = {}", trace.len(), trace.dt));
    run.finish()?;
    Ok(())
}
