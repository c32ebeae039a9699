//! Acceptance criteria. Each test prints one `[PASS]` or `[FAIL]` line.
//!
//! Run with `cargo test -p delaystab --test acceptance -- --nocapture`.

use std::f64::consts::PI;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use delaystab::fdtd::{self, Discretization, PhysicalParams};
use delaystab::modal::{dde_integrate, DdeProblem};
use delaystab::quasipoly::{
    count_roots_in_rectangle, find_roots_certified, spectral_abscissa, ABSCISSA_TOLERANCE,
    DEFAULT_BOUNDARY_SAMPLES, DEFAULT_GRID_DENSITY, ROOT_TOLERANCE,
};
use delaystab::stability::{
    boundary_lines, check_stabilizing, critical_delays, crossing_frequencies, crossing_residual,
    distance_to_boundary, k_max_for, region_grid,
};
use delaystab::{ControlParams, Execution, ModalQuasipolynomial, ModeSpec, Rectangle, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria run one at a time so the timing budgets are not shared.
static SERIAL: Mutex<()> = Mutex::new(());

const CASES: [(&str, f64, f64, u32); 3] = [
    ("case 1", 1.5, 5.0, 1),
    ("case 2", 1.5, 3.0, 1),
    ("case 3", 2.5, -1.7766, 2),
];

fn report(id: &str, ok: bool, elapsed: Duration, detail: String) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] {id}: {detail} ({:.2} s)", elapsed.as_secs_f64());
    assert!(ok, "{id} failed: {detail}");
}

fn unit_mode() -> ModeSpec {
    ModeSpec::new(1, 1.0).unwrap()
}

#[test]
fn ac1_certificate_reproduction() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mode = unit_mode();
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, tau, alpha, k) in CASES {
        let cert = check_stabilizing(&mode, &ControlParams::new(tau, alpha).unwrap());
        let good = cert.satisfied && cert.k == Some(k);
        ok &= good;
        notes.push(format!(
            "{name} satisfied={} k={:?}",
            cert.satisfied, cert.k
        ));
    }
    for tau in [1.0, 2.0, 3.0] {
        for alpha in [5.0, 3.0, -1.7766] {
            let cert = check_stabilizing(&mode, &ControlParams::new(tau, alpha).unwrap());
            ok &= !cert.satisfied && cert.alpha_interval.is_empty();
        }
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(1);
    notes.push("tau in {1,2,3} empty".into());
    report(
        "AC-1 certificate reproduction",
        ok,
        elapsed,
        notes.join(", "),
    );
}

#[test]
fn ac2_spectral_ordering() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let beta = unit_mode().beta();
    let a: Vec<f64> = CASES
        .iter()
        .map(|(_, tau, alpha, _)| {
            spectral_abscissa(
                &ModalQuasipolynomial::new(beta, *alpha, *tau).unwrap(),
                ABSCISSA_TOLERANCE,
            )
            .unwrap()
        })
        .collect();
    let elapsed = start.elapsed();
    let ok = a.iter().all(|x| *x < 0.0)
        && a[1] < a[2]
        && a[2] < a[0]
        && elapsed < Duration::from_secs(30);
    report(
        "AC-2 spectral ordering",
        ok,
        elapsed,
        format!("a1={:.6} a2={:.6} a3={:.6}", a[0], a[1], a[2]),
    );
}

#[test]
fn ac3_crossing_frequency_identity() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_freq = 0.0f64;
    let mut worst_residual = 0.0f64;
    let mut presence_ok = true;
    let mut delays = 0usize;
    for _ in 0..1000 {
        let beta = rng.random_range(0.1..100.0);
        let alpha = rng.random_range(-100.0..100.0);
        let c = critical_delays(beta, alpha, 5);
        let plus = beta + f64::abs(alpha);
        worst_freq = worst_freq.max((c.omega_plus.powi(2) - plus).abs() / plus);
        match c.omega_minus {
            Some(w) => {
                let minus = beta - f64::abs(alpha);
                worst_freq = worst_freq.max((w * w - minus).abs() / minus);
                presence_ok &= alpha * alpha < beta * beta;
            }
            None => presence_ok &= alpha * alpha >= beta * beta,
        }
        let pairs = c
            .critical_delays_plus
            .iter()
            .map(|t| (c.omega_plus, *t))
            .chain(
                c.critical_delays_minus
                    .iter()
                    .map(|t| (c.omega_minus.unwrap(), *t)),
            );
        for (w, tau) in pairs {
            delays += 1;
            worst_residual = worst_residual.max(crossing_residual(beta, alpha, w, tau));
        }
    }
    let elapsed = start.elapsed();
    let ok = worst_freq <= 1e-12
        && worst_residual <= 1e-10
        && presence_ok
        && elapsed < Duration::from_secs(5);
    report(
        "AC-3 crossing-frequency identity",
        ok,
        elapsed,
        format!("max rel freq err {worst_freq:.2e}, max |Q(i w)| {worst_residual:.2e} over {delays} delays"),
    );
}

#[test]
fn ac4_region_chart() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let pi2 = PI * PI;
    let grid = region_grid(
        (0.0, 9.0 * pi2),
        (-4.0 * pi2, 4.0 * pi2),
        200,
        Execution::Parallel,
    )
    .unwrap();
    let elapsed = start.elapsed();
    let lines = boundary_lines(k_max_for(9.0 * pi2));
    let diag = grid.cell_diagonal();
    let (mut checked, mut agree) = (0usize, 0usize);
    for (i, b) in grid.beta_tilde_axis.iter().enumerate() {
        for (j, a) in grid.alpha_tilde_axis.iter().enumerate() {
            if distance_to_boundary(&lines, *b, *a) < diag {
                continue;
            }
            checked += 1;
            let idx = grid.index(i, j);
            if grid.counts[idx].map(|c| c == 0) == Some(grid.analytic_stable[idx]) {
                agree += 1;
            }
        }
    }
    let frac = agree as f64 / checked as f64;
    let ok = frac >= 0.995 && elapsed < Duration::from_secs(60);
    report(
        "AC-4 region chart",
        ok,
        elapsed,
        format!(
            "{agree}/{checked} interior cells agree ({:.3}%)",
            100.0 * frac
        ),
    );
}

#[test]
fn ac5_winding_certification() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = Vec::new();
    let mut roots = 0usize;
    for i in 0..500 {
        let beta = rng.random_range(0.1..50.0);
        let alpha = rng.random_range(-50.0..50.0);
        let tau = rng.random_range(0.1..3.0);
        let re_min = rng.random_range(-2.0..1.0);
        let im_min = rng.random_range(-8.0..8.0);
        let rect = Rectangle::new(
            re_min,
            re_min + rng.random_range(0.5..3.0),
            im_min,
            im_min + rng.random_range(0.5..6.0),
        )
        .unwrap();
        let q = ModalQuasipolynomial::new(beta, alpha, tau).unwrap();
        match find_roots_certified(&q, &rect, DEFAULT_GRID_DENSITY, ROOT_TOLERANCE) {
            Ok(set) if !set.uncertain_multiplicity && set.roots.len() == set.winding_count => {
                roots += set.roots.len();
            }
            other => mismatches.push(format!(
                "#{i} {:?}",
                other.map(|s| (s.winding_count, s.roots.len()))
            )),
        }
    }
    let elapsed = start.elapsed();
    let ok = mismatches.is_empty() && elapsed < Duration::from_secs(30);
    report(
        "AC-5 winding certification",
        ok,
        elapsed,
        format!(
            "{} mismatches over 500 rectangles, {roots} roots {:?}",
            mismatches.len(),
            mismatches
        ),
    );
}

/// Relative L-infinity error of the FDTD midpoint against the modal trace.
fn midpoint_error(dx: f64, dt: f64) -> f64 {
    let (tau, alpha, t_final) = (1.5, 3.0, 20.0);
    let cfg = SimConfig::dimensionless(
        1.0,
        tau,
        alpha,
        Discretization::new(dx, dt, t_final).snapped(),
    )
    .unwrap();
    let mid = cfg.cells / 2;
    let u0 = cfg.sine_mode(1, 1.0);
    let mut state = fdtd::init_state(&cfg, &u0, &vec![0.0; cfg.cells + 1]).unwrap();
    let mut fd = vec![u0[mid], state.u_curr()[mid]];
    while state.step() < cfg.steps() {
        fdtd::step(&mut state, &cfg);
        fd.push(state.u_curr()[mid]);
    }
    let trace = dde_integrate(
        &DdeProblem::new(PI * PI, alpha, tau, 1.0, 0.0),
        cfg.dt,
        t_final,
    )
    .unwrap();
    let n = fd.len().min(trace.len());
    let scale = trace.y[..n].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = fd[..n]
        .iter()
        .zip(&trace.y[..n])
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    err / scale
}

#[test]
fn ac6_fdtd_dde_equivalence() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let coarse = midpoint_error(0.05, 0.005);
    let fine = midpoint_error(0.025, 0.0025);
    let elapsed = start.elapsed();
    let ratio = coarse / fine;
    let ok = coarse <= 0.02 && ratio >= 1.8 && elapsed < Duration::from_secs(20);
    report(
        "AC-6 FDTD-DDE equivalence",
        ok,
        elapsed,
        format!(
            "midpoint error {:.3}% (halved: {:.3}%, ratio {ratio:.2})",
            100.0 * coarse,
            100.0 * fine
        ),
    );
}

fn reference_config(tau: f64, alpha: f64) -> SimConfig {
    SimConfig::physical(
        PhysicalParams {
            l: 10.0,
            c: 1.118,
            ell: 1.0,
            tau,
            alpha,
        },
        Discretization::new(0.05, 0.005, 100.0),
    )
    .unwrap()
}

#[test]
fn ac7_decay_rate_closure() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let beta = unit_mode().beta();
    let mut all_ok = true;
    let mut lines = Vec::new();
    let total = Instant::now();
    for (name, tau, alpha, _) in CASES {
        let start = Instant::now();
        let cfg = reference_config(tau, alpha);
        let out = fdtd::run(
            &cfg,
            &cfg.sine_mode(1, 1.0),
            &vec![0.0; cfg.cells + 1],
            &[],
            1,
        )
        .unwrap();
        let fit = out.energy.decay_fit((2.0 * cfg.tau_eff, cfg.t_final));
        let a = spectral_abscissa(
            &ModalQuasipolynomial::new(beta, alpha, tau).unwrap(),
            ABSCISSA_TOLERANCE,
        )
        .unwrap();
        let expected = 2.0 * a / cfg.time_scale;
        let (ok, detail) = match fit {
            Ok(f) => {
                let rel = (f.rate - expected).abs() / expected.abs();
                (
                    f.rate < 0.0 && rel <= 0.15 && start.elapsed() < Duration::from_secs(120),
                    format!(
                        "{name} fitted {:.5} vs 2a/d {expected:.5} (rel err {:.1}%)",
                        f.rate,
                        100.0 * rel
                    ),
                )
            }
            Err(e) => (false, format!("{name} fit failed: {e}")),
        };
        println!("    {} {detail}", if ok { "ok  " } else { "MISS" });
        all_ok &= ok;
        lines.push(detail);
    }
    report(
        "AC-7 decay-rate closure",
        all_ok,
        total.elapsed(),
        lines.join("; "),
    );
}

#[test]
fn ac8_conservation_baseline() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let cfg = reference_config(1.5, 0.0);
    let out = fdtd::run(
        &cfg,
        &cfg.sine_mode(1, 1.0),
        &vec![0.0; cfg.cells + 1],
        &[],
        1,
    )
    .unwrap();
    let e = &out.energy.field_energy;
    let drift = e.iter().fold(0.0f64, |m, v| m.max((v - e[0]).abs())) / e[0];
    let elapsed = start.elapsed();
    let ok = drift <= 0.005 && elapsed < Duration::from_secs(60);
    report(
        "AC-8 conservation baseline",
        ok,
        elapsed,
        format!(
            "max relative energy drift {:.3e} over {} samples",
            drift,
            e.len()
        ),
    );
}

#[test]
fn ac9_delay_independent_impossibility() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut missing_root = 0usize;
    let mut boxes = 0usize;
    let mut empty_sets = 0usize;
    // Per sign class of alpha: has a sampled crossing pushed the abscissa right?
    let mut crossed = [false, false];
    let mut attempts = [0usize, 0usize];
    let eps = 1e-3;
    for _ in 0..1000 {
        let beta = rng.random_range(0.1..100.0);
        let alpha = loop {
            let a: f64 = rng.random_range(-100.0..100.0);
            if a != 0.0 {
                break a;
            }
        };
        let freq = crossing_frequencies(beta, alpha);
        if !(freq.omega_plus.is_finite() && freq.omega_plus > 0.0) {
            empty_sets += 1;
            continue;
        }
        let c = critical_delays(beta, alpha, 3);
        let pairs: Vec<(f64, f64)> = c
            .critical_delays_plus
            .iter()
            .map(|t| (c.omega_plus, *t))
            .chain(
                c.critical_delays_minus
                    .iter()
                    .map(|t| (c.omega_minus.unwrap(), *t)),
            )
            .collect();
        for (w, tau) in &pairs {
            boxes += 1;
            let q = ModalQuasipolynomial::new(beta, alpha, *tau).unwrap();
            let h = 1e-3 * (1.0 + w);
            let rect = Rectangle::new(-h, h, w - h, w + h).unwrap();
            if count_roots_in_rectangle(&q, &rect, DEFAULT_BOUNDARY_SAMPLES).unwrap_or(0) == 0 {
                missing_root += 1;
            }
        }
        let class = usize::from(alpha < 0.0);
        if !crossed[class] && attempts[class] < 50 {
            attempts[class] += 1;
            let tau = c.critical_delays_plus[0];
            let abscissa = |t: f64| {
                spectral_abscissa(
                    &ModalQuasipolynomial::new(beta, alpha, t).unwrap(),
                    ABSCISSA_TOLERANCE,
                )
            };
            if let (Ok(lo), Ok(hi)) = (abscissa(tau - eps), abscissa(tau + eps)) {
                crossed[class] |= hi > lo;
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = empty_sets == 0
        && missing_root == 0
        && crossed[0]
        && crossed[1]
        && elapsed < Duration::from_secs(60);
    report(
        "AC-9 delay-independent impossibility",
        ok,
        elapsed,
        format!(
            "{boxes} axis boxes, {missing_root} without a root, crossing seen for alpha>0: {}, alpha<0: {}",
            crossed[0], crossed[1]
        ),
    );
}
