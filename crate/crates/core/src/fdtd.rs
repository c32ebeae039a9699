//! Explicit leapfrog simulation of the delayed wave equation
//!
//! ```text
//! U_tt - c^2 U_xx = -alpha_eff U(x, t - tau_eff),   U(0, t) = U(l, t) = 0,
//! ```
//!
//! with zero control before `t = tau_eff`. Past displacement fields live in a
//! ring buffer of `M + 2` frames (`M = tau_eff / dt` rounded), which is enough
//! for the delayed field, the leapfrog pair and a centered time derivative in
//! the energy.

use std::f64::consts::PI;

use thiserror::Error;

use crate::exec::{self, Execution};
use crate::modal::{decay_rate_fit, DecayFit, ModalError};

/// Magnitude treated as numerical blow-up.
pub const BLOW_UP_LIMIT: f64 = 1e6;
const PARALLEL_MIN_CELLS: usize = 1 << 14;
const PARALLEL_CHUNK: usize = 1 << 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("CFL violation: courant number c*dt/dx = {courant} exceeds 1")]
    CflViolation { courant: f64 },
    #[error("delay {tau_eff} is shorter than the time step {dt}")]
    DelayTooSmall { tau_eff: f64, dt: f64 },
    #[error("invalid simulation parameters: {0}")]
    InvalidParameters(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("weighted energy needs {needed} steps of history, only {step} available")]
    HistoryIncomplete { step: usize, needed: usize },
    #[error("numerical blow-up at t = {time}: |u| exceeded {BLOW_UP_LIMIT:e}")]
    BlowUp { time: f64 },
}

/// Physical string: length `l`, wave speed `c`, and the dimensionless
/// `(ell, tau, alpha)` it is scaled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub l: f64,
    pub c: f64,
    pub ell: f64,
    pub tau: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretization {
    pub dx: f64,
    pub dt: f64,
    pub t_final: f64,
    /// Shrink `dt` so the delay is an exact number of steps.
    pub snap_dt_to_delay: bool,
}

impl Discretization {
    pub fn new(dx: f64, dt: f64, t_final: f64) -> Self {
        Self {
            dx,
            dt,
            t_final,
            snap_dt_to_delay: false,
        }
    }

    pub fn snapped(mut self) -> Self {
        self.snap_dt_to_delay = true;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub length: f64,
    pub wave_speed: f64,
    pub alpha_eff: f64,
    pub tau_eff: f64,
    pub dx: f64,
    pub dt: f64,
    pub t_final: f64,
    /// History weight `xi` in the weighted energy.
    pub energy_weight: f64,
    pub cells: usize,
    pub delay_steps: usize,
    /// `|tau_eff - M dt|`.
    pub delay_rounding_error: f64,
    /// `d = l / (c ell)`; 1 for dimensionless runs.
    pub time_scale: f64,
}

impl SimConfig {
    /// Physical coordinates: `d = l / (c ell)`, `tau_eff = d tau`,
    /// `alpha_eff = alpha / d^2`.
    pub fn physical(p: PhysicalParams, disc: Discretization) -> Result<Self, SimError> {
        let finite = [p.l, p.c, p.ell, p.tau]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !finite || !p.alpha.is_finite() {
            return Err(SimError::InvalidParameters(
                "l, c, ell and tau must be positive and alpha finite".into(),
            ));
        }
        let d = p.l / (p.c * p.ell);
        Self::build(p.l, p.c, p.alpha / (d * d), d * p.tau, d, disc)
    }

    pub fn dimensionless(
        ell: f64,
        tau: f64,
        alpha: f64,
        disc: Discretization,
    ) -> Result<Self, SimError> {
        let finite = [ell, tau].iter().all(|v| v.is_finite() && *v > 0.0);
        if !finite || !alpha.is_finite() {
            return Err(SimError::InvalidParameters(
                "ell and tau must be positive and alpha finite".into(),
            ));
        }
        Self::build(ell, 1.0, alpha, tau, 1.0, disc)
    }

    fn build(
        length: f64,
        wave_speed: f64,
        alpha_eff: f64,
        tau_eff: f64,
        time_scale: f64,
        disc: Discretization,
    ) -> Result<Self, SimError> {
        let Discretization {
            dx,
            dt,
            t_final,
            snap_dt_to_delay,
        } = disc;
        if ![dx, dt, t_final].iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(SimError::InvalidParameters(
                "dx, dt and t_final must be positive".into(),
            ));
        }
        if tau_eff < dt {
            return Err(SimError::DelayTooSmall { tau_eff, dt });
        }
        let cells = (length / dx).round().max(2.0) as usize;
        let dx = length / cells as f64;
        let (dt, delay_steps) = if snap_dt_to_delay {
            let m = (tau_eff / dt * (1.0 - 1e-12)).ceil() as usize;
            (tau_eff / m as f64, m)
        } else {
            (dt, ((tau_eff / dt).round() as usize).max(1))
        };
        let courant = wave_speed * dt / dx;
        if courant > 1.0 {
            return Err(SimError::CflViolation { courant });
        }
        Ok(Self {
            length,
            wave_speed,
            alpha_eff,
            tau_eff,
            dx,
            dt,
            t_final,
            energy_weight: 2.0 * alpha_eff.abs() * tau_eff,
            cells,
            delay_steps,
            delay_rounding_error: (tau_eff - delay_steps as f64 * dt).abs(),
            time_scale,
        })
    }

    pub fn with_energy_weight(mut self, xi: f64) -> Self {
        self.energy_weight = xi;
        self
    }

    pub fn courant(&self) -> f64 {
        self.wave_speed * self.dt / self.dx
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Node coordinates `0, dx, ..., length`.
    pub fn grid(&self) -> Vec<f64> {
        (0..=self.cells)
            .map(|j| {
                if j == self.cells {
                    self.length
                } else {
                    j as f64 * self.dx
                }
            })
            .collect()
    }

    /// `A sin(n pi x / length)` on the grid, ends pinned to zero.
    pub fn sine_mode(&self, n: u32, amplitude: f64) -> Vec<f64> {
        let k = n as f64 * PI / self.length;
        let mut u: Vec<f64> = self
            .grid()
            .iter()
            .map(|x| amplitude * (k * x).sin())
            .collect();
        u[0] = 0.0;
        u[self.cells] = 0.0;
        u
    }
}

/// Leapfrog state: a ring of the most recent `M + 2` displacement frames.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedWaveState {
    frames: Vec<Vec<f64>>,
    /// `int u^2 dx` of each frame, kept in step with `frames`.
    norms: Vec<f64>,
    newest: usize,
    step: usize,
    delay_steps: usize,
}

impl DelayedWaveState {
    /// Index `m` of the newest frame `u^m`.
    pub fn step(&self) -> usize {
        self.step
    }

    /// `u^(m - k)`; frames before `t = 0` are the zero pre-history.
    pub fn frame_back(&self, k: usize) -> &[f64] {
        assert!(
            k < self.frames.len(),
            "ring holds {} frames",
            self.frames.len()
        );
        let cap = self.frames.len();
        &self.frames[(self.newest + cap - k) % cap]
    }

    pub fn u_curr(&self) -> &[f64] {
        self.frame_back(0)
    }

    pub fn u_prev(&self) -> &[f64] {
        self.frame_back(1)
    }

    /// `u^(m - M)`, the field entering the control at the next step.
    pub fn delayed(&self) -> &[f64] {
        self.frame_back(self.delay_steps)
    }

    pub fn ring_len(&self) -> usize {
        self.frames.len()
    }
}

fn second_difference(u: &[f64], j: usize) -> f64 {
    u[j + 1] - 2.0 * u[j] + u[j - 1]
}

pub fn init_state(
    config: &SimConfig,
    u0: &[f64],
    u1: &[f64],
) -> Result<DelayedWaveState, SimError> {
    let n = config.cells + 1;
    if u0.len() != n || u1.len() != n {
        return Err(SimError::ShapeMismatch(format!(
            "initial data must have {n} samples, got {} and {}",
            u0.len(),
            u1.len()
        )));
    }
    let scale = u0.iter().chain(u1).fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    for (name, u) in [("u0", u0), ("u1", u1)] {
        if u[0].abs() > tol || u[n - 1].abs() > tol {
            return Err(SimError::ShapeMismatch(format!(
                "{name} violates the Dirichlet condition at an endpoint"
            )));
        }
    }
    if u0.iter().chain(u1).any(|v| !v.is_finite()) {
        return Err(SimError::ShapeMismatch(
            "initial data must be finite".into(),
        ));
    }
    let m = config.delay_steps;
    let cap = m + 2;
    let mut frames = vec![vec![0.0; n]; cap];
    let c2 = config.wave_speed * config.wave_speed / (config.dx * config.dx);
    let dt = config.dt;
    let mut start = u0.to_vec();
    start[0] = 0.0;
    start[n - 1] = 0.0;
    // t = 0 < tau_eff, so the delayed field in the starter step is the
    // zero pre-history.
    let delayed = &frames[cap - 1];
    let mut first = vec![0.0; n];
    for j in 1..n - 1 {
        let accel = c2 * second_difference(&start, j) - config.alpha_eff * delayed[j];
        first[j] = start[j] + dt * u1[j] + 0.5 * dt * dt * accel;
    }
    let mut norms = vec![0.0; cap];
    norms[0] = trapezoid_sq(&start, config.dx);
    norms[1] = trapezoid_sq(&first, config.dx);
    frames[0] = start;
    frames[1] = first;
    Ok(DelayedWaveState {
        frames,
        norms,
        newest: 1,
        step: 1,
        delay_steps: m,
    })
}

/// Advance one step, parallelising the interior update on wide grids.
pub fn step(state: &mut DelayedWaveState, config: &SimConfig) {
    let exec = if config.cells >= PARALLEL_MIN_CELLS {
        Execution::Parallel
    } else {
        Execution::Sequential
    };
    step_with(state, config, exec);
}

pub fn step_with(state: &mut DelayedWaveState, config: &SimConfig, exec: Execution) {
    let cap = state.frames.len();
    let n = config.cells + 1;
    let target = (state.newest + 1) % cap;
    let mut next = std::mem::take(&mut state.frames[target]);
    {
        let curr = state.frame_back(0);
        let prev = state.frame_back(1);
        let delayed = state.delayed();
        let r2 = (config.wave_speed * config.dt / config.dx).powi(2);
        let a = config.dt * config.dt * config.alpha_eff;
        let interior = &mut next[1..n - 1];
        exec::for_each_chunk_mut(exec, interior, PARALLEL_CHUNK, |start, chunk| {
            for (k, out) in chunk.iter_mut().enumerate() {
                let j = start + k + 1;
                *out = 2.0 * curr[j] - prev[j] + r2 * second_difference(curr, j) - a * delayed[j];
            }
        });
    }
    next[0] = 0.0;
    next[n - 1] = 0.0;
    state.norms[target] = trapezoid_sq(&next, config.dx);
    state.frames[target] = next;
    state.newest = target;
    state.step += 1;
}

fn trapezoid_sq(u: &[f64], dx: f64) -> f64 {
    let n = u.len();
    let inner: f64 = u[1..n - 1].iter().map(|v| v * v).sum();
    (inner + 0.5 * (u[0] * u[0] + u[n - 1] * u[n - 1])) * dx
}

/// Time of the level reported by [`field_energy`] (one behind the newest).
pub fn energy_time(state: &DelayedWaveState, config: &SimConfig) -> f64 {
    (state.step - 1) as f64 * config.dt
}

/// `E = 1/2 int (u_t^2 + c^2 u_x^2) dx` at level `p = m - 1`, with a centered
/// `u_t` (one-sided at `p = 0`) and `u_x` on cell centres.
pub fn field_energy(state: &DelayedWaveState, config: &SimConfig) -> f64 {
    let p = state.step - 1;
    let level = state.frame_back(1);
    let after = state.frame_back(0);
    let ut: Vec<f64> = if p == 0 {
        after
            .iter()
            .zip(level)
            .map(|(a, b)| (a - b) / config.dt)
            .collect()
    } else {
        let before = state.frame_back(2);
        after
            .iter()
            .zip(before)
            .map(|(a, b)| (a - b) / (2.0 * config.dt))
            .collect()
    };
    let kinetic = trapezoid_sq(&ut, config.dx);
    let strain: f64 = level
        .windows(2)
        .map(|w| ((w[1] - w[0]) / config.dx).powi(2))
        .sum::<f64>()
        * config.dx;
    0.5 * (kinetic + config.wave_speed * config.wave_speed * strain)
}

/// `(xi / 2) int_0^l int_0^1 u(x, t - tau rho)^2 d rho dx` over the buffered
/// frames `u^(p-M) .. u^p`, zero pre-history included.
fn history_term(state: &DelayedWaveState, config: &SimConfig) -> f64 {
    let m = state.delay_steps;
    let cap = state.norms.len();
    let norm = |k: usize| state.norms[(state.newest + cap - k) % cap];
    let inner: f64 = (2..=m).map(norm).sum();
    let rho = (inner + 0.5 * (norm(1) + norm(m + 1))) / m as f64;
    0.5 * config.energy_weight * rho
}

/// Field energy plus the `xi`-weighted history term.
pub fn weighted_energy(state: &DelayedWaveState, config: &SimConfig) -> Result<f64, SimError> {
    let p = state.step - 1;
    if p < state.delay_steps {
        return Err(SimError::HistoryIncomplete {
            step: p,
            needed: state.delay_steps,
        });
    }
    Ok(field_energy(state, config) + history_term(state, config))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub field_energy: Vec<f64>,
    pub weighted_energy: Vec<f64>,
    pub sample_stride: usize,
}

impl EnergyTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn decay_fit(&self, window: (f64, f64)) -> Result<DecayFit, ModalError> {
        decay_rate_fit(&self.times, &self.field_energy, window)
    }

    pub fn weighted_decay_fit(&self, window: (f64, f64)) -> Result<DecayFit, ModalError> {
        decay_rate_fit(&self.times, &self.weighted_energy, window)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SnapshotSet {
    pub times: Vec<f64>,
    pub frames: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub energy: EnergyTrace,
    pub snapshots: SnapshotSet,
    pub state: DelayedWaveState,
}

/// Simulate to `t_final`, sampling the energies every `energy_stride` steps
/// (levels `0 .. steps - 1`) and the displacement at the steps nearest to
/// `snapshot_times`.
pub fn run(
    config: &SimConfig,
    u0: &[f64],
    u1: &[f64],
    snapshot_times: &[f64],
    energy_stride: usize,
) -> Result<SimOutput, SimError> {
    if energy_stride == 0 {
        return Err(SimError::InvalidParameters(
            "energy stride must be at least 1".into(),
        ));
    }
    let steps = config.steps();
    let mut wanted: Vec<usize> = snapshot_times
        .iter()
        .filter(|t| t.is_finite())
        .map(|t| ((t / config.dt).round().max(0.0) as usize).min(steps))
        .collect();
    wanted.sort_unstable();
    wanted.dedup();
    let mut wanted = wanted.into_iter().peekable();

    let mut state = init_state(config, u0, u1)?;
    let mut snapshots = SnapshotSet::default();
    let mut energy = EnergyTrace {
        times: Vec::new(),
        field_energy: Vec::new(),
        weighted_energy: Vec::new(),
        sample_stride: energy_stride,
    };
    let mut take_snapshot = |level: usize, frame: &[f64], snaps: &mut SnapshotSet| {
        while wanted.peek() == Some(&level) {
            wanted.next();
            snaps.times.push(level as f64 * config.dt);
            snaps.frames.push(frame.to_vec());
        }
    };
    take_snapshot(0, state.u_prev(), &mut snapshots);

    loop {
        let p = state.step() - 1;
        if p % energy_stride == 0 {
            let e = field_energy(&state, config);
            energy.times.push(p as f64 * config.dt);
            energy.field_energy.push(e);
            energy
                .weighted_energy
                .push(e + history_term(&state, config));
        }
        take_snapshot(state.step(), state.u_curr(), &mut snapshots);
        if state.step() >= steps {
            break;
        }
        step(&mut state, config);
        let worst = state.u_curr().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if worst.is_nan() || worst > BLOW_UP_LIMIT {
            return Err(SimError::BlowUp {
                time: state.step() as f64 * config.dt,
            });
        }
    }
    Ok(SimOutput {
        energy,
        snapshots,
        state,
    })
}
