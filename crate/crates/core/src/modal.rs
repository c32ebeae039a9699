//! Single-mode reduction and the delay-ODE oracle.
//!
//! Quasimode data `u0 = zeta0 sin(n pi x / ell)`, `u1 = zeta1 sin(n pi x / ell)`
//! keeps the PDE solution on one mode, `u(x, t) = y(t) sin(n pi x / ell)`, with
//!
//! ```text
//! y'' + beta y + alpha y(t - tau) = 0,   y(0) = zeta0,   y'(0) = zeta1.
//! ```
//!
//! [`dde_integrate`] solves this by the method of steps with classical RK4.
//! The step is snapped so the delay is an exact number of steps; delayed
//! values at stage times come from cubic Hermite interpolation of the stored
//! `(y, y')` samples, which keeps the scheme fourth order.

use std::f64::consts::PI;

use thiserror::Error;

use crate::stability::ModeSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModalError {
    #[error("invalid step: dt = {dt} must satisfy 0 < dt < tau = {tau}")]
    InvalidStep { dt: f64, tau: f64 },
    #[error("invalid modal problem: {0}")]
    InvalidParameters(String),
    #[error("only {found} envelope peaks in the fit window (need at least {MIN_PEAKS})")]
    InsufficientPeaks { found: usize },
}

pub const MIN_PEAKS: usize = 5;

pub fn beta_of_mode(mode: &ModeSpec) -> f64 {
    mode.beta()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasimodeData {
    pub mode: ModeSpec,
    pub zeta0: f64,
    pub zeta1: f64,
}

/// Samples `(u0, u1)` of the quasimode initial data on `grid`.
pub fn quasimode_fields(
    data: &QuasimodeData,
    grid: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), ModalError> {
    let ell = data.mode.ell();
    if let Some(x) = grid.iter().find(|&&x| !(0.0..=ell).contains(&x)) {
        return Err(ModalError::InvalidParameters(format!(
            "grid point {x} lies outside [0, {ell}]"
        )));
    }
    let k = data.mode.n() as f64 * PI / ell;
    let shape: Vec<f64> = grid
        .iter()
        .map(|&x| {
            // sin(n pi) is ~1e-16, not 0; pin the Dirichlet ends.
            if x == 0.0 || x == ell {
                0.0
            } else {
                (k * x).sin()
            }
        })
        .collect();
    let u0 = shape.iter().map(|s| data.zeta0 * s).collect();
    let u1 = shape.iter().map(|s| data.zeta1 * s).collect();
    Ok((u0, u1))
}

/// Delayed values for `t < 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum HistoryFunction {
    /// `y(t) = 0` on `[-tau, 0)`; the control is off until `t = tau`.
    #[default]
    Zero,
    /// Uniform samples over `[-tau, 0]`, first sample at `-tau`, linearly
    /// interpolated.
    Sampled(Vec<f64>),
}

impl HistoryFunction {
    fn value(&self, t: f64, tau: f64) -> f64 {
        match self {
            HistoryFunction::Zero => 0.0,
            HistoryFunction::Sampled(s) => {
                let pos = ((t + tau) / tau * (s.len() - 1) as f64).clamp(0.0, (s.len() - 1) as f64);
                let i = (pos.floor() as usize).min(s.len() - 2);
                let w = pos - i as f64;
                s[i] * (1.0 - w) + s[i + 1] * w
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdeProblem {
    pub beta: f64,
    pub alpha: f64,
    pub tau: f64,
    pub zeta0: f64,
    pub zeta1: f64,
    pub history: HistoryFunction,
}

impl DdeProblem {
    pub fn new(beta: f64, alpha: f64, tau: f64, zeta0: f64, zeta1: f64) -> Self {
        Self {
            beta,
            alpha,
            tau,
            zeta0,
            zeta1,
            history: HistoryFunction::Zero,
        }
    }

    pub fn with_history(mut self, history: HistoryFunction) -> Self {
        self.history = history;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalTrace {
    /// Step actually used, `tau / M`.
    pub dt: f64,
    pub delay_steps: usize,
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub ydot: Vec<f64>,
}

impl ModalTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `(ell / 2)(y'^2 + beta y^2)` at every sample.
    pub fn energy(&self, beta: f64, ell: f64) -> Vec<f64> {
        self.y
            .iter()
            .zip(&self.ydot)
            .map(|(&y, &v)| modal_energy(y, v, beta, ell))
            .collect()
    }

    /// Envelope fit of `|y|`.
    pub fn decay_fit(&self, window: (f64, f64)) -> Result<DecayFit, ModalError> {
        let abs: Vec<f64> = self.y.iter().map(|v| v.abs()).collect();
        decay_rate_fit(&self.times, &abs, window)
    }
}

/// Largest `tau / M <= dt` with integer `M`.
pub fn snap_step(dt: f64, tau: f64) -> Result<(f64, usize), ModalError> {
    if !(dt > 0.0 && dt < tau && tau.is_finite()) {
        return Err(ModalError::InvalidStep { dt, tau });
    }
    let m = (tau / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    Ok((tau / m as f64, m))
}

fn hermite(y0: f64, v0: f64, y1: f64, v1: f64, h: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * v0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * v1
}

/// Integrate the modal delay equation up to `t_final`.
pub fn dde_integrate(
    problem: &DdeProblem,
    dt: f64,
    t_final: f64,
) -> Result<ModalTrace, ModalError> {
    let DdeProblem {
        beta,
        alpha,
        tau,
        zeta0,
        zeta1,
        ref history,
    } = *problem;
    let finite = [beta, alpha, tau, zeta0, zeta1, t_final]
        .iter()
        .all(|v| v.is_finite());
    if !finite {
        return Err(ModalError::InvalidParameters("non-finite input".into()));
    }
    let (h, m) = snap_step(dt, tau)?;
    if t_final < tau {
        return Err(ModalError::InvalidParameters(format!(
            "t_final = {t_final} must be at least tau = {tau}"
        )));
    }
    if let HistoryFunction::Sampled(s) = history {
        if s.len() < 2 || s.iter().any(|v| !v.is_finite()) {
            return Err(ModalError::InvalidParameters(
                "sampled history needs at least two finite samples".into(),
            ));
        }
    }
    let steps = (t_final / h).round() as usize;
    let mut y = Vec::with_capacity(steps + 1);
    let mut v = Vec::with_capacity(steps + 1);
    y.push(zeta0);
    v.push(zeta1);

    for j in 0..steps {
        // Delayed interval is [(j - M) h, (j - M + 1) h].
        let delayed = |s: f64, y: &[f64], v: &[f64]| -> f64 {
            if j < m {
                history.value((j as f64 - m as f64 + s) * h, tau)
            } else {
                let k = j - m;
                hermite(y[k], v[k], y[k + 1], v[k + 1], h, s)
            }
        };
        let d0 = delayed(0.0, &y, &v);
        let dm = delayed(0.5, &y, &v);
        let d1 = delayed(1.0, &y, &v);
        let accel = |yy: f64, d: f64| -beta * yy - alpha * d;

        let (y0, v0) = (y[j], v[j]);
        let (k1y, k1v) = (v0, accel(y0, d0));
        let (k2y, k2v) = (v0 + 0.5 * h * k1v, accel(y0 + 0.5 * h * k1y, dm));
        let (k3y, k3v) = (v0 + 0.5 * h * k2v, accel(y0 + 0.5 * h * k2y, dm));
        let (k4y, k4v) = (v0 + h * k3v, accel(y0 + h * k3y, d1));
        y.push(y0 + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y));
        v.push(v0 + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v));
    }
    let times = (0..=steps).map(|j| j as f64 * h).collect();
    Ok(ModalTrace {
        dt: h,
        delay_steps: m,
        times,
        y,
        ydot: v,
    })
}

/// `int_0^ell (u_x^2 + u_t^2) dx` for `u = y(t) sin(n pi x / ell)`.
pub fn modal_energy(y: f64, ydot: f64, beta: f64, ell: f64) -> f64 {
    0.5 * ell * (ydot * ydot + beta * y * y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Slope of `log(peak)` against time.
    pub rate: f64,
    pub r_squared: f64,
    pub n_peaks: usize,
    pub window_start: f64,
    pub window_end: f64,
}

/// Least-squares slope of `log` of the local maxima of `signal` inside
/// `window`.
pub fn decay_rate_fit(
    times: &[f64],
    signal: &[f64],
    window: (f64, f64),
) -> Result<DecayFit, ModalError> {
    if times.len() != signal.len()
        || window.0.partial_cmp(&window.1) != Some(std::cmp::Ordering::Less)
    {
        return Err(ModalError::InvalidParameters(
            "decay fit needs matching samples and an increasing window".into(),
        ));
    }
    let inside: Vec<usize> = (0..times.len())
        .filter(|&i| times[i] >= window.0 && times[i] <= window.1)
        .collect();
    let mut pts = Vec::new();
    for w in inside.windows(3) {
        let (a, b, c) = (signal[w[0]], signal[w[1]], signal[w[2]]);
        if b > a && b >= c && b > 0.0 {
            pts.push((times[w[1]], b.ln()));
        }
    }
    if pts.len() < MIN_PEAKS {
        return Err(ModalError::InsufficientPeaks { found: pts.len() });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    let rate = sxy / sxx;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - ml).powi(2)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - ml - rate * (p.0 - mt)).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(DecayFit {
        rate,
        r_squared,
        n_peaks: pts.len(),
        window_start: window.0,
        window_end: window.1,
    })
}
