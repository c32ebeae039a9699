//! Parameter-plane stabilization criterion and the `(beta~, alpha~)` chart.
//!
//! With `z = lambda tau` the modal quasipolynomial becomes
//! `z^2 + beta~ + alpha~ e^{-z}` where `beta~ = tau^2 n^2 pi^2 / ell^2` and
//! `alpha~ = tau^2 alpha`. All of its roots lie in the open left half-plane
//! exactly when
//!
//! ```text
//! 0 < (-1)^(k+1) alpha~ < min(beta~ - k^2 pi^2, (k+1)^2 pi^2 - beta~)
//! ```
//!
//! for some integer `k >= 0`, and that `k` is necessarily `floor(n tau / ell)`.

use std::f64::consts::PI;

use crate::exec::{self, Execution};
use crate::quasipoly::{
    count_roots_perturbed, ComplexValue, ModalQuasipolynomial, QuasiError, Rectangle,
    DEFAULT_BOUNDARY_SAMPLES,
};

/// Relative tolerance for deciding that `n tau / ell` is an integer.
pub const RESONANCE_TOLERANCE: f64 = 1e-12;

/// Printed alongside certificates: the sign pairing below follows the
/// inequality itself, which gives `alpha > 0` for odd `k` and `alpha < 0` for
/// even `k`.
pub const PARITY_NOTE: &str =
    "sign convention: admissible alpha is positive for odd k and negative for even k";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct InvalidInput(pub String);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSpec {
    n: u32,
    ell: f64,
}

impl ModeSpec {
    pub fn new(n: u32, ell: f64) -> Result<Self, InvalidInput> {
        if n == 0 {
            return Err(InvalidInput("mode index n must be at least 1".into()));
        }
        if !(ell.is_finite() && ell > 0.0) {
            return Err(InvalidInput(format!(
                "length ell must be positive, got {ell}"
            )));
        }
        Ok(Self { n, ell })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Squared modal frequency `n^2 pi^2 / ell^2`.
    pub fn beta(&self) -> f64 {
        let w = self.n as f64 * PI / self.ell;
        w * w
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlParams {
    pub tau: f64,
    pub alpha: f64,
}

impl ControlParams {
    pub fn new(tau: f64, alpha: f64) -> Result<Self, InvalidInput> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(InvalidInput(format!(
                "delay tau must be positive, got {tau}"
            )));
        }
        if !alpha.is_finite() || alpha == 0.0 {
            return Err(InvalidInput(format!(
                "gain alpha must be finite and nonzero, got {alpha}"
            )));
        }
        Ok(Self { tau, alpha })
    }
}

/// Open interval `(lo, hi)`; empty when `lo >= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpenInterval {
    pub lo: f64,
    pub hi: f64,
}

impl OpenInterval {
    pub const EMPTY: OpenInterval = OpenInterval { lo: 0.0, hi: 0.0 };

    pub fn is_empty(&self) -> bool {
        self.lo >= self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityCertificate {
    pub k: Option<u32>,
    pub alpha_interval: OpenInterval,
    pub satisfied: bool,
}

/// `floor(n tau / ell)`, or `None` when `n tau / ell` is a positive integer
/// (no stabilizing gain exists there).
pub fn k_index(mode: &ModeSpec, tau: f64) -> Option<u32> {
    let ratio = mode.n as f64 * tau / mode.ell;
    let nearest = ratio.round();
    if nearest >= 1.0 && (ratio - nearest).abs() <= RESONANCE_TOLERANCE * ratio {
        return None;
    }
    Some(ratio.floor() as u32)
}

/// Gains `alpha` satisfying the unscaled inequality for this `(mode, tau)`.
pub fn admissible_alpha_interval(mode: &ModeSpec, tau: f64) -> OpenInterval {
    let Some(k) = k_index(mode, tau) else {
        return OpenInterval::EMPTY;
    };
    let (n, ell, k) = (mode.n as f64, mode.ell, k as f64);
    let pi2 = PI * PI;
    let lower_gap = n * n * pi2 * tau * tau - k * k * ell * ell * pi2;
    let upper_gap = (k + 1.0) * (k + 1.0) * ell * ell * pi2 - n * n * pi2 * tau * tau;
    let m = lower_gap.min(upper_gap);
    if m <= 0.0 {
        return OpenInterval::EMPTY;
    }
    let bound = m / (ell * ell * tau * tau);
    if k as u32 % 2 == 1 {
        OpenInterval { lo: 0.0, hi: bound }
    } else {
        OpenInterval {
            lo: -bound,
            hi: 0.0,
        }
    }
}

pub fn check_stabilizing(mode: &ModeSpec, params: &ControlParams) -> StabilityCertificate {
    let k = k_index(mode, params.tau);
    let alpha_interval = admissible_alpha_interval(mode, params.tau);
    StabilityCertificate {
        k,
        alpha_interval,
        satisfied: !alpha_interval.is_empty() && alpha_interval.contains(params.alpha),
    }
}

/// The scaled inequality for one `k`.
pub fn scaled_inequality_holds(beta_t: f64, alpha_t: f64, k: u32) -> bool {
    let k = k as f64;
    let pi2 = PI * PI;
    let sign = if (k as u32) % 2 == 1 { 1.0 } else { -1.0 };
    let lhs = sign * alpha_t;
    let m = (beta_t - k * k * pi2).min((k + 1.0) * (k + 1.0) * pi2 - beta_t);
    0.0 < lhs && lhs < m
}

/// First `k` in `0..=ceil(sqrt(beta~)/pi) + 1` satisfying the scaled
/// inequality.
pub fn scaled_stable_k(beta_t: f64, alpha_t: f64) -> Option<u32> {
    let k_max = (beta_t.max(0.0).sqrt() / PI).ceil() as u32 + 1;
    (0..=k_max).find(|&k| scaled_inequality_holds(beta_t, alpha_t, k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingData {
    pub omega_plus: f64,
    pub omega_minus: Option<f64>,
    pub critical_delays_plus: Vec<f64>,
    pub critical_delays_minus: Vec<f64>,
}

/// Positive roots `x = omega^2` of `x^2 - 2 beta x - (alpha^2 - beta^2) = 0`,
/// larger first.
fn crossing_quadratic(beta: f64, alpha: f64) -> (f64, Option<f64>) {
    let b = -2.0 * beta;
    let c = beta * beta - alpha * alpha;
    let disc = (b * b - 4.0 * c).max(0.0).sqrt();
    let big = 0.5 * (-b + disc);
    let small = if big != 0.0 { c / big } else { 0.0 };
    (big, (small > 0.0).then_some(small))
}

/// Frequencies `omega > 0` with `Q(i omega) = 0` for some delay.
///
/// `omega_+ = sqrt(beta + |alpha|)` always exists; `omega_- = sqrt(beta - |alpha|)`
/// exists iff `alpha^2 < beta^2`.
pub fn crossing_frequencies(beta: f64, alpha: f64) -> CrossingData {
    let (x_plus, x_minus) = crossing_quadratic(beta, alpha);
    let plus = beta + alpha.abs();
    let minus = beta - alpha.abs();
    // The discriminant cancels when |alpha| << beta and Vieta's product
    // cancels when |alpha| ~ beta, so the quadratic only cross-checks the
    // closed forms, which are what is returned.
    debug_assert!((x_plus - plus).abs() <= 1e-8 * plus);
    debug_assert!(x_minus.is_none_or(|x| (x - minus).abs() <= 1e-8 * plus));
    CrossingData {
        omega_plus: plus.sqrt(),
        omega_minus: (alpha * alpha < beta * beta && minus > 0.0).then(|| minus.sqrt()),
        critical_delays_plus: Vec::new(),
        critical_delays_minus: Vec::new(),
    }
}

/// Crossing frequencies together with the first `max_count` positive delays
/// at which each one is a root of `Q`.
///
/// From `Q(i omega) = 0`: `e^{-i omega tau} = (omega^2 - beta) / alpha`, which
/// is `+1` or `-1`. For `+1` the delays are `2 j pi / omega` (`j >= 1`), for
/// `-1` they are `(2 j + 1) pi / omega` (`j >= 0`).
pub fn critical_delays(beta: f64, alpha: f64, max_count: usize) -> CrossingData {
    let mut data = crossing_frequencies(beta, alpha);
    let delays = |omega: f64, phase_is_one: bool| -> Vec<f64> {
        (0..max_count)
            .map(|j| {
                let j = j as f64;
                if phase_is_one {
                    2.0 * (j + 1.0) * PI / omega
                } else {
                    (2.0 * j + 1.0) * PI / omega
                }
            })
            .collect()
    };
    // omega_+^2 - beta = +|alpha|, so the phase is sign(alpha).
    data.critical_delays_plus = delays(data.omega_plus, alpha > 0.0);
    if let Some(w) = data.omega_minus {
        data.critical_delays_minus = delays(w, alpha < 0.0);
    }
    data
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionGrid {
    pub beta_tilde_axis: Vec<f64>,
    pub alpha_tilde_axis: Vec<f64>,
    /// Row-major over `(beta index, alpha index)`; `None` marks a cell whose
    /// count could not be established (root on the contour after retries,
    /// or contour non-convergence).
    pub counts: Vec<Option<usize>>,
    pub analytic_stable: Vec<bool>,
}

impl RegionGrid {
    pub fn index(&self, i_beta: usize, j_alpha: usize) -> usize {
        i_beta * self.alpha_tilde_axis.len() + j_alpha
    }

    pub fn count(&self, i_beta: usize, j_alpha: usize) -> Option<usize> {
        self.counts[self.index(i_beta, j_alpha)]
    }

    pub fn invalid_fraction(&self) -> f64 {
        let bad = self.counts.iter().filter(|c| c.is_none()).count();
        bad as f64 / self.counts.len().max(1) as f64
    }

    pub fn cell_diagonal(&self) -> f64 {
        let step = |axis: &[f64]| {
            if axis.len() > 1 {
                axis[1] - axis[0]
            } else {
                0.0
            }
        };
        step(&self.beta_tilde_axis).hypot(step(&self.alpha_tilde_axis))
    }
}

fn cell_centres(range: (f64, f64), resolution: usize) -> Vec<f64> {
    let h = (range.1 - range.0) / resolution as f64;
    (0..resolution)
        .map(|i| range.0 + (i as f64 + 0.5) * h)
        .collect()
}

/// Right-half-plane root count of `z^2 + beta~ + alpha~ e^{-z}`.
pub fn scaled_rhp_count(beta_t: f64, alpha_t: f64) -> Result<usize, QuasiError> {
    let q = ModalQuasipolynomial::new(beta_t, alpha_t, 1.0)?;
    let r = q.rhp_root_bound();
    let pad = 0.05 * r + 0.1;
    let rect = Rectangle::new(0.0, r + pad, -(r + pad), r + pad)?;
    let (count, _) = count_roots_perturbed(&q, &rect, DEFAULT_BOUNDARY_SAMPLES)?;
    Ok(count)
}

pub fn region_grid(
    beta_tilde_range: (f64, f64),
    alpha_tilde_range: (f64, f64),
    resolution: usize,
    exec: Execution,
) -> Result<RegionGrid, InvalidInput> {
    let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 < r.1;
    if !ok(beta_tilde_range) || !ok(alpha_tilde_range) {
        return Err(InvalidInput("ranges must be finite and nonempty".into()));
    }
    if beta_tilde_range.0 < 0.0 {
        return Err(InvalidInput("beta~ range must be nonnegative".into()));
    }
    if resolution < 8 {
        return Err(InvalidInput(format!(
            "resolution must be at least 8, got {resolution}"
        )));
    }
    let betas = cell_centres(beta_tilde_range, resolution);
    let alphas = cell_centres(alpha_tilde_range, resolution);
    let cells = exec::map_indexed(exec, resolution * resolution, |idx| {
        let b = betas[idx / resolution];
        let a = alphas[idx % resolution];
        (scaled_rhp_count(b, a).ok(), scaled_stable_k(b, a).is_some())
    });
    let (counts, analytic_stable) = cells.into_iter().unzip();
    Ok(RegionGrid {
        beta_tilde_axis: betas,
        alpha_tilde_axis: alphas,
        counts,
        analytic_stable,
    })
}

/// A straight boundary line `alpha~ = slope * beta~ + intercept`, or the
/// vertical line `beta~ = intercept` when `slope` is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLine {
    pub label: String,
    pub k: u32,
    pub slope: Option<f64>,
    pub intercept: f64,
}

impl BoundaryLine {
    pub fn distance(&self, beta_t: f64, alpha_t: f64) -> f64 {
        match self.slope {
            Some(m) => (alpha_t - m * beta_t - self.intercept).abs() / (1.0 + m * m).sqrt(),
            None => (beta_t - self.intercept).abs(),
        }
    }
}

/// Lines bounding the stability lobes: `alpha~ = +-(beta~ - k^2 pi^2)`,
/// `alpha~ = +-((k+1)^2 pi^2 - beta~)`, `beta~ = k^2 pi^2` and `alpha~ = 0`,
/// for `k = 0..=k_max`.
pub fn boundary_lines(k_max: u32) -> Vec<BoundaryLine> {
    let pi2 = PI * PI;
    let mut lines = vec![BoundaryLine {
        label: "alpha=0".into(),
        k: 0,
        slope: Some(0.0),
        intercept: 0.0,
    }];
    for k in 0..=k_max {
        let kk = (k as f64).powi(2) * pi2;
        let k1 = (k as f64 + 1.0).powi(2) * pi2;
        lines.push(BoundaryLine {
            label: format!("alpha=+(beta-{k}^2pi^2)"),
            k,
            slope: Some(1.0),
            intercept: -kk,
        });
        lines.push(BoundaryLine {
            label: format!("alpha=-(beta-{k}^2pi^2)"),
            k,
            slope: Some(-1.0),
            intercept: kk,
        });
        lines.push(BoundaryLine {
            label: format!("alpha=+({}^2pi^2-beta)", k + 1),
            k,
            slope: Some(-1.0),
            intercept: k1,
        });
        lines.push(BoundaryLine {
            label: format!("alpha=-({}^2pi^2-beta)", k + 1),
            k,
            slope: Some(1.0),
            intercept: -k1,
        });
        lines.push(BoundaryLine {
            label: format!("beta={k}^2pi^2"),
            k,
            slope: None,
            intercept: kk,
        });
    }
    lines
}

/// `k_max` covering a chart whose `beta~` extends to `beta_max`.
pub fn k_max_for(beta_max: f64) -> u32 {
    (beta_max.max(0.0).sqrt() / PI).ceil() as u32 + 1
}

pub fn distance_to_boundary(lines: &[BoundaryLine], beta_t: f64, alpha_t: f64) -> f64 {
    lines
        .iter()
        .map(|l| l.distance(beta_t, alpha_t))
        .fold(f64::INFINITY, f64::min)
}

/// `|Q(i omega)|` at a critical delay; used to validate the delay lists.
pub fn crossing_residual(beta: f64, alpha: f64, omega: f64, tau: f64) -> f64 {
    ModalQuasipolynomial::new(beta, alpha, tau)
        .map(|q| q.evaluate(ComplexValue::new(0.0, omega)).norm())
        .unwrap_or(f64::INFINITY)
}
