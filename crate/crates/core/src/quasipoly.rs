//! The modal characteristic quasipolynomial `Q(s) = s^2 + beta + alpha e^{-s tau}`.
//!
//! Root counting is done with the argument principle: the phase of `Q` is
//! continued along the boundary of a rectangle and the accumulated change,
//! divided by `2 pi`, is the number of enclosed roots counted with
//! multiplicity. Root locations come from damped Newton iterations seeded at
//! the crossings of the zero-level curves of `Re Q` and `Im Q`; a root list
//! is only called certified when its length equals the winding count.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use thiserror::Error;

pub type ComplexValue = Complex64;

/// Target for `|Q|` at a refined root.
pub const ROOT_TOLERANCE: f64 = 1e-10;
/// `|Q|` below this on a contour means a root sits on the boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;
/// Refined roots closer than this are the same root.
pub const CLUSTER_RADIUS: f64 = 1e-7;
pub const ABSCISSA_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_BOUNDARY_SAMPLES: usize = 256;
pub const DEFAULT_GRID_DENSITY: usize = 32;

const MAX_CONTOUR_EVALUATIONS: usize = 1 << 21;
const MAX_SUBDIVISION_DEPTH: u32 = 60;
const MAX_EDGE_SEGMENTS: usize = 1 << 16;
const MAX_GRID_CELLS: usize = 4096;
const NEWTON_MAX_ITER: usize = 100;
const NEWTON_HALVINGS: usize = 20;
const DENSITY_DOUBLINGS: usize = 3;
const PERTURB_RETRIES: usize = 5;
const PERTURB_FRACTION: f64 = 1e-4;
const MAX_SWEEP_STRIPS: usize = 400;
const BISECTION_WIDTH: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuasiError {
    #[error("invalid quasipolynomial parameters: {0}")]
    InvalidParameters(String),
    #[error("invalid rectangle: {0}")]
    InvalidRectangle(String),
    #[error("root on the contour near {at}; perturb the rectangle")]
    BoundaryRoot { at: ComplexValue },
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("winding count {winding} does not match {refined} refined roots")]
    CertificationMismatch { winding: usize, refined: usize },
}

pub type Result<T> = std::result::Result<T, QuasiError>;

/// `Q(s) = s^2 + beta + alpha e^{-s tau}` for a single mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalQuasipolynomial {
    beta: f64,
    alpha: f64,
    tau: f64,
}

impl ModalQuasipolynomial {
    pub fn new(beta: f64, alpha: f64, tau: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(QuasiError::InvalidParameters(format!(
                "beta must be finite and positive, got {beta}"
            )));
        }
        if !alpha.is_finite() {
            return Err(QuasiError::InvalidParameters(format!(
                "alpha must be finite, got {alpha}"
            )));
        }
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(QuasiError::InvalidParameters(format!(
                "tau must be finite and nonnegative, got {tau}"
            )));
        }
        Ok(Self { beta, alpha, tau })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn evaluate(&self, s: ComplexValue) -> ComplexValue {
        s * s + self.beta + self.alpha * (-s * self.tau).exp()
    }

    /// `Q'(s) = 2s - alpha tau e^{-s tau}`.
    pub fn evaluate_derivative(&self, s: ComplexValue) -> ComplexValue {
        2.0 * s - self.alpha * self.tau * (-s * self.tau).exp()
    }

    fn evaluate_with_derivative(&self, s: ComplexValue) -> (ComplexValue, ComplexValue) {
        let e = self.alpha * (-s * self.tau).exp();
        (s * s + self.beta + e, 2.0 * s - self.tau * e)
    }

    /// Radius of a disk holding every root with `Re s >= 0`:
    /// there `|s|^2 = |beta + alpha e^{-s tau}| <= beta + |alpha|`.
    pub fn rhp_root_bound(&self) -> f64 {
        (self.beta + self.alpha.abs()).sqrt()
    }

    /// Radius of a disk holding every root with `Re s >= re_min`.
    pub fn root_bound_right_of(&self, re_min: f64) -> f64 {
        (self.beta + self.alpha.abs() * (-re_min * self.tau).exp()).sqrt()
    }
}

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rectangle {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let finite = [re_min, re_max, im_min, im_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || re_min >= re_max || im_min >= im_max {
            return Err(QuasiError::InvalidRectangle(format!(
                "[{re_min}, {re_max}] x [{im_min}, {im_max}]"
            )));
        }
        Ok(Self {
            re_min,
            re_max,
            im_min,
            im_max,
        })
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, s: ComplexValue) -> bool {
        s.re > self.re_min && s.re < self.re_max && s.im > self.im_min && s.im < self.im_max
    }

    /// Grow every side outward by `delta`.
    pub fn expanded(&self, delta: f64) -> Self {
        Self {
            re_min: self.re_min - delta,
            re_max: self.re_max + delta,
            im_min: self.im_min - delta,
            im_max: self.im_max + delta,
        }
    }

    fn with_re(&self, re_min: f64, re_max: f64) -> Self {
        Self {
            re_min,
            re_max,
            ..*self
        }
    }

    /// Corners in counter-clockwise order starting bottom-left.
    fn corners(&self) -> [ComplexValue; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: ComplexValue,
    /// `|Q(value)|`.
    pub residual: f64,
    pub certified: bool,
}

/// Roots of one rectangle after the certification retry policy.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub roots: Vec<Root>,
    pub winding_count: usize,
    /// The rectangle actually used (possibly perturbed outward).
    pub rectangle: Rectangle,
    /// Set when the refined roots never matched the winding count, which
    /// happens on multiple roots.
    pub uncertain_multiplicity: bool,
}

impl RootSet {
    pub fn rightmost(&self) -> Option<&Root> {
        self.roots
            .iter()
            .max_by(|a, b| a.value.re.total_cmp(&b.value.re))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WindingOptions {
    /// Minimum number of boundary samples over the whole perimeter.
    pub boundary_samples: usize,
    pub boundary_tolerance: f64,
    pub max_evaluations: usize,
}

impl Default for WindingOptions {
    fn default() -> Self {
        Self {
            boundary_samples: DEFAULT_BOUNDARY_SAMPLES,
            boundary_tolerance: BOUNDARY_TOLERANCE,
            max_evaluations: MAX_CONTOUR_EVALUATIONS,
        }
    }
}

struct Contour<'a> {
    q: &'a ModalQuasipolynomial,
    tolerance: f64,
    evaluations: usize,
    budget: usize,
}

impl Contour<'_> {
    fn eval(&mut self, s: ComplexValue) -> Result<ComplexValue> {
        self.evaluations += 1;
        if self.evaluations > self.budget {
            return Err(QuasiError::NonConvergence(format!(
                "contour refinement exceeded {} evaluations",
                self.budget
            )));
        }
        let v = self.q.evaluate(s);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(QuasiError::NonConvergence(format!("Q overflowed at {s}")));
        }
        if v.norm() < self.tolerance {
            return Err(QuasiError::BoundaryRoot { at: s });
        }
        Ok(v)
    }

    /// Phase change of `Q` from `a` to `b`, bisecting while a single step
    /// exceeds a quarter turn.
    fn segment(
        &mut self,
        a: ComplexValue,
        fa: ComplexValue,
        b: ComplexValue,
        fb: ComplexValue,
        depth: u32,
    ) -> Result<f64> {
        let step = (fb / fa).arg();
        if step.abs() <= FRAC_PI_2 {
            return Ok(step);
        }
        let mid = (a + b) * 0.5;
        if depth >= MAX_SUBDIVISION_DEPTH || mid == a || mid == b {
            return Err(QuasiError::BoundaryRoot { at: mid });
        }
        let fm = self.eval(mid)?;
        Ok(self.segment(a, fa, mid, fm, depth + 1)? + self.segment(mid, fm, b, fb, depth + 1)?)
    }
}

/// Number of roots strictly inside `rect`, with multiplicity.
pub fn count_roots_in_rectangle(
    q: &ModalQuasipolynomial,
    rect: &Rectangle,
    boundary_samples: usize,
) -> Result<usize> {
    count_roots_with(
        q,
        rect,
        &WindingOptions {
            boundary_samples,
            ..WindingOptions::default()
        },
    )
}

pub fn count_roots_with(
    q: &ModalQuasipolynomial,
    rect: &Rectangle,
    opts: &WindingOptions,
) -> Result<usize> {
    let mut contour = Contour {
        q,
        tolerance: opts.boundary_tolerance,
        evaluations: 0,
        budget: opts.max_evaluations,
    };
    // Phase of alpha e^{-s tau} turns at rate tau along vertical edges.
    let spacing = 0.1 / q.tau.max(1.0);
    let per_edge = (opts.boundary_samples / 4).max(4);
    let corners = rect.corners();
    let mut total = 0.0;
    for e in 0..4 {
        let a = corners[e];
        let b = corners[(e + 1) % 4];
        let len = (b - a).norm();
        let n = per_edge
            .max((len / spacing).ceil() as usize)
            .min(MAX_EDGE_SEGMENTS);
        let mut prev = a;
        let mut fprev = contour.eval(a)?;
        for k in 1..=n {
            let s = if k == n {
                b
            } else {
                a + (b - a) * (k as f64 / n as f64)
            };
            let fs = contour.eval(s)?;
            total += contour.segment(prev, fprev, s, fs, 0)?;
            prev = s;
            fprev = fs;
        }
    }
    let turns = total / (2.0 * PI);
    let count = turns.round();
    if (turns - count).abs() > 0.25 || count < 0.0 {
        return Err(QuasiError::NonConvergence(format!(
            "winding number {turns} is not a nonnegative integer"
        )));
    }
    Ok(count as usize)
}

/// Count roots, growing the rectangle outward by `1e-4 * diameter` (up to
/// five times) whenever a root lies on the contour. Returns the rectangle
/// that was actually used.
pub fn count_roots_perturbed(
    q: &ModalQuasipolynomial,
    rect: &Rectangle,
    boundary_samples: usize,
) -> Result<(usize, Rectangle)> {
    let mut r = *rect;
    let mut attempt = 0;
    loop {
        match count_roots_in_rectangle(q, &r, boundary_samples) {
            Err(QuasiError::BoundaryRoot { .. }) if attempt < PERTURB_RETRIES => {
                r = r.expanded(PERTURB_FRACTION * r.diameter());
                attempt += 1;
            }
            other => return other.map(|c| (c, r)),
        }
    }
}

enum NewtonOutcome {
    Converged(ComplexValue, f64),
    Failed,
}

fn damped_newton(
    q: &ModalQuasipolynomial,
    seed: ComplexValue,
    tolerance: f64,
    fence: &Rectangle,
) -> NewtonOutcome {
    let mut s = seed;
    let mut f = q.evaluate(s);
    for _ in 0..NEWTON_MAX_ITER {
        let r = f.norm();
        if r <= tolerance {
            return NewtonOutcome::Converged(s, r);
        }
        let (_, df) = q.evaluate_with_derivative(s);
        if df.norm() == 0.0 {
            break;
        }
        let step = f / df;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=NEWTON_HALVINGS {
            let trial = s - step * lambda;
            let ft = q.evaluate(trial);
            if ft.norm() < r {
                s = trial;
                f = ft;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted || !fence.contains(s) {
            break;
        }
    }
    let r = f.norm();
    if r <= tolerance {
        NewtonOutcome::Converged(s, r)
    } else {
        NewtonOutcome::Failed
    }
}

/// Seeds from the grid: cells where both `Re Q` and `Im Q` change sign, plus
/// local minima of `|Q|` over grid vertices.
fn grid_seeds(q: &ModalQuasipolynomial, rect: &Rectangle, density: usize) -> Vec<ComplexValue> {
    let cell = rect.width().min(rect.height()) / density as f64;
    let nx = ((rect.width() / cell).ceil() as usize).clamp(density, MAX_GRID_CELLS);
    let ny = ((rect.height() / cell).ceil() as usize).clamp(density, MAX_GRID_CELLS);
    let hx = rect.width() / nx as f64;
    let hy = rect.height() / ny as f64;
    let point = |i: usize, j: usize| {
        Complex64::new(rect.re_min + i as f64 * hx, rect.im_min + j as f64 * hy)
    };
    let stride = nx + 1;
    let values: Vec<ComplexValue> = (0..=ny)
        .flat_map(|j| (0..=nx).map(move |i| (i, j)))
        .map(|(i, j)| q.evaluate(point(i, j)))
        .collect();
    let at = |i: usize, j: usize| values[j * stride + i];

    let mut seeds = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let c = [at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1)];
            let re_change = c.iter().any(|v| v.re <= 0.0) && c.iter().any(|v| v.re >= 0.0);
            let im_change = c.iter().any(|v| v.im <= 0.0) && c.iter().any(|v| v.im >= 0.0);
            if re_change && im_change {
                seeds.push(point(i, j) + Complex64::new(0.5 * hx, 0.5 * hy));
            }
        }
    }
    for j in 1..ny {
        for i in 1..nx {
            let m = at(i, j).norm();
            let is_min = (j - 1..=j + 1)
                .all(|jj| (i - 1..=i + 1).all(|ii| (ii == i && jj == j) || at(ii, jj).norm() > m));
            if is_min {
                seeds.push(point(i, j));
            }
        }
    }
    seeds
}

/// Refined candidate roots in `rect` and whether every seed failed.
fn refine_in(
    q: &ModalQuasipolynomial,
    rect: &Rectangle,
    density: usize,
    tolerance: f64,
) -> (Vec<Root>, bool) {
    let fence = rect.expanded(rect.diameter());
    let seeds = grid_seeds(q, rect, density);
    let mut roots: Vec<Root> = Vec::new();
    let mut any_converged = false;
    for seed in seeds {
        let NewtonOutcome::Converged(value, residual) = damped_newton(q, seed, tolerance, &fence)
        else {
            continue;
        };
        any_converged = true;
        if !rect.contains(value) {
            continue;
        }
        match roots
            .iter_mut()
            .find(|r| (r.value - value).norm() <= CLUSTER_RADIUS)
        {
            Some(existing) if existing.residual > residual => {
                existing.value = value;
                existing.residual = residual;
            }
            Some(_) => {}
            None => roots.push(Root {
                value,
                residual,
                certified: false,
            }),
        }
    }
    roots.sort_by(|a, b| {
        a.value
            .im
            .total_cmp(&b.value.im)
            .then(a.value.re.total_cmp(&b.value.re))
    });
    (roots, !any_converged)
}

/// All roots in `rect`, certified against the winding count.
pub fn find_roots(
    q: &ModalQuasipolynomial,
    rect: &Rectangle,
    grid_density: usize,
    root_tolerance: f64,
) -> Result<Vec<Root>> {
    if grid_density < 16 {
        return Err(QuasiError::InvalidParameters(format!(
            "grid density must be at least 16, got {grid_density}"
        )));
    }
    let winding = count_roots_in_rectangle(q, rect, DEFAULT_BOUNDARY_SAMPLES)?;
    let (mut roots, all_failed) = refine_in(q, rect, grid_density, root_tolerance);
    if roots.len() != winding {
        if all_failed && winding > 0 {
            return Err(QuasiError::NonConvergence(format!(
                "Newton failed from every seed; {winding} roots expected"
            )));
        }
        return Err(QuasiError::CertificationMismatch {
            winding,
            refined: roots.len(),
        });
    }
    for r in &mut roots {
        r.certified = true;
    }
    Ok(roots)
}

/// [`find_roots`] with the retry policy: boundary roots grow the rectangle
/// (up to five times), and a mismatch doubles the grid density (up to three
/// times) before the result is returned flagged `uncertain_multiplicity`.
pub fn find_roots_certified(
    q: &ModalQuasipolynomial,
    rect: &Rectangle,
    grid_density: usize,
    root_tolerance: f64,
) -> Result<RootSet> {
    let mut r = *rect;
    let mut perturbations = 0;
    'rect: loop {
        let mut density = grid_density.max(16);
        for doubling in 0..=DENSITY_DOUBLINGS {
            match find_roots(q, &r, density, root_tolerance) {
                Ok(roots) => {
                    return Ok(RootSet {
                        winding_count: roots.len(),
                        roots,
                        rectangle: r,
                        uncertain_multiplicity: false,
                    })
                }
                Err(QuasiError::BoundaryRoot { .. }) if perturbations < PERTURB_RETRIES => {
                    r = r.expanded(PERTURB_FRACTION * r.diameter());
                    perturbations += 1;
                    continue 'rect;
                }
                Err(QuasiError::CertificationMismatch { winding, .. })
                    if doubling == DENSITY_DOUBLINGS =>
                {
                    let (roots, _) = refine_in(q, &r, density, root_tolerance);
                    return Ok(RootSet {
                        roots,
                        winding_count: winding,
                        rectangle: r,
                        uncertain_multiplicity: true,
                    });
                }
                Err(QuasiError::CertificationMismatch { .. })
                | Err(QuasiError::NonConvergence(_))
                    if doubling < DENSITY_DOUBLINGS =>
                {
                    density *= 2;
                }
                Err(e) => return Err(e),
            }
        }
        unreachable!("the last doubling always returns");
    }
}

/// Largest real part over all roots of `q`, to within `abscissa_tolerance`.
///
/// The right half-plane box from [`ModalQuasipolynomial::rhp_root_bound`] is
/// checked first; if empty, vertical strips are swept leftward until one
/// holds a root. That strip is bisected on the real axis, the rightmost root
/// is refined with Newton, and the bracket `[a + tol, right edge]` is checked
/// to be root-free.
pub fn spectral_abscissa(q: &ModalQuasipolynomial, abscissa_tolerance: f64) -> Result<f64> {
    if q.tau == 0.0 || q.alpha == 0.0 {
        let c = if q.tau == 0.0 {
            q.beta + q.alpha
        } else {
            q.beta
        };
        return Ok(if c >= 0.0 { 0.0 } else { (-c).sqrt() });
    }
    let samples = DEFAULT_BOUNDARY_SAMPLES;
    let r0 = q.rhp_root_bound();
    let pad = 0.05 * r0 + 0.1;
    let rhp = Rectangle::new(0.0, r0 + pad, -(r0 + pad), r0 + pad)?;
    let (count, used) = count_roots_perturbed(q, &rhp, samples)?;
    if count > 0 {
        return rightmost_in_strip(q, &used, abscissa_tolerance);
    }
    let mut right = used.re_min;
    let mut width = 0.5;
    for _ in 0..MAX_SWEEP_STRIPS {
        let left = right - width;
        let rb = q.root_bound_right_of(left);
        let pad = 0.05 * rb + 0.1;
        let strip = Rectangle::new(left, right, -(rb + pad), rb + pad)?;
        let (count, used) = count_roots_perturbed(q, &strip, samples)?;
        if count > 0 {
            return rightmost_in_strip(q, &used, abscissa_tolerance);
        }
        right = used.re_min;
        width = (width * 1.5).min(4.0);
    }
    Err(QuasiError::NonConvergence(format!(
        "no root found right of Re s = {right}"
    )))
}

fn rightmost_in_strip(q: &ModalQuasipolynomial, strip: &Rectangle, tol: f64) -> Result<f64> {
    let samples = DEFAULT_BOUNDARY_SAMPLES;
    let mut lo = strip.re_min;
    let mut hi = strip.re_max;
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        let (count, used) = count_roots_perturbed(q, &strip.with_re(mid, hi), samples)?;
        if count > 0 {
            lo = used.re_min;
        } else {
            hi = used.re_min;
        }
    }
    let set = find_roots_certified(
        q,
        &strip.with_re(lo, hi),
        DEFAULT_GRID_DENSITY,
        ROOT_TOLERANCE,
    )?;
    let a = set
        .rightmost()
        .map(|r| r.value.re)
        .ok_or_else(|| QuasiError::NonConvergence("bracketed strip produced no root".into()))?;
    let right = set.rectangle.re_max;
    if a + tol < right {
        match count_roots_in_rectangle(q, &strip.with_re(a + tol, right), samples) {
            Ok(0) | Err(QuasiError::BoundaryRoot { .. }) => {}
            Ok(n) => {
                return Err(QuasiError::NonConvergence(format!(
                    "{n} roots right of the refined abscissa {a}"
                )))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> ComplexValue {
        Complex64::new(re, im)
    }

    fn q(beta: f64, alpha: f64, tau: f64) -> ModalQuasipolynomial {
        ModalQuasipolynomial::new(beta, alpha, tau).unwrap()
    }

    fn rect(a: f64, b: f64, c: f64, d: f64) -> Rectangle {
        Rectangle::new(a, b, c, d).unwrap()
    }

    const PI2: f64 = PI * PI;

    #[test]
    fn rejects_invalid_parameters() {
        assert!(ModalQuasipolynomial::new(0.0, 1.0, 1.0).is_err());
        assert!(ModalQuasipolynomial::new(1.0, f64::NAN, 1.0).is_err());
        assert!(ModalQuasipolynomial::new(1.0, 1.0, -0.1).is_err());
        assert!(Rectangle::new(1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn evaluate_examples() {
        assert!(q(PI2, -PI2, 0.7).evaluate(c(0.0, 0.0)).norm() < 1e-15);
        assert!(q(4.0, 1.0, 0.0).evaluate(c(0.0, 5f64.sqrt())).norm() < 1e-14);
        let v = q(PI2, 5.0, 1.5).evaluate(c(1.0, 0.0));
        assert_relative_eq!(v.re, 1.0 + PI2 + 5.0 * (-1.5f64).exp(), epsilon = 1e-14);
        assert_relative_eq!(v.re, 11.985, epsilon = 1e-3);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn derivative_examples() {
        let p = q(PI2, 5.0, 1.5);
        assert_relative_eq!(p.evaluate_derivative(c(0.0, 0.0)).re, -7.5);
        assert_eq!(
            q(4.0, 1.0, 0.0).evaluate_derivative(c(3.0, 0.0)),
            c(6.0, 0.0)
        );
        let s = c(1.0, 1.0);
        let h = 1e-6;
        let fd = (p.evaluate(s + h) - p.evaluate(s - h)) / (2.0 * h);
        let d = p.evaluate_derivative(s);
        assert!((fd - d).norm() / d.norm() <= 1e-8);
    }

    #[test]
    fn bound_examples() {
        assert_relative_eq!(q(PI2, 5.0, 1.5).rhp_root_bound(), 3.8561, epsilon = 1e-4);
        assert_eq!(q(1.0, 0.0, 0.0).rhp_root_bound(), 1.0);
        assert_relative_eq!(q(PI2, -PI2, 1.0).rhp_root_bound(), 4.4429, epsilon = 1e-4);
    }

    #[test]
    fn counts_delay_free_root() {
        assert_eq!(
            count_roots_in_rectangle(&q(4.0, 1.0, 0.0), &rect(-1.0, 1.0, 1.0, 3.0), 64).unwrap(),
            1
        );
    }

    #[test]
    fn counts_case_one_rhp_empty() {
        let b = 3.86;
        let n = count_roots_in_rectangle(&q(PI2, 5.0, 1.5), &rect(0.0, b, -b, b), 256).unwrap();
        assert_eq!(n, 0);
    }

    #[test]
    fn counts_resonant_rhp_nonempty() {
        let p = q(PI2, 5.0, 1.0);
        let b = p.rhp_root_bound() + 0.2;
        let n = count_roots_in_rectangle(&p, &rect(0.0, b, -b, b), 256).unwrap();
        assert!(n >= 1);
        let roots = find_roots(&p, &rect(0.0, b, -b, b), 32, ROOT_TOLERANCE).unwrap();
        assert_eq!(roots.len(), n);
    }

    #[test]
    fn boundary_root_is_reported() {
        let err = count_roots_in_rectangle(&q(4.0, 1.0, 0.0), &rect(0.0, 1.0, -3.0, 3.0), 64)
            .unwrap_err();
        assert!(matches!(err, QuasiError::BoundaryRoot { .. }));
        let (n, used) =
            count_roots_perturbed(&q(4.0, 1.0, 0.0), &rect(0.0, 1.0, -3.0, 3.0), 64).unwrap();
        assert_eq!(n, 2);
        assert!(used.re_min < 0.0);
    }

    #[test]
    fn tiny_budget_is_nonconvergence() {
        let opts = WindingOptions {
            max_evaluations: 10,
            ..WindingOptions::default()
        };
        let err =
            count_roots_with(&q(4.0, 1.0, 0.0), &rect(-1.0, 1.0, -3.0, 3.0), &opts).unwrap_err();
        assert!(matches!(err, QuasiError::NonConvergence(_)));
    }

    #[test]
    fn finds_delay_free_pair() {
        let roots = find_roots(&q(4.0, 1.0, 0.0), &rect(-1.0, 1.0, -3.0, 3.0), 16, 1e-12).unwrap();
        assert_eq!(roots.len(), 2);
        let w = 5f64.sqrt();
        assert!((roots[0].value - c(0.0, -w)).norm() < 1e-10);
        assert!((roots[1].value - c(0.0, w)).norm() < 1e-10);
        assert!(roots.iter().all(|r| r.certified && r.residual <= 1e-12));
    }

    #[test]
    fn finds_zero_root() {
        let roots = find_roots(
            &q(PI2, -PI2, 2.0),
            &rect(-0.5, 0.5, -0.5, 0.5),
            16,
            ROOT_TOLERANCE,
        )
        .unwrap();
        assert!(roots.iter().any(|r| r.value.norm() < 1e-9));
    }

    #[test]
    fn low_density_rejected() {
        assert!(matches!(
            find_roots(&q(4.0, 1.0, 0.0), &rect(-1.0, 1.0, -3.0, 3.0), 8, 1e-10),
            Err(QuasiError::InvalidParameters(_))
        ));
    }

    /// Brute-force oracle: local minima of |Q| on a 2000 x 2000 grid, each
    /// polished by derivative-free zooming grid search.
    fn brute_force_roots(p: &ModalQuasipolynomial, r: &Rectangle) -> Vec<ComplexValue> {
        let n = 2000;
        let hx = r.width() / n as f64;
        let hy = r.height() / n as f64;
        let pt = |i: usize, j: usize| c(r.re_min + i as f64 * hx, r.im_min + j as f64 * hy);
        let mag: Vec<f64> = (0..=n)
            .flat_map(|j| (0..=n).map(move |i| (i, j)))
            .map(|(i, j)| p.evaluate(pt(i, j)).norm())
            .collect();
        let at = |i: usize, j: usize| mag[j * (n + 1) + i];
        let mut found = Vec::new();
        for j in 1..n {
            for i in 1..n {
                let m = at(i, j);
                if m > 0.5 {
                    continue;
                }
                let is_min = (j - 1..=j + 1)
                    .all(|jj| (i - 1..=i + 1).all(|ii| (ii == i && jj == j) || at(ii, jj) > m));
                if is_min {
                    let mut centre = pt(i, j);
                    let mut h = hx.max(hy);
                    for _ in 0..12 {
                        let mut best = (p.evaluate(centre).norm(), centre);
                        for a in -10..=10 {
                            for b in -10..=10 {
                                let s = centre + c(a as f64 * h / 10.0, b as f64 * h / 10.0);
                                let v = p.evaluate(s).norm();
                                if v < best.0 {
                                    best = (v, s);
                                }
                            }
                        }
                        centre = best.1;
                        h /= 5.0;
                    }
                    found.push(centre);
                }
            }
        }
        found
    }

    #[test]
    fn matches_brute_force_oracle() {
        let p = q(PI2, 3.0, 1.5);
        let r = rect(-2.0, 0.0, 0.0, 6.0);
        let oracle = brute_force_roots(&p, &r);
        let roots = find_roots(&p, &r, 32, ROOT_TOLERANCE).unwrap();
        assert_eq!(oracle.len(), roots.len());
        assert_eq!(roots.len(), 2);
        for o in &oracle {
            assert!(
                roots.iter().any(|x| (x.value - o).norm() <= 1e-6),
                "missing {o}"
            );
        }
    }

    #[test]
    fn spectral_abscissa_examples() {
        let a = spectral_abscissa(&q(4.0, 1.0, 0.0), ABSCISSA_TOLERANCE).unwrap();
        assert_eq!(a, 0.0);
        let a1 = spectral_abscissa(&q(PI2, 5.0, 1.5), ABSCISSA_TOLERANCE).unwrap();
        let a2 = spectral_abscissa(&q(PI2, 3.0, 1.5), ABSCISSA_TOLERANCE).unwrap();
        let a3 = spectral_abscissa(&q(PI2, -1.7766, 2.5), ABSCISSA_TOLERANCE).unwrap();
        assert!(a2 < a3 && a3 < a1 && a1 < 0.0, "{a1} {a2} {a3}");
    }

    #[test]
    fn abscissa_of_unstable_and_real_roots() {
        // beta + alpha < 0 makes a positive real root.
        let p = q(1.0, -4.0, 0.5);
        let a = spectral_abscissa(&p, ABSCISSA_TOLERANCE).unwrap();
        assert!(a > 0.0);
        assert!(p.evaluate(c(a, 0.0)).norm() < 1e-8);
        let resonant = spectral_abscissa(&q(PI2, 5.0, 1.0), ABSCISSA_TOLERANCE).unwrap();
        assert!(resonant > 0.3);
    }

    #[test]
    fn abscissa_far_left() {
        // Strong damping-like configuration: rightmost root well inside the LHP.
        let p = q(PI2, 3.0, 1.5);
        let a = spectral_abscissa(&p, ABSCISSA_TOLERANCE).unwrap();
        let b = p.rhp_root_bound();
        let strip = rect(a + 1e-6, b + 1.0, -b - 1.0, b + 1.0);
        assert_eq!(count_roots_in_rectangle(&p, &strip, 256).unwrap(), 0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn quasi() -> impl Strategy<Value = ModalQuasipolynomial> {
            (0.1f64..60.0, -60.0f64..60.0, 0.05f64..3.0).prop_map(|(b, a, t)| q(b, a, t))
        }

        fn window() -> impl Strategy<Value = Rectangle> {
            (-2.0f64..1.0, 0.5f64..3.0, -8.0f64..8.0, 0.5f64..6.0)
                .prop_map(|(x, w, y, h)| rect(x, x + w, y, y + h))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn roots_come_in_conjugate_pairs(p in quasi(), r in window()) {
                let set = find_roots_certified(&p, &r, DEFAULT_GRID_DENSITY, ROOT_TOLERANCE).unwrap();
                for root in &set.roots {
                    prop_assert!(p.evaluate(root.value.conj()).norm() <= ROOT_TOLERANCE);
                }
            }

            #[test]
            fn winding_matches_refined_roots(p in quasi(), r in window()) {
                match find_roots(&p, &r, DEFAULT_GRID_DENSITY, ROOT_TOLERANCE) {
                    Ok(roots) => {
                        let n = count_roots_in_rectangle(&p, &r, DEFAULT_BOUNDARY_SAMPLES).unwrap();
                        prop_assert_eq!(roots.len(), n);
                    }
                    Err(QuasiError::BoundaryRoot { .. }) => {}
                    Err(e) => {
                        // A single density pass may miss a seed; the certified
                        // search must then agree.
                        let set = find_roots_certified(&p, &r, DEFAULT_GRID_DENSITY, ROOT_TOLERANCE)
                            .map_err(|_| TestCaseError::fail(format!("{e}")))?;
                        prop_assert!(!set.uncertain_multiplicity);
                        prop_assert_eq!(set.roots.len(), set.winding_count);
                    }
                }
            }

            #[test]
            fn rhp_roots_respect_bound(p in quasi()) {
                let b = p.rhp_root_bound();
                let box_ = rect(-0.5, b + 1.0, -b - 1.0, b + 1.0);
                let set = find_roots_certified(&p, &box_, DEFAULT_GRID_DENSITY, ROOT_TOLERANCE).unwrap();
                for root in set.roots.iter().filter(|r| r.value.re >= 0.0) {
                    prop_assert!(root.value.norm() <= b + 1e-9);
                }
            }

            #[test]
            fn delay_free_reduction(beta in 0.1f64..60.0, alpha in -50.0f64..50.0) {
                prop_assume!(beta + alpha > 0.05);
                let p = q(beta, alpha, 0.0);
                let w = (beta + alpha).sqrt();
                let box_ = rect(-1.0, 1.0, -w - 1.0, w + 1.0);
                let roots = find_roots(&p, &box_, DEFAULT_GRID_DENSITY, ROOT_TOLERANCE).unwrap();
                prop_assert_eq!(roots.len(), 2);
                for r in &roots {
                    prop_assert!(r.value.re.abs() <= 1e-9);
                    prop_assert!((r.value.im.abs() - w).abs() <= 1e-9 * w.max(1.0));
                }
                let a = spectral_abscissa(&p, ABSCISSA_TOLERANCE).unwrap();
                prop_assert!(a.abs() <= ABSCISSA_TOLERANCE);
            }

            #[test]
            fn derivative_matches_central_difference(
                p in quasi(),
                re in -3.0f64..3.0,
                im in -10.0f64..10.0,
            ) {
                let s = c(re, im);
                let h = 1e-6;
                let fd = (p.evaluate(s + h) - p.evaluate(s - h)) / (2.0 * h);
                let exact = p.evaluate_derivative(s);
                prop_assert!((fd - exact).norm() <= 1e-6 * exact.norm().max(1.0));
            }
        }
    }
}
