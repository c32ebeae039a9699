//! Energy decay against the spectral abscissa on a horizon long enough for
//! the subdominant roots to die out.

use std::f64::consts::PI;

use delaystab::fdtd::{self, Discretization, PhysicalParams};
use delaystab::quasipoly::{spectral_abscissa, ABSCISSA_TOLERANCE};
use delaystab::{ModalQuasipolynomial, SimConfig};

fn closure(tau: f64, alpha: f64) -> (f64, f64) {
    let cfg = SimConfig::physical(
        PhysicalParams {
            l: 10.0,
            c: 1.118,
            ell: 1.0,
            tau,
            alpha,
        },
        Discretization::new(0.05, 0.005, 400.0),
    )
    .unwrap();
    let out = fdtd::run(
        &cfg,
        &cfg.sine_mode(1, 1.0),
        &vec![0.0; cfg.cells + 1],
        &[],
        1,
    )
    .unwrap();
    let fit = out
        .energy
        .decay_fit((2.0 * cfg.tau_eff, cfg.t_final))
        .unwrap();
    let a = spectral_abscissa(
        &ModalQuasipolynomial::new(PI * PI, alpha, tau).unwrap(),
        ABSCISSA_TOLERANCE,
    )
    .unwrap();
    (fit.rate, 2.0 * a / cfg.time_scale)
}

#[test]
fn long_horizon_rates_match_abscissa() {
    for (tau, alpha) in [(1.5, 5.0), (1.5, 3.0), (2.5, -1.7766)] {
        let (fitted, expected) = closure(tau, alpha);
        assert!(fitted < 0.0);
        assert!(
            (fitted - expected).abs() <= 0.15 * expected.abs(),
            "tau={tau} alpha={alpha}: {fitted} vs {expected}"
        );
    }
}
