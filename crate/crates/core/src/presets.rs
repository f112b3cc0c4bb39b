//! Named example instances shipped with the default config.

use num_complex::Complex64;

use crate::spectral::GridSpec;
use crate::symbol::{CoefficientTrack, NonAutonomousSymbol, Term};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `a(t, ξ) = ξ²` on `[0, 1]`.
pub fn heat_symbol() -> NonAutonomousSymbol {
    NonAutonomousSymbol::new(1, 2, 1.0, vec![Term { alpha: vec![2], track: CoefficientTrack::Constant(c(-1.0, 0.0)) }])
        .expect("valid preset")
}

/// `a(t, ξ) = a₄(t) ξ⁴ − a₂(t) ξ²` with `a₄ = 0.9 + 0.1 cos 2πt` and
/// `a₂ = sin(2πt)/2`, both sampled on eight pieces of `[0, 1]`.
pub fn quartic_symbol() -> NonAutonomousSymbol {
    use std::f64::consts::TAU;
    let t = 1.0;
    NonAutonomousSymbol::new(
        1,
        4,
        t,
        vec![
            Term { alpha: vec![4], track: CoefficientTrack::sample(|s| c(0.9 + 0.1 * (TAU * s).cos(), 0.0), t, 8) },
            Term { alpha: vec![2], track: CoefficientTrack::sample(|s| c(0.5 * (TAU * s).sin(), 0.0), t, 8) },
        ],
    )
    .expect("valid preset")
}

pub fn line_grid() -> GridSpec {
    GridSpec::new(1, 20.0, 1024).expect("valid preset")
}
