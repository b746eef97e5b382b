//! Phase unwrapping.

use std::f64::consts::{PI, TAU};

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_to_pi(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Wrap an orientation angle (defined mod pi) to `(-pi/2, pi/2]`.
pub fn wrap_to_half_pi(x: f64) -> f64 {
    let w = (x + PI / 2.0).rem_euclid(PI) - PI / 2.0;
    if w == -PI / 2.0 {
        PI / 2.0
    } else {
        w
    }
}

/// Nearest-branch continuation of a wrapped phase trace. The first sample is
/// kept on the principal branch; every later sample is moved by a multiple
/// of 2 pi to land within pi of its predecessor.
pub fn unwrap(wrapped: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(wrapped.len());
    let mut prev: Option<f64> = None;
    for &p in wrapped {
        let v = match prev {
            None => wrap_to_pi(p),
            Some(q) => q + wrap_to_pi(p - q),
        };
        out.push(v);
        prev = Some(v);
    }
    out
}
