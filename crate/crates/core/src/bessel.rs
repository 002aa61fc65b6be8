//! Bessel function of the first kind, order zero.
//!
//! Power series for small arguments, Hankel asymptotic expansion beyond.
//! Absolute error stays below 1e-10 over |x| <= 50, which covers every lag
//! the Doppler autocovariance J0(2 pi k Ts B_D) is evaluated at.

use std::f64::consts::{FRAC_PI_4, PI};

const SERIES_CUTOFF: f64 = 12.0;

/// J0(x). Even in x; J0(0) = 1.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_CUTOFF {
        j0_series(x)
    } else {
        j0_asymptotic(x)
    }
}

/// Ascending series J0(x) = sum_k (-1)^k (x^2/4)^k / (k!)^2.
fn j0_series(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= -q / ((k * k) as f64);
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

/// Hankel expansion: J0(x) ~ sqrt(2/(pi x)) [P(x) cos(x - pi/4) - Q(x) sin(x - pi/4)]
/// with P, Q summed until the terms stop decreasing (optimal truncation).
fn j0_asymptotic(x: f64) -> f64 {
    let inv = 1.0 / (8.0 * x);
    // |t_m| = prod_{j=1..m} (2j-1)^2 / (m! (8x)^m); P takes even m with sign
    // (-1)^(m/2), Q odd m with sign (-1)^((m-1)/2) on -|t_m|. Both collapse
    // to the quadrant pattern (-1)^((m+1)/2). Truncated at the smallest term.
    let mut p = 1.0;
    let mut q = 0.0;
    let mut mag = 1.0;
    let mut prev_mag = f64::INFINITY;
    for m in 1..40u32 {
        let odd = (2 * m - 1) as f64;
        mag *= odd * odd * inv / m as f64;
        if mag >= prev_mag {
            break;
        }
        prev_mag = mag;
        let term = if ((m + 1) / 2) % 2 == 0 { mag } else { -mag };
        if m % 2 == 0 {
            p += term;
        } else {
            q += term;
        }
    }
    let chi = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}
