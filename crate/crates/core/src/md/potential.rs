//! Smoothed Lennard-Jones pair potential in reduced units.
//!
//! `U(r) = 4 (r^-12 - r^-6) + C0 + C2 r^2 + C4 r^4 + C6 r^6 + C8 r^8` for
//! `r <= 3.5`, zero beyond; the polynomial makes `U` and its first four
//! derivatives vanish at the cutoff.

use crate::{Error, Result};

pub const CUTOFF: f64 = 3.5;
pub const C0: f64 = 7.591_016_534_387_729_7e-2;
pub const C2: f64 = -1.858_154_796_630_728_4e-2;
pub const C4: f64 = 1.819_594_335_725_356_1e-3;
pub const C6: f64 = -8.249_874_769_676_778_6e-5;
pub const C8: f64 = 1.442_811_390_098_910_1e-6;
/// Pair distance below which a configuration is flagged as overlapping.
pub const OVERLAP_WARNING: f64 = 0.5;

/// `(U(r), -dU/dr)`; both zero beyond the cutoff.
pub fn smoothed_lj_pair(r: f64) -> Result<(f64, f64)> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("pair distance must be positive, got {r}")));
    }
    if r > CUTOFF {
        return Ok((0.0, 0.0));
    }
    Ok((energy_r2(r * r), force_over_r(r * r) * r))
}

/// `U` as a function of `r^2`, inside the cutoff.
#[inline]
pub fn energy_r2(r2: f64) -> f64 {
    let inv6 = 1.0 / (r2 * r2 * r2);
    4.0 * inv6 * (inv6 - 1.0) + C0 + r2 * (C2 + r2 * (C4 + r2 * (C6 + r2 * C8)))
}

/// `-U'(r) / r` as a function of `r^2`, inside the cutoff.
#[inline]
pub fn force_over_r(r2: f64) -> f64 {
    let inv2 = 1.0 / r2;
    let inv6 = inv2 * inv2 * inv2;
    24.0 * inv6 * inv2 * (2.0 * inv6 - 1.0) - (2.0 * C2 + r2 * (4.0 * C4 + r2 * (6.0 * C6 + r2 * 8.0 * C8)))
}

/// `d^k U / dr^k` of the inner expression (no cutoff applied), `k <= 4`.
pub fn derivative(r: f64, k: u32) -> f64 {
    // d^k r^n = n (n-1) ... (n-k+1) r^(n-k)
    let falling = |n: i32| -> f64 { (0..k as i32).map(|m| (n - m) as f64).product() };
    let term = |c: f64, n: i32| c * falling(n) * r.powi(n - k as i32);
    let lj = term(4.0, -12) - term(4.0, -6);
    let poly = if k == 0 { C0 } else { 0.0 } + term(C2, 2) + term(C4, 4) + term(C6, 6) + term(C8, 8);
    lj + poly
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vanishes_at_cutoff() {
        for k in 0..=4 {
            assert!(derivative(CUTOFF, k).abs() < 1e-10, "order {k}: {}", derivative(CUTOFF, k));
        }
        assert_eq!(smoothed_lj_pair(3.6).unwrap(), (0.0, 0.0));
        let (u, f) = smoothed_lj_pair(CUTOFF).unwrap();
        assert!(u.abs() < 1e-12 && f.abs() < 1e-12);
    }

    #[test]
    fn value_at_one_is_polynomial_sum() {
        let (u, _) = smoothed_lj_pair(1.0).unwrap();
        assert_relative_eq!(u, C0 + C2 + C4 + C6 + C8, max_relative = 1e-14);
        assert_relative_eq!(u, 5.9067e-2, max_relative = 1e-4);
    }

    #[test]
    fn force_matches_central_difference() {
        for r in [0.9, 1.5, 3.0] {
            let h = 1e-4;
            let u = |x: f64| energy_r2(x * x);
            let fd = -(u(r - 2.0 * h) - 8.0 * u(r - h) + 8.0 * u(r + h) - u(r + 2.0 * h)) / (12.0 * h);
            let (_, f) = smoothed_lj_pair(r).unwrap();
            assert_relative_eq!(f, fd, max_relative = 1e-8);
            assert_relative_eq!(f, -derivative(r, 1), max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_non_positive_distance() {
        assert!(matches!(smoothed_lj_pair(0.0), Err(Error::Domain(_))));
        assert!(matches!(smoothed_lj_pair(-1.0), Err(Error::Domain(_))));
        assert!(smoothed_lj_pair(f64::NAN).is_err());
    }
}
