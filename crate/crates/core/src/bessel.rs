//! Bessel functions of the first kind of integer order.
//!
//! Evaluated with Miller's backward recurrence normalised by
//! `J_0(x) + 2 sum_k J_2k(x) = 1`, which is stable for every order and
//! argument in the supported range.

use crate::{lit, Real};

/// Largest supported order.
pub const MAX_ORDER: i64 = 64;
/// Largest supported `|x|`.
pub const MAX_ARGUMENT: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("bessel J_{order}({x}) outside the supported domain (0 <= n <= {MAX_ORDER}, |x| <= {MAX_ARGUMENT})")]
pub struct BesselDomainError {
    pub order: i64,
    pub x: f64,
}

/// `J_n(x)` for `0 <= n <= 64`, `|x| <= 50`.
pub fn bessel_j<T: Real>(n: i64, x: T) -> Result<T, BesselDomainError> {
    let xf = crate::to_f64(x);
    if !(0..=MAX_ORDER).contains(&n) || !xf.is_finite() || xf.abs() > MAX_ARGUMENT {
        return Err(BesselDomainError { order: n, x: xf });
    }
    Ok(miller(n as usize, x))
}

/// `J_n(x)` for any integer order, using `J_{-n} = (-1)^n J_n`.
pub fn bessel_j_signed<T: Real>(n: i64, x: T) -> Result<T, BesselDomainError> {
    let v = bessel_j(n.abs(), x)?;
    Ok(if n < 0 && n % 2 != 0 { -v } else { v })
}

fn miller<T: Real>(n: usize, x: T) -> T {
    let zero = T::zero();
    if x == zero {
        return if n == 0 { T::one() } else { zero };
    }
    let ax = x.abs();
    let scale = crate::to_f64(ax).ceil() as usize;
    let top = n.max(scale);
    // Even starting index comfortably above both the order and the argument.
    let start = 2 * ((top + 24 + ((40 * top.max(1)) as f64).sqrt() as usize) / 2);

    let two = lit::<T>(2.0);
    let big = lit::<T>(1e10);
    let small = lit::<T>(1e-10);

    let mut above = zero;
    let mut current = lit::<T>(1e-30);
    let mut norm = zero;
    let mut at_n = zero;
    for k in (1..=start).rev() {
        let below = two * lit::<T>(k as f64) / ax * current - above;
        above = current;
        current = below;
        // `current` now holds the unnormalised J_{k-1}.
        let idx = k - 1;
        if idx == n {
            at_n = current;
        }
        if idx % 2 == 0 && idx > 0 {
            norm += two * current;
        }
        if current.abs() > big {
            current *= small;
            above *= small;
            norm *= small;
            at_n *= small;
        }
    }
    norm += current;
    let value = at_n / norm;
    if x < zero && n % 2 == 1 {
        -value
    } else {
        value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// `J_n(x) = (1/2pi) int_0^{2pi} cos(n t - x sin t) dt`, trapezoid rule
    /// (spectrally accurate for periodic integrands).
    fn quadrature_oracle(n: i64, x: f64) -> f64 {
        let m = 4096;
        let h = 2.0 * PI / m as f64;
        (0..m)
            .map(|j| {
                let t = j as f64 * h;
                (n as f64 * t - x * t.sin()).cos()
            })
            .sum::<f64>()
            / m as f64
    }

    fn series_oracle(n: i64, x: f64, terms: usize) -> f64 {
        let mut sum = 0.0;
        for m in 0..terms {
            let mut term = (x / 2.0).powi((2 * m) as i32 + n as i32);
            for f in 1..=m {
                term /= f as f64;
            }
            for f in 1..=(m + n as usize) {
                term /= f as f64;
            }
            if m % 2 == 1 {
                term = -term;
            }
            sum += term;
        }
        sum
    }

    #[test]
    fn trivial_values() {
        assert_eq!(bessel_j(0, 0.0_f64).unwrap(), 1.0);
        assert_eq!(bessel_j(1, 0.0_f64).unwrap(), 0.0);
    }

    #[test]
    fn j1_at_one_matches_series() {
        let oracle = series_oracle(1, 1.0, 30);
        assert!((oracle - 0.4400505857).abs() < 1e-9);
        assert!((bessel_j(1, 1.0_f64).unwrap() - oracle).abs() < 1e-13);
    }

    #[test]
    fn matches_integral_representation_on_grid() {
        let mut worst: f64 = 0.0;
        for n in [0, 1, 2, 3, 5, 8, 13, 21, 34, 50, 64] {
            for &x in &[-50.0, -17.3, -1.0, 1e-3, 0.25, 0.5, 1.0, 2.4048, 7.0, 12.5, 30.0, 49.9, 50.0] {
                let err = (bessel_j(n, x).unwrap() - quadrature_oracle(n, x)).abs();
                worst = worst.max(err);
            }
        }
        assert!(worst <= 1e-12, "worst abs error {worst:e}");
    }

    #[test]
    fn negative_order_reflection() {
        for n in 1..8 {
            let a = bessel_j_signed(-n, 1.3_f64).unwrap();
            let b = quadrature_oracle(-n, 1.3);
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn single_precision_agrees() {
        let a = bessel_j(3, 4.0_f32).unwrap() as f64;
        assert!((a - quadrature_oracle(3, 4.0)).abs() < 1e-5);
    }

    #[test]
    fn domain_errors() {
        assert!(bessel_j(65, 1.0_f64).is_err());
        assert!(bessel_j(-1, 1.0_f64).is_err());
        assert!(bessel_j(2, 50.5_f64).is_err());
        assert!(bessel_j(2, f64::NAN).is_err());
    }
}
