//! Bracketed root finding for monotone scalar functions.

use crate::{lit, Real};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RootError {
    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("non-finite function value at {at}")]
    NonFinite { at: f64 },
}

/// Grows `hi` geometrically from `lo` until `f` changes sign relative to
/// `f(lo)`, giving up past `limit`.
pub fn expand_bracket<T: Real>(f: impl Fn(T) -> T, lo: T, first_hi: T, limit: T) -> Result<(T, T), RootError> {
    let f_lo = f(lo);
    let mut hi = first_hi;
    let mut prev = lo;
    loop {
        let f_hi = f(hi);
        if !f_hi.is_finite() {
            return Err(RootError::NonFinite { at: crate::to_f64(hi) });
        }
        if (f_hi <= T::zero()) != (f_lo <= T::zero()) {
            return Ok((prev, hi));
        }
        if hi >= limit {
            return Err(RootError::NoSignChange { lo: crate::to_f64(lo), hi: crate::to_f64(hi) });
        }
        prev = hi;
        hi = (hi * lit(2.0)).min(limit);
    }
}

/// Bisects `[lo, hi]` down to `width`, then polishes with Newton steps
/// (kept only while they stay inside the final bracket and reduce `|f|`).
pub fn bisect_newton<T: Real>(
    f: impl Fn(T) -> T,
    df: impl Fn(T) -> T,
    mut lo: T,
    mut hi: T,
    width: T,
) -> Result<T, RootError> {
    let zero = T::zero();
    let half = lit::<T>(0.5);
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(RootError::NonFinite { at: crate::to_f64(lo) });
    }
    if f_lo == zero {
        return Ok(lo);
    }
    if f_hi == zero {
        return Ok(hi);
    }
    if (f_lo < zero) == (f_hi < zero) {
        return Err(RootError::NoSignChange { lo: crate::to_f64(lo), hi: crate::to_f64(hi) });
    }
    while hi - lo > width {
        let mid = (lo + hi) * half;
        let f_mid = f(mid);
        if f_mid == zero {
            return Ok(mid);
        }
        if (f_mid < zero) == (f_lo < zero) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let mut x = (lo + hi) * half;
    let mut fx = f(x);
    for _ in 0..3 {
        let d = df(x);
        if d == zero || !d.is_finite() {
            break;
        }
        let next = x - fx / d;
        let f_next = f(next);
        if next < lo || next > hi || f_next.abs() >= fx.abs() {
            break;
        }
        x = next;
        fx = f_next;
    }
    Ok(x)
}
