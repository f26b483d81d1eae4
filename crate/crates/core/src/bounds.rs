//! Error bounds for adiabatic evolution through a sequence of crossings.
//!
//! Reported bound values use the convention `C = 1` for the unspecified
//! constants. Sequences are indexed from `1` in the order the crossings are
//! met when approaching the accumulation point.

use std::fmt::Write as _;

use num_traits::Num;
use serde::Serialize;

use crate::format::sig15;
use crate::spectral::CrossingLedger;
use crate::{lit, to_f64, Real};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },
    #[error("eps = {eps} too large: even K = 1 violates the K(eps) criterion")]
    EpsTooLarge { eps: f64 },
    #[error("empty crossing sequence")]
    Empty,
}

fn domain(op: &'static str, msg: impl Into<String>) -> BoundsError {
    BoundsError::Domain { op, msg: msg.into() }
}

/// `C (eps|u0 - t|/g_t^2 + eps|u1 - s|/g_s^2 + eps/g_t + eps/g_s + |s - t|)`.
#[allow(clippy::too_many_arguments)]
pub fn lemma21_bound<T: Real>(eps: T, c: T, u0: T, t: T, s: T, u1: T, g_t: T, g_s: T) -> Result<T, BoundsError> {
    if !(u0 <= t && t < s && s <= u1) {
        return Err(domain("lemma21_bound", format!("need u0 <= t < s <= u1, got {u0}, {t}, {s}, {u1}")));
    }
    if !(g_t > T::zero() && g_s > T::zero()) {
        return Err(domain("lemma21_bound", "gaps must be positive"));
    }
    if !(c > T::zero()) || eps < T::zero() {
        return Err(domain("lemma21_bound", "need C > 0 and eps >= 0"));
    }
    Ok(c * (eps * (u0 - t).abs() / (g_t * g_t)
        + eps * (u1 - s).abs() / (g_s * g_s)
        + eps / g_t
        + eps / g_s
        + (s - t).abs()))
}

/// `C eps^{1/(1+2 alpha)}`: the single startup-crossing estimate.
pub fn startup_bound<T: Real>(eps: T, alpha: T, c: T) -> T {
    c * eps.powf(T::one() / (T::one() + alpha + alpha))
}

/// `tau = max(Delta/G^2, Delta^alpha/G)`.
pub fn tau<T: Real>(delta: T, g: T, alpha: T) -> Result<T, BoundsError> {
    if !(g > T::zero()) {
        return Err(domain("tau", format!("G must be positive, got {g}")));
    }
    if delta < T::zero() {
        return Err(domain("tau", "Delta must be nonnegative"));
    }
    Ok((delta / (g * g)).max(delta.powf(alpha) / g))
}

/// `varsigma (eps tau)^{1/(1+2 alpha)}`, the distance from `z_k` where the
/// single-crossing estimate is balanced.
pub fn optimal_offset<T: Real>(eps: T, tau_k: T, varsigma: T, alpha: T) -> T {
    varsigma * (eps * tau_k).powf(T::one() / (T::one() + alpha + alpha))
}

/// Distances `|u_k - a|` and `tau(k)` along one side, optionally with the
/// window lengths `|V_k|`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingSequences<T> {
    pub u_dist: Vec<T>,
    pub tau: Vec<T>,
    pub v_len: Option<Vec<T>>,
    pub alpha: T,
    /// Crossing index of the first entry (for reporting).
    pub first_k: i64,
}

impl<T: Real> CrossingSequences<T> {
    pub fn from_ledger(ledger: &CrossingLedger<T>) -> Self {
        CrossingSequences {
            u_dist: ledger.u_distances(),
            tau: ledger.taus(),
            v_len: Some(ledger.records.iter().map(|r| r.v_len()).collect()),
            alpha: ledger.alpha,
            first_k: ledger.records.first().map_or(1, |r| r.k),
        }
    }

    /// Sequences from closed-form laws `k -> (|u_k - a|, tau(k))`, `k = 1..=len`.
    pub fn from_fn(len: usize, alpha: T, f: impl Fn(usize) -> (T, T)) -> Self {
        let (u_dist, tau) = (1..=len).map(f).unzip();
        CrossingSequences { u_dist, tau, v_len: None, alpha, first_k: 1 }
    }

    pub fn len(&self) -> usize {
        self.u_dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_dist.is_empty()
    }
}

/// Result of the `K(eps)` selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KSelection {
    /// Number of crossings treated individually (1-based position).
    pub k: usize,
    /// Every available entry satisfied the criterion; the true `K` may be larger.
    pub saturated: bool,
}

/// `|u_K - a| / sum_{k<=K} tau(k)^{1/(1+2 alpha)}` for `K = 1..=len`.
pub fn k_of_eps_trace<T: Real>(u_minus_a: &[T], tau_seq: &[T], alpha: T) -> Vec<T> {
    let q = T::one() / (T::one() + alpha + alpha);
    let mut acc = T::zero();
    u_minus_a
        .iter()
        .zip(tau_seq)
        .map(|(&u, &t)| {
            acc += t.powf(q);
            u / acc
        })
        .collect()
}

/// Greatest `K` with `|u_K - a| / sum_{k<=K} tau(k)^{1/(1+2 alpha)} >= eps^{1/(1+2 alpha)}`.
pub fn k_of_eps<T: Real>(eps: T, u_minus_a: &[T], tau_seq: &[T], alpha: T) -> Result<KSelection, BoundsError> {
    if u_minus_a.is_empty() || u_minus_a.len() != tau_seq.len() {
        return Err(BoundsError::Empty);
    }
    if !(eps > T::zero()) {
        return Err(domain("k_of_eps", "eps must be positive"));
    }
    if tau_seq.iter().any(|&t| !(t > T::zero())) {
        return Err(domain("k_of_eps", "tau must be positive"));
    }
    let threshold = eps.powf(T::one() / (T::one() + alpha + alpha));
    let trace = k_of_eps_trace(u_minus_a, tau_seq, alpha);
    let mut best = None;
    for (i, &r) in trace.iter().enumerate() {
        if r >= threshold {
            best = Some(i + 1);
        }
    }
    match best {
        None => Err(BoundsError::EpsTooLarge { eps: to_f64(eps) }),
        Some(k) => Ok(KSelection { k, saturated: k == trace.len() }),
    }
}

/// Outcome of the window-size condition `varsigma (eps tau_k)^{1/(1+2a)} <= |V_k|/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VkCondition<T> {
    pub ok: bool,
    /// 1-based position of the first violated crossing.
    pub first_failure: Option<usize>,
    /// Largest `varsigma` satisfying the condition for all `k <= K`.
    pub max_varsigma: T,
}

pub fn vk_condition_raw<T: Real>(varsigma: T, eps: T, taus: &[T], v_len: &[T], alpha: T, k: usize) -> VkCondition<T> {
    let mut first_failure = None;
    let mut max_varsigma = T::max_value().unwrap();
    for i in 0..k.min(taus.len()).min(v_len.len()) {
        let unit = optimal_offset(eps, taus[i], T::one(), alpha);
        let half = v_len[i] * lit(0.5);
        max_varsigma = max_varsigma.min(half / unit);
        if first_failure.is_none() && varsigma * unit > half {
            first_failure = Some(i + 1);
        }
    }
    VkCondition { ok: first_failure.is_none(), first_failure, max_varsigma }
}

pub fn vk_condition<T: Real>(varsigma: T, eps: T, ledger: &CrossingLedger<T>, k: usize) -> VkCondition<T> {
    let taus = ledger.taus();
    let v: Vec<T> = ledger.records.iter().map(|r| r.v_len()).collect();
    vk_condition_raw(varsigma, eps, &taus, &v, ledger.alpha, k)
}

/// Total bound for one `eps` with both sides of the accumulation point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport<T> {
    pub eps: T,
    pub k_minus: usize,
    pub k_plus: usize,
    pub bound_value: T,
    pub varsigma: T,
    pub condition_ok: bool,
    pub notes: Vec<String>,
}

impl<T: Real> BoundReport<T> {
    pub const CSV_HEADER: [&'static str; 6] = ["eps", "K_minus", "K_plus", "bound_value", "varsigma", "condition_ok"];

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            sig15(to_f64(self.eps)),
            self.k_minus.to_string(),
            self.k_plus.to_string(),
            sig15(to_f64(self.bound_value)),
            sig15(to_f64(self.varsigma)),
            self.condition_ok.to_string(),
        ]
    }

    pub fn key_values(&self) -> String {
        let mut out = String::new();
        for (k, v) in Self::CSV_HEADER.iter().zip(self.csv_row()) {
            let _ = writeln!(out, "{k}={v}");
        }
        for n in &self.notes {
            let _ = writeln!(out, "note={n}");
        }
        out
    }
}

/// `K_-(eps)`, `K_+(eps)`, the window condition and
/// `bound = max(|u_{K-} - a|, |u_{K+} - a|)`.
///
/// `varsigma = None` selects half the largest feasible value.
pub fn theorem_bound<T: Real>(
    eps: T,
    minus: &CrossingSequences<T>,
    plus: &CrossingSequences<T>,
    varsigma: Option<T>,
) -> Result<BoundReport<T>, BoundsError> {
    let km = k_of_eps(eps, &minus.u_dist, &minus.tau, minus.alpha)?;
    let kp = k_of_eps(eps, &plus.u_dist, &plus.tau, plus.alpha)?;
    let mut notes = vec!["constants taken as C = 1".to_string()];
    for (name, sel) in [("K_minus", km), ("K_plus", kp)] {
        if sel.saturated {
            notes.push(format!("{name} saturated at the sequence length; extend the ledger"));
        }
    }
    let mut conds = Vec::new();
    for (seq, sel) in [(minus, km), (plus, kp)] {
        if let Some(v) = &seq.v_len {
            conds.push((seq, sel.k, v));
        }
    }
    let max_feasible = conds
        .iter()
        .map(|(seq, k, v)| vk_condition_raw(T::zero(), eps, &seq.tau, v, seq.alpha, *k).max_varsigma)
        .fold(T::max_value().unwrap(), |a, b| a.min(b));
    let varsigma = match varsigma {
        Some(v) => v,
        None if conds.is_empty() => {
            notes.push("no window lengths supplied; varsigma = 1".into());
            T::one()
        }
        None => max_feasible * lit(0.5),
    };
    let mut condition_ok = true;
    for (side, (seq, k, v)) in ["minus", "plus"].iter().zip(&conds) {
        let c = vk_condition_raw(varsigma, eps, &seq.tau, v, seq.alpha, *k);
        if !c.ok {
            condition_ok = false;
            notes.push(format!(
                "window condition fails on the {side} side at crossing k = {}",
                seq.first_k + c.first_failure.unwrap() as i64 - 1
            ));
        }
    }
    let bound_value = minus.u_dist[km.k - 1].max(plus.u_dist[kp.k - 1]);
    Ok(BoundReport { eps, k_minus: km.k, k_plus: kp.k, bound_value, varsigma, condition_ok, notes })
}

/// Which side of `1 + 2 alpha` the decay exponent `mu` falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExponentCase {
    Supercritical,
    Critical,
    Subcritical,
}

impl std::fmt::Display for ExponentCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExponentCase::Supercritical => "supercritical",
            ExponentCase::Critical => "critical",
            ExponentCase::Subcritical => "subcritical",
        })
    }
}

/// Convergence exponent `p` from the power laws
/// `|u_k - a| ~ k^-beta`, `G(k) ~ k^gamma`, `|V_k| ~ k^-delta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentReport<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub delta: T,
    pub mu: T,
    pub case: ExponentCase,
    pub p: T,
    /// Only `p - nu` for every `nu > 0` is guaranteed (critical case).
    pub minus_nu: bool,
    pub delta_ok: bool,
    /// Admissible `[delta_lo, delta_hi]`.
    pub delta_range: (T, T),
}

fn min<T: PartialOrd>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

fn max<T: PartialOrd>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

/// Exponent classifier; works for floats and exact rationals alike.
pub fn exponent_p<T: Num + Copy + PartialOrd>(alpha: T, beta: T, gamma: T, delta: T) -> ExponentReport<T> {
    let one = T::one();
    let crit = one + alpha + alpha;
    let mu = min(beta + one + gamma + gamma, alpha * (beta + one) + gamma);
    let (case, p, minus_nu) = if mu > crit {
        (ExponentCase::Supercritical, one / crit, false)
    } else if mu == crit {
        (ExponentCase::Critical, one / crit, true)
    } else {
        (ExponentCase::Subcritical, beta / ((beta + one) * crit - mu), false)
    };
    let lo = beta + one;
    let hi = beta + max(one, mu / crit);
    ExponentReport {
        alpha,
        beta,
        gamma,
        delta,
        mu,
        case,
        p,
        minus_nu,
        delta_ok: lo <= delta && delta <= hi,
        delta_range: (lo, hi),
    }
}

impl<T: std::fmt::Display> ExponentReport<T> {
    pub fn key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "alpha={}", self.alpha);
        let _ = writeln!(out, "beta={}", self.beta);
        let _ = writeln!(out, "gamma={}", self.gamma);
        let _ = writeln!(out, "delta={}", self.delta);
        let _ = writeln!(out, "mu={}", self.mu);
        let _ = writeln!(out, "case={}", self.case);
        let _ = writeln!(out, "p={}{}", self.p, if self.minus_nu { " (minus-nu)" } else { "" });
        let _ = writeln!(out, "delta_ok={}", self.delta_ok);
        let _ = writeln!(out, "delta_range=[{}, {}]", self.delta_range.0, self.delta_range.1);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn synthetic(len: usize) -> CrossingSequences<f64> {
        CrossingSequences::from_fn(len, 1.0, |k| (1.0 / k as f64, (k as f64).powi(-3)))
    }

    #[test]
    fn lemma_examples() {
        assert_eq!(lemma21_bound(0.0_f64, 2.0, 0.0, 0.3, 0.5, 1.0, 0.1, 0.1).unwrap(), 2.0 * 0.2);
        let v = lemma21_bound(1e-3_f64, 1.0, 0.4, 0.4, 0.6, 0.6, 0.2, 0.2).unwrap();
        assert!((v - (2e-3 / 0.2 + 0.2)).abs() < 1e-15);
        let v = lemma21_bound(1e-3_f64, 1.0, 0.0, 0.4, 0.6, 1.0, 0.2, 0.2).unwrap();
        assert!((v - 0.23).abs() < 1e-14);
        assert!(lemma21_bound(1e-3_f64, 1.0, 0.5, 0.4, 0.6, 1.0, 0.2, 0.2).is_err());
        assert!(lemma21_bound(1e-3_f64, 1.0, 0.0, 0.4, 0.6, 1.0, 0.0, 0.2).is_err());
    }

    #[test]
    fn lemma_monotonicity() {
        let f = |eps: f64, g: f64| lemma21_bound(eps, 1.0, 0.0, 0.4, 0.6, 1.0, g, g).unwrap();
        assert!(f(1e-3, 0.2) <= f(2e-3, 0.2));
        assert!(f(1e-3, 0.3) <= f(1e-3, 0.2));
    }

    #[test]
    fn startup_examples() {
        assert!((startup_bound(0.3_f64, 0.0, 2.0) - 0.6).abs() < 1e-15);
        assert!((startup_bound(1e-3_f64, 1.0, 1.0) - 0.1).abs() < 1e-15);
        assert!((startup_bound(1e-4_f64, 0.5, 2.0) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn tau_examples() {
        assert_eq!(tau(1.0_f64, 1.0, 0.7).unwrap(), 1.0);
        assert!((tau(0.25_f64, 2.0, 1.0).unwrap() - 0.125).abs() < 1e-15);
        assert_eq!(tau(0.3_f64, 2.0, 0.0).unwrap(), (0.3_f64 / 4.0).max(0.5));
        assert!(tau(1.0_f64, 0.0, 1.0).is_err());
        assert!((tau(0.3_f64, 0.5, 1.0).unwrap() * 3.0 - tau(0.9_f64, 0.5, 1.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn offset_examples() {
        assert_eq!(optimal_offset(1.0_f64, 1.0, 1.0, 1.0), 1.0);
        assert!((optimal_offset(1e-3_f64, 1.0, 1.0, 1.0) - 0.1).abs() < 1e-15);
        assert!((optimal_offset(1e-3_f64, 8e-3, 2.0, 1.0) - 0.04).abs() < 1e-15);
    }

    #[test]
    fn k_selector_enumeration() {
        let s = synthetic(200);
        let sel = k_of_eps(1e-3, &s.u_dist, &s.tau, 1.0).unwrap();
        assert_eq!(sel, KSelection { k: 4, saturated: false });
        assert!(matches!(k_of_eps(2.0, &s.u_dist, &s.tau, 1.0), Err(BoundsError::EpsTooLarge { .. })));
        let small = synthetic(3);
        assert!(k_of_eps(1e-6, &small.u_dist, &small.tau, 1.0).unwrap().saturated);
    }

    #[test]
    fn vk_examples() {
        let c = vk_condition_raw(0.0_f64, 1e-3, &[1.0], &[0.2], 1.0, 1);
        assert!(c.ok);
        assert!((c.max_varsigma - 1.0).abs() < 1e-12);
        assert!(vk_condition_raw(0.99, 1e-3, &[1.0], &[0.2], 1.0, 1).ok);
        let c = vk_condition_raw(1.01, 1e-3, &[1.0], &[0.2], 1.0, 1);
        assert_eq!(c.first_failure, Some(1));
    }

    #[test]
    fn theorem_on_synthetic_sequences() {
        let s = synthetic(200);
        let r = theorem_bound(1e-3, &s, &s, None).unwrap();
        assert_eq!((r.k_minus, r.k_plus), (4, 4));
        assert!((r.bound_value - 0.25).abs() < 1e-15);
        let mut last = f64::INFINITY;
        for i in 0..20 {
            let eps = 1e-2 * 10f64.powf(-(i as f64) * 0.35);
            let b = theorem_bound(eps, &s, &s, None).unwrap().bound_value;
            assert!(b <= last);
            last = b;
        }
        let lopsided = CrossingSequences::from_fn(200, 1.0, |k| (2.0 / k as f64, (k as f64).powi(-3)));
        let a = theorem_bound(1e-3, &s, &lopsided, None).unwrap();
        let b = theorem_bound(1e-3, &lopsided, &s, None).unwrap();
        assert_eq!(a.bound_value, b.bound_value);
        assert!(a.key_values().contains("K_minus=4"));
    }

    #[test]
    fn exponent_examples() {
        let r = exponent_p(1.0_f64, 1.0, 1.0, 2.0);
        assert_eq!(r.case, ExponentCase::Critical);
        assert!(r.minus_nu && r.delta_ok && (r.p - 1.0 / 3.0).abs() < 1e-15);
        let r = exponent_p(1.0_f64, 1.0, 2.0, 2.0);
        assert_eq!((r.case, r.mu), (ExponentCase::Supercritical, 4.0));
        assert!(!r.minus_nu && (r.delta_range.1 - (2.0 + 1.0 / 3.0)).abs() < 1e-15);
        let r = exponent_p(0.0_f64, 1.0, 2.0, 2.0);
        assert_eq!((r.mu, r.p), (2.0, 1.0));
    }

    #[test]
    fn exponent_exact_rationals() {
        let q = |n, d| Ratio::new(n, d);
        let r = exponent_p(q(1, 1), q(1, 1), q(1, 1), q(2, 1));
        assert_eq!(r.p, q(1, 3));
        let r = exponent_p(q(1, 1), q(1, 1), q(1, 2), q(2, 1));
        // mu = min(3, 2.5) = 5/2 < 3: p = 1 / (2*3 - 5/2) = 2/7
        assert_eq!((r.case, r.p), (ExponentCase::Subcritical, q(2, 7)));
    }

    #[test]
    fn exponent_continuity_at_critical() {
        for &(a, b) in &[(1.0_f64, 1.0_f64), (0.5, 2.0), (2.0, 0.5)] {
            let crit = 1.0 + 2.0 * a;
            // choose gamma so mu sits just below / above 1 + 2 alpha
            for sgn in [-1.0, 1.0] {
                let target = crit + sgn * 1e-9;
                let gamma = (target - a * (b + 1.0)).max((target - b - 1.0) / 2.0);
                let r = exponent_p::<f64>(a, b, gamma, b + 1.0);
                assert!((r.mu - target).abs() < 1e-12);
                assert!((r.p - 1.0 / crit).abs() < 1e-6);
            }
        }
    }
}
