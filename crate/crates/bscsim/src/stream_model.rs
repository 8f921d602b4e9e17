//! Shared session parameters and the combinatorial kernels behind every
//! closed form: embedded-chain event probabilities, log-domain binomials,
//! and the ballot-style first-emptiness probability.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// The tuple (lambda, mu, N, x, phi) driving every analysis.
///
/// Invariants enforced at construction: positive finite rates, N >= 1,
/// x >= 1, phi >= 1, and x + phi - 1 <= N (the prefetch target fits the file).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionParams {
    pub lambda: f64,
    pub mu: f64,
    pub file_size_n: u32,
    pub startup_x: u32,
    pub offset_phi: u32,
}

impl SessionParams {
    pub fn new(lambda: f64, mu: f64, file_size_n: u32, startup_x: u32, offset_phi: u32) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be finite and > 0, got {lambda}")));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::Config(format!("mu must be finite and > 0, got {mu}")));
        }
        if file_size_n < 1 {
            return Err(Error::Config("file_size_N must be >= 1".into()));
        }
        if startup_x < 1 {
            return Err(Error::Config("startup_x must be >= 1".into()));
        }
        if offset_phi < 1 {
            return Err(Error::Config("offset_phi must be >= 1".into()));
        }
        let params = Self { lambda, mu, file_size_n, startup_x, offset_phi };
        if params.prefetch_target() > file_size_n {
            return Err(Error::Config(format!(
                "prefetch target x + phi - 1 = {} exceeds file_size_N = {}",
                params.prefetch_target(),
                file_size_n
            )));
        }
        Ok(params)
    }

    /// Traffic load rho = lambda / mu.
    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    /// x + phi - 1, the number of arrivals buffered before playback starts.
    pub fn prefetch_target(&self) -> u32 {
        self.startup_x + self.offset_phi - 1
    }

    pub fn event_probs(&self) -> (f64, f64) {
        event_probs(self)
    }
}

/// Embedded-chain step probabilities: an arrival with p = rho/(1+rho),
/// a departure with q = 1/(1+rho). p + q = 1 exactly by construction.
pub fn event_probs(params: &SessionParams) -> (f64, f64) {
    let rho = params.rho();
    let q = 1.0 / (1.0 + rho);
    (1.0 - q, q)
}

/// Whether frame b can be displayed after `arrived` packet arrivals.
/// Packet n carries the enhancement of frame n plus the base of frame
/// n + phi - 1, so frames up to phi - 1 travel complete in their own packet
/// and every later frame b has its base in packet b - phi + 1.
pub fn displayable(b: u32, arrived: u32, phi: u32) -> bool {
    if b + 1 <= phi {
        arrived >= b
    } else {
        arrived >= b - phi + 1
    }
}

/// Natural-log-domain probability. NEG_INFINITY encodes exact zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogProb {
    pub value: f64,
}

impl LogProb {
    pub const ZERO: LogProb = LogProb { value: f64::NEG_INFINITY };
    pub const ONE: LogProb = LogProb { value: 0.0 };

    pub fn from_ln(value: f64) -> Self {
        Self { value }
    }

    pub fn exp(self) -> f64 {
        self.value.exp()
    }
}

/// ln C(n, k). Returns NEG_INFINITY for k < 0 or k > n.
pub fn log_binom(n: u64, k: i64) -> f64 {
    if k < 0 || (k as u64) > n {
        return f64::NEG_INFINITY;
    }
    let k = k as u64;
    if k == 0 || k == n {
        return 0.0;
    }
    // Canonical small index plus commutative grouping keep C(n, k) and
    // C(n, n - k) bit-identical.
    let k = k.min(n - k);
    ln_gamma((n + 1) as f64) - (ln_gamma((k + 1) as f64) + ln_gamma((n - k + 1) as f64))
}

/// Max-shifted log-sum-exp over log-domain terms; empty or all-zero input
/// yields NEG_INFINITY.
pub fn logsumexp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = terms.iter().map(|&t| (t - m).exp()).sum();
    m + s.ln()
}

/// ln of the probability that a buffer prefetched to level t first empties at
/// the k-th departure of the embedded p/q chain:
/// (t/(2k-t)) C(2k-t, k-t) p^(k-t) q^k.
pub fn first_emptiness_log(k: u32, t: u32, p: f64, q: f64) -> f64 {
    if t < 1 || k < t {
        return f64::NEG_INFINITY;
    }
    let (k, t) = (k as u64, t as u64);
    let mut acc = (t as f64).ln() - ((2 * k - t) as f64).ln() + log_binom(2 * k - t, (k - t) as i64);
    // Skip the p term when its exponent is zero so p = 0 cannot produce NaN.
    if k > t {
        if p == 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += (k - t) as f64 * p.ln();
    }
    acc + k as f64 * q.ln()
}

/// First-emptiness probability, computed in log space and exponentiated once.
/// Zero for k < t (emptiness needs at least t departures).
pub fn first_emptiness_prob(k: u32, t: u32, p: f64, q: f64) -> f64 {
    first_emptiness_log(k, t, p, q).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num::BigUint;

    /// Exact big-integer binomial, then ln via mantissa + exponent split.
    fn log_binom_exact(n: u64, k: u64) -> f64 {
        let mut c = BigUint::from(1u32);
        let k = k.min(n - k);
        for i in 0..k {
            c = c * BigUint::from(n - i) / BigUint::from(i + 1);
        }
        let bits = c.bits();
        if bits <= 900 {
            let mut v = 0.0f64;
            for (i, d) in c.to_u64_digits().iter().enumerate() {
                v += (*d as f64) * 2f64.powi(64 * i as i32);
            }
            v.ln()
        } else {
            let shift = bits - 64;
            let top: BigUint = c >> shift;
            let mut v = 0.0f64;
            for (i, d) in top.to_u64_digits().iter().enumerate() {
                v += (*d as f64) * 2f64.powi(64 * i as i32);
            }
            v.ln() + shift as f64 * std::f64::consts::LN_2
        }
    }

    #[test]
    fn event_probs_symmetric_case() {
        let params = SessionParams::new(1.0, 1.0, 10, 2, 1).unwrap();
        let (p, q) = params.event_probs();
        assert_eq!(p, 0.5);
        assert_eq!(q, 0.5);
    }

    #[test]
    fn event_probs_asymmetric_and_limit() {
        let params = SessionParams::new(2.0, 1.0, 10, 2, 1).unwrap();
        let (p, q) = params.event_probs();
        assert_relative_eq!(p, 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(q, 1.0 / 3.0, max_relative = 1e-15);
        assert_eq!(p + q, 1.0);

        let slow = SessionParams::new(1e-12, 1.0, 10, 2, 1).unwrap();
        let (p0, q0) = slow.event_probs();
        assert!(p0 < 1e-11);
        assert!(q0 > 1.0 - 1e-11);
    }

    #[test]
    fn params_validation() {
        assert!(SessionParams::new(0.0, 1.0, 10, 1, 1).is_err());
        assert!(SessionParams::new(1.0, -1.0, 10, 1, 1).is_err());
        assert!(SessionParams::new(1.0, 1.0, 0, 1, 1).is_err());
        assert!(SessionParams::new(1.0, 1.0, 10, 0, 1).is_err());
        assert!(SessionParams::new(1.0, 1.0, 10, 1, 0).is_err());
        // x + phi - 1 = 12 > N = 10 must be a construction error.
        assert!(SessionParams::new(1.0, 1.0, 10, 5, 8).is_err());
        assert!(SessionParams::new(1.0, 1.0, 12, 5, 8).is_ok());
    }

    #[test]
    fn log_binom_small_values() {
        assert_relative_eq!(log_binom(5, 2), 10f64.ln(), max_relative = 1e-12);
        assert_eq!(log_binom(7, 0), 0.0);
        assert_eq!(log_binom(5, -1), f64::NEG_INFINITY);
        assert_eq!(log_binom(5, 6), f64::NEG_INFINITY);
    }

    #[test]
    fn log_binom_matches_bigint_oracle() {
        for &(n, k) in &[(3000u64, 1500u64), (3000, 40), (4000, 89), (500, 250), (61, 30)] {
            let approx_v = log_binom(n, k as i64);
            let exact_v = log_binom_exact(n, k);
            assert!(
                ((approx_v - exact_v) / exact_v).abs() < 1e-10,
                "log_binom({n},{k}): {approx_v} vs exact {exact_v}"
            );
        }
    }

    #[test]
    fn log_binom_symmetry() {
        for n in [1u64, 7, 64, 1001] {
            for k in 0..=n.min(40) {
                assert_eq!(log_binom(n, k as i64), log_binom(n, (n - k) as i64));
            }
        }
    }

    #[test]
    fn displayable_rule() {
        // phi = 1: a frame needs its own packet.
        assert!(displayable(3, 3, 1));
        assert!(!displayable(3, 2, 1));
        // phi = 3: frames 1 and 2 travel complete, later bases ride ahead.
        assert!(displayable(2, 2, 3));
        assert!(!displayable(2, 1, 3));
        assert!(displayable(7, 5, 3));
        assert!(!displayable(7, 4, 3));
        assert!(displayable(1, 1, 4));
    }

    #[test]
    fn first_emptiness_base_cases() {
        // k = t: the all-departures path, probability q^t.
        for &(t, rho) in &[(1u32, 0.5f64), (3, 1.0), (7, 2.0)] {
            let q = 1.0 / (1.0 + rho);
            let p = 1.0 - q;
            assert_relative_eq!(first_emptiness_prob(t, t, p, q), q.powi(t as i32), max_relative = 1e-13);
        }
        // t = 1, k = 2: the single valid path arrival then two departures.
        let (p, q) = (0.4, 0.6);
        assert_relative_eq!(first_emptiness_prob(2, 1, p, q), p * q * q, max_relative = 1e-13);
        // t = 2, k = 3 at p = q = 1/2: (2/4) C(4,1) / 16 = 1/8.
        assert_relative_eq!(first_emptiness_prob(3, 2, 0.5, 0.5), 0.125, max_relative = 1e-13);
        // Impossible before t departures.
        assert_eq!(first_emptiness_prob(1, 2, 0.5, 0.5), 0.0);
        assert_eq!(first_emptiness_prob(0, 1, 0.5, 0.5), 0.0);
    }

    #[test]
    fn first_emptiness_degenerate_p_zero() {
        // lambda -> 0: emptiness happens at exactly t departures with certainty.
        assert_eq!(first_emptiness_prob(3, 3, 0.0, 1.0), 1.0);
        assert_eq!(first_emptiness_prob(4, 3, 0.0, 1.0), 0.0);
    }

    #[test]
    fn first_emptiness_mass_near_one_when_stable() {
        // For p < q the buffer empties eventually; a finite horizon then
        // captures all but a geometric remainder of the mass.
        for &rho in &[0.5f64, 0.8] {
            let q = 1.0 / (1.0 + rho);
            let p = 1.0 - q;
            for &t in &[1u32, 5, 40] {
                let horizon = t + (50.0 / (1.0 - rho).powi(2)).ceil() as u32;
                let mass: f64 = (t..=horizon).map(|k| first_emptiness_prob(k, t, p, q)).sum();
                assert!(mass >= 0.999, "mass {mass} at rho={rho}, t={t}");
                assert!(mass <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn first_emptiness_cumulative_mass_nonincreasing_in_t() {
        // A larger prefetch delays emptiness stochastically, so the mass
        // accumulated by any fixed departure horizon shrinks as t grows.
        // Note the pointwise pmf is not monotone in t: at p = q = 1/2,
        // fep(3, 1) = 1/16 < fep(3, 2) = 1/8.
        for &rho in &[0.5f64, 1.0, 2.0] {
            let q = 1.0 / (1.0 + rho);
            let p = 1.0 - q;
            let horizon = 80u32;
            let cum = |t: u32| -> f64 {
                (t..=horizon).map(|k| first_emptiness_prob(k, t, p, q)).sum()
            };
            for t in 1u32..30 {
                let hi = cum(t);
                let lo = cum(t + 1);
                assert!(lo <= hi + 1e-12, "t={t} rho={rho}: {lo} > {hi}");
            }
        }
    }

    #[test]
    fn logsumexp_basics() {
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = logsumexp(&[0.3f64.ln(), 0.2f64.ln(), f64::NEG_INFINITY]);
        assert_relative_eq!(v.exp(), 0.5, max_relative = 1e-13);
    }

    #[test]
    fn logprob_constants() {
        assert_eq!(LogProb::ZERO.exp(), 0.0);
        assert_eq!(LogProb::ONE.exp(), 1.0);
        assert_relative_eq!(LogProb::from_ln(0.25f64.ln()).exp(), 0.25, max_relative = 1e-14);
    }
}
