//! Starvation-count analysis for the embedded arrival/departure chain.
//!
//! A starvation is located by the departure index at which the playout
//! buffer first runs empty. A session then decomposes into a first-emptiness
//! event F, a sub-stochastic transition kernel M between consecutive
//! emptiness positions, and a closing event L_j that forbids any further
//! emptiness. Chaining them left to right as F, M, ..., M, L_j yields the
//! distribution of the starvation count.
//!
//! The construction is exact (verified against exhaustive path enumeration)
//! whenever the offset satisfies phi <= x + 1. For phi >= x + 2 an early
//! emptiness can occur before the stream position clears the offset window,
//! and the two-term combination of early and late failure modes is a tight
//! approximation rather than an identity; its error shrinks rapidly as the
//! startup threshold x grows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream_model::{first_emptiness_prob, SessionParams};

/// Lower summation bound for the late-regime term of the two-part
/// starvation probability used when phi > x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiBound {
    /// Start the late sum at 2*phi - 2, the first departure index at which
    /// a post-resume emptiness is reachable. Tracks exhaustive enumeration
    /// more closely at small N and is the default.
    Display,
    /// Start the late sum at x + phi - 1, the conservative union bound over
    /// all resume points.
    Proof,
}

/// Tunables for the starvation-count machinery. The defaults reproduce the
/// frozen fixtures in this module's tests; the alternates exist so each
/// boundary convention stays testable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BallotConfig {
    /// Bound selection for the late term of the large-offset probability.
    pub phi_bound: PhiBound,
    /// Whether the unreachable window of the closing vectors ends at
    /// 2*phi - 3 inclusive (matching the first-emptiness window) or
    /// exclusive.
    pub zero_window_inclusive: bool,
    /// Use the literal late-regime guard offset (j - e) for closing vector
    /// L_j instead of the corrected (j - 1 - e). The literal guard is
    /// inconsistent with the phi = 1 collapse and with path enumeration;
    /// it is kept selectable only to document the discrepancy.
    pub lj_guard_literal: bool,
    /// Hard cap on the starvation count before truncation is declared.
    pub j_max: u32,
    /// Tail mass below which the pmf computation stops early.
    pub eps_trunc: f64,
}

impl Default for BallotConfig {
    fn default() -> Self {
        BallotConfig {
            phi_bound: PhiBound::Display,
            zero_window_inclusive: true,
            lj_guard_literal: false,
            j_max: 32,
            eps_trunc: 1e-6,
        }
    }
}

/// Distribution of the number of starvations in one session.
#[derive(Debug, Clone, Serialize)]
pub struct StarvationPmf {
    /// probs[j] = P(exactly j starvations), j = 0..=truncation_j.
    pub probs: Vec<f64>,
    /// Largest starvation count carried explicitly; mass beyond it is
    /// below the truncation tolerance and folded into probs[0].
    pub truncation_j: u32,
    /// Parameters the distribution was computed for.
    pub params: SessionParams,
}

impl StarvationPmf {
    /// Expected number of starvations, sum over j of j * probs[j].
    pub fn expected_count(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(j, p)| j as f64 * p)
            .sum()
    }

    /// P(at least one starvation).
    pub fn starvation_prob(&self) -> f64 {
        (1.0 - self.probs[0]).clamp(0.0, 1.0)
    }
}

/// Generating-function evaluation sum over j of probs[j] * z^j for z in [0, 1].
pub fn pgf_evaluate(pmf: &StarvationPmf, z: f64) -> f64 {
    // Horner form keeps one multiplication per coefficient.
    pmf.probs.iter().rev().fold(0.0, |acc, &p| acc * z + p)
}

/// Inter-starvation transition kernel. Entry (k, k2) is the probability
/// that the next emptiness happens at departure index k2 given the previous
/// one at k. Entries depend on position only through the regime of k and
/// the displacement k2 - k, so the banded matrix is stored as the two
/// first-emptiness tables it is sliced from.
#[derive(Debug, Clone)]
pub struct TransitionKernel {
    n: usize,
    x: usize,
    phi: usize,
    xphi: usize,
    late_lo: usize,
    tbl_x: Vec<f64>,
    tbl_xphi: Vec<f64>,
}

impl TransitionKernel {
    /// Kernel entry for previous emptiness at k and next at k2, both in 0..=N.
    pub fn entry(&self, k: u32, k2: u32) -> f64 {
        let (k, k2) = (k as usize, k2 as usize);
        if k2 >= self.n || k2 <= k {
            return 0.0;
        }
        let d = k2 - k;
        if self.is_early_row(k) {
            if k2 + 2 <= self.phi {
                // Early to early: the offset window is still ahead, the
                // refill threshold is x.
                self.tbl_x[d]
            } else if k2 >= self.late_lo {
                self.tbl_xphi[d]
            } else {
                // [phi - 1, late_lo - 1] cannot host the next emptiness.
                0.0
            }
        } else if k >= self.late_lo && k >= self.x {
            self.tbl_xphi[d]
        } else {
            0.0
        }
    }

    /// Row k carries mass only when phi >= x + 2 and k sits in [x, phi - 2].
    fn is_early_row(&self, k: usize) -> bool {
        self.phi >= self.x + 2 && k >= self.x && k + 2 <= self.phi
    }

    /// v * M for a row vector indexed 0..=N.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n + 1);
        let mut out = vec![0.0; self.n + 1];
        for k in 0..self.n {
            let w = v[k];
            if w == 0.0 {
                continue;
            }
            if self.is_early_row(k) {
                for k2 in (k + self.x)..=(self.phi - 2) {
                    out[k2] += w * self.tbl_x[k2 - k];
                }
                for k2 in self.late_lo.max(k + self.xphi)..self.n {
                    out[k2] += w * self.tbl_xphi[k2 - k];
                }
            } else if k >= self.late_lo {
                for k2 in (k + self.xphi)..self.n {
                    out[k2] += w * self.tbl_xphi[k2 - k];
                }
            }
        }
        out
    }

    /// Sum of row k, the probability of one more starvation given the
    /// previous emptiness position.
    pub fn row_sum(&self, k: u32) -> f64 {
        (0..=self.n as u32).map(|k2| self.entry(k, k2)).sum()
    }
}

/// The F, L_1..L_J and M pieces of the counting construction. All vectors
/// are indexed directly by departure index k in 0..=N; entries outside the
/// reachable band are zero. The kernel is shared by every gap because row
/// position alone determines which regime applies.
#[derive(Debug, Clone)]
pub struct EventVectors {
    /// P(first emptiness at index k).
    pub f: Vec<f64>,
    /// ls[j - 1][k] = P(no further emptiness | j-th emptiness at k).
    pub ls: Vec<Vec<f64>>,
    /// Transition kernel between consecutive emptiness positions.
    pub m: TransitionKernel,
}

/// Shared precomputation: first-emptiness tables for both refill thresholds
/// plus the cumulative forms the closing vectors read in O(1).
struct Tables {
    n: usize,
    x: usize,
    phi: usize,
    xphi: usize,
    late_lo: usize,
    /// Count of starvations that can happen before the stream position
    /// clears the offset window, floor((phi - 2) / x).
    e: u32,
    /// Mass of an early first emptiness, sum of fep(k, x) over [x, phi - 2].
    ps1: f64,
    /// fep(k, x) indexed by k.
    tbl_x: Vec<f64>,
    /// fep(k, x + phi - 1) indexed by k.
    tbl_xphi: Vec<f64>,
    /// cum_small[m] = small-offset starvation probability of an m-frame
    /// remainder, sum of tbl_xphi over [x + phi - 1, m - 1].
    cum_small: Vec<f64>,
    /// cum_ps2[m] = late term of the large-offset probability for an
    /// m-frame remainder; lower bound chosen by PhiBound.
    cum_ps2: Vec<f64>,
    /// cum_early[m] = sum of tbl_x over [x, min(phi - 2, m - 1)].
    cum_early: Vec<f64>,
}

impl Tables {
    fn new(params: &SessionParams, cfg: &BallotConfig) -> Tables {
        let (p, q) = params.event_probs();
        let n = params.file_size_n as usize;
        let x = params.startup_x as usize;
        let phi = params.offset_phi as usize;
        let xphi = x + phi - 1;
        let late_lo = (2 * phi).saturating_sub(2).max(xphi);
        let e = if phi >= 2 { ((phi - 2) / x) as u32 } else { 0 };

        let tbl_x: Vec<f64> = (0..=n)
            .map(|k| first_emptiness_prob(k as u32, x as u32, p, q))
            .collect();
        let tbl_xphi: Vec<f64> = (0..=n)
            .map(|k| first_emptiness_prob(k as u32, xphi as u32, p, q))
            .collect();

        let klow = match cfg.phi_bound {
            PhiBound::Display => late_lo,
            PhiBound::Proof => xphi,
        };
        let mut cum_small = vec![0.0; n + 1];
        let mut cum_ps2 = vec![0.0; n + 1];
        let mut cum_early = vec![0.0; n + 1];
        for m in 1..=n {
            let k = m - 1;
            cum_small[m] = cum_small[k] + tbl_xphi[k];
            cum_ps2[m] = cum_ps2[k] + if k >= klow { tbl_xphi[k] } else { 0.0 };
            cum_early[m] = cum_early[k] + if k + 2 <= phi { tbl_x[k] } else { 0.0 };
        }
        let ps1 = cum_early[n];

        Tables { n, x, phi, xphi, late_lo, e, ps1, tbl_x, tbl_xphi, cum_small, cum_ps2, cum_early }
    }

    /// Two-term starvation probability of an m-frame remainder that still
    /// has the whole offset window ahead of it.
    fn ps_large_rem(&self, m: usize) -> f64 {
        let early = self.cum_early[m];
        early + (1.0 - early) * self.cum_ps2[m]
    }

    fn f_vec(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.n + 1];
        if self.phi >= self.x + 2 {
            for k in self.x..=(self.phi - 2) {
                f[k] = self.tbl_x[k];
            }
        }
        for k in self.late_lo..self.n {
            f[k] = (1.0 - self.ps1) * self.tbl_xphi[k];
        }
        f
    }

    fn l_vec(&self, j: u32, cfg: &BallotConfig) -> Vec<f64> {
        let mut l = vec![0.0; self.n + 1];
        if j >= 1 && j <= self.e {
            // Early regime: the j-th emptiness can still precede the
            // offset window, at position j*x or later.
            let zw_hi = if cfg.zero_window_inclusive { 2 * self.phi - 3 } else { 2 * self.phi - 4 };
            for k in (j as usize * self.x)..self.n {
                l[k] = if k + self.xphi >= self.n {
                    1.0
                } else if k + self.x < self.phi {
                    // A full early window remains in the rest of the stream.
                    1.0 - self.ps_large_rem(self.n - k)
                } else if k + 2 <= self.phi {
                    1.0 - self.cum_small[self.n - k]
                } else if k <= zw_hi {
                    0.0
                } else {
                    1.0 - self.cum_small[self.n - k]
                };
            }
        } else {
            let e = self.e as usize;
            let j = j as usize;
            let off = if cfg.lj_guard_literal { j - e } else { j - 1 - e };
            let guard = self.late_lo + off * self.xphi;
            for k in guard..self.n {
                l[k] = if k + self.xphi >= self.n { 1.0 } else { 1.0 - self.cum_small[self.n - k] };
            }
        }
        l
    }

    fn kernel(&self) -> TransitionKernel {
        TransitionKernel {
            n: self.n,
            x: self.x,
            phi: self.phi,
            xphi: self.xphi,
            late_lo: self.late_lo,
            tbl_x: self.tbl_x.clone(),
            tbl_xphi: self.tbl_xphi.clone(),
        }
    }
}

fn small_offset_value(params: &SessionParams) -> f64 {
    let (p, q) = params.event_probs();
    let t = params.prefetch_target();
    let total: f64 = (t..params.file_size_n)
        .map(|k| first_emptiness_prob(k, t, p, q))
        .sum();
    total.clamp(0.0, 1.0)
}

fn large_offset_value(params: &SessionParams, cfg: &BallotConfig) -> f64 {
    let (p, q) = params.event_probs();
    let x = params.startup_x;
    let phi = params.offset_phi;
    let xphi = params.prefetch_target();
    let ps1: f64 = (x..phi.saturating_sub(1))
        .map(|k| first_emptiness_prob(k, x, p, q))
        .sum();
    let klow = match cfg.phi_bound {
        PhiBound::Display => (2 * phi).saturating_sub(2),
        PhiBound::Proof => xphi,
    };
    let ps2: f64 = (klow..params.file_size_n)
        .map(|k| first_emptiness_prob(k, xphi, p, q))
        .sum();
    (ps1 + (1.0 - ps1) * ps2).clamp(0.0, 1.0)
}

/// Starvation probability for phi <= x: a session starves iff the buffer,
/// prefetched to x + phi - 1, empties before the last departure.
pub fn starvation_prob_small_offset(params: &SessionParams) -> Result<f64> {
    if params.offset_phi > params.startup_x {
        return Err(Error::Config(format!(
            "small-offset form needs offset_phi <= startup_x, got phi = {} > x = {}",
            params.offset_phi, params.startup_x
        )));
    }
    Ok(small_offset_value(params))
}

/// Starvation probability for phi > x: an early emptiness inside the offset
/// window (refill threshold x) combined with a late one past it (threshold
/// x + phi - 1).
pub fn starvation_prob_large_offset(params: &SessionParams) -> Result<f64> {
    starvation_prob_large_offset_with(params, &BallotConfig::default())
}

/// Large-offset probability under an explicit boundary configuration.
pub fn starvation_prob_large_offset_with(
    params: &SessionParams,
    cfg: &BallotConfig,
) -> Result<f64> {
    if params.offset_phi <= params.startup_x {
        return Err(Error::Config(format!(
            "large-offset form needs offset_phi > startup_x, got phi = {} <= x = {}",
            params.offset_phi, params.startup_x
        )));
    }
    Ok(large_offset_value(params, cfg))
}

/// Regime dispatch on phi vs x.
pub fn starvation_prob(params: &SessionParams) -> f64 {
    starvation_prob_with(params, &BallotConfig::default())
}

/// Regime dispatch under an explicit boundary configuration.
pub fn starvation_prob_with(params: &SessionParams, cfg: &BallotConfig) -> f64 {
    if params.offset_phi <= params.startup_x {
        small_offset_value(params)
    } else {
        large_offset_value(params, cfg)
    }
}

/// Build the F, L_1..L_J and M pieces for a given maximum count J.
pub fn build_event_vectors(params: &SessionParams, j: u32) -> EventVectors {
    build_event_vectors_with(params, j, &BallotConfig::default())
}

/// Event vectors under an explicit boundary configuration.
pub fn build_event_vectors_with(
    params: &SessionParams,
    j: u32,
    cfg: &BallotConfig,
) -> EventVectors {
    let t = Tables::new(params, cfg);
    EventVectors {
        f: t.f_vec(),
        ls: (1..=j).map(|jj| t.l_vec(jj, cfg)).collect(),
        m: t.kernel(),
    }
}

/// Distribution of the starvation count, truncated once the remaining tail
/// mass drops below the configured tolerance. j_cap bounds the largest
/// count computed; exceeding it with tail mass still above tolerance is a
/// truncation error.
pub fn starvation_count_pmf(params: &SessionParams, j_cap: u32) -> Result<StarvationPmf> {
    starvation_count_pmf_with(params, j_cap, &BallotConfig::default())
}

/// Starvation-count pmf under an explicit boundary configuration.
pub fn starvation_count_pmf_with(
    params: &SessionParams,
    j_cap: u32,
    cfg: &BallotConfig,
) -> Result<StarvationPmf> {
    let t = Tables::new(params, cfg);
    let kernel = t.kernel();
    let mut v = t.f_vec();
    let mut tail = Vec::new();
    // The two-stage kernel measures its early and late bands under
    // different refill thresholds, so on small files the raw tail can
    // exceed the available mass. Capping each entry at the unassigned
    // remainder projects the output onto an actual distribution; exact
    // regimes are unaffected beyond float dust.
    let mut budget = 1.0f64;
    for j in 1..=j_cap {
        // Total mass of v is P(at least j starvations); once it or the
        // unassigned budget is below tolerance the remainder folds into
        // probs[0] (respectively is the boundary over-count artifact).
        let remaining: f64 = v.iter().sum();
        if remaining < cfg.eps_trunc || budget < cfg.eps_trunc {
            break;
        }
        let l = t.l_vec(j, cfg);
        // Large-N cancellation can leave dot products a few ulps negative.
        let pj = v
            .iter()
            .zip(&l)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .clamp(0.0, 1.0)
            .min(budget);
        budget -= pj;
        tail.push(pj);
        v = kernel.apply(&v);
        if j == j_cap {
            let residual: f64 = v.iter().sum::<f64>().min(budget);
            if residual >= cfg.eps_trunc {
                return Err(Error::Truncation(format!(
                    "tail mass {residual:.3e} beyond j = {j_cap} exceeds tolerance {:.1e}",
                    cfg.eps_trunc
                )));
            }
        }
    }
    let truncation_j = tail.len() as u32;
    let head: f64 = tail.iter().sum();
    let mut probs = vec![(1.0 - head).clamp(0.0, 1.0)];
    probs.extend(tail);
    Ok(StarvationPmf { probs, truncation_j, params: *params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::des_simulator::oracle::enumerate_paths;
    use approx::assert_relative_eq;

    fn params(n: u32, x: u32, phi: u32, rho: f64) -> SessionParams {
        SessionParams::new(rho, 1.0, n, x, phi).unwrap()
    }

    #[test]
    fn small_offset_empty_sum() {
        // File finishes during prefetch: N = x + phi - 1.
        let p = params(3, 2, 2, 1.0);
        assert_eq!(starvation_prob_small_offset(&p).unwrap(), 0.0);
    }

    #[test]
    fn small_offset_rejects_wrong_regime() {
        let p = params(7, 1, 3, 1.0);
        assert!(matches!(starvation_prob_small_offset(&p), Err(Error::Config(_))));
        let p = params(8, 2, 2, 1.0);
        assert!(matches!(starvation_prob_large_offset(&p), Err(Error::Config(_))));
    }

    #[test]
    fn small_offset_matches_enumeration() {
        // N = 6, x = 2, phi = 2, rho = 1: exhaustive value 37/128.
        let p = params(6, 2, 2, 1.0);
        let got = starvation_prob_small_offset(&p).unwrap();
        assert_relative_eq!(got, 37.0 / 128.0, max_relative = 1e-12);
        let oracle = enumerate_paths(&p).unwrap();
        assert_relative_eq!(got, oracle.starvation_prob_f64(), max_relative = 1e-12);
    }

    #[test]
    fn large_offset_degenerate_bounds() {
        // x = 1, phi = 2, N = 2: both terms have empty ranges.
        let p = params(2, 1, 2, 1.0);
        assert_eq!(starvation_prob_large_offset(&p).unwrap(), 0.0);
    }

    #[test]
    fn large_offset_exact_at_phi_x_plus_one() {
        // phi = x + 1 keeps the early window empty, so the late sum from
        // 2*phi - 2 = x + phi - 1 is the exact small-offset form: 595/1024.
        let p = params(8, 1, 2, 1.0);
        let got = starvation_prob_large_offset(&p).unwrap();
        assert_relative_eq!(got, 595.0 / 1024.0, max_relative = 1e-12);
        let oracle = enumerate_paths(&p).unwrap();
        assert_relative_eq!(got, oracle.starvation_prob_f64(), max_relative = 1e-12);
    }

    #[test]
    fn large_offset_bound_selection() {
        // N = 7, x = 1, phi = 3, rho = 1. Exhaustive enumeration gives
        // P_s = 151/256; the default bound lands closer than the
        // conservative one.
        let p = params(7, 1, 3, 1.0);
        let display = starvation_prob_large_offset(&p).unwrap();
        let proof = starvation_prob_large_offset_with(
            &p,
            &BallotConfig { phi_bound: PhiBound::Proof, ..BallotConfig::default() },
        )
        .unwrap();
        assert_relative_eq!(display, 39.0 / 64.0, max_relative = 1e-12);
        assert_relative_eq!(proof, 43.0 / 64.0, max_relative = 1e-12);
        let exact = 151.0 / 256.0;
        assert!((display - exact).abs() < (proof - exact).abs());
    }

    #[test]
    fn dispatch_selects_regime() {
        let at_boundary = params(9, 3, 3, 0.8);
        assert_eq!(
            starvation_prob(&at_boundary),
            starvation_prob_small_offset(&at_boundary).unwrap()
        );
        let above = params(9, 3, 4, 0.8);
        assert_eq!(starvation_prob(&above), starvation_prob_large_offset(&above).unwrap());
    }

    #[test]
    fn event_vectors_match_enumeration_marginals() {
        // N = 8, x = 1, phi = 2, rho = 1: F, M and the closing vectors
        // reproduce the path-enumeration marginals exactly.
        let p = params(8, 1, 2, 1.0);
        let ev = build_event_vectors(&p, 2);
        let oracle = enumerate_paths(&p).unwrap();
        let first = oracle.first_marginal_f64();
        for k in 0..=8u32 {
            let want = first.get(&k).copied().unwrap_or(0.0);
            assert_relative_eq!(ev.f[k as usize], want, max_relative = 1e-12, epsilon = 1e-15);
        }
        for (&(k1, k2), want) in &oracle.second_joint_f64() {
            let got = ev.f[k1 as usize] * ev.m.entry(k1, k2);
            assert_relative_eq!(got, *want, max_relative = 1e-12);
        }
        for (&k, want) in &oracle.exactly_one_f64() {
            let got = ev.f[k as usize] * ev.ls[0][k as usize];
            assert_relative_eq!(got, *want, max_relative = 1e-12);
        }
        for (&(k1, k2), want) in &oracle.exactly_two_f64() {
            let got = ev.f[k1 as usize] * ev.m.entry(k1, k2) * ev.ls[1][k2 as usize];
            assert_relative_eq!(got, *want, max_relative = 1e-12);
        }
    }

    #[test]
    fn event_vectors_phi_one_collapse() {
        // phi = 1 removes the early regime entirely; F and M reduce to the
        // single-threshold first-emptiness form.
        let p = params(10, 3, 1, 0.8);
        let (pp, qq) = p.event_probs();
        let ev = build_event_vectors(&p, 1);
        for k in 0..=10u32 {
            let want = if k < 10 { first_emptiness_prob(k, 3, pp, qq) } else { 0.0 };
            assert_relative_eq!(ev.f[k as usize], want, max_relative = 1e-12);
        }
        for k in 3..10u32 {
            for k2 in 0..=10u32 {
                let want = if k2 < 10 && k2 > k {
                    first_emptiness_prob(k2 - k, 3, pp, qq)
                } else {
                    0.0
                };
                assert_relative_eq!(ev.m.entry(k, k2), want, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn kernel_rows_substochastic_and_banded() {
        for &(n, x, phi, rho) in
            &[(8u32, 1u32, 2u32, 1.0f64), (7, 1, 3, 1.0), (8, 2, 4, 0.5), (12, 2, 6, 2.0), (10, 3, 1, 0.8)]
        {
            let p = params(n, x, phi, rho);
            let ev = build_event_vectors(&p, 1);
            for k in 0..=n {
                let sum = ev.m.row_sum(k);
                assert!(sum <= 1.0 + 1e-12, "row {k} sums to {sum}");
                for k2 in 0..k.saturating_add(x).min(n) {
                    assert_eq!(ev.m.entry(k, k2), 0.0, "entry ({k}, {k2}) inside the x-band");
                }
            }
        }
    }

    #[test]
    fn pmf_matches_enumeration_exact_regime() {
        for (pars, want) in [
            (params(8, 1, 2, 1.0), vec![429.0 / 1024.0, 363.0 / 1024.0, 3.0 / 16.0, 5.0 / 128.0]),
            (
                params(8, 1, 2, 0.5),
                vec![18191.0 / 177147.0, 50236.0 / 177147.0, 8048.0 / 19683.0, 448.0 / 2187.0],
            ),
            (params(6, 2, 2, 1.0), vec![91.0 / 128.0, 37.0 / 128.0]),
            (params(7, 2, 3, 1.0), vec![105.0 / 128.0, 23.0 / 128.0]),
            (params(8, 3, 3, 2.0), vec![19432.0 / 19683.0, 251.0 / 19683.0]),
            (params(2, 1, 1, 1.0), vec![0.5, 0.5]),
            (
                params(8, 1, 1, 0.5),
                vec![
                    18191.0 / 531441.0,
                    36382.0 / 531441.0,
                    20500.0 / 177147.0,
                    3304.0 / 19683.0,
                    4048.0 / 19683.0,
                    4000.0 / 19683.0,
                    320.0 / 2187.0,
                    128.0 / 2187.0,
                ],
            ),
        ] {
            let pmf = starvation_count_pmf(&pars, 32).unwrap();
            assert_eq!(pmf.probs.len(), want.len(), "pmf length for {pars:?}");
            for (j, w) in want.iter().enumerate() {
                assert_relative_eq!(pmf.probs[j], *w, max_relative = 1e-12);
            }
            let oracle = enumerate_paths(&pars).unwrap();
            for (j, o) in oracle.probs_f64().iter().enumerate() {
                assert_relative_eq!(pmf.probs[j], *o, max_relative = 1e-12, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn pmf_approximate_regime_pinned() {
        // phi >= x + 2 couples the early window across gaps; the analytic
        // values differ from exhaustive enumeration at these tiny N.
        // N = 7, x = 1, phi = 3: enumeration gives {105/256, 57/128, 37/256}.
        let pmf = starvation_count_pmf(&params(7, 1, 3, 1.0), 32).unwrap();
        assert_relative_eq!(pmf.probs[0], 275.0 / 512.0, max_relative = 1e-12);
        assert_relative_eq!(pmf.probs[1], 163.0 / 512.0, max_relative = 1e-12);
        assert_relative_eq!(pmf.probs[2], 37.0 / 256.0, max_relative = 1e-12);
        // N = 8, x = 2, phi = 4: enumeration gives
        // {8375/19683, 10156/19683, 128/2187}; the last entry is exact.
        let pmf = starvation_count_pmf(&params(8, 2, 4, 0.5), 32).unwrap();
        assert_relative_eq!(pmf.probs[0], 71215.0 / 177147.0, max_relative = 1e-12);
        assert_relative_eq!(pmf.probs[1], 95564.0 / 177147.0, max_relative = 1e-12);
        assert_relative_eq!(pmf.probs[2], 128.0 / 2187.0, max_relative = 1e-12);
        let oracle = enumerate_paths(&params(8, 2, 4, 0.5)).unwrap().probs_f64();
        assert!((pmf.probs[0] - oracle[0]).abs() < 0.03);
        assert!((pmf.probs[1] - oracle[1]).abs() < 0.03);
        assert_relative_eq!(pmf.probs[2], oracle[2], max_relative = 1e-12);
    }

    #[test]
    fn pmf_literal_guard_is_wrong() {
        // The literal guard offset shifts every closing vector one refill
        // too far, which path enumeration rules out.
        let p = params(8, 1, 2, 1.0);
        let literal = starvation_count_pmf_with(
            &p,
            32,
            &BallotConfig { lj_guard_literal: true, ..BallotConfig::default() },
        )
        .unwrap();
        assert!((literal.probs[1] - 363.0 / 1024.0).abs() > 0.01);
    }

    #[test]
    fn pmf_truncation_reported() {
        let p = params(8, 1, 1, 0.5);
        match starvation_count_pmf(&p, 1) {
            Err(Error::Truncation(_)) => {}
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn pmf_fast_arrivals_concentrates_at_zero() {
        let pmf = starvation_count_pmf(&params(60, 5, 3, 5.0), 32).unwrap();
        assert!(pmf.probs[0] > 0.99, "probs[0] = {}", pmf.probs[0]);
        assert!(pmf.truncation_j <= 3);
    }

    #[test]
    fn pmf_expected_count() {
        let pmf = starvation_count_pmf(&params(8, 1, 2, 1.0), 32).unwrap();
        assert_relative_eq!(pmf.expected_count(), 867.0 / 1024.0, max_relative = 1e-12);
        assert_relative_eq!(pmf.starvation_prob(), 595.0 / 1024.0, max_relative = 1e-12);
    }

    #[test]
    fn pgf_evaluation() {
        let pmf = starvation_count_pmf(&params(8, 1, 2, 1.0), 32).unwrap();
        assert_relative_eq!(pgf_evaluate(&pmf, 1.0), 1.0, epsilon = 1e-6 + 1e-9);
        assert_eq!(pgf_evaluate(&pmf, 0.0), pmf.probs[0]);
        // 429/1024 + (363/1024)/2 + (192/1024)/4 + (40/1024)/8 = 663.5/1024.
        assert_relative_eq!(pgf_evaluate(&pmf, 0.5), 663.5 / 1024.0, max_relative = 1e-12);
    }
}
