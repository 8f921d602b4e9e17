//! QoE planning on top of the analytic modules: buffering-delay formulas,
//! the no-BSC baseline starvation probability, offset selection, the
//! three-term QoE cost, and DASH-vs-BSC bitrate-ladder comparison.
//!
//! The cost of a configuration is
//!
//! C = gamma1 * E[initial delay] + gamma2 * E[#starvations]
//!     - gamma3 * (w_low * T_low + w_high * T_high)
//!
//! with the quality times T_i taken from the quasi-stationary fractions
//! (simulation fallback when rho >= 1 puts the chain outside its regime).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ballot_analysis::{starvation_count_pmf_with, starvation_prob, BallotConfig};
use crate::des_simulator::{replicate, ArrivalProcess};
use crate::error::{Error, Result};
use crate::quality_markov::quasi_stationary;
use crate::stream_model::{first_emptiness_prob, SessionParams};

/// One rung of a bitrate ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderLevel {
    pub label: String,
    pub kbps: f64,
    /// Quality weight in the cost; proportional constructors use
    /// kbps / max kbps.
    pub weight: f64,
}

/// Bitrate ladder sorted ascending; bitrates strictly increasing, weights
/// finite and nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BitrateLadder {
    levels: Vec<LadderLevel>,
}

impl BitrateLadder {
    pub fn new(levels: Vec<LadderLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Config("bitrate ladder must have at least one level".into()));
        }
        for w in levels.windows(2) {
            if !(w[1].kbps > w[0].kbps) {
                return Err(Error::Config(format!(
                    "ladder bitrates must be strictly increasing: {} Kbps ({}) then {} Kbps ({})",
                    w[0].kbps, w[0].label, w[1].kbps, w[1].label
                )));
            }
        }
        for l in &levels {
            if !(l.kbps > 0.0) || !l.kbps.is_finite() {
                return Err(Error::Config(format!("level {} needs a positive bitrate", l.label)));
            }
            if !(l.weight >= 0.0) || !l.weight.is_finite() {
                return Err(Error::Config(format!(
                    "level {} needs a finite nonnegative weight, got {}",
                    l.label, l.weight
                )));
            }
        }
        Ok(BitrateLadder { levels })
    }

    /// Weights default to bitrate over max bitrate.
    pub fn with_proportional_weights(rungs: &[(&str, f64)]) -> Result<Self> {
        let max = rungs.iter().map(|r| r.1).fold(f64::NAN, f64::max);
        Self::new(
            rungs
                .iter()
                .map(|(label, kbps)| LadderLevel {
                    label: (*label).to_string(),
                    kbps: *kbps,
                    weight: *kbps / max,
                })
                .collect(),
        )
    }

    /// The five-rung 240p..1080p ladder used throughout the examples.
    pub fn standard() -> Self {
        Self::with_proportional_weights(&[
            ("240p", 400.0),
            ("360p", 750.0),
            ("480p", 1000.0),
            ("720p", 2500.0),
            ("1080p", 4500.0),
        ])
        .expect("static ladder is valid")
    }

    pub fn levels(&self) -> &[LadderLevel] {
        &self.levels
    }
}

/// Cost weights (gamma1, gamma2, gamma3), all nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoEWeights {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
}

impl QoEWeights {
    pub fn new(gamma1: f64, gamma2: f64, gamma3: f64) -> Result<Self> {
        for (name, v) in [("gamma1", gamma1), ("gamma2", gamma2), ("gamma3", gamma3)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(QoEWeights { gamma1, gamma2, gamma3 })
    }
}

impl Default for QoEWeights {
    fn default() -> Self {
        QoEWeights { gamma1: 0.1, gamma2: 1.0, gamma3: 0.01 }
    }
}

/// How a BSC pair's aggregate bitrate per frame is accounted when turning
/// throughput into an arrival rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairBandwidth {
    /// Enhancement of one frame plus the shifted base of another:
    /// (b_high - b_low) + svc_overhead * b_low. The base travels once.
    #[default]
    ShiftedBase,
    /// Plain sum b_low + b_high. Counts the base twice; kept for
    /// sensitivity studies.
    LayerSum,
}

/// Scale of the quality times in the cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QualityMode {
    /// T_i = level fraction * N frames. Default: keeps the quality term
    /// commensurate with per-session starvation counts.
    #[default]
    AbsoluteFrames,
    /// T_i = level fraction alone.
    Fraction,
}

/// Conversion and evaluation knobs shared by qoe_cost and compare_ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Frames per second; doubles as the display service rate mu.
    pub frame_rate: f64,
    /// Multiplier on the shifted base layer (SVC encoding overhead).
    pub svc_overhead: f64,
    pub conversion: PairBandwidth,
    pub quality_mode: QualityMode,
    /// Offset used for every BSC pair, clamped to N - x + 1.
    pub pair_offset_phi: u32,
    pub startup_x: u32,
    /// Starvation-count truncation for the expected-count term.
    pub j_max: u32,
    pub eps_trunc: f64,
    /// Replications for the quality fallback when rho >= 1.
    pub sim_fallback_runs: u32,
    pub sim_fallback_seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            frame_rate: 25.0,
            svc_overhead: 1.10,
            conversion: PairBandwidth::default(),
            quality_mode: QualityMode::default(),
            pair_offset_phi: 50,
            startup_x: 40,
            j_max: 64,
            eps_trunc: 1e-6,
            sim_fallback_runs: 256,
            sim_fallback_seed: 0x5eed,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_rate > 0.0) || !self.frame_rate.is_finite() {
            return Err(Error::Config(format!("frame_rate must be > 0, got {}", self.frame_rate)));
        }
        if !(self.svc_overhead >= 1.0) || !self.svc_overhead.is_finite() {
            return Err(Error::Config(format!(
                "svc_overhead must be >= 1, got {}",
                self.svc_overhead
            )));
        }
        if self.pair_offset_phi < 1 || self.startup_x < 1 {
            return Err(Error::Config(
                "pair_offset_phi and startup_x must be >= 1".into(),
            ));
        }
        if self.sim_fallback_runs < 1 {
            return Err(Error::Config("sim_fallback_runs must be >= 1".into()));
        }
        Ok(())
    }

    fn ballot_config(&self) -> BallotConfig {
        BallotConfig { j_max: self.j_max, eps_trunc: self.eps_trunc, ..BallotConfig::default() }
    }
}

/// Expected time to buffer the first x frames: x / lambda. lambda must be
/// positive.
pub fn initial_buffering_delay(x: u32, lambda: f64) -> f64 {
    x as f64 / lambda
}

/// Expected post-starvation pause: x optimal frames need x + phi - 1
/// arrivals.
pub fn rebuffering_delay(x: u32, phi: u32, lambda: f64) -> f64 {
    (x + phi - 1) as f64 / lambda
}

/// Starvation probability of the plain system without BSC: first emptiness
/// of the prefetch-x buffer anywhere before the last departure.
pub fn baseline_starvation_prob(n: u32, x: u32, p: f64, q: f64) -> f64 {
    (x..n).map(|k| first_emptiness_prob(k, x, p, q)).sum::<f64>().clamp(0.0, 1.0)
}

/// Outcome of an offset scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OffsetSelection {
    pub phi: u32,
    pub starvation_prob: f64,
    /// False when even phi = 1 exceeds the threshold and the returned
    /// phi = 1 is only a fallback.
    pub meets_threshold: bool,
}

/// Largest phi in [1, N - x + 1] whose starvation probability stays within
/// risk_threshold. The probability is not monotone in phi: it falls as the
/// shift protects late frames, then climbs back toward the baseline once
/// the early window [x, phi - 2] dominates, so the scan descends from
/// phi_max and stops at the first admissible value.
pub fn select_offset(
    n: u32,
    x: u32,
    rho: f64,
    risk_threshold: f64,
) -> Result<OffsetSelection> {
    if !(risk_threshold > 0.0 && risk_threshold <= 1.0) {
        return Err(Error::Config(format!(
            "risk_threshold must be in (0, 1], got {risk_threshold}"
        )));
    }
    if x < 1 || n < x {
        return Err(Error::Config(format!("need 1 <= startup_x <= file_size_n, got x = {x}, n = {n}")));
    }
    let phi_max = n - x + 1;
    for phi in (1..=phi_max).rev() {
        let params = SessionParams::new(rho, 1.0, n, x, phi)?;
        let p = starvation_prob(&params);
        if p <= risk_threshold {
            return Ok(OffsetSelection { phi, starvation_prob: p, meets_threshold: true });
        }
    }
    let params = SessionParams::new(rho, 1.0, n, x, 1)?;
    Ok(OffsetSelection {
        phi: 1,
        starvation_prob: starvation_prob(&params),
        meets_threshold: false,
    })
}

/// Where the quality fractions in a cost came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QualitySource {
    Analytic,
    Simulated,
}

/// Cost breakdown: total = delay_term + starvation_term - quality_term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QoeCost {
    pub total: f64,
    pub delay_term: f64,
    pub starvation_term: f64,
    /// The subtracted quality reward, nonnegative for nonnegative weights.
    pub quality_term: f64,
    pub e_starvations: f64,
    pub initial_delay: f64,
    pub f_low: f64,
    pub f_high: f64,
    pub quality_source: QualitySource,
}

/// Evaluate the QoE cost of playing a (b_low, b_high) pair under the given
/// session parameters. A single-rate configuration is the degenerate pair
/// (b, b) at phi = 1, where the level split cancels and only the level's
/// own weight matters.
pub fn qoe_cost(
    params: &SessionParams,
    weights: &QoEWeights,
    low: &LadderLevel,
    high: &LadderLevel,
    planner: &PlannerConfig,
) -> Result<QoeCost> {
    planner.validate()?;
    let initial_delay = initial_buffering_delay(params.startup_x, params.lambda);
    let pmf = starvation_count_pmf_with(params, planner.j_max, &planner.ballot_config())
        .map_err(|e| match e {
            Error::Truncation(msg) => Error::Truncation(format!(
                "starvation term for pair {}+{}: {msg}",
                high.label, low.label
            )),
            other => other,
        })?;
    let e_starvations = pmf.expected_count();

    let rho = params.rho();
    let (f_low, f_high, quality_source) = if rho < 1.0 {
        let dist = quasi_stationary(params.startup_x, params.offset_phi, rho).map_err(|e| {
            match e {
                Error::Regime(msg) => Error::Regime(format!(
                    "quality term for pair {}+{}: {msg}",
                    high.label, low.label
                )),
                other => other,
            }
        })?;
        let fl = dist.low_fraction();
        (fl, 1.0 - fl, QualitySource::Analytic)
    } else {
        // The quasi-stationary chain has no rho >= 1 regime; estimate the
        // optimal-time fraction from seeded replications instead.
        let arrivals = ArrivalProcess::poisson(params.lambda)?;
        let stats = replicate(
            params,
            &arrivals,
            planner.sim_fallback_runs,
            planner.sim_fallback_seed,
        )?;
        let fh = stats.mean_quality_fraction;
        (1.0 - fh, fh, QualitySource::Simulated)
    };

    let t_scale = match planner.quality_mode {
        QualityMode::AbsoluteFrames => params.file_size_n as f64,
        QualityMode::Fraction => 1.0,
    };
    let delay_term = weights.gamma1 * initial_delay;
    let starvation_term = weights.gamma2 * e_starvations;
    let quality_term = weights.gamma3 * (low.weight * f_low + high.weight * f_high) * t_scale;
    Ok(QoeCost {
        total: delay_term + starvation_term - quality_term,
        delay_term,
        starvation_term,
        quality_term,
        e_starvations,
        initial_delay,
        f_low,
        f_high,
        quality_source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateKind {
    Dash,
    BscPair,
}

/// One evaluated configuration in a ladder comparison.
#[derive(Debug, Clone, Serialize)]
pub struct RankedConfig {
    pub kind: CandidateKind,
    pub label: String,
    pub low_kbps: f64,
    pub high_kbps: f64,
    pub lambda: f64,
    pub rho: f64,
    pub phi: u32,
    pub cost: QoeCost,
}

/// Arrival rate of a BSC pair at the given throughput.
pub fn pair_lambda(
    low: &LadderLevel,
    high: &LadderLevel,
    throughput_kbps: f64,
    planner: &PlannerConfig,
) -> f64 {
    let eff_kbps = match planner.conversion {
        PairBandwidth::ShiftedBase => (high.kbps - low.kbps) + planner.svc_overhead * low.kbps,
        PairBandwidth::LayerSum => low.kbps + high.kbps,
    };
    planner.frame_rate * throughput_kbps / eff_kbps
}

/// Arrival rate of a single-rate stream at the given throughput.
pub fn dash_lambda(level: &LadderLevel, throughput_kbps: f64, planner: &PlannerConfig) -> f64 {
    planner.frame_rate * throughput_kbps / level.kbps
}

/// Evaluate every single-rate choice fitting under the throughput and every
/// BSC pair, returning configurations sorted by ascending cost. Candidates
/// are evaluated in parallel.
pub fn compare_ladder(
    ladder: &BitrateLadder,
    throughput_kbps: f64,
    n: u32,
    weights: &QoEWeights,
    planner: &PlannerConfig,
) -> Result<Vec<RankedConfig>> {
    planner.validate()?;
    if !(throughput_kbps > 0.0) || !throughput_kbps.is_finite() {
        return Err(Error::Config(format!(
            "throughput must be positive, got {throughput_kbps} Kbps"
        )));
    }
    let levels = ladder.levels();
    struct Candidate<'a> {
        kind: CandidateKind,
        low: &'a LadderLevel,
        high: &'a LadderLevel,
        lambda: f64,
        phi: u32,
    }
    let mut candidates = Vec::new();
    for level in levels.iter().filter(|l| l.kbps <= throughput_kbps) {
        candidates.push(Candidate {
            kind: CandidateKind::Dash,
            low: level,
            high: level,
            lambda: dash_lambda(level, throughput_kbps, planner),
            phi: 1,
        });
    }
    if candidates.is_empty() {
        return Err(Error::Config(format!(
            "no ladder bitrate fits under throughput {throughput_kbps} Kbps (lowest level is {} Kbps)",
            levels[0].kbps
        )));
    }
    let x = planner.startup_x;
    if n < x {
        return Err(Error::Config(format!(
            "file_size_n = {n} is below startup_x = {x}"
        )));
    }
    let pair_phi = planner.pair_offset_phi.min(n - x + 1);
    for (i, low) in levels.iter().enumerate() {
        for high in &levels[i + 1..] {
            candidates.push(Candidate {
                kind: CandidateKind::BscPair,
                low,
                high,
                lambda: pair_lambda(low, high, throughput_kbps, planner),
                phi: pair_phi,
            });
        }
    }

    let mut ranked: Vec<RankedConfig> = candidates
        .par_iter()
        .map(|c| {
            let params = SessionParams::new(c.lambda, planner.frame_rate, n, x, c.phi)?;
            let cost = qoe_cost(&params, weights, c.low, c.high, planner)?;
            let label = match c.kind {
                CandidateKind::Dash => c.low.label.clone(),
                CandidateKind::BscPair => format!("{}+{}", c.high.label, c.low.label),
            };
            Ok(RankedConfig {
                kind: c.kind,
                label,
                low_kbps: c.low.kbps,
                high_kbps: c.high.kbps,
                lambda: c.lambda,
                rho: c.lambda / planner.frame_rate,
                phi: c.phi,
                cost,
            })
        })
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| {
        a.cost.total.total_cmp(&b.cost.total).then_with(|| a.label.cmp(&b.label))
    });
    Ok(ranked)
}
