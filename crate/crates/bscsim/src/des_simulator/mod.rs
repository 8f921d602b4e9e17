//! Discrete-event simulation of BSC playback sessions.
//!
//! One session is a continuous-time state machine: packets arrive under a
//! pluggable process, each displayed frame holds the screen for an
//! exponential service time, and the BSC rules decide which frame is
//! displayable and at which quality. The replication harness runs seeded
//! independent sessions and aggregates empirical estimates; the `oracle`
//! submodule enumerates tiny instances exactly.

pub mod oracle;

pub use oracle::{enumerate_paths, enumerate_pmf, OracleResult, ENUMERATION_BUDGET_N};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stream_model::{displayable, SessionParams};

/// Frame-arrival process. Rates are per time unit, with one time unit equal
/// to the mean service time at mu = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalProcess {
    Poisson { rate: f64 },
    /// Inter-arrival times follow a logistic distribution truncated to
    /// positive values by rejection.
    Logistic { location: f64, scale: f64 },
    /// Exponential ON/OFF dwell phases; arrivals are Poisson at on_rate
    /// during ON and absent during OFF.
    OnOff { on_rate: f64, on_duration_mean: f64, off_duration_mean: f64 },
}

impl ArrivalProcess {
    pub fn poisson(rate: f64) -> Result<Self> {
        let p = ArrivalProcess::Poisson { rate };
        p.validate()?;
        Ok(p)
    }

    pub fn logistic(location: f64, scale: f64) -> Result<Self> {
        let p = ArrivalProcess::Logistic { location, scale };
        p.validate()?;
        Ok(p)
    }

    /// Logistic defaults for a target mean rate: location = 1/lambda and
    /// scale = location/8, which keeps the mass at negative samples around
    /// 3e-4 so the truncation barely shifts the mean.
    pub fn logistic_for_rate(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("logistic target rate must be > 0, got {lambda}")));
        }
        let location = 1.0 / lambda;
        Self::logistic(location, location / 8.0)
    }

    pub fn on_off(on_rate: f64, on_duration_mean: f64, off_duration_mean: f64) -> Result<Self> {
        let p = ArrivalProcess::OnOff { on_rate, on_duration_mean, off_duration_mean };
        p.validate()?;
        Ok(p)
    }

    /// ON/OFF defaults for a target mean rate: duty cycle 0.7 with dwell
    /// means 7 and 3, burst rate lambda/0.7.
    pub fn on_off_for_rate(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("on/off target rate must be > 0, got {lambda}")));
        }
        Self::on_off(lambda / 0.7, 7.0, 3.0)
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ArrivalProcess::Poisson { rate } => rate > 0.0 && rate.is_finite(),
            ArrivalProcess::Logistic { location, scale } => {
                location > 0.0 && scale > 0.0 && location.is_finite() && scale.is_finite()
            }
            ArrivalProcess::OnOff { on_rate, on_duration_mean, off_duration_mean } => {
                on_rate > 0.0
                    && on_duration_mean > 0.0
                    && off_duration_mean > 0.0
                    && on_rate.is_finite()
                    && on_duration_mean.is_finite()
                    && off_duration_mean.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("arrival process parameters must be positive: {self:?}")))
        }
    }

    /// Long-run mean arrival rate (for the logistic case, up to the
    /// negligible truncation correction).
    pub fn mean_rate(&self) -> f64 {
        match *self {
            ArrivalProcess::Poisson { rate } => rate,
            ArrivalProcess::Logistic { location, .. } => 1.0 / location,
            ArrivalProcess::OnOff { on_rate, on_duration_mean, off_duration_mean } => {
                on_rate * on_duration_mean / (on_duration_mean + off_duration_mean)
            }
        }
    }
}

/// Stateful arrival-time generator. ON/OFF phase boundaries persist between
/// draws; sessions begin at the start of an ON burst.
struct ArrivalSampler {
    process: ArrivalProcess,
    on: bool,
    phase_end: f64,
}

impl ArrivalSampler {
    fn new(process: &ArrivalProcess, rng: &mut ChaCha8Rng) -> ArrivalSampler {
        let (on, phase_end) = match *process {
            ArrivalProcess::OnOff { on_duration_mean, .. } => {
                (true, draw_exp(rng, 1.0 / on_duration_mean))
            }
            _ => (true, f64::INFINITY),
        };
        ArrivalSampler { process: *process, on, phase_end }
    }

    fn next_after(&mut self, rng: &mut ChaCha8Rng, now: f64) -> f64 {
        match self.process {
            ArrivalProcess::Poisson { rate } => now + draw_exp(rng, rate),
            ArrivalProcess::Logistic { location, scale } => {
                now + draw_positive_logistic(rng, location, scale)
            }
            ArrivalProcess::OnOff { on_rate, on_duration_mean, off_duration_mean } => {
                let mut cur = now;
                loop {
                    if self.on {
                        let candidate = cur + draw_exp(rng, on_rate);
                        if candidate <= self.phase_end {
                            return candidate;
                        }
                        cur = self.phase_end;
                        self.on = false;
                        self.phase_end = cur + draw_exp(rng, 1.0 / off_duration_mean);
                    } else {
                        cur = self.phase_end;
                        self.on = true;
                        self.phase_end = cur + draw_exp(rng, 1.0 / on_duration_mean);
                    }
                }
            }
        }
    }
}

fn draw_exp(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    Exp::new(rate).expect("positive rate").sample(rng)
}

fn draw_positive_logistic(rng: &mut ChaCha8Rng, location: f64, scale: f64) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u <= 0.0 || u >= 1.0 {
            continue;
        }
        let v = location + scale * (u / (1.0 - u)).ln();
        if v > 0.0 {
            return v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityLevel {
    Low,
    Optimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityInterval {
    pub start: f64,
    pub end: f64,
    pub level: QualityLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrival,
    Display,
    Starvation,
    RebufferStart,
    RebufferEnd,
    QualitySwitch,
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::Arrival => "arrival",
            EventKind::Display => "display",
            EventKind::Starvation => "starvation",
            EventKind::RebufferStart => "rebuffer_start",
            EventKind::RebufferEnd => "rebuffer_end",
            EventKind::QualitySwitch => "quality_switch",
        }
    }
}

/// One simulation event. buffer_level counts displayable frames not yet
/// displayed (bases available through A + phi - 1); state_n is A - D, the
/// quality-chain coordinate, and can go negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEvent {
    pub time: f64,
    pub kind: EventKind,
    pub buffer_level: i64,
    pub state_n: i64,
}

/// Complete record of one simulated session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    pub starvation_count: u32,
    /// (departure index, time) per starvation, in order.
    pub starvation_epochs: Vec<(u32, f64)>,
    pub initial_delay: f64,
    pub rebuffer_delays: Vec<f64>,
    /// Maximal constant-quality playback stretches; rebuffering gaps
    /// separate them.
    pub quality_intervals: Vec<QualityInterval>,
    pub completed: bool,
    pub end_time: f64,
    /// Per-event log; empty for the lean profile used by `replicate`.
    pub events: Vec<TraceEvent>,
}

impl SessionTrace {
    /// Playback time spent at each level, (low, optimal).
    pub fn quality_times(&self) -> (f64, f64) {
        let mut low = 0.0;
        let mut high = 0.0;
        for iv in &self.quality_intervals {
            match iv.level {
                QualityLevel::Low => low += iv.end - iv.start,
                QualityLevel::Optimal => high += iv.end - iv.start,
            }
        }
        (low, high)
    }

    pub fn optimal_fraction(&self) -> f64 {
        let (low, high) = self.quality_times();
        high / (low + high)
    }
}

/// Simulate one session, returning the full event log.
pub fn simulate_session(
    params: &SessionParams,
    arrivals: &ArrivalProcess,
    seed: u64,
) -> SessionTrace {
    run_session(params, arrivals, seed, true)
}

fn run_session(
    params: &SessionParams,
    arrivals: &ArrivalProcess,
    seed: u64,
    record_events: bool,
) -> SessionTrace {
    arrivals.validate().expect("validated at construction");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampler = ArrivalSampler::new(arrivals, &mut rng);
    let n = params.file_size_n;
    let x = params.startup_x;
    let phi = params.offset_phi;
    let mu = params.mu;

    let mut t = 0.0f64;
    let mut a: u32 = 0;
    let mut d: u32 = 0;
    let mut trace = SessionTrace {
        starvation_count: 0,
        starvation_epochs: Vec::new(),
        initial_delay: 0.0,
        rebuffer_delays: Vec::new(),
        quality_intervals: Vec::new(),
        completed: false,
        end_time: 0.0,
        events: Vec::new(),
    };
    let mut open_interval: Option<(f64, QualityLevel)> = None;

    macro_rules! log_event {
        ($kind:expr, $time:expr) => {
            if record_events {
                let state_n = a as i64 - d as i64;
                trace.events.push(TraceEvent {
                    time: $time,
                    kind: $kind,
                    buffer_level: (a.min(n) as i64 + phi as i64 - 1).min(n as i64) - d as i64,
                    state_n,
                });
            }
        };
    }

    let mut next_arrival = sampler.next_after(&mut rng, t);
    // Prefetch: playback starts once x frames (all optimal) are buffered.
    while a < x {
        t = next_arrival;
        a += 1;
        log_event!(EventKind::Arrival, t);
        next_arrival =
            if a < n { sampler.next_after(&mut rng, t) } else { f64::INFINITY };
    }
    trace.initial_delay = t;

    while d < n {
        let frame = d + 1;
        if !displayable(frame, a, phi) {
            // Starvation right after the d-th departure; rebuffer until x
            // optimal frames are available again or the file is in.
            trace.starvation_count += 1;
            trace.starvation_epochs.push((d, t));
            log_event!(EventKind::Starvation, t);
            if let Some((start, level)) = open_interval.take() {
                trace.quality_intervals.push(QualityInterval { start, end: t, level });
            }
            log_event!(EventKind::RebufferStart, t);
            let rebuffer_start = t;
            while (a as i64 - d as i64) < x as i64 && a < n {
                t = next_arrival;
                a += 1;
                log_event!(EventKind::Arrival, t);
                next_arrival =
                    if a < n { sampler.next_after(&mut rng, t) } else { f64::INFINITY };
            }
            trace.rebuffer_delays.push(t - rebuffer_start);
            log_event!(EventKind::RebufferEnd, t);
            continue;
        }

        // Quality is fixed at display start: optimal iff the enhancement
        // (packet `frame` itself) has arrived.
        let level = if a >= frame { QualityLevel::Optimal } else { QualityLevel::Low };
        match open_interval {
            None => open_interval = Some((t, level)),
            Some((start, prev)) if prev != level => {
                trace.quality_intervals.push(QualityInterval { start, end: t, level: prev });
                open_interval = Some((t, level));
                log_event!(EventKind::QualitySwitch, t);
            }
            Some(_) => {}
        }

        let display_end = t + draw_exp(&mut rng, mu);
        while next_arrival <= display_end {
            t = next_arrival;
            a += 1;
            log_event!(EventKind::Arrival, t);
            next_arrival =
                if a < n { sampler.next_after(&mut rng, t) } else { f64::INFINITY };
        }
        t = display_end;
        d += 1;
        log_event!(EventKind::Display, t);
    }

    if let Some((start, level)) = open_interval.take() {
        trace.quality_intervals.push(QualityInterval { start, end: t, level });
    }
    trace.end_time = t;
    trace.completed = true;
    trace
}

/// Aggregated estimates over independent replications. Standard errors are
/// None when a single run leaves them undefined.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalStats {
    pub runs: u32,
    pub starvation_prob_hat: f64,
    pub starvation_prob_se: Option<f64>,
    /// pmf_hat[j] = fraction of runs with exactly j starvations.
    pub pmf_hat: Vec<f64>,
    pub pmf_se: Vec<Option<f64>>,
    /// Mean fraction of playback time at optimal quality.
    pub mean_quality_fraction: f64,
    pub quality_fraction_se: Option<f64>,
    /// Mean total rebuffering time per session.
    pub mean_rebuffer_time: f64,
    pub rebuffer_time_se: Option<f64>,
    pub mean_initial_delay: f64,
    pub initial_delay_se: Option<f64>,
}

struct SessionSummary {
    count: u32,
    initial_delay: f64,
    rebuffer_total: f64,
    optimal_fraction: f64,
}

/// Run `runs` seeded sessions (seed = base_seed + index) and aggregate.
/// Sessions execute in parallel; the reduction is index-ordered and
/// deterministic.
pub fn replicate(
    params: &SessionParams,
    arrivals: &ArrivalProcess,
    runs: u32,
    base_seed: u64,
) -> Result<EmpiricalStats> {
    if runs < 1 {
        return Err(Error::Config("replicate needs runs >= 1".into()));
    }
    arrivals.validate()?;
    let summaries: Vec<SessionSummary> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let trace = run_session(params, arrivals, base_seed.wrapping_add(i as u64), false);
            SessionSummary {
                count: trace.starvation_count,
                initial_delay: trace.initial_delay,
                rebuffer_total: trace.rebuffer_delays.iter().sum(),
                optimal_fraction: trace.optimal_fraction(),
            }
        })
        .collect();

    let nf = runs as f64;
    let max_count = summaries.iter().map(|s| s.count).max().unwrap_or(0) as usize;
    let mut pmf_hat = vec![0.0; max_count + 1];
    for s in &summaries {
        pmf_hat[s.count as usize] += 1.0 / nf;
    }
    let binom_se = |p: f64| {
        if runs > 1 {
            Some((p * (1.0 - p) / nf).sqrt())
        } else {
            None
        }
    };
    let pmf_se = pmf_hat.iter().map(|&p| binom_se(p)).collect();
    let starvation_prob_hat = 1.0 - pmf_hat[0];

    let (mean_quality_fraction, quality_fraction_se) =
        mean_se(summaries.iter().map(|s| s.optimal_fraction));
    let (mean_rebuffer_time, rebuffer_time_se) =
        mean_se(summaries.iter().map(|s| s.rebuffer_total));
    let (mean_initial_delay, initial_delay_se) =
        mean_se(summaries.iter().map(|s| s.initial_delay));

    Ok(EmpiricalStats {
        runs,
        starvation_prob_hat,
        starvation_prob_se: binom_se(starvation_prob_hat),
        pmf_hat,
        pmf_se,
        mean_quality_fraction,
        quality_fraction_se,
        mean_rebuffer_time,
        rebuffer_time_se,
        mean_initial_delay,
        initial_delay_se,
    })
}

fn mean_se(vals: impl Iterator<Item = f64> + Clone) -> (f64, Option<f64>) {
    let n = vals.clone().count() as f64;
    let mean = vals.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, None);
    }
    let var = vals.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

/// First-passage time of the quality chain from the restart level x down to
/// absorption at -phi, one seeded sample path.
pub fn simulate_chain_absorption(
    x: u32,
    phi: u32,
    lambda: f64,
    mu: f64,
    seed: u64,
) -> Result<f64> {
    if x < 1 || phi < 1 {
        return Err(Error::Config(format!("chain needs x >= 1 and phi >= 1, got {x}, {phi}")));
    }
    if !(mu > lambda) {
        return Err(Error::Regime(format!(
            "absorption is not integrable unless mu > lambda, got lambda = {lambda}, mu = {mu}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = lambda + mu;
    let up_prob = lambda / total;
    let mut state = x as i64;
    let target = -(phi as i64);
    let mut t = 0.0;
    while state > target {
        t += draw_exp(&mut rng, total);
        if rng.random::<f64>() < up_prob {
            state += 1;
        } else {
            state -= 1;
        }
    }
    Ok(t)
}

/// Durations of optimal-quality spells: each starts when the chain enters
/// state 0 and ends on first passage to -1.
pub fn simulate_quality_spells(
    lambda: f64,
    mu: f64,
    count: u32,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(mu > lambda) || !(lambda >= 0.0) {
        return Err(Error::Regime(format!(
            "spell lengths need 0 <= lambda < mu, got lambda = {lambda}, mu = {mu}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = lambda + mu;
    let up_prob = lambda / total;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let mut state = 0i64;
        let mut t = 0.0;
        while state >= 0 {
            t += draw_exp(&mut rng, total);
            if rng.random::<f64>() < up_prob {
                state += 1;
            } else {
                state -= 1;
            }
        }
        out.push(t);
    }
    Ok(out)
}
