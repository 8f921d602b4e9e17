//! Quasi-stationary analysis of the quality-switching chain.
//!
//! State n = A - D tracks the last optimally-decodable frame against the
//! last displayed one. Negative states (down to -phi + 1) play base-layer
//! quality, nonnegative states play optimal quality, and n = -phi is the
//! absorbing starvation state. Between starvations the chain is a birth-death
//! process whose quasi-stationary distribution, absorption time and
//! time-in-level splits all have closed forms for rho < 1.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Tail mass below which the enumerated representation stops; everything
/// beyond is carried analytically.
const TAIL_TOL: f64 = 1e-9;

fn check_chain_args(x: u32, phi: u32) -> Result<()> {
    if x < 1 || phi < 1 {
        return Err(Error::Config(format!(
            "quality chain needs startup_x >= 1 and offset_phi >= 1, got x = {x}, phi = {phi}"
        )));
    }
    Ok(())
}

fn check_stable(lambda: f64, mu: f64) -> Result<f64> {
    if !(lambda >= 0.0) || !(mu > 0.0) || !lambda.is_finite() || !mu.is_finite() {
        return Err(Error::Config(format!(
            "rates must be finite with lambda >= 0 and mu > 0, got lambda = {lambda}, mu = {mu}"
        )));
    }
    let rho = lambda / mu;
    if rho >= 1.0 {
        return Err(Error::Regime(format!(
            "quasi-stationary forms need rho < 1, got rho = {rho}"
        )));
    }
    Ok(rho)
}

/// Quasi-stationary distribution over live states -phi+1 and above.
#[derive(Debug, Clone, Serialize)]
pub struct QuasiStationaryDist {
    /// Enumerated probabilities for states -phi+1 ..= tail_truncated_at.
    pub q: BTreeMap<i64, f64>,
    pub rho: f64,
    pub x: u32,
    pub phi: u32,
    /// Last enumerated state; the geometric remainder beyond it is
    /// tail_mass_analytic.
    pub tail_truncated_at: i64,
    pub tail_mass_analytic: f64,
}

impl QuasiStationaryDist {
    /// Closed-form probability of state j, valid for any j (not limited by
    /// the enumeration cutoff).
    pub fn prob(&self, j: i64) -> f64 {
        let (x, phi, rho) = (self.x as i64, self.phi as i64, self.rho);
        if j < 1 - phi {
            0.0
        } else if j <= x {
            (1.0 - rho.powi((j + phi) as i32)) / (phi + x) as f64
        } else {
            (1.0 - rho.powi((x + phi) as i32)) / (phi + x) as f64 * rho.powi((j - x) as i32)
        }
    }

    /// Enumerated mass plus the analytic tail; equals one up to rounding.
    pub fn total_mass(&self) -> f64 {
        self.q.values().sum::<f64>() + self.tail_mass_analytic
    }

    /// Fraction of quasi-stationary time spent in the base-layer states
    /// (j < 0).
    pub fn low_fraction(&self) -> f64 {
        let (phi, rho) = (self.phi as f64, self.rho);
        if self.phi == 1 {
            return 0.0;
        }
        let geo = if rho == 0.0 {
            0.0
        } else {
            rho * (1.0 - rho.powi(self.phi as i32 - 1)) / (1.0 - rho)
        };
        ((phi - 1.0) - geo) / (phi + self.x as f64)
    }

    /// Absolute residuals of the global balance equations, keyed by state.
    /// The row at the restart state x carries the extra re-entry inflow
    /// mu * q_{-phi+1}; every other live row is a plain birth-death row.
    pub fn balance_residuals(&self) -> BTreeMap<i64, f64> {
        let (x, rho) = (self.x as i64, self.rho);
        let lo = 1 - self.phi as i64;
        let mut out = BTreeMap::new();
        for j in lo..self.tail_truncated_at {
            // Rates normalized to mu = 1, lambda = rho.
            let inflow = if j == lo { 0.0 } else { rho * self.prob(j - 1) }
                + self.prob(j + 1)
                + if j == x { self.prob(lo) } else { 0.0 };
            let outflow = (1.0 + rho) * self.prob(j);
            out.insert(j, (inflow - outflow).abs());
        }
        out
    }
}

/// Quasi-stationary distribution of the quality chain. Requires rho < 1;
/// the simulator covers heavier loads empirically.
pub fn quasi_stationary(x: u32, phi: u32, rho: f64) -> Result<QuasiStationaryDist> {
    check_chain_args(x, phi)?;
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::Config(format!("rho must be finite and nonnegative, got {rho}")));
    }
    if rho >= 1.0 {
        return Err(Error::Regime(format!(
            "quasi-stationary distribution needs rho < 1, got rho = {rho}"
        )));
    }
    // Geometric coefficient of the above-x tail.
    let qgeo = (1.0 - rho.powi((x + phi) as i32)) / (phi + x) as f64;
    let tail_truncated_at = if rho == 0.0 {
        x as i64
    } else {
        let thresh = TAIL_TOL * (1.0 - rho) / qgeo;
        if thresh >= 1.0 {
            x as i64
        } else {
            x as i64 + (thresh.ln() / rho.ln()).ceil().max(1.0) as i64
        }
    };
    let tail_mass_analytic = if rho == 0.0 {
        0.0
    } else {
        qgeo * rho.powi((tail_truncated_at + 1 - x as i64) as i32) / (1.0 - rho)
    };
    let mut dist = QuasiStationaryDist {
        q: BTreeMap::new(),
        rho,
        x,
        phi,
        tail_truncated_at,
        tail_mass_analytic,
    };
    for j in (1 - phi as i64)..=tail_truncated_at {
        dist.q.insert(j, dist.prob(j));
    }
    Ok(dist)
}

/// Expected time from the restart level x to absorption at -phi:
/// (x + phi) / (mu - lambda).
pub fn absorption_time(x: u32, phi: u32, lambda: f64, mu: f64) -> Result<f64> {
    check_chain_args(x, phi)?;
    check_stable(lambda, mu)?;
    Ok((x + phi) as f64 / (mu - lambda))
}

/// Expected time at each quality level over one inter-starvation period,
/// plus the bitrate average they induce.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QualityTimes {
    pub t_low: f64,
    pub t_high: f64,
    pub b_avg: f64,
    pub e_tau: f64,
}

/// Split the expected absorption time into base-layer and optimal-quality
/// parts: E[S_i] = q_i * E[tau], summed over i < 0 and i >= 0, the latter
/// through the analytic geometric tail.
pub fn quality_times(
    x: u32,
    phi: u32,
    lambda: f64,
    mu: f64,
    b_low: f64,
    b_high: f64,
) -> Result<QualityTimes> {
    if !(b_low >= 0.0) || !(b_high >= 0.0) {
        return Err(Error::Config(format!(
            "bitrates must be nonnegative, got b_low = {b_low}, b_high = {b_high}"
        )));
    }
    let rho = check_stable(lambda, mu)?;
    let dist = quasi_stationary(x, phi, rho)?;
    let e_tau = absorption_time(x, phi, lambda, mu)?;
    let f_low = dist.low_fraction();
    // High-side mass summed analytically: states 0..=x in closed form plus
    // the geometric remainder above x.
    let (xf, phif) = (x as f64, phi as f64);
    let f_high_box = if rho == 0.0 {
        (xf + 1.0) / (phif + xf)
    } else {
        ((xf + 1.0) - rho.powi(phi as i32) * (1.0 - rho.powi(x as i32 + 1)) / (1.0 - rho))
            / (phif + xf)
    };
    let f_high_tail = if rho == 0.0 {
        0.0
    } else {
        (1.0 - rho.powi((x + phi) as i32)) / (phif + xf) * rho / (1.0 - rho)
    };
    let t_low = f_low * e_tau;
    let t_high = (f_high_box + f_high_tail) * e_tau;
    let b_avg = (t_low * b_low + t_high * b_high) / (t_low + t_high);
    Ok(QualityTimes { t_low, t_high, b_avg, e_tau })
}

/// Mean and variance of one optimal-quality spell, the busy period of the
/// M/M/1 queue embedded above state zero.
pub fn busy_period_stats(lambda: f64, mu: f64) -> Result<(f64, f64)> {
    let rho = check_stable(lambda, mu)?;
    let mean = 1.0 / (mu - lambda);
    let variance = (1.0 + rho) / (mu * mu * (1.0 - rho).powi(3));
    Ok((mean, variance))
}
