//! Batch command-line surface: JSON config plus flag overrides, numeric
//! sweeps, and machine-readable CSV/JSON output.
//!
//! Every output embeds the resolved config (sweep spec included) and the
//! toolkit version; re-running that config reproduces the data section
//! byte for byte. Nothing here depends on wall-clock time or unseeded
//! randomness.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::ballot_analysis::{
    pgf_evaluate, starvation_count_pmf_with, starvation_prob_with, BallotConfig, PhiBound,
};
use crate::des_simulator::oracle::enumerate_paths;
use crate::des_simulator::{replicate, simulate_session, ArrivalProcess};
use crate::error::{Error, Result};
use crate::qoe_planner::{
    baseline_starvation_prob, compare_ladder, select_offset, BitrateLadder, CandidateKind,
    LadderLevel, PairBandwidth, PlannerConfig, QoEWeights, QualityMode, QualitySource,
};
use crate::quality_markov::{busy_period_stats, quality_times, quasi_stationary};
use crate::stream_model::SessionParams;
use crate::VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalKind {
    #[default]
    Poisson,
    Logistic,
    #[value(name = "on_off")]
    OnOff,
}

impl ArrivalKind {
    fn label(&self) -> &'static str {
        match self {
            ArrivalKind::Poisson => "poisson",
            ArrivalKind::Logistic => "logistic",
            ArrivalKind::OnOff => "on_off",
        }
    }
}

/// CLI mirror of the analytic boundary choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhiBoundArg {
    Display,
    Proof,
}

impl From<PhiBoundArg> for PhiBound {
    fn from(v: PhiBoundArg) -> PhiBound {
        match v {
            PhiBoundArg::Display => PhiBound::Display,
            PhiBoundArg::Proof => PhiBound::Proof,
        }
    }
}

/// Ladder rung as configured; weight defaults to kbps / max kbps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderRung {
    pub label: String,
    pub kbps: f64,
    #[serde(default)]
    pub weight: Option<f64>,
}

/// Fully resolved run configuration. Serializes to the config echo embedded
/// in every output; a file holding that echo reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Arrival rate; when absent, rho * mu.
    pub lambda: Option<f64>,
    pub mu: f64,
    pub rho: f64,
    pub file_size_n: u32,
    pub startup_x: u32,
    pub offset_phi: u32,
    pub arrival: ArrivalKind,
    /// Explicit logistic parameters; both or neither.
    pub arrival_location: Option<f64>,
    pub arrival_scale: Option<f64>,
    /// Explicit ON/OFF parameters; all three or none.
    pub arrival_on_rate: Option<f64>,
    pub arrival_on_mean: Option<f64>,
    pub arrival_off_mean: Option<f64>,
    pub runs: u32,
    pub seed: u64,
    pub j_max: u32,
    pub eps_trunc: f64,
    pub phi_bound: PhiBound,
    pub weights: QoEWeights,
    /// None selects the standard 240p..1080p ladder.
    pub ladder: Option<Vec<LadderRung>>,
    pub throughput_kbps: f64,
    pub frame_rate: f64,
    pub svc_overhead: f64,
    pub conversion: PairBandwidth,
    pub quality_mode: QualityMode,
    pub pair_offset_phi: u32,
    pub sim_fallback_runs: u32,
    pub sim_fallback_seed: u64,
    pub risk_threshold: f64,
    /// Pair evaluated by the quality command.
    pub pair_low_kbps: f64,
    pub pair_high_kbps: f64,
    /// Append the event log of one session (base seed) to simulate output.
    pub emit_trace: bool,
    pub sweep: Option<String>,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lambda: None,
            mu: 1.0,
            rho: 0.95,
            file_size_n: 1000,
            startup_x: 40,
            offset_phi: 50,
            arrival: ArrivalKind::Poisson,
            arrival_location: None,
            arrival_scale: None,
            arrival_on_rate: None,
            arrival_on_mean: None,
            arrival_off_mean: None,
            runs: 4000,
            seed: 1,
            j_max: 32,
            eps_trunc: 1e-6,
            phi_bound: PhiBound::Display,
            weights: QoEWeights::default(),
            ladder: None,
            throughput_kbps: 2200.0,
            frame_rate: 25.0,
            svc_overhead: 1.10,
            conversion: PairBandwidth::default(),
            quality_mode: QualityMode::default(),
            pair_offset_phi: 50,
            sim_fallback_runs: 256,
            sim_fallback_seed: 0x5eed,
            risk_threshold: 0.01,
            pair_low_kbps: 1000.0,
            pair_high_kbps: 2500.0,
            emit_trace: false,
            sweep: None,
            format: OutputFormat::Csv,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn effective_lambda(&self) -> f64 {
        self.lambda.unwrap_or(self.rho * self.mu)
    }

    pub fn effective_rho(&self) -> f64 {
        self.effective_lambda() / self.mu
    }

    pub fn session_params(&self) -> Result<SessionParams> {
        SessionParams::new(
            self.effective_lambda(),
            self.mu,
            self.file_size_n,
            self.startup_x,
            self.offset_phi,
        )
    }

    pub fn ballot_config(&self) -> BallotConfig {
        BallotConfig {
            phi_bound: self.phi_bound,
            j_max: self.j_max,
            eps_trunc: self.eps_trunc,
            ..BallotConfig::default()
        }
    }

    pub fn planner(&self) -> PlannerConfig {
        PlannerConfig {
            frame_rate: self.frame_rate,
            svc_overhead: self.svc_overhead,
            conversion: self.conversion,
            quality_mode: self.quality_mode,
            pair_offset_phi: self.pair_offset_phi,
            startup_x: self.startup_x,
            // Low-rho pairs can carry dozens of starvations; let the
            // planner run past the tabulation cap.
            j_max: self.j_max.max(64),
            eps_trunc: self.eps_trunc,
            sim_fallback_runs: self.sim_fallback_runs,
            sim_fallback_seed: self.sim_fallback_seed,
        }
    }

    pub fn arrival_process(&self) -> Result<ArrivalProcess> {
        let lam = self.effective_lambda();
        match self.arrival {
            ArrivalKind::Poisson => ArrivalProcess::poisson(lam),
            ArrivalKind::Logistic => match (self.arrival_location, self.arrival_scale) {
                (Some(l), Some(s)) => ArrivalProcess::logistic(l, s),
                (None, None) => ArrivalProcess::logistic_for_rate(lam),
                _ => Err(Error::Config(
                    "arrival_location and arrival_scale must be given together".into(),
                )),
            },
            ArrivalKind::OnOff => {
                match (self.arrival_on_rate, self.arrival_on_mean, self.arrival_off_mean) {
                    (Some(r), Some(on), Some(off)) => ArrivalProcess::on_off(r, on, off),
                    (None, None, None) => ArrivalProcess::on_off_for_rate(lam),
                    _ => Err(Error::Config(
                        "arrival_on_rate, arrival_on_mean and arrival_off_mean must be given together"
                            .into(),
                    )),
                }
            }
        }
    }

    pub fn build_ladder(&self) -> Result<BitrateLadder> {
        match &self.ladder {
            None => Ok(BitrateLadder::standard()),
            Some(rungs) => {
                let max = rungs.iter().map(|r| r.kbps).fold(f64::NAN, f64::max);
                BitrateLadder::new(
                    rungs
                        .iter()
                        .map(|r| LadderLevel {
                            label: r.label.clone(),
                            kbps: r.kbps,
                            weight: r.weight.unwrap_or(r.kbps / max),
                        })
                        .collect(),
                )
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::Config(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::Config(format!("rho must be finite and >= 0, got {}", self.rho)));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::Config(format!("lambda must be positive, got {l}")));
            }
        }
        if !(self.eps_trunc > 0.0 && self.eps_trunc < 1.0) {
            return Err(Error::Config(format!(
                "eps_trunc must be in (0, 1), got {}",
                self.eps_trunc
            )));
        }
        if self.file_size_n < 1 {
            return Err(Error::Config("file_size_n must be >= 1".into()));
        }
        if self.startup_x < 1 {
            return Err(Error::Config("startup_x must be >= 1".into()));
        }
        if self.offset_phi < 1 {
            return Err(Error::Config("offset_phi must be >= 1".into()));
        }
        if self.j_max < 1 {
            return Err(Error::Config("j_max must be >= 1".into()));
        }
        if self.runs < 1 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if !(self.risk_threshold > 0.0 && self.risk_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "risk_threshold must be in (0, 1], got {}",
                self.risk_threshold
            )));
        }
        QoEWeights::new(self.weights.gamma1, self.weights.gamma2, self.weights.gamma3)?;
        self.planner().validate()
    }
}

#[derive(Debug, Parser)]
#[command(name = "bscsim", version = VERSION, about = "BSC streaming QoE analysis toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config file; flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output path (stdout when absent).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub runs: Option<u32>,
    /// FIELD=START:STOP:STEP over a numeric config field.
    #[arg(long, global = true, value_name = "SPEC")]
    pub sweep: Option<String>,
    /// Early-starvation window boundary in the large-offset analysis.
    #[arg(long = "phi-bound", global = true, value_enum)]
    pub phi_bound: Option<PhiBoundArg>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    #[arg(long = "file-size-n", global = true, value_name = "N")]
    pub file_size_n: Option<u32>,
    #[arg(long = "startup-x", global = true, value_name = "X")]
    pub startup_x: Option<u32>,
    #[arg(long = "offset-phi", global = true, value_name = "PHI")]
    pub offset_phi: Option<u32>,
    #[arg(long, global = true, value_enum)]
    pub arrival: Option<ArrivalKind>,
    #[arg(long = "throughput-kbps", global = true)]
    pub throughput_kbps: Option<f64>,
    #[arg(long = "risk-threshold", global = true)]
    pub risk_threshold: Option<f64>,
    /// Append one session's event log to simulate output.
    #[arg(long = "emit-trace", global = true)]
    pub emit_trace: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Starvation probability, count pmf, and p.g.f. samples.
    Analyze,
    /// Quality-level time split and busy-period statistics.
    Quality,
    /// Seeded Monte Carlo replications with empirical estimates.
    Simulate,
    /// Rank DASH single rates against BSC pairs by QoE cost.
    Compare,
    /// Exact small-instance pmf from path enumeration.
    Oracle,
    /// Largest offset keeping starvation risk within threshold.
    Offset,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Quality => "quality",
            Command::Simulate => "simulate",
            Command::Compare => "compare",
            Command::Oracle => "oracle",
            Command::Offset => "offset",
        }
    }
}

/// Load the config file (or defaults) and apply flag overrides.
pub fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg: RunConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("config file {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("config file {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = cli.lambda {
        cfg.lambda = Some(v);
    }
    if let Some(v) = cli.mu {
        cfg.mu = v;
    }
    if let Some(v) = cli.rho {
        // An explicit ratio displaces any configured absolute rate.
        cfg.rho = v;
        cfg.lambda = None;
    }
    if let Some(v) = cli.file_size_n {
        cfg.file_size_n = v;
    }
    if let Some(v) = cli.startup_x {
        cfg.startup_x = v;
    }
    if let Some(v) = cli.offset_phi {
        cfg.offset_phi = v;
    }
    if let Some(v) = cli.arrival {
        cfg.arrival = v;
    }
    if let Some(v) = cli.throughput_kbps {
        cfg.throughput_kbps = v;
    }
    if let Some(v) = cli.risk_threshold {
        cfg.risk_threshold = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.runs {
        cfg.runs = v;
    }
    if let Some(v) = cli.format {
        cfg.format = v;
    }
    if let Some(v) = &cli.out {
        cfg.out = Some(v.clone());
    }
    if let Some(v) = &cli.sweep {
        cfg.sweep = Some(v.clone());
    }
    if let Some(v) = cli.phi_bound {
        cfg.phi_bound = v.into();
    }
    if cli.emit_trace {
        cfg.emit_trace = true;
    }
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SweepField {
    FileSizeN,
    StartupX,
    OffsetPhi,
    Rho,
    Lambda,
    ThroughputKbps,
    RiskThreshold,
    Runs,
}

impl SweepField {
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "file_size_n" => SweepField::FileSizeN,
            "startup_x" => SweepField::StartupX,
            "offset_phi" => SweepField::OffsetPhi,
            "rho" => SweepField::Rho,
            "lambda" => SweepField::Lambda,
            "throughput_kbps" => SweepField::ThroughputKbps,
            "risk_threshold" => SweepField::RiskThreshold,
            "runs" => SweepField::Runs,
            other => {
                return Err(Error::Config(format!(
                    "unknown sweep field {other}; supported: file_size_n, startup_x, \
                     offset_phi, rho, lambda, throughput_kbps, risk_threshold, runs"
                )))
            }
        })
    }

    fn is_integer(&self) -> bool {
        matches!(
            self,
            SweepField::FileSizeN | SweepField::StartupX | SweepField::OffsetPhi | SweepField::Runs
        )
    }

    fn apply(&self, cfg: &mut RunConfig, v: f64) {
        match self {
            SweepField::FileSizeN => cfg.file_size_n = v as u32,
            SweepField::StartupX => cfg.startup_x = v as u32,
            SweepField::OffsetPhi => cfg.offset_phi = v as u32,
            SweepField::Rho => {
                cfg.rho = v;
                cfg.lambda = None;
            }
            SweepField::Lambda => cfg.lambda = Some(v),
            SweepField::ThroughputKbps => cfg.throughput_kbps = v,
            SweepField::RiskThreshold => cfg.risk_threshold = v,
            SweepField::Runs => cfg.runs = v as u32,
        }
    }
}

#[derive(Debug, Clone)]
struct Sweep {
    field: SweepField,
    values: Vec<f64>,
}

fn parse_sweep(spec: &str) -> Result<Sweep> {
    let bad = |why: &str| Error::Config(format!("sweep spec {spec:?}: {why}"));
    let (name, range) = spec.split_once('=').ok_or_else(|| bad("expected FIELD=START:STOP:STEP"))?;
    let field = SweepField::parse(name.trim())?;
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err(bad("expected START:STOP:STEP"));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad("non-numeric bound")))
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || !step.is_finite() {
        return Err(bad("step must be positive"));
    }
    if stop < start {
        return Err(bad("stop must be >= start"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as u64 + 1;
    if count > 10_000 {
        return Err(bad("more than 10000 sweep points"));
    }
    let values: Vec<f64> = (0..count).map(|i| start + i as f64 * step).collect();
    if field.is_integer() {
        for v in &values {
            if v.fract().abs() > 1e-9 || *v < 0.0 {
                return Err(bad("field takes nonnegative integers"));
            }
        }
    }
    Ok(Sweep { field, values })
}

impl Sweep {
    fn expand(&self, base: &RunConfig) -> Vec<RunConfig> {
        self.values
            .iter()
            .map(|v| {
                let mut c = base.clone();
                self.field.apply(&mut c, *v);
                c
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Cell {
    UInt(u64),
    Float(f64),
    OptFloat(Option<f64>),
    Str(String),
    Bool(bool),
    /// Rendered as a ';'-joined list in CSV and an array in JSON.
    FloatList(Vec<Option<f64>>),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::UInt(v) => v.to_string(),
            Cell::Float(v) => fmt_sig12(*v),
            Cell::OptFloat(None) => String::new(),
            Cell::OptFloat(Some(v)) => fmt_sig12(*v),
            Cell::Str(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::FloatList(vs) => {
                let mut s = String::new();
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        s.push(';');
                    }
                    if let Some(v) = v {
                        let _ = write!(s, "{}", fmt_sig12(*v));
                    }
                }
                s
            }
        }
    }

    fn json(&self) -> serde_json::Value {
        use serde_json::Value;
        let num = |v: f64| {
            serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
        };
        match self {
            Cell::UInt(v) => Value::Number((*v).into()),
            Cell::Float(v) => num(*v),
            Cell::OptFloat(None) => Value::Null,
            Cell::OptFloat(Some(v)) => num(*v),
            Cell::Str(s) => Value::String(s.clone()),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::FloatList(vs) => {
                Value::Array(vs.iter().map(|v| v.map(num).unwrap_or(Value::Null)).collect())
            }
        }
    }
}

struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

/// Round to 12 significant digits and print the shortest representation
/// that round-trips.
fn fmt_sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float");
    rounded.to_string()
}

/// Apply the 12-significant-digit policy to every float in a JSON tree.
fn round_json(v: &mut serde_json::Value) {
    use serde_json::Value;
    match v {
        Value::Number(n) if n.is_f64() => {
            let f = n.as_f64().expect("checked");
            let rounded: f64 = if f == 0.0 || !f.is_finite() {
                f
            } else {
                format!("{f:.11e}").parse().expect("formatted float")
            };
            if let Some(nn) = serde_json::Number::from_f64(rounded) {
                *v = Value::Number(nn);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

fn render_csv(
    command: &str,
    config_line: &str,
    comments: &[String],
    table: &Table,
    trace: Option<&Table>,
) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "# bscsim {VERSION} {command}")?;
    writeln!(out, "# config: {config_line}")?;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let into_inner =
        |w: csv::Writer<Vec<u8>>| w.into_inner().map_err(|e| Error::Format(e.to_string()));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.columns).map_err(|e| Error::Format(e.to_string()))?;
    for row in &table.rows {
        w.write_record(row.iter().map(|c| c.csv()))
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    let mut out = into_inner(w)?;
    if let Some(tr) = trace {
        writeln!(out, "# trace")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&tr.columns).map_err(|e| Error::Format(e.to_string()))?;
        for row in &tr.rows {
            w.write_record(row.iter().map(|c| c.csv()))
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        out = into_inner(w)?;
    }
    Ok(out)
}

fn render_json(
    command: &str,
    config_value: serde_json::Value,
    extras: serde_json::Map<String, serde_json::Value>,
    table: &Table,
    trace: Option<&Table>,
) -> Result<Vec<u8>> {
    use serde_json::Value;
    let table_json = |t: &Table| {
        Value::Array(
            t.rows
                .iter()
                .map(|row| {
                    let mut obj = serde_json::Map::new();
                    for (col, cell) in t.columns.iter().zip(row) {
                        obj.insert(col.clone(), cell.json());
                    }
                    Value::Object(obj)
                })
                .collect(),
        )
    };
    let mut root = serde_json::Map::new();
    root.insert("version".into(), Value::String(VERSION.into()));
    root.insert("command".into(), Value::String(command.into()));
    // The config echo must reproduce the run exactly, so it keeps full
    // precision; only computed data obeys the 12-digit policy.
    root.insert("config".into(), config_value);
    let mut data = table_json(table);
    round_json(&mut data);
    root.insert("data".into(), data);
    for (k, mut v) in extras {
        round_json(&mut v);
        root.insert(k, v);
    }
    if let Some(tr) = trace {
        let mut t = table_json(tr);
        round_json(&mut t);
        root.insert("trace".into(), t);
    }
    let mut bytes = serde_json::to_vec_pretty(&Value::Object(root))
        .map_err(|e| Error::Format(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn analyze_columns(cfg: &RunConfig) -> Vec<String> {
    let mut cols: Vec<String> = [
        "n", "rho", "x", "phi", "p_starv", "baseline_p_starv", "e_starvations", "pgf_0_5",
        "pgf_0_9", "pgf_1_0",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend((0..=cfg.j_max).map(|j| format!("p_s{j}")));
    cols
}

fn analyze_rows(cfg: &RunConfig) -> Result<Vec<Vec<Cell>>> {
    let params = cfg.session_params()?;
    let bc = cfg.ballot_config();
    let pmf = starvation_count_pmf_with(&params, cfg.j_max, &bc)?;
    let p_starv = starvation_prob_with(&params, &bc);
    let (p, q) = params.event_probs();
    let baseline = baseline_starvation_prob(cfg.file_size_n, cfg.startup_x, p, q);
    let mut row = vec![
        Cell::UInt(cfg.file_size_n.into()),
        Cell::Float(cfg.effective_rho()),
        Cell::UInt(cfg.startup_x.into()),
        Cell::UInt(cfg.offset_phi.into()),
        Cell::Float(p_starv),
        Cell::Float(baseline),
        Cell::Float(pmf.expected_count()),
        Cell::Float(pgf_evaluate(&pmf, 0.5)),
        Cell::Float(pgf_evaluate(&pmf, 0.9)),
        Cell::Float(pgf_evaluate(&pmf, 1.0)),
    ];
    for j in 0..=cfg.j_max as usize {
        row.push(Cell::Float(pmf.probs.get(j).copied().unwrap_or(0.0)));
    }
    Ok(vec![row])
}

fn quality_columns() -> Vec<String> {
    [
        "x", "phi", "rho", "lambda", "mu", "b_low_kbps", "b_high_kbps", "t_low", "t_high",
        "b_avg", "e_tau", "f_low", "busy_mean", "busy_var",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn quality_rows(cfg: &RunConfig) -> Result<Vec<Vec<Cell>>> {
    let lam = cfg.effective_lambda();
    let qt = quality_times(
        cfg.startup_x,
        cfg.offset_phi,
        lam,
        cfg.mu,
        cfg.pair_low_kbps,
        cfg.pair_high_kbps,
    )?;
    let f_low = quasi_stationary(cfg.startup_x, cfg.offset_phi, cfg.effective_rho())?
        .low_fraction();
    let (busy_mean, busy_var) = busy_period_stats(lam, cfg.mu)?;
    Ok(vec![vec![
        Cell::UInt(cfg.startup_x.into()),
        Cell::UInt(cfg.offset_phi.into()),
        Cell::Float(cfg.effective_rho()),
        Cell::Float(lam),
        Cell::Float(cfg.mu),
        Cell::Float(cfg.pair_low_kbps),
        Cell::Float(cfg.pair_high_kbps),
        Cell::Float(qt.t_low),
        Cell::Float(qt.t_high),
        Cell::Float(qt.b_avg),
        Cell::Float(qt.e_tau),
        Cell::Float(f_low),
        Cell::Float(busy_mean),
        Cell::Float(busy_var),
    ]])
}

fn simulate_columns() -> Vec<String> {
    [
        "n", "rho", "x", "phi", "arrival", "runs", "seed", "p_starv_hat", "p_starv_se",
        "mean_quality_fraction", "quality_fraction_se", "mean_rebuffer_time",
        "rebuffer_time_se", "mean_initial_delay", "initial_delay_se", "analytic_p_starv",
        "analytic_se", "z_score", "pmf_hat", "pmf_se", "note",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn simulate_rows(cfg: &RunConfig) -> Result<Vec<Vec<Cell>>> {
    let params = cfg.session_params()?;
    let proc = cfg.arrival_process()?;
    let stats = replicate(&params, &proc, cfg.runs, cfg.seed)?;
    // Analytic reference only where the embedded-chain analysis applies.
    let (analytic, analytic_se, z, note) = match cfg.arrival {
        ArrivalKind::Poisson => {
            let p = starvation_prob_with(&params, &cfg.ballot_config());
            let se = (p * (1.0 - p) / cfg.runs as f64).sqrt();
            let z = if se > 0.0 { Some((stats.starvation_prob_hat - p) / se) } else { None };
            (Some(p), Some(se), z, String::new())
        }
        kind => (
            None,
            None,
            None,
            format!("analytic columns omitted: no closed form for {} arrivals", kind.label()),
        ),
    };
    Ok(vec![vec![
        Cell::UInt(cfg.file_size_n.into()),
        Cell::Float(cfg.effective_rho()),
        Cell::UInt(cfg.startup_x.into()),
        Cell::UInt(cfg.offset_phi.into()),
        Cell::Str(cfg.arrival.label().into()),
        Cell::UInt(cfg.runs.into()),
        Cell::UInt(cfg.seed),
        Cell::Float(stats.starvation_prob_hat),
        Cell::OptFloat(stats.starvation_prob_se),
        Cell::Float(stats.mean_quality_fraction),
        Cell::OptFloat(stats.quality_fraction_se),
        Cell::Float(stats.mean_rebuffer_time),
        Cell::OptFloat(stats.rebuffer_time_se),
        Cell::Float(stats.mean_initial_delay),
        Cell::OptFloat(stats.initial_delay_se),
        Cell::OptFloat(analytic),
        Cell::OptFloat(analytic_se),
        Cell::OptFloat(z),
        Cell::FloatList(stats.pmf_hat.iter().map(|v| Some(*v)).collect()),
        Cell::FloatList(stats.pmf_se.clone()),
        Cell::Str(note),
    ]])
}

fn trace_table(cfg: &RunConfig) -> Result<Table> {
    let params = cfg.session_params()?;
    let proc = cfg.arrival_process()?;
    let trace = simulate_session(&params, &proc, cfg.seed);
    Ok(Table {
        columns: ["time", "kind", "buffer_level", "state_n"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows: trace
            .events
            .iter()
            .map(|e| {
                vec![
                    Cell::Float(e.time),
                    Cell::Str(e.kind.label().into()),
                    Cell::Float(e.buffer_level as f64),
                    Cell::Float(e.state_n as f64),
                ]
            })
            .collect(),
    })
}

fn compare_columns() -> Vec<String> {
    [
        "rank", "kind", "label", "low_kbps", "high_kbps", "lambda", "rho", "phi",
        "throughput_kbps", "n", "total_cost", "delay_term", "starvation_term", "quality_term",
        "e_starvations", "initial_delay", "f_low", "f_high", "quality_source",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn compare_rows(cfg: &RunConfig) -> Result<Vec<Vec<Cell>>> {
    let ladder = cfg.build_ladder()?;
    let ranked = compare_ladder(
        &ladder,
        cfg.throughput_kbps,
        cfg.file_size_n,
        &cfg.weights,
        &cfg.planner(),
    )?;
    Ok(ranked
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                Cell::UInt(i as u64 + 1),
                Cell::Str(
                    match r.kind {
                        CandidateKind::Dash => "dash",
                        CandidateKind::BscPair => "bsc_pair",
                    }
                    .into(),
                ),
                Cell::Str(r.label.clone()),
                Cell::Float(r.low_kbps),
                Cell::Float(r.high_kbps),
                Cell::Float(r.lambda),
                Cell::Float(r.rho),
                Cell::UInt(r.phi.into()),
                Cell::Float(cfg.throughput_kbps),
                Cell::UInt(cfg.file_size_n.into()),
                Cell::Float(r.cost.total),
                Cell::Float(r.cost.delay_term),
                Cell::Float(r.cost.starvation_term),
                Cell::Float(r.cost.quality_term),
                Cell::Float(r.cost.e_starvations),
                Cell::Float(r.cost.initial_delay),
                Cell::Float(r.cost.f_low),
                Cell::Float(r.cost.f_high),
                Cell::Str(
                    match r.cost.quality_source {
                        QualitySource::Analytic => "analytic",
                        QualitySource::Simulated => "simulated",
                    }
                    .into(),
                ),
            ]
        })
        .collect())
}

fn oracle_columns() -> Vec<String> {
    ["j", "numerator", "denominator", "value"].iter().map(|s| s.to_string()).collect()
}

type OracleOutput =
    (Vec<Vec<Cell>>, serde_json::Map<String, serde_json::Value>, Vec<String>);

fn oracle_output(cfg: &RunConfig) -> Result<OracleOutput> {
    use num::Zero;
    let params = cfg.session_params()?;
    let res = enumerate_paths(&params)?;
    let rows = res
        .probs
        .iter()
        .enumerate()
        .map(|(j, p)| {
            vec![
                Cell::UInt(j as u64),
                Cell::Str(p.numer().to_string()),
                Cell::Str(p.denom().to_string()),
                Cell::Float(crate::des_simulator::oracle::rational_to_f64(p)),
            ]
        })
        .collect();
    let total = res.probs.iter().fold(num::BigRational::zero(), |a, b| a + b);
    let p_starv = res.starvation_prob();
    let rational = |r: &num::BigRational| {
        serde_json::json!({
            "numerator": r.numer().to_string(),
            "denominator": r.denom().to_string(),
        })
    };
    let mut extras = serde_json::Map::new();
    let mut p_json = rational(&p_starv);
    p_json["value"] = serde_json::json!(res.starvation_prob_f64());
    extras.insert("p_starvation".into(), p_json);
    extras.insert("total".into(), rational(&total));
    let comments = vec![
        format!("p_starvation: {}/{}", p_starv.numer(), p_starv.denom()),
        format!("total: {}/{}", total.numer(), total.denom()),
    ];
    Ok((rows, extras, comments))
}

fn offset_columns() -> Vec<String> {
    ["n", "x", "rho", "risk_threshold", "phi", "p_starv", "meets_threshold"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn offset_rows(cfg: &RunConfig) -> Result<Vec<Vec<Cell>>> {
    let sel = select_offset(
        cfg.file_size_n,
        cfg.startup_x,
        cfg.effective_rho(),
        cfg.risk_threshold,
    )?;
    if !sel.meets_threshold {
        eprintln!(
            "warning: no offset keeps starvation risk within {}; falling back to phi = 1",
            cfg.risk_threshold
        );
    }
    Ok(vec![vec![
        Cell::UInt(cfg.file_size_n.into()),
        Cell::UInt(cfg.startup_x.into()),
        Cell::Float(cfg.effective_rho()),
        Cell::Float(cfg.risk_threshold),
        Cell::UInt(sel.phi.into()),
        Cell::Float(sel.starvation_prob),
        Cell::Bool(sel.meets_threshold),
    ]])
}

/// Execute a parsed invocation end to end.
pub fn run(cli: &Cli) -> Result<()> {
    let base = build_config(cli)?;
    base.validate()?;
    let sweep = base.sweep.as_deref().map(parse_sweep).transpose()?;
    if cli.command == Command::Oracle && sweep.is_some() {
        return Err(Error::Config("oracle does not support --sweep".into()));
    }
    let configs = match &sweep {
        Some(s) => s.expand(&base),
        None => vec![base.clone()],
    };

    let columns = match cli.command {
        Command::Analyze => analyze_columns(&base),
        Command::Quality => quality_columns(),
        Command::Simulate => simulate_columns(),
        Command::Compare => compare_columns(),
        Command::Oracle => oracle_columns(),
        Command::Offset => offset_columns(),
    };
    let mut rows = Vec::new();
    let mut extras = serde_json::Map::new();
    let mut comments = Vec::new();
    let mut trace = None;
    for (i, cfg) in configs.iter().enumerate() {
        match cli.command {
            Command::Analyze => rows.extend(analyze_rows(cfg)?),
            Command::Quality => rows.extend(quality_rows(cfg)?),
            Command::Simulate => {
                rows.extend(simulate_rows(cfg)?);
                if cfg.emit_trace && i == 0 {
                    trace = Some(trace_table(cfg)?);
                }
            }
            Command::Compare => rows.extend(compare_rows(cfg)?),
            Command::Oracle => {
                let (r, ex, cm) = oracle_output(cfg)?;
                rows.extend(r);
                extras = ex;
                comments = cm;
            }
            Command::Offset => rows.extend(offset_rows(cfg)?),
        }
    }
    let table = Table { columns, rows };

    let config_value =
        serde_json::to_value(&base).map_err(|e| Error::Format(e.to_string()))?;
    let bytes = match base.format {
        OutputFormat::Csv => {
            let line = serde_json::to_string(&config_value)
                .map_err(|e| Error::Format(e.to_string()))?;
            render_csv(cli.command.name(), &line, &comments, &table, trace.as_ref())?
        }
        OutputFormat::Json => {
            render_json(cli.command.name(), config_value, extras, &table, trace.as_ref())?
        }
    };
    match &base.out {
        Some(path) => std::fs::write(path, &bytes)?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}
