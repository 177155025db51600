//! Federated training loops: local updates on each agent's own environment,
//! periodic averaging of the model tables, and the no-communication baseline.
//!
//! All agents advance in lockstep. Round `t + 1` applies one local update
//! with step `eta_t` to every agent; an aggregation follows every `E`-th round
//! and always after the final round `T`. Reductions run in agent-index order,
//! so a `(task, config)` pair always yields the same trace bit for bit.

mod baseline;
mod pavg;
mod qavg;
mod runner;

pub use baseline::independent_baseline;
pub use pavg::{gradient_mapping_norm, pavg_train};
pub use qavg::qavg_train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mdp::{greedy_policy, softmax_policy, LogitTable, QTable, StochasticPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Qavg,
    ProjPavg,
    SoftPavg,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Qavg => "qavg",
            Algorithm::ProjPavg => "projpavg",
            Algorithm::SoftPavg => "softpavg",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qavg" => Ok(Algorithm::Qavg),
            "projpavg" => Ok(Algorithm::ProjPavg),
            "softpavg" => Ok(Algorithm::SoftPavg),
            other => Err(Error::invalid(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Number of local updates between aggregations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LocalUpdates {
    Every(u64),
    /// Agents never communicate; one average is taken after round `T`.
    Infinite,
}

impl LocalUpdates {
    pub fn finite(self) -> Option<u64> {
        match self {
            LocalUpdates::Every(e) => Some(e),
            LocalUpdates::Infinite => None,
        }
    }

    fn aggregates_after(self, round: u64, total: u64) -> bool {
        match self {
            LocalUpdates::Every(e) => round.is_multiple_of(e) || round == total,
            LocalUpdates::Infinite => round == total,
        }
    }

    /// `E` as seen by the step-size schedules. Without communication the
    /// agents run plain single-environment iterations, so the `E = 1` schedule
    /// applies.
    pub fn schedule_period(self) -> u64 {
        self.finite().unwrap_or(1)
    }
}

impl fmt::Display for LocalUpdates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalUpdates::Every(e) => write!(f, "{e}"),
            LocalUpdates::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for LocalUpdates {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(LocalUpdates::Infinite);
        }
        match s.parse::<u64>() {
            Ok(e) if e >= 1 => Ok(LocalUpdates::Every(e)),
            _ => Err(Error::invalid(format!(
                "local update count must be a positive integer or `inf`, got `{s}`"
            ))),
        }
    }
}

impl Serialize for LocalUpdates {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LocalUpdates::Every(e) => serializer.serialize_u64(*e),
            LocalUpdates::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for LocalUpdates {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        let text = match Raw::deserialize(deserializer)? {
            Raw::Int(e) => e.to_string(),
            Raw::Text(s) => s,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `2 / ((1 - gamma) (t + E))`
    QavgTheoretical,
    /// `sqrt(E / (12 L^2 (t + E/3)))`
    PavgTheoretical,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness_l: Option<f64>,
}

impl ScheduleSpec {
    pub fn qavg_theoretical() -> Self {
        ScheduleSpec {
            kind: ScheduleKind::QavgTheoretical,
            eta_constant: None,
            smoothness_l: None,
        }
    }

    pub fn pavg_theoretical(smoothness_l: f64) -> Self {
        ScheduleSpec {
            kind: ScheduleKind::PavgTheoretical,
            eta_constant: None,
            smoothness_l: Some(smoothness_l),
        }
    }

    pub fn constant(eta: f64) -> Self {
        ScheduleSpec {
            kind: ScheduleKind::Constant,
            eta_constant: Some(eta),
            smoothness_l: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ScheduleKind::QavgTheoretical => Ok(()),
            ScheduleKind::PavgTheoretical => match self.smoothness_l {
                Some(l) if l > 0.0 && l.is_finite() => Ok(()),
                Some(l) => Err(Error::invalid(format!(
                    "smoothness_l must be positive, got {l}"
                ))),
                None => Err(Error::invalid(
                    "pavg_theoretical schedule needs smoothness_l",
                )),
            },
            ScheduleKind::Constant => match self.eta_constant {
                Some(eta) if eta > 0.0 && eta.is_finite() => Ok(()),
                Some(eta) => Err(Error::invalid(format!(
                    "eta_constant must be positive, got {eta}"
                ))),
                None => Err(Error::invalid("constant schedule needs eta_constant")),
            },
        }
    }
}

/// Step size for round `t` (0-based) with communication period `e`.
pub fn lr_schedule(spec: &ScheduleSpec, t: u64, e: u64, gamma: f64) -> Result<f64> {
    spec.validate()?;
    if e == 0 {
        return Err(Error::invalid("communication period must be at least 1"));
    }
    let (t, e) = (t as f64, e as f64);
    Ok(match spec.kind {
        ScheduleKind::QavgTheoretical => 2.0 / ((1.0 - gamma) * (t + e)),
        ScheduleKind::PavgTheoretical => {
            let l = spec.smoothness_l.expect("validated");
            (e / (12.0 * l * l * (t + e / 3.0))).sqrt()
        }
        ScheduleKind::Constant => spec.eta_constant.expect("validated"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Zero Q table or zero logits.
    Zeros,
    /// Uniform policy (direct parameterization).
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FedConfig {
    pub algorithm: Algorithm,
    pub local_updates: LocalUpdates,
    pub total_iters: u64,
    pub schedule: ScheduleSpec,
    pub init: Init,
    /// Carried into traces for provenance; the exact-model updates draw no
    /// randomness.
    pub seed: u64,
    pub record_every: u64,
}

impl FedConfig {
    /// Defaults for `algorithm`: QAvg uses the theoretical schedule from a
    /// zero table, ProjPAvg a constant 0.1 from the uniform policy, SoftPAvg a
    /// constant 0.5 from zero logits.
    pub fn new(algorithm: Algorithm, local_updates: LocalUpdates, total_iters: u64) -> Self {
        let (schedule, init) = match algorithm {
            Algorithm::Qavg => (ScheduleSpec::qavg_theoretical(), Init::Zeros),
            Algorithm::ProjPavg => (ScheduleSpec::constant(0.1), Init::Uniform),
            Algorithm::SoftPavg => (ScheduleSpec::constant(0.5), Init::Zeros),
        };
        FedConfig {
            algorithm,
            local_updates,
            total_iters,
            schedule,
            init,
            seed: 0,
            record_every: 100,
        }
    }

    pub fn with_schedule(mut self, schedule: ScheduleSpec) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_record_every(mut self, record_every: u64) -> Self {
        self.record_every = record_every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_iters == 0 {
            return Err(Error::invalid("total_iters must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be at least 1"));
        }
        if self.local_updates == LocalUpdates::Every(0) {
            return Err(Error::invalid("local update count must be at least 1"));
        }
        self.schedule.validate()?;
        let init_ok = match self.algorithm {
            Algorithm::Qavg => self.init == Init::Zeros,
            Algorithm::ProjPavg => self.init == Init::Uniform,
            // zero logits are the uniform policy
            Algorithm::SoftPavg => true,
        };
        if !init_ok {
            return Err(Error::invalid(format!(
                "init {:?} does not apply to {}",
                self.init, self.algorithm
            )));
        }
        Ok(())
    }

    fn step(&self, t: u64, gamma: f64) -> Result<f64> {
        lr_schedule(
            &self.schedule,
            t,
            self.local_updates.schedule_period(),
            gamma,
        )
    }

    fn records_after(&self, round: u64) -> bool {
        round.is_multiple_of(self.record_every) || round == self.total_iters
    }
}

/// One recorded iteration. `iter` counts completed rounds (0 = initial).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: u64,
    pub objective: f64,
    /// `||Qbar_t - Q*_I||_inf` (QAvg).
    pub q_gap: Option<f64>,
    /// `||G^eta(pibar_t)||_2` (PAvg).
    pub grad_map_norm: Option<f64>,
    pub aggregated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Q(QTable),
    Policy(StochasticPolicy),
    Logits(LogitTable),
}

impl Model {
    /// The policy used for control: greedy for Q tables, softmax for logits.
    pub fn policy(&self) -> StochasticPolicy {
        match self {
            Model::Q(q) => greedy_policy(q),
            Model::Policy(p) => p.clone(),
            Model::Logits(l) => softmax_policy(l),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub records: Vec<TraceRecord>,
    /// Final aggregate model (federated runs).
    pub aggregate: Option<Model>,
    /// Final per-agent models (baseline runs).
    pub agents: Vec<Model>,
}

impl TrainTrace {
    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("traces record the final round")
    }

    pub fn final_objective(&self) -> f64 {
        self.last().objective
    }
}
