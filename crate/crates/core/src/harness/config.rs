use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::lossy::ByzStrategy;
use crate::sim::rng::derive_seed;
use crate::sim::{LossPolicy, LossyChannelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    StoreCollect,
    AdoptCommit,
    Rbc,
    Rbc2,
    MacAc,
    MacAc2,
    SmallAc,
    SmallBac,
}

impl Protocol {
    pub const ALL: [Protocol; 8] = [
        Protocol::StoreCollect,
        Protocol::AdoptCommit,
        Protocol::Rbc,
        Protocol::Rbc2,
        Protocol::MacAc,
        Protocol::MacAc2,
        Protocol::SmallAc,
        Protocol::SmallBac,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::StoreCollect => "store_collect",
            Protocol::AdoptCommit => "adopt_commit",
            Protocol::Rbc => "rbc",
            Protocol::Rbc2 => "rbc2",
            Protocol::MacAc => "mac_ac",
            Protocol::MacAc2 => "mac_ac2",
            Protocol::SmallAc => "small_ac",
            Protocol::SmallBac => "small_bac",
        }
    }

    pub fn is_lossy(self) -> bool {
        matches!(self, Protocol::SmallAc | Protocol::SmallBac)
    }

    pub fn is_approximate(self) -> bool {
        matches!(self, Protocol::MacAc | Protocol::MacAc2 | Protocol::SmallAc | Protocol::SmallBac)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Protocol::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| format!("unknown protocol `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    #[default]
    Mac,
    Lossy,
}

/// MAC transport: scheduler choice. Lossy transport: `random` drops
/// independently at rate `loss`, `drop` drops everything fairness allows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryKind {
    #[default]
    Random,
    Lockstep,
    /// Random, but starves node 0.
    Laggard,
    Drop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(u64),
    List(Vec<u64>),
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::Count(1)
    }
}

/// One experiment: a protocol, a transport, a fault model and a seed set.
/// Read from TOML; unset keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub n: usize,
    /// Crash bound on MAC protocols and SmallAC; Byzantine count on SmallBAC.
    #[serde(default)]
    pub f: usize,
    #[serde(default)]
    pub transport: Transport,
    #[serde(default)]
    pub adversary: AdversaryKind,
    /// Per-step crash probability while fewer than `f` nodes have crashed.
    #[serde(default = "default_crash_prob")]
    pub crash_prob: f64,
    /// Base seed; run seeds are derived from it when `seeds` is a count.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub seeds: Seeds,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    #[serde(default = "default_n0")]
    pub n0: u64,
    #[serde(default = "default_c")]
    pub c: f64,
    /// Known upper bound on n for MAC-AC2; defaults to n.
    pub n_upper: Option<u32>,
    #[serde(default = "default_t")]
    pub t: u64,
    #[serde(rename = "Delta", default = "default_delta_bound")]
    pub delta_bound: u64,
    #[serde(default)]
    pub loss: f64,
    #[serde(default)]
    pub duplicate: f64,
    #[serde(default = "default_budget")]
    pub event_budget: u64,
    pub byz: Option<ByzStrategy>,
    #[serde(default = "default_true")]
    pub include_self_value: bool,
    /// Explicit inputs (bits or dyadic literals); random when absent.
    pub inputs: Option<Vec<String>>,
    pub output: Option<PathBuf>,
    pub trace_dir: Option<PathBuf>,
}

fn default_crash_prob() -> f64 {
    0.01
}
fn default_n0() -> u64 {
    1
}
fn default_c() -> f64 {
    4.0
}
fn default_t() -> u64 {
    1
}
fn default_delta_bound() -> u64 {
    4
}
fn default_budget() -> u64 {
    1_000_000
}
fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    /// A config with every optional key at its default.
    pub fn new(protocol: Protocol, n: usize) -> Self {
        let transport = if protocol.is_lossy() { Transport::Lossy } else { Transport::Mac };
        ExperimentConfig {
            protocol,
            n,
            f: 0,
            transport,
            adversary: AdversaryKind::Random,
            crash_prob: default_crash_prob(),
            seed: 0,
            seeds: Seeds::Count(1),
            epsilon: protocol.is_approximate().then_some(1.0 / 64.0),
            delta: None,
            n0: default_n0(),
            c: default_c(),
            n_upper: None,
            t: default_t(),
            delta_bound: default_delta_bound(),
            loss: 0.0,
            duplicate: 0.0,
            event_budget: default_budget(),
            byz: (protocol == Protocol::SmallBac).then_some(ByzStrategy::Extremes),
            include_self_value: true,
            inputs: None,
            output: None,
            trace_dir: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::new(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn seed_list(&self) -> Vec<u64> {
        match &self.seeds {
            Seeds::Count(k) => (0..*k).map(|i| derive_seed(self.seed, i)).collect(),
            Seeds::List(v) => v.clone(),
        }
    }

    pub fn epsilon(&self) -> Result<f64, ConfigError> {
        self.epsilon.ok_or_else(|| ConfigError::new(format!("{} needs epsilon", self.protocol)))
    }

    pub fn channel(&self) -> LossyChannelConfig {
        let policy = match self.adversary {
            AdversaryKind::Drop => LossPolicy::Adversarial,
            _ => LossPolicy::Iid { loss: self.loss, duplicate: self.duplicate },
        };
        LossyChannelConfig { t: self.t, delta: self.delta_bound, policy }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError::new(m));
        let p = self.protocol;
        if self.n == 0 {
            return err("n must be at least 1".into());
        }
        if self.event_budget == 0 {
            return err("event_budget must be positive".into());
        }
        if matches!(&self.seeds, Seeds::Count(0)) || matches!(&self.seeds, Seeds::List(v) if v.is_empty()) {
            return err("no seeds to run".into());
        }
        if !(0.0..=1.0).contains(&self.crash_prob) {
            return err(format!("crash_prob {} outside [0, 1]", self.crash_prob));
        }
        for (name, v) in [("epsilon", self.epsilon), ("delta", self.delta)] {
            if let Some(x) = v {
                if !(x > 0.0 && x < 1.0) {
                    return err(format!("{name} = {x} must lie strictly between 0 and 1"));
                }
            }
        }
        if p.is_approximate() {
            self.epsilon()?;
        }
        if p.is_lossy() != (self.transport == Transport::Lossy) {
            return err(format!("{p} does not run over the {:?} transport", self.transport).to_lowercase());
        }
        if !p.is_lossy() && self.adversary == AdversaryKind::Drop {
            return err("the drop adversary needs the lossy transport".into());
        }
        if p.is_lossy() && matches!(self.adversary, AdversaryKind::Lockstep | AdversaryKind::Laggard) {
            return err(format!("{p} takes the random or drop adversary"));
        }
        match p {
            Protocol::SmallAc if self.n < 2 * self.f + 1 => return err(format!("SmallAC needs n >= 2f+1, got n={} f={}", self.n, self.f)),
            Protocol::SmallBac if self.n < 5 * self.f + 1 => return err(format!("SmallBAC needs n >= 5f+1, got n={} f={}", self.n, self.f)),
            Protocol::SmallBac if self.byz.is_none() && self.f > 0 => return err("SmallBAC with f > 0 needs a byz strategy".into()),
            _ if !p.is_lossy() && self.f >= self.n => return err(format!("f={} leaves no survivor among n={}", self.f, self.n)),
            Protocol::Rbc2 if self.n0 == 0 || !(self.c > 0.0) => return err("rbc2 needs n0 >= 1 and c > 0".into()),
            Protocol::MacAc2 if self.n_upper.is_some_and(|u| u == 0 || u > 52) => return err("n_upper must lie in [1, 52]".into()),
            _ => {}
        }
        if p.is_lossy() {
            self.channel().validate().map_err(ConfigError::new)?;
        }
        if let Some(inputs) = &self.inputs {
            if inputs.len() != self.n {
                return err(format!("{} inputs for n = {}", inputs.len(), self.n));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_documented_keys() {
        let c = ExperimentConfig::from_toml(
            r#"
            protocol = "small_ac"
            n = 3
            f = 1
            transport = "lossy"
            seeds = 5
            epsilon = 0.01
            t = 1
            Delta = 6
            loss = 0.6
            "#,
        )
        .unwrap();
        assert_eq!(c.delta_bound, 6);
        assert_eq!(c.seed_list().len(), 5);
        let listed = ExperimentConfig::from_toml("protocol = \"rbc\"\nn = 2\nseeds = [3, 9]").unwrap();
        assert_eq!(listed.seed_list(), vec![3, 9]);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            "protocol = \"small_bac\"\nn = 5\nf = 1\ntransport = \"lossy\"\nepsilon = 0.1\nbyz = \"silent\"",
            "protocol = \"small_ac\"\nn = 2\nf = 1\ntransport = \"lossy\"\nepsilon = 0.1",
            "protocol = \"mac_ac\"\nn = 4",
            "protocol = \"mac_ac\"\nn = 4\nepsilon = 1.0",
            "protocol = \"rbc\"\nn = 2\ndelta = 0",
            "protocol = \"rbc\"\nn = 2\nseeds = 0",
            "protocol = \"rbc\"\nn = 2\ntransport = \"lossy\"",
            "protocol = \"rbc\"\nn = 2\nwhatever = 1",
            "protocol = \"small_ac\"\nn = 3\ntransport = \"lossy\"\nepsilon = 0.1\nt = 3\nDelta = 2",
        ];
        for text in bad {
            assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
        }
        let ok = "protocol = \"small_bac\"\nn = 6\nf = 1\ntransport = \"lossy\"\nepsilon = 0.1\nbyz = \"silent\"";
        assert!(ExperimentConfig::from_toml(ok).is_ok());
    }

    #[test]
    fn defaults_validate() {
        for p in Protocol::ALL {
            let mut c = ExperimentConfig::new(p, 6);
            c.f = 1;
            c.validate().unwrap();
        }
    }
}
