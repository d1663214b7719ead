//! Experiment configuration and the named random-stream contract.
//!
//! A [`ScenarioConfig`] is loaded from a flat TOML document whose keys carry
//! their units (`slot_ms`, `eta_per_m`, ...). Absent keys take the deployment
//! defaults; unknown keys are rejected so that typos fail loudly.
//!
//! Every source of randomness in a run is a separate [`Stream`] obtained from
//! [`derive_stream`] with a `(seed, label)` pair, so changing how one concern
//! consumes randomness never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};

/// Deterministic random stream handle.
pub type Stream = ChaCha8Rng;

/// Upper bound on `n_channels`; the action space is `2^n_channels`.
pub const MAX_CHANNELS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Drl,
    #[serde(rename = "mapra")]
    MapRa,
    Rch,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Drl, PolicyKind::MapRa, PolicyKind::Rch];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Drl => "drl",
            PolicyKind::MapRa => "mapra",
            PolicyKind::Rch => "rch",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "drl" => Ok(PolicyKind::Drl),
            "mapra" | "map_ra" | "map-ra" => Ok(PolicyKind::MapRa),
            "rch" => Ok(PolicyKind::Rch),
            other => Err(invalid("policy_kind", format!("unknown policy `{other}`"))),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Who is credited when a slot delivers the alarm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardScope {
    /// Every LAP holding the alarm shares the outcome.
    Shared,
    /// Only the winning transmitter is rewarded.
    Individual,
}

/// How an event's active set is drawn from the activation probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationMode {
    ThresholdOnly,
    ThresholdAndBernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PilotKind {
    /// Unit symbol on every channel.
    Ones,
    /// Unit-modulus symbol with a uniform random phase per channel and slot.
    RandomPhase,
}

/// All physical, protocol and learning parameters of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub area_width_m: f64,
    pub area_height_m: f64,
    pub n_subnets: usize,
    pub n_channels: usize,
    /// Recorded with the results; the pilot link budget is set by `snr_avg_db`.
    pub tx_power_dbm: f64,
    pub speed_mps: f64,
    pub min_separation_m: f64,
    pub slot_ms: f64,
    pub deadline_slots: u32,
    /// Spatial attenuation rate of the activation probability, 1/m.
    pub eta_per_m: f64,
    /// Per-slot alarm event probability.
    pub alpha: f64,
    /// Activation threshold on `exp(-eta * d)`.
    pub tx_threshold: f64,
    /// Average SNR applied to both pilot uplink and CS downlink.
    ///
    /// Link amplitudes carry the full pathloss as `10^(-PL/10)`, so this is
    /// sized against roughly twice the typical pathloss in dB.
    pub snr_avg_db: f64,
    pub activation_mode: ActivationMode,
    pub allow_overlapping_events: bool,
    /// Slots at the start of each alarm spent on pilot/CS exchange before
    /// the first data attempt.
    pub cs_overhead_slots: u32,
    pub pilot_kind: PilotKind,
    pub policy_kind: PolicyKind,

    pub dnn_hidden_layers: usize,
    pub dnn_hidden_size: usize,
    /// Defaults to `30 * 2^n_channels`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minibatch_size: Option<usize>,
    /// Defaults to `100 * 2^n_channels`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay_capacity: Option<usize>,
    /// Sample with replacement while the memory holds fewer than B tuples.
    pub sample_with_replacement: bool,
    pub epsilon_start: f64,
    pub epsilon_floor: f64,
    pub epsilon_step: f64,
    pub lr_initial: f64,
    pub lr_decay_per_event: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    pub clip_threshold: f64,
    pub mapra_tau: f64,
    pub reward_success: f64,
    pub reward_failure: f64,
    pub reward_scope: RewardScope,

    pub carrier_ghz: f64,
    pub pl_los_alpha: f64,
    pub pl_los_beta_db: f64,
    pub pl_los_gamma: f64,
    pub pl_nlos_alpha: f64,
    pub pl_nlos_beta_db: f64,
    pub pl_nlos_gamma: f64,
    pub shadow_std_los_db: f64,
    pub shadow_std_nlos_db: f64,
    pub shadow_decorrelation_m: f64,
    pub los_clutter_size_m: f64,
    pub los_clutter_density: f64,

    pub rng_seed: u64,
    pub n_slots: u64,
    /// When set, a run stops once this many detected alarms have terminated
    /// (`n_slots` then acts as a safety cap).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_events: Option<u64>,
    pub n_runs: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area_width_m: 50.0,
            area_height_m: 50.0,
            n_subnets: 30,
            n_channels: 5,
            tx_power_dbm: -10.0,
            speed_mps: 2.0,
            min_separation_m: 1.5,
            slot_ms: 3.0,
            deadline_slots: 15,
            eta_per_m: 0.6,
            alpha: 0.1,
            tx_threshold: 0.01,
            snr_avg_db: 160.0,
            activation_mode: ActivationMode::ThresholdAndBernoulli,
            allow_overlapping_events: false,
            cs_overhead_slots: 0,
            pilot_kind: PilotKind::Ones,
            policy_kind: PolicyKind::Drl,
            dnn_hidden_layers: 2,
            dnn_hidden_size: 1,
            minibatch_size: None,
            replay_capacity: None,
            sample_with_replacement: true,
            epsilon_start: 1.0,
            epsilon_floor: 0.1,
            epsilon_step: 0.005,
            lr_initial: 0.01,
            lr_decay_per_event: 0.015,
            rms_decay: 0.9,
            rms_epsilon: 1e-8,
            clip_threshold: 5.0,
            mapra_tau: 0.1,
            reward_success: 1.0,
            reward_failure: -1.0,
            reward_scope: RewardScope::Shared,
            // 3GPP TR 38.901 InF-SL, LOS and NLOS.
            carrier_ghz: 6.0,
            pl_los_alpha: 2.15,
            pl_los_beta_db: 31.84,
            pl_los_gamma: 1.9,
            pl_nlos_alpha: 2.55,
            pl_nlos_beta_db: 33.0,
            pl_nlos_gamma: 2.0,
            shadow_std_los_db: 4.3,
            shadow_std_nlos_db: 5.7,
            shadow_decorrelation_m: 10.0,
            los_clutter_size_m: 10.0,
            los_clutter_density: 0.2,
            rng_seed: 1,
            n_slots: 1000,
            n_events: None,
            n_runs: 100,
        }
    }
}

impl ScenarioConfig {
    /// Size of the action space, `2^M`.
    pub fn n_patterns(&self) -> usize {
        1usize << self.n_channels
    }

    pub fn minibatch(&self) -> usize {
        self.minibatch_size.unwrap_or(30 * self.n_patterns())
    }

    pub fn replay(&self) -> usize {
        self.replay_capacity.unwrap_or(100 * self.n_patterns())
    }

    /// Per-slot displacement in meters.
    pub fn step_length_m(&self) -> f64 {
        self.speed_mps * self.slot_ms / 1000.0
    }

    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_avg_db / 10.0)
    }

    /// Layer sizes `[M, h, ..., h, 2^M]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut l = Vec::with_capacity(self.dnn_hidden_layers + 2);
        l.push(self.n_channels);
        l.extend(std::iter::repeat_n(self.dnn_hidden_size, self.dnn_hidden_layers));
        l.push(self.n_patterns());
        l
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_channels < 1 {
            return Err(invalid("n_channels", "n_channels ≥ 1"));
        }
        if self.n_channels > MAX_CHANNELS {
            return Err(invalid("n_channels", format!("n_channels ≤ {MAX_CHANNELS}")));
        }
        if self.n_subnets < 1 {
            return Err(invalid("n_subnets", "n_subnets ≥ 1"));
        }
        if self.minibatch() < 1 {
            return Err(invalid("minibatch_size", "minibatch_size ≥ 1"));
        }
        if self.minibatch() > self.replay() {
            return Err(invalid(
                "minibatch_size",
                format!(
                    "minibatch_size {} exceeds replay_capacity {}",
                    self.minibatch(),
                    self.replay()
                ),
            ));
        }
        if !(self.epsilon_floor > 0.0
            && self.epsilon_floor <= self.epsilon_start
            && self.epsilon_start <= 1.0)
        {
            return Err(invalid(
                "epsilon_floor",
                "0 < epsilon_floor ≤ epsilon_start ≤ 1",
            ));
        }
        if self.epsilon_step.is_nan() || self.epsilon_step <= 0.0 {
            return Err(invalid("epsilon_step", "epsilon_step > 0"));
        }
        let unit = |field: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(invalid(field, format!("{v} not in [0, 1]")))
            }
        };
        unit("alpha", self.alpha)?;
        unit("tx_threshold", self.tx_threshold)?;
        unit("lr_decay_per_event", self.lr_decay_per_event)?;
        unit("rms_decay", self.rms_decay)?;
        unit("mapra_tau", self.mapra_tau)?;
        unit("los_clutter_density", self.los_clutter_density)?;
        let positive = |field: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(field, format!("{v} must be positive")))
            }
        };
        positive("area_width_m", self.area_width_m)?;
        positive("area_height_m", self.area_height_m)?;
        positive("slot_ms", self.slot_ms)?;
        positive("eta_per_m", self.eta_per_m)?;
        positive("lr_initial", self.lr_initial)?;
        positive("rms_epsilon", self.rms_epsilon)?;
        positive("clip_threshold", self.clip_threshold)?;
        positive("carrier_ghz", self.carrier_ghz)?;
        positive("shadow_decorrelation_m", self.shadow_decorrelation_m)?;
        positive("los_clutter_size_m", self.los_clutter_size_m)?;
        if self.speed_mps < 0.0 {
            return Err(invalid("speed_mps", "speed_mps ≥ 0"));
        }
        if self.min_separation_m < 0.0 {
            return Err(invalid("min_separation_m", "min_separation_m ≥ 0"));
        }
        if self.shadow_std_los_db < 0.0 || self.shadow_std_nlos_db < 0.0 {
            return Err(invalid("shadow_std_los_db", "shadowing std ≥ 0"));
        }
        if self.cs_overhead_slots > 2 {
            return Err(invalid("cs_overhead_slots", "cs_overhead_slots ∈ {0, 1, 2}"));
        }
        if self.dnn_hidden_size < 1 {
            return Err(invalid("dnn_hidden_size", "dnn_hidden_size ≥ 1"));
        }
        if !self.reward_success.is_finite() || !self.reward_failure.is_finite() {
            return Err(invalid("reward_success", "rewards must be finite"));
        }
        if self.n_runs < 1 {
            return Err(invalid("n_runs", "n_runs ≥ 1"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Short stable hash of the serialized config.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parses and validates a TOML config document.
pub fn load_config(source: &str) -> Result<ScenarioConfig> {
    let config: ScenarioConfig = toml::from_str(source).map_err(|e| Error::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Returns an independent deterministic stream for `(seed, label)`.
///
/// The seed keys the generator and the label selects one of its 2^64
/// streams, so distinct labels never overlap.
pub fn derive_stream(seed: u64, label: &str) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label_hash(label));
    rng
}

fn label_hash(label: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed of replication `run` derived from a base seed (splitmix64 step).
pub fn run_seed(base: u64, run: u64) -> u64 {
    let mut z = base.wrapping_add(run.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn empty_document_gives_defaults() {
        let c = load_config("").unwrap();
        assert_eq!(c, ScenarioConfig::default());
        assert_eq!(c.deadline_slots, 15);
        assert_eq!(c.slot_ms, 3.0);
        assert_eq!(c.eta_per_m, 0.6);
        assert_eq!(c.alpha, 0.1);
        assert_eq!(c.minibatch(), 30 * 32);
        assert_eq!(c.replay(), 100 * 32);
    }

    #[test]
    fn zero_channels_rejected() {
        let err = load_config("n_channels = 0").unwrap_err();
        assert!(err.to_string().contains("n_channels ≥ 1"), "{err}");
    }

    #[test]
    fn minibatch_larger_than_memory_rejected() {
        let err = load_config("minibatch_size = 10\nreplay_capacity = 5").unwrap_err();
        assert!(matches!(err, Error::Invalid { field: "minibatch_size", .. }));
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(load_config("n_chanels = 3"), Err(Error::Parse(_))));
    }

    #[test]
    fn epsilon_ordering_enforced() {
        assert!(load_config("epsilon_floor = 0.5\nepsilon_start = 0.4").is_err());
        assert!(load_config("epsilon_floor = 0.0").is_err());
        assert!(load_config("epsilon_step = 0.0").is_err());
    }

    #[test]
    fn enums_parse_from_text() {
        let c = load_config(
            "policy_kind = \"mapra\"\nreward_scope = \"individual\"\nactivation_mode = \"threshold_only\"",
        )
        .unwrap();
        assert_eq!(c.policy_kind, PolicyKind::MapRa);
        assert_eq!(c.reward_scope, RewardScope::Individual);
        assert_eq!(c.activation_mode, ActivationMode::ThresholdOnly);
    }

    #[test]
    fn round_trip_through_toml() {
        let c = ScenarioConfig {
            n_channels: 3,
            minibatch_size: Some(17),
            n_events: Some(40),
            ..Default::default()
        };
        let back = load_config(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn streams_are_deterministic() {
        let mut a = derive_stream(42, "mobility");
        let mut b = derive_stream(42, "mobility");
        for _ in 0..100 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }

    #[test]
    fn streams_differ_by_label_and_seed() {
        let draw = |seed, label| {
            let mut r = derive_stream(seed, label);
            (0..100).map(|_| r.random::<u64>()).collect::<Vec<_>>()
        };
        assert_ne!(draw(42, "mobility"), draw(42, "events"));
        assert_ne!(draw(42, "mobility"), draw(43, "mobility"));
    }

    #[test]
    fn run_seeds_distinct() {
        let s: std::collections::HashSet<_> = (0..1000).map(|r| run_seed(7, r)).collect();
        assert_eq!(s.len(), 1000);
    }
}
