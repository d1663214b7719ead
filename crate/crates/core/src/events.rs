//! Alarm events and the activation sets they induce.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{distance, uniform_point, Point, SubnetPose};
use crate::scenario::{ActivationMode, ScenarioConfig, Stream};

/// `exp(-eta * d)`.
pub fn activation_probability(d: f64, eta: f64) -> f64 {
    (-eta * d).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventStatus {
    Live,
    Delivered,
    Expired,
    /// No LAP activated; excluded from delivery statistics.
    Undetected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlarmEvent {
    pub id: u64,
    pub epicenter: Point,
    pub birth_slot: u64,
    pub deadline_slot: u64,
    /// Sorted LAP indices; frozen at birth.
    pub active_set: Vec<usize>,
    pub status: EventStatus,
    pub delivery_slot: Option<u64>,
}

impl AlarmEvent {
    pub fn age(&self, slot: u64) -> u64 {
        slot - self.birth_slot
    }

    pub fn is_live(&self) -> bool {
        self.status == EventStatus::Live
    }
}

/// LAPs activated by an event at `epicenter`.
///
/// One uniform draw is consumed per LAP regardless of the outcome, so active
/// sets for different `eta` under the same stream state are coupled.
pub fn build_active_set(
    epicenter: Point,
    poses: &[SubnetPose],
    stream: &mut Stream,
    config: &ScenarioConfig,
) -> Vec<usize> {
    let mut active = Vec::new();
    for (n, pose) in poses.iter().enumerate() {
        let p = activation_probability(distance(epicenter, pose.position), config.eta_per_m);
        let u: f64 = stream.random();
        let detected = match config.activation_mode {
            ActivationMode::ThresholdOnly => true,
            ActivationMode::ThresholdAndBernoulli => u < p,
        };
        if p >= config.tx_threshold && detected {
            active.push(n);
        }
    }
    active
}

/// Spawns an event with probability `alpha`.
///
/// The spawn decision uses `spawn_stream`; the epicenter and detection draws
/// come from `event_stream`, which callers derive per event so that the k-th
/// event is identical across policies.
pub fn maybe_spawn_event(
    slot: u64,
    id: u64,
    poses: &[SubnetPose],
    spawn_stream: &mut Stream,
    event_stream: &mut Stream,
    config: &ScenarioConfig,
) -> Option<AlarmEvent> {
    if !spawn_decision(spawn_stream, config.alpha) {
        return None;
    }
    Some(spawn_at(slot, id, poses, event_stream, config))
}

pub fn spawn_decision(stream: &mut Stream, alpha: f64) -> bool {
    stream.random::<f64>() < alpha
}

pub fn spawn_at(
    slot: u64,
    id: u64,
    poses: &[SubnetPose],
    stream: &mut Stream,
    config: &ScenarioConfig,
) -> AlarmEvent {
    let epicenter = uniform_point(config, stream);
    let active_set = build_active_set(epicenter, poses, stream, config);
    let status = if active_set.is_empty() {
        EventStatus::Undetected
    } else {
        EventStatus::Live
    };
    AlarmEvent {
        id,
        epicenter,
        birth_slot: slot,
        deadline_slot: slot + u64::from(config.deadline_slots),
        active_set,
        status,
        delivery_slot: None,
    }
}

/// Monte Carlo estimate of `alpha * Pr(exp(-eta d) >= tx_threshold)` per LAP
/// with the epicenter uniform over the area.
pub fn empirical_p_n(
    config: &ScenarioConfig,
    poses: &[SubnetPose],
    n_trials: usize,
    stream: &mut Stream,
) -> Vec<f64> {
    let mut hits = vec![0usize; poses.len()];
    for _ in 0..n_trials {
        let e = uniform_point(config, stream);
        for (n, pose) in poses.iter().enumerate() {
            if activation_probability(distance(e, pose.position), config.eta_per_m) >= config.tx_threshold {
                hits[n] += 1;
            }
        }
    }
    hits.into_iter()
        .map(|h| config.alpha * h as f64 / n_trials as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::derive_stream;

    fn pose(x: f64, y: f64) -> SubnetPose {
        SubnetPose {
            position: Point::new(x, y),
            heading: 0.0,
            speed: 0.0,
        }
    }

    #[test]
    fn activation_examples() {
        assert_eq!(activation_probability(0.0, 0.6), 1.0);
        assert!((activation_probability(1.0, 0.6) - 0.548812).abs() < 1e-6);
        let mut prev = 1.0;
        for eta in [1.0, 2.0, 5.0, 20.0, 100.0] {
            let p = activation_probability(1.0, eta);
            assert!(p < prev);
            prev = p;
        }
        assert!(prev < 1e-40);
    }

    #[test]
    fn spawn_extremes() {
        let c0 = ScenarioConfig { alpha: 0.0, ..Default::default() };
        let c1 = ScenarioConfig { alpha: 1.0, ..Default::default() };
        let poses = vec![pose(10.0, 10.0)];
        let mut s = derive_stream(1, "spawn");
        let mut e = derive_stream(1, "event");
        for slot in 0..10_000 {
            assert!(maybe_spawn_event(slot, slot, &poses, &mut s, &mut e, &c0).is_none());
            assert!(maybe_spawn_event(slot, slot, &poses, &mut s, &mut e, &c1).is_some());
        }
    }

    #[test]
    fn spawn_rate_binomial() {
        let mut s = derive_stream(11, "spawn");
        let count = (0..100_000).filter(|_| spawn_decision(&mut s, 0.1)).count() as f64;
        // 3 sigma of Binomial(1e5, 0.1) is ~285
        assert!((count - 10_000.0).abs() <= 300.0, "{count}");
    }

    #[test]
    fn unit_threshold_excludes_everyone() {
        let c = ScenarioConfig { tx_threshold: 1.0, ..Default::default() };
        let poses = vec![pose(1.0, 1.0), pose(30.0, 3.0)];
        let mut s = derive_stream(1, "event");
        for _ in 0..100 {
            assert!(build_active_set(Point::new(20.0, 20.0), &poses, &mut s, &c).is_empty());
        }
    }

    #[test]
    fn vanishing_eta_activates_all() {
        let c = ScenarioConfig { tx_threshold: 0.0, eta_per_m: 1e-12, ..Default::default() };
        let poses: Vec<_> = (0..10).map(|i| pose(2.0 + 4.0 * i as f64, 7.0)).collect();
        let mut s = derive_stream(2, "event");
        for _ in 0..100 {
            assert_eq!(build_active_set(Point::new(25.0, 25.0), &poses, &mut s, &c).len(), 10);
        }
    }

    #[test]
    fn inclusion_frequencies_match_closed_form() {
        let c = ScenarioConfig { eta_per_m: 0.6, tx_threshold: 0.3, ..Default::default() };
        let center = Point::new(25.0, 25.0);
        let poses = vec![pose(25.5, 25.0), pose(26.0, 25.5), pose(25.0, 26.9), pose(28.0, 25.0)];
        let trials = 100_000;
        let mut counts = vec![0usize; poses.len()];
        let mut s = derive_stream(3, "event");
        for _ in 0..trials {
            for n in build_active_set(center, &poses, &mut s, &c) {
                counts[n] += 1;
            }
        }
        for (n, p) in poses.iter().enumerate() {
            let q = activation_probability(distance(center, p.position), 0.6);
            let expected = if q >= 0.3 { q } else { 0.0 };
            let got = counts[n] as f64 / trials as f64;
            assert!((got - expected).abs() < 0.01, "lap {n}: {got} vs {expected}");
        }
    }

    #[test]
    fn threshold_only_mode_is_deterministic() {
        let c = ScenarioConfig {
            eta_per_m: 0.6,
            tx_threshold: 0.3,
            activation_mode: ActivationMode::ThresholdOnly,
            ..Default::default()
        };
        let poses = vec![pose(25.5, 25.0), pose(28.0, 25.0)];
        let mut s = derive_stream(3, "event");
        for _ in 0..100 {
            assert_eq!(build_active_set(Point::new(25.0, 25.0), &poses, &mut s, &c), vec![0]);
        }
    }

    #[test]
    fn larger_eta_never_enlarges_active_set() {
        let poses: Vec<_> = (0..20).map(|i| pose((i * 7 % 50) as f64, (i * 13 % 50) as f64)).collect();
        for seed in 0..200 {
            let epi = Point::new((seed % 50) as f64, ((seed * 3) % 50) as f64);
            let small = ScenarioConfig { eta_per_m: 0.05, tx_threshold: 0.05, ..Default::default() };
            let large = ScenarioConfig { eta_per_m: 0.2, ..small.clone() };
            let a = build_active_set(epi, &poses, &mut derive_stream(seed, "event"), &small);
            let b = build_active_set(epi, &poses, &mut derive_stream(seed, "event"), &large);
            assert!(b.iter().all(|n| a.contains(n)), "seed {seed}");
        }
    }

    #[test]
    fn empty_set_is_undetected() {
        let c = ScenarioConfig { tx_threshold: 1.0, ..Default::default() };
        let e = spawn_at(5, 0, &[pose(3.0, 3.0)], &mut derive_stream(1, "e"), &c);
        assert_eq!(e.status, EventStatus::Undetected);
        assert_eq!(e.deadline_slot, 20);
    }

    #[test]
    fn p_n_extremes() {
        let poses = vec![pose(3.0, 4.0), pose(40.0, 10.0)];
        let c = ScenarioConfig { alpha: 0.0, ..Default::default() };
        assert_eq!(empirical_p_n(&c, &poses, 10_000, &mut derive_stream(1, "p")), vec![0.0, 0.0]);
        let c = ScenarioConfig { tx_threshold: 0.0, ..Default::default() };
        assert_eq!(empirical_p_n(&c, &poses, 10_000, &mut derive_stream(1, "p")), vec![0.1, 0.1]);
    }

    #[test]
    fn p_n_matches_disk_area() {
        let c = ScenarioConfig { eta_per_m: 0.6, tx_threshold: 0.5, ..Default::default() };
        let r = (1.0f64 / 0.5).ln() / 0.6;
        assert!((r - 1.1552).abs() < 1e-4);
        let expected = 0.1 * std::f64::consts::PI * r * r / 2500.0;
        let trials = 2_000_000;
        let est = empirical_p_n(&c, &[pose(25.0, 25.0)], trials, &mut derive_stream(4, "p"))[0];
        // binomial standard error of the hit fraction, scaled by alpha
        let se = 0.1 * ((expected / 0.1) / trials as f64).sqrt();
        assert!((est - expected).abs() < 4.0 * se, "{est} vs {expected}");
    }
}
