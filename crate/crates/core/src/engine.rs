//! Slot-synchronous simulation of the shared-alarm access protocol.
//!
//! Each slot runs, in order: mobility, event spawning, and for every live
//! alarm past its pilot/CS overhead the contention round (pilot aggregation,
//! CS broadcast, action selection, collision resolution, rewards and
//! training). Alarms then age by one slot and expire once their age exceeds
//! the deadline.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{LinkGain, Link};
use crate::error::{Error, Result};
use crate::events::{spawn_at, spawn_decision, AlarmEvent, EventStatus};
use crate::geometry::{area_center, distance, place_uniform, step_mobility, Point, SubnetPose};
use crate::policy::{make_policy, AccessPolicy, TransmissionPattern};
use crate::scenario::{derive_stream, PilotKind, RewardScope, ScenarioConfig, Stream};
use crate::signature::{aggregate_pilots, broadcast_cs, featurize};

/// Channel-level result of one contention round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collision {
    /// Transmitters per channel.
    pub tx_counts: Vec<u32>,
    /// Channels with exactly one transmitter, ascending.
    pub successful_channels: Vec<usize>,
    /// For each successful channel, the position of its transmitter in the
    /// input slice.
    pub channel_winners: Vec<usize>,
}

impl Collision {
    pub fn success(&self) -> bool {
        !self.successful_channels.is_empty()
    }

    /// Unique transmitter on the lowest-indexed successful channel.
    pub fn winner(&self) -> Option<usize> {
        self.channel_winners.first().copied()
    }
}

/// Collision channel: channel `m` succeeds iff exactly one pattern sets bit `m`.
pub fn resolve_collisions(patterns: &[TransmissionPattern], n_channels: usize) -> Collision {
    let mut tx_counts = vec![0u32; n_channels];
    let mut last = vec![0usize; n_channels];
    for (k, p) in patterns.iter().enumerate() {
        for m in 0..n_channels {
            if p.transmits_on(m) {
                tx_counts[m] += 1;
                last[m] = k;
            }
        }
    }
    let successful_channels: Vec<usize> = (0..n_channels).filter(|&m| tx_counts[m] == 1).collect();
    let channel_winners = successful_channels.iter().map(|&m| last[m]).collect();
    Collision {
        tx_counts,
        successful_channels,
        channel_winners,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRecord {
    pub lap: usize,
    pub context: Vec<f64>,
    pub action: usize,
    /// An alarm held by this LAP was delivered in this slot.
    pub alarm_delivered: bool,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub slot: u64,
    pub tx_counts: Vec<u32>,
    pub success: bool,
    pub successful_channels: Vec<usize>,
    pub winner: Option<usize>,
    pub records: Vec<AgentRecord>,
    /// `(event id, age)` of the alarms contending in this slot.
    pub ages: Vec<(u64, u64)>,
    /// Mean minibatch loss over the agents that trained this slot.
    pub mse: Option<f64>,
}

impl SlotOutcome {
    fn idle(slot: u64) -> Self {
        Self {
            slot,
            tx_counts: Vec::new(),
            success: false,
            successful_channels: Vec::new(),
            winner: None,
            records: Vec::new(),
            ages: Vec::new(),
            mse: None,
        }
    }

    pub fn contended(&self) -> bool {
        !self.records.is_empty()
    }
}

/// Reward for a LAP given whether its alarm was delivered and whether it was
/// the winning transmitter.
pub fn reward_for(alarm_delivered: bool, is_winner: bool, config: &ScenarioConfig) -> f64 {
    let credited = match config.reward_scope {
        RewardScope::Shared => alarm_delivered,
        RewardScope::Individual => is_winner,
    };
    if credited {
        config.reward_success
    } else {
        config.reward_failure
    }
}

/// Reward assigned to `lap` in `outcome`.
pub fn reward_of(outcome: &SlotOutcome, lap: usize, config: &ScenarioConfig) -> Result<f64> {
    let rec = outcome
        .records
        .iter()
        .find(|r| r.lap == lap)
        .ok_or(Error::NotActive(lap))?;
    Ok(reward_for(rec.alarm_delivered, outcome.winner == Some(lap), config))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub id: u64,
    pub birth_slot: u64,
    pub active_count: usize,
    pub status: EventStatus,
    pub delivery_slot: Option<u64>,
    pub contention_slots: u32,
}

impl EventRecord {
    /// Delivered within the deadline. Detected events only.
    pub fn in_time(&self) -> bool {
        self.status == EventStatus::Delivered
    }

    pub fn counts_toward_delivery(&self) -> bool {
        matches!(self.status, EventStatus::Delivered | EventStatus::Expired)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseSample {
    pub slot: u64,
    pub value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunTrace {
    pub seed: u64,
    pub n_slots: u64,
    /// Outcomes of slots that had a contention round.
    pub slots: Vec<SlotOutcome>,
    pub events: Vec<EventRecord>,
    pub mse: Vec<MseSample>,
}

impl RunTrace {
    pub fn terminal_events(&self) -> impl Iterator<Item = &EventRecord> {
        self.events.iter().filter(|e| e.counts_toward_delivery())
    }
}

struct LiveEvent {
    event: AlarmEvent,
    contention_slots: u32,
}

pub struct Simulation {
    config: ScenarioConfig,
    seed: u64,
    slot: u64,
    cap: Point,
    poses: Vec<SubnetPose>,
    links: Vec<Link>,
    policies: Vec<Box<dyn AccessPolicy>>,
    mobility: Stream,
    spawn: Stream,
    channel: Stream,
    noise: Stream,
    live: Vec<LiveEvent>,
    next_event: u64,
    detected_terminal: u64,
    trace: RunTrace,
}

impl Simulation {
    /// Builds a run with one policy of `config.policy_kind` per LAP.
    pub fn new(config: &ScenarioConfig, seed: u64) -> Result<Self> {
        let policies = (0..config.n_subnets)
            .map(|n| make_policy(config.policy_kind, config, seed, n))
            .collect();
        Self::with_policies(config, seed, policies)
    }

    pub fn with_policies(config: &ScenarioConfig, seed: u64, policies: Vec<Box<dyn AccessPolicy>>) -> Result<Self> {
        config.validate()?;
        assert_eq!(policies.len(), config.n_subnets, "one policy per LAP");
        let poses = place_uniform(config, &mut derive_stream(seed, "placement"))?;
        Self::with_poses(config, seed, poses, policies)
    }

    /// Builds a run over explicit initial poses.
    pub fn with_poses(
        config: &ScenarioConfig,
        seed: u64,
        poses: Vec<SubnetPose>,
        policies: Vec<Box<dyn AccessPolicy>>,
    ) -> Result<Self> {
        config.validate()?;
        let cap = area_center(config);
        let mut los = derive_stream(seed, "los");
        let links = poses
            .iter()
            .map(|p| Link::new(distance(p.position, cap), config, &mut los))
            .collect();
        Ok(Self {
            config: config.clone(),
            seed,
            slot: 0,
            cap,
            poses,
            links,
            policies,
            mobility: derive_stream(seed, "mobility"),
            spawn: derive_stream(seed, "events"),
            channel: derive_stream(seed, "channel"),
            noise: derive_stream(seed, "noise"),
            live: Vec::new(),
            next_event: 0,
            detected_terminal: 0,
            trace: RunTrace {
                seed,
                ..Default::default()
            },
        })
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn poses(&self) -> &[SubnetPose] {
        &self.poses
    }

    pub fn policies(&self) -> &[Box<dyn AccessPolicy>] {
        &self.policies
    }

    pub fn live_events(&self) -> impl Iterator<Item = &AlarmEvent> {
        self.live.iter().map(|l| &l.event)
    }

    pub fn trace(&self) -> &RunTrace {
        &self.trace
    }

    /// Whether the configured horizon has been reached.
    pub fn finished(&self) -> bool {
        if let Some(target) = self.config.n_events {
            if self.detected_terminal >= target {
                return true;
            }
        }
        self.slot >= self.config.n_slots
    }

    pub fn run_to_end(mut self) -> Result<RunTrace> {
        while !self.finished() {
            self.run_slot()?;
        }
        Ok(self.into_trace())
    }

    pub fn into_trace(mut self) -> RunTrace {
        self.trace.n_slots = self.slot;
        self.trace
    }

    pub fn run_slot(&mut self) -> Result<SlotOutcome> {
        let slot = self.slot;
        step_mobility(&mut self.poses, &self.config, &mut self.mobility);

        // The spawn draw is taken every slot so that spawn opportunities line
        // up across runs that differ only in policy.
        let fire = spawn_decision(&mut self.spawn, self.config.alpha);
        if fire && (self.config.allow_overlapping_events || self.live.is_empty()) {
            let id = self.next_event;
            self.next_event += 1;
            let mut stream = derive_stream(self.seed, &format!("event/{id}"));
            let event = spawn_at(slot, id, &self.poses, &mut stream, &self.config);
            if event.status == EventStatus::Undetected {
                self.trace.events.push(EventRecord {
                    id,
                    birth_slot: slot,
                    active_count: 0,
                    status: EventStatus::Undetected,
                    delivery_slot: None,
                    contention_slots: 0,
                });
            } else {
                self.live.push(LiveEvent {
                    event,
                    contention_slots: 0,
                });
            }
        }

        let overhead = u64::from(self.config.cs_overhead_slots);
        let contending: Vec<usize> = (0..self.live.len())
            .filter(|&i| self.live[i].event.age(slot) >= overhead)
            .collect();

        let outcome = if contending.is_empty() {
            SlotOutcome::idle(slot)
        } else {
            self.contend(slot, &contending)?
        };

        // Deliveries and deadline expiry.
        let deadline = u64::from(self.config.deadline_slots);
        let mut finished = Vec::new();
        for (i, live) in self.live.iter_mut().enumerate() {
            if live.event.status == EventStatus::Delivered {
                finished.push(i);
            } else if live.event.age(slot) >= deadline {
                live.event.status = EventStatus::Expired;
                finished.push(i);
            }
        }
        for &i in finished.iter().rev() {
            let live = self.live.remove(i);
            for &n in &live.event.active_set {
                self.policies[n].end_event();
            }
            self.detected_terminal += 1;
            self.trace.events.push(EventRecord {
                id: live.event.id,
                birth_slot: live.event.birth_slot,
                active_count: live.event.active_set.len(),
                status: live.event.status,
                delivery_slot: live.event.delivery_slot,
                contention_slots: live.contention_slots,
            });
        }

        if let Some(v) = outcome.mse {
            self.trace.mse.push(MseSample { slot, value: v });
        }
        if outcome.contended() {
            self.trace.slots.push(outcome.clone());
        }
        self.slot += 1;
        Ok(outcome)
    }

    fn contend(&mut self, slot: u64, contending: &[usize]) -> Result<SlotOutcome> {
        let m = self.config.n_channels;
        let snr = self.config.snr_linear();

        let mut laps: Vec<usize> = contending
            .iter()
            .flat_map(|&i| self.live[i].event.active_set.iter().copied())
            .collect();
        laps.sort_unstable();
        laps.dedup();

        let gains: Vec<LinkGain> = laps
            .iter()
            .map(|&n| self.links[n].draw(self.poses[n].position, self.cap, &self.config, &mut self.channel))
            .collect();
        let pilots: Vec<Vec<Complex64>> = laps
            .iter()
            .map(|_| match self.config.pilot_kind {
                PilotKind::Ones => vec![Complex64::new(1.0, 0.0); m],
                PilotKind::RandomPhase => (0..m)
                    .map(|_| Complex64::from_polar(1.0, self.channel.random::<f64>() * std::f64::consts::TAU))
                    .collect(),
            })
            .collect();
        let gain_refs: Vec<&[Complex64]> = gains.iter().map(|g| g.gain.as_slice()).collect();
        let pilot_refs: Vec<&[Complex64]> = pilots.iter().map(|p| p.as_slice()).collect();
        let y = aggregate_pilots(m, &gain_refs, &pilot_refs, snr, Some(&mut self.noise));

        let mut contexts = Vec::with_capacity(laps.len());
        let mut patterns = Vec::with_capacity(laps.len());
        for (k, &n) in laps.iter().enumerate() {
            let y_n = broadcast_cs(&y, &gains[k].gain, snr, Some(&mut self.noise));
            let ctx = featurize(&y_n);
            patterns.push(self.policies[n].select_action(&ctx)?);
            contexts.push(ctx);
        }

        let collision = resolve_collisions(&patterns, m);
        let winners: Vec<usize> = collision.channel_winners.iter().map(|&k| laps[k]).collect();
        let winner = winners.first().copied();

        let mut ages = Vec::with_capacity(contending.len());
        for &i in contending {
            let live = &mut self.live[i];
            live.contention_slots += 1;
            ages.push((live.event.id, live.event.age(slot)));
            if live.event.active_set.iter().any(|n| winners.contains(n)) {
                live.event.status = EventStatus::Delivered;
                live.event.delivery_slot = Some(slot);
            }
        }

        let mut records = Vec::with_capacity(laps.len());
        let mut losses = Vec::new();
        for (k, &n) in laps.iter().enumerate() {
            let alarm_delivered = contending.iter().any(|&i| {
                let e = &self.live[i].event;
                e.status == EventStatus::Delivered && e.active_set.binary_search(&n).is_ok()
            });
            let reward = reward_for(alarm_delivered, winner == Some(n), &self.config);
            if let Some(l) = self.policies[n].observe(&contexts[k], patterns[k], reward)? {
                losses.push(l);
            }
            records.push(AgentRecord {
                lap: n,
                context: std::mem::take(&mut contexts[k]),
                action: patterns[k].index(),
                alarm_delivered,
                reward,
            });
        }

        let mse = (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64);
        Ok(SlotOutcome {
            slot,
            success: collision.success(),
            tx_counts: collision.tx_counts,
            successful_channels: collision.successful_channels,
            winner,
            records,
            ages,
            mse,
        })
    }
}

/// Runs one replication with `config.rng_seed`.
pub fn run(config: &ScenarioConfig) -> Result<RunTrace> {
    Simulation::new(config, config.rng_seed)?.run_to_end()
}
