//! Channel-access policies: the learned DRL agent, the MAP-RA bandit and
//! random pattern selection, all behind [`AccessPolicy`].

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{clip_gradient, loss_and_gradient, Mlp, ReplayMemory, RmsProp, Snapshot, Transition};
use crate::scenario::{derive_stream, PolicyKind, ScenarioConfig, Stream};

/// An M-bit transmission pattern; bit `m` of the index set means "transmit
/// on channel `m`". Index 0 is the silent pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransmissionPattern {
    index: u32,
    channels: u8,
}

impl TransmissionPattern {
    pub fn from_index(index: usize, channels: usize) -> Result<Self> {
        if channels > 31 || index >= (1usize << channels) {
            return Err(Error::PatternOutOfRange { index, channels });
        }
        Ok(Self {
            index: index as u32,
            channels: channels as u8,
        })
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let index = bits
            .iter()
            .enumerate()
            .fold(0usize, |acc, (m, &b)| acc | (usize::from(b) << m));
        Self::from_index(index, bits.len())
    }

    pub fn silent(channels: usize) -> Self {
        Self {
            index: 0,
            channels: channels as u8,
        }
    }

    pub fn index(self) -> usize {
        self.index as usize
    }

    pub fn channels(self) -> usize {
        usize::from(self.channels)
    }

    pub fn transmits_on(self, m: usize) -> bool {
        self.index >> m & 1 == 1
    }

    pub fn bits(self) -> Vec<bool> {
        (0..self.channels()).map(|m| self.transmits_on(m)).collect()
    }
}

/// Linear ε annealing counted in alarm events.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub floor: f64,
    pub step: f64,
    events: u64,
}

impl EpsilonSchedule {
    pub fn new(start: f64, floor: f64, step: f64) -> Self {
        Self {
            start,
            floor,
            step,
            events: 0,
        }
    }

    pub fn from_config(c: &ScenarioConfig) -> Self {
        Self::new(c.epsilon_start, c.epsilon_floor, c.epsilon_step)
    }

    pub fn value(&self) -> f64 {
        (self.start - self.events as f64 * self.step).max(self.floor)
    }

    pub fn advance(&mut self) {
        self.events += 1;
    }

    pub fn events(&self) -> u64 {
        self.events
    }
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy choice. One uniform draw decides exploration; exploring consumes
/// a second draw for the pattern.
fn epsilon_greedy(values: &[f64], epsilon: f64, rng: &mut Stream) -> usize {
    let u: f64 = rng.random();
    if u > epsilon {
        argmax(values)
    } else {
        rng.random_range(0..values.len())
    }
}

pub trait AccessPolicy: Send {
    fn name(&self) -> &str;

    fn select_action(&mut self, context: &[f64]) -> Result<TransmissionPattern>;

    /// Learns from one slot outcome. Returns the minibatch loss when a
    /// gradient step was taken.
    fn observe(&mut self, context: &[f64], action: TransmissionPattern, reward: f64) -> Result<Option<f64>>;

    /// Called once per alarm event the LAP took part in, after it terminates.
    fn end_event(&mut self) {}

    fn epsilon(&self) -> Option<f64> {
        None
    }
}

/// Online DRL agent: ε-greedy over the MLP's action values, replay memory,
/// one clipped RMSProp step per observation.
#[derive(Debug, Clone)]
pub struct DrlAgent {
    channels: usize,
    model: Mlp,
    optimizer: RmsProp,
    memory: ReplayMemory,
    epsilon: EpsilonSchedule,
    minibatch: usize,
    sample_with_replacement: bool,
    clip_threshold: f64,
    lr_decay: f64,
    updates: u64,
    explore: Stream,
    sampling: Stream,
}

impl DrlAgent {
    pub fn new(config: &ScenarioConfig, seed: u64, lap: usize) -> Self {
        let sizes = config.layer_sizes();
        let model = Mlp::init_uniform(&sizes, &mut derive_stream(seed, &format!("init/{lap}")));
        Self::with_model(config, model, seed, lap)
    }

    pub fn with_model(config: &ScenarioConfig, model: Mlp, seed: u64, lap: usize) -> Self {
        let optimizer = RmsProp::new(model.param_count(), config.lr_initial, config.rms_decay, config.rms_epsilon);
        Self {
            channels: config.n_channels,
            model,
            optimizer,
            memory: ReplayMemory::new(config.replay()),
            epsilon: EpsilonSchedule::from_config(config),
            minibatch: config.minibatch(),
            sample_with_replacement: config.sample_with_replacement,
            clip_threshold: config.clip_threshold,
            lr_decay: config.lr_decay_per_event,
            updates: 0,
            explore: derive_stream(seed, &format!("explore/{lap}")),
            sampling: derive_stream(seed, &format!("sampling/{lap}")),
        }
    }

    pub fn model(&self) -> &Mlp {
        &self.model
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    pub fn learning_rate(&self) -> f64 {
        self.optimizer.learning_rate
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            model: self.model.clone(),
            updates: self.updates,
            events: self.epsilon.events(),
            learning_rate: self.optimizer.learning_rate,
        }
    }
}

impl AccessPolicy for DrlAgent {
    fn name(&self) -> &str {
        PolicyKind::Drl.as_str()
    }

    fn select_action(&mut self, context: &[f64]) -> Result<TransmissionPattern> {
        let values = self.model.forward(context)?;
        let i = epsilon_greedy(&values, self.epsilon.value(), &mut self.explore);
        TransmissionPattern::from_index(i, self.channels)
    }

    fn observe(&mut self, context: &[f64], action: TransmissionPattern, reward: f64) -> Result<Option<f64>> {
        self.memory.push(Transition {
            context: context.to_vec(),
            action: action.index(),
            reward,
        });
        if self.memory.len() < self.minibatch && !self.sample_with_replacement {
            return Ok(None);
        }
        let batch = self.memory.sample(self.minibatch, &mut self.sampling)?;
        let (loss, mut grad) = loss_and_gradient(&self.model, &batch)?;
        clip_gradient(&mut grad, self.clip_threshold);
        self.optimizer.step(self.model.params_mut(), &grad);
        self.updates += 1;
        Ok(Some(loss))
    }

    fn end_event(&mut self) {
        self.epsilon.advance();
        self.optimizer.decay_learning_rate(self.lr_decay);
    }

    fn epsilon(&self) -> Option<f64> {
        Some(self.epsilon.value())
    }
}

/// Context-free ε-greedy bandit with `Q ← (1-τ) Q + τ r`.
#[derive(Debug, Clone)]
pub struct MapRaAgent {
    channels: usize,
    q: Vec<f64>,
    tau: f64,
    epsilon: EpsilonSchedule,
    explore: Stream,
}

impl MapRaAgent {
    pub fn new(config: &ScenarioConfig, seed: u64, lap: usize) -> Self {
        Self {
            channels: config.n_channels,
            q: vec![0.0; config.n_patterns()],
            tau: config.mapra_tau,
            epsilon: EpsilonSchedule::from_config(config),
            explore: derive_stream(seed, &format!("explore/{lap}")),
        }
    }

    pub fn q_values(&self) -> &[f64] {
        &self.q
    }

    pub fn set_q_values(&mut self, q: Vec<f64>) {
        assert_eq!(q.len(), self.q.len());
        self.q = q;
    }
}

impl AccessPolicy for MapRaAgent {
    fn name(&self) -> &str {
        PolicyKind::MapRa.as_str()
    }

    fn select_action(&mut self, _context: &[f64]) -> Result<TransmissionPattern> {
        let i = epsilon_greedy(&self.q, self.epsilon.value(), &mut self.explore);
        TransmissionPattern::from_index(i, self.channels)
    }

    fn observe(&mut self, _context: &[f64], action: TransmissionPattern, reward: f64) -> Result<Option<f64>> {
        let q = &mut self.q[action.index()];
        *q = (1.0 - self.tau) * *q + reward * self.tau;
        Ok(None)
    }

    fn end_event(&mut self) {
        self.epsilon.advance();
    }

    fn epsilon(&self) -> Option<f64> {
        Some(self.epsilon.value())
    }
}

/// Uniformly random pattern every slot.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    channels: usize,
    explore: Stream,
}

impl RandomAgent {
    pub fn new(config: &ScenarioConfig, seed: u64, lap: usize) -> Self {
        Self {
            channels: config.n_channels,
            explore: derive_stream(seed, &format!("explore/{lap}")),
        }
    }
}

impl AccessPolicy for RandomAgent {
    fn name(&self) -> &str {
        PolicyKind::Rch.as_str()
    }

    fn select_action(&mut self, _context: &[f64]) -> Result<TransmissionPattern> {
        let i = self.explore.random_range(0..1usize << self.channels);
        TransmissionPattern::from_index(i, self.channels)
    }

    fn observe(&mut self, _: &[f64], _: TransmissionPattern, _: f64) -> Result<Option<f64>> {
        Ok(None)
    }
}

pub fn make_policy(kind: PolicyKind, config: &ScenarioConfig, seed: u64, lap: usize) -> Box<dyn AccessPolicy> {
    match kind {
        PolicyKind::Drl => Box::new(DrlAgent::new(config, seed, lap)),
        PolicyKind::MapRa => Box::new(MapRaAgent::new(config, seed, lap)),
        PolicyKind::Rch => Box::new(RandomAgent::new(config, seed, lap)),
    }
}
