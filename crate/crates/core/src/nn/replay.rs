use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

/// One stored interaction: featurized context, taken action index, reward.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub context: Vec<f64>,
    pub action: usize,
    pub reward: f64,
}

/// Bounded FIFO memory; pushing into a full memory evicts the oldest tuple.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform minibatch of `b` tuples: without replacement when the memory
    /// holds at least `b`, with replacement otherwise.
    pub fn sample<R: Rng>(&self, b: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        let n = self.items.len();
        if n == 0 {
            return Err(Error::EmptyMemory);
        }
        if n >= b {
            Ok(index::sample(rng, n, b).into_iter().map(|i| &self.items[i]).collect())
        } else {
            Ok((0..b).map(|_| &self.items[rng.random_range(0..n)]).collect())
        }
    }
}
