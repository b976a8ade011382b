//! FIFO ring buffer of recorded episodes.

use crate::episode::Episode;
use std::collections::VecDeque;

/// Bounded episode store with strictly FIFO eviction.
pub struct EpisodeBuffer {
    episodes: VecDeque<Episode>,
    capacity: usize,
    inserted: u64,
}

impl EpisodeBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        EpisodeBuffer {
            episodes: VecDeque::with_capacity(capacity.min(4096)),
            capacity,
            inserted: 0,
        }
    }

    pub fn push(&mut self, episode: Episode) {
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(episode);
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total insertions since construction (evictions included).
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn get(&self, idx: usize) -> &Episode {
        &self.episodes[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(tag: f64) -> Episode {
        Episode {
            obs: vec![vec![0]],
            actions: vec![vec![0]],
            log_probs: vec![vec![0.0]],
            rewards: vec![tag],
            attributed: None,
            obs_len: 1,
            n_actions: 1,
        }
    }

    #[test]
    fn fifo_eviction_preserves_order() {
        let mut buf = EpisodeBuffer::new(3);
        for k in 0..5 {
            buf.push(ep(k as f64));
        }
        assert_eq!(buf.len(), 3);
        assert_eq!(buf.inserted(), 5);
        let tags: Vec<f64> = buf.iter().map(|e| e.rewards[0]).collect();
        // first two evicted, order preserved
        assert_eq!(tags, vec![2.0, 3.0, 4.0]);
    }
}
