use std::collections::VecDeque;

use rand::Rng;

use super::network::Transition;

/// FIFO experience buffer with uniform (with replacement) minibatch draws.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    buffer: VecDeque<Transition<T>>,
    capacity: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            buffer: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, t: Transition<T>) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition<T>> {
        self.buffer.iter()
    }

    /// `size` transitions drawn uniformly, or `None` while the buffer holds
    /// fewer than `size`.
    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Option<Vec<&Transition<T>>> {
        if self.buffer.len() < size || size == 0 {
            return None;
        }
        Some(
            (0..size)
                .map(|_| &self.buffer[rng.random_range(0..self.buffer.len())])
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(i: usize) -> Transition<f64> {
        Transition {
            features: vec![i as f64],
            action: 0,
            reward: 0.0,
            next_features: vec![0.0],
            done: false,
        }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(t(i));
        }
        assert_eq!(buf.len(), 3);
        let kept: Vec<f64> = buf.iter().map(|x| x.features[0]).collect();
        assert_eq!(kept, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn no_sampling_below_minibatch() {
        let mut buf = ReplayBuffer::new(10);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        buf.push(t(0));
        assert!(buf.sample(2, &mut rng).is_none());
        buf.push(t(1));
        assert_eq!(buf.sample(2, &mut rng).unwrap().len(), 2);
    }
}
