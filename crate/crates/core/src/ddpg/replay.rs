use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// One stored step. `a` is the raw action `(d1, d2, u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    /// Set only on true termination, never on horizon truncation.
    pub done: bool,
}

/// Mini-batch laid out one transition per row.
#[derive(Clone, Debug)]
pub struct Batch {
    pub s: Matrix,
    pub a: Matrix,
    pub r: Vec<f64>,
    pub s_next: Matrix,
    pub done: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn from_transitions(items: &[&Transition]) -> Result<Self> {
        let first = items.first().ok_or(Error::EmptyBatch("mini-batch"))?;
        let (ns, na) = (first.s.len(), first.a.len());
        let mut s = Vec::with_capacity(items.len() * ns);
        let mut a = Vec::with_capacity(items.len() * na);
        let mut s_next = Vec::with_capacity(items.len() * ns);
        for t in items {
            if t.s.len() != ns || t.s_next.len() != ns || t.a.len() != na {
                return Err(Error::shape("Batch", format!("state {ns}, action {na}"), format!("state {}, action {}", t.s.len(), t.a.len())));
            }
            s.extend_from_slice(&t.s);
            a.extend_from_slice(&t.a);
            s_next.extend_from_slice(&t.s_next);
        }
        let n = items.len();
        Ok(Self {
            s: Matrix::from_vec(n, ns, s)?,
            a: Matrix::from_vec(n, na, a)?,
            r: items.iter().map(|t| t.r).collect(),
            s_next: Matrix::from_vec(n, ns, s_next)?,
            done: items.iter().map(|t| t.done).collect(),
        })
    }
}

/// Fixed-capacity ring; the oldest transition is overwritten once full.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("buffer_capacity", "must be positive"));
        }
        Ok(Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        })
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
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Contents from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Uniform with replacement over the current contents.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Batch> {
        if self.items.is_empty() || batch_size == 0 {
            return Err(Error::EmptyBatch("replay buffer"));
        }
        let picks: Vec<&Transition> = (0..batch_size).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect();
        Batch::from_transitions(&picks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn t(i: usize) -> Transition {
        Transition {
            s: vec![i as f64],
            a: vec![0.0, 0.0, 0.0],
            r: i as f64,
            s_next: vec![i as f64 + 1.0],
            done: false,
        }
    }

    #[test]
    fn eviction_keeps_latest() {
        let mut b = ReplayBuffer::new(3).unwrap();
        for i in 0..5 {
            b.push(t(i));
        }
        let rs: Vec<f64> = b.iter_oldest_first().map(|t| t.r).collect();
        assert_eq!(rs, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_covers_contents() {
        let mut b = ReplayBuffer::new(4).unwrap();
        for i in 0..4 {
            b.push(t(i));
        }
        let mut r = rng::stream(1, "replay", 0);
        let batch = b.sample(400, &mut r).unwrap();
        for i in 0..4 {
            let n = batch.r.iter().filter(|&&v| v == i as f64).count();
            assert!(n > 60, "index {i} drawn {n} times");
        }
        assert_eq!(batch.s.shape(), (400, 1));
    }

    #[test]
    fn empty_sampling_fails() {
        let b = ReplayBuffer::new(2).unwrap();
        let mut r = rng::stream(1, "replay", 0);
        assert!(matches!(b.sample(4, &mut r), Err(Error::EmptyBatch(_))));
        assert!(ReplayBuffer::new(0).is_err());
    }
}
