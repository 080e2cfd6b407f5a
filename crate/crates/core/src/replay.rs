//! Ring-buffer experience storage and mixed-ratio minibatch sampling.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::nn::{read_f64, read_u64, Tensor};

/// How an environment step ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndKind {
    NotDone,
    /// Absorbing state: no bootstrap from the next state.
    Terminal,
    /// Time limit: the next state still bootstraps.
    Truncated,
}

impl EndKind {
    pub fn is_terminal(self) -> bool {
        self == EndKind::Terminal
    }

    pub fn ends_episode(self) -> bool {
        self != EndKind::NotDone
    }

    fn code(self) -> f64 {
        match self {
            EndKind::NotDone => 0.0,
            EndKind::Terminal => 1.0,
            EndKind::Truncated => 2.0,
        }
    }

    fn from_code(c: f64) -> Result<Self> {
        match c as i64 {
            0 => Ok(EndKind::NotDone),
            1 => Ok(EndKind::Terminal),
            2 => Ok(EndKind::Truncated),
            _ => Err(LabError::State(format!("bad end code {c}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub end: EndKind,
}

/// A training minibatch. `from_self[i]` marks rows drawn from the learner's own buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub states: Tensor,
    pub actions: Tensor,
    pub rewards: Vec<f64>,
    pub next_states: Tensor,
    pub ends: Vec<EndKind>,
    pub from_self: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// `1.0` where the next state bootstraps, `0.0` at true terminals.
    pub fn bootstrap_mask(&self) -> Vec<f64> {
        self.ends
            .iter()
            .map(|e| if e.is_terminal() { 0.0 } else { 1.0 })
            .collect()
    }

    /// `[states | actions]`, the Q-network input.
    pub fn state_actions(&self) -> Tensor {
        self.states
            .hconcat(&self.actions)
            .expect("batch rows agree")
    }
}

/// Fixed-capacity FIFO of transitions stored as flat columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayBuffer {
    obs_dim: usize,
    act_dim: usize,
    capacity: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    ends: Vec<EndKind>,
    cursor: usize,
    len: usize,
}

pub const DEFAULT_CAPACITY: usize = 1_000_000;

impl ReplayBuffer {
    pub fn new(obs_dim: usize, act_dim: usize, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(LabError::config("replay capacity must be positive"));
        }
        Ok(ReplayBuffer {
            obs_dim,
            act_dim,
            capacity,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            ends: Vec::new(),
            cursor: 0,
            len: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.s.len() != self.obs_dim || t.s_next.len() != self.obs_dim || t.a.len() != self.act_dim {
            return Err(LabError::shape(format!(
                "transition dims (s {}, a {}, s' {}) vs buffer (obs {}, act {})",
                t.s.len(),
                t.a.len(),
                t.s_next.len(),
                self.obs_dim,
                self.act_dim
            )));
        }
        if !t.r.is_finite() {
            return Err(LabError::State(format!("non-finite reward {}", t.r)));
        }
        if self.len < self.capacity {
            self.states.extend_from_slice(&t.s);
            self.actions.extend_from_slice(&t.a);
            self.rewards.push(t.r);
            self.next_states.extend_from_slice(&t.s_next);
            self.ends.push(t.end);
            self.len += 1;
        } else {
            let i = self.cursor;
            self.states[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(&t.s);
            self.actions[i * self.act_dim..(i + 1) * self.act_dim].copy_from_slice(&t.a);
            self.rewards[i] = t.r;
            self.next_states[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(&t.s_next);
            self.ends[i] = t.end;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Storage slot `i` (not chronological once the ring has wrapped).
    pub fn get(&self, i: usize) -> Transition {
        let (o, a) = (self.obs_dim, self.act_dim);
        Transition {
            s: self.states[i * o..(i + 1) * o].to_vec(),
            a: self.actions[i * a..(i + 1) * a].to_vec(),
            r: self.rewards[i],
            s_next: self.next_states[i * o..(i + 1) * o].to_vec(),
            end: self.ends[i],
        }
    }

    /// Transitions oldest first.
    pub fn iter_chronological(&self) -> impl Iterator<Item = Transition> + '_ {
        let start = if self.len < self.capacity { 0 } else { self.cursor };
        (0..self.len).map(move |k| self.get((start + k) % self.capacity))
    }

    fn random_slot<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.len)
    }

    /// `n` transitions drawn uniformly with replacement. `None` if empty and `n > 0`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Batch> {
        if n > 0 && self.is_empty() {
            return None;
        }
        let picks: Vec<(bool, usize)> = (0..n).map(|_| (true, self.random_slot(rng))).collect();
        Some(gather(self, self, &picks))
    }

    const MAGIC: &'static [u8; 8] = b"QXRPL001";

    /// Flat little-endian snapshot: magic, dims, capacity, count, then each
    /// transition oldest first as `s, a, r, s', end-code` floats.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        for v in [self.obs_dim, self.act_dim, self.capacity, self.len] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        for t in self.iter_chronological() {
            for v in t.s.iter().chain(&t.a).chain([&t.r]).chain(&t.s_next) {
                w.write_all(&v.to_le_bytes())?;
            }
            w.write_all(&t.end.code().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(LabError::State("not a replay snapshot".into()));
        }
        let obs_dim = read_u64(&mut r)? as usize;
        let act_dim = read_u64(&mut r)? as usize;
        let capacity = read_u64(&mut r)? as usize;
        let count = read_u64(&mut r)? as usize;
        if count > capacity {
            return Err(LabError::State(format!("{count} transitions exceed capacity {capacity}")));
        }
        let mut buf = ReplayBuffer::new(obs_dim, act_dim, capacity)?;
        let read_n = |n: usize, r: &mut R| -> Result<Vec<f64>> {
            (0..n).map(|_| read_f64(r)).collect()
        };
        for _ in 0..count {
            let s = read_n(obs_dim, &mut r)?;
            let a = read_n(act_dim, &mut r)?;
            let rew = read_f64(&mut r)?;
            let s_next = read_n(obs_dim, &mut r)?;
            let end = EndKind::from_code(read_f64(&mut r)?)?;
            buf.push(Transition {
                s,
                a,
                r: rew,
                s_next,
                end,
            })?;
        }
        Ok(buf)
    }
}

fn gather(own: &ReplayBuffer, other: &ReplayBuffer, picks: &[(bool, usize)]) -> Batch {
    let (o, a) = (own.obs_dim, own.act_dim);
    let n = picks.len();
    let mut states = Vec::with_capacity(n * o);
    let mut actions = Vec::with_capacity(n * a);
    let mut rewards = Vec::with_capacity(n);
    let mut next_states = Vec::with_capacity(n * o);
    let mut ends = Vec::with_capacity(n);
    let mut from_self = Vec::with_capacity(n);
    for &(is_self, i) in picks {
        let b = if is_self { own } else { other };
        states.extend_from_slice(&b.states[i * o..(i + 1) * o]);
        actions.extend_from_slice(&b.actions[i * a..(i + 1) * a]);
        rewards.push(b.rewards[i]);
        next_states.extend_from_slice(&b.next_states[i * o..(i + 1) * o]);
        ends.push(b.ends[i]);
        from_self.push(is_self);
    }
    Batch {
        states: Tensor::from_vec(n, o, states).expect("sized"),
        actions: Tensor::from_vec(n, a, actions).expect("sized"),
        rewards,
        next_states: Tensor::from_vec(n, o, next_states).expect("sized"),
        ends,
        from_self,
    }
}

/// Minibatch size and the fraction drawn from the learner's own buffer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedBatchSpec {
    pub batch_size: usize,
    pub self_ratio: f64,
}

impl MixedBatchSpec {
    pub fn new(batch_size: usize, self_ratio: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&self_ratio) {
            return Err(LabError::config(format!("ratio {self_ratio} outside [0, 1]")));
        }
        Ok(MixedBatchSpec {
            batch_size,
            self_ratio,
        })
    }

    /// `⌊B·R⌋` (with a guard against representation error just below an integer).
    pub fn self_count(&self) -> usize {
        let exact = self.batch_size as f64 * self.self_ratio;
        ((exact + 1e-9).floor() as usize).min(self.batch_size)
    }

    pub fn other_count(&self) -> usize {
        self.batch_size - self.self_count()
    }
}

/// Draws `⌊B·R⌋` rows from `own` and the rest from `other`, uniformly with
/// replacement, then shuffles. `None` when a buffer that owes rows is empty.
pub fn sample_mixed<R: Rng + ?Sized>(
    own: &ReplayBuffer,
    other: &ReplayBuffer,
    spec: MixedBatchSpec,
    rng: &mut R,
) -> Option<Batch> {
    let n_self = spec.self_count();
    let n_other = spec.other_count();
    if (n_self > 0 && own.is_empty()) || (n_other > 0 && other.is_empty()) {
        return None;
    }
    if own.obs_dim != other.obs_dim || own.act_dim != other.act_dim {
        return None;
    }
    let mut picks: Vec<(bool, usize)> = Vec::with_capacity(spec.batch_size);
    picks.extend((0..n_self).map(|_| (true, own.random_slot(rng))));
    picks.extend((0..n_other).map(|_| (false, other.random_slot(rng))));
    picks.shuffle(rng);
    Some(gather(own, other, &picks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::lab_rng;

    fn tr(k: f64) -> Transition {
        Transition {
            s: vec![k],
            a: vec![0.0],
            r: k,
            s_next: vec![k + 1.0],
            end: EndKind::NotDone,
        }
    }

    fn filled(n: usize, base: f64) -> ReplayBuffer {
        let mut b = ReplayBuffer::new(1, 1, 1000).unwrap();
        for i in 0..n {
            b.push(tr(base + i as f64)).unwrap();
        }
        b
    }

    #[test]
    fn ring_keeps_newest() {
        let mut b = ReplayBuffer::new(1, 1, 3).unwrap();
        for k in 1..=4 {
            b.push(tr(k as f64)).unwrap();
        }
        let rs: Vec<f64> = b.iter_chronological().map(|t| t.r).collect();
        assert_eq!(rs, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn overwrite_order_by_sequence_number() {
        let mut b = ReplayBuffer::new(1, 1, 7).unwrap();
        for k in 0..25usize {
            b.push(tr(k as f64)).unwrap();
            let rs: Vec<f64> = b.iter_chronological().map(|t| t.r).collect();
            let lo = (k + 1).saturating_sub(7);
            let want: Vec<f64> = (lo..=k).map(|v| v as f64).collect();
            assert_eq!(rs, want);
        }
    }

    #[test]
    fn size_saturates_at_capacity() {
        let mut b = ReplayBuffer::new(1, 1, 10_000).unwrap();
        assert!(b.is_empty());
        b.push(tr(0.0)).unwrap();
        assert_eq!(b.len(), 1);
        for k in 1..10_000 {
            b.push(tr(k as f64)).unwrap();
        }
        assert_eq!(b.len(), 10_000);
        b.push(tr(-1.0)).unwrap();
        assert_eq!(b.len(), 10_000);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut b = ReplayBuffer::new(2, 1, 4).unwrap();
        assert!(matches!(b.push(tr(0.0)), Err(LabError::Shape(_))));
    }

    #[test]
    fn mixed_counts_paper_defaults() {
        let own = filled(50, 0.0);
        let other = filled(50, 1000.0);
        let spec = MixedBatchSpec::new(128, 0.75).unwrap();
        let b = sample_mixed(&own, &other, spec, &mut lab_rng(0)).unwrap();
        assert_eq!(b.len(), 128);
        assert_eq!(b.from_self.iter().filter(|&&x| x).count(), 96);
        assert!(b
            .rewards
            .iter()
            .zip(&b.from_self)
            .all(|(r, &own)| (*r < 1000.0) == own));
    }

    #[test]
    fn pure_ratios_tolerate_empty_other() {
        let own = filled(5, 0.0);
        let empty = ReplayBuffer::new(1, 1, 10).unwrap();
        let all_self = MixedBatchSpec::new(128, 1.0).unwrap();
        let b = sample_mixed(&own, &empty, all_self, &mut lab_rng(1)).unwrap();
        assert!(b.from_self.iter().all(|&x| x));
        let none_self = MixedBatchSpec::new(128, 0.0).unwrap();
        let b = sample_mixed(&empty, &own, none_self, &mut lab_rng(1)).unwrap();
        assert!(b.from_self.iter().all(|&x| !x));
        assert!(sample_mixed(&own, &empty, none_self, &mut lab_rng(1)).is_none());
    }

    #[test]
    fn mixed_is_shuffled() {
        let own = filled(10, 0.0);
        let other = filled(10, 1000.0);
        let b = sample_mixed(&own, &other, MixedBatchSpec::new(64, 0.5).unwrap(), &mut lab_rng(4)).unwrap();
        let first_half_self = b.from_self[..32].iter().filter(|&&x| x).count();
        assert!(first_half_self > 0 && first_half_self < 32);
    }

    #[test]
    fn bad_ratio_rejected() {
        assert!(MixedBatchSpec::new(128, 1.2).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let mut b = ReplayBuffer::new(1, 1, 4).unwrap();
        for k in 0..6 {
            let mut t = tr(k as f64);
            t.end = if k == 5 { EndKind::Truncated } else { EndKind::NotDone };
            b.push(t).unwrap();
        }
        let mut bytes = Vec::new();
        b.write_snapshot(&mut bytes).unwrap();
        let back = ReplayBuffer::read_snapshot(&bytes[..]).unwrap();
        let a: Vec<_> = b.iter_chronological().collect();
        let c: Vec<_> = back.iter_chronological().collect();
        assert_eq!(a, c);
        assert!(ReplayBuffer::read_snapshot(&bytes[..12]).is_err());
    }

    #[test]
    fn sampling_is_uniform_over_slots() {
        // Chi-square over 50 slots, 1e5 draws; 99.9% critical value for df 49.
        let b = filled(50, 0.0);
        let mut counts = [0usize; 50];
        let mut rng = lab_rng(11);
        for _ in 0..1000 {
            for r in b.sample(100, &mut rng).unwrap().rewards {
                counts[r as usize] += 1;
            }
        }
        let expected = 100_000.0 / 50.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 85.35, "chi2 {chi2}");
    }

    #[test]
    fn ratio_grid_counts_are_exact() {
        let own = filled(40, 0.0);
        let other = filled(40, 1000.0);
        for (rq, rqx) in [(0.0, 1.0), (0.25, 0.75), (0.5, 0.5), (0.75, 0.25)] {
            for (ratio, expect) in [(rq, (128.0 * rq) as usize), (rqx, (128.0 * rqx) as usize)] {
                let spec = MixedBatchSpec::new(128, ratio).unwrap();
                let b = sample_mixed(&own, &other, spec, &mut lab_rng(3)).unwrap();
                let own_rows = b.rewards.iter().filter(|&&r| r < 1000.0).count();
                assert_eq!(own_rows, expect, "ratio {ratio}");
                assert_eq!(b.from_self.iter().filter(|&&x| x).count(), expect);
                assert_eq!(b.len(), 128);
            }
        }
    }

    #[test]
    fn same_seed_same_batch() {
        let own = filled(30, 0.0);
        let other = filled(30, 500.0);
        let spec = MixedBatchSpec::new(64, 0.75).unwrap();
        let a = sample_mixed(&own, &other, spec, &mut lab_rng(9)).unwrap();
        let b = sample_mixed(&own, &other, spec, &mut lab_rng(9)).unwrap();
        assert_eq!(a.rewards, b.rewards);
        assert_eq!(a.from_self, b.from_self);
    }

    proptest::proptest! {
        #[test]
        fn mixed_composition_is_floor_of_ratio(batch in 1usize..300, ratio in 0.0f64..=1.0, seed in 0u64..1000) {
            let own = filled(20, 0.0);
            let other = filled(20, 1000.0);
            let spec = MixedBatchSpec::new(batch, ratio).unwrap();
            let b = sample_mixed(&own, &other, spec, &mut lab_rng(seed)).unwrap();
            let want = (batch as f64 * ratio).floor() as usize;
            proptest::prop_assert_eq!(b.len(), batch);
            proptest::prop_assert_eq!(b.rewards.iter().filter(|&&r| r < 1000.0).count(), want);
        }
    }
}
