//! The two-phase stochastic kernel: independent arm transitions followed by
//! an independent cascade over the live edges.

mod kernel;
mod sampling;

pub use kernel::{
    cascade_distribution, check_exact_caps, full_kernel, transition_step_distribution,
    Distribution, ExactKernel, MAX_EXACT_EDGES, MAX_EXACT_NODES,
};
pub use sampling::{
    apply_profile, for_each_profile, sample_coin_profile, sample_step, CoinProfile,
    MAX_PROFILE_ENUMERATION,
};

use std::fmt;

use crate::error::{NrmabError, Result};
use crate::graph_model::{Instance, NodeId};

/// Arm statuses as a bit-vector; bit `v` is node `v`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    n: usize,
    words: Vec<u64>,
}

impl State {
    pub fn zeros(n: usize) -> Self {
        State {
            n,
            words: vec![0; n.div_ceil(64)],
        }
    }

    pub fn ones(n: usize) -> Self {
        let mut s = State::zeros(n);
        for v in 0..n {
            s.set(v, true);
        }
        s
    }

    /// Decodes the canonical integer encoding (bit `v` is the `2^v` digit).
    pub fn from_code(n: usize, code: u64) -> Self {
        assert!(n <= 64, "integer encoding needs n <= 64");
        assert!(
            n == 64 || code >> n == 0,
            "code {code} has bits above n = {n}"
        );
        let mut s = State::zeros(n);
        if n > 0 {
            s.words[0] = code;
        }
        s
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = State::zeros(bits.len());
        for (v, &b) in bits.iter().enumerate() {
            s.set(v, b);
        }
        s
    }

    /// Canonical integer encoding; `None` when `n > 64`.
    pub fn code(&self) -> Option<u64> {
        match self.n {
            0 => Some(0),
            n if n <= 64 => Some(self.words[0]),
            _ => None,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, v: NodeId) -> bool {
        debug_assert!(v < self.n);
        self.words[v / 64] >> (v % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, v: NodeId, on: bool) {
        debug_assert!(v < self.n);
        if on {
            self.words[v / 64] |= 1 << (v % 64);
        } else {
            self.words[v / 64] &= !(1 << (v % 64));
        }
    }

    pub fn count_active(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn active_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.n).filter(move |&v| self.get(v))
    }

    /// True when every active node of `self` is active in `other`.
    pub fn is_subset_of(&self, other: &State) -> bool {
        self.n == other.n
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| a & !b == 0)
    }

    /// Nodes active in `self` but not in `other`.
    pub fn difference(&self, other: &State) -> State {
        State {
            n: self.n,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & !b)
                .collect(),
        }
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bits: String = (0..self.n)
            .map(|v| if self.get(v) { '1' } else { '0' })
            .collect();
        write!(f, "State({bits})")
    }
}

/// A set of nodes to act on. Members are kept sorted and unique, so the
/// derived ordering is lexicographic on the sorted member list.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionSet {
    members: Vec<NodeId>,
}

impl ActionSet {
    pub fn empty() -> Self {
        ActionSet::default()
    }

    /// Builds a set, rejecting duplicates and nodes outside `0..n`.
    pub fn new(members: impl IntoIterator<Item = NodeId>, n: usize) -> Result<Self> {
        let mut members: Vec<NodeId> = members.into_iter().collect();
        members.sort_unstable();
        for w in members.windows(2) {
            if w[0] == w[1] {
                return Err(NrmabError::InvalidArgument(format!(
                    "node {} appears twice in action set",
                    w[0]
                )));
            }
        }
        if let Some(&last) = members.last() {
            if last >= n {
                return Err(NrmabError::InvalidArgument(format!(
                    "action node {last} outside 0..{n}"
                )));
            }
        }
        Ok(ActionSet { members })
    }

    pub(crate) fn from_sorted_unchecked(members: Vec<NodeId>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        ActionSet { members }
    }

    pub fn from_mask(mask: u64) -> Self {
        ActionSet {
            members: (0..64).filter(|&v| mask >> v & 1 == 1).collect(),
        }
    }

    pub fn mask(&self) -> u64 {
        self.members.iter().fold(0, |m, &v| {
            assert!(v < 64, "mask form needs members below 64");
            m | 1 << v
        })
    }

    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    /// `self ∪ {v}`.
    pub fn with(&self, v: NodeId) -> Self {
        let mut members = self.members.clone();
        if let Err(pos) = members.binary_search(&v) {
            members.insert(pos, v);
        }
        ActionSet { members }
    }

    pub fn is_subset_of(&self, other: &ActionSet) -> bool {
        self.members.iter().all(|&v| other.contains(v))
    }

    /// Length-`n` indicator vector.
    pub fn indicator(&self, n: usize) -> Vec<bool> {
        let mut bits = vec![false; n];
        for &v in &self.members {
            bits[v] = true;
        }
        bits
    }
}

impl Instance {
    /// Checks that `a` names valid nodes and respects the budget.
    pub fn check_action(&self, a: &ActionSet) -> Result<()> {
        if a.len() > self.budget() {
            return Err(NrmabError::ContractViolation(format!(
                "action set of size {} exceeds budget k = {}",
                a.len(),
                self.budget()
            )));
        }
        if let Some(&v) = a.members().last() {
            if v >= self.n() {
                return Err(NrmabError::ContractViolation(format!(
                    "action node {v} outside 0..{}",
                    self.n()
                )));
            }
        }
        Ok(())
    }

    pub fn check_state(&self, s: &State) -> Result<()> {
        if s.len() != self.n() {
            return Err(NrmabError::ContractViolation(format!(
                "state has length {} but the instance has {} nodes",
                s.len(),
                self.n()
            )));
        }
        Ok(())
    }
}

/// Immediate reward `Σ_v r(v)·s_v`. The reward depends on the state only,
/// so it is the same for every action set.
pub fn reward(inst: &Instance, s: &State) -> f64 {
    s.active_nodes().fold(0.0, |acc, v| acc + inst.rewards()[v])
}

/// [`reward`] on the integer encoding.
pub fn reward_code(inst: &Instance, code: u64) -> f64 {
    inst.rewards()
        .iter()
        .enumerate()
        .filter(|&(v, _)| code >> v & 1 == 1)
        .fold(0.0, |acc, (_, r)| acc + r)
}
