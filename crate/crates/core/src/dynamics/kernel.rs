//! Exact distributions by enumeration, for instances small enough to list
//! every state and every live-edge profile.

use std::collections::HashMap;

use crate::error::{NrmabError, Result};
use crate::graph_model::Instance;

use super::{reward_code, ActionSet, State};

pub const MAX_EXACT_NODES: usize = 16;
pub const MAX_EXACT_EDGES: usize = 20;

pub fn check_exact_caps(inst: &Instance) -> Result<()> {
    if inst.n() > MAX_EXACT_NODES || inst.edges().len() > MAX_EXACT_EDGES {
        return Err(NrmabError::EnumerationCap {
            nodes: inst.n(),
            edges: inst.edges().len(),
            max_nodes: MAX_EXACT_NODES,
            max_edges: MAX_EXACT_EDGES,
        });
    }
    Ok(())
}

/// A finite distribution over encoded states, sorted by code, zero-mass
/// outcomes omitted.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    n: usize,
    probs: Vec<(u64, f64)>,
}

impl Distribution {
    pub fn from_dense(n: usize, dense: &[f64]) -> Self {
        Distribution {
            n,
            probs: dense
                .iter()
                .enumerate()
                .filter(|&(_, &p)| p > 0.0)
                .map(|(c, &p)| (c as u64, p))
                .collect(),
        }
    }

    fn from_sparse(n: usize, mut probs: Vec<(u64, f64)>) -> Self {
        probs.sort_unstable_by_key(|&(c, _)| c);
        probs.retain(|&(_, p)| p > 0.0);
        Distribution { n, probs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prob(&self, code: u64) -> f64 {
        self.probs
            .binary_search_by_key(&code, |&(c, _)| c)
            .map_or(0.0, |i| self.probs[i].1)
    }

    pub fn prob_of(&self, s: &State) -> f64 {
        s.code().map_or(0.0, |c| self.prob(c))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().map(|&(_, p)| p).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.probs.iter().copied()
    }

    pub fn support_len(&self) -> usize {
        self.probs.len()
    }

    pub fn expect(&self, mut f: impl FnMut(u64) -> f64) -> f64 {
        self.probs.iter().map(|&(c, p)| p * f(c)).sum()
    }
}

/// Per-node `P(u_v = 1 | s_v, a_v)` on encoded state and action mask.
pub(crate) fn arm_probs(inst: &Instance, s: u64, a: u64) -> Vec<f64> {
    inst.dynamics()
        .iter()
        .enumerate()
        .map(|(v, d)| d.activation_prob(s >> v & 1 == 1, a >> v & 1 == 1))
        .collect()
}

/// Dense product-form distribution over `u` from per-node marginals.
fn product_dense(probs: &[f64]) -> Vec<f64> {
    let mut dense = vec![1.0];
    for &p in probs {
        let half = dense.len();
        dense.extend_from_within(..);
        for i in 0..half {
            dense[i] *= 1.0 - p;
            dense[i + half] *= p;
        }
    }
    dense
}

fn encode(inst: &Instance, s: &State, a: &ActionSet) -> Result<(u64, u64)> {
    check_exact_caps(inst)?;
    inst.check_state(s)?;
    inst.check_action(a)?;
    Ok((s.code().expect("n below the cap fits a word"), a.mask()))
}

/// Distribution of the post-transition, pre-cascade state `u`.
pub fn transition_step_distribution(
    inst: &Instance,
    s: &State,
    a: &ActionSet,
) -> Result<Distribution> {
    let (s, a) = encode(inst, s, a)?;
    Ok(Distribution::from_dense(
        inst.n(),
        &product_dense(&arm_probs(inst, s, a)),
    ))
}

/// Nodes reachable from `seeds` over the edges whose bit is set in `live`.
fn closure(edges: &[(usize, usize)], live: u64, seeds: u64) -> u64 {
    let mut reached = seeds;
    loop {
        let before = reached;
        for (i, &(u, v)) in edges.iter().enumerate() {
            if live >> i & 1 == 1 {
                let (bu, bv) = (reached >> u & 1, reached >> v & 1);
                if bu != bv {
                    reached |= 1 << u | 1 << v;
                }
            }
        }
        if reached == before {
            return reached;
        }
    }
}

fn live_profiles(inst: &Instance) -> impl Iterator<Item = (u64, f64)> + '_ {
    let m = inst.edges().len();
    (0..1u64 << m).map(move |live| {
        let p = inst
            .edges()
            .iter()
            .enumerate()
            .map(|(i, e)| {
                if live >> i & 1 == 1 {
                    e.weight
                } else {
                    1.0 - e.weight
                }
            })
            .product();
        (live, p)
    })
}

fn edge_pairs(inst: &Instance) -> Vec<(usize, usize)> {
    inst.edges().iter().map(|e| (e.u, e.v)).collect()
}

/// `P_G(s' | u)`: enumerates every live-edge profile and takes reachability
/// from the active nodes of `u`.
pub fn cascade_distribution(inst: &Instance, u: &State) -> Result<Distribution> {
    check_exact_caps(inst)?;
    inst.check_state(u)?;
    let seeds = u.code().expect("n below the cap fits a word");
    let pairs = edge_pairs(inst);
    let mut acc: HashMap<u64, f64> = HashMap::new();
    for (live, p) in live_profiles(inst) {
        *acc.entry(closure(&pairs, live, seeds)).or_insert(0.0) += p;
    }
    Ok(Distribution::from_sparse(
        inst.n(),
        acc.into_iter().collect(),
    ))
}

/// `P(s' | s, a) = Σ_u P(u | s, a) · P_G(s' | u)`.
pub fn full_kernel(inst: &Instance, s: &State, a: &ActionSet) -> Result<Distribution> {
    let step = transition_step_distribution(inst, s, a)?;
    let mut dense = vec![0.0; 1 << inst.n()];
    for (u, pu) in step.iter() {
        for (next, pg) in cascade_distribution(inst, &State::from_code(inst.n(), u))?.iter() {
            dense[next as usize] += pu * pg;
        }
    }
    Ok(Distribution::from_dense(inst.n(), &dense))
}

/// Exact kernel with every cascade distribution precomputed. All queries
/// work on encoded states and action masks.
pub struct ExactKernel<'a> {
    inst: &'a Instance,
    /// `cascade[u]` is the sparse distribution of `s'` given `u`.
    cascade: Vec<Vec<(u64, f64)>>,
}

impl<'a> ExactKernel<'a> {
    pub fn new(inst: &'a Instance) -> Result<Self> {
        check_exact_caps(inst)?;
        let n = inst.n();
        let size = 1usize << n;
        let mut acc: Vec<HashMap<u64, f64>> = vec![HashMap::new(); size];
        let mut reach = vec![0u64; size];
        for (live, p) in live_profiles(inst) {
            // Component of each node under this live-edge profile.
            let mut parent: Vec<usize> = (0..n).collect();
            fn find(parent: &mut [usize], x: usize) -> usize {
                let mut r = x;
                while parent[r] != r {
                    r = parent[r];
                }
                let mut c = x;
                while parent[c] != r {
                    let next = parent[c];
                    parent[c] = r;
                    c = next;
                }
                r
            }
            for (i, e) in inst.edges().iter().enumerate() {
                if live >> i & 1 == 1 {
                    let (ru, rv) = (find(&mut parent, e.u), find(&mut parent, e.v));
                    if ru != rv {
                        parent[ru] = rv;
                    }
                }
            }
            let mut comp_mask = vec![0u64; n];
            for v in 0..n {
                let r = find(&mut parent, v);
                comp_mask[r] |= 1 << v;
            }
            let comp: Vec<u64> = (0..n).map(|v| comp_mask[find(&mut parent, v)]).collect();
            for u in 1..size {
                let low = u.trailing_zeros() as usize;
                reach[u] = reach[u & (u - 1)] | comp[low];
            }
            for u in 0..size {
                *acc[u].entry(reach[u]).or_insert(0.0) += p;
            }
        }
        let cascade = acc
            .into_iter()
            .map(|m| {
                let mut v: Vec<(u64, f64)> = m.into_iter().collect();
                v.sort_unstable_by_key(|&(c, _)| c);
                v
            })
            .collect();
        Ok(ExactKernel { inst, cascade })
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    pub fn n(&self) -> usize {
        self.inst.n()
    }

    pub fn num_states(&self) -> usize {
        1 << self.inst.n()
    }

    pub fn cascade(&self, u: u64) -> &[(u64, f64)] {
        &self.cascade[u as usize]
    }

    /// Dense `P(s' | s, a)`.
    pub fn kernel_dense(&self, s: u64, a: u64) -> Vec<f64> {
        let step = product_dense(&arm_probs(self.inst, s, a));
        let mut out = vec![0.0; self.num_states()];
        for (u, &pu) in step.iter().enumerate() {
            if pu == 0.0 {
                continue;
            }
            for &(next, pg) in &self.cascade[u] {
                out[next as usize] += pu * pg;
            }
        }
        out
    }

    /// `W(u) = Σ_{s'} P_G(s' | u) · V(s')` for every `u`.
    pub fn cascade_values(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.num_states());
        self.cascade
            .iter()
            .map(|d| d.iter().map(|&(c, p)| p * values[c as usize]).sum())
            .collect()
    }

    /// `Σ_u P(u | s, a) · w(u)`, contracting one arm at a time.
    pub fn expectation(&self, s: u64, a: u64, w: &[f64]) -> f64 {
        let probs = arm_probs(self.inst, s, a);
        let mut buf = w.to_vec();
        for v in (0..self.n()).rev() {
            let half = 1usize << v;
            let p = probs[v];
            for i in 0..half {
                buf[i] = (1.0 - p) * buf[i] + p * buf[i + half];
            }
        }
        buf[0]
    }

    /// `E[V(s') | s, a]` for a full value table.
    pub fn expected_value(&self, s: u64, a: u64, values: &[f64]) -> f64 {
        self.expectation(s, a, &self.cascade_values(values))
    }

    /// Table of immediate rewards indexed by encoded state.
    pub fn reward_table(&self) -> Vec<f64> {
        (0..self.num_states() as u64)
            .map(|c| reward_code(self.inst, c))
            .collect()
    }
}
