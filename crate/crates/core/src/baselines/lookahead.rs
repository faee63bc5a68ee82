//! Myopic network-aware policies: greedy or top-k selection on the
//! expected next-step reward.

use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;

use super::Policy;
use crate::dynamics::{sample_coin_profile, ActionSet, ExactKernel, State};
use crate::error::Result;
use crate::graph_model::{Instance, NodeId};
use crate::planning::{
    hill_climb, topk_select, ExactQ, HillClimbTrace, MarginalGain, QFunction, QMarginal, ValueTable,
};

/// Monte-Carlo estimate of `E[R(s') | s, A]` over a fixed batch of coin
/// profiles, with O(1) marginal gains per profile.
///
/// Under a profile the next state is the union of the live-edge components
/// touched by `u`, so adding `v` to `A` contributes the reward of `v`'s
/// component exactly when `v` flips (`y_v = 1`, `x_v = 0`) and that
/// component is not yet covered.
pub struct ProfileEstimator {
    n: usize,
    samples: usize,
    /// `component[j * n + v]`.
    component: Vec<u32>,
    component_reward: Vec<Vec<f64>>,
    covered: Vec<Vec<bool>>,
    /// `flips[j * n + v]`: acting on `v` changes its transition outcome.
    flips: Vec<bool>,
    chosen: Vec<bool>,
    total: f64,
}

impl ProfileEstimator {
    pub fn new(inst: &Instance, s: &State, samples: usize, rng: &mut dyn RngCore) -> Self {
        assert!(samples >= 1, "need at least one sample");
        let n = inst.n();
        let mut component = vec![0u32; samples * n];
        let mut component_reward = Vec::with_capacity(samples);
        let mut covered = Vec::with_capacity(samples);
        let mut flips = vec![false; samples * n];
        let mut total = 0.0;
        let mut stack = Vec::new();
        for j in 0..samples {
            let profile = sample_coin_profile(inst, s, rng);
            let comp = &mut component[j * n..(j + 1) * n];
            let mut rewards = Vec::new();
            let mut seen = vec![false; n];
            for root in 0..n {
                if seen[root] {
                    continue;
                }
                let id = rewards.len() as u32;
                let mut sum = 0.0;
                seen[root] = true;
                stack.push(root);
                while let Some(v) = stack.pop() {
                    comp[v] = id;
                    sum += inst.rewards()[v];
                    for &(w, e) in inst.neighbors(v) {
                        if profile.z[e] && !seen[w] {
                            seen[w] = true;
                            stack.push(w);
                        }
                    }
                }
                rewards.push(sum);
            }
            let mut cov = vec![false; rewards.len()];
            for v in profile.x.active_nodes() {
                let c = comp[v] as usize;
                if !cov[c] {
                    cov[c] = true;
                    total += rewards[c];
                }
            }
            for v in 0..n {
                flips[j * n + v] = profile.y.get(v) && !profile.x.get(v);
            }
            component_reward.push(rewards);
            covered.push(cov);
        }
        ProfileEstimator {
            n,
            samples,
            component,
            component_reward,
            covered,
            flips,
            chosen: vec![false; n],
            total,
        }
    }

    /// Current estimate of `E[R(s')]` for the committed set.
    pub fn value(&self) -> f64 {
        self.total / self.samples as f64
    }

    fn raw_gain(&self, v: NodeId) -> f64 {
        (0..self.samples)
            .filter(|&j| self.flips[j * self.n + v])
            .map(|j| {
                let c = self.component[j * self.n + v] as usize;
                if self.covered[j][c] {
                    0.0
                } else {
                    self.component_reward[j][c]
                }
            })
            .sum()
    }
}

impl MarginalGain for ProfileEstimator {
    fn num_candidates(&self) -> usize {
        self.n
    }

    fn gain(&mut self, v: NodeId) -> f64 {
        if self.chosen[v] {
            return 0.0;
        }
        self.raw_gain(v) / self.samples as f64
    }

    fn commit(&mut self, v: NodeId) {
        if std::mem::replace(&mut self.chosen[v], true) {
            return;
        }
        for j in 0..self.samples {
            if self.flips[j * self.n + v] {
                let c = self.component[j * self.n + v] as usize;
                if !self.covered[j][c] {
                    self.covered[j][c] = true;
                    self.total += self.component_reward[j][c];
                }
            }
        }
    }
}

/// How the action set is built from the gains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selector {
    /// Set-conditioned greedy.
    Greedy,
    /// The `k` best singletons.
    TopK,
}

impl Selector {
    fn run<M: MarginalGain + ?Sized>(self, oracle: &mut M, budget: usize) -> HillClimbTrace {
        match self {
            Selector::Greedy => hill_climb(oracle, budget),
            Selector::TopK => topk_select(oracle, budget),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LookaheadMode {
    /// Exact expectations, precomputed as a per-state table.
    Exact,
    /// `m` coin profiles per decision.
    Sampled(usize),
}

enum Backing {
    Table(Vec<ActionSet>),
    Sampled { inst: Arc<Instance>, samples: usize },
}

/// One-step lookahead: scores `A` by the expected reward of the next state
/// and ignores everything after it.
pub struct LookaheadPolicy {
    name: &'static str,
    selector: Selector,
    backing: Backing,
}

impl LookaheadPolicy {
    pub fn new(inst: Arc<Instance>, mode: LookaheadMode, selector: Selector) -> Result<Self> {
        let name = match selector {
            Selector::Greedy => "lookahead1",
            Selector::TopK => "topk",
        };
        let backing = match mode {
            LookaheadMode::Exact => Backing::Table(exact_lookahead_table(&inst, selector)?),
            LookaheadMode::Sampled(samples) => {
                if samples == 0 {
                    return Err(crate::NrmabError::InvalidArgument(
                        "lookahead needs at least one sample".into(),
                    ));
                }
                Backing::Sampled { inst, samples }
            }
        };
        Ok(LookaheadPolicy {
            name,
            selector,
            backing,
        })
    }

    /// Greedy trace for `s`, exposing the per-round gains.
    pub fn trace(&self, s: &State, rng: &mut dyn RngCore) -> Option<HillClimbTrace> {
        match &self.backing {
            Backing::Table(_) => None,
            Backing::Sampled { inst, samples } => {
                let mut est = ProfileEstimator::new(inst, s, *samples, rng);
                Some(self.selector.run(&mut est, inst.budget()))
            }
        }
    }
}

impl Policy for LookaheadPolicy {
    fn name(&self) -> &str {
        self.name
    }

    fn select(&self, s: &State, rng: &mut dyn RngCore) -> ActionSet {
        match &self.backing {
            Backing::Table(actions) => actions
                [s.code().expect("exact lookahead needs an encodable state") as usize]
                .clone(),
            Backing::Sampled { .. } => self.trace(s, rng).expect("sampled backing").selected,
        }
    }

    fn metadata(&self) -> serde_json::Value {
        match &self.backing {
            Backing::Table(_) => serde_json::json!({ "mode": "exact" }),
            Backing::Sampled { samples, .. } => {
                serde_json::json!({ "mode": "sampled", "samples": samples })
            }
        }
    }
}

/// Per-state lookahead choice under exact expectations. Scores are
/// `R(s) + E[R(s')]`; the constant `R(s)` does not move any marginal.
pub fn exact_lookahead_table(inst: &Instance, selector: Selector) -> Result<Vec<ActionSet>> {
    let kernel = ExactKernel::new(inst)?;
    let rewards = ValueTable::new(inst.n(), kernel.reward_table())?;
    let q = ExactQ::with_gamma(&kernel, &rewards, 1.0);
    let n = inst.n();
    Ok((0..1u64 << n)
        .into_par_iter()
        .map(|code| {
            let s = State::from_code(n, code);
            let mut oracle = QMarginal::new(&q, &s);
            selector.run(&mut oracle, inst.budget()).selected
        })
        .collect())
}

/// Top-k singletons under an arbitrary Q source.
pub fn topk_singleton_select<Q: QFunction + ?Sized>(
    inst: &Instance,
    q: &Q,
    s: &State,
) -> ActionSet {
    let mut oracle = QMarginal::new(q, s);
    topk_select(&mut oracle, inst.budget()).selected
}
