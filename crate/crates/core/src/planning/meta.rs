//! Single-action decomposition of the hill-climbing operator.
//!
//! A meta-state `(s, A, t)` records the environment state, the actions
//! picked so far and how many have been picked. Each selection step adds one
//! action, earning the scaled marginal reward
//! `R̃ = γ̃^{-t}(R(s, A∪{a}) − R(s, A))` and discounting by `γ̃ = γ^{1/k}`.
//! Once `t = k` the transition step applies `A` and moves to `(s', ∅, 0)`.
//! Because `γ̃^k = γ`, `k` selection steps followed by the transition step
//! recover one application of the hill-climbing operator.
//!
//! Meta-state values are never tabulated. They are synthesized from the
//! base table: `(s, ∅, 0)` carries `V(s)`, and any other meta-state carries
//! its commit value `γ̃^{k−t} E[V(s') | s, A]`, the value of applying `A`
//! without further picks.

use crate::dynamics::{reward, ActionSet, ExactKernel, State};
use crate::error::{NrmabError, Result};
use crate::graph_model::{Instance, NodeId};

use super::exact::ExactQ;
use super::ValueTable;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MetaState {
    pub state: State,
    pub actions: ActionSet,
    pub t: usize,
}

impl MetaState {
    pub fn root(state: State) -> Self {
        MetaState {
            state,
            actions: ActionSet::empty(),
            t: 0,
        }
    }

    pub fn advance(&self, a: NodeId) -> Self {
        MetaState {
            state: self.state.clone(),
            actions: self.actions.with(a),
            t: self.t + 1,
        }
    }

    fn check(&self, budget: usize) -> Result<()> {
        if self.t > budget {
            return Err(NrmabError::ContractViolation(format!(
                "meta-state step counter t = {} exceeds budget k = {budget}",
                self.t
            )));
        }
        if self.actions.len() != self.t {
            return Err(NrmabError::ContractViolation(format!(
                "meta-state holds {} actions but t = {}",
                self.actions.len(),
                self.t
            )));
        }
        Ok(())
    }
}

/// `γ̃ = γ^{1/k}`, with `γ = 0` mapped to `0`.
pub fn gamma_tilde(gamma: f64, budget: usize) -> f64 {
    if gamma == 0.0 {
        0.0
    } else {
        gamma.powf(1.0 / budget as f64)
    }
}

/// `R(s, A)`. The reward depends on the state only.
pub fn set_reward(inst: &Instance, s: &State, _a: &ActionSet) -> f64 {
    reward(inst, s)
}

/// `R̃((s, A, t), a) = γ̃^{-t} (R(s, A∪{a}) − R(s, A))`. A zero difference
/// stays zero even when `γ̃^t = 0`.
pub fn modified_reward(inst: &Instance, meta: &MetaState, a: NodeId, gamma_tilde: f64) -> f64 {
    let diff = set_reward(inst, &meta.state, &meta.actions.with(a))
        - set_reward(inst, &meta.state, &meta.actions);
    if diff == 0.0 {
        0.0
    } else {
        diff / gamma_tilde.powi(meta.t as i32)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetaStep {
    pub value: f64,
    /// Maximizing action for selection steps, `None` for the transition step.
    pub choice: Option<NodeId>,
}

/// One application of the multi-step operator at `meta`:
///
/// * `t < k`: `max_{a ∉ A} R̃(meta, a) + γ̃ · ext(s, A∪{a}, t+1)`, lowest id
///   on ties;
/// * `t = k`: `E_{s'}[ext(s', ∅, 0)]` under the full kernel with `A`
///   applied. The discount for this last hop was already paid by the
///   selection step that entered `(s, A, k)`.
pub fn multi_bellman_step(
    kernel: &ExactKernel,
    ext: &dyn Fn(&MetaState) -> f64,
    meta: &MetaState,
) -> Result<MetaStep> {
    let inst = kernel.instance();
    let budget = inst.budget();
    meta.check(budget)?;
    inst.check_state(&meta.state)?;
    let gt = gamma_tilde(inst.gamma(), budget);
    if meta.t < budget {
        let mut best: Option<(NodeId, f64)> = None;
        for a in (0..inst.n()).filter(|&a| !meta.actions.contains(a)) {
            let value = modified_reward(inst, meta, a, gt) + gt * ext(&meta.advance(a));
            if best.is_none_or(|(_, b)| value > b) {
                best = Some((a, value));
            }
        }
        let (a, value) =
            best.ok_or_else(|| NrmabError::ContractViolation("no candidate action left".into()))?;
        Ok(MetaStep {
            value,
            choice: Some(a),
        })
    } else {
        let s = meta.state.code().expect("exact mode");
        let n = inst.n();
        let value = kernel
            .kernel_dense(s, meta.actions.mask())
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p > 0.0)
            .map(|(next, &p)| p * ext(&MetaState::root(State::from_code(n, next as u64))))
            .sum();
        Ok(MetaStep {
            value,
            choice: None,
        })
    }
}

/// `γ̃^{k−t} E[V(s') | s, A]`: value of applying `A` now.
pub fn commit_value(q: &ExactQ, meta: &MetaState) -> f64 {
    let inst = q.kernel().instance();
    let gt = gamma_tilde(inst.gamma(), inst.budget());
    let s = meta.state.code().expect("exact mode");
    gt.powi((inst.budget() - meta.t) as i32) * q.future(s, meta.actions.mask())
}

/// Result of walking the meta-chain from `(s, ∅, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetaWalk {
    pub value: f64,
    pub actions: ActionSet,
    pub order: Vec<NodeId>,
    /// `Σ_j γ̃^j R̃_j` over the selection steps taken.
    pub telescoped: f64,
    /// `R(s, ∅)`, the offset the telescoped sum is measured against.
    pub base_reward: f64,
}

/// Composes selection steps and the transition step from `(s, ∅, 0)`.
/// The chain stops picking early when no single addition beats committing
/// the current set, matching the greedy stopping rule.
pub fn multi_bellman_composite(
    kernel: &ExactKernel,
    values: &ValueTable,
    s: &State,
) -> Result<MetaWalk> {
    let inst = kernel.instance();
    let budget = inst.budget();
    let gt = gamma_tilde(inst.gamma(), budget);
    let q = ExactQ::new(kernel, values);
    let ext = |m: &MetaState| {
        if m.t == 0 && m.actions.is_empty() {
            values.at(&m.state)
        } else {
            commit_value(&q, m)
        }
    };

    let mut meta = MetaState::root(s.clone());
    let mut telescoped = 0.0;
    let mut discount = 1.0;
    let mut order = Vec::new();
    while meta.t < budget {
        let step = multi_bellman_step(kernel, &ext, &meta)?;
        if step.value <= commit_value(&q, &meta) {
            break;
        }
        let a = step.choice.expect("selection step picks an action");
        telescoped += discount * modified_reward(inst, &meta, a, gt);
        discount *= gt;
        order.push(a);
        meta = meta.advance(a);
    }
    let tail = if meta.t == budget {
        multi_bellman_step(kernel, &ext, &meta)?.value
    } else {
        commit_value(&q, &meta)
    };
    let base_reward = set_reward(inst, s, &ActionSet::empty());
    Ok(MetaWalk {
        value: base_reward + telescoped + discount * tail,
        actions: meta.actions,
        order,
        telescoped,
        base_reward,
    })
}
