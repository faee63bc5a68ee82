//! Comparison policies and the policy registry.

mod lookahead;
mod registry;
mod whittle;

pub use lookahead::{
    exact_lookahead_table, topk_singleton_select, LookaheadMode, LookaheadPolicy, ProfileEstimator,
    Selector,
};
pub use registry::{build_policy, PolicyOptions, POLICY_NAMES};
pub use whittle::{whittle_index, whittle_indices, WhittlePolicy};

use rand::RngCore;

use crate::dynamics::{ActionSet, State};

/// Maps a state to an action set of size at most the instance budget.
pub trait Policy: Send + Sync {
    fn name(&self) -> &str;

    /// Chooses an action set. Deterministic policies ignore `rng`; the
    /// others draw only from it.
    fn select(&self, s: &State, rng: &mut dyn RngCore) -> ActionSet;

    /// Inspection data such as index tables or estimator settings.
    fn metadata(&self) -> serde_json::Value {
        serde_json::Value::Null
    }
}

/// Never intervenes.
#[derive(Clone, Copy, Debug, Default)]
pub struct NonePolicy;

impl Policy for NonePolicy {
    fn name(&self) -> &str {
        "none"
    }

    fn select(&self, _s: &State, _rng: &mut dyn RngCore) -> ActionSet {
        ActionSet::empty()
    }
}

/// Acts on `min(k, n)` nodes chosen uniformly at random.
#[derive(Clone, Copy, Debug)]
pub struct RandomPolicy {
    budget: usize,
}

impl RandomPolicy {
    pub fn new(budget: usize) -> Self {
        RandomPolicy { budget }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn select(&self, s: &State, rng: &mut dyn RngCore) -> ActionSet {
        let n = s.len();
        let picks = rand::seq::index::sample(rng, n, self.budget.min(n)).into_vec();
        ActionSet::new(picks, n).expect("distinct in-range picks")
    }
}

/// A policy precomputed for every encoded state.
#[derive(Clone, Debug)]
pub struct TablePolicy {
    name: String,
    actions: Vec<ActionSet>,
    metadata: serde_json::Value,
}

impl TablePolicy {
    pub fn new(
        name: impl Into<String>,
        actions: Vec<ActionSet>,
        metadata: serde_json::Value,
    ) -> Self {
        assert!(
            actions.len().is_power_of_two(),
            "one action set per encoded state"
        );
        TablePolicy {
            name: name.into(),
            actions,
            metadata,
        }
    }

    pub fn actions(&self) -> &[ActionSet] {
        &self.actions
    }
}

impl Policy for TablePolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&self, s: &State, _rng: &mut dyn RngCore) -> ActionSet {
        let code = s
            .code()
            .expect("table policies cover encodable states only");
        self.actions[code as usize].clone()
    }

    fn metadata(&self) -> serde_json::Value {
        self.metadata.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, TAG_POLICY};

    #[test]
    fn none_is_empty() {
        let mut rng = stream(0, TAG_POLICY, 0);
        assert!(NonePolicy.select(&State::ones(5), &mut rng).is_empty());
    }

    #[test]
    fn random_is_reproducible_and_full_size() {
        let s = State::zeros(7);
        let p = RandomPolicy::new(3);
        let a = p.select(&s, &mut stream(4, TAG_POLICY, 0));
        let b = p.select(&s, &mut stream(4, TAG_POLICY, 0));
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert_eq!(
            RandomPolicy::new(9)
                .select(&s, &mut stream(4, TAG_POLICY, 1))
                .len(),
            7
        );
    }
}
