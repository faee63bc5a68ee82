use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{MAX_EXACT_EDGES, MAX_EXACT_NODES};
use crate::error::{NrmabError, Result};
use crate::graph_model::Instance;
use crate::learning::{q_learn, LearningConfig, Selection};
use crate::planning::RolloutHillClimbPolicy;

use super::{
    LookaheadMode, LookaheadPolicy, NonePolicy, Policy, RandomPolicy, Selector, WhittlePolicy,
};

pub const POLICY_NAMES: [&str; 8] = [
    "hc-rollout",
    "hc-qlearn",
    "tabular-qlearn",
    "whittle",
    "lookahead1",
    "topk",
    "random",
    "none",
];

/// Largest graph for which the lookahead policies precompute exact
/// per-state tables when left on `auto`.
const EXACT_LOOKAHEAD_NODES: usize = 10;

/// Tunables shared by every policy the registry builds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyOptions {
    /// `auto`, `exact` or `sampled`. `auto` is exact up to 10 nodes.
    pub lookahead_mode: String,
    pub lookahead_samples: usize,
    pub rollout_horizon: usize,
    pub rollout_samples: usize,
    pub rollout_base: String,
    pub rollout_lazy: bool,
    pub learning: LearningConfig,
}

impl Default for PolicyOptions {
    fn default() -> Self {
        PolicyOptions {
            lookahead_mode: "auto".into(),
            lookahead_samples: 200,
            rollout_horizon: 3,
            rollout_samples: 16,
            rollout_base: "none".into(),
            rollout_lazy: true,
            learning: LearningConfig::default(),
        }
    }
}

impl PolicyOptions {
    fn lookahead(&self, inst: &Instance) -> Result<LookaheadMode> {
        let small = inst.n() <= EXACT_LOOKAHEAD_NODES.min(MAX_EXACT_NODES)
            && inst.edges().len() <= MAX_EXACT_EDGES;
        match self.lookahead_mode.as_str() {
            "exact" => Ok(LookaheadMode::Exact),
            "sampled" => Ok(LookaheadMode::Sampled(self.lookahead_samples)),
            "auto" if small => Ok(LookaheadMode::Exact),
            "auto" => Ok(LookaheadMode::Sampled(self.lookahead_samples)),
            other => Err(NrmabError::InvalidArgument(format!(
                "lookahead mode {other:?} is not one of auto, exact, sampled"
            ))),
        }
    }
}

fn unknown(name: &str) -> NrmabError {
    NrmabError::InvalidArgument(format!(
        "unknown policy {name:?}; valid names: {}",
        POLICY_NAMES.join(", ")
    ))
}

/// Builds a policy by name. `seed` keys any training the policy needs, so
/// learned policies differ across master seeds but not across reruns.
pub fn build_policy(
    name: &str,
    inst: Arc<Instance>,
    opts: &PolicyOptions,
    seed: u64,
) -> Result<Box<dyn Policy>> {
    let learned = |selection: Selection, label: &str| -> Result<Box<dyn Policy>> {
        let cfg = LearningConfig {
            seed,
            ..opts.learning.clone()
        };
        let training = q_learn(&inst, &cfg, selection)?;
        Ok(Box::new(training.table.greedy_policy(
            label,
            selection,
            inst.budget(),
        )))
    };
    Ok(match name {
        "none" => Box::new(NonePolicy),
        "random" => Box::new(RandomPolicy::new(inst.budget())),
        "whittle" => Box::new(WhittlePolicy::new(&inst)?),
        "lookahead1" => Box::new(LookaheadPolicy::new(
            inst.clone(),
            opts.lookahead(&inst)?,
            Selector::Greedy,
        )?),
        "topk" => Box::new(LookaheadPolicy::new(
            inst.clone(),
            opts.lookahead(&inst)?,
            Selector::TopK,
        )?),
        "hc-rollout" => {
            if opts.rollout_base == "hc-rollout" {
                return Err(NrmabError::InvalidArgument(
                    "hc-rollout cannot be its own base policy".into(),
                ));
            }
            let base = build_policy(&opts.rollout_base, inst.clone(), opts, seed)?;
            Box::new(RolloutHillClimbPolicy::new(
                inst.clone(),
                base,
                opts.rollout_horizon,
                opts.rollout_samples,
                opts.rollout_lazy,
            )?)
        }
        "hc-qlearn" => learned(Selection::HillClimb, "hc-qlearn")?,
        "tabular-qlearn" => learned(Selection::Exhaustive, "tabular-qlearn")?,
        other => return Err(unknown(other)),
    })
}
