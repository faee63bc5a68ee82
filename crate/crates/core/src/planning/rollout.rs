//! Monte-Carlo Q estimates for graphs too large to enumerate.

use std::sync::Arc;

use rand::RngCore;

use crate::baselines::Policy;
use crate::dynamics::{reward, sample_step, ActionSet, State};
use crate::error::{NrmabError, Result};
use crate::graph_model::Instance;
use crate::rng::{stream, TAG_ROLLOUT};

use super::hill_climb::{hill_climb, lazy_hill_climb, QMarginal};
use super::QFunction;

fn check_rollout_args(horizon: usize, samples: usize) -> Result<()> {
    if horizon < 1 {
        return Err(NrmabError::InvalidArgument(
            "rollout horizon must be at least 1".into(),
        ));
    }
    if samples < 1 {
        return Err(NrmabError::InvalidArgument(
            "rollout count must be at least 1".into(),
        ));
    }
    Ok(())
}

fn one_rollout(
    inst: &Instance,
    s: &State,
    a: &ActionSet,
    base: &dyn Policy,
    horizon: usize,
    rng: &mut dyn RngCore,
) -> f64 {
    let gamma = inst.gamma();
    let mut ret = reward(inst, s);
    if horizon == 1 {
        return ret;
    }
    let mut state = sample_step(inst, s, a, rng).1;
    let mut discount = gamma;
    for h in 1..horizon {
        ret += discount * reward(inst, &state);
        if h + 1 < horizon {
            let action = base.select(&state, rng);
            state = sample_step(inst, &state, &action, rng).1;
            discount *= gamma;
        }
    }
    ret
}

/// Mean discounted return of `m` rollouts that take `a` in `s` and then
/// follow `base` for `horizon − 1` further steps. Rollout `i` draws from
/// its own stream of `seed`, so estimates for different action sets share
/// their coins.
pub fn rollout_q_seeded(
    inst: &Instance,
    s: &State,
    a: &ActionSet,
    base: &dyn Policy,
    horizon: usize,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    check_rollout_args(horizon, samples)?;
    inst.check_state(s)?;
    inst.check_action(a)?;
    Ok(rollout_mean(inst, s, a, base, horizon, samples, seed))
}

fn rollout_mean(
    inst: &Instance,
    s: &State,
    a: &ActionSet,
    base: &dyn Policy,
    horizon: usize,
    samples: usize,
    seed: u64,
) -> f64 {
    let total: f64 = (0..samples)
        .map(|i| {
            one_rollout(
                inst,
                s,
                a,
                base,
                horizon,
                &mut stream(seed, TAG_ROLLOUT, i as u64),
            )
        })
        .sum();
    total / samples as f64
}

/// [`rollout_q_seeded`] with the seed drawn from `rng`.
pub fn rollout_q(
    inst: &Instance,
    s: &State,
    a: &ActionSet,
    base: &dyn Policy,
    horizon: usize,
    samples: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let seed = rng.next_u64();
    rollout_q_seeded(inst, s, a, base, horizon, samples, seed)
}

/// Rollout Q estimator with fixed parameters, usable as a [`QFunction`].
pub struct RolloutQ<'a> {
    inst: &'a Instance,
    base: &'a dyn Policy,
    horizon: usize,
    samples: usize,
    seed: u64,
}

impl<'a> RolloutQ<'a> {
    pub fn new(
        inst: &'a Instance,
        base: &'a dyn Policy,
        horizon: usize,
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        check_rollout_args(horizon, samples)?;
        Ok(RolloutQ {
            inst,
            base,
            horizon,
            samples,
            seed,
        })
    }
}

impl QFunction for RolloutQ<'_> {
    fn q(&self, s: &State, a: &ActionSet) -> f64 {
        rollout_mean(
            self.inst,
            s,
            a,
            self.base,
            self.horizon,
            self.samples,
            self.seed,
        )
    }
}

/// `R(s) + γ · mean_i V(s'_i)` over `m` sampled successors, for a value
/// function given as a closure over states.
pub struct SampledQ<'a, F> {
    inst: &'a Instance,
    value: F,
    samples: usize,
    seed: u64,
}

impl<'a, F: Fn(&State) -> f64> SampledQ<'a, F> {
    pub fn new(inst: &'a Instance, value: F, samples: usize, seed: u64) -> Result<Self> {
        check_rollout_args(1, samples)?;
        Ok(SampledQ {
            inst,
            value,
            samples,
            seed,
        })
    }
}

impl<F: Fn(&State) -> f64> QFunction for SampledQ<'_, F> {
    fn q(&self, s: &State, a: &ActionSet) -> f64 {
        let total: f64 = (0..self.samples)
            .map(|i| {
                let mut rng = stream(self.seed, TAG_ROLLOUT, i as u64);
                (self.value)(&sample_step(self.inst, s, a, &mut rng).1)
            })
            .sum();
        reward(self.inst, s) + self.inst.gamma() * total / self.samples as f64
    }
}

/// Hill-climbing over rollout Q estimates. Each decision draws one seed
/// from the caller's stream and reuses it for every candidate set.
pub struct RolloutHillClimbPolicy {
    inst: Arc<Instance>,
    base: Box<dyn Policy>,
    horizon: usize,
    samples: usize,
    lazy: bool,
}

impl RolloutHillClimbPolicy {
    pub fn new(
        inst: Arc<Instance>,
        base: Box<dyn Policy>,
        horizon: usize,
        samples: usize,
        lazy: bool,
    ) -> Result<Self> {
        check_rollout_args(horizon, samples)?;
        Ok(RolloutHillClimbPolicy {
            inst,
            base,
            horizon,
            samples,
            lazy,
        })
    }
}

impl Policy for RolloutHillClimbPolicy {
    fn name(&self) -> &str {
        "hc-rollout"
    }

    fn select(&self, s: &State, rng: &mut dyn RngCore) -> ActionSet {
        let q = RolloutQ {
            inst: &self.inst,
            base: self.base.as_ref(),
            horizon: self.horizon,
            samples: self.samples,
            seed: rng.next_u64(),
        };
        let mut oracle = QMarginal::new(&q, s);
        let trace = if self.lazy {
            lazy_hill_climb(&mut oracle, self.inst.budget())
        } else {
            hill_climb(&mut oracle, self.inst.budget())
        };
        trace.selected
    }

    fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "horizon": self.horizon,
            "rollouts": self.samples,
            "base_policy": self.base.name(),
            "lazy": self.lazy,
        })
    }
}
