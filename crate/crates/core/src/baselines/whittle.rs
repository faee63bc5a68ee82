//! Network-blind Whittle index policy.
//!
//! Each arm is treated as an isolated two-state MDP with reward `r·σ`,
//! plus a subsidy `λ` whenever it is left passive. The index of state `σ`
//! is the subsidy at which acting and not acting are equally good there.

use rand::RngCore;
use rayon::prelude::*;

use crate::dynamics::{ActionSet, State};
use crate::error::{NrmabError, Result};
use crate::graph_model::{ArmDynamics, Instance, NodeId};

use super::Policy;

const BISECTION_ITERS: usize = 200;
const BRACKET_DOUBLINGS: usize = 64;
const MONOTONICITY_GRID: usize = 64;

/// Optimal values `(V(0), V(1))` of the subsidized single-arm MDP. With two
/// states and two actions there are four stationary deterministic policies;
/// each is evaluated by a 2×2 solve and the optimum is their pointwise max.
fn arm_values(r: f64, d: &ArmDynamics, gamma: f64, subsidy: f64) -> [f64; 2] {
    let mut best = [f64::NEG_INFINITY; 2];
    for policy in 0..4u8 {
        let act = [policy & 1 == 1, policy & 2 == 2];
        let rew = [
            if act[0] { 0.0 } else { subsidy },
            r + if act[1] { 0.0 } else { subsidy },
        ];
        let p = [
            d.activation_prob(false, act[0]),
            d.activation_prob(true, act[1]),
        ];
        // (I − γP) V = R with P[σ] = (1 − p_σ, p_σ).
        let (a, b) = (1.0 - gamma * (1.0 - p[0]), -gamma * p[0]);
        let (c, e) = (-gamma * (1.0 - p[1]), 1.0 - gamma * p[1]);
        let det = a * e - b * c;
        let v0 = (rew[0] * e - b * rew[1]) / det;
        let v1 = (a * rew[1] - c * rew[0]) / det;
        best[0] = best[0].max(v0);
        best[1] = best[1].max(v1);
    }
    best
}

/// `Q(σ, act) − Q(σ, passive)` at subsidy `λ`.
fn advantage(r: f64, d: &ArmDynamics, gamma: f64, sigma: bool, subsidy: f64) -> f64 {
    let [v0, v1] = arm_values(r, d, gamma, subsidy);
    let lift = d.activation_prob(sigma, true) - d.activation_prob(sigma, false);
    gamma * lift * (v1 - v0) - subsidy
}

/// Whittle index of arm `arm` in state `sigma`, by bisection on the
/// subsidy. The advantage must change sign exactly once on the bracket;
/// a non-monotone advantage or a bracket that never closes is an error.
pub fn whittle_index(inst: &Instance, arm: NodeId, sigma: bool) -> Result<f64> {
    let r = inst.rewards()[arm];
    let d = &inst.dynamics()[arm];
    let gamma = inst.gamma();
    let f = |l: f64| advantage(r, d, gamma, sigma, l);
    let err = |message: String| NrmabError::Whittle { arm, message };

    let at_zero = f(0.0);
    if at_zero == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 0.0);
    let mut width = 1.0f64.max(r);
    let mut closed = false;
    for _ in 0..BRACKET_DOUBLINGS {
        if at_zero > 0.0 {
            hi = width;
            if f(hi) <= 0.0 {
                closed = true;
                break;
            }
            lo = hi;
        } else {
            lo = -width;
            if f(lo) >= 0.0 {
                closed = true;
                break;
            }
            hi = lo;
        }
        width *= 2.0;
    }
    if !closed {
        return Err(err(format!(
            "no sign change of the advantage within ±{width}"
        )));
    }

    let mut prev = f(lo);
    for i in 1..=MONOTONICITY_GRID {
        let l = lo + (hi - lo) * i as f64 / MONOTONICITY_GRID as f64;
        let cur = f(l);
        if cur > prev + 1e-12 {
            return Err(err(format!(
                "advantage increases with the subsidy near λ = {l} (state {}): arm is not indexable",
                sigma as u8
            )));
        }
        prev = cur;
    }

    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let width = hi - lo;
    if width > 1e-9 * hi.abs().max(1.0) {
        return Err(err(format!("bisection stopped with bracket width {width}")));
    }
    Ok(0.5 * (lo + hi))
}

/// `[λ_v(0), λ_v(1)]` for every arm.
pub fn whittle_indices(inst: &Instance) -> Result<Vec<[f64; 2]>> {
    (0..inst.n())
        .into_par_iter()
        .map(|v| {
            Ok([
                whittle_index(inst, v, false)?,
                whittle_index(inst, v, true)?,
            ])
        })
        .collect()
}

/// Acts on the `k` arms with the largest index in their current state,
/// ignoring the graph. Ties go to the higher reward, then the lower id.
/// The budget is always filled, whatever the sign of the indices.
#[derive(Clone, Debug)]
pub struct WhittlePolicy {
    indices: Vec<[f64; 2]>,
    rewards: Vec<f64>,
    budget: usize,
}

impl WhittlePolicy {
    pub fn new(inst: &Instance) -> Result<Self> {
        Ok(WhittlePolicy {
            indices: whittle_indices(inst)?,
            rewards: inst.rewards().to_vec(),
            budget: inst.budget(),
        })
    }

    pub fn indices(&self) -> &[[f64; 2]] {
        &self.indices
    }
}

impl Policy for WhittlePolicy {
    fn name(&self) -> &str {
        "whittle"
    }

    fn select(&self, s: &State, _rng: &mut dyn RngCore) -> ActionSet {
        let mut order: Vec<NodeId> = (0..self.indices.len()).collect();
        let key = |v: NodeId| self.indices[v][s.get(v) as usize];
        order.sort_by(|&a, &b| {
            key(b)
                .total_cmp(&key(a))
                .then(self.rewards[b].total_cmp(&self.rewards[a]))
                .then(a.cmp(&b))
        });
        order.truncate(self.budget);
        ActionSet::new(order, self.indices.len()).expect("distinct in-range arms")
    }

    fn metadata(&self) -> serde_json::Value {
        serde_json::json!({ "indices": self.indices })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ExactKernel;
    use crate::graph_model::test_support::{dyns, labels};
    use crate::graph_model::Edge;
    use crate::planning::{bellman_opt_with_actions, value_iteration, Operator, ValueTable};
    use crate::rng::{stream, TAG_POLICY};
    use proptest::prelude::*;

    fn no_edges(rewards: Vec<f64>, d: Vec<ArmDynamics>, k: usize, gamma: f64) -> Instance {
        let n = rewards.len();
        Instance::new(labels(n), vec![], rewards, d, k, gamma).unwrap()
    }

    #[test]
    fn useless_action_has_zero_index() {
        let i = no_edges(
            vec![1.0, 1.0],
            vec![dyns(0.2, 0.2, 0.7, 0.7), dyns(0.1, 0.5, 0.6, 0.9)],
            1,
            0.9,
        );
        assert_eq!(whittle_index(&i, 0, false).unwrap(), 0.0);
        assert_eq!(whittle_index(&i, 0, true).unwrap(), 0.0);
        assert!(whittle_index(&i, 1, false).unwrap() > 0.0);
    }

    #[test]
    fn index_balances_the_two_actions() {
        let i = no_edges(vec![2.0], vec![dyns(0.1, 0.6, 0.5, 0.9)], 1, 0.95);
        for sigma in [false, true] {
            let l = whittle_index(&i, 0, sigma).unwrap();
            assert!(advantage(2.0, &i.dynamics()[0], 0.95, sigma, l).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_arms_fall_back_to_tie_break() {
        let i = no_edges(vec![1.0; 5], vec![dyns(0.1, 0.5, 0.6, 0.9); 5], 2, 0.9);
        let p = WhittlePolicy::new(&i).unwrap();
        let a = p.select(&State::zeros(5), &mut stream(0, TAG_POLICY, 0));
        assert_eq!(a.members(), &[0, 1]);
    }

    #[test]
    fn reward_breaks_index_ties() {
        let i = no_edges(
            vec![1.0, 1.0, 1.0],
            vec![dyns(0.2, 0.2, 0.7, 0.7); 3],
            1,
            0.9,
        );
        let mut p = WhittlePolicy::new(&i).unwrap();
        p.rewards = vec![1.0, 3.0, 2.0];
        assert_eq!(
            p.select(&State::zeros(3), &mut stream(0, TAG_POLICY, 0))
                .members(),
            &[1]
        );
    }

    #[test]
    fn edges_do_not_change_indices() {
        let d = vec![
            dyns(0.1, 0.5, 0.6, 0.9),
            dyns(0.05, 0.7, 0.7, 0.95),
            dyns(0.2, 0.4, 0.5, 0.6),
        ];
        let a = no_edges(vec![1.0, 2.0, 0.5], d, 1, 0.9);
        let b = a
            .with_edges(vec![
                Edge {
                    u: 0,
                    v: 2,
                    weight: 0.5,
                },
                Edge {
                    u: 1,
                    v: 2,
                    weight: 0.9,
                },
            ])
            .unwrap();
        assert_eq!(whittle_indices(&a).unwrap(), whittle_indices(&b).unwrap());
    }

    /// Without edges the problem is a plain RMAB, so the first action of
    /// the exact optimum from the all-inactive state is checkable.
    #[test]
    fn matches_exact_single_arm_choice() {
        let i = no_edges(
            vec![1.0, 1.0, 1.0],
            vec![
                dyns(0.1, 0.3, 0.6, 0.7),
                dyns(0.1, 0.9, 0.6, 0.95),
                dyns(0.3, 0.4, 0.8, 0.85),
            ],
            1,
            0.9,
        );
        let kernel = ExactKernel::new(&i).unwrap();
        let vi = value_iteration(
            &kernel,
            Operator::Optimal,
            &ValueTable::zeros(3),
            1e-12,
            10_000,
        )
        .unwrap();
        let (_, acts) = bellman_opt_with_actions(&kernel, &vi.values).unwrap();
        let p = WhittlePolicy::new(&i).unwrap();
        assert_eq!(
            p.select(&State::zeros(3), &mut stream(0, TAG_POLICY, 0)),
            acts[0]
        );
    }

    fn arm() -> impl Strategy<Value = ArmDynamics> {
        (0.01..0.49f64, 0.01..0.5f64, 0.01..0.49f64, 0.01..0.5f64)
            .prop_map(|(pp, da, qp, dq)| dyns(pp, pp + da, qp, qp + dq))
    }

    proptest! {
        #[test]
        fn strict_lift_gives_nonnegative_indices(d in arm(), r in 0.1..5.0f64, gamma in 0.0..0.99f64) {
            let i = no_edges(vec![r], vec![d], 1, gamma);
            for sigma in [false, true] {
                prop_assert!(whittle_index(&i, 0, sigma).unwrap() >= 0.0);
            }
        }
    }
}
