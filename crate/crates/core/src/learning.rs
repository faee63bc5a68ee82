//! Tabular Q-learning over state–action-set pairs, with either exhaustive
//! or hill-climbing action selection.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::TablePolicy;
use crate::dynamics::{reward, sample_step, ActionSet, State};
use crate::error::{NrmabError, Result};
use crate::graph_model::Instance;
use crate::planning::{feasible_action_sets, feasible_set_count, hill_climb, QFunction, QMarginal};
use crate::rng::{stream, TAG_TRAIN};

/// Largest number of (state, action set) pairs a table may hold.
pub const MAX_TABULAR_PAIRS: u128 = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum AlphaSchedule {
    Constant(f64),
    /// `1 / visits` of the updated pair.
    InverseVisits,
    /// `visits^(−ω)` with `ω ∈ (0.5, 1]`.
    Polynomial(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningConfig {
    pub alpha: AlphaSchedule,
    /// Exploration rate, annealed linearly from `epsilon_start` at the first
    /// step to `epsilon_end` at the last.
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub episodes: usize,
    pub steps_per_episode: usize,
    /// Starting Q value. `None` means optimistic: the value bound
    /// `R_max/(1−γ)`, which keeps greedy selection exploring untried sets.
    pub initial_value: Option<f64>,
    pub seed: u64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            alpha: AlphaSchedule::Constant(0.1),
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            episodes: 10_000,
            steps_per_episode: 30,
            initial_value: None,
            seed: 0,
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<()> {
        match self.alpha {
            AlphaSchedule::Constant(a) if !(a > 0.0 && a <= 1.0) => {
                return Err(NrmabError::InvalidArgument(format!(
                    "alpha = {a} must lie in (0, 1]"
                )));
            }
            AlphaSchedule::Polynomial(w) if !(w > 0.5 && w <= 1.0) => {
                return Err(NrmabError::InvalidArgument(format!(
                    "alpha exponent {w} must lie in (0.5, 1]"
                )));
            }
            _ => {}
        }
        for (name, e) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
        ] {
            if !(0.0..=1.0).contains(&e) {
                return Err(NrmabError::InvalidArgument(format!(
                    "{name} = {e} must lie in [0, 1]"
                )));
            }
        }
        if self.episodes == 0 || self.steps_per_episode == 0 {
            return Err(NrmabError::InvalidArgument(
                "episodes and steps_per_episode must be positive".into(),
            ));
        }
        if self.initial_value.is_some_and(|v| !v.is_finite()) {
            return Err(NrmabError::InvalidArgument(
                "initial_value must be finite".into(),
            ));
        }
        Ok(())
    }

    fn epsilon(&self, step: usize) -> f64 {
        let total = self.episodes * self.steps_per_episode;
        if total <= 1 {
            return self.epsilon_start;
        }
        let frac = step as f64 / (total - 1) as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

/// How the learner picks greedy actions and bootstrap targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Maximum over every feasible set.
    Exhaustive,
    /// Greedy hill-climbing over the table.
    HillClimb,
}

/// Dense Q-table over `2^n` states and every set with `|A| ≤ k`.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    n: usize,
    sets: Vec<ActionSet>,
    index: HashMap<u64, usize>,
    values: Vec<f64>,
    visits: Vec<u32>,
}

impl QTable {
    pub fn new(inst: &Instance, initial_value: f64) -> Result<Self> {
        let n = inst.n();
        let set_count = feasible_set_count(n, inst.budget());
        let pairs = (1u128 << n.min(100)).saturating_mul(set_count);
        if n > 40 || pairs > MAX_TABULAR_PAIRS {
            return Err(NrmabError::CombinatorialCap {
                what: "tabular (state, action set) pairs",
                count: pairs,
                cap: MAX_TABULAR_PAIRS,
            });
        }
        let sets = feasible_action_sets(n, inst.budget())?;
        let index = sets
            .iter()
            .enumerate()
            .map(|(i, a)| (a.mask(), i))
            .collect();
        let len = (1usize << n) * sets.len();
        Ok(QTable {
            n,
            sets,
            index,
            values: vec![initial_value; len],
            visits: vec![0; len],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Feasible sets in lexicographic order.
    pub fn action_sets(&self) -> &[ActionSet] {
        &self.sets
    }

    fn slot(&self, s: u64, a: &ActionSet) -> usize {
        s as usize * self.sets.len() + self.index[&a.mask()]
    }

    pub fn get(&self, s: u64, a: &ActionSet) -> f64 {
        self.values[self.slot(s, a)]
    }

    pub fn visits(&self, s: u64, a: &ActionSet) -> u32 {
        self.visits[self.slot(s, a)]
    }

    /// Moves `Q(s, A)` a step `alpha` towards `target` and counts the visit.
    pub fn update(&mut self, s: u64, a: &ActionSet, alpha: f64, target: f64) {
        let slot = self.slot(s, a);
        self.visits[slot] = self.visits[slot].saturating_add(1);
        self.values[slot] += alpha * (target - self.values[slot]);
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Best feasible set by exhaustive scan, first in lexicographic order
    /// on ties.
    pub fn argmax(&self, s: u64) -> (ActionSet, f64) {
        let row = &self.values[s as usize * self.sets.len()..][..self.sets.len()];
        let mut best = 0;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        (self.sets[best].clone(), row[best])
    }

    /// Hill-climbing over the table's own values.
    pub fn hill_climb(&self, s: u64, budget: usize) -> (ActionSet, f64) {
        let state = State::from_code(self.n, s);
        let mut oracle = QMarginal::new(self, &state);
        let trace = hill_climb(&mut oracle, budget);
        (trace.selected, oracle.value())
    }

    pub fn select(&self, s: u64, selection: Selection, budget: usize) -> (ActionSet, f64) {
        match selection {
            Selection::Exhaustive => self.argmax(s),
            Selection::HillClimb => self.hill_climb(s, budget),
        }
    }

    /// Greedy policy over all states.
    pub fn greedy_policy(&self, name: &str, selection: Selection, budget: usize) -> TablePolicy {
        let actions = (0..1u64 << self.n)
            .map(|s| self.select(s, selection, budget).0)
            .collect();
        TablePolicy::new(name, actions, serde_json::json!({ "selection": selection }))
    }

    /// Flat `state,action,value,visits` table; members of the action set are
    /// separated by `;`.
    pub fn to_text(&self) -> String {
        let mut out = String::from("state,action,value,visits\n");
        for s in 0..1usize << self.n {
            for (i, a) in self.sets.iter().enumerate() {
                let slot = s * self.sets.len() + i;
                let members: Vec<String> = a.members().iter().map(|v| v.to_string()).collect();
                writeln!(
                    out,
                    "{s},{},{:?},{}",
                    members.join(";"),
                    self.values[slot],
                    self.visits[slot]
                )
                .unwrap();
            }
        }
        out
    }
}

impl QFunction for QTable {
    fn q(&self, s: &State, a: &ActionSet) -> f64 {
        self.get(s.code().expect("tabular states are encodable"), a)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Training {
    pub table: QTable,
    /// `Σ_{t=1}^{T} γ^{t−1} R(s_t)` per training episode.
    pub returns: Vec<f64>,
}

impl Training {
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("episode,return\n");
        for (e, r) in self.returns.iter().enumerate() {
            writeln!(out, "{e},{r:?}").unwrap();
        }
        out
    }
}

/// ε-greedy Q-learning from the all-inactive state, restarting every
/// `steps_per_episode` steps. The update is
/// `Q(s,A) ← Q(s,A) + α (R(s) + γ Q(s', A*(s')) − Q(s,A))` where `A*`
/// comes from `selection`.
pub fn q_learn(inst: &Instance, cfg: &LearningConfig, selection: Selection) -> Result<Training> {
    cfg.validate()?;
    let init = cfg.initial_value.unwrap_or_else(|| value_bound(inst));
    let mut table = QTable::new(inst, init)?;
    let mut rng = stream(cfg.seed, TAG_TRAIN, 0);
    let n = inst.n();
    let budget = inst.budget();
    let gamma = inst.gamma();
    let mut returns = Vec::with_capacity(cfg.episodes);
    let mut step = 0;
    for _ in 0..cfg.episodes {
        let mut s = State::zeros(n);
        let mut ret = 0.0;
        let mut discount = 1.0;
        for _ in 0..cfg.steps_per_episode {
            let code = s.code().expect("tabular");
            let explore = rng.gen::<f64>() < cfg.epsilon(step);
            let a = if explore {
                table.sets[rng.gen_range(0..table.sets.len())].clone()
            } else {
                table.select(code, selection, budget).0
            };
            let next = sample_step(inst, &s, &a, &mut rng).1;
            let next_code = next.code().expect("tabular");
            let target = reward(inst, &s) + gamma * table.select(next_code, selection, budget).1;
            let slot = table.slot(code, &a);
            table.visits[slot] += 1;
            let alpha = match cfg.alpha {
                AlphaSchedule::Constant(a) => a,
                AlphaSchedule::InverseVisits => 1.0 / table.visits[slot] as f64,
                AlphaSchedule::Polynomial(w) => (table.visits[slot] as f64).powf(-w),
            };
            table.values[slot] += alpha * (target - table.values[slot]);

            ret += discount * reward(inst, &next);
            discount *= gamma;
            s = next;
            step += 1;
        }
        returns.push(ret);
    }
    Ok(Training { table, returns })
}

/// `R_max/(1−γ)`, the largest discounted return any policy can collect.
pub fn value_bound(inst: &Instance) -> f64 {
    inst.max_reward() / (1.0 - inst.gamma())
}

/// Q-learning with exhaustive greedy actions and targets.
pub fn q_learn_tabular(inst: &Instance, cfg: &LearningConfig) -> Result<Training> {
    q_learn(inst, cfg, Selection::Exhaustive)
}

/// Q-learning with hill-climbing greedy actions and targets.
pub fn q_learn_hc(inst: &Instance, cfg: &LearningConfig) -> Result<Training> {
    q_learn(inst, cfg, Selection::HillClimb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{reward_code, ExactKernel};
    use crate::graph_model::{generate_synthetic, EdgeModel, SyntheticSpec};
    use crate::planning::{bellman_opt_with_actions, value_iteration, Operator, ValueTable};

    fn inst(n: usize, k: usize, gamma: f64, seed: u64) -> Instance {
        let mut spec = SyntheticSpec::contact_network(n, EdgeModel::Count(n), k, gamma);
        spec.cascade_weight = 0.3;
        generate_synthetic(&spec, seed).unwrap()
    }

    fn cfg(episodes: usize) -> LearningConfig {
        LearningConfig {
            episodes,
            ..LearningConfig::default()
        }
    }

    #[test]
    fn table_shape_and_cap() {
        let i = inst(4, 2, 0.9, 1);
        let t = QTable::new(&i, 0.0).unwrap();
        assert_eq!(t.action_sets().len(), 11);
        assert_eq!(t.values().len(), 16 * 11);
        let big = inst(20, 3, 0.9, 1);
        assert!(matches!(
            QTable::new(&big, 0.0),
            Err(NrmabError::CombinatorialCap { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(10);
        c.alpha = AlphaSchedule::Constant(0.0);
        assert!(c.validate().is_err());
        c.alpha = AlphaSchedule::Constant(1.0);
        c.epsilon_end = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_discount_learns_the_reward() {
        let i = inst(4, 1, 0.0, 2);
        let mut c = cfg(300);
        c.alpha = AlphaSchedule::InverseVisits;
        let t = q_learn_tabular(&i, &c).unwrap().table;
        for s in 0..16u64 {
            for a in t.action_sets() {
                if t.visits(s, a) > 0 {
                    assert!((t.get(s, a) - reward_code(&i, s)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let i = inst(5, 2, 0.9, 3);
        for sel in [Selection::Exhaustive, Selection::HillClimb] {
            let a = q_learn(&i, &cfg(50), sel).unwrap();
            let b = q_learn(&i, &cfg(50), sel).unwrap();
            assert_eq!(a.table.to_text(), b.table.to_text());
            assert_eq!(a.returns, b.returns);
        }
    }

    #[test]
    fn k1_learners_coincide() {
        let i = inst(5, 1, 0.9, 4);
        let a = q_learn_tabular(&i, &cfg(100)).unwrap();
        let b = q_learn_hc(&i, &cfg(100)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn village_scale_table_is_a_cap_error() {
        let i = inst(202, 20, 0.95, 1);
        assert!(matches!(
            QTable::new(&i, 0.0),
            Err(NrmabError::CombinatorialCap { .. })
        ));
    }

    #[test]
    fn values_stay_bounded() {
        let i = inst(5, 2, 0.9, 5);
        let t = q_learn_hc(&i, &cfg(200)).unwrap().table;
        let bound = i.max_reward() / (1.0 - 0.9) + 1e-9;
        assert!(t.values().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn greedy_policy_is_stationary() {
        let i = inst(4, 2, 0.9, 6);
        let mut c = cfg(200);
        c.epsilon_start = 0.0;
        c.epsilon_end = 0.0;
        c.initial_value = None;
        let t = q_learn_hc(&i, &c).unwrap().table;
        for s in 0..16 {
            assert_eq!(
                t.select(s, Selection::HillClimb, 2),
                t.select(s, Selection::HillClimb, 2)
            );
        }
    }

    #[test]
    fn tabular_policy_matches_exact_optimum() {
        use crate::graph_model::test_support::{dyns, labels};
        use crate::graph_model::Edge;
        let d = vec![
            dyns(0.1, 0.7, 0.6, 0.9),
            dyns(0.2, 0.5, 0.5, 0.95),
            dyns(0.05, 0.8, 0.7, 0.8),
            dyns(0.1, 0.3, 0.4, 0.9),
        ];
        let edges = vec![
            Edge {
                u: 0,
                v: 1,
                weight: 0.3,
            },
            Edge {
                u: 2,
                v: 3,
                weight: 0.2,
            },
        ];
        let i = Instance::new(labels(4), edges, vec![1.0, 2.0, 4.0, 8.0], d, 1, 0.9).unwrap();
        let c = LearningConfig {
            episodes: 200_000 / 30,
            alpha: AlphaSchedule::Polynomial(0.7),
            ..LearningConfig::default()
        };
        let t = q_learn_tabular(&i, &c).unwrap().table;
        let kernel = ExactKernel::new(&i).unwrap();
        let vi = value_iteration(
            &kernel,
            Operator::Optimal,
            &ValueTable::zeros(4),
            1e-12,
            10_000,
        )
        .unwrap();
        let (_, best) = bellman_opt_with_actions(&kernel, &vi.values).unwrap();
        let agree = (0..16u64)
            .filter(|&s| t.argmax(s).0 == best[s as usize])
            .count();
        assert!(agree as f64 >= 0.95 * 16.0, "{agree}/16 states agree");
    }

    #[test]
    fn text_dump_has_one_row_per_pair() {
        let i = inst(3, 1, 0.9, 8);
        let t = QTable::new(&i, 0.5).unwrap();
        let text = t.to_text();
        assert_eq!(text.lines().count(), 1 + 8 * 4);
        assert!(text.contains("\n7,2,0.5,0\n"));
    }
}
