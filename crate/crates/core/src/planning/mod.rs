//! Value functions, hill-climbing action selection and the Bellman
//! operators built on it.

mod exact;

pub(crate) use exact::feasible_set_count;
mod hill_climb;
mod meta;
mod rollout;
mod value_iteration;

pub use exact::{
    bellman_hc, bellman_hc_with_actions, bellman_opt, bellman_opt_with_actions,
    feasible_action_sets, q_exact, ExactQ, MAX_FEASIBLE_SETS,
};
pub use hill_climb::{
    hill_climb, hill_climb_select, lazy_hill_climb, topk_select, HillClimbTrace, MarginalGain,
    QMarginal, Round,
};
pub use meta::{
    commit_value, gamma_tilde, modified_reward, multi_bellman_composite, multi_bellman_step,
    set_reward, MetaState, MetaStep, MetaWalk,
};
pub use rollout::{rollout_q, rollout_q_seeded, RolloutHillClimbPolicy, RolloutQ, SampledQ};
pub use value_iteration::{value_iteration, Operator, ValueIteration};

use serde::{Deserialize, Serialize};

use crate::dynamics::{ActionSet, State};
use crate::error::{NrmabError, Result};

/// State–action value oracle.
pub trait QFunction {
    fn q(&self, s: &State, a: &ActionSet) -> f64;
}

impl<F: Fn(&State, &ActionSet) -> f64> QFunction for F {
    fn q(&self, s: &State, a: &ActionSet) -> f64 {
        self(s, a)
    }
}

/// Dense value function over all `2^n` encoded states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    n: usize,
    values: Vec<f64>,
}

impl ValueTable {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n >= usize::BITS as usize || values.len() != 1 << n {
            return Err(NrmabError::InvalidArgument(format!(
                "value table for n = {n} needs 2^{n} entries, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(NrmabError::InvalidArgument(format!(
                "non-finite value at state {i}"
            )));
        }
        Ok(ValueTable { n, values })
    }

    pub fn zeros(n: usize) -> Self {
        ValueTable {
            n,
            values: vec![0.0; 1 << n],
        }
    }

    /// Builds a table by evaluating `f` on every encoded state.
    pub fn from_fn(n: usize, f: impl FnMut(u64) -> f64) -> Self {
        ValueTable {
            n,
            values: (0..1u64 << n).map(f).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, code: u64) -> f64 {
        self.values[code as usize]
    }

    pub fn at(&self, s: &State) -> f64 {
        self.get(s.code().expect("value tables need n <= 64"))
    }

    /// `‖self − other‖∞`.
    pub fn sup_distance(&self, other: &ValueTable) -> f64 {
        assert_eq!(self.n, other.n);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Flat text form: one `index<TAB>value` line per state.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i}\t{v:?}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (lineno, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let parse_err = |message: String| NrmabError::Parse {
                line: lineno + 1,
                message,
            };
            let (idx, val) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected index<TAB>value".into()))?;
            let idx: usize = idx.trim().parse().map_err(|e| parse_err(format!("{e}")))?;
            if idx != values.len() {
                return Err(parse_err(format!(
                    "expected index {}, found {idx}",
                    values.len()
                )));
            }
            values.push(
                val.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(format!("{e}")))?,
            );
        }
        let n = values.len().trailing_zeros() as usize;
        ValueTable::new(n, values)
    }
}
