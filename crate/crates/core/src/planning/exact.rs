//! Exact Q-values and Bellman operators by full enumeration.

use rayon::prelude::*;

use crate::dynamics::{ActionSet, ExactKernel, State};
use crate::error::{NrmabError, Result};
use crate::graph_model::Instance;

use super::hill_climb::{hill_climb, QMarginal};
use super::{QFunction, ValueTable};

/// Largest number of feasible action sets the exhaustive operator scans.
pub const MAX_FEASIBLE_SETS: u128 = 1 << 20;

/// `Q(s, a) = R(s) + γ Σ_{s'} P(s' | s, a) V(s')` with the cascade already
/// folded into the value table.
pub struct ExactQ<'k> {
    kernel: &'k ExactKernel<'k>,
    cascade_values: Vec<f64>,
    rewards: Vec<f64>,
    gamma: f64,
}

impl<'k> ExactQ<'k> {
    pub fn new(kernel: &'k ExactKernel<'k>, values: &ValueTable) -> Self {
        Self::with_gamma(kernel, values, kernel.instance().gamma())
    }

    /// Same construction with an explicit discount (used by the one-step
    /// lookahead, which scores `E[R(s')]` alone).
    pub fn with_gamma(kernel: &'k ExactKernel<'k>, values: &ValueTable, gamma: f64) -> Self {
        assert_eq!(
            values.n(),
            kernel.n(),
            "value table size does not match the instance"
        );
        ExactQ {
            kernel,
            cascade_values: kernel.cascade_values(values.values()),
            rewards: kernel.reward_table(),
            gamma,
        }
    }

    #[inline]
    pub fn q_code(&self, s: u64, a: u64) -> f64 {
        self.rewards[s as usize] + self.gamma * self.kernel.expectation(s, a, &self.cascade_values)
    }

    /// `E[V(s') | s, a]`.
    pub fn future(&self, s: u64, a: u64) -> f64 {
        self.kernel.expectation(s, a, &self.cascade_values)
    }

    pub fn kernel(&self) -> &'k ExactKernel<'k> {
        self.kernel
    }
}

impl QFunction for ExactQ<'_> {
    fn q(&self, s: &State, a: &ActionSet) -> f64 {
        self.q_code(
            s.code().expect("exact Q needs an encodable state"),
            a.mask(),
        )
    }
}

/// One-off exact Q-value.
pub fn q_exact(inst: &Instance, values: &ValueTable, s: &State, a: &ActionSet) -> Result<f64> {
    inst.check_state(s)?;
    inst.check_action(a)?;
    let kernel = ExactKernel::new(inst)?;
    Ok(ExactQ::new(&kernel, values).q(s, a))
}

/// Hill-climbing Bellman operator together with the greedy set chosen in
/// each state.
pub fn bellman_hc_with_actions(
    kernel: &ExactKernel,
    values: &ValueTable,
) -> (ValueTable, Vec<ActionSet>) {
    let q = ExactQ::new(kernel, values);
    let n = kernel.n();
    let budget = kernel.instance().budget();
    let (vals, acts): (Vec<f64>, Vec<ActionSet>) = (0..1u64 << n)
        .into_par_iter()
        .map(|code| {
            let s = State::from_code(n, code);
            let mut oracle = QMarginal::new(&q, &s);
            let trace = hill_climb(&mut oracle, budget);
            (oracle.value(), trace.selected)
        })
        .unzip();
    (
        ValueTable::new(n, vals).expect("finite by construction"),
        acts,
    )
}

/// `(BV)(s) = Q(s, a^hc(s))`.
pub fn bellman_hc(kernel: &ExactKernel, values: &ValueTable) -> ValueTable {
    bellman_hc_with_actions(kernel, values).0
}

/// `Σ_{j≤budget} C(n, j)`, saturating at `u128::MAX`; callers only compare
/// it against caps.
pub(crate) fn feasible_set_count(n: usize, budget: usize) -> u128 {
    let mut total = 0u128;
    let mut c = 1u128;
    for j in 0..=budget.min(n) {
        total = total.saturating_add(c);
        match c.checked_mul((n - j) as u128) {
            Some(m) => c = m / (j + 1) as u128,
            None => return u128::MAX,
        }
    }
    total
}

/// Every action set with `|A| ≤ budget`, in lexicographic order of the
/// sorted member lists (so `∅` comes first).
pub fn feasible_action_sets(n: usize, budget: usize) -> Result<Vec<ActionSet>> {
    let count = feasible_set_count(n, budget);
    if count > MAX_FEASIBLE_SETS {
        return Err(NrmabError::CombinatorialCap {
            what: "feasible action sets",
            count,
            cap: MAX_FEASIBLE_SETS,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut current = Vec::new();
    fn rec(
        start: usize,
        n: usize,
        budget: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<ActionSet>,
    ) {
        out.push(ActionSet::from_sorted_unchecked(current.clone()));
        if current.len() == budget {
            return;
        }
        for v in start..n {
            current.push(v);
            rec(v + 1, n, budget, current, out);
            current.pop();
        }
    }
    rec(0, n, budget, &mut current, &mut out);
    debug_assert!(out.windows(2).all(|w| w[0] < w[1]));
    Ok(out)
}

/// Exhaustive Bellman operator with the maximizing set per state (first in
/// lexicographic order on ties).
pub fn bellman_opt_with_actions(
    kernel: &ExactKernel,
    values: &ValueTable,
) -> Result<(ValueTable, Vec<ActionSet>)> {
    let n = kernel.n();
    let sets = feasible_action_sets(n, kernel.instance().budget())?;
    let masks: Vec<u64> = sets.iter().map(ActionSet::mask).collect();
    let q = ExactQ::new(kernel, values);
    let (vals, idx): (Vec<f64>, Vec<usize>) = (0..1u64 << n)
        .into_par_iter()
        .map(|s| {
            let mut best = (f64::NEG_INFINITY, 0);
            for (i, &m) in masks.iter().enumerate() {
                let v = q.q_code(s, m);
                if v > best.0 {
                    best = (v, i);
                }
            }
            best
        })
        .unzip();
    Ok((
        ValueTable::new(n, vals).expect("finite by construction"),
        idx.into_iter().map(|i| sets[i].clone()).collect(),
    ))
}

/// `(B_opt V)(s) = max_{|A| ≤ k} Q(s, A)`.
pub fn bellman_opt(kernel: &ExactKernel, values: &ValueTable) -> Result<ValueTable> {
    Ok(bellman_opt_with_actions(kernel, values)?.0)
}
