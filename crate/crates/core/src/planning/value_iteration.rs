use serde::{Deserialize, Serialize};

use crate::dynamics::ExactKernel;
use crate::error::{NrmabError, Result};

use super::{bellman_hc, bellman_opt, ValueTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    /// Greedy hill-climbing action selection.
    HillClimb,
    /// Exhaustive maximization over feasible action sets.
    Optimal,
}

impl Operator {
    pub fn apply(&self, kernel: &ExactKernel, values: &ValueTable) -> Result<ValueTable> {
        match self {
            Operator::HillClimb => Ok(bellman_hc(kernel, values)),
            Operator::Optimal => bellman_opt(kernel, values),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Operator::HillClimb => "bellman_hc",
            Operator::Optimal => "bellman_opt",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueIteration {
    pub values: ValueTable,
    /// `‖V_{t+1} − V_t‖∞` per sweep.
    pub deltas: Vec<f64>,
}

/// Repeats `op` from `initial` until a sweep moves the table by at most
/// `tol` in sup-norm. Running out of sweeps is an error carrying the last
/// delta.
pub fn value_iteration(
    kernel: &ExactKernel,
    op: Operator,
    initial: &ValueTable,
    tol: f64,
    max_iters: usize,
) -> Result<ValueIteration> {
    let mut values = initial.clone();
    let mut deltas = Vec::new();
    for _ in 0..max_iters {
        let next = op.apply(kernel, &values)?;
        let delta = next.sup_distance(&values);
        deltas.push(delta);
        values = next;
        if delta <= tol {
            return Ok(ValueIteration { values, deltas });
        }
    }
    Err(NrmabError::NonConvergence {
        iterations: max_iters,
        delta: deltas.last().copied().unwrap_or(f64::INFINITY),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_model::{generate_synthetic, EdgeModel, SyntheticSpec};
    use rand::{Rng, SeedableRng};

    fn inst(n: usize, k: usize, gamma: f64) -> crate::Instance {
        let mut spec = SyntheticSpec::contact_network(n, EdgeModel::Count(n), k, gamma);
        spec.cascade_weight = 0.3;
        generate_synthetic(&spec, 21).unwrap()
    }

    #[test]
    fn zero_discount_converges_in_two_sweeps() {
        let i = inst(4, 2, 0.0);
        let k = ExactKernel::new(&i).unwrap();
        for op in [Operator::HillClimb, Operator::Optimal] {
            let out = value_iteration(&k, op, &ValueTable::zeros(4), 1e-12, 10).unwrap();
            assert_eq!(out.deltas.len(), 2);
            assert_eq!(out.deltas[1], 0.0);
        }
    }

    #[test]
    fn optimal_fixed_point() {
        let i = inst(4, 2, 0.9);
        let k = ExactKernel::new(&i).unwrap();
        let out =
            value_iteration(&k, Operator::Optimal, &ValueTable::zeros(4), 1e-11, 2000).unwrap();
        let again = bellman_opt(&k, &out.values).unwrap();
        assert!(again.sup_distance(&out.values) <= 1e-8);
        for w in out.deltas.windows(2) {
            assert!(w[1] <= 0.9 * w[0] + 1e-9);
        }
    }

    #[test]
    fn fixed_point_independent_of_start() {
        let i = inst(5, 2, 0.9);
        let k = ExactKernel::new(&i).unwrap();
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let random = ValueTable::from_fn(5, |_| r.gen_range(0.0..50.0));
        let tol = 1e-10;
        for op in [Operator::HillClimb, Operator::Optimal] {
            let a = value_iteration(&k, op, &ValueTable::zeros(5), tol, 5000).unwrap();
            let b = value_iteration(&k, op, &random, tol, 5000).unwrap();
            assert!(
                a.values.sup_distance(&b.values) <= 10.0 * tol / (1.0 - 0.9),
                "{op:?}"
            );
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let i = inst(4, 2, 0.9);
        let k = ExactKernel::new(&i).unwrap();
        match value_iteration(&k, Operator::Optimal, &ValueTable::zeros(4), 1e-12, 3) {
            Err(NrmabError::NonConvergence { iterations, delta }) => {
                assert_eq!(iterations, 3);
                assert!(delta > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
