use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::dynamics::{ActionSet, State};
use crate::graph_model::{Instance, NodeId};

use super::QFunction;

/// Incremental view of a set function: the gain of adding one node to the
/// set committed so far.
pub trait MarginalGain {
    fn num_candidates(&self) -> usize;
    fn gain(&mut self, v: NodeId) -> f64;
    fn commit(&mut self, v: NodeId);
}

/// Marginal gains of `Q(s, ·)` computed from full Q evaluations.
pub struct QMarginal<'q, Q: QFunction + ?Sized> {
    q: &'q Q,
    state: State,
    current: ActionSet,
    base: f64,
    last: Vec<Option<f64>>,
    evaluations: usize,
}

impl<'q, Q: QFunction + ?Sized> QMarginal<'q, Q> {
    pub fn new(q: &'q Q, state: &State) -> Self {
        let current = ActionSet::empty();
        let base = q.q(state, &current);
        QMarginal {
            q,
            state: state.clone(),
            current,
            base,
            last: vec![None; state.len()],
            evaluations: 0,
        }
    }

    /// Number of Q evaluations on candidate sets (the baseline `Q(s, ∅)`
    /// is not counted).
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn value(&self) -> f64 {
        self.base
    }
}

impl<Q: QFunction + ?Sized> MarginalGain for QMarginal<'_, Q> {
    fn num_candidates(&self) -> usize {
        self.state.len()
    }

    fn gain(&mut self, v: NodeId) -> f64 {
        self.evaluations += 1;
        let value = self.q.q(&self.state, &self.current.with(v));
        self.last[v] = Some(value);
        value - self.base
    }

    fn commit(&mut self, v: NodeId) {
        self.current = self.current.with(v);
        self.base = match self.last[v] {
            Some(value) => value,
            None => self.q.q(&self.state, &self.current),
        };
        self.last.iter_mut().for_each(|x| *x = None);
    }
}

/// Candidate gains examined in one greedy pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Round {
    pub gains: Vec<(NodeId, f64)>,
    pub chosen: Option<NodeId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HillClimbTrace {
    pub selected: ActionSet,
    /// Order in which nodes were added.
    pub order: Vec<NodeId>,
    pub rounds: Vec<Round>,
    /// Number of `gain` calls.
    pub evaluations: usize,
}

/// Greedy set construction: up to `budget` passes, each adding the
/// candidate with the largest marginal gain (lowest id on ties). Stops
/// early once no candidate has a positive gain.
pub fn hill_climb<M: MarginalGain + ?Sized>(oracle: &mut M, budget: usize) -> HillClimbTrace {
    let n = oracle.num_candidates();
    let mut chosen = vec![false; n];
    let mut order = Vec::new();
    let mut rounds = Vec::new();
    let mut evaluations = 0;
    for _ in 0..budget.min(n) {
        let mut gains = Vec::with_capacity(n - order.len());
        let mut best: Option<(NodeId, f64)> = None;
        for v in (0..n).filter(|&v| !chosen[v]) {
            let g = oracle.gain(v);
            evaluations += 1;
            gains.push((v, g));
            if best.is_none_or(|(_, b)| g > b) {
                best = Some((v, g));
            }
        }
        match best {
            Some((v, g)) if g > 0.0 => {
                oracle.commit(v);
                chosen[v] = true;
                order.push(v);
                rounds.push(Round {
                    gains,
                    chosen: Some(v),
                });
            }
            _ => {
                rounds.push(Round {
                    gains,
                    chosen: None,
                });
                break;
            }
        }
    }
    HillClimbTrace {
        selected: ActionSet::from_sorted_unchecked(sorted(&order)),
        order,
        rounds,
        evaluations,
    }
}

fn sorted(order: &[NodeId]) -> Vec<NodeId> {
    let mut v = order.to_vec();
    v.sort_unstable();
    v
}

#[derive(PartialEq)]
struct Bound {
    gain: f64,
    node: NodeId,
    stamp: usize,
}

impl Eq for Bound {}

impl Ord for Bound {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lazy greedy: stale gains act as upper bounds and are re-evaluated only
/// when they reach the top of the queue. Selects the same sets as
/// [`hill_climb`] whenever the gains are submodular; `rounds` holds only
/// the re-evaluated candidates.
pub fn lazy_hill_climb<M: MarginalGain + ?Sized>(oracle: &mut M, budget: usize) -> HillClimbTrace {
    let n = oracle.num_candidates();
    let mut heap = BinaryHeap::with_capacity(n);
    let mut evaluations = 0;
    let mut first = Vec::with_capacity(n);
    for v in 0..n {
        let gain = oracle.gain(v);
        evaluations += 1;
        first.push((v, gain));
        heap.push(Bound {
            gain,
            node: v,
            stamp: 0,
        });
    }
    let mut order = Vec::new();
    let mut rounds = Vec::new();
    let mut gains = first;
    while order.len() < budget.min(n) {
        let round = order.len();
        let Some(top) = heap.pop() else { break };
        if top.stamp == round {
            if top.gain <= 0.0 {
                rounds.push(Round {
                    gains,
                    chosen: None,
                });
                break;
            }
            oracle.commit(top.node);
            order.push(top.node);
            rounds.push(Round {
                gains: std::mem::take(&mut gains),
                chosen: Some(top.node),
            });
        } else {
            let gain = oracle.gain(top.node);
            evaluations += 1;
            gains.push((top.node, gain));
            heap.push(Bound {
                gain,
                node: top.node,
                stamp: round,
            });
        }
    }
    HillClimbTrace {
        selected: ActionSet::from_sorted_unchecked(sorted(&order)),
        order,
        rounds,
        evaluations,
    }
}

/// Scores every singleton once and keeps the `budget` best with positive
/// gain, ignoring how the gains interact.
pub fn topk_select<M: MarginalGain + ?Sized>(oracle: &mut M, budget: usize) -> HillClimbTrace {
    let n = oracle.num_candidates();
    let mut gains: Vec<(NodeId, f64)> = (0..n).map(|v| (v, oracle.gain(v))).collect();
    let mut ranked = gains.clone();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let order: Vec<NodeId> = ranked
        .iter()
        .take(budget)
        .take_while(|&&(_, g)| g > 0.0)
        .map(|&(v, _)| v)
        .collect();
    gains.sort_by_key(|&(v, _)| v);
    HillClimbTrace {
        selected: ActionSet::from_sorted_unchecked(sorted(&order)),
        order,
        rounds: vec![Round {
            gains,
            chosen: None,
        }],
        evaluations: n,
    }
}

/// Greedy action set for state `s` under the instance budget.
pub fn hill_climb_select<Q: QFunction + ?Sized>(inst: &Instance, q: &Q, s: &State) -> ActionSet {
    let mut oracle = QMarginal::new(q, s);
    hill_climb(&mut oracle, inst.budget()).selected
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Weighted coverage: node `v` covers `sets[v]`.
    struct Coverage {
        sets: Vec<Vec<usize>>,
        weights: Vec<f64>,
        covered: Vec<bool>,
    }

    impl MarginalGain for Coverage {
        fn num_candidates(&self) -> usize {
            self.sets.len()
        }
        fn gain(&mut self, v: NodeId) -> f64 {
            self.sets[v]
                .iter()
                .filter(|&&e| !self.covered[e])
                .map(|&e| self.weights[e])
                .sum()
        }
        fn commit(&mut self, v: NodeId) {
            for &e in &self.sets[v] {
                self.covered[e] = true;
            }
        }
    }

    fn coverage() -> Coverage {
        Coverage {
            sets: vec![
                vec![0, 1, 2],
                vec![2, 3],
                vec![3, 4, 5],
                vec![0, 5],
                vec![6],
                vec![],
            ],
            weights: vec![1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 0.5],
            covered: vec![false; 7],
        }
    }

    #[test]
    fn greedy_on_coverage() {
        let t = hill_climb(&mut coverage(), 3);
        // Round 1: {2}: 2+1+1 = 4 beats {0}: 3.  Round 2: {0} adds 3.
        assert_eq!(t.order, vec![2, 0, 4]);
        assert_eq!(t.evaluations, 6 + 5 + 4);
    }

    #[test]
    fn stops_when_gains_vanish() {
        let t = hill_climb(&mut coverage(), 6);
        assert_eq!(t.order, vec![2, 0, 4]);
        assert!(t.rounds.last().unwrap().chosen.is_none());
    }

    #[test]
    fn lazy_matches_plain_on_submodular() {
        for k in 1..=6 {
            let plain = hill_climb(&mut coverage(), k);
            let lazy = lazy_hill_climb(&mut coverage(), k);
            assert_eq!(plain.order, lazy.order, "k = {k}");
            assert!(lazy.evaluations <= plain.evaluations);
        }
    }

    #[test]
    fn ties_break_to_lowest_id() {
        let mut c = Coverage {
            sets: vec![vec![1], vec![0], vec![2]],
            weights: vec![1.0; 3],
            covered: vec![false; 3],
        };
        assert_eq!(hill_climb(&mut c, 1).order, vec![0]);
        let mut c = Coverage {
            sets: vec![vec![1], vec![0], vec![2]],
            weights: vec![1.0; 3],
            covered: vec![false; 3],
        };
        assert_eq!(lazy_hill_climb(&mut c, 2).order, vec![0, 1]);
    }

    #[test]
    fn topk_ignores_interaction() {
        let t = topk_select(&mut coverage(), 2);
        // Singletons: 0 -> 3, 1 -> 3, 2 -> 4, 3 -> 2, 4 -> 0.5.
        assert_eq!(t.order, vec![2, 0]);
        let t = topk_select(&mut coverage(), 3);
        assert_eq!(t.order, vec![2, 0, 1]);
    }
}
