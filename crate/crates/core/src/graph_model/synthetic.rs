use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NrmabError, Result};
use crate::rng;

use super::{ArmDynamics, Edge, Instance};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeModel {
    /// Each unordered pair is an edge independently with this probability.
    ErdosRenyi(f64),
    /// Exactly this many distinct edges, uniformly at random.
    Count(usize),
}

/// Parameters of the random instance generator. Ranges are closed
/// `[lo, hi]` intervals sampled uniformly. Active probabilities are drawn
/// after the passive ones and clamped from below by them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub edges: EdgeModel,
    #[serde(default = "unit_range")]
    pub reward_range: [f64; 2],
    pub p01_passive: [f64; 2],
    pub p01_active: [f64; 2],
    pub p11_passive: [f64; 2],
    pub p11_active: [f64; 2],
    pub cascade_weight: f64,
    pub budget_k: usize,
    pub gamma: f64,
}

fn unit_range() -> [f64; 2] {
    [1.0, 1.0]
}

impl SyntheticSpec {
    /// Defaults for a contact-network style instance: unit rewards, the
    /// dynamics ranges used throughout the examples, `w = 0.03`.
    pub fn contact_network(n: usize, edges: EdgeModel, budget_k: usize, gamma: f64) -> Self {
        SyntheticSpec {
            n,
            edges,
            reward_range: [1.0, 1.0],
            p01_passive: [0.05, 0.15],
            p01_active: [0.6, 0.9],
            p11_passive: [0.6, 0.8],
            p11_active: [0.9, 0.99],
            cascade_weight: 0.03,
            budget_k,
            gamma,
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(NrmabError::InfeasibleSpec(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.budget_k < 1 || self.budget_k > self.n {
            return bad(format!(
                "budget k = {} must lie in [1, n = {}]",
                self.budget_k, self.n
            ));
        }
        for (name, [lo, hi]) in [
            ("p01_passive", self.p01_passive),
            ("p01_active", self.p01_active),
            ("p11_passive", self.p11_passive),
            ("p11_active", self.p11_active),
        ] {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return bad(format!(
                    "{name} range [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 1"
                ));
            }
        }
        let [rlo, rhi] = self.reward_range;
        if !(0.0 <= rlo && rlo <= rhi && rhi.is_finite()) {
            return bad(format!(
                "reward range [{rlo}, {rhi}] must be non-negative and ordered"
            ));
        }
        if !(self.cascade_weight > 0.0 && self.cascade_weight < 1.0) {
            return bad(format!(
                "cascade weight {} must lie in (0, 1)",
                self.cascade_weight
            ));
        }
        let pairs = self.n * (self.n - 1) / 2;
        match self.edges {
            EdgeModel::ErdosRenyi(p) if !(0.0..=1.0).contains(&p) => {
                return bad(format!("edge probability {p} outside [0, 1]"))
            }
            EdgeModel::Count(m) if m > pairs => {
                return bad(format!("{m} edges requested but only {pairs} pairs exist"))
            }
            _ => {}
        }
        Ok(())
    }
}

fn uniform<R: Rng>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

/// Draws an instance. The same `(spec, seed)` always yields the same
/// instance.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Instance> {
    spec.check()?;
    let mut rng = rng::stream(seed, rng::TAG_GENERATE, 0);
    let n = spec.n;

    let mut pairs = Vec::new();
    match spec.edges {
        EdgeModel::ErdosRenyi(p) => {
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen::<f64>() < p {
                        pairs.push((u, v));
                    }
                }
            }
        }
        EdgeModel::Count(m) => {
            let total = n * (n - 1) / 2;
            if 2 * m > total {
                let mut all: Vec<(usize, usize)> = (0..n)
                    .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
                    .collect();
                all.shuffle(&mut rng);
                all.truncate(m);
                all.sort_unstable();
                pairs = all;
            } else {
                let mut seen = std::collections::HashSet::new();
                while pairs.len() < m {
                    let u = rng.gen_range(0..n);
                    let v = rng.gen_range(0..n);
                    if u != v && seen.insert((u.min(v), u.max(v))) {
                        pairs.push((u.min(v), u.max(v)));
                    }
                }
            }
        }
    }

    let rewards = (0..n)
        .map(|_| uniform(&mut rng, spec.reward_range))
        .collect();
    let dynamics = (0..n)
        .map(|_| {
            let p01_passive = uniform(&mut rng, spec.p01_passive);
            let p11_passive = uniform(&mut rng, spec.p11_passive);
            let [alo, ahi] = spec.p01_active;
            let p01_active = uniform(&mut rng, [alo.max(p01_passive), ahi.max(p01_passive)]);
            let [blo, bhi] = spec.p11_active;
            let p11_active = uniform(&mut rng, [blo.max(p11_passive), bhi.max(p11_passive)]);
            ArmDynamics {
                p01_passive,
                p01_active,
                p11_passive,
                p11_active,
            }
        })
        .collect();
    let edges = pairs
        .into_iter()
        .map(|(u, v)| Edge {
            u,
            v,
            weight: spec.cascade_weight,
        })
        .collect();
    Instance::new(
        (0..n).map(|i| i.to_string()).collect(),
        edges,
        rewards,
        dynamics,
        spec.budget_k,
        spec.gamma,
    )
}
