//! Problem instances: the contact graph, per-arm dynamics, node rewards,
//! budget and discount.

mod attributes;
mod ingest;
mod synthetic;

pub use attributes::{attach_attributes, parse_attributes, AttributeDoc, DynamicsOverride};
pub use ingest::{ingest_edgelist, EdgeList};
pub use synthetic::{generate_synthetic, EdgeModel, SyntheticSpec};

use serde::{Deserialize, Serialize};

use crate::error::{NrmabError, Result};

/// Dense node index in `0..n`.
pub type NodeId = usize;

/// An undirected edge with its cascade probability. `u < v` always holds
/// once an edge is inside an [`Instance`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub weight: f64,
}

/// Probability that an arm is active after its own transition, for each
/// combination of current status and action.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmDynamics {
    pub p01_passive: f64,
    pub p01_active: f64,
    pub p11_passive: f64,
    pub p11_active: f64,
}

impl ArmDynamics {
    /// `P(u = 1 | s, a)` for this arm.
    #[inline]
    pub fn activation_prob(&self, active_now: bool, acted_on: bool) -> f64 {
        match (active_now, acted_on) {
            (false, false) => self.p01_passive,
            (false, true) => self.p01_active,
            (true, false) => self.p11_passive,
            (true, true) => self.p11_active,
        }
    }

    /// Checks the probability ranges and that acting never lowers the
    /// activation probability.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, p) in [
            ("p01_passive", self.p01_passive),
            ("p01_active", self.p01_active),
            ("p11_passive", self.p11_passive),
            ("p11_active", self.p11_active),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} = {p} is outside [0, 1]"));
            }
        }
        if self.p01_active < self.p01_passive {
            return Err(format!(
                "p01_active = {} < p01_passive = {}: acting must not lower the activation probability",
                self.p01_active, self.p01_passive
            ));
        }
        if self.p11_active < self.p11_passive {
            return Err(format!(
                "p11_active = {} < p11_passive = {}: acting must not lower the activation probability",
                self.p11_active, self.p11_passive
            ));
        }
        Ok(())
    }
}

/// A fully validated problem instance. Immutable once built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceDoc", into = "InstanceDoc")]
pub struct Instance {
    labels: Vec<String>,
    edges: Vec<Edge>,
    rewards: Vec<f64>,
    dynamics: Vec<ArmDynamics>,
    budget: usize,
    gamma: f64,
    /// `adjacency[v]` lists `(neighbour, edge index)`.
    adjacency: Vec<Vec<(NodeId, usize)>>,
}

/// Canonical serialized form of an [`Instance`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    n: usize,
    labels: Vec<String>,
    budget_k: usize,
    gamma: f64,
    rewards: Vec<f64>,
    dynamics: Vec<ArmDynamics>,
    edges: Vec<Edge>,
}

impl TryFrom<InstanceDoc> for Instance {
    type Error = NrmabError;

    fn try_from(doc: InstanceDoc) -> Result<Self> {
        if doc.labels.len() != doc.n {
            return Err(NrmabError::Validation(format!(
                "n = {} but {} labels given",
                doc.n,
                doc.labels.len()
            )));
        }
        Instance::new(
            doc.labels,
            doc.edges,
            doc.rewards,
            doc.dynamics,
            doc.budget_k,
            doc.gamma,
        )
    }
}

impl From<Instance> for InstanceDoc {
    fn from(inst: Instance) -> Self {
        InstanceDoc {
            n: inst.n(),
            labels: inst.labels,
            budget_k: inst.budget,
            gamma: inst.gamma,
            rewards: inst.rewards,
            dynamics: inst.dynamics,
            edges: inst.edges,
        }
    }
}

impl Instance {
    pub fn new(
        labels: Vec<String>,
        edges: Vec<Edge>,
        rewards: Vec<f64>,
        dynamics: Vec<ArmDynamics>,
        budget: usize,
        gamma: f64,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(NrmabError::Validation("instance has no nodes".into()));
        }
        if rewards.len() != n {
            return Err(NrmabError::Validation(format!(
                "{} rewards for {n} nodes",
                rewards.len()
            )));
        }
        if dynamics.len() != n {
            return Err(NrmabError::Validation(format!(
                "{} dynamics records for {n} nodes",
                dynamics.len()
            )));
        }
        for (v, &r) in rewards.iter().enumerate() {
            if !(r.is_finite() && r >= 0.0) {
                return Err(NrmabError::NodeValidation {
                    node: labels[v].clone(),
                    message: format!("reward {r} must be finite and non-negative"),
                });
            }
        }
        for (v, d) in dynamics.iter().enumerate() {
            d.validate().map_err(|message| NrmabError::NodeValidation {
                node: labels[v].clone(),
                message,
            })?;
        }
        if budget < 1 || budget > n {
            return Err(NrmabError::Validation(format!(
                "budget k = {budget} must lie in [1, {n}]"
            )));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(NrmabError::Validation(format!(
                "discount gamma = {gamma} must lie in [0, 1)"
            )));
        }

        let mut adjacency = vec![Vec::new(); n];
        let mut seen = std::collections::HashSet::new();
        let mut canonical = Vec::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            if e.u >= n || e.v >= n {
                return Err(NrmabError::Validation(format!(
                    "edge {i} references a node outside 0..{n}"
                )));
            }
            if e.u == e.v {
                return Err(NrmabError::Validation(format!(
                    "edge {i} is a self-loop on node {}",
                    e.u
                )));
            }
            if !(e.weight > 0.0 && e.weight < 1.0) {
                return Err(NrmabError::Validation(format!(
                    "edge {i} weight {} must lie in the open interval (0, 1)",
                    e.weight
                )));
            }
            let (u, v) = if e.u < e.v { (e.u, e.v) } else { (e.v, e.u) };
            if !seen.insert((u, v)) {
                return Err(NrmabError::Validation(format!("duplicate edge {u}-{v}")));
            }
            adjacency[u].push((v, i));
            adjacency[v].push((u, i));
            canonical.push(Edge {
                u,
                v,
                weight: e.weight,
            });
        }

        Ok(Instance {
            labels,
            edges: canonical,
            rewards,
            dynamics,
            budget,
            gamma,
            adjacency,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn dynamics(&self) -> &[ArmDynamics] {
        &self.dynamics
    }

    #[inline]
    pub fn budget(&self) -> usize {
        self.budget
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Neighbours of `v` with the index of the connecting edge.
    #[inline]
    pub fn neighbors(&self, v: NodeId) -> &[(NodeId, usize)] {
        &self.adjacency[v]
    }

    /// Sum of all node rewards, the largest possible per-step reward.
    pub fn max_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// Returns a copy with a different budget.
    pub fn with_budget(&self, budget: usize) -> Result<Self> {
        Instance::new(
            self.labels.clone(),
            self.edges.clone(),
            self.rewards.clone(),
            self.dynamics.clone(),
            budget,
            self.gamma,
        )
    }

    /// Returns a copy with a different discount factor.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Instance::new(
            self.labels.clone(),
            self.edges.clone(),
            self.rewards.clone(),
            self.dynamics.clone(),
            self.budget,
            gamma,
        )
    }

    /// Returns a copy with the given edges (weights included).
    pub fn with_edges(&self, edges: Vec<Edge>) -> Result<Self> {
        Instance::new(
            self.labels.clone(),
            edges,
            self.rewards.clone(),
            self.dynamics.clone(),
            self.budget,
            self.gamma,
        )
    }

    /// Canonical pretty-printed JSON document.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serialization cannot fail");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn dyns(pp: f64, pa: f64, qp: f64, qa: f64) -> ArmDynamics {
        ArmDynamics {
            p01_passive: pp,
            p01_active: pa,
            p11_passive: qp,
            p11_active: qa,
        }
    }

    pub fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }
}
