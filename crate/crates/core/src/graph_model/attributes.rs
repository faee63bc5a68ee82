use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{NrmabError, Result};

use super::{ArmDynamics, Edge, EdgeList, Instance};

/// Per-node dynamics override; unset fields fall back to `dynamics_default`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsOverride {
    pub p01_passive: Option<f64>,
    pub p01_active: Option<f64>,
    pub p11_passive: Option<f64>,
    pub p11_active: Option<f64>,
}

impl DynamicsOverride {
    fn resolve(
        &self,
        default: Option<&ArmDynamics>,
    ) -> std::result::Result<ArmDynamics, Vec<&'static str>> {
        let pick = |own: Option<f64>,
                    fallback: Option<f64>,
                    name: &'static str,
                    missing: &mut Vec<&'static str>| {
            own.or(fallback).unwrap_or_else(|| {
                missing.push(name);
                f64::NAN
            })
        };
        let mut missing = Vec::new();
        let d = ArmDynamics {
            p01_passive: pick(
                self.p01_passive,
                default.map(|d| d.p01_passive),
                "p01_passive",
                &mut missing,
            ),
            p01_active: pick(
                self.p01_active,
                default.map(|d| d.p01_active),
                "p01_active",
                &mut missing,
            ),
            p11_passive: pick(
                self.p11_passive,
                default.map(|d| d.p11_passive),
                "p11_passive",
                &mut missing,
            ),
            p11_active: pick(
                self.p11_active,
                default.map(|d| d.p11_active),
                "p11_active",
                &mut missing,
            ),
        };
        if missing.is_empty() {
            Ok(d)
        } else {
            Err(missing)
        }
    }
}

/// Node and edge attributes layered over an edgelist. Node keys are the raw
/// labels from the edgelist; edge keys are `"<label> <label>"` in either
/// order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeDoc {
    pub n: Option<usize>,
    pub reward_default: Option<f64>,
    #[serde(default)]
    pub rewards: BTreeMap<String, f64>,
    pub dynamics_default: Option<ArmDynamics>,
    #[serde(default)]
    pub dynamics: BTreeMap<String, DynamicsOverride>,
    pub cascade_weight_default: Option<f64>,
    #[serde(default)]
    pub cascade_weights: BTreeMap<String, f64>,
    pub budget_k: Option<usize>,
    pub gamma: Option<f64>,
}

/// Parses an attribute document. JSON is detected by a leading `{`,
/// anything else is read as TOML.
pub fn parse_attributes(text: &str) -> Result<AttributeDoc> {
    if text.trim_start().starts_with('{') {
        Ok(serde_json::from_str(text)?)
    } else {
        Ok(toml::from_str(text)?)
    }
}

/// Combines a topology with attributes into a validated [`Instance`].
pub fn attach_attributes(graph: &EdgeList, attrs: &AttributeDoc) -> Result<Instance> {
    let n = graph.n();
    let index = graph.label_index();

    let mut missing: Vec<String> = Vec::new();
    if attrs.budget_k.is_none() {
        missing.push("budget_k".into());
    }
    if attrs.gamma.is_none() {
        missing.push("gamma".into());
    }
    if attrs.dynamics_default.is_none() {
        let incomplete = graph.labels.iter().any(|l| {
            attrs
                .dynamics
                .get(l)
                .is_none_or(|o| o.resolve(None).is_err())
        });
        if incomplete {
            missing.push("dynamics_default".into());
        }
    }

    let mut edge_weights: Vec<Option<f64>> = vec![None; graph.edges.len()];
    let edge_pos: std::collections::HashMap<(usize, usize), usize> = graph
        .edges
        .iter()
        .enumerate()
        .map(|(i, &e)| (e, i))
        .collect();
    for (key, &w) in &attrs.cascade_weights {
        let parts: Vec<&str> = key.split_whitespace().collect();
        let [a, b] = parts[..] else {
            return Err(NrmabError::Validation(format!(
                "cascade_weights key {key:?} must be two node labels separated by whitespace"
            )));
        };
        let (Some(&ia), Some(&ib)) = (index.get(a), index.get(b)) else {
            return Err(NrmabError::Validation(format!(
                "cascade_weights key {key:?} names an unknown node"
            )));
        };
        let Some(&pos) = edge_pos.get(&(ia.min(ib), ia.max(ib))) else {
            return Err(NrmabError::Validation(format!(
                "cascade_weights key {key:?} is not an edge of the graph"
            )));
        };
        edge_weights[pos] = Some(w);
    }
    if attrs.cascade_weight_default.is_none() && edge_weights.iter().any(Option::is_none) {
        missing.push("cascade_weight_default".into());
    }
    if !missing.is_empty() {
        return Err(NrmabError::MissingFields(missing));
    }

    if let Some(expected) = attrs.n {
        if expected != n {
            return Err(NrmabError::Validation(format!(
                "attribute document declares n = {expected} but the edgelist has {n} nodes"
            )));
        }
    }
    for label in attrs.rewards.keys().chain(attrs.dynamics.keys()) {
        if !index.contains_key(label.as_str()) {
            return Err(NrmabError::Validation(format!(
                "attributes reference unknown node {label:?}"
            )));
        }
    }

    let reward_default = attrs.reward_default.unwrap_or(1.0);
    let rewards = graph
        .labels
        .iter()
        .map(|l| attrs.rewards.get(l).copied().unwrap_or(reward_default))
        .collect();

    let default_override = DynamicsOverride::default();
    let dynamics = graph
        .labels
        .iter()
        .map(|l| {
            attrs
                .dynamics
                .get(l)
                .unwrap_or(&default_override)
                .resolve(attrs.dynamics_default.as_ref())
                .map_err(|keys| NrmabError::NodeValidation {
                    node: l.clone(),
                    message: format!("missing dynamics fields {}", keys.join(", ")),
                })
        })
        .collect::<Result<Vec<_>>>()?;

    let edges = graph
        .edges
        .iter()
        .zip(edge_weights)
        .map(|(&(u, v), w)| Edge {
            u,
            v,
            weight: w.or(attrs.cascade_weight_default).expect("checked above"),
        })
        .collect();

    Instance::new(
        graph.labels.clone(),
        edges,
        rewards,
        dynamics,
        attrs.budget_k.expect("checked above"),
        attrs.gamma.expect("checked above"),
    )
}

#[cfg(test)]
mod tests {
    use super::super::ingest_edgelist;
    use super::*;

    const DEFAULTS: &str = r#"
reward_default = 1.0
cascade_weight_default = 0.03
budget_k = 1
gamma = 0.95

[dynamics_default]
p01_passive = 0.1
p01_active = 0.8
p11_passive = 0.7
p11_active = 0.95
"#;

    #[test]
    fn defaults_apply_to_every_node_and_edge() {
        let g = ingest_edgelist("a b\nb c\n").unwrap();
        let inst = attach_attributes(&g, &parse_attributes(DEFAULTS).unwrap()).unwrap();
        assert_eq!(inst.n(), 3);
        assert_eq!(inst.rewards(), &[1.0; 3]);
        assert!(inst.edges().iter().all(|e| e.weight == 0.03));
        assert_eq!(inst.dynamics()[2].p11_active, 0.95);
        assert_eq!(inst.gamma(), 0.95);
    }

    #[test]
    fn per_node_and_per_edge_overrides() {
        let g = ingest_edgelist("a b\nb c\n").unwrap();
        let text = format!(
            "{DEFAULTS}\n[rewards]\nb = 3.0\n\n[dynamics.c]\np01_active = 0.5\n\n[cascade_weights]\n\"c b\" = 0.4\n"
        );
        let inst = attach_attributes(&g, &parse_attributes(&text).unwrap()).unwrap();
        assert_eq!(inst.rewards(), &[1.0, 3.0, 1.0]);
        assert_eq!(inst.dynamics()[2].p01_active, 0.5);
        assert_eq!(inst.dynamics()[2].p01_passive, 0.1);
        assert_eq!(inst.edges()[1].weight, 0.4);
        assert_eq!(inst.edges()[0].weight, 0.03);
    }

    #[test]
    fn json_documents_are_accepted() {
        let g = ingest_edgelist("a b\n").unwrap();
        let json = r#"{"cascade_weight_default":0.2,"budget_k":1,"gamma":0.5,
            "dynamics_default":{"p01_passive":0.0,"p01_active":0.5,"p11_passive":0.5,"p11_active":1.0}}"#;
        let inst = attach_attributes(&g, &parse_attributes(json).unwrap()).unwrap();
        assert_eq!(inst.edges()[0].weight, 0.2);
    }

    #[test]
    fn assumption_violation_names_the_node() {
        let g = ingest_edgelist("a b\n").unwrap();
        let text = format!("{DEFAULTS}\n[dynamics.b]\np01_active = 0.2\np01_passive = 0.3\n");
        match attach_attributes(&g, &parse_attributes(&text).unwrap()) {
            Err(NrmabError::NodeValidation { node, .. }) => assert_eq!(node, "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_document_lists_missing_keys() {
        let g = ingest_edgelist("a b\n").unwrap();
        match attach_attributes(&g, &parse_attributes("").unwrap()) {
            Err(NrmabError::MissingFields(keys)) => {
                assert_eq!(
                    keys,
                    vec![
                        "budget_k",
                        "gamma",
                        "dynamics_default",
                        "cascade_weight_default"
                    ]
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_reward_is_rejected() {
        let g = ingest_edgelist("a b\n").unwrap();
        let text = format!("{DEFAULTS}\n[rewards]\na = -1.0\n");
        assert!(matches!(
            attach_attributes(&g, &parse_attributes(&text).unwrap()),
            Err(NrmabError::NodeValidation { .. })
        ));
    }

    #[test]
    fn unknown_keys_and_nodes_are_rejected() {
        assert!(parse_attributes("budget = 3\n").is_err());
        let g = ingest_edgelist("a b\n").unwrap();
        let text = format!("{DEFAULTS}\n[rewards]\nzz = 1.0\n");
        assert!(attach_attributes(&g, &parse_attributes(&text).unwrap()).is_err());
        let text = format!("n = 5\n{DEFAULTS}");
        assert!(attach_attributes(&g, &parse_attributes(&text).unwrap()).is_err());
    }
}
