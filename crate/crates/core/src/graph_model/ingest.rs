use std::collections::{HashMap, HashSet};

use crate::error::{NrmabError, Result};

use super::NodeId;

/// Simple undirected topology read from a two-column edgelist.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeList {
    /// Raw label of each dense id, in first-appearance order.
    pub labels: Vec<String>,
    /// Deduplicated edges with `u < v`, in first-appearance order.
    pub edges: Vec<(NodeId, NodeId)>,
    pub self_loops_dropped: usize,
    pub duplicates_collapsed: usize,
}

impl EdgeList {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn id_of(&self, label: &str) -> Option<NodeId> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn label_index(&self) -> HashMap<&str, NodeId> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect()
    }
}

/// Parses a whitespace-separated edgelist. Blank lines and lines starting
/// with `#` are skipped. Multi-edges collapse to one, self-loops are dropped
/// (their nodes are still registered).
pub fn ingest_edgelist(text: &str) -> Result<EdgeList> {
    let mut ids: HashMap<String, NodeId> = HashMap::new();
    let mut labels = Vec::new();
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    let mut self_loops_dropped = 0;
    let mut duplicates_collapsed = 0;

    let mut intern = |label: &str, labels: &mut Vec<String>| -> NodeId {
        if let Some(&id) = ids.get(label) {
            return id;
        }
        let id = labels.len();
        labels.push(label.to_string());
        ids.insert(label.to_string(), id);
        id
    };

    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(NrmabError::Parse {
                line: lineno + 1,
                message: format!("expected two node labels, found {} tokens", tokens.len()),
            });
        }
        let a = intern(tokens[0], &mut labels);
        let b = intern(tokens[1], &mut labels);
        if a == b {
            self_loops_dropped += 1;
            continue;
        }
        let key = (a.min(b), a.max(b));
        if seen.insert(key) {
            edges.push(key);
        } else {
            duplicates_collapsed += 1;
        }
    }

    if labels.is_empty() {
        return Err(NrmabError::EmptyInput);
    }
    Ok(EdgeList {
        labels,
        edges,
        self_loops_dropped,
        duplicates_collapsed,
    })
}
