use serde::{Deserialize, Serialize};

use super::{ModelError, Record};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { class: i64 },
}

/// Binary classification tree stored as a node array. A split sends a row
/// left when `value <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    #[serde(default)]
    pub root: usize,
}

impl DecisionTree {
    pub fn new(nodes: Vec<TreeNode>, root: usize) -> Result<Self, ModelError> {
        let t = Self { nodes, root };
        t.validate(None)?;
        Ok(t)
    }

    /// Checks that the node graph is a tree rooted at `root`: indices in
    /// range, no node reachable twice (so no cycles), and, when
    /// `feature_count` is given, every split feature in range.
    pub fn validate(&self, feature_count: Option<usize>) -> Result<(), ModelError> {
        let invalid = |m: String| ModelError::Invalid(m);
        if self.root >= self.nodes.len() {
            return Err(invalid(format!("root {} out of range", self.root)));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            if i >= self.nodes.len() {
                return Err(invalid(format!("child index {i} out of range")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(invalid(format!("node {i} reachable twice (cycle or shared subtree)")));
            }
            if let TreeNode::Split { feature, threshold, left, right } = &self.nodes[i] {
                if let Some(n) = feature_count {
                    if *feature >= n {
                        return Err(invalid(format!("node {i} splits on feature {feature}, row has {n}")));
                    }
                }
                if threshold.is_nan() {
                    return Err(invalid(format!("node {i} has a NaN threshold")));
                }
                stack.push(*left);
                stack.push(*right);
            }
        }
        Ok(())
    }

    pub fn predict_features(&self, features: &[f64]) -> Result<i64, ModelError> {
        let mut i = self.root;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { class } => return Ok(*class),
                TreeNode::Split { feature, threshold, left, right } => {
                    let v = *features
                        .get(*feature)
                        .ok_or(ModelError::Dim { expected: feature + 1, got: features.len() })?;
                    i = if v <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, record: &Record) -> Result<i64, ModelError> {
        if !matches!(record, Record::Tabular(_)) {
            return Err(ModelError::Kind(format!(
                "decision tree expects a tabular row, got a {} record",
                record.variant_name()
            )));
        }
        let features = record.flatten().map_err(ModelError::Kind)?;
        self.predict_features(&features)
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match &t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, self.root)
    }
}
