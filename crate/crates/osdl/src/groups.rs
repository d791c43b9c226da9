//! Group structures over code coordinates: a set system together with
//! per-group weight vectors, consumed by the structured regularizer.
//!
//! Two generators are provided. `toroid_groups` places the coordinates on a
//! d x d torus and groups each cell with its wrapped Chebyshev neighborhood of
//! radius r. `tree_groups` arranges the coordinates as a complete binary tree
//! in level order and groups each node with its descendants. Both use
//! indicator weights.

use std::fmt;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Descriptor for the built-in structure generators, used in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructureSpec {
    /// d x d torus, wrapped Chebyshev neighborhoods of radius `radius`.
    Toroid { d: usize, radius: usize },
    /// Complete binary tree with `levels` levels, node-plus-descendants groups.
    Tree { levels: u32 },
}

impl StructureSpec {
    pub fn build(&self) -> Result<GroupStructure> {
        match *self {
            StructureSpec::Toroid { d, radius } => toroid_groups(d, radius),
            StructureSpec::Tree { levels } => tree_groups(levels),
        }
    }

    /// Short tag used in file names and report rows, e.g. `toroid_d10_r4`.
    pub fn tag(&self) -> String {
        match *self {
            StructureSpec::Toroid { d, radius } => format!("toroid_d{d}_r{radius}"),
            StructureSpec::Tree { levels } => format!("tree_l{levels}"),
        }
    }

    /// Compact one-token form used in CSV columns and CLI arguments:
    /// `toroid:<d>:<radius>` or `tree:<levels>`.
    pub fn to_compact(&self) -> String {
        match *self {
            StructureSpec::Toroid { d, radius } => format!("toroid:{d}:{radius}"),
            StructureSpec::Tree { levels } => format!("tree:{levels}"),
        }
    }

    pub fn parse_compact(s: &str) -> Result<StructureSpec> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::param(format!("cannot parse structure {s:?}"));
        match parts.as_slice() {
            ["toroid", d, r] => Ok(StructureSpec::Toroid {
                d: d.parse().map_err(|_| bad())?,
                radius: r.parse().map_err(|_| bad())?,
            }),
            ["tree", l] => Ok(StructureSpec::Tree {
                levels: l.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for StructureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            StructureSpec::Toroid { d, radius } => write!(f, "toroid(d={d}, r={radius})"),
            StructureSpec::Tree { levels } => write!(f, "tree(levels={levels})"),
        }
    }
}

/// A set system over `{0..code_dim}` plus one weight vector per group.
///
/// Weights are stored densely (length `code_dim`); a valid structure has
/// strictly positive weight exactly on the group members. Instances are
/// immutable after construction and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStructure {
    code_dim: usize,
    groups: Vec<Vec<usize>>,
    weights: Vec<Array1<f64>>,
}

/// One violated structure invariant, as reported by [`GroupStructure::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    IndexOutOfRange { group: usize, index: usize },
    EmptyGroup { group: usize },
    WeightSupportMismatch { group: usize },
    Coverage { missing: Vec<usize> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IndexOutOfRange { group, index } => {
                write!(f, "group {group}: index {index} outside the code dimension")
            }
            Violation::EmptyGroup { group } => write!(f, "group {group}: empty"),
            Violation::WeightSupportMismatch { group } => {
                write!(f, "group {group}: weight support != group")
            }
            Violation::Coverage { missing } => {
                write!(f, "coverage: {} coordinate(s) in no group", missing.len())
            }
        }
    }
}

impl GroupStructure {
    /// Builds a structure from raw parts. Only shapes are checked here;
    /// semantic invariants are reported by [`validate`](Self::validate).
    pub fn from_parts(
        code_dim: usize,
        groups: Vec<Vec<usize>>,
        weights: Vec<Array1<f64>>,
    ) -> Result<Self> {
        if code_dim == 0 {
            return Err(Error::param("code dimension must be at least 1"));
        }
        if groups.len() != weights.len() {
            return Err(Error::shape(format!(
                "{} groups but {} weight vectors",
                groups.len(),
                weights.len()
            )));
        }
        for (g, w) in weights.iter().enumerate() {
            if w.len() != code_dim {
                return Err(Error::shape(format!(
                    "weight vector {g} has length {} (code dimension {code_dim})",
                    w.len()
                )));
            }
        }
        Ok(GroupStructure {
            code_dim,
            groups,
            weights,
        })
    }

    /// Indicator-weight structure from member lists alone.
    pub fn with_indicator_weights(code_dim: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let weights = groups
            .iter()
            .map(|members| {
                let mut w = Array1::zeros(code_dim);
                for &j in members {
                    if j < code_dim {
                        w[j] = 1.0;
                    }
                }
                w
            })
            .collect();
        Self::from_parts(code_dim, groups, weights)
    }

    pub fn code_dim(&self) -> usize {
        self.code_dim
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn weight(&self, g: usize) -> ArrayView1<'_, f64> {
        self.weights[g].view()
    }

    /// Per-group Euclidean norms of the weighted code restriction,
    /// `(||w_G o code||_2)_G`.
    pub fn group_norms(&self, code: ArrayView1<f64>) -> Array1<f64> {
        debug_assert_eq!(code.len(), self.code_dim);
        let mut norms = Array1::zeros(self.groups.len());
        for (g, members) in self.groups.iter().enumerate() {
            let w = &self.weights[g];
            let mut acc = 0.0;
            for &j in members {
                let v = w[j] * code[j];
                acc += v * v;
            }
            norms[g] = acc.sqrt();
        }
        norms
    }

    /// Checks every structure invariant; an empty list means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        let mut covered = vec![false; self.code_dim];
        for (g, members) in self.groups.iter().enumerate() {
            if members.is_empty() {
                violations.push(Violation::EmptyGroup { group: g });
            }
            let mut in_group = vec![false; self.code_dim];
            let mut out_of_range = false;
            for &j in members {
                if j >= self.code_dim {
                    violations.push(Violation::IndexOutOfRange { group: g, index: j });
                    out_of_range = true;
                } else {
                    in_group[j] = true;
                    covered[j] = true;
                }
            }
            if !out_of_range {
                let w = &self.weights[g];
                let support_ok = (0..self.code_dim)
                    .all(|j| if in_group[j] { w[j] > 0.0 } else { w[j] == 0.0 });
                if !support_ok {
                    violations.push(Violation::WeightSupportMismatch { group: g });
                }
            }
        }
        let missing: Vec<usize> = (0..self.code_dim).filter(|&j| !covered[j]).collect();
        if !missing.is_empty() {
            violations.push(Violation::Coverage { missing });
        }
        violations
    }

    /// Line-oriented text dump: `dalpha=<n>` header, then one line per group
    /// with 1-based member indices and the member weights.
    pub fn to_text(&self) -> String {
        let mut out = format!("dalpha={}\n", self.code_dim);
        for (g, members) in self.groups.iter().enumerate() {
            let idx: Vec<String> = members.iter().map(|j| (j + 1).to_string()).collect();
            let w: Vec<String> = members
                .iter()
                .map(|&j| format!("{}", self.weights[g][j]))
                .collect();
            out.push_str(&format!(
                "G{}: {} ; w: {}\n",
                g + 1,
                idx.join(" "),
                w.join(" ")
            ));
        }
        out
    }
}

/// Groups on a `d` x `d` torus: group `i` holds every cell within wrapped
/// Chebyshev distance `radius` of cell `i` (cells in row-major order),
/// with indicator weights. `radius = 0` yields singletons.
pub fn toroid_groups(d: usize, radius: usize) -> Result<GroupStructure> {
    if d == 0 {
        return Err(Error::param("toroid side must be at least 1"));
    }
    if 2 * radius >= d {
        return Err(Error::param(format!(
            "toroid radius {radius} must satisfy r < d/2 for d = {d}"
        )));
    }
    let code_dim = d * d;
    let mut groups = Vec::with_capacity(code_dim);
    let offsets: Vec<isize> = (-(radius as isize)..=(radius as isize)).collect();
    for row in 0..d {
        for col in 0..d {
            let mut members = Vec::with_capacity((2 * radius + 1) * (2 * radius + 1));
            for &dr in &offsets {
                for &dc in &offsets {
                    let r = (row as isize + dr).rem_euclid(d as isize) as usize;
                    let c = (col as isize + dc).rem_euclid(d as isize) as usize;
                    members.push(r * d + c);
                }
            }
            members.sort_unstable();
            groups.push(members);
        }
    }
    GroupStructure::with_indicator_weights(code_dim, groups)
}

/// Groups on a complete binary tree with `levels` levels (`2^levels - 1`
/// nodes in level order): group `i` is node `i` plus its descendants, with
/// indicator weights.
pub fn tree_groups(levels: u32) -> Result<GroupStructure> {
    if levels == 0 {
        return Err(Error::param("tree must have at least 1 level"));
    }
    if levels > 26 {
        return Err(Error::param(format!(
            "tree with {levels} levels is unreasonably large"
        )));
    }
    let code_dim = (1usize << levels) - 1;
    let mut groups = Vec::with_capacity(code_dim);
    for root in 0..code_dim {
        let mut members = Vec::new();
        let mut queue = vec![root];
        while let Some(node) = queue.pop() {
            members.push(node);
            let left = 2 * node + 1;
            let right = 2 * node + 2;
            if left < code_dim {
                queue.push(left);
            }
            if right < code_dim {
                queue.push(right);
            }
        }
        members.sort_unstable();
        groups.push(members);
    }
    GroupStructure::with_indicator_weights(code_dim, groups)
}
