use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::netmodel::NetworkGraph;

use super::Topology;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidityReport {
    pub checks: Vec<CheckResult>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.passed { "ok  " } else { "FAIL" };
            if c.detail.is_empty() {
                writeln!(f, "{status} {}", c.name)?;
            } else {
                writeln!(f, "{status} {}: {}", c.name, c.detail)?;
            }
        }
        Ok(())
    }
}

pub const CHECK_CYCLE_SIMPLE: &str = "cycle-simple";
pub const CHECK_CYCLE_RELIABLE: &str = "cycle-reliable";
pub const CHECK_BRANCH_EDGES: &str = "branch-edges";
pub const CHECK_COVERAGE: &str = "coverage";
pub const CHECK_MEMBERSHIP: &str = "membership";
pub const CHECK_FOREST: &str = "forest";

fn result(name: &'static str, problems: Vec<String>) -> CheckResult {
    CheckResult {
        name,
        passed: problems.is_empty(),
        detail: problems.join("; "),
    }
}

/// Structural checks of a topology against its network graph. Never fails;
/// every problem is reported in the returned report.
pub fn validate_topology(g: &NetworkGraph, t: &Topology) -> ValidityReport {
    let n = g.n();
    let cycle = t.cycle.vertices();
    let on_cycle: BTreeSet<usize> = cycle.iter().copied().collect();

    let mut simple = Vec::new();
    if cycle.len() < 3 {
        simple.push(format!("cycle has {} vertices, need at least 3", cycle.len()));
    }
    if on_cycle.len() != cycle.len() {
        simple.push("cycle repeats a vertex".to_string());
    }
    if let Some(v) = cycle.iter().find(|&&v| v >= n) {
        simple.push(format!("vertex {v} out of range"));
    }

    let mut reliable = Vec::new();
    for (a, b) in t.cycle.edges() {
        if a < n && b < n && !g.is_reliable(a, b) {
            reliable.push(format!("cycle edge {a}-{b} is {:?}", g.link(a, b)));
        }
    }

    let mut branch_edges = Vec::new();
    for br in &t.branches {
        let (a, b) = br.edge;
        if a >= n || b >= n {
            branch_edges.push(format!("branch {a}-{b} out of range"));
        } else if !g.has_edge(a, b) {
            branch_edges.push(format!("branch {a}-{b} is not a link"));
        }
    }

    let mut covered: BTreeSet<usize> = on_cycle.clone();
    let mut in_branch = BTreeSet::new();
    for br in &t.branches {
        in_branch.insert(br.edge.0);
        in_branch.insert(br.edge.1);
    }
    covered.extend(in_branch.iter().copied());
    let uncovered: Vec<usize> = (0..n).filter(|v| !covered.contains(v)).collect();
    let coverage = if uncovered.is_empty() {
        Vec::new()
    } else {
        vec![format!("robots {uncovered:?} not covered")]
    };

    let orphans: Vec<usize> = (0..n)
        .filter(|v| !on_cycle.contains(v) && !in_branch.contains(v))
        .collect();
    let membership = if orphans.is_empty() {
        Vec::new()
    } else {
        vec![format!("off-cycle robots {orphans:?} belong to no branch")]
    };

    // contract the cycle into one root; branches must then form a tree
    // on root + off-cycle vertices
    let mut forest = Vec::new();
    let root = n;
    let node = |v: usize| if on_cycle.contains(&v) { root } else { v };
    let mut parent: Vec<usize> = (0..=n).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for br in &t.branches {
        let (a, b) = br.edge;
        if a >= n || b >= n {
            continue;
        }
        let (ra, rb) = (find(&mut parent, node(a)), find(&mut parent, node(b)));
        if ra == rb {
            forest.push(format!("branch {a}-{b} closes a loop"));
        } else {
            parent[ra] = rb;
        }
    }
    let root_set = find(&mut parent, root);
    let detached: Vec<usize> = in_branch
        .iter()
        .copied()
        .filter(|&v| v < n && !on_cycle.contains(&v) && find(&mut parent, v) != root_set)
        .collect();
    if !detached.is_empty() {
        forest.push(format!("robots {detached:?} are not connected to the cycle"));
    }

    ValidityReport {
        checks: vec![
            result(CHECK_CYCLE_SIMPLE, simple),
            result(CHECK_CYCLE_RELIABLE, reliable),
            result(CHECK_BRANCH_EDGES, branch_edges),
            result(CHECK_COVERAGE, coverage),
            result(CHECK_MEMBERSHIP, membership),
            result(CHECK_FOREST, forest),
        ],
    }
}
