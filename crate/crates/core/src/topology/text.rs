//! Line-oriented topology listing:
//!
//! ```text
//! cycle: 0 3 5 2
//! branch: 1 3
//! branch: 4 1
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write;

use crate::error::{Error, Result};

use super::Topology;

/// Raw parsed listing; link classes are attached later from the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyListing {
    pub cycle: Vec<usize>,
    pub branches: Vec<(usize, usize)>,
}

pub(super) fn render(t: &Topology) -> String {
    let mut out = String::from("cycle:");
    for v in t.cycle.vertices() {
        write!(out, " {v}").unwrap();
    }
    out.push('\n');
    for b in &t.branches {
        writeln!(out, "branch: {} {}", b.edge.0, b.edge.1).unwrap();
    }
    out
}

pub fn parse_topology(text: &str) -> Result<TopologyListing> {
    let mut cycle: Option<Vec<usize>> = None;
    let mut branches = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, rest) = line
            .split_once(':')
            .ok_or_else(|| Error::parse(line_no, format!("expected `cycle:` or `branch:`, found {line:?}")))?;
        let ids = rest
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|_| Error::parse(line_no, format!("invalid vertex id {tok:?}")))
            })
            .collect::<Result<Vec<usize>>>()?;
        match key.trim() {
            "cycle" => {
                if cycle.is_some() {
                    return Err(Error::parse(line_no, "duplicate cycle line"));
                }
                cycle = Some(ids);
            }
            "branch" => {
                if ids.len() != 2 {
                    return Err(Error::parse(
                        line_no,
                        format!("branch needs exactly 2 vertex ids, found {}", ids.len()),
                    ));
                }
                branches.push((ids[0], ids[1]));
            }
            other => return Err(Error::parse(line_no, format!("unknown record {other:?}"))),
        }
    }
    let cycle = cycle.ok_or_else(|| Error::parse(text.lines().count().max(1), "missing cycle line"))?;
    Ok(TopologyListing { cycle, branches })
}
