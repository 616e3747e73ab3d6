//! Structured search traces and their JSON/DOT renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{SearchConfig, SearchNode, SlotState};
use crate::actions::{ActionKind, Unavailability};
use crate::geometry::Rect;
use crate::reward::RewardBreakdown;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// Shift could not bring the overlap with its source region under the cap.
    ShiftOverlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    NodeCreated {
        node_id: usize,
        parent_id: Option<usize>,
        action: Option<ActionKind>,
        depth: usize,
        region: Rect,
        reward: RewardBreakdown,
        prune_steps: usize,
        outliers_removed: usize,
        shrink_steps: usize,
        capped: bool,
    },
    Selected {
        path: Vec<usize>,
    },
    ActionPruned {
        node_id: usize,
        action: ActionKind,
        reason: Unavailability,
    },
    Backpropagated {
        path: Vec<usize>,
        value: f64,
    },
    ConstraintFlag {
        node_id: usize,
        kind: ConstraintKind,
    },
}

/// Complete record of one search: configuration, event log, final tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub config: SearchConfig,
    pub events: Vec<TraceEvent>,
    pub nodes: Vec<SearchNode>,
    pub best_node_id: usize,
}

impl SearchTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Graphviz rendering: one box per node, edges labelled with action
    /// statistics, pruned actions as dashed stubs, the best node bold.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph search {\n  node [shape=box, fontname=\"Helvetica\"];\n");
        for node in &self.nodes {
            let r = node.region.to_array();
            let title = match node.action {
                None => "root".to_string(),
                Some(a) => format!("{} {}", node.id, a.name()),
            };
            let label = format!(
                "{title}\\ndepth {}  V={}\\n[{:.0}, {:.0}, {:.0}, {:.0}]\\nR={:.4} (rel {:.3} cov {:.3} con {:.3})",
                node.depth,
                node.visit_count,
                r[0],
                r[1],
                r[2],
                r[3],
                node.reward.total,
                node.reward.r_rel,
                node.reward.r_cov,
                node.reward.r_con,
            );
            let style = if node.id == self.best_node_id { ", style=bold, color=red" } else { "" };
            let _ = writeln!(out, "  n{} [label=\"{label}\"{style}];", node.id);
        }
        for node in &self.nodes {
            for slot in &node.slots {
                match slot.state {
                    SlotState::Expanded { child } => {
                        let _ = writeln!(
                            out,
                            "  n{} -> n{child} [label=\"{} Q={:.4} N={}\"];",
                            node.id,
                            slot.action.name(),
                            slot.value,
                            slot.visits
                        );
                    }
                    SlotState::Unavailable { reason } if reason != Unavailability::Disabled => {
                        let stub = format!("p{}_{}", node.id, slot.action.name());
                        let _ = writeln!(
                            out,
                            "  {stub} [label=\"{:?}\", shape=plaintext, fontcolor=gray];\n  n{} -> {stub} [label=\"{}\", style=dashed, color=gray];",
                            reason,
                            node.id,
                            slot.action.name()
                        );
                    }
                    _ => {}
                }
            }
        }
        out.push_str("}\n");
        out
    }
}
