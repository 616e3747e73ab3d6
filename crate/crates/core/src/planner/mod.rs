//! MCTS action planner over regions.
//!
//! The root is a one-step Focus on the full image. Each iteration selects a
//! path by UCT, expands the first untried action of the leaf, evaluates the
//! proposed region once (there is no random playout) and backpropagates that
//! reward. The answer is the best-rewarded region over every node evaluated,
//! not only the leaves.
//!
//! Everything is deterministic: ties break by action order
//! (Focus < Shift < Scatter) and by node id, unless a tie-break seed is
//! configured.

mod trace;

pub use trace::{ConstraintKind, SearchTrace, TraceEvent};

use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::actions::{self, ActionKind, ActionOutcome, ActionParams, Proposal, Unavailability};
use crate::config::ConfigError;
use crate::geometry::Rect;
use crate::perceptor::ScoredScene;
use crate::reward::{self, RewardBreakdown, RewardTerms, RewardWeights};

/// Regions whose IoU with the parent is at least `1 - NOOP_IOU_TOL` are no-ops.
pub const NOOP_IOU_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("scene has no elements to search over")]
    EmptyScene,
    #[error("root focus produced no region")]
    RootUnavailable,
    #[error("action {action} is unavailable at node {node_id} and cannot be scored")]
    UnavailableAction { node_id: usize, action: ActionKind },
    #[error("invalid search configuration: {0}")]
    Config(#[from] ConfigError),
}

/// Subset of the three actions the planner may use.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActionSet([bool; 3]);

impl ActionSet {
    pub const ALL: ActionSet = ActionSet([true; 3]);
    pub const NONE: ActionSet = ActionSet([false; 3]);

    pub fn from_actions(actions: &[ActionKind]) -> Self {
        let mut set = [false; 3];
        for a in actions {
            set[a.index()] = true;
        }
        Self(set)
    }

    /// Comma-separated action names; `all` and `none` are accepted.
    pub fn parse(s: &str) -> Result<Self, String> {
        match s.trim() {
            "all" => return Ok(Self::ALL),
            "none" | "" => return Ok(Self::NONE),
            _ => {}
        }
        let actions = s
            .split(',')
            .map(|part| ActionKind::parse(part).ok_or_else(|| format!("unknown action {part:?}")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_actions(&actions))
    }

    pub fn contains(&self, action: ActionKind) -> bool {
        self.0[action.index()]
    }

    pub fn is_empty(&self) -> bool {
        self.0 == [false; 3]
    }

    pub fn actions(&self) -> Vec<ActionKind> {
        ActionKind::ALL.into_iter().filter(|a| self.contains(*a)).collect()
    }

    pub fn label(&self) -> String {
        if self.is_empty() {
            return "none".into();
        }
        self.actions().iter().map(|a| a.name()).collect::<Vec<_>>().join(",")
    }
}

impl Default for ActionSet {
    fn default() -> Self {
        Self::ALL
    }
}

impl fmt::Debug for ActionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ActionSet({})", self.label())
    }
}

impl Serialize for ActionSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.actions().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ActionSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(Self::from_actions(&Vec::<ActionKind>::deserialize(deserializer)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Number of select/expand/evaluate/backpropagate iterations.
    pub rollout_budget: usize,
    pub max_depth: usize,
    pub uct_c: f64,
    pub action_params: ActionParams,
    pub reward_weights: RewardWeights,
    pub reward_terms: RewardTerms,
    pub actions: ActionSet,
    /// Expand every available action at every node up to `max_depth`,
    /// ignoring the budget.
    pub exhaustive: bool,
    /// Re-derive element scores from raw similarities for every region.
    pub rescore_per_region: bool,
    /// Break exact UCT ties with this seed instead of by action order.
    pub seeded_tiebreak: Option<u64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            rollout_budget: 8,
            max_depth: 3,
            uct_c: 1.0,
            action_params: ActionParams::default(),
            reward_weights: RewardWeights::default(),
            reward_terms: RewardTerms::default(),
            actions: ActionSet::ALL,
            exhaustive: false,
            rescore_per_region: false,
            seeded_tiebreak: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_depth < 1 {
            return Err(ConfigError::new("max_depth", "must be at least 1"));
        }
        if !(self.uct_c >= 0.0 && self.uct_c.is_finite()) {
            return Err(ConfigError::new("uct_c", format!("must be non-negative, got {}", self.uct_c)));
        }
        self.action_params.validate().map_err(|e| e.within("action_params"))?;
        self.reward_weights.validate().map_err(|e| e.within("reward_weights"))?;
        if !self.reward_terms.none_enabled() {
            self.effective_weights()?;
        }
        Ok(())
    }

    /// Reward weights after disabling the switched-off terms.
    pub fn effective_weights(&self) -> Result<RewardWeights, ConfigError> {
        self.reward_weights.with_terms(self.reward_terms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum SlotState {
    Unexpanded,
    Expanded { child: usize },
    Unavailable { reason: Unavailability },
}

/// Statistics for one action out of a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSlot {
    pub action: ActionKind,
    #[serde(flatten)]
    pub state: SlotState,
    /// V(S, a)
    pub visits: u32,
    /// Q(S, a): running mean of backpropagated values.
    pub value: f64,
}

impl ActionSlot {
    fn new(action: ActionKind, enabled: bool) -> Self {
        Self {
            action,
            state: if enabled {
                SlotState::Unexpanded
            } else {
                SlotState::Unavailable { reason: Unavailability::Disabled }
            },
            visits: 0,
            value: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchNode {
    pub id: usize,
    pub parent: Option<usize>,
    /// `None` for the root.
    pub action: Option<ActionKind>,
    pub depth: usize,
    pub region: Rect,
    pub reward: RewardBreakdown,
    /// V(S): one for the node's own evaluation plus one per pass through it.
    pub visit_count: u32,
    pub slots: [ActionSlot; 3],
}

impl SearchNode {
    pub fn new(
        id: usize,
        parent: Option<usize>,
        action: Option<ActionKind>,
        depth: usize,
        region: Rect,
        reward: RewardBreakdown,
        actions: ActionSet,
    ) -> Self {
        Self {
            id,
            parent,
            action,
            depth,
            region,
            reward,
            visit_count: 0,
            slots: ActionKind::ALL.map(|a| ActionSlot::new(a, actions.contains(a))),
        }
    }

    pub fn slot(&self, action: ActionKind) -> &ActionSlot {
        &self.slots[action.index()]
    }

    pub fn has_unexpanded(&self) -> bool {
        self.slots.iter().any(|s| s.state == SlotState::Unexpanded)
    }

    pub fn children(&self) -> impl Iterator<Item = (ActionKind, usize)> + '_ {
        self.slots.iter().filter_map(|s| match s.state {
            SlotState::Expanded { child } => Some((s.action, child)),
            _ => None,
        })
    }
}

/// Arena of nodes; ids are indices in creation order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTree {
    nodes: Vec<SearchNode>,
}

impl SearchTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `node`, which must carry the next id.
    pub fn push(&mut self, node: SearchNode) -> usize {
        assert_eq!(node.id, self.nodes.len(), "node ids are dense");
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn node(&self, id: usize) -> &SearchNode {
        &self.nodes[id]
    }

    pub fn node_mut(&mut self, id: usize) -> &mut SearchNode {
        &mut self.nodes[id]
    }

    pub fn nodes(&self) -> &[SearchNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The slot on `parent` whose child is `child`.
    fn edge_to(&self, parent: usize, child: usize) -> ActionKind {
        self.nodes[parent]
            .children()
            .find(|(_, c)| *c == child)
            .map(|(a, _)| a)
            .expect("consecutive path nodes are parent and child")
    }

    /// Lowest-id node with the highest reward total.
    pub fn best_node(&self) -> Option<&SearchNode> {
        let mut best: Option<&SearchNode> = None;
        for node in &self.nodes {
            if best.is_none_or(|b| node.reward.total > b.reward.total) {
                best = Some(node);
            }
        }
        best
    }
}

/// UCT score of `action` at `node`: infinite for untried actions, otherwise
/// `Q + c·sqrt(ln V(S) / V(S, a))`.
pub fn uct_score(node: &SearchNode, action: ActionKind, c: f64) -> Result<f64, PlannerError> {
    let slot = node.slot(action);
    match slot.state {
        SlotState::Unavailable { .. } => Err(PlannerError::UnavailableAction { node_id: node.id, action }),
        SlotState::Unexpanded => Ok(f64::INFINITY),
        SlotState::Expanded { .. } if slot.visits == 0 => Ok(f64::INFINITY),
        SlotState::Expanded { .. } => {
            let parent_visits = (node.visit_count.max(1)) as f64;
            Ok(slot.value + c * (parent_visits.ln() / slot.visits as f64).sqrt())
        }
    }
}

fn select_path_inner(tree: &SearchTree, config: &SearchConfig, mut rng: Option<&mut ChaCha8Rng>) -> Vec<usize> {
    let mut path = vec![0];
    loop {
        let node = tree.node(*path.last().expect("path starts at root"));
        if node.depth >= config.max_depth || node.has_unexpanded() {
            return path;
        }
        let mut best = f64::NEG_INFINITY;
        let mut tied: Vec<usize> = Vec::new();
        for (action, child) in node.children() {
            let score = uct_score(node, action, config.uct_c).expect("expanded slots are scorable");
            if score > best {
                best = score;
                tied.clear();
                tied.push(child);
            } else if score == best {
                tied.push(child);
            }
        }
        let next = match (tied.len(), rng.as_deref_mut()) {
            (0, _) => return path,
            (1, _) | (_, None) => tied[0],
            (n, Some(rng)) => tied[rng.random_range(0..n)],
        };
        path.push(next);
    }
}

/// Descends from the root by UCT until reaching a node with an untried
/// action, a node at `max_depth`, or a node with no children.
pub fn select_path(tree: &SearchTree, config: &SearchConfig) -> Vec<usize> {
    select_path_inner(tree, config, None)
}

/// Pushes `value` along `path`: every edge's visit count and running mean,
/// and every node's visit count.
pub fn backpropagate(tree: &mut SearchTree, path: &[usize], value: f64) {
    update_edges(tree, path, value);
    for &id in path {
        tree.node_mut(id).visit_count += 1;
    }
}

fn update_edges(tree: &mut SearchTree, path: &[usize], value: f64) {
    for pair in path.windows(2) {
        let action = tree.edge_to(pair[0], pair[1]);
        let slot = &mut tree.node_mut(pair[0]).slots[action.index()];
        slot.visits += 1;
        slot.value += (value - slot.value) / slot.visits as f64;
    }
}

fn evaluate_region(region: &Rect, scored: &ScoredScene, weights: &RewardWeights, rescore: bool) -> RewardBreakdown {
    if rescore {
        reward::evaluate_elements(region, &scored.rescored_in_region(region), weights)
    } else {
        reward::evaluate(region, scored, weights)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_region: Rect,
    pub best_node_id: usize,
    pub best_reward: RewardBreakdown,
    pub node_count: usize,
    pub trace: SearchTrace,
}

/// One search over one scored scene. Owns its tree exclusively.
pub struct Planner<'a> {
    scored: &'a ScoredScene,
    config: &'a SearchConfig,
    weights: RewardWeights,
    tree: SearchTree,
    events: Vec<TraceEvent>,
    rng: Option<ChaCha8Rng>,
}

impl<'a> Planner<'a> {
    /// Validates `config` and builds the root node.
    pub fn new(scored: &'a ScoredScene, config: &'a SearchConfig) -> Result<Self, PlannerError> {
        config.validate()?;
        let mut planner = Self {
            scored,
            config,
            weights: config.effective_weights()?,
            tree: SearchTree::new(),
            events: Vec::new(),
            rng: config.seeded_tiebreak.map(ChaCha8Rng::seed_from_u64),
        };
        planner.init_root()?;
        Ok(planner)
    }

    pub fn tree(&self) -> &SearchTree {
        &self.tree
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    fn init_root(&mut self) -> Result<(), PlannerError> {
        if self.scored.scene().elements().is_empty() {
            return Err(PlannerError::EmptyScene);
        }
        let full = self.scored.bounds();
        let proposal = match actions::focus(&full, self.scored, &self.config.action_params) {
            ActionOutcome::Proposed(p) => p,
            ActionOutcome::Unavailable(_) => return Err(PlannerError::RootUnavailable),
        };
        let id = self.create_node(None, None, 0, proposal);
        self.tree.node_mut(id).visit_count = 1;
        Ok(())
    }

    fn create_node(
        &mut self,
        parent: Option<usize>,
        action: Option<ActionKind>,
        depth: usize,
        proposal: Proposal,
    ) -> usize {
        let id = self.tree.len();
        let reward = evaluate_region(&proposal.region, self.scored, &self.weights, self.config.rescore_per_region);
        let node = SearchNode::new(id, parent, action, depth, proposal.region, reward.clone(), self.config.actions);
        self.tree.push(node);
        self.events.push(TraceEvent::NodeCreated {
            node_id: id,
            parent_id: parent,
            action,
            depth,
            region: proposal.region,
            reward,
            prune_steps: proposal.prune_steps,
            outliers_removed: proposal.outliers_removed,
            shrink_steps: proposal.shrink_steps,
            capped: proposal.capped,
        });
        if proposal.constraint_violated {
            self.events.push(TraceEvent::ConstraintFlag { node_id: id, kind: ConstraintKind::ShiftOverlap });
        }
        id
    }

    fn mark_unavailable(&mut self, node_id: usize, action: ActionKind, reason: Unavailability) {
        self.tree.node_mut(node_id).slots[action.index()].state = SlotState::Unavailable { reason };
        self.events.push(TraceEvent::ActionPruned { node_id, action, reason });
    }

    /// Applies `action` at `node_id`; a child is created unless the action is
    /// unavailable or reproduces the node's own region.
    fn try_action(&mut self, node_id: usize, action: ActionKind) -> Option<usize> {
        let node = self.tree.node(node_id);
        let (region, depth) = (node.region, node.depth);
        match actions::apply(action, &region, self.scored, &self.config.action_params) {
            ActionOutcome::Unavailable(reason) => {
                self.mark_unavailable(node_id, action, reason);
                None
            }
            ActionOutcome::Proposed(p) if p.region.iou(&region) >= 1.0 - NOOP_IOU_TOL => {
                self.mark_unavailable(node_id, action, Unavailability::NoOp);
                None
            }
            ActionOutcome::Proposed(p) => {
                let child = self.create_node(Some(node_id), Some(action), depth + 1, p);
                self.tree.node_mut(node_id).slots[action.index()].state = SlotState::Expanded { child };
                Some(child)
            }
        }
    }

    /// Expands the first untried action of `node_id` in action order.
    /// Returns `None` when the node is at `max_depth` or every slot is
    /// exhausted.
    pub fn expand(&mut self, node_id: usize) -> Option<usize> {
        if self.tree.node(node_id).depth >= self.config.max_depth {
            return None;
        }
        for action in ActionKind::ALL {
            if self.tree.node(node_id).slot(action).state != SlotState::Unexpanded {
                continue;
            }
            if let Some(child) = self.try_action(node_id, action) {
                return Some(child);
            }
        }
        None
    }

    pub fn select_path(&mut self) -> Vec<usize> {
        select_path_inner(&self.tree, self.config, self.rng.as_mut())
    }

    /// One select, expand, evaluate, backpropagate cycle.
    pub fn iterate(&mut self) {
        let mut path = self.select_path();
        self.events.push(TraceEvent::Selected { path: path.clone() });
        let leaf = *path.last().expect("non-empty path");
        match self.expand(leaf) {
            Some(child) => {
                path.push(child);
                let value = self.tree.node(child).reward.total;
                backpropagate(&mut self.tree, &path, value);
                self.events.push(TraceEvent::Backpropagated { path, value });
            }
            None => {
                // Dead end: re-use the leaf's stored reward. The leaf's own
                // counter is left alone since no action was taken from it.
                let value = self.tree.node(leaf).reward.total;
                update_edges(&mut self.tree, &path, value);
                for &id in &path[..path.len() - 1] {
                    self.tree.node_mut(id).visit_count += 1;
                }
                self.events.push(TraceEvent::Backpropagated { path, value });
            }
        }
    }

    /// Breadth-first expansion of every available action to `max_depth`.
    pub fn expand_all(&mut self) {
        let mut queue = VecDeque::from([0usize]);
        while let Some(id) = queue.pop_front() {
            if self.tree.node(id).depth >= self.config.max_depth {
                continue;
            }
            for action in ActionKind::ALL {
                if self.tree.node(id).slot(action).state != SlotState::Unexpanded {
                    continue;
                }
                if let Some(child) = self.try_action(id, action) {
                    queue.push_back(child);
                }
            }
        }
    }

    pub fn finish(self) -> SearchResult {
        let best = self.tree.best_node().expect("root exists").clone();
        let node_count = self.tree.len();
        SearchResult {
            best_region: best.region,
            best_node_id: best.id,
            best_reward: best.reward,
            node_count,
            trace: SearchTrace {
                config: self.config.clone(),
                events: self.events,
                nodes: self.tree.nodes,
                best_node_id: best.id,
            },
        }
    }
}

/// Runs a full search and returns the best region found.
pub fn run_search(scored: &ScoredScene, config: &SearchConfig) -> Result<SearchResult, PlannerError> {
    let mut planner = Planner::new(scored, config)?;
    if config.exhaustive {
        planner.expand_all();
    } else {
        for _ in 0..config.rollout_budget {
            planner.iterate();
        }
    }
    Ok(planner.finish())
}
