//! The disjointed-tree forest.
//!
//! A [`Forest`] holds root trees (anchored at a start or goal) and disjointed
//! trees (anchored at random free points). Each iteration picks a tree by
//! roulette over its selection weight, grows it one step from its chain tip,
//! and merges it with any tree that has a node within `epsilon` of the new
//! sample. Disjointed trees whose weight decays below a threshold are
//! restarted elsewhere. Root trees keep their nodes cost-optimal locally by
//! RRT*-style rewiring.
//!
//! Nodes live in one arena shared by all trees so that moving a subtree from
//! one tree to another never changes node ids or positions, and the spatial
//! index does not need to be touched by merges.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::PlanError;
use crate::sampling::{DirectionState, DEFAULT_KAPPA, DEGENERATE_KAPPA};
use crate::spatial::GridIndex;
use crate::workspace::{GridMap, Point, Segment};

/// Tolerance for stored-cost coherence checks.
pub const COST_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TreeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TreeKind {
    Root,
    Disjointed,
}

impl TreeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TreeKind::Root => "root",
            TreeKind::Disjointed => "disjointed",
        }
    }
}

/// Planner parameters shared by the single- and multi-robot forests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Number of disjointed trees.
    pub k: usize,
    /// Merge and connection distance.
    pub epsilon: f64,
    /// Extension step length.
    pub step: f64,
    /// Disjointed trees below this weight are restarted.
    pub restart_threshold: f64,
    pub rewire_radius: f64,
    pub kappa: f64,
    pub degenerate_kappa: f64,
    /// Budget of extension attempts.
    pub max_samples: usize,
    pub seed: u64,
    /// Smoothing factor of the weight moving average.
    pub weight_decay: f64,
    pub min_weight: f64,
    pub initial_weight: f64,
    /// Draws of a restart location before proximity is ignored.
    pub restart_attempts: usize,
}

impl PlannerConfig {
    /// Defaults scaled to the map: `step = diagonal / 50`, `epsilon = step`,
    /// `rewire_radius = 2 * step`.
    pub fn for_map(map: &GridMap) -> Self {
        let step = map.diagonal() / 50.0;
        PlannerConfig {
            k: 20,
            epsilon: step,
            step,
            restart_threshold: 0.05,
            rewire_radius: 2.0 * step,
            kappa: DEFAULT_KAPPA,
            degenerate_kappa: DEGENERATE_KAPPA,
            max_samples: 50_000,
            seed: 0,
            weight_decay: 0.85,
            min_weight: 0.01,
            initial_weight: 0.5,
            restart_attempts: 5,
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let positive = [
            ("epsilon", self.epsilon),
            ("step", self.step),
            ("restart_threshold", self.restart_threshold),
            ("rewire_radius", self.rewire_radius),
            ("min_weight", self.min_weight),
            ("initial_weight", self.initial_weight),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(PlanError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.restart_threshold >= 1.0 {
            return Err(PlanError::InvalidConfig("restart_threshold must be < 1".into()));
        }
        if !(0.0..1.0).contains(&self.weight_decay) {
            return Err(PlanError::InvalidConfig("weight_decay must be in [0, 1)".into()));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(PlanError::InvalidConfig("kappa must be finite and >= 0".into()));
        }
        if self.initial_weight < self.min_weight || self.initial_weight > 1.0 {
            return Err(PlanError::InvalidConfig(
                "initial_weight must be in [min_weight, 1]".into(),
            ));
        }
        if self.max_samples == 0 || self.restart_attempts == 0 {
            return Err(PlanError::InvalidConfig(
                "max_samples and restart_attempts must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: NodeId,
    pub position: Point,
    pub parent: Option<NodeId>,
    /// Path cost from the owning tree's root.
    pub cost: f64,
    pub tree: TreeId,
    pub children: Vec<NodeId>,
    pub alive: bool,
}

#[derive(Debug, Clone)]
pub struct Tree {
    pub id: TreeId,
    pub kind: TreeKind,
    pub nodes: Vec<NodeId>,
    pub root: Option<NodeId>,
    /// Node the next extension grows from.
    pub tip: Option<NodeId>,
    pub weight: f64,
    pub active: bool,
    /// Set once the owning group is complete; pins the weight at zero.
    pub halted: bool,
    pub sampler: DirectionState,
    pub group: Option<GroupId>,
}

impl Tree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Candidate for merging and sharing.
    pub fn mergeable(&self) -> bool {
        self.active && !self.halted
    }
}

/// A root point handed to [`Forest::new`].
#[derive(Debug, Clone, Copy)]
pub struct RootSpec {
    pub point: Point,
    pub group: Option<GroupId>,
    /// Whether an obstacle hit should be reported as a goal rather than a start.
    pub is_goal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtensionResult {
    Added(NodeId),
    Collision(Point),
}

/// Closest node of another tree within `epsilon` of a query node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub tree: TreeId,
    pub node: NodeId,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Merge {
    pub winner: TreeId,
    pub loser: TreeId,
    pub moved: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MergeReport {
    pub merges: Vec<Merge>,
}

impl MergeReport {
    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RestartStep {
    /// A restart draw landed near a tree and was grafted onto it.
    Attached(TreeId, NodeId),
    /// A tree was reset to a single root at the given position.
    Restarted(TreeId, Point),
}

/// Restart actions in the order they were performed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RestartReport {
    pub steps: Vec<RestartStep>,
}

impl RestartReport {
    pub fn count(&self) -> usize {
        self.restarted().count()
    }

    pub fn restarted(&self) -> impl Iterator<Item = (TreeId, Point)> + '_ {
        self.steps.iter().filter_map(|s| match *s {
            RestartStep::Restarted(t, p) => Some((t, p)),
            RestartStep::Attached(..) => None,
        })
    }

    pub fn attached(&self) -> impl Iterator<Item = (TreeId, NodeId)> + '_ {
        self.steps.iter().filter_map(|s| match *s {
            RestartStep::Attached(t, n) => Some((t, n)),
            RestartStep::Restarted(..) => None,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuditError {
    #[error("tree {0:?}: {1}")]
    Tree(TreeId, String),
    #[error("node {0:?}: {1}")]
    Node(NodeId, String),
    #[error("spatial index out of sync: {0}")]
    Index(String),
}

#[derive(Debug, Clone)]
pub struct Forest {
    pub config: PlannerConfig,
    trees: Vec<Tree>,
    nodes: Vec<Node>,
    index: GridIndex<NodeId>,
    // ids of active trees, ascending
    active: Vec<TreeId>,
}

impl Forest {
    /// Creates one tree per root point plus `config.k` disjointed trees at
    /// random free points.
    pub fn new<R: Rng + ?Sized>(
        map: &GridMap,
        roots: &[RootSpec],
        config: PlannerConfig,
        rng: &mut R,
    ) -> Result<Self, PlanError> {
        config.validate()?;
        let mut forest = Forest {
            index: GridIndex::new(config.epsilon),
            config,
            trees: Vec::new(),
            nodes: Vec::new(),
            active: Vec::new(),
        };
        for spec in roots {
            if !map.is_free(spec.point) {
                return Err(if spec.is_goal {
                    PlanError::InvalidGoal(spec.point)
                } else {
                    PlanError::InvalidStart(spec.point)
                });
            }
            forest.spawn_tree(TreeKind::Root, spec.point, spec.group, rng);
        }
        for _ in 0..forest.config.k {
            let p = map.sample_free(rng)?;
            forest.spawn_tree(TreeKind::Disjointed, p, None, rng);
        }
        Ok(forest)
    }

    /// Adds a fresh single-node tree and returns its id.
    pub fn spawn_tree<R: Rng + ?Sized>(
        &mut self,
        kind: TreeKind,
        at: Point,
        group: Option<GroupId>,
        rng: &mut R,
    ) -> TreeId {
        let id = TreeId(self.trees.len() as u32);
        self.trees.push(Tree {
            id,
            kind,
            nodes: Vec::new(),
            root: None,
            tip: None,
            weight: self.config.initial_weight,
            active: true,
            halted: false,
            sampler: self.fresh_sampler(at, rng),
            group,
        });
        let root = self.push_node(id, at, None);
        let tree = &mut self.trees[id.0 as usize];
        tree.root = Some(root);
        tree.tip = Some(root);
        self.active.push(id);
        id
    }

    fn fresh_sampler<R: Rng + ?Sized>(&self, at: Point, rng: &mut R) -> DirectionState {
        let mut s = DirectionState::random(self.config.kappa, at, rng);
        s.degenerate_kappa = self.config.degenerate_kappa;
        s
    }

    fn push_node(&mut self, tree: TreeId, position: Point, parent: Option<NodeId>) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        let cost = parent.map_or(0.0, |p| {
            let pn = &self.nodes[p.0 as usize];
            pn.cost + pn.position.dist(position)
        });
        self.nodes.push(Node {
            id,
            position,
            parent,
            cost,
            tree,
            children: Vec::new(),
            alive: true,
        });
        if let Some(p) = parent {
            self.nodes[p.0 as usize].children.push(id);
        }
        self.trees[tree.0 as usize].nodes.push(id);
        self.index.insert(id, position);
        id
    }

    pub fn tree(&self, id: TreeId) -> &Tree {
        &self.trees[id.0 as usize]
    }

    pub fn tree_mut(&mut self, id: TreeId) -> &mut Tree {
        &mut self.trees[id.0 as usize]
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0 as usize]
    }

    /// Every tree ever created, including emptied ones.
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn active_trees(&self) -> impl Iterator<Item = &Tree> + '_ {
        self.active.iter().map(move |id| &self.trees[id.0 as usize])
    }

    pub fn active_ids(&self) -> &[TreeId] {
        &self.active
    }

    pub fn total_nodes(&self) -> usize {
        self.active_trees().map(Tree::len).sum()
    }

    pub fn index(&self) -> &GridIndex<NodeId> {
        &self.index
    }

    fn deactivate(&mut self, id: TreeId) {
        self.trees[id.0 as usize].active = false;
        self.active.retain(|&t| t != id);
    }

    /// Roulette-wheel selection over active trees with positive weight.
    pub fn pick_tree<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TreeId, PlanError> {
        let total: f64 = self.active_trees().map(|t| t.weight).filter(|&w| w > 0.0).sum();
        if total <= 0.0 {
            return Err(PlanError::AllTreesHalted);
        }
        let mut r = rng.gen::<f64>() * total;
        let mut last = None;
        for t in self.active_trees().filter(|t| t.weight > 0.0) {
            if r < t.weight {
                return Ok(t.id);
            }
            r -= t.weight;
            last = Some(t.id);
        }
        // floating-point leftovers land on the last candidate
        last.ok_or(PlanError::AllTreesHalted)
    }

    /// Exponential moving average of extension success, clamped to
    /// `[min_weight, 1]`. Halted trees stay at zero.
    pub fn update_weight(&mut self, id: TreeId, success: bool) {
        let (alpha, floor) = (self.config.weight_decay, self.config.min_weight);
        let tree = &mut self.trees[id.0 as usize];
        if tree.halted {
            tree.weight = 0.0;
            return;
        }
        let target = if success { 1.0 } else { 0.0 };
        tree.weight = (alpha * tree.weight + (1.0 - alpha) * target).clamp(floor, 1.0);
    }

    /// Pins a tree's weight at zero and stops it from growing or merging.
    pub fn halt(&mut self, id: TreeId) {
        let tree = &mut self.trees[id.0 as usize];
        tree.halted = true;
        tree.weight = 0.0;
    }

    /// Restarts every active disjointed tree whose weight fell below the
    /// threshold. A restart draw that lands within `epsilon` (with a free
    /// segment) of another tree becomes a node of that tree and a new draw is
    /// made; the final attempt is used as the new root regardless.
    pub fn restart_low_probability<R: Rng + ?Sized>(
        &mut self,
        map: &GridMap,
        rng: &mut R,
    ) -> Result<RestartReport, PlanError> {
        let mut report = RestartReport::default();
        let candidates: Vec<TreeId> = self
            .active_trees()
            .filter(|t| t.kind == TreeKind::Disjointed && !t.halted && t.weight < self.config.restart_threshold)
            .map(|t| t.id)
            .collect();
        for id in candidates {
            self.clear_tree(id);
            let attempts = self.config.restart_attempts;
            let mut q = map.sample_free(rng)?;
            for attempt in 1..=attempts {
                if attempt == attempts {
                    break;
                }
                match self.nearby_attachment(id, q, map) {
                    Some(parent) => {
                        let owner = self.nodes[parent.0 as usize].tree;
                        let node = self.push_node(owner, q, Some(parent));
                        report.steps.push(RestartStep::Attached(owner, node));
                        q = map.sample_free(rng)?;
                    }
                    None => break,
                }
            }
            self.reset_tree(id, q, rng);
            report.steps.push(RestartStep::Restarted(id, q));
        }
        Ok(report)
    }

    fn nearby_attachment(&self, exclude: TreeId, q: Point, map: &GridMap) -> Option<NodeId> {
        let mut hits = Vec::new();
        self.index.for_each_within(q, self.config.epsilon, |n, p, d| {
            let tree = self.nodes[n.0 as usize].tree;
            if tree != exclude && self.trees[tree.0 as usize].mergeable() {
                hits.push((d, n, p));
            }
        });
        hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (_, n, p) = *hits.first()?;
        map.segment_free(&Segment::new(p, q)).then_some(n)
    }

    /// Removes every node of a tree from the arena and index.
    fn clear_tree(&mut self, id: TreeId) -> Vec<NodeId> {
        let ids = std::mem::take(&mut self.trees[id.0 as usize].nodes);
        for &n in &ids {
            let node = &mut self.nodes[n.0 as usize];
            node.alive = false;
            node.children.clear();
            node.parent = None;
            let p = node.position;
            self.index.remove(n, p);
        }
        let tree = &mut self.trees[id.0 as usize];
        tree.root = None;
        tree.tip = None;
        ids
    }

    /// Replaces a tree's contents with a single root at `at`.
    pub fn reset_tree<R: Rng + ?Sized>(&mut self, id: TreeId, at: Point, rng: &mut R) {
        self.clear_tree(id);
        let sampler = self.fresh_sampler(at, rng);
        let root = self.push_node(id, at, None);
        let w0 = self.config.initial_weight;
        let tree = &mut self.trees[id.0 as usize];
        tree.root = Some(root);
        tree.tip = Some(root);
        tree.weight = w0;
        tree.sampler = sampler;
        if !tree.active {
            tree.active = true;
            self.active.push(id);
            self.active.sort();
        }
    }

    /// Grows a tree one step from its chain tip. Root trees rewire the new
    /// node into their neighbourhood.
    pub fn extend<R: Rng + ?Sized>(&mut self, id: TreeId, map: &GridMap, rng: &mut R) -> ExtensionResult {
        let tree = &self.trees[id.0 as usize];
        debug_assert!(tree.active && !tree.halted);
        let tip = tree.tip.expect("active tree has a tip");
        let (q, theta) = tree.sampler.propose_extension(self.config.step, rng);
        let from = self.nodes[tip.0 as usize].position;
        let ok = map.is_free(q) && map.segment_free(&Segment::new(from, q));
        let tree = &mut self.trees[id.0 as usize];
        tree.sampler.observe(ok, theta, q);
        if !ok {
            return ExtensionResult::Collision(q);
        }
        let node = self.push_node(id, q, Some(tip));
        let tree = &mut self.trees[id.0 as usize];
        tree.tip = Some(node);
        if tree.kind == TreeKind::Root {
            self.rewire(node, map);
        }
        ExtensionResult::Added(node)
    }

    /// For every other mergeable tree, its closest node within `epsilon` of
    /// `node` that has a free connecting segment. Sorted by tree id.
    pub fn contacts<F: Fn(&Tree) -> bool>(&self, node: NodeId, map: &GridMap, accept: F) -> Vec<Contact> {
        let n = &self.nodes[node.0 as usize];
        let (origin, own) = (n.position, n.tree);
        let mut hits: Vec<(TreeId, f64, NodeId, Point)> = Vec::new();
        self.index.for_each_within(origin, self.config.epsilon, |m, p, d| {
            let tree = self.nodes[m.0 as usize].tree;
            if tree != own {
                hits.push((tree, d, m, p));
            }
        });
        hits.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut out: Vec<Contact> = Vec::new();
        for (tree, d, m, p) in hits {
            if out.last().is_some_and(|c| c.tree == tree) {
                continue;
            }
            let t = &self.trees[tree.0 as usize];
            if !t.mergeable() || !accept(t) {
                continue;
            }
            if map.segment_free(&Segment::new(origin, p)) {
                out.push(Contact {
                    tree,
                    node: m,
                    distance: d,
                });
            }
        }
        out
    }

    /// `true` when `a` takes precedence over `b` in a merge: root trees beat
    /// disjointed trees, then larger trees win, then the lower id.
    pub fn outranks(&self, a: TreeId, b: TreeId) -> bool {
        let (ta, tb) = (self.tree(a), self.tree(b));
        match (ta.kind, tb.kind) {
            (TreeKind::Root, TreeKind::Disjointed) => true,
            (TreeKind::Disjointed, TreeKind::Root) => false,
            _ => (ta.len(), std::cmp::Reverse(a)) > (tb.len(), std::cmp::Reverse(b)),
        }
    }

    /// Merges the tree owning `node` with every nearby mergeable tree.
    /// Root trees never merge with each other.
    pub fn merge_nearby(&mut self, node: NodeId, map: &GridMap) -> MergeReport {
        self.merge_nearby_filtered(node, map, |_| true)
    }

    pub fn merge_nearby_filtered<F: Fn(&Tree) -> bool>(
        &mut self,
        node: NodeId,
        map: &GridMap,
        accept: F,
    ) -> MergeReport {
        let mut report = MergeReport::default();
        let contacts = self.contacts(node, map, &accept);
        for c in contacts {
            let current = self.nodes[node.0 as usize].tree;
            let other = self.tree(c.tree);
            if !other.mergeable() || other.is_empty() || c.tree == current {
                continue;
            }
            if other.kind == TreeKind::Root && self.tree(current).kind == TreeKind::Root {
                continue;
            }
            let merge = if self.outranks(current, c.tree) {
                self.absorb(current, node, c.tree, c.node, map)
            } else {
                self.absorb(c.tree, c.node, current, node, map)
            };
            report.merges.push(merge);
        }
        report
    }

    /// Moves every node of `loser` into `winner`, joining at the contact pair
    /// `winner_node`-`loser_node`. Into a root tree, nodes enter one by one in
    /// breadth-first order from the contact through rewiring; otherwise the
    /// loser is re-rooted at its contact node and hung under `winner_node`.
    /// The loser ends up empty and inactive.
    pub fn absorb(
        &mut self,
        winner: TreeId,
        winner_node: NodeId,
        loser: TreeId,
        loser_node: NodeId,
        map: &GridMap,
    ) -> Merge {
        debug_assert_ne!(winner, loser);
        let order = self.bfs_order(loser_node);
        let moved = order.len();
        let bfs_parent = self.bfs_parents(&order);
        let old_ids = std::mem::take(&mut self.trees[loser.0 as usize].nodes);
        debug_assert_eq!(old_ids.len(), moved);

        if self.tree(winner).kind == TreeKind::Root {
            for (i, &n) in order.iter().enumerate() {
                let provisional = bfs_parent[i].map_or(winner_node, |j| order[j]);
                self.detach(n);
                self.attach(n, winner, provisional);
                self.rewire(n, map);
            }
        } else {
            // reverse the parent chain from the contact node up to the old root
            let mut chain = vec![loser_node];
            while let Some(p) = self.nodes[chain.last().unwrap().0 as usize].parent {
                chain.push(p);
            }
            for w in chain.windows(2).rev() {
                self.nodes[w[1].0 as usize].parent = Some(w[0]);
            }
            self.nodes[loser_node.0 as usize].parent = Some(winner_node);
            for &n in &order {
                self.nodes[n.0 as usize].children.clear();
                self.nodes[n.0 as usize].tree = winner;
            }
            for &n in &order {
                let p = self.nodes[n.0 as usize].parent.expect("re-rooted");
                self.nodes[p.0 as usize].children.push(n);
            }
            self.trees[winner.0 as usize].nodes.extend(order.iter().copied());
            self.propagate_cost(loser_node);
        }

        let tree = &mut self.trees[loser.0 as usize];
        tree.root = None;
        tree.tip = None;
        self.deactivate(loser);
        Merge { winner, loser, moved }
    }

    /// Inserts copies of `positions` (a tree given as parent indices) into
    /// root tree `into`, entering at `contact` from `anchor`, which must be a
    /// node of `into` with a free segment to `positions[contact]`. Copies are
    /// added breadth-first from the contact and rewired one by one.
    pub fn graft_copies(
        &mut self,
        into: TreeId,
        anchor: NodeId,
        positions: &[(Point, Option<usize>)],
        contact: usize,
        map: &GridMap,
    ) -> Vec<NodeId> {
        let n = positions.len();
        let mut adjacency = vec![Vec::new(); n];
        for (i, &(_, parent)) in positions.iter().enumerate() {
            if let Some(p) = parent {
                adjacency[i].push(p);
                adjacency[p].push(i);
            }
        }
        let mut copies: Vec<Option<NodeId>> = vec![None; n];
        let mut queue = VecDeque::from([(contact, None::<usize>)]);
        let mut seen = vec![false; n];
        seen[contact] = true;
        let mut out = Vec::with_capacity(n);
        while let Some((i, from)) = queue.pop_front() {
            let provisional = from.map_or(anchor, |j| copies[j].expect("copied before children"));
            let id = self.push_node(into, positions[i].0, Some(provisional));
            self.rewire(id, map);
            copies[i] = Some(id);
            out.push(id);
            for &j in &adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back((j, Some(i)));
                }
            }
        }
        out
    }

    /// Breadth-first order over the undirected tree containing `start`.
    fn bfs_order(&self, start: NodeId) -> Vec<NodeId> {
        let mut order = vec![start];
        let mut seen = std::collections::HashSet::from([start]);
        let mut head = 0;
        while head < order.len() {
            let n = &self.nodes[order[head].0 as usize];
            head += 1;
            for m in n.parent.iter().chain(n.children.iter()) {
                if seen.insert(*m) {
                    order.push(*m);
                }
            }
        }
        order
    }

    /// For each entry of a BFS order, the index of its BFS predecessor.
    fn bfs_parents(&self, order: &[NodeId]) -> Vec<Option<usize>> {
        let pos: std::collections::HashMap<NodeId, usize> = order.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        order
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                if i == 0 {
                    return None;
                }
                let node = &self.nodes[n.0 as usize];
                node.parent
                    .iter()
                    .chain(node.children.iter())
                    .filter_map(|m| pos.get(m).copied())
                    .filter(|&j| j < i)
                    .min()
            })
            .collect()
    }

    fn detach(&mut self, n: NodeId) {
        if let Some(p) = self.nodes[n.0 as usize].parent.take() {
            self.nodes[p.0 as usize].children.retain(|&c| c != n);
        }
        self.nodes[n.0 as usize].children.clear();
    }

    fn attach(&mut self, n: NodeId, tree: TreeId, parent: NodeId) {
        let pcost = self.nodes[parent.0 as usize].cost;
        let ppos = self.nodes[parent.0 as usize].position;
        let node = &mut self.nodes[n.0 as usize];
        node.parent = Some(parent);
        node.cost = pcost + ppos.dist(node.position);
        node.tree = tree;
        self.nodes[parent.0 as usize].children.push(n);
        self.trees[tree.0 as usize].nodes.push(n);
    }

    fn set_parent(&mut self, n: NodeId, parent: NodeId) {
        if let Some(old) = self.nodes[n.0 as usize].parent {
            self.nodes[old.0 as usize].children.retain(|&c| c != n);
        }
        self.nodes[n.0 as usize].parent = Some(parent);
        self.nodes[parent.0 as usize].children.push(n);
        self.propagate_cost(n);
    }

    /// Recomputes the cost of `from` and all its descendants from their parents.
    fn propagate_cost(&mut self, from: NodeId) {
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            let (pos, parent) = {
                let node = &self.nodes[n.0 as usize];
                (node.position, node.parent)
            };
            let cost = parent.map_or(0.0, |p| {
                let pn = &self.nodes[p.0 as usize];
                pn.cost + pn.position.dist(pos)
            });
            self.nodes[n.0 as usize].cost = cost;
            stack.extend(self.nodes[n.0 as usize].children.iter().copied());
        }
    }

    fn is_ancestor(&self, maybe_ancestor: NodeId, of: NodeId) -> bool {
        let mut cur = self.nodes[of.0 as usize].parent;
        while let Some(c) = cur {
            if c == maybe_ancestor {
                return true;
            }
            cur = self.nodes[c.0 as usize].parent;
        }
        false
    }

    /// RRT*-style local optimisation around `node` within its own tree:
    /// picks the cheapest collision-free parent among neighbours within
    /// `rewire_radius`, then re-parents every neighbour that becomes strictly
    /// cheaper through `node`. Returns the number of re-parented neighbours.
    pub fn rewire(&mut self, node: NodeId, map: &GridMap) -> usize {
        let (pos, tree) = {
            let n = &self.nodes[node.0 as usize];
            (n.position, n.tree)
        };
        let mut neighbours: Vec<(NodeId, Point, f64)> = Vec::new();
        self.index.for_each_within(pos, self.config.rewire_radius, |m, p, d| {
            if m != node && self.nodes[m.0 as usize].tree == tree {
                neighbours.push((m, p, d));
            }
        });
        neighbours.sort_by_key(|a| a.0);
        let has_children = !self.nodes[node.0 as usize].children.is_empty();

        // choose parent
        if self.nodes[node.0 as usize].parent.is_some() {
            let current = self.nodes[node.0 as usize].cost;
            let mut options: Vec<(f64, NodeId, Point)> = neighbours
                .iter()
                .map(|&(m, p, d)| (self.nodes[m.0 as usize].cost + d, m, p))
                .filter(|&(c, _, _)| c < current)
                .collect();
            options.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for (_, m, p) in options {
                if Some(m) == self.nodes[node.0 as usize].parent {
                    break;
                }
                if has_children && self.is_ancestor(node, m) {
                    continue;
                }
                if map.segment_free(&Segment::new(p, pos)) {
                    self.set_parent(node, m);
                    break;
                }
            }
        }

        // rewire neighbours through node
        let mut rewired = 0;
        for (m, p, d) in neighbours {
            let via = self.nodes[node.0 as usize].cost + d;
            let mc = &self.nodes[m.0 as usize];
            // ancestors of node never pass the cost test: costs grow along chains
            if mc.parent.is_none() || via >= mc.cost - 1e-12 || mc.parent == Some(node) {
                continue;
            }
            if map.segment_free(&Segment::new(pos, p)) {
                self.set_parent(m, node);
                rewired += 1;
            }
        }
        rewired
    }

    /// Removes a tree from the forest and returns its nodes in breadth-first
    /// order from its root, as ids and as `(position, parent index)` pairs.
    pub fn retire_tree(&mut self, id: TreeId) -> (Vec<NodeId>, Vec<(Point, Option<usize>)>) {
        let order = match self.trees[id.0 as usize].root {
            Some(r) => self.bfs_order(r),
            None => Vec::new(),
        };
        let pos: std::collections::HashMap<NodeId, usize> = order.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let frozen = order
            .iter()
            .map(|&n| {
                let node = &self.nodes[n.0 as usize];
                (node.position, node.parent.map(|p| pos[&p]))
            })
            .collect();
        self.clear_tree(id);
        self.deactivate(id);
        (order, frozen)
    }

    /// Walks parent links from `node` to its tree root, returning positions
    /// root first.
    pub fn path_to_root(&self, node: NodeId) -> Vec<Point> {
        let mut out = vec![self.nodes[node.0 as usize].position];
        let mut cur = self.nodes[node.0 as usize].parent;
        while let Some(c) = cur {
            out.push(self.nodes[c.0 as usize].position);
            cur = self.nodes[c.0 as usize].parent;
        }
        out.reverse();
        out
    }

    /// Cost recomputed by summing edge lengths along the parent chain.
    pub fn chain_cost(&self, node: NodeId) -> f64 {
        self.path_to_root(node).windows(2).map(|w| w[0].dist(w[1])).sum()
    }

    /// Checks structural invariants of every active tree.
    pub fn audit(&self, map: &GridMap) -> Result<(), AuditError> {
        let mut indexed = 0;
        for tree in self.active_trees() {
            let id = tree.id;
            let root = tree
                .root
                .ok_or_else(|| AuditError::Tree(id, "active tree without root".into()))?;
            let w = tree.weight;
            let weight_ok = if tree.halted {
                w == 0.0
            } else {
                (self.config.min_weight..=1.0).contains(&w)
            };
            if !weight_ok {
                return Err(AuditError::Tree(id, format!("weight {w} out of range")));
            }
            let mut roots = 0;
            for &n in &tree.nodes {
                let node = &self.nodes[n.0 as usize];
                if !node.alive || node.tree != id {
                    return Err(AuditError::Node(n, "membership mismatch".into()));
                }
                match node.parent {
                    None => {
                        roots += 1;
                        if n != root || node.cost != 0.0 {
                            return Err(AuditError::Node(n, "stray root".into()));
                        }
                    }
                    Some(p) => {
                        let pn = &self.nodes[p.0 as usize];
                        if pn.tree != id || !pn.children.contains(&n) {
                            return Err(AuditError::Node(n, "parent link broken".into()));
                        }
                        if !map.segment_free(&Segment::new(pn.position, node.position)) {
                            return Err(AuditError::Node(n, "edge collides".into()));
                        }
                    }
                }
                // acyclic: reach the root within len steps
                let mut cur = n;
                let mut steps = 0;
                while let Some(p) = self.nodes[cur.0 as usize].parent {
                    cur = p;
                    steps += 1;
                    if steps > tree.len() {
                        return Err(AuditError::Node(n, "cycle".into()));
                    }
                }
                if cur != root {
                    return Err(AuditError::Node(n, "does not reach tree root".into()));
                }
                let chain = self.chain_cost(n);
                if (chain - node.cost).abs() > COST_TOLERANCE {
                    return Err(AuditError::Node(n, format!("cost {} vs chain {}", node.cost, chain)));
                }
            }
            if roots != 1 {
                return Err(AuditError::Tree(id, format!("{roots} roots")));
            }
            if let Some(tip) = tree.tip {
                if self.nodes[tip.0 as usize].position != tree.sampler.last_position {
                    return Err(AuditError::Tree(id, "tip does not match sampler".into()));
                }
            }
            indexed += tree.len();
        }
        if indexed != self.index.len() {
            return Err(AuditError::Index(format!(
                "{} indexed, {} live",
                self.index.len(),
                indexed
            )));
        }
        for (n, p) in self.index.entries() {
            let node = &self.nodes[n.0 as usize];
            if !node.alive || node.position != p {
                return Err(AuditError::Index(format!("stale entry {n:?}")));
            }
        }
        Ok(())
    }

    /// Line-oriented dump: one `tree` line per active tree followed by one
    /// `node` line per node (`tree kind node parent x y cost`).
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        for tree in self.active_trees() {
            let group = tree.group.map_or("-".to_string(), |g| g.0.to_string());
            let _ = writeln!(
                out,
                "tree {} {} {} {:.6}",
                tree.id.0,
                tree.kind.as_str(),
                group,
                tree.weight
            );
            for &n in &tree.nodes {
                let node = &self.nodes[n.0 as usize];
                let parent = node.parent.map_or("-".to_string(), |p| p.0.to_string());
                let _ = writeln!(
                    out,
                    "node {} {} {} {} {:.6} {:.6} {:.6}",
                    tree.id.0,
                    tree.kind.as_str(),
                    n.0,
                    parent,
                    node.position.x,
                    node.position.y,
                    node.cost
                );
            }
        }
        out
    }

    /// Node positions of each active tree, keyed by tree id with positions
    /// sorted; used to compare forest states.
    pub fn membership(&self) -> Vec<(TreeId, Vec<(u64, u64)>)> {
        self.active_trees()
            .map(|t| {
                let mut pts: Vec<(u64, u64)> = t
                    .nodes
                    .iter()
                    .map(|n| {
                        let p = self.nodes[n.0 as usize].position;
                        (p.x.to_bits(), p.y.to_bits())
                    })
                    .collect();
                pts.sort_unstable();
                (t.id, pts)
            })
            .collect()
    }
}
