//! Multi-robot orchestration over a shared forest.
//!
//! Every robot is a group with a root tree at its start and one at its goal.
//! Disjointed trees explore the free space for everyone: the first time one
//! touches a root tree its nodes are copied into that root tree and the
//! disjointed tree is frozen into an [`InactiveTreeArchive`]. A fresh
//! disjointed tree replaces it. Later, any root tree that comes within
//! `epsilon` of the archive receives its own copy, at most once per group.
//!
//! A group is complete once its two root trees come within `epsilon` of each
//! other along a free segment. Its path is extracted, shortened by
//! line-of-sight, and both of its trees are halted so the remaining sampling
//! effort goes to unfinished groups.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;

use crate::error::PlanError;
use crate::forest::{ExtensionResult, Forest, GroupId, NodeId, PlannerConfig, RestartStep, RootSpec, TreeId, TreeKind};
use crate::smoothing::{smooth, Path};
use crate::spatial::GridIndex;
use crate::workspace::{GridMap, Point, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArchiveId(pub u32);

/// Frozen node set of a disjointed tree after its first absorption.
#[derive(Debug, Clone)]
pub struct InactiveTreeArchive {
    pub id: ArchiveId,
    pub source: TreeId,
    /// `(position, parent index)` in breadth-first order from the old root.
    pub nodes: Vec<(Point, Option<usize>)>,
}

#[derive(Debug, Clone)]
pub struct Group {
    pub id: GroupId,
    pub start: Point,
    pub goal: Point,
    pub start_tree: TreeId,
    pub goal_tree: TreeId,
    /// Smoothed path, set once the group is complete.
    pub path: Option<Path>,
    /// The path as extracted from the trees, before smoothing.
    pub raw_path: Option<Path>,
    /// Archives already copied into one of this group's root trees.
    pub shared_trees: BTreeSet<ArchiveId>,
}

impl Group {
    pub fn is_complete(&self) -> bool {
        self.path.is_some()
    }

    pub fn owns(&self, tree: TreeId) -> bool {
        tree == self.start_tree || tree == self.goal_tree
    }
}

/// Attempted extensions, split by outcome.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SampleStats {
    pub valid: usize,
    pub invalid: usize,
}

impl SampleStats {
    pub fn total(&self) -> usize {
        self.valid + self.invalid
    }
}

/// One entry of the per-iteration event trace.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Init {
        tree: TreeId,
        kind: TreeKind,
        at: Point,
    },
    Restart {
        tree: TreeId,
        at: Point,
    },
    Attach {
        tree: TreeId,
        node: NodeId,
        at: Point,
    },
    Pick {
        tree: TreeId,
    },
    Extend {
        tree: TreeId,
        node: NodeId,
        at: Point,
    },
    Collide {
        tree: TreeId,
        at: Point,
    },
    Merge {
        winner: TreeId,
        loser: TreeId,
        moved: usize,
    },
    Absorb {
        root: TreeId,
        tree: TreeId,
        archive: ArchiveId,
        copied: usize,
    },
    Spawn {
        tree: TreeId,
        at: Point,
    },
    Share {
        root: TreeId,
        archive: ArchiveId,
        copied: usize,
    },
    Connect {
        group: GroupId,
        raw_length: f64,
        length: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub iteration: usize,
    pub event: Event,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ", self.iteration)?;
        match &self.event {
            Event::Init { tree, kind, at } => write!(f, "init {} {} {} {}", tree.0, kind.as_str(), at.x, at.y),
            Event::Restart { tree, at } => write!(f, "restart {} {} {}", tree.0, at.x, at.y),
            Event::Attach { tree, node, at } => write!(f, "attach {} {} {} {}", tree.0, node.0, at.x, at.y),
            Event::Pick { tree } => write!(f, "pick {}", tree.0),
            Event::Extend { tree, node, at } => write!(f, "extend {} {} {} {}", tree.0, node.0, at.x, at.y),
            Event::Collide { tree, at } => write!(f, "collide {} {} {}", tree.0, at.x, at.y),
            Event::Merge { winner, loser, moved } => write!(f, "merge {} {} {}", winner.0, loser.0, moved),
            Event::Absorb {
                root,
                tree,
                archive,
                copied,
            } => {
                write!(f, "absorb {} {} {} {}", root.0, tree.0, archive.0, copied)
            }
            Event::Spawn { tree, at } => write!(f, "spawn {} {} {}", tree.0, at.x, at.y),
            Event::Share { root, archive, copied } => write!(f, "share {} {} {}", root.0, archive.0, copied),
            Event::Connect {
                group,
                raw_length,
                length,
            } => {
                write!(f, "connect {} {} {}", group.0, raw_length, length)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub completed: Vec<GroupId>,
}

#[derive(Debug, Clone)]
pub struct MultiPlanner {
    pub forest: Forest,
    pub groups: Vec<Group>,
    pub archives: Vec<InactiveTreeArchive>,
    pub iteration: usize,
    pub done: bool,
    pub stats: SampleStats,
    archive_index: GridIndex<(ArchiveId, u32)>,
    // groups whose trees must be fully scanned for a connection next step
    unchecked: BTreeSet<GroupId>,
    record: bool,
    trace: Vec<TraceEvent>,
}

impl MultiPlanner {
    /// Creates `2n` root trees (start then goal for each robot) and `k`
    /// disjointed trees.
    pub fn new<R: Rng + ?Sized>(
        map: &GridMap,
        starts: &[Point],
        goals: &[Point],
        config: PlannerConfig,
        rng: &mut R,
    ) -> Result<Self, PlanError> {
        validate_endpoints(map, starts, goals)?;
        let mut roots = Vec::with_capacity(2 * starts.len());
        for (i, (&s, &g)) in starts.iter().zip(goals).enumerate() {
            let group = Some(GroupId(i as u32));
            roots.push(RootSpec {
                point: s,
                group,
                is_goal: false,
            });
            roots.push(RootSpec {
                point: g,
                group,
                is_goal: true,
            });
        }
        let epsilon = config.epsilon;
        let forest = Forest::new(map, &roots, config, rng)?;
        let groups: Vec<Group> = starts
            .iter()
            .zip(goals)
            .enumerate()
            .map(|(i, (&start, &goal))| Group {
                id: GroupId(i as u32),
                start,
                goal,
                start_tree: TreeId(2 * i as u32),
                goal_tree: TreeId(2 * i as u32 + 1),
                path: None,
                raw_path: None,
                shared_trees: BTreeSet::new(),
            })
            .collect();
        let unchecked = groups.iter().map(|g| g.id).collect();
        let mut planner = MultiPlanner {
            forest,
            groups,
            archives: Vec::new(),
            iteration: 0,
            done: false,
            stats: SampleStats::default(),
            archive_index: GridIndex::new(epsilon),
            unchecked,
            record: false,
            trace: Vec::new(),
        };
        let inits: Vec<Event> = planner
            .forest
            .active_trees()
            .map(|t| Event::Init {
                tree: t.id,
                kind: t.kind,
                at: planner.forest.node(t.root.expect("fresh tree")).position,
            })
            .collect();
        planner.trace = inits
            .into_iter()
            .map(|event| TraceEvent { iteration: 0, event })
            .collect();
        Ok(planner)
    }

    /// Keeps the event trace from now on (the initial tree layout is always kept).
    pub fn with_trace(mut self) -> Self {
        self.record = true;
        self
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn trace_text(&self) -> String {
        self.trace.iter().map(|e| format!("{e}\n")).collect()
    }

    fn log(&mut self, event: Event) {
        if self.record {
            self.trace.push(TraceEvent {
                iteration: self.iteration,
                event,
            });
        }
    }

    pub fn group(&self, id: GroupId) -> &Group {
        &self.groups[id.0 as usize]
    }

    fn group_of(&self, tree: TreeId) -> Option<GroupId> {
        self.forest.tree(tree).group
    }

    pub fn completed(&self) -> impl Iterator<Item = &Group> + '_ {
        self.groups.iter().filter(|g| g.is_complete())
    }

    pub fn archive(&self, id: ArchiveId) -> &InactiveTreeArchive {
        &self.archives[id.0 as usize]
    }

    /// Runs one iteration: restart, pick, extend, merge and share, connection
    /// detection, and weight update.
    pub fn plan_step<R: Rng + ?Sized>(&mut self, map: &GridMap, rng: &mut R) -> Result<StepReport, PlanError> {
        let mut report = StepReport::default();
        if self.done {
            return Ok(report);
        }
        let mut fresh: Vec<NodeId> = Vec::new();

        let restarts = self.forest.restart_low_probability(map, rng)?;
        for step in restarts.steps {
            match step {
                RestartStep::Attached(tree, node) => {
                    let at = self.forest.node(node).position;
                    self.log(Event::Attach { tree, node, at });
                    fresh.push(node);
                }
                RestartStep::Restarted(tree, at) => self.log(Event::Restart { tree, at }),
            }
        }
        let t = match self.forest.pick_tree(rng) {
            Ok(t) => t,
            Err(PlanError::AllTreesHalted) => {
                self.done = self.groups.iter().all(Group::is_complete);
                return Err(PlanError::AllTreesHalted);
            }
            Err(e) => return Err(e),
        };
        self.log(Event::Pick { tree: t });

        let success = match self.forest.extend(t, map, rng) {
            ExtensionResult::Added(node) => {
                self.stats.valid += 1;
                let at = self.forest.node(node).position;
                self.log(Event::Extend { tree: t, node, at });
                fresh.push(node);
                self.merge_and_share(t, node, map, rng, &mut fresh)?;
                true
            }
            ExtensionResult::Collision(at) => {
                self.stats.invalid += 1;
                self.log(Event::Collide { tree: t, at });
                false
            }
        };

        self.detect_connections(map, &fresh, &mut report)?;

        if self.forest.tree(t).active {
            self.forest.update_weight(t, success);
        }
        self.iteration += 1;
        self.done = self.groups.iter().all(Group::is_complete);
        Ok(report)
    }

    /// Plans until every group has a path or `max_samples` attempts are spent.
    pub fn plan<R: Rng + ?Sized>(&mut self, map: &GridMap, rng: &mut R) -> Result<(), PlanError> {
        let budget = self.forest.config.max_samples;
        while !self.done && self.stats.total() < budget {
            match self.plan_step(map, rng) {
                Ok(_) => {}
                Err(PlanError::AllTreesHalted) => break,
                Err(e) => return Err(e),
            }
        }
        if self.done {
            Ok(())
        } else {
            let missing = self
                .groups
                .iter()
                .filter(|g| !g.is_complete())
                .map(|g| g.id.0 as usize)
                .collect();
            Err(PlanError::PlanningFailed(missing))
        }
    }

    fn merge_and_share<R: Rng + ?Sized>(
        &mut self,
        t: TreeId,
        node: NodeId,
        map: &GridMap,
        rng: &mut R,
        fresh: &mut Vec<NodeId>,
    ) -> Result<(), PlanError> {
        let contacts = self.forest.contacts(node, map, |_| true);
        match self.forest.tree(t).kind {
            TreeKind::Root => {
                for c in contacts {
                    if self.forest.tree(c.tree).kind == TreeKind::Disjointed && self.forest.tree(c.tree).active {
                        self.absorb_at(t, node, c.tree, c.node, map, rng, fresh)?;
                    }
                }
                let position = self.forest.node(node).position;
                for (archive, index) in self.archive_contacts(t, position, map) {
                    self.share_at(t, node, archive, index, map, fresh);
                }
            }
            TreeKind::Disjointed => {
                let mut roots: Vec<_> = contacts
                    .iter()
                    .filter(|c| self.forest.tree(c.tree).kind == TreeKind::Root)
                    .copied()
                    .collect();
                if roots.is_empty() {
                    let report = self
                        .forest
                        .merge_nearby_filtered(node, map, |tree| tree.kind == TreeKind::Disjointed);
                    for m in report.merges {
                        self.log(Event::Merge {
                            winner: m.winner,
                            loser: m.loser,
                            moved: m.moved,
                        });
                        self.spawn_disjointed(map, rng)?;
                    }
                } else {
                    roots.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.tree.cmp(&b.tree)));
                    let first = roots[0];
                    let archive = self.absorb_at(first.tree, first.node, t, node, map, rng, fresh)?;
                    let contact_index = self.archive_index_of(archive, self.forest.node(node).position);
                    for c in &roots[1..] {
                        self.share_at(c.tree, c.node, archive, contact_index, map, fresh);
                    }
                }
            }
        }
        Ok(())
    }

    fn archive_index_of(&self, archive: ArchiveId, at: Point) -> usize {
        self.archives[archive.0 as usize]
            .nodes
            .iter()
            .position(|&(p, _)| p == at)
            .expect("contact node is archived")
    }

    fn spawn_disjointed<R: Rng + ?Sized>(&mut self, map: &GridMap, rng: &mut R) -> Result<TreeId, PlanError> {
        let at = map.sample_free(rng)?;
        let tree = self.forest.spawn_tree(TreeKind::Disjointed, at, None, rng);
        self.log(Event::Spawn { tree, at });
        Ok(tree)
    }

    /// Copies disjointed tree `disjointed` into `root`, entering through the
    /// contact pair `root_node`-`disjointed_node`, archives it and spawns a
    /// replacement.
    #[allow(clippy::too_many_arguments)]
    fn absorb_at<R: Rng + ?Sized>(
        &mut self,
        root: TreeId,
        root_node: NodeId,
        disjointed: TreeId,
        disjointed_node: NodeId,
        map: &GridMap,
        rng: &mut R,
        fresh: &mut Vec<NodeId>,
    ) -> Result<ArchiveId, PlanError> {
        let (ids, nodes) = self.forest.retire_tree(disjointed);
        let contact = ids
            .iter()
            .position(|&n| n == disjointed_node)
            .expect("contact node belongs to the absorbed tree");
        let copies = self.forest.graft_copies(root, root_node, &nodes, contact, map);
        let id = ArchiveId(self.archives.len() as u32);
        for (i, &(p, _)) in nodes.iter().enumerate() {
            self.archive_index.insert((id, i as u32), p);
        }
        self.archives.push(InactiveTreeArchive {
            id,
            source: disjointed,
            nodes,
        });
        if let Some(g) = self.group_of(root) {
            self.groups[g.0 as usize].shared_trees.insert(id);
        }
        self.log(Event::Absorb {
            root,
            tree: disjointed,
            archive: id,
            copied: copies.len(),
        });
        fresh.extend(copies);
        self.spawn_disjointed(map, rng)?;
        Ok(id)
    }

    /// Public form of the absorption step: finds the closest contact pair
    /// between the two trees itself. Returns `None` when the trees are not
    /// within `epsilon` along a free segment.
    pub fn absorb_disjointed_into_root<R: Rng + ?Sized>(
        &mut self,
        root: TreeId,
        disjointed: TreeId,
        map: &GridMap,
        rng: &mut R,
    ) -> Result<Option<ArchiveId>, PlanError> {
        let Some((root_node, disjointed_node)) = self.closest_pair(root, disjointed, map) else {
            return Ok(None);
        };
        let mut fresh = Vec::new();
        let id = self.absorb_at(root, root_node, disjointed, disjointed_node, map, rng, &mut fresh)?;
        Ok(Some(id))
    }

    fn closest_pair(&self, a: TreeId, b: TreeId, map: &GridMap) -> Option<(NodeId, NodeId)> {
        let eps = self.forest.config.epsilon;
        let mut best: Option<(f64, NodeId, NodeId)> = None;
        for &n in &self.forest.tree(a).nodes {
            let p = self.forest.node(n).position;
            self.forest.index().for_each_within(p, eps, |m, q, d| {
                if self.forest.node(m).tree == b
                    && best.is_none_or(|(bd, bn, bm)| (d, n, m) < (bd, bn, bm))
                    && map.segment_free(&Segment::new(p, q))
                {
                    best = Some((d, n, m));
                }
            });
        }
        best.map(|(_, n, m)| (n, m))
    }

    /// Archives with a node within `epsilon` of `position` along a free
    /// segment that the tree's group has not consumed yet, with the index of
    /// the closest such node.
    fn archive_contacts(&self, root: TreeId, position: Point, map: &GridMap) -> Vec<(ArchiveId, usize)> {
        let Some(g) = self.group_of(root) else {
            return Vec::new();
        };
        let ledger = &self.groups[g.0 as usize].shared_trees;
        let mut hits: Vec<(ArchiveId, f64, u32, Point)> = Vec::new();
        self.archive_index
            .for_each_within(position, self.forest.config.epsilon, |(a, i), q, d| {
                if !ledger.contains(&a) {
                    hits.push((a, d, i, q));
                }
            });
        hits.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut out: Vec<(ArchiveId, usize)> = Vec::new();
        for (a, _, i, q) in hits {
            if out.last().is_some_and(|&(b, _)| b == a) {
                continue;
            }
            if map.segment_free(&Segment::new(position, q)) {
                out.push((a, i as usize));
            }
        }
        out
    }

    fn share_at(
        &mut self,
        root: TreeId,
        anchor: NodeId,
        archive: ArchiveId,
        contact: usize,
        map: &GridMap,
        fresh: &mut Vec<NodeId>,
    ) -> bool {
        let Some(g) = self.group_of(root) else {
            return false;
        };
        let group = &self.groups[g.0 as usize];
        if group.is_complete() || group.shared_trees.contains(&archive) || !self.forest.tree(root).mergeable() {
            return false;
        }
        let nodes = self.archives[archive.0 as usize].nodes.clone();
        let copies = self.forest.graft_copies(root, anchor, &nodes, contact, map);
        self.groups[g.0 as usize].shared_trees.insert(archive);
        self.log(Event::Share {
            root,
            archive,
            copied: copies.len(),
        });
        fresh.extend(copies);
        true
    }

    /// Copies an archive into a root tree if the tree touches it and its
    /// group neither consumed it already nor finished. Returns whether a copy
    /// happened.
    pub fn share_archive(&mut self, root: TreeId, archive: ArchiveId, map: &GridMap) -> bool {
        let eps = self.forest.config.epsilon;
        let mut best: Option<(f64, NodeId, usize)> = None;
        for (i, &(p, _)) in self.archives[archive.0 as usize].nodes.iter().enumerate() {
            self.forest.index().for_each_within(p, eps, |m, q, d| {
                if self.forest.node(m).tree == root
                    && best.is_none_or(|(bd, _, _)| d < bd)
                    && map.segment_free(&Segment::new(p, q))
                {
                    best = Some((d, m, i));
                }
            });
        }
        let Some((_, anchor, contact)) = best else {
            return false;
        };
        let mut fresh = Vec::new();
        let copied = self.share_at(root, anchor, archive, contact, map, &mut fresh);
        if copied {
            if let Some(g) = self.group_of(root) {
                self.unchecked.insert(g);
            }
        }
        copied
    }

    fn detect_connections(
        &mut self,
        map: &GridMap,
        fresh: &[NodeId],
        report: &mut StepReport,
    ) -> Result<(), PlanError> {
        let eps = self.forest.config.epsilon;
        let mut candidates = std::mem::take(&mut self.unchecked);
        for &n in fresh {
            let node = self.forest.node(n);
            if !node.alive {
                continue;
            }
            let Some(g) = self.group_of(node.tree) else {
                continue;
            };
            let group = &self.groups[g.0 as usize];
            if group.is_complete() || candidates.contains(&g) {
                continue;
            }
            let other = if node.tree == group.start_tree {
                group.goal_tree
            } else {
                group.start_tree
            };
            let p = node.position;
            let mut hit = false;
            self.forest.index().for_each_within(p, eps, |m, q, _| {
                if !hit && self.forest.node(m).tree == other && map.segment_free(&Segment::new(p, q)) {
                    hit = true;
                }
            });
            if hit {
                candidates.insert(g);
            }
        }
        for g in candidates {
            if self.groups[g.0 as usize].is_complete() {
                continue;
            }
            if let Some(raw) = self.check_connection(g, map) {
                let smoothed = smooth(&raw, map)?;
                self.log(Event::Connect {
                    group: g,
                    raw_length: raw.length(),
                    length: smoothed.length(),
                });
                let group = &mut self.groups[g.0 as usize];
                group.raw_path = Some(raw);
                group.path = Some(smoothed);
                self.apply_heuristic(g);
                report.completed.push(g);
            }
        }
        Ok(())
    }

    /// Finds the cheapest pair of nodes, one per root tree of the group,
    /// within `epsilon` along a free segment, and returns the raw path
    /// through it. Ties go to the lower node ids.
    pub fn check_connection(&self, g: GroupId, map: &GridMap) -> Option<Path> {
        let group = &self.groups[g.0 as usize];
        let (a_tree, b_tree) = (group.start_tree, group.goal_tree);
        let eps = self.forest.config.epsilon;
        let mut best: Option<(f64, NodeId, NodeId)> = None;
        for &a in &self.forest.tree(a_tree).nodes {
            let na = self.forest.node(a);
            let p = na.position;
            self.forest.index().for_each_within(p, eps, |b, q, d| {
                let nb = self.forest.node(b);
                if nb.tree != b_tree {
                    return;
                }
                let total = na.cost + d + nb.cost;
                if best.is_none_or(|(bt, ba, bb)| (total, a, b) < (bt, ba, bb)) && map.segment_free(&Segment::new(p, q))
                {
                    best = Some((total, a, b));
                }
            });
        }
        let (_, a, b) = best?;
        let mut waypoints = self.forest.path_to_root(a);
        let mut back = self.forest.path_to_root(b);
        back.reverse();
        waypoints.extend(back);
        Path::new(waypoints).ok()
    }

    /// Halts both root trees of a completed group.
    pub fn apply_heuristic(&mut self, g: GroupId) {
        let group = &self.groups[g.0 as usize];
        let (s, t) = (group.start_tree, group.goal_tree);
        self.forest.halt(s);
        self.forest.halt(t);
    }

    /// Active tree census: `(root trees, disjointed trees)`.
    pub fn census(&self) -> (usize, usize) {
        let roots = self.forest.active_trees().filter(|t| t.kind == TreeKind::Root).count();
        let disjointed = self
            .forest
            .active_trees()
            .filter(|t| t.kind == TreeKind::Disjointed)
            .count();
        (roots, disjointed)
    }

    /// Smoothed paths in group order; `None` for unfinished groups.
    pub fn paths(&self) -> Vec<Option<Path>> {
        self.groups.iter().map(|g| g.path.clone()).collect()
    }
}

/// Checks counts, free space and distinctness of robot endpoints.
pub fn validate_endpoints(map: &GridMap, starts: &[Point], goals: &[Point]) -> Result<(), PlanError> {
    if starts.len() != goals.len() {
        return Err(PlanError::EndpointCountMismatch {
            starts: starts.len(),
            goals: goals.len(),
        });
    }
    if starts.is_empty() {
        return Err(PlanError::NoRobots);
    }
    for (&s, &g) in starts.iter().zip(goals) {
        if !map.is_free(s) {
            return Err(PlanError::InvalidStart(s));
        }
        if !map.is_free(g) {
            return Err(PlanError::InvalidGoal(g));
        }
    }
    let all: Vec<Point> = starts.iter().chain(goals).copied().collect();
    for (i, p) in all.iter().enumerate() {
        if all[..i].contains(p) {
            return Err(PlanError::DuplicateEndpoint(*p));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(map: &GridMap, k: usize) -> PlannerConfig {
        PlannerConfig {
            k,
            ..PlannerConfig::for_map(map)
        }
    }

    #[test]
    fn init_census() {
        let map = GridMap::blank(20, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = MultiPlanner::new(
            &map,
            &[Point::new(2.0, 2.0)],
            &[Point::new(17.0, 17.0)],
            config(&map, 0),
            &mut rng,
        )
        .unwrap();
        assert_eq!(p.census(), (2, 0));
        assert_eq!(p.forest.total_nodes(), 2);

        let starts = [Point::new(2.0, 2.0), Point::new(2.0, 5.0), Point::new(2.0, 8.0)];
        let goals = [Point::new(17.0, 2.0), Point::new(17.0, 5.0), Point::new(17.0, 8.0)];
        let p = MultiPlanner::new(&map, &starts, &goals, config(&map, 15), &mut rng).unwrap();
        assert_eq!(p.forest.active_trees().count(), 21);
        assert!(p.groups.iter().all(|g| !g.is_complete()));
    }

    #[test]
    fn endpoint_validation() {
        let map = GridMap::parse("....\n.#..\n....").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = MultiPlanner::new(
            &map,
            &[Point::new(0.5, 0.5)],
            &[Point::new(1.5, 1.5)],
            config(&map, 0),
            &mut rng,
        )
        .unwrap_err();
        assert_eq!(err, PlanError::InvalidGoal(Point::new(1.5, 1.5)));
        let err = MultiPlanner::new(
            &map,
            &[Point::new(0.5, 0.5), Point::new(3.5, 0.5)],
            &[Point::new(3.5, 2.5), Point::new(0.5, 0.5)],
            config(&map, 0),
            &mut rng,
        )
        .unwrap_err();
        assert_eq!(err, PlanError::DuplicateEndpoint(Point::new(0.5, 0.5)));
        let err = MultiPlanner::new(&map, &[], &[], config(&map, 0), &mut rng).unwrap_err();
        assert_eq!(err, PlanError::NoRobots);
    }

    #[test]
    fn adjacent_endpoints_connect_immediately() {
        let map = GridMap::blank(20, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = Point::new(5.0, 5.0);
        let g = Point::new(5.5, 5.0);
        let mut p = MultiPlanner::new(&map, &[s], &[g], config(&map, 0), &mut rng).unwrap();
        assert_eq!(p.check_connection(GroupId(0), &map).unwrap().waypoints, vec![s, g]);
        let report = p.plan_step(&map, &mut rng).unwrap();
        assert_eq!(report.completed, vec![GroupId(0)]);
        assert!(p.done);
        assert_eq!(p.forest.tree(TreeId(0)).weight, 0.0);
        assert_eq!(p.forest.tree(TreeId(1)).weight, 0.0);
    }

    #[test]
    fn single_robot_blank_map() {
        let map = GridMap::blank(20, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut cfg = config(&map, 5);
        cfg.max_samples = 5_000;
        let (s, g) = (Point::new(2.0, 2.0), Point::new(17.0, 17.0));
        let mut p = MultiPlanner::new(&map, &[s], &[g], cfg, &mut rng).unwrap();
        p.plan(&map, &mut rng).unwrap();
        let path = p.groups[0].path.as_ref().unwrap();
        assert_eq!(path.start(), s);
        assert_eq!(path.goal(), g);
        assert!(path.length() >= s.dist(g) - 1e-12);
        assert!(p.stats.total() <= 5_000);
        p.forest.audit(&map).unwrap();
    }
}
