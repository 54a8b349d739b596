//! RRT* comparator: one independent RRT* tree per robot, interleaved
//! round-robin so that all robots plan within one shared loop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::PlanError;
use crate::forest::{GroupId, NodeId, PlannerConfig, TreeId, TreeKind, COST_TOLERANCE};
use crate::multiplan::{validate_endpoints, Event, SampleStats, TraceEvent};
use crate::smoothing::{path_length, Path};
use crate::spatial::GridIndex;
use crate::workspace::{GridMap, Point, Segment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrtStarConfig {
    pub step: f64,
    pub rewire_radius: f64,
    /// Probability of sampling the goal instead of a uniform free point.
    pub goal_bias: f64,
    pub goal_tol: f64,
    /// Sample budget per robot.
    pub max_samples: usize,
    pub seed: u64,
}

impl RrtStarConfig {
    /// Shares step, rewire radius, budget and seed with a forest config;
    /// the goal tolerance is the forest's merge distance.
    pub fn from_planner(cfg: &PlannerConfig) -> Self {
        RrtStarConfig {
            step: cfg.step,
            rewire_radius: cfg.rewire_radius,
            goal_bias: 0.05,
            goal_tol: cfg.epsilon,
            max_samples: cfg.max_samples,
            seed: cfg.seed,
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        for (name, v) in [
            ("step", self.step),
            ("rewire_radius", self.rewire_radius),
            ("goal_tol", self.goal_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(PlanError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.goal_bias) {
            return Err(PlanError::InvalidConfig("goal_bias must be in [0, 1)".into()));
        }
        if self.max_samples == 0 {
            return Err(PlanError::InvalidConfig("max_samples must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RrtNode {
    pub position: Point,
    pub parent: Option<usize>,
    pub cost: f64,
    pub children: Vec<usize>,
}

/// Outcome of one sample iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RrtStep {
    Added(usize),
    Rejected(Point),
}

/// Single-query RRT* tree rooted at the start.
#[derive(Debug, Clone)]
pub struct RrtStar {
    pub start: Point,
    pub goal: Point,
    pub config: RrtStarConfig,
    pub nodes: Vec<RrtNode>,
    pub stats: SampleStats,
    index: GridIndex<usize>,
    /// Cheapest node that reaches the goal, with its total cost.
    best: Option<(usize, f64)>,
}

impl RrtStar {
    pub fn new(start: Point, goal: Point, config: RrtStarConfig, map: &GridMap) -> Self {
        let mut index = GridIndex::new(config.rewire_radius.max(config.step));
        index.insert(0, start);
        let mut tree = RrtStar {
            start,
            goal,
            config,
            nodes: vec![RrtNode {
                position: start,
                parent: None,
                cost: 0.0,
                children: Vec::new(),
            }],
            stats: SampleStats::default(),
            index,
            best: None,
        };
        tree.consider_goal(0, map);
        tree
    }

    pub fn found(&self) -> bool {
        self.best.is_some()
    }

    pub fn exhausted(&self) -> bool {
        self.stats.total() >= self.config.max_samples
    }

    pub fn best_cost(&self) -> Option<f64> {
        self.best.map(|(_, c)| c)
    }

    fn consider_goal(&mut self, node: usize, map: &GridMap) {
        let p = self.nodes[node].position;
        let d = p.dist(self.goal);
        if d > self.config.goal_tol || !map.segment_free(&Segment::new(p, self.goal)) {
            return;
        }
        let total = self.nodes[node].cost + d;
        if self.best.is_none_or(|(_, c)| total < c) {
            self.best = Some((node, total));
        }
    }

    /// Draws one sample, steers toward it from the nearest node and inserts
    /// the result with best-parent selection and neighbour rewiring.
    pub fn step<R: Rng + ?Sized>(&mut self, map: &GridMap, rng: &mut R) -> Result<RrtStep, PlanError> {
        let sample = if rng.gen::<f64>() < self.config.goal_bias {
            self.goal
        } else {
            map.sample_free(rng)?
        };
        let (near, near_pos, d) = self.index.nearest(sample).expect("tree has a root");
        let target = if d > self.config.step {
            near_pos + (sample - near_pos) * (self.config.step / d)
        } else {
            sample
        };
        if d == 0.0 || !map.segment_free(&Segment::new(near_pos, target)) {
            self.stats.invalid += 1;
            return Ok(RrtStep::Rejected(target));
        }
        self.stats.valid += 1;

        let neighbours = self.index.within(target, self.config.rewire_radius);
        let mut parent = near;
        let mut cost = self.nodes[near].cost + near_pos.dist(target);
        for &(m, p, dm) in &neighbours {
            let c = self.nodes[m].cost + dm;
            if c < cost && m != near && map.segment_free(&Segment::new(p, target)) {
                parent = m;
                cost = c;
            }
        }
        let id = self.nodes.len();
        self.nodes.push(RrtNode {
            position: target,
            parent: Some(parent),
            cost,
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        self.index.insert(id, target);

        for (m, p, dm) in neighbours {
            if m == parent || self.nodes[m].parent.is_none() {
                continue;
            }
            let via = cost + dm;
            if via < self.nodes[m].cost - 1e-12 && map.segment_free(&Segment::new(target, p)) {
                self.reparent(m, id, via);
            }
        }
        self.consider_goal(id, map);
        Ok(RrtStep::Added(id))
    }

    fn reparent(&mut self, node: usize, parent: usize, cost: f64) {
        if let Some(old) = self.nodes[node].parent {
            self.nodes[old].children.retain(|&c| c != node);
        }
        self.nodes[node].parent = Some(parent);
        self.nodes[parent].children.push(node);
        let delta = self.nodes[node].cost - cost;
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            self.nodes[n].cost -= delta;
            stack.extend_from_slice(&self.nodes[n].children);
        }
        // goal reachability may have changed cost
        if let Some((b, _)) = self.best {
            let total = self.nodes[b].cost + self.nodes[b].position.dist(self.goal);
            self.best = Some((b, total));
        }
    }

    /// Best start-to-goal path found so far.
    pub fn best_path(&self) -> Option<Path> {
        let (node, _) = self.best?;
        let mut pts = vec![self.goal];
        let mut cur = Some(node);
        while let Some(n) = cur {
            pts.push(self.nodes[n].position);
            cur = self.nodes[n].parent;
        }
        pts.reverse();
        Path::new(pts).ok()
    }

    /// Checks parent/child links, acyclicity, edge collisions, and that every
    /// stored cost equals its parent-chain length.
    pub fn audit(&self, map: &GridMap) -> Result<(), String> {
        if self.index.len() != self.nodes.len() {
            return Err(format!(
                "index holds {} of {} nodes",
                self.index.len(),
                self.nodes.len()
            ));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match n.parent {
                None if i != 0 => return Err(format!("node {i} has no parent")),
                None => {}
                Some(p) => {
                    if !self.nodes[p].children.contains(&i) {
                        return Err(format!("node {i} missing from children of {p}"));
                    }
                    if !map.segment_free(&Segment::new(self.nodes[p].position, n.position)) {
                        return Err(format!("edge {p}->{i} collides"));
                    }
                }
            }
            let mut chain = vec![n.position];
            let mut cur = n.parent;
            let mut hops = 0;
            while let Some(p) = cur {
                hops += 1;
                if hops > self.nodes.len() {
                    return Err(format!("cycle through node {i}"));
                }
                chain.push(self.nodes[p].position);
                cur = self.nodes[p].parent;
            }
            let len = path_length(&chain);
            if (len - n.cost).abs() > COST_TOLERANCE {
                return Err(format!("node {i} cost {} but chain length {len}", n.cost));
            }
        }
        Ok(())
    }
}

/// Runs RRT* until the first path is found or the budget is spent.
pub fn rrt_star_plan<R: Rng + ?Sized>(
    map: &GridMap,
    start: Point,
    goal: Point,
    cfg: &RrtStarConfig,
    rng: &mut R,
) -> Result<(Option<Path>, SampleStats), PlanError> {
    let mut tree = RrtStar::new(start, goal, cfg.clone(), map);
    while !tree.found() && !tree.exhausted() {
        tree.step(map, rng)?;
    }
    Ok((tree.best_path(), tree.stats))
}

/// Round-robin multi-robot RRT*: every round gives each unfinished robot one
/// sample; a robot stops sampling once it has a path.
#[derive(Debug, Clone)]
pub struct MaRrtStar {
    pub trees: Vec<RrtStar>,
    pub stats: SampleStats,
    pub rounds: usize,
    record: bool,
    trace: Vec<TraceEvent>,
}

impl MaRrtStar {
    pub fn new(map: &GridMap, starts: &[Point], goals: &[Point], cfg: &RrtStarConfig) -> Result<Self, PlanError> {
        validate_endpoints(map, starts, goals)?;
        cfg.validate()?;
        let trees: Vec<RrtStar> = starts
            .iter()
            .zip(goals)
            .map(|(&s, &g)| RrtStar::new(s, g, cfg.clone(), map))
            .collect();
        let trace = trees
            .iter()
            .enumerate()
            .map(|(i, t)| TraceEvent {
                iteration: 0,
                event: Event::Init {
                    tree: TreeId(i as u32),
                    kind: TreeKind::Root,
                    at: t.start,
                },
            })
            .collect();
        Ok(MaRrtStar {
            trees,
            stats: SampleStats::default(),
            rounds: 0,
            record: false,
            trace,
        })
    }

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
                iteration: self.stats.total(),
                event,
            });
        }
    }

    pub fn is_done(&self) -> bool {
        self.trees.iter().all(|t| t.found() || t.exhausted())
    }

    /// One round of interleaved sampling. Returns the robots that found their
    /// first path in this round.
    pub fn plan_round<R: Rng + ?Sized>(&mut self, map: &GridMap, rng: &mut R) -> Result<Vec<usize>, PlanError> {
        let mut completed = Vec::new();
        for i in 0..self.trees.len() {
            if self.trees[i].found() || self.trees[i].exhausted() {
                continue;
            }
            let tree = TreeId(i as u32);
            self.log(Event::Pick { tree });
            let outcome = self.trees[i].step(map, rng)?;
            match outcome {
                RrtStep::Added(n) => {
                    self.stats.valid += 1;
                    let at = self.trees[i].nodes[n].position;
                    self.log(Event::Extend {
                        tree,
                        node: NodeId(n as u32),
                        at,
                    });
                }
                RrtStep::Rejected(at) => {
                    self.stats.invalid += 1;
                    self.log(Event::Collide { tree, at });
                }
            }
            if let Some(path) = self.trees[i].best_path() {
                let length = path.length();
                self.log(Event::Connect {
                    group: GroupId(i as u32),
                    raw_length: length,
                    length,
                });
                completed.push(i);
            }
        }
        self.rounds += 1;
        Ok(completed)
    }

    pub fn plan<R: Rng + ?Sized>(&mut self, map: &GridMap, rng: &mut R) -> Result<(), PlanError> {
        while !self.is_done() {
            self.plan_round(map, rng)?;
        }
        let missing: Vec<usize> = (0..self.trees.len()).filter(|&i| !self.trees[i].found()).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(PlanError::PlanningFailed(missing))
        }
    }

    pub fn per_group(&self) -> Vec<SampleStats> {
        self.trees.iter().map(|t| t.stats).collect()
    }

    pub fn paths(&self) -> Vec<Option<Path>> {
        self.trees.iter().map(RrtStar::best_path).collect()
    }

    /// Same line format as the forest snapshot; tree `i` belongs to group `i`.
    pub fn snapshot(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        for (i, tree) in self.trees.iter().enumerate() {
            let weight = if tree.found() { 0.0 } else { 1.0 };
            let _ = writeln!(out, "tree {i} root {i} {weight:.6}");
            for (n, node) in tree.nodes.iter().enumerate() {
                let parent = node.parent.map_or("-".to_string(), |p| p.to_string());
                let _ = writeln!(
                    out,
                    "node {i} root {n} {parent} {:.6} {:.6} {:.6}",
                    node.position.x, node.position.y, node.cost
                );
            }
        }
        out
    }
}

/// Plans every robot and returns the paths in robot order.
pub fn ma_rrt_star_plan<R: Rng + ?Sized>(
    map: &GridMap,
    starts: &[Point],
    goals: &[Point],
    cfg: &RrtStarConfig,
    rng: &mut R,
) -> Result<(Vec<Path>, SampleStats), PlanError> {
    let mut planner = MaRrtStar::new(map, starts, goals, cfg)?;
    planner.plan(map, rng)?;
    let paths = planner.paths().into_iter().map(|p| p.expect("planned")).collect();
    Ok((paths, planner.stats))
}
