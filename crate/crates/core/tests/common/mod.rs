#![allow(dead_code)]

use std::path::PathBuf;

use marrdt::forest::GroupId;
use marrdt::harness::{load_scenario_file, Scenario};
use marrdt::multiplan::MultiPlanner;
use marrdt::{load_map, GridMap, Point, Segment};

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn map(name: &str) -> GridMap {
    let path = repo_root().join("maps").join(format!("{name}.txt"));
    load_map(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

pub fn scenario(name: &str) -> Scenario {
    load_scenario_file(&repo_root().join("scenarios").join(format!("{name}.json"))).unwrap()
}

pub const MAPS: [&str; 4] = ["blank", "dense", "room", "maze"];

/// Occupancy lookup written against the raw cell grid.
pub fn oracle_free(map: &GridMap, p: Point) -> bool {
    let (w, h) = (map.width() as f64, map.height() as f64);
    if !(p.x >= 0.0 && p.y >= 0.0 && p.x <= w && p.y <= h) {
        return false;
    }
    let col = (p.x.floor() as usize).min(map.width() - 1);
    let row = (p.y.floor() as usize).min(map.height() - 1);
    !map.is_obstacle(row, col)
}

/// Points along the segment at spacing at most `delta`, endpoints included.
pub fn supersample(s: &Segment, delta: f64) -> impl Iterator<Item = Point> + '_ {
    let n = (s.length() / delta).ceil().max(1.0) as usize;
    (0..=n).map(move |i| s.a.lerp(s.b, i as f64 / n as f64))
}

pub fn oracle_segment_free(map: &GridMap, s: &Segment) -> bool {
    supersample(s, 0.01).all(|p| oracle_free(map, p))
}

/// Distance from `p` to the closest obstacle cell or map edge, capped at 2.
pub fn clearance(map: &GridMap, p: Point) -> f64 {
    let (w, h) = (map.width() as f64, map.height() as f64);
    let mut best = p.x.min(p.y).min(w - p.x).min(h - p.y).min(2.0);
    let (cx, cy) = (p.x.floor() as i64, p.y.floor() as i64);
    for row in cy - 3..=cy + 3 {
        for col in cx - 3..=cx + 3 {
            if row < 0 || col < 0 || row >= map.height() as i64 || col >= map.width() as i64 {
                continue;
            }
            if !map.is_obstacle(row as usize, col as usize) {
                continue;
            }
            let dx = (col as f64 - p.x).max(p.x - (col + 1) as f64).max(0.0);
            let dy = (row as f64 - p.y).max(p.y - (row + 1) as f64).max(0.0);
            best = best.min((dx * dx + dy * dy).sqrt());
        }
    }
    best
}

/// Smallest clearance along a segment, at the oracle's sampling density.
pub fn segment_clearance(map: &GridMap, s: &Segment) -> f64 {
    supersample(s, 0.01)
        .map(|p| clearance(map, p))
        .fold(f64::INFINITY, f64::min)
}

/// An accepted segment passes the oracle outright or grazes an obstacle by
/// less than the checker's resolution.
pub fn edge_ok(map: &GridMap, s: &Segment) -> bool {
    oracle_segment_free(map, s) || segment_clearance(map, s) < 0.25
}

/// Modified Bessel function of the first kind by its power series.
pub fn bessel_i(order: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = half.powi(order as i32) / (1..=order).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..200 {
        term *= half * half / (k as f64 * (k + order) as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Asymptotic tail probability of Kuiper's statistic for `n` samples of
/// `cdf` values in [0, 1).
pub fn kuiper_p(mut u: Vec<f64>) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let (mut d_plus, mut d_minus) = (0.0f64, 0.0f64);
    for (i, &x) in u.iter().enumerate() {
        d_plus = d_plus.max((i + 1) as f64 / n - x);
        d_minus = d_minus.max(x - i as f64 / n);
    }
    let v = d_plus + d_minus;
    let lambda = (n.sqrt() + 0.155 + 0.24 / n.sqrt()) * v;
    if lambda < 0.4 {
        return 1.0;
    }
    let mut q = 0.0;
    for j in 1..100 {
        let j2 = (j * j) as f64;
        q += 2.0 * (4.0 * j2 * lambda * lambda - 1.0) * (-2.0 * j2 * lambda * lambda).exp();
    }
    q.clamp(0.0, 1.0)
}

/// Complementary error function (Numerical Recipes erfcc, |error| < 1.2e-7).
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398 + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// Upper tail of the chi-square distribution via the Wilson-Hilferty cube
/// root normal approximation.
pub fn chi_square_p(stat: f64, dof: f64) -> f64 {
    let c = 2.0 / (9.0 * dof);
    let z = ((stat / dof).cbrt() - (1.0 - c)) / c.sqrt();
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Single-pass (Welford) mean and population standard deviation.
pub fn welford(values: impl IntoIterator<Item = f64>) -> Option<(f64, f64)> {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for x in values {
        n += 1.0;
        let d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    (n > 0.0).then(|| (mean, (m2 / n).sqrt()))
}

pub fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

/// Cheapest start-tree/goal-tree pair by enumerating every combination.
pub fn best_pair_total(p: &MultiPlanner, g: GroupId, map: &GridMap) -> (Option<f64>, usize) {
    let group = p.group(g);
    let eps = p.forest.config.epsilon;
    let (mut best, mut qualifying) = (None::<f64>, 0);
    for &a in &p.forest.tree(group.start_tree).nodes {
        for &b in &p.forest.tree(group.goal_tree).nodes {
            let (na, nb) = (p.forest.node(a), p.forest.node(b));
            let d = na.position.dist(nb.position);
            if d <= eps && map.segment_free(&Segment::new(na.position, nb.position)) {
                qualifying += 1;
                let total = na.cost + d + nb.cost;
                best = Some(best.map_or(total, |x: f64| x.min(total)));
            }
        }
    }
    (best, qualifying)
}

pub mod replay {
    use std::collections::BTreeMap;

    use marrdt::forest::{Forest, PlannerConfig, TreeId, TreeKind};
    use marrdt::multiplan::{Event, MultiPlanner, TraceEvent};
    use marrdt::{GridMap, Point};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Forest membership rebuilt from trace events alone: tree id to node
    /// positions, plus archived node sets.
    #[derive(Debug, Default)]
    pub struct Replay {
        pub trees: BTreeMap<u32, Vec<Point>>,
        pub archives: Vec<Vec<Point>>,
    }

    impl Replay {
        pub fn apply(&mut self, e: &TraceEvent) -> Result<(), String> {
            let take = |trees: &mut BTreeMap<u32, Vec<Point>>, t: TreeId| {
                trees
                    .remove(&t.0)
                    .ok_or_else(|| format!("{e}: tree {} is not live", t.0))
            };
            match &e.event {
                Event::Init { tree, at, .. } | Event::Spawn { tree, at } | Event::Restart { tree, at } => {
                    self.trees.insert(tree.0, vec![*at]);
                }
                Event::Attach { tree, at, .. } | Event::Extend { tree, at, .. } => {
                    self.trees
                        .get_mut(&tree.0)
                        .ok_or_else(|| format!("{e}: unknown tree"))?
                        .push(*at);
                }
                Event::Merge { winner, loser, moved } => {
                    let nodes = take(&mut self.trees, *loser)?;
                    if nodes.len() != *moved {
                        return Err(format!("{e}: loser has {} nodes", nodes.len()));
                    }
                    self.trees
                        .get_mut(&winner.0)
                        .ok_or_else(|| format!("{e}: unknown winner"))?
                        .extend(nodes);
                }
                Event::Absorb {
                    root,
                    tree,
                    archive,
                    copied,
                } => {
                    let nodes = take(&mut self.trees, *tree)?;
                    if nodes.len() != *copied || archive.0 as usize != self.archives.len() {
                        return Err(format!("{e}: tree has {} nodes", nodes.len()));
                    }
                    self.trees
                        .get_mut(&root.0)
                        .ok_or_else(|| format!("{e}: unknown root"))?
                        .extend(&nodes);
                    self.archives.push(nodes);
                }
                Event::Share { root, archive, copied } => {
                    let nodes = self
                        .archives
                        .get(archive.0 as usize)
                        .ok_or_else(|| format!("{e}: no archive"))?;
                    if nodes.len() != *copied {
                        return Err(format!("{e}: archive has {} nodes", nodes.len()));
                    }
                    self.trees
                        .get_mut(&root.0)
                        .ok_or_else(|| format!("{e}: unknown root"))?
                        .extend(nodes);
                }
                Event::Pick { .. } | Event::Collide { .. } | Event::Connect { .. } => {}
            }
            Ok(())
        }

        /// Sorted position bits per tree, comparable with `Forest::membership`.
        pub fn membership(&self) -> Vec<(TreeId, Vec<(u64, u64)>)> {
            self.trees
                .iter()
                .map(|(&t, pts)| {
                    let mut v: Vec<(u64, u64)> = pts.iter().map(|p| (p.x.to_bits(), p.y.to_bits())).collect();
                    v.sort_unstable();
                    (TreeId(t), v)
                })
                .collect()
        }
    }

    #[derive(Debug, Default, Clone, Copy)]
    pub struct AuditStats {
        pub iterations: usize,
        pub checkpoints: usize,
        pub merges: usize,
        pub absorptions: usize,
        pub shares: usize,
        pub completed: bool,
    }

    fn root_costs(f: &Forest) -> BTreeMap<u32, f64> {
        f.active_trees()
            .filter(|t| t.kind == TreeKind::Root)
            .flat_map(|t| t.nodes.iter().map(|&n| (n.0, f.node(n).cost)))
            .collect()
    }

    /// Plans with full tracing and checks forest invariants: every
    /// iteration for the tree census and trace replay bookkeeping, every
    /// `thin`-th iteration (and at the end) for the structural audit, replay
    /// membership equality and monotone root-tree costs; trees touched by a
    /// merge, absorption or share get a cost-coherence check on the spot.
    pub fn audited_plan(
        map: &GridMap,
        starts: &[Point],
        goals: &[Point],
        cfg: PlannerConfig,
        seed: u64,
        thin: usize,
    ) -> Result<AuditStats, String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, k) = (starts.len(), cfg.k);
        let budget = cfg.max_samples;
        let mut p = MultiPlanner::new(map, starts, goals, cfg, &mut rng)
            .map_err(|e| e.to_string())?
            .with_trace();
        let mut replay = Replay::default();
        let mut seen = 0;
        let mut stats = AuditStats::default();
        let mut costs = root_costs(&p.forest);
        let checkpoint = |p: &MultiPlanner, replay: &Replay, costs: &mut BTreeMap<u32, f64>| {
            p.forest
                .audit(map)
                .map_err(|e| format!("iteration {}: {e}", p.iteration))?;
            if replay.membership() != p.forest.membership() {
                return Err(format!("iteration {}: replayed membership differs", p.iteration));
            }
            let now = root_costs(&p.forest);
            for (id, before) in costs.iter() {
                match now.get(id) {
                    Some(&c) if c <= before + 1e-9 => {}
                    Some(&c) => return Err(format!("node {id}: cost rose from {before} to {c}")),
                    None => return Err(format!("root tree node {id} disappeared")),
                }
            }
            *costs = now;
            Ok::<(), String>(())
        };
        while !p.done && p.stats.total() < budget {
            match p.plan_step(map, &mut rng) {
                Ok(_) => {}
                Err(marrdt::PlanError::AllTreesHalted) => break,
                Err(e) => return Err(e.to_string()),
            }
            stats.iterations += 1;
            let mut touched = Vec::new();
            for e in &p.trace()[seen..] {
                replay.apply(e)?;
                match e.event {
                    Event::Merge { winner, .. } => {
                        stats.merges += 1;
                        touched.push(winner);
                    }
                    Event::Absorb { root, .. } => {
                        stats.absorptions += 1;
                        touched.push(root);
                    }
                    Event::Share { root, .. } => {
                        stats.shares += 1;
                        touched.push(root);
                    }
                    _ => {}
                }
            }
            seen = p.trace().len();
            for t in touched {
                for &node in &p.forest.tree(t).nodes {
                    let (stored, chain) = (p.forest.node(node).cost, p.forest.chain_cost(node));
                    if (stored - chain).abs() > 1e-6 {
                        return Err(format!(
                            "iteration {}: node {node:?} cost {stored} vs {chain}",
                            p.iteration
                        ));
                    }
                }
            }
            if p.census() != (2 * n, k) {
                return Err(format!("iteration {}: census {:?}", p.iteration, p.census()));
            }
            if stats.iterations % thin == 0 {
                checkpoint(&p, &replay, &mut costs)?;
                stats.checkpoints += 1;
            }
        }
        checkpoint(&p, &replay, &mut costs)?;
        stats.checkpoints += 1;
        stats.completed = p.done;
        Ok(stats)
    }
}
