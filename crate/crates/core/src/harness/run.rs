//! Seeded planning-plus-simulation runs and batch aggregation.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::scenario::{PlannerKind, Scenario};
use crate::baseline::MaRrtStar;
use crate::error::PlanError;
use crate::forest::PlannerConfig;
use crate::motion::{simulate, World};
use crate::multiplan::{MultiPlanner, SampleStats};
use crate::smoothing::Path;
use crate::workspace::Point;

/// Measurements of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub run_index: usize,
    pub planner: String,
    pub map: String,
    pub robots: usize,
    pub seed: u64,
    /// Wall-clock seconds spent planning.
    pub plan_time: f64,
    /// Planning plus simulation, in wall-clock seconds.
    pub run_time: f64,
    /// Total path length divided by the number of robots.
    pub avg_path_length: f64,
    pub total_nodes: usize,
    pub valid_nodes: usize,
    pub invalid_nodes: usize,
    /// Overlapping robot pairs, summed over simulation steps.
    pub collisions: usize,
    pub arrived: bool,
    /// Why the run failed, if it did.
    pub failure: Option<String>,
}

impl RunMetrics {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none() && self.arrived && self.collisions == 0
    }
}

/// Everything a single run produced, for inspection and rendering.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub paths: Vec<Option<Path>>,
    /// Planner event trace (empty unless recording).
    pub trace: String,
    /// Tree snapshot at the end of planning (empty unless recording).
    pub snapshot: String,
    /// `step id x y vx vy` lines (empty unless recording).
    pub trajectory: String,
    /// Robot positions when the simulation stopped.
    pub final_positions: Vec<Point>,
}

struct Planned {
    paths: Vec<Option<Path>>,
    stats: SampleStats,
    result: Result<(), PlanError>,
    trace: String,
    snapshot: String,
}

fn plan_rrdt(sc: &Scenario, cfg: PlannerConfig, rng: &mut ChaCha8Rng, record: bool) -> Planned {
    let map = &sc.planning_map;
    let mut planner = match MultiPlanner::new(map, &sc.starts(), &sc.goals(), cfg, rng) {
        Ok(p) => p,
        Err(e) => return failed(sc, e),
    };
    if record {
        planner = planner.with_trace();
    }
    let result = planner.plan(map, rng);
    Planned {
        paths: planner.paths(),
        stats: planner.stats,
        result,
        trace: if record { planner.trace_text() } else { String::new() },
        snapshot: if record {
            planner.forest.snapshot()
        } else {
            String::new()
        },
    }
}

fn plan_rrt(sc: &Scenario, seed: u64, rng: &mut ChaCha8Rng, record: bool) -> Planned {
    let map = &sc.planning_map;
    let mut cfg = sc.rrt_config();
    cfg.seed = seed;
    let mut planner = match MaRrtStar::new(map, &sc.starts(), &sc.goals(), &cfg) {
        Ok(p) => p,
        Err(e) => return failed(sc, e),
    };
    if record {
        planner = planner.with_trace();
    }
    let result = planner.plan(map, rng);
    Planned {
        paths: planner.paths(),
        stats: planner.stats,
        result,
        trace: if record { planner.trace_text() } else { String::new() },
        snapshot: if record { planner.snapshot() } else { String::new() },
    }
}

fn failed(sc: &Scenario, e: PlanError) -> Planned {
    Planned {
        paths: vec![None; sc.robots.len()],
        stats: SampleStats::default(),
        result: Err(e),
        trace: String::new(),
        snapshot: String::new(),
    }
}

/// Plans and simulates run `index` of a scenario with seed `seed + index`.
/// Planning failures and simulation timeouts are recorded in the metrics.
pub fn run_once(sc: &Scenario, index: usize, record: bool) -> RunOutput {
    let seed = sc.run_seed(index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clock = Instant::now();
    let planned = match sc.planner {
        PlannerKind::MaRrdtStar => {
            let cfg = PlannerConfig {
                seed,
                ..sc.planner_config.clone()
            };
            plan_rrdt(sc, cfg, &mut rng, record)
        }
        PlannerKind::MaRrtStar => plan_rrt(sc, seed, &mut rng, record),
    };
    let plan_time = clock.elapsed().as_secs_f64();

    let n = sc.robots.len();
    let avg_path_length = planned.paths.iter().flatten().map(Path::length).sum::<f64>() / n as f64;
    let mut metrics = RunMetrics {
        run_index: index,
        planner: sc.planner.as_str().to_string(),
        map: sc.map_name(),
        robots: n,
        seed,
        plan_time,
        run_time: plan_time,
        avg_path_length,
        total_nodes: planned.stats.total(),
        valid_nodes: planned.stats.valid,
        invalid_nodes: planned.stats.invalid,
        collisions: 0,
        arrived: false,
        failure: None,
    };
    let mut trajectory = String::new();
    let mut final_positions = sc.starts();

    match &planned.result {
        Err(e) => metrics.failure = Some(e.to_string()),
        Ok(()) => {
            let mut world = World::new(planned.paths.clone(), &sc.starts(), &sc.sim_config);
            let log = if record { Some(&mut trajectory) } else { None };
            let outcome = simulate(&mut world, &sc.sim_config, sc.max_steps, &mut rng, log);
            metrics.run_time = clock.elapsed().as_secs_f64().max(plan_time);
            metrics.collisions = outcome.collisions;
            metrics.arrived = outcome.arrived;
            if !outcome.arrived {
                metrics.failure = Some(format!("simulation timeout after {} steps", outcome.steps));
            }
            final_positions = world.robots.iter().map(|r| r.position).collect();
        }
    }

    RunOutput {
        metrics,
        paths: planned.paths,
        trace: planned.trace,
        snapshot: planned.snapshot,
        trajectory,
        final_positions,
    }
}

/// Runs every repetition of a scenario, in parallel unless `serial`. Rows
/// come back in run order either way.
pub fn run_scenario_with(sc: &Scenario, serial: bool) -> Vec<RunMetrics> {
    if serial {
        (0..sc.runs).map(|i| run_once(sc, i, false).metrics).collect()
    } else {
        (0..sc.runs)
            .into_par_iter()
            .map(|i| run_once(sc, i, false).metrics)
            .collect()
    }
}

pub fn run_scenario(sc: &Scenario) -> Vec<RunMetrics> {
    run_scenario_with(sc, false)
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Summary { mean, std: var.sqrt() })
    }
}

/// Statistics over the successful runs of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub successes: usize,
    pub failures: usize,
    pub plan_time: Option<Summary>,
    pub run_time: Option<Summary>,
    pub avg_path_length: Option<Summary>,
    pub total_nodes: Option<Summary>,
    pub valid_nodes: Option<Summary>,
    pub invalid_nodes: Option<Summary>,
    pub collisions: Option<Summary>,
}

pub fn aggregate(rows: &[RunMetrics]) -> Aggregate {
    let ok: Vec<&RunMetrics> = rows.iter().filter(|r| r.succeeded()).collect();
    let col = |f: fn(&RunMetrics) -> f64| Summary::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
    Aggregate {
        successes: ok.len(),
        failures: rows.len() - ok.len(),
        plan_time: col(|r| r.plan_time),
        run_time: col(|r| r.run_time),
        avg_path_length: col(|r| r.avg_path_length),
        total_nodes: col(|r| r.total_nodes as f64),
        valid_nodes: col(|r| r.valid_nodes as f64),
        invalid_nodes: col(|r| r.invalid_nodes as f64),
        collisions: col(|r| r.collisions as f64),
    }
}

/// Median of the values (mean of the middle pair for even counts).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    })
}
