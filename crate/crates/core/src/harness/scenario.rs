//! Scenario files: a JSON object naming a map, robots, a planner and its
//! parameters.
//!
//! ```json
//! {
//!   "version": 1,
//!   "name": "maze_rrdt",
//!   "map": "../maps/maze.txt",
//!   "planner": "ma-rrdt-star",
//!   "robots": [{ "start": [4, 4], "goal": [60, 60] }],
//!   "planner_config": { "epsilon": 9.0 },
//!   "sim_config": { "dt": 0.1 },
//!   "runs": 3,
//!   "seed": 1
//! }
//! ```
//!
//! Omitted parameters take their defaults; the map path is relative to the
//! scenario file.

use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use thiserror::Error;

use crate::baseline::RrtStarConfig;
use crate::forest::PlannerConfig;
use crate::motion::SimConfig;
use crate::workspace::{load_map, GridMap, MapError, Point};

pub const SCENARIO_VERSION: u64 = 1;
pub const DEFAULT_RUNS: usize = 20;
pub const DEFAULT_MAZE_RUNS: usize = 3;
pub const DEFAULT_MAX_STEPS: usize = 5_000;
pub const DEFAULT_GOAL_BIAS: f64 = 0.05;

const FIELDS: [&str; 13] = [
    "version",
    "name",
    "map",
    "planner",
    "robots",
    "planner_config",
    "sim_config",
    "goal_bias",
    "wall_margin",
    "runs",
    "seed",
    "max_steps",
    "output",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlannerKind {
    MaRrdtStar,
    MaRrtStar,
}

impl PlannerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlannerKind::MaRrdtStar => "ma-rrdt-star",
            PlannerKind::MaRrtStar => "ma-rrt-star",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ma-rrdt-star" => Some(PlannerKind::MaRrdtStar),
            "ma-rrt-star" => Some(PlannerKind::MaRrtStar),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotSpec {
    pub start: Point,
    pub goal: Point,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub map_path: PathBuf,
    pub map: GridMap,
    /// The map with obstacles grown by `wall_margin`, used for planning.
    pub planning_map: GridMap,
    pub robots: Vec<RobotSpec>,
    pub planner: PlannerKind,
    pub planner_config: PlannerConfig,
    pub goal_bias: f64,
    pub sim_config: SimConfig,
    pub wall_margin: f64,
    pub runs: usize,
    /// Run `i` uses `seed + i`.
    pub seed: u64,
    pub max_steps: usize,
    /// CSV destination for batch runs, relative paths resolved against the
    /// scenario file.
    pub output: Option<PathBuf>,
}

impl Scenario {
    pub fn starts(&self) -> Vec<Point> {
        self.robots.iter().map(|r| r.start).collect()
    }

    pub fn goals(&self) -> Vec<Point> {
        self.robots.iter().map(|r| r.goal).collect()
    }

    /// File stem of the map, used as the map label in reports.
    pub fn map_name(&self) -> String {
        self.map_path.file_stem().map_or_else(
            || self.map_path.display().to_string(),
            |s| s.to_string_lossy().into_owned(),
        )
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(run as u64)
    }

    pub fn rrt_config(&self) -> RrtStarConfig {
        RrtStarConfig {
            goal_bias: self.goal_bias,
            ..RrtStarConfig::from_planner(&self.planner_config)
        }
    }

    /// Replaces the base seed with a decimal override, such as the value of
    /// an environment variable.
    pub fn override_seed(&mut self, value: &str) -> Result<(), ScenarioError> {
        self.seed = value
            .trim()
            .parse()
            .map_err(|_| malformed("seed", format!("override {value:?} is not an unsigned integer")))?;
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("malformed scenario field `{field}`: {reason}")]
    MalformedScenario { field: String, reason: String },
    #[error("robot {robot}: start {point} is not in free space")]
    InvalidStart { robot: usize, point: Point },
    #[error("robot {robot}: goal {point} is not in free space")]
    InvalidGoal { robot: usize, point: Point },
    #[error("robot {robot}: endpoint {point} is used more than once")]
    DuplicateEndpoint { robot: usize, point: Point },
    #[error("{}: {reason}", path.display())]
    Io { path: PathBuf, reason: String },
    #[error("{}: {source}", path.display())]
    Map { path: PathBuf, source: MapError },
}

fn malformed(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::MalformedScenario {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario_file(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    load_scenario(&text, base)
}

/// Parses scenario text, loading the map relative to `base`.
pub fn load_scenario(text: &str, base: &Path) -> Result<Scenario, ScenarioError> {
    let root: Value = serde_json::from_str(text).map_err(|e| malformed("<document>", e.to_string()))?;
    let obj = root
        .as_object()
        .ok_or_else(|| malformed("<document>", "expected an object"))?;
    if let Some(unknown) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
        return Err(malformed(unknown.as_str(), "unknown field"));
    }

    let version = required(obj, "version")?
        .as_u64()
        .ok_or_else(|| malformed("version", "expected an unsigned integer"))?;
    if version != SCENARIO_VERSION {
        return Err(malformed("version", format!("unsupported version {version}")));
    }
    let name = string(obj, "name")?;
    let planner_name = string(obj, "planner")?;
    let planner = PlannerKind::parse(&planner_name)
        .ok_or_else(|| malformed("planner", format!("unknown planner {planner_name:?}")))?;

    let map_rel = string(obj, "map")?;
    let map_path = base.join(&map_rel);
    let map_text = std::fs::read_to_string(&map_path).map_err(|e| ScenarioError::Io {
        path: map_path.clone(),
        reason: e.to_string(),
    })?;
    let map = load_map(&map_text).map_err(|source| ScenarioError::Map {
        path: map_path.clone(),
        source,
    })?;

    let sim_config: SimConfig = merged(obj, "sim_config", SimConfig::default())?;
    sim_config.validate().map_err(|r| malformed("sim_config", r))?;

    let wall_margin = match obj.get("wall_margin") {
        None => sim_config.radius,
        Some(v) => v
            .as_f64()
            .filter(|m| m.is_finite() && *m >= 0.0)
            .ok_or_else(|| malformed("wall_margin", "expected a non-negative number"))?,
    };
    let planning_map = if wall_margin > 0.0 {
        map.inflate(wall_margin)
    } else {
        map.clone()
    };

    let planner_config: PlannerConfig = merged(obj, "planner_config", PlannerConfig::for_map(&planning_map))?;
    planner_config
        .validate()
        .map_err(|e| malformed("planner_config", e.to_string()))?;

    let goal_bias = match obj.get("goal_bias") {
        None => DEFAULT_GOAL_BIAS,
        Some(v) => v
            .as_f64()
            .filter(|b| (0.0..1.0).contains(b))
            .ok_or_else(|| malformed("goal_bias", "expected a number in [0, 1)"))?,
    };

    let robots = robots(obj)?;
    validate_robots(&planning_map, &robots)?;

    let default_runs = if map_name_of(&map_path).contains("maze") {
        DEFAULT_MAZE_RUNS
    } else {
        DEFAULT_RUNS
    };
    let runs = count(obj, "runs", default_runs)?;
    if runs == 0 {
        return Err(malformed("runs", "must be at least 1"));
    }
    let seed = match obj.get("seed") {
        None => 0,
        Some(v) => v
            .as_u64()
            .ok_or_else(|| malformed("seed", "expected an unsigned integer"))?,
    };
    let max_steps = count(obj, "max_steps", DEFAULT_MAX_STEPS)?;
    if max_steps == 0 {
        return Err(malformed("max_steps", "must be at least 1"));
    }
    let output = match obj.get("output") {
        None => None,
        Some(v) => Some(base.join(v.as_str().ok_or_else(|| malformed("output", "expected a string"))?)),
    };

    Ok(Scenario {
        name,
        map_path,
        map,
        planning_map,
        robots,
        planner,
        planner_config,
        goal_bias,
        sim_config,
        wall_margin,
        runs,
        seed,
        max_steps,
        output,
    })
}

fn map_name_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn required<'a>(obj: &'a Map<String, Value>, field: &str) -> Result<&'a Value, ScenarioError> {
    obj.get(field).ok_or_else(|| malformed(field, "missing"))
}

fn string(obj: &Map<String, Value>, field: &str) -> Result<String, ScenarioError> {
    required(obj, field)?
        .as_str()
        .map(str::to_owned)
        .ok_or_else(|| malformed(field, "expected a string"))
}

fn count(obj: &Map<String, Value>, field: &str, default: usize) -> Result<usize, ScenarioError> {
    match obj.get(field) {
        None => Ok(default),
        Some(v) => v
            .as_u64()
            .map(|n| n as usize)
            .ok_or_else(|| malformed(field, "expected an unsigned integer")),
    }
}

/// Overlays the keys of `obj[field]` onto the serialized defaults.
fn merged<T>(obj: &Map<String, Value>, field: &str, defaults: T) -> Result<T, ScenarioError>
where
    T: serde::Serialize + serde::de::DeserializeOwned,
{
    let mut base = serde_json::to_value(defaults).expect("config serializes");
    if let Some(v) = obj.get(field) {
        let overrides = v.as_object().ok_or_else(|| malformed(field, "expected an object"))?;
        let target = base.as_object_mut().expect("config is an object");
        for (key, value) in overrides {
            if !target.contains_key(key) {
                return Err(malformed(format!("{field}.{key}"), "unknown field"));
            }
            target.insert(key.clone(), value.clone());
        }
    }
    serde_json::from_value(base).map_err(|e| malformed(field, e.to_string()))
}

fn point(v: &Value, field: &str) -> Result<Point, ScenarioError> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| malformed(field, "expected [x, y]"))?;
    let x = arr[0].as_f64().ok_or_else(|| malformed(field, "x is not a number"))?;
    let y = arr[1].as_f64().ok_or_else(|| malformed(field, "y is not a number"))?;
    Ok(Point::new(x, y))
}

fn robots(obj: &Map<String, Value>) -> Result<Vec<RobotSpec>, ScenarioError> {
    let list = required(obj, "robots")?
        .as_array()
        .ok_or_else(|| malformed("robots", "expected a list"))?;
    if list.is_empty() {
        return Err(malformed("robots", "at least one robot is required"));
    }
    list.iter()
        .enumerate()
        .map(|(i, r)| {
            let o = r
                .as_object()
                .ok_or_else(|| malformed(format!("robots[{i}]"), "expected an object"))?;
            if let Some(k) = o.keys().find(|k| *k != "start" && *k != "goal") {
                return Err(malformed(format!("robots[{i}].{k}"), "unknown field"));
            }
            let get = |key: &str| {
                let field = format!("robots[{i}].{key}");
                o.get(key)
                    .ok_or_else(|| malformed(field.clone(), "missing"))
                    .and_then(|v| point(v, &field))
            };
            Ok(RobotSpec {
                start: get("start")?,
                goal: get("goal")?,
            })
        })
        .collect()
}

fn validate_robots(map: &GridMap, robots: &[RobotSpec]) -> Result<(), ScenarioError> {
    let mut seen: Vec<Point> = Vec::new();
    for (i, r) in robots.iter().enumerate() {
        if !map.is_free(r.start) {
            return Err(ScenarioError::InvalidStart {
                robot: i,
                point: r.start,
            });
        }
        if !map.is_free(r.goal) {
            return Err(ScenarioError::InvalidGoal {
                robot: i,
                point: r.goal,
            });
        }
        for p in [r.start, r.goal] {
            if seen.contains(&p) {
                return Err(ScenarioError::DuplicateEndpoint { robot: i, point: p });
            }
            seen.push(p);
        }
    }
    Ok(())
}
