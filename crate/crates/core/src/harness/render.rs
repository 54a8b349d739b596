//! SVG pictures of maps, planner trees, paths and robot trajectories.
//!
//! A scene can be saved as text and rendered later. The text holds the tree
//! snapshot lines (`tree id kind group weight`, `node tree kind node parent x
//! y cost`) followed by
//!
//! ```text
//! start <group> <x> <y>
//! goal <group> <x> <y>
//! path <group> <x> <y> <x> <y> ...
//! robot <id> <x> <y>
//! trajectory <id> <x> <y> <x> <y> ...
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::smoothing::Path;
use crate::workspace::{GridMap, Point};

/// Tree edge colours by group id; both trees of a group share one.
pub const PALETTE: [&str; 10] = [
    "#e6194b", "#3cb44b", "#f58231", "#911eb4", "#46f0f0", "#f032e6", "#9a6324", "#008080", "#808000", "#000075",
];
pub const DISJOINTED_COLOR: &str = "#b0b0b0";
pub const PATH_COLOR: &str = "#1f3fbf";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneTree {
    pub id: u32,
    pub group: Option<u32>,
    pub edges: Vec<(Point, Point)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    pub trees: Vec<SceneTree>,
    pub paths: Vec<(u32, Vec<Point>)>,
    pub starts: Vec<(u32, Point)>,
    pub goals: Vec<(u32, Point)>,
    pub robots: Vec<(u32, Point)>,
    pub trajectories: Vec<(u32, Vec<Point>)>,
}

impl Scene {
    /// Adds the endpoints and found paths of every robot, in robot order.
    pub fn with_paths(mut self, starts: &[Point], goals: &[Point], paths: &[Option<Path>]) -> Self {
        for (i, (&s, &g)) in starts.iter().zip(goals).enumerate() {
            self.starts.push((i as u32, s));
            self.goals.push((i as u32, g));
        }
        for (i, p) in paths.iter().enumerate() {
            if let Some(p) = p {
                self.paths.push((i as u32, p.waypoints.clone()));
            }
        }
        self
    }

    /// Adds robot positions and per-robot trajectories from a
    /// `step id x y vx vy` log, starting each trajectory at `initial`.
    pub fn with_trajectory(mut self, initial: &[Point], log: &str, last: &[Point]) -> Self {
        let mut tracks: BTreeMap<u32, Vec<Point>> =
            initial.iter().enumerate().map(|(i, &p)| (i as u32, vec![p])).collect();
        for line in log.lines() {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() < 4 {
                continue;
            }
            if let (Ok(id), Ok(x), Ok(y)) = (f[1].parse::<u32>(), f[2].parse::<f64>(), f[3].parse::<f64>()) {
                tracks.entry(id).or_default().push(Point::new(x, y));
            }
        }
        self.trajectories = tracks.into_iter().filter(|(_, t)| t.len() > 1).collect();
        self.robots = last.iter().enumerate().map(|(i, &p)| (i as u32, p)).collect();
        self
    }

    /// Parses snapshot and scene lines.
    pub fn parse(text: &str) -> Result<Scene, RenderError> {
        let mut scene = Scene::default();
        let mut trees: BTreeMap<u32, SceneTree> = BTreeMap::new();
        // (tree, node) -> (parent, position)
        let mut nodes: BTreeMap<(u32, u32), (Option<u32>, Point)> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |reason: &str| RenderError::Parse {
                line: line_no,
                reason: reason.to_string(),
            };
            let f: Vec<&str> = line.split_whitespace().collect();
            let Some(&kind) = f.first() else { continue };
            let int = |s: &str| s.parse::<u32>().map_err(|_| err(&format!("bad integer {s:?}")));
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(&format!("bad number {s:?}")));
            let points = |rest: &[&str]| -> Result<Vec<Point>, RenderError> {
                if !rest.len().is_multiple_of(2) {
                    return Err(err("odd coordinate count"));
                }
                rest.chunks(2).map(|c| Ok(Point::new(num(c[0])?, num(c[1])?))).collect()
            };
            match kind {
                "tree" if f.len() == 5 => {
                    let id = int(f[1])?;
                    let group = if f[3] == "-" { None } else { Some(int(f[3])?) };
                    trees.insert(
                        id,
                        SceneTree {
                            id,
                            group,
                            edges: Vec::new(),
                        },
                    );
                }
                "node" if f.len() == 8 => {
                    let tree = int(f[1])?;
                    let node = int(f[3])?;
                    let parent = if f[4] == "-" { None } else { Some(int(f[4])?) };
                    nodes.insert((tree, node), (parent, Point::new(num(f[5])?, num(f[6])?)));
                }
                "start" | "goal" | "robot" if f.len() == 4 => {
                    let entry = (int(f[1])?, Point::new(num(f[2])?, num(f[3])?));
                    match kind {
                        "start" => scene.starts.push(entry),
                        "goal" => scene.goals.push(entry),
                        _ => scene.robots.push(entry),
                    }
                }
                "path" | "trajectory" if f.len() >= 2 => {
                    let entry = (int(f[1])?, points(&f[2..])?);
                    if kind == "path" {
                        scene.paths.push(entry);
                    } else {
                        scene.trajectories.push(entry);
                    }
                }
                _ => return Err(err(&format!("unrecognised line {line:?}"))),
            }
        }
        for (&(tree, _), &(parent, p)) in &nodes {
            let Some(parent) = parent else { continue };
            let Some(&(_, q)) = nodes.get(&(tree, parent)) else {
                return Err(RenderError::Parse {
                    line: 0,
                    reason: format!("tree {tree}: missing parent node {parent}"),
                });
            };
            trees
                .entry(tree)
                .or_insert_with(|| SceneTree {
                    id: tree,
                    ..SceneTree::default()
                })
                .edges
                .push((q, p));
        }
        scene.trees = trees.into_values().collect();
        Ok(scene)
    }

    /// The non-tree part of the text format; prepend a tree snapshot to get
    /// a complete scene file.
    pub fn extras_text(&self) -> String {
        let mut out = String::new();
        let pts = |ps: &[Point]| ps.iter().map(|p| format!(" {} {}", p.x, p.y)).collect::<String>();
        for (g, p) in &self.starts {
            let _ = writeln!(out, "start {g} {} {}", p.x, p.y);
        }
        for (g, p) in &self.goals {
            let _ = writeln!(out, "goal {g} {} {}", p.x, p.y);
        }
        for (g, ps) in &self.paths {
            let _ = writeln!(out, "path {g}{}", pts(ps));
        }
        for (id, p) in &self.robots {
            let _ = writeln!(out, "robot {id} {} {}", p.x, p.y);
        }
        for (id, ps) in &self.trajectories {
            let _ = writeln!(out, "trajectory {id}{}", pts(ps));
        }
        out
    }
}

fn group_color(group: Option<u32>) -> &'static str {
    group.map_or(DISJOINTED_COLOR, |g| PALETTE[g as usize % PALETTE.len()])
}

fn polyline_points(ps: &[Point]) -> String {
    ps.iter()
        .map(|p| format!("{},{}", p.x, p.y))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Renders a scene over a map. Coordinates are map units, one unit per
/// grid cell, with y growing downward like the map rows.
pub fn render_svg(map: &GridMap, scene: &Scene) -> String {
    const SCALE: usize = 10;
    let (w, h) = (map.width(), map.height());
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {w} {h}">"#,
        w * SCALE,
        h * SCALE
    );
    let _ = writeln!(
        out,
        r#"<rect class="map" x="0" y="0" width="{w}" height="{h}" fill="white" stroke="black" stroke-width="0.1"/>"#
    );

    let mut runs = String::new();
    for row in 0..h {
        let mut col = 0;
        while col < w {
            if map.is_obstacle(row, col) {
                let begin = col;
                while col < w && map.is_obstacle(row, col) {
                    col += 1;
                }
                let _ = writeln!(
                    runs,
                    r#"<rect x="{begin}" y="{row}" width="{}" height="1"/>"#,
                    col - begin
                );
            } else {
                col += 1;
            }
        }
    }
    if !runs.is_empty() {
        let _ = write!(out, "<g class=\"obstacles\" fill=\"#404040\">\n{runs}</g>\n");
    }

    for tree in scene.trees.iter().filter(|t| !t.edges.is_empty()) {
        let d: String = tree
            .edges
            .iter()
            .map(|(a, b)| format!("M{:.3} {:.3}L{:.3} {:.3}", a.x, a.y, b.x, b.y))
            .collect();
        let _ = writeln!(
            out,
            r#"<path class="tree" data-tree="{}" d="{d}" stroke="{}" stroke-width="0.08" fill="none"/>"#,
            tree.id,
            group_color(tree.group)
        );
    }
    for (id, track) in &scene.trajectories {
        let _ = writeln!(
            out,
            r#"<polyline class="trajectory" data-robot="{id}" points="{}" stroke="black" stroke-width="0.1" stroke-dasharray="0.4 0.3" fill="none"/>"#,
            polyline_points(track)
        );
    }
    for (g, ps) in &scene.paths {
        let _ = writeln!(
            out,
            r#"<polyline class="path" data-group="{g}" points="{}" stroke="{PATH_COLOR}" stroke-width="0.5" fill="none"/>"#,
            polyline_points(ps)
        );
    }
    let dots = [
        ("start", "red", &scene.starts, 0.6),
        ("goal", "green", &scene.goals, 0.6),
        ("robot", "black", &scene.robots, 0.4),
    ];
    for (class, fill, items, r) in dots {
        for (id, p) in items.iter() {
            let _ = writeln!(
                out,
                r#"<circle class="{class}" data-id="{id}" cx="{}" cy="{}" r="{r}" fill="{fill}"/>"#,
                p.x, p.y
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
