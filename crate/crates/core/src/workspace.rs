//! Planar free-space model over a boolean occupancy grid.
//!
//! One grid cell is one map unit. Coordinates are continuous; cell `(row, col)`
//! covers `[col, col + 1) x [row, row + 1)`. Points on the far edge of the map
//! (`x == width` or `y == height`) are clamped into the last cell.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default sampling resolution for segment collision checks.
pub const COLLISION_RESOLUTION: f64 = 0.25;

/// Attempts before [`GridMap::sample_free`] gives up.
pub const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MapError {
    #[error("malformed map at line {line}, column {column}: {reason}")]
    MalformedMap { line: usize, column: usize, reason: String },
    #[error("no free space found after {0} rejection-sampling attempts")]
    NoFreeSpace(usize),
}

/// A point (or vector) in map units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ZERO: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Point::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Returns the vector scaled to at most `max` in length.
    pub fn clamp_norm(self, max: f64) -> Point {
        let n = self.norm();
        if n > max && n > 0.0 {
            self * (max / n)
        } else {
            self
        }
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub fn new(a: Point, b: Point) -> Self {
        Segment { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }
}

/// Row-major occupancy grid; `true` marks an obstacle cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl GridMap {
    /// Builds a map from row-major occupancy. Panics if the dimensions are
    /// zero or do not match `cells.len()`.
    pub fn new(width: usize, height: usize, cells: Vec<bool>) -> Self {
        assert!(width >= 1 && height >= 1, "map must be at least 1x1");
        assert_eq!(cells.len(), width * height, "cell count mismatch");
        GridMap { width, height, cells }
    }

    pub fn blank(width: usize, height: usize) -> Self {
        GridMap::new(width, height, vec![false; width * height])
    }

    /// Parses the ASCII map format: equal-length lines of `.` (free) and `#`
    /// (obstacle). A trailing newline is optional and `\r` is ignored.
    pub fn parse(text: &str) -> Result<Self, MapError> {
        let body = text.strip_suffix('\n').unwrap_or(text);
        let mut width = None;
        let mut cells = Vec::new();
        let mut height = 0;
        for (i, raw) in body.split('\n').enumerate() {
            let line = raw.replace('\r', "");
            let lineno = i + 1;
            let expected = *width.get_or_insert(line.chars().count());
            if expected == 0 {
                return Err(MapError::MalformedMap {
                    line: lineno,
                    column: 1,
                    reason: "empty row".into(),
                });
            }
            for (j, ch) in line.chars().enumerate() {
                match ch {
                    '.' => cells.push(false),
                    '#' => cells.push(true),
                    other => {
                        return Err(MapError::MalformedMap {
                            line: lineno,
                            column: j + 1,
                            reason: format!("illegal character {other:?}"),
                        })
                    }
                }
            }
            let len = line.chars().count();
            if len != expected {
                return Err(MapError::MalformedMap {
                    line: lineno,
                    column: len.min(expected) + 1,
                    reason: format!("ragged row {lineno}: length {len}, expected {expected}"),
                });
            }
            height += 1;
        }
        let width = width.unwrap_or(0);
        if width == 0 || height == 0 {
            return Err(MapError::MalformedMap {
                line: 1,
                column: 1,
                reason: "empty grid".into(),
            });
        }
        Ok(GridMap::new(width, height, cells))
    }

    /// Serializes back into the ASCII format, one `\n`-terminated line per row.
    pub fn to_ascii(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for row in 0..self.height {
            for col in 0..self.width {
                out.push(if self.cells[row * self.width + col] { '#' } else { '.' });
            }
            out.push('\n');
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64)
    }

    pub fn is_obstacle(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.width + col]
    }

    pub fn free_cell_count(&self) -> usize {
        self.cells.iter().filter(|&&c| !c).count()
    }

    pub fn in_bounds(&self, p: Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width as f64 && p.y <= self.height as f64
    }

    /// The cell containing `p`, or `None` when out of bounds.
    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        if !p.is_finite() || !self.in_bounds(p) {
            return None;
        }
        let col = (p.x.floor() as usize).min(self.width - 1);
        let row = (p.y.floor() as usize).min(self.height - 1);
        Some((row, col))
    }

    pub fn is_free(&self, p: Point) -> bool {
        match self.cell_of(p) {
            Some((row, col)) => !self.is_obstacle(row, col),
            None => false,
        }
    }

    pub fn segment_free(&self, s: &Segment) -> bool {
        self.segment_free_at(s, COLLISION_RESOLUTION)
    }

    /// Samples the segment at spacing no larger than `resolution`, endpoints
    /// included. Sample positions are symmetric in the endpoints, so the
    /// result does not depend on segment direction.
    pub fn segment_free_at(&self, s: &Segment, resolution: f64) -> bool {
        let len = s.length();
        let steps = (len / resolution).ceil() as usize;
        if steps == 0 {
            return self.is_free(s.a) && self.is_free(s.b);
        }
        // Walk inward from both ends so a->b and b->a evaluate identical points.
        for i in 0..=steps / 2 {
            let t = i as f64 / steps as f64;
            if !self.is_free(s.a.lerp(s.b, t)) || !self.is_free(s.b.lerp(s.a, t)) {
                return false;
            }
        }
        true
    }

    /// Uniform sample over the free area by rejection.
    pub fn sample_free<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Point, MapError> {
        let (w, h) = (self.width as f64, self.height as f64);
        for _ in 0..MAX_REJECTIONS {
            let p = Point::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h));
            if self.is_free(p) {
                return Ok(p);
            }
        }
        Err(MapError::NoFreeSpace(MAX_REJECTIONS))
    }

    /// Returns a copy in which every cell that comes closer than `margin` to
    /// an obstacle cell is itself marked as obstacle. Points free in the
    /// result have clearance of at least `margin` from original obstacles.
    pub fn inflate(&self, margin: f64) -> GridMap {
        if margin <= 0.0 {
            return self.clone();
        }
        let reach = margin.ceil() as isize;
        let mut cells = self.cells.clone();
        for row in 0..self.height as isize {
            for col in 0..self.width as isize {
                if !self.cells[row as usize * self.width + col as usize] {
                    continue;
                }
                for dr in -reach..=reach {
                    for dc in -reach..=reach {
                        let (r, c) = (row + dr, col + dc);
                        if r < 0 || c < 0 || r >= self.height as isize || c >= self.width as isize {
                            continue;
                        }
                        // gap between the two unit squares
                        let gx = (dc.abs() - 1).max(0) as f64;
                        let gy = (dr.abs() - 1).max(0) as f64;
                        if gx.hypot(gy) < margin {
                            cells[r as usize * self.width + c as usize] = true;
                        }
                    }
                }
            }
        }
        GridMap::new(self.width, self.height, cells)
    }
}

/// Parses a map file's contents.
pub fn load_map(text: &str) -> Result<GridMap, MapError> {
    GridMap::parse(text)
}
