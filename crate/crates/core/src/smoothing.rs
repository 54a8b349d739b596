//! Line-of-sight path shortcutting.

use serde::{Deserialize, Serialize};

use crate::error::PlanError;
use crate::workspace::{GridMap, Point, Segment};

/// Ordered waypoints from start to goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Point>,
}

impl Path {
    /// Builds a path, dropping consecutive duplicate waypoints.
    pub fn new(mut waypoints: Vec<Point>) -> Result<Self, PlanError> {
        waypoints.dedup();
        if waypoints.len() < 2 {
            return Err(PlanError::DegeneratePath);
        }
        Ok(Path { waypoints })
    }

    pub fn start(&self) -> Point {
        self.waypoints[0]
    }

    pub fn goal(&self) -> Point {
        *self.waypoints.last().expect("non-empty path")
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn length(&self) -> f64 {
        path_length(&self.waypoints)
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.waypoints.windows(2).map(|w| Segment::new(w[0], w[1]))
    }

    pub fn is_collision_free(&self, map: &GridMap) -> bool {
        self.segments().all(|s| map.segment_free(&s))
    }
}

/// Sum of Euclidean segment lengths.
pub fn path_length(waypoints: &[Point]) -> f64 {
    waypoints.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Greedy forward shortcutting: from the current waypoint, walk forward while
/// the straight segment stays free, jump to the last visible waypoint, and
/// repeat until the goal is reached.
pub fn smooth(path: &Path, map: &GridMap) -> Result<Path, PlanError> {
    let pts = &path.waypoints;
    if pts.len() < 2 {
        return Err(PlanError::DegeneratePath);
    }
    let mut out = vec![pts[0]];
    let mut current = 0;
    let last = pts.len() - 1;
    while current < last {
        let mut next = current + 1;
        while next < last && map.segment_free(&Segment::new(pts[current], pts[next + 1])) {
            next += 1;
        }
        out.push(pts[next]);
        current = next;
    }
    Path::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths() {
        assert_eq!(path_length(&[Point::new(0.0, 0.0), Point::new(3.0, 4.0)]), 5.0);
        assert_eq!(
            path_length(&[Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0)]),
            2.0
        );
    }

    #[test]
    fn blank_map_collapses_to_straight_line() {
        let map = GridMap::blank(20, 20);
        let pts: Vec<Point> = (0..10)
            .map(|i| Point::new(1.0 + i as f64 * 1.7, 2.0 + ((i * 7) % 5) as f64))
            .collect();
        let raw = Path::new(pts.clone()).unwrap();
        let s = smooth(&raw, &map).unwrap();
        assert_eq!(s.waypoints, vec![pts[0], pts[9]]);
        assert!((s.length() - pts[0].dist(pts[9])).abs() < 1e-12);
    }

    #[test]
    fn collinear_corridor() {
        let map = GridMap::parse("#####\n.....\n#####").unwrap();
        let raw = Path::new(vec![Point::new(0.5, 1.5), Point::new(2.5, 1.5), Point::new(4.5, 1.5)]).unwrap();
        assert_eq!(smooth(&raw, &map).unwrap().len(), 2);
    }

    #[test]
    fn keeps_corner_around_obstacle() {
        let map = GridMap::parse("...\n.#.\n...").unwrap();
        let raw = Path::new(vec![Point::new(0.5, 0.5), Point::new(0.5, 2.5), Point::new(2.5, 2.5)]).unwrap();
        let s = smooth(&raw, &map).unwrap();
        assert_eq!(s.waypoints, raw.waypoints);
    }

    #[test]
    fn degenerate_input() {
        let p = Path {
            waypoints: vec![Point::ZERO],
        };
        assert_eq!(smooth(&p, &GridMap::blank(2, 2)), Err(PlanError::DegeneratePath));
    }
}
