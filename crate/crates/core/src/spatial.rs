//! Uniform-grid bucket index for radius and nearest-neighbour queries.

use std::collections::HashMap;

use crate::workspace::Point;

/// Buckets items by the grid cell of their position. Queries visit only the
/// cells overlapping the query disc.
#[derive(Debug, Clone)]
pub struct GridIndex<T> {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<(T, Point)>>,
    len: usize,
    // occupied key extent, grown on insert and never shrunk
    lo: (i64, i64),
    hi: (i64, i64),
}

impl<T: Copy + PartialEq> GridIndex<T> {
    pub fn new(cell_size: f64) -> Self {
        assert!(cell_size > 0.0, "cell size must be positive");
        GridIndex {
            cell: cell_size,
            buckets: HashMap::new(),
            len: 0,
            lo: (i64::MAX, i64::MAX),
            hi: (i64::MIN, i64::MIN),
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn key(&self, p: Point) -> (i64, i64) {
        ((p.x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64)
    }

    pub fn insert(&mut self, item: T, p: Point) {
        let key = self.key(p);
        self.buckets.entry(key).or_default().push((item, p));
        self.len += 1;
        self.lo = (self.lo.0.min(key.0), self.lo.1.min(key.1));
        self.hi = (self.hi.0.max(key.0), self.hi.1.max(key.1));
    }

    /// Removes `item` stored at `p`. Returns whether it was present.
    pub fn remove(&mut self, item: T, p: Point) -> bool {
        let key = self.key(p);
        let Some(bucket) = self.buckets.get_mut(&key) else {
            return false;
        };
        let Some(pos) = bucket.iter().position(|(it, _)| *it == item) else {
            return false;
        };
        bucket.swap_remove(pos);
        if bucket.is_empty() {
            self.buckets.remove(&key);
        }
        self.len -= 1;
        true
    }

    /// Calls `f` for every item within `radius` of `p` (inclusive).
    pub fn for_each_within<F: FnMut(T, Point, f64)>(&self, p: Point, radius: f64, mut f: F) {
        let (lo_x, lo_y) = self.key(Point::new(p.x - radius, p.y - radius));
        let (hi_x, hi_y) = self.key(Point::new(p.x + radius, p.y + radius));
        let r2 = radius * radius;
        for cx in lo_x..=hi_x {
            for cy in lo_y..=hi_y {
                if let Some(bucket) = self.buckets.get(&(cx, cy)) {
                    for &(item, q) in bucket {
                        let d2 = (q - p).norm_sq();
                        if d2 <= r2 {
                            f(item, q, d2.sqrt());
                        }
                    }
                }
            }
        }
    }

    /// Items within `radius` of `p`, sorted by distance (ties keep insertion
    /// order within a bucket, buckets visited in key order).
    pub fn within(&self, p: Point, radius: f64) -> Vec<(T, Point, f64)> {
        let mut out = Vec::new();
        self.for_each_within(p, radius, |item, q, d| out.push((item, q, d)));
        out.sort_by(|a, b| a.2.total_cmp(&b.2));
        out
    }

    /// Nearest item to `p` satisfying `accept`, by expanding rings of cells.
    pub fn nearest_by<F: Fn(T) -> bool>(&self, p: Point, accept: F) -> Option<(T, Point, f64)> {
        if self.len == 0 {
            return None;
        }
        let (kx, ky) = self.key(p);
        let mut best: Option<(T, Point, f64)> = None;
        let max_ring = [kx - self.lo.0, self.hi.0 - kx, ky - self.lo.1, self.hi.1 - ky]
            .into_iter()
            .map(i64::abs)
            .max()
            .unwrap_or(0);
        for ring in 0..=max_ring {
            // anything in ring r is at least (r - 1) * cell away
            if let Some((_, _, d)) = best {
                if ((ring - 1) as f64) * self.cell > d {
                    break;
                }
            }
            for cx in kx - ring..=kx + ring {
                for cy in ky - ring..=ky + ring {
                    if (cx - kx).abs() != ring && (cy - ky).abs() != ring {
                        continue;
                    }
                    if let Some(bucket) = self.buckets.get(&(cx, cy)) {
                        for &(item, q) in bucket {
                            if !accept(item) {
                                continue;
                            }
                            let d = q.dist(p);
                            if best.is_none_or(|(_, _, bd)| d < bd) {
                                best = Some((item, q, d));
                            }
                        }
                    }
                }
            }
        }
        best
    }

    pub fn nearest(&self, p: Point) -> Option<(T, Point, f64)> {
        self.nearest_by(p, |_| true)
    }

    /// All stored entries, in unspecified order.
    pub fn entries(&self) -> impl Iterator<Item = (T, Point)> + '_ {
        self.buckets.values().flat_map(|b| b.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn radius_and_nearest_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut idx = GridIndex::new(1.7);
        let pts: Vec<Point> = (0..500)
            .map(|_| Point::new(rng.gen_range(0.0..40.0), rng.gen_range(0.0..40.0)))
            .collect();
        for (i, &p) in pts.iter().enumerate() {
            idx.insert(i, p);
        }
        for _ in 0..200 {
            let q = Point::new(rng.gen_range(-5.0..45.0), rng.gen_range(-5.0..45.0));
            let r = rng.gen_range(0.1..5.0);
            let mut got: Vec<usize> = idx.within(q, r).into_iter().map(|e| e.0).collect();
            let mut want: Vec<usize> = (0..pts.len()).filter(|&i| pts[i].dist(q) <= r).collect();
            got.sort();
            want.sort();
            assert_eq!(got, want);

            let (_, _, d) = idx.nearest(q).unwrap();
            let brute = pts.iter().map(|p| p.dist(q)).fold(f64::INFINITY, f64::min);
            assert_eq!(d, brute);
        }
    }

    #[test]
    fn remove_keeps_count() {
        let mut idx = GridIndex::new(1.0);
        idx.insert(1u32, Point::new(0.5, 0.5));
        idx.insert(2u32, Point::new(0.6, 0.5));
        assert!(idx.remove(1, Point::new(0.5, 0.5)));
        assert!(!idx.remove(1, Point::new(0.5, 0.5)));
        assert_eq!(idx.len(), 1);
        assert_eq!(idx.nearest(Point::ZERO).unwrap().0, 2);
    }
}
