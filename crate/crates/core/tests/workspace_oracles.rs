mod common;

use common::*;
use marrdt::{GridMap, Point, Segment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn segment_checks_agree_with_supersampling_on_dense_map() {
    let map = map("dense");
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (w, h) = (map.width() as f64, map.height() as f64);
    let mut disagreements = 0;
    for _ in 0..10_000 {
        let a = Point::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h));
        let b = Point::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h));
        let s = Segment::new(a, b);
        if map.segment_free(&s) != oracle_segment_free(&map, &s) {
            disagreements += 1;
            let c = segment_clearance(&map, &s);
            assert!(c < 0.25, "{a} -> {b}: disagreement with clearance {c}");
        }
    }
    // the tolerance band is thin; most segments must agree outright
    assert!(disagreements < 500, "{disagreements} disagreements");
}

#[test]
fn segment_through_obstacle_is_blocked() {
    let map = GridMap::parse(".....\n..#..\n.....").unwrap();
    assert!(!map.segment_free(&Segment::new(Point::new(0.5, 1.5), Point::new(4.5, 1.5))));
    assert!(map.segment_free(&Segment::new(Point::new(0.5, 0.5), Point::new(4.5, 0.5))));
}

#[test]
fn free_sampling_is_uniform_over_free_cells() {
    // 20x20 map with exactly half of the cells blocked
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cells = vec![false; 400];
    cells[..200].iter_mut().for_each(|c| *c = true);
    for i in (1..400).rev() {
        cells.swap(i, rng.gen_range(0..=i));
    }
    let map = GridMap::new(20, 20, cells.clone());
    assert_eq!(map.free_cell_count(), 200);

    let draws = 100_000;
    let mut counts = vec![0usize; 400];
    for _ in 0..draws {
        let p = map.sample_free(&mut rng).unwrap();
        assert!(oracle_free(&map, p));
        let (row, col) = (p.y.floor() as usize, p.x.floor() as usize);
        counts[row * 20 + col] += 1;
    }
    let expected = draws as f64 / 200.0;
    let stat: f64 = (0..400)
        .filter(|&i| !cells[i])
        .map(|i| (counts[i] as f64 - expected).powi(2) / expected)
        .sum();
    assert!((0..400).filter(|&i| cells[i]).all(|i| counts[i] == 0));
    let p = chi_square_p(stat, 199.0);
    assert!(p > 0.001, "chi-square {stat} on 199 dof, p = {p}");
}

#[test]
fn blocked_map_has_no_free_space() {
    let map = GridMap::parse("##\n##").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(map.sample_free(&mut rng).is_err());
}
