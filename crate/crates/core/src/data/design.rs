use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::distance::{InputProvenance, PhenotypeInputSet};
use crate::error::{Error, Result};

/// Largest dimension for which the full three-level grid is enumerated.
const MAX_FACTORIAL_DIMS: usize = 12;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Appends candidates to `chosen` one at a time, always taking the one
/// farthest from everything chosen so far (first candidate wins ties).
fn greedy_maximin(chosen: &mut Vec<Vec<f64>>, mut candidates: Vec<Vec<f64>>, target: usize) {
    let mut nearest: Vec<f64> = candidates
        .iter()
        .map(|c| chosen.iter().map(|s| sq_dist(c, s)).fold(f64::INFINITY, f64::min))
        .collect();
    while chosen.len() < target && !candidates.is_empty() {
        let mut pick = 0;
        for i in 1..candidates.len() {
            if nearest[i] > nearest[pick] {
                pick = i;
            }
        }
        let point = candidates.remove(pick);
        nearest.remove(pick);
        for (c, n) in candidates.iter().zip(nearest.iter_mut()) {
            *n = n.min(sq_dist(c, &point));
        }
        chosen.push(point);
    }
}

/// Three-level design on [0, 1]^p with `size` distinct points: the center,
/// the 2p axial points, then two-level corners and finally the remaining
/// {0, 0.5, 1} grid points, each stage filled by greedy maximin selection.
pub fn gen_factorial(p: usize, size: usize) -> Result<PhenotypeInputSet> {
    if p == 0 {
        return Err(Error::InvalidDesign("dimension must be at least 1".into()));
    }
    if p > MAX_FACTORIAL_DIMS {
        return Err(Error::InvalidDesign(format!("factorial designs support at most {MAX_FACTORIAL_DIMS} dimensions")));
    }
    let grid = 3usize.pow(p as u32);
    if size < 2 * p + 1 || size > grid {
        return Err(Error::InvalidDesign(format!(
            "size {size} outside [{}, {grid}] for dimension {p}",
            2 * p + 1
        )));
    }
    let center = vec![0.5; p];
    let mut chosen = vec![center.clone()];
    for k in 0..p {
        for level in [0.0, 1.0] {
            let mut a = center.clone();
            a[k] = level;
            chosen.push(a);
        }
    }
    let corners: Vec<Vec<f64>> = (0..1usize << p)
        .map(|bits| (0..p).map(|k| ((bits >> k) & 1) as f64).collect())
        .collect();
    greedy_maximin(&mut chosen, corners, size);
    if chosen.len() < size {
        let rest: Vec<Vec<f64>> = (0..grid)
            .map(|mut code| {
                (0..p)
                    .map(|_| {
                        let level = code % 3;
                        code /= 3;
                        level as f64 * 0.5
                    })
                    .collect::<Vec<f64>>()
            })
            .filter(|pt| !chosen.contains(pt))
            .collect();
        greedy_maximin(&mut chosen, rest, size);
    }
    let rows = DMatrix::from_fn(size, p, |r, c| chosen[r][c]);
    PhenotypeInputSet::new(rows, InputProvenance::Factorial)
}

/// Latin hypercube sample of `size` points in [0, 1]^p: every column has
/// exactly one point in each of the `size` equal strata.
pub fn gen_lhs<R: Rng + ?Sized>(p: usize, size: usize, rng: &mut R) -> Result<PhenotypeInputSet> {
    if p == 0 || size == 0 {
        return Err(Error::InvalidDesign("dimension and size must be at least 1".into()));
    }
    let mut rows = DMatrix::zeros(size, p);
    let mut cells: Vec<usize> = (0..size).collect();
    for c in 0..p {
        cells.shuffle(rng);
        for (r, &cell) in cells.iter().enumerate() {
            rows[(r, c)] = (cell as f64 + rng.gen::<f64>()) / size as f64;
        }
    }
    PhenotypeInputSet::new(rows, InputProvenance::Lhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn points(set: &PhenotypeInputSet) -> Vec<Vec<f64>> {
        set.rows().row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    fn assert_distinct_in_cube(pts: &[Vec<f64>]) {
        for (i, a) in pts.iter().enumerate() {
            assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
            for b in &pts[..i] {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn one_dimension_is_three_levels() {
        let mut pts = points(&gen_factorial(1, 3).unwrap());
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(pts, vec![vec![0.0], vec![0.5], vec![1.0]]);
    }

    #[test]
    fn small_design_contains_center_and_axials() {
        let pts = points(&gen_factorial(4, 15).unwrap());
        assert_eq!(pts.len(), 15);
        assert_distinct_in_cube(&pts);
        assert!(pts.contains(&vec![0.5; 4]));
        for k in 0..4 {
            for level in [0.0, 1.0] {
                let mut a = vec![0.5; 4];
                a[k] = level;
                assert!(pts.contains(&a));
            }
        }
    }

    #[test]
    fn target_sizes_are_met() {
        for (p, size) in [(4, 60), (9, 55), (9, 157), (2, 9), (3, 27)] {
            let set = gen_factorial(p, size).unwrap();
            assert_eq!((set.len(), set.dims()), (size, p));
            assert_distinct_in_cube(&points(&set));
            assert_eq!(set.provenance(), InputProvenance::Factorial);
        }
    }

    #[test]
    fn factorial_is_deterministic() {
        assert_eq!(gen_factorial(9, 55).unwrap(), gen_factorial(9, 55).unwrap());
    }

    #[test]
    fn factorial_rejects_bad_sizes() {
        assert!(gen_factorial(4, 8).is_err());
        assert!(gen_factorial(2, 10).is_err());
        assert!(gen_factorial(0, 1).is_err());
    }

    #[test]
    fn lhs_strata() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (p, size) in [(1, 1), (4, 150), (9, 55), (9, 110)] {
            let set = gen_lhs(p, size, &mut rng).unwrap();
            for col in set.rows().column_iter() {
                let mut strata: Vec<usize> = col.iter().map(|v| ((v * size as f64).floor() as usize).min(size - 1)).collect();
                strata.sort_unstable();
                assert_eq!(strata, (0..size).collect::<Vec<_>>());
                assert!(col.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn lhs_is_seeded() {
        let a = gen_lhs(4, 20, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = gen_lhs(4, 20, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let c = gen_lhs(4, 20, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(gen_lhs(0, 3, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }
}
