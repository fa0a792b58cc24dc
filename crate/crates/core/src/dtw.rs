//! Frame-level cosine distance, DTW alignment cost and the ABX delta.
//!
//! The alignment cost of two sequences is the smallest *mean* cosine distance
//! over all monotone warping paths from the first frame pair to the last,
//! using the symmetric step set {(1,1), (1,0), (0,1)}. The minimizing path is
//! found exactly by Dinkelbach iteration: each round solves a classic
//! min-sum DTW on distances shifted by the current ratio, and stops once no
//! path beats that ratio.

use thiserror::Error;

use crate::featio::FeatureMatrix;

/// Norm below which a frame is treated as having no direction.
pub const ZERO_NORM: f64 = 1e-12;

const MAX_RATIO_ROUNDS: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum DtwError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cannot align an empty sequence")]
    Empty,
}

pub type Result<T> = std::result::Result<T, DtwError>;

/// A sequence of equal-length real frames.
pub trait FrameSequence {
    type Elem: Copy + Into<f64>;

    fn frame_count(&self) -> usize;
    fn frame_dims(&self) -> usize;
    fn frame_at(&self, t: usize) -> &[Self::Elem];
}

impl FrameSequence for FeatureMatrix {
    type Elem = f32;

    fn frame_count(&self) -> usize {
        self.frames()
    }

    fn frame_dims(&self) -> usize {
        self.dims()
    }

    fn frame_at(&self, t: usize) -> &[f32] {
        self.frame(t)
    }
}

/// Row-major f64 frames, mostly for tests and callers holding
/// full-precision features.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseFrames {
    pub dims: usize,
    pub data: Vec<f64>,
}

impl DenseFrames {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dims = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == dims), "ragged rows");
        DenseFrames {
            dims,
            data: rows.concat(),
        }
    }
}

impl FrameSequence for DenseFrames {
    type Elem = f64;

    fn frame_count(&self) -> usize {
        if self.dims == 0 {
            0
        } else {
            self.data.len() / self.dims
        }
    }

    fn frame_dims(&self) -> usize {
        self.dims
    }

    fn frame_at(&self, t: usize) -> &[f64] {
        &self.data[t * self.dims..(t + 1) * self.dims]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentCost {
    /// Mean cell distance along the optimal path, in [0, 2].
    pub value: f64,
    /// Number of cells on the path.
    pub path_length: usize,
    /// Grid cells where a near-zero frame forced the fallback distance.
    pub degenerate_cells: usize,
}

fn squared_norm<T: Copy + Into<f64>>(u: &[T]) -> f64 {
    u.iter().map(|&x| {
        let x: f64 = x.into();
        x * x
    }).sum()
}

fn cosine_from_parts<T: Copy + Into<f64>, U: Copy + Into<f64>>(
    u: &[T],
    v: &[U],
    nu2: f64,
    nv2: f64,
) -> Option<f64> {
    if nu2.sqrt() < ZERO_NORM || nv2.sqrt() < ZERO_NORM {
        return None;
    }
    let dot: f64 = u.iter().zip(v).map(|(&a, &b)| a.into() * b.into()).sum();
    Some((1.0 - dot / (nu2 * nv2).sqrt()).clamp(0.0, 2.0))
}

/// `1 - u.v / (|u| |v|)`, or 1.0 when either norm is below [`ZERO_NORM`].
pub fn cosine_distance<T: Copy + Into<f64>, U: Copy + Into<f64>>(u: &[T], v: &[U]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(DtwError::DimensionMismatch(u.len(), v.len()));
    }
    Ok(cosine_from_parts(u, v, squared_norm(u), squared_norm(v)).unwrap_or(1.0))
}

struct Grid {
    rows: usize,
    cols: usize,
    dist: Vec<f64>,
    acc: Vec<f64>,
}

impl Grid {
    /// Min-sum DTW over `dist - shift`; returns the raw distance sum and the
    /// length of the backtracked path.
    fn best_path(&mut self, shift: f64) -> (f64, usize) {
        let (r, c) = (self.rows, self.cols);
        for i in 0..r {
            for j in 0..c {
                let cell = self.dist[i * c + j] - shift;
                let prev = match (i, j) {
                    (0, 0) => 0.0,
                    (0, _) => self.acc[j - 1],
                    (_, 0) => self.acc[(i - 1) * c],
                    _ => self.acc[(i - 1) * c + j - 1]
                        .min(self.acc[(i - 1) * c + j])
                        .min(self.acc[i * c + j - 1]),
                };
                self.acc[i * c + j] = prev + cell;
            }
        }

        // Backtrack from the end, preferring (1,1), then (1,0), then (0,1).
        let (mut i, mut j) = (r - 1, c - 1);
        let mut cells = vec![(i, j)];
        while (i, j) != (0, 0) {
            (i, j) = if i == 0 {
                (0, j - 1)
            } else if j == 0 {
                (i - 1, 0)
            } else {
                let diag = self.acc[(i - 1) * c + j - 1];
                let up = self.acc[(i - 1) * c + j];
                let left = self.acc[i * c + j - 1];
                if diag <= up && diag <= left {
                    (i - 1, j - 1)
                } else if up <= left {
                    (i - 1, j)
                } else {
                    (i, j - 1)
                }
            };
            cells.push((i, j));
        }
        let sum = cells.iter().rev().map(|&(i, j)| self.dist[i * c + j]).sum();
        (sum, cells.len())
    }
}

pub fn dtw_cost<A: FrameSequence, B: FrameSequence>(a: &A, b: &B) -> Result<AlignmentCost> {
    if a.frame_dims() != b.frame_dims() {
        return Err(DtwError::DimensionMismatch(a.frame_dims(), b.frame_dims()));
    }
    let (rows, cols) = (a.frame_count(), b.frame_count());
    if rows == 0 || cols == 0 || a.frame_dims() == 0 {
        return Err(DtwError::Empty);
    }

    let a_norms: Vec<f64> = (0..rows).map(|i| squared_norm(a.frame_at(i))).collect();
    let b_norms: Vec<f64> = (0..cols).map(|j| squared_norm(b.frame_at(j))).collect();
    let mut degenerate_cells = 0;
    let mut dist = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let u = a.frame_at(i);
        for j in 0..cols {
            let d = cosine_from_parts(u, b.frame_at(j), a_norms[i], b_norms[j]).unwrap_or_else(|| {
                degenerate_cells += 1;
                1.0
            });
            dist.push(d);
        }
    }

    let mut grid = Grid {
        rows,
        cols,
        dist,
        acc: vec![0.0; rows * cols],
    };
    let (sum, len) = grid.best_path(0.0);
    let (mut best_sum, mut best_len) = (sum, len);
    let mut ratio = sum / len as f64;
    for _ in 0..MAX_RATIO_ROUNDS {
        let (sum, len) = grid.best_path(ratio);
        let candidate = sum / len as f64;
        if candidate >= ratio {
            break;
        }
        (best_sum, best_len, ratio) = (sum, len, candidate);
    }

    Ok(AlignmentCost {
        value: best_sum / best_len as f64,
        path_length: best_len,
        degenerate_cells,
    })
}

/// `DTW(other, x) - DTW(target, x)`; positive when `x` sits closer to the
/// target than to the other stimulus.
pub fn delta<T, O, X>(target: &T, other: &O, x: &X) -> Result<f64>
where
    T: FrameSequence,
    O: FrameSequence,
    X: FrameSequence,
{
    Ok(dtw_cost(other, x)?.value - dtw_cost(target, x)?.value)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Minimum mean cell cost over every monotone path, by exhaustive
    /// enumeration.
    pub(crate) fn brute_force_min_mean(dist: &[Vec<f64>]) -> f64 {
        fn walk(dist: &[Vec<f64>], i: usize, j: usize, sum: f64, len: usize, best: &mut f64) {
            let (r, c) = (dist.len(), dist[0].len());
            let sum = sum + dist[i][j];
            let len = len + 1;
            if i == r - 1 && j == c - 1 {
                *best = best.min(sum / len as f64);
                return;
            }
            if i + 1 < r && j + 1 < c {
                walk(dist, i + 1, j + 1, sum, len, best);
            }
            if i + 1 < r {
                walk(dist, i + 1, j, sum, len, best);
            }
            if j + 1 < c {
                walk(dist, i, j + 1, sum, len, best);
            }
        }
        let mut best = f64::INFINITY;
        walk(dist, 0, 0, 0.0, 0, &mut best);
        best
    }

    fn naive_cosine(u: &[f64], v: &[f64]) -> f64 {
        let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
        let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        1.0 - dot / (nu * nv)
    }

    fn random_rows(rng: &mut ChaCha8Rng, t: usize, d: usize) -> Vec<Vec<f64>> {
        (0..t).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    }

    fn oracle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let dist: Vec<Vec<f64>> = a
            .iter()
            .map(|u| b.iter().map(|v| naive_cosine(u, v)).collect())
            .collect();
        brute_force_min_mean(&dist)
    }

    #[test]
    fn cosine_reference_values() {
        assert_eq!(cosine_distance(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 2.0);
        assert_eq!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(
            cosine_distance(&[1.0], &[1.0, 0.0]),
            Err(DtwError::DimensionMismatch(1, 2))
        );
    }

    #[test]
    fn single_cell_grid() {
        let a = DenseFrames::from_rows(&[vec![1.0, 0.0]]);
        let b = DenseFrames::from_rows(&[vec![0.0, 1.0]]);
        let c = dtw_cost(&a, &b).unwrap();
        assert_eq!((c.value, c.path_length), (1.0, 1));
    }

    #[test]
    fn errors() {
        let a = DenseFrames::from_rows(&[vec![1.0, 0.0]]);
        let b = DenseFrames::from_rows(&[vec![1.0, 0.0, 0.0]]);
        assert_eq!(dtw_cost(&a, &b), Err(DtwError::DimensionMismatch(2, 3)));
        let empty = DenseFrames { dims: 2, data: vec![] };
        assert_eq!(dtw_cost(&a, &empty), Err(DtwError::Empty));
    }

    #[test]
    fn zero_frames_fall_back_and_are_counted() {
        let a = DenseFrames::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]);
        let b = DenseFrames::from_rows(&[vec![1.0, 0.0]]);
        let c = dtw_cost(&a, &b).unwrap();
        assert_eq!(c.degenerate_cells, 1);
        assert_eq!(c.value, 0.5);
        assert_eq!(c.path_length, 2);
    }

    #[test]
    fn identity_alignment_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in 1..20 {
            let a = DenseFrames::from_rows(&random_rows(&mut rng, t, 5));
            let c = dtw_cost(&a, &a).unwrap();
            assert_eq!(c.value, 0.0);
            assert_eq!(c.path_length, t);
        }
    }

    #[test]
    fn matches_brute_force_on_small_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let (ta, tb, d) = (rng.gen_range(1..=6), rng.gen_range(1..=6), rng.gen_range(1..=4));
            let (ra, rb) = (random_rows(&mut rng, ta, d), random_rows(&mut rng, tb, d));
            let c = dtw_cost(&DenseFrames::from_rows(&ra), &DenseFrames::from_rows(&rb)).unwrap();
            assert!((c.value - oracle(&ra, &rb)).abs() < 1e-9);
            assert!(c.path_length >= ta.max(tb) && c.path_length < ta + tb);
        }
    }

    #[test]
    fn four_by_five_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let (ra, rb) = (random_rows(&mut rng, 4, 3), random_rows(&mut rng, 5, 3));
        let c = dtw_cost(&DenseFrames::from_rows(&ra), &DenseFrames::from_rows(&rb)).unwrap();
        assert!((c.value - oracle(&ra, &rb)).abs() < 1e-9);
    }

    #[test]
    fn delta_signs() {
        let t = DenseFrames::from_rows(&[vec![1.0, 0.1], vec![0.9, 0.2]]);
        let o = DenseFrames::from_rows(&[vec![0.1, 1.0], vec![-0.3, 0.8]]);
        let d = delta(&t, &o, &t).unwrap();
        assert_eq!(d, dtw_cost(&o, &t).unwrap().value);
        assert!(d > 0.0);
        assert_eq!(delta(&o, &t, &t).unwrap(), -d);
    }

    #[test]
    fn delta_matches_oracle_on_three_frame_triplets() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let (t, o, x) = (
                random_rows(&mut rng, 3, 3),
                random_rows(&mut rng, 3, 3),
                random_rows(&mut rng, 3, 3),
            );
            let got = delta(
                &DenseFrames::from_rows(&t),
                &DenseFrames::from_rows(&o),
                &DenseFrames::from_rows(&x),
            )
            .unwrap();
            assert!((got - (oracle(&o, &x) - oracle(&t, &x))).abs() < 1e-9);
        }
    }

    fn arb_rows(max_t: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(
            prop::collection::vec(-1.0f64..1.0, d).prop_filter("nonzero", |r| r.iter().any(|v| v.abs() > 1e-3)),
            1..=max_t,
        )
    }

    proptest! {
        #[test]
        fn symmetric(a in arb_rows(8, 3), b in arb_rows(8, 3)) {
            let (fa, fb) = (DenseFrames::from_rows(&a), DenseFrames::from_rows(&b));
            let (ab, ba) = (dtw_cost(&fa, &fb).unwrap(), dtw_cost(&fb, &fa).unwrap());
            prop_assert!((ab.value - ba.value).abs() < 1e-12);
            prop_assert!((0.0..=2.0).contains(&ab.value));
        }

        #[test]
        fn scale_invariant(a in arb_rows(6, 3), b in arb_rows(6, 3), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scale = |rows: &[Vec<f64>], rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
                rows.iter().map(|r| {
                    let s = rng.gen_range(0.01..100.0);
                    r.iter().map(|v| v * s).collect()
                }).collect()
            };
            let (sa, sb) = (scale(&a, &mut rng), scale(&b, &mut rng));
            let plain = dtw_cost(&DenseFrames::from_rows(&a), &DenseFrames::from_rows(&b)).unwrap();
            let scaled = dtw_cost(&DenseFrames::from_rows(&sa), &DenseFrames::from_rows(&sb)).unwrap();
            prop_assert!((plain.value - scaled.value).abs() < 1e-9);
        }
    }
}
