//! Bucket grids for radius queries.
//!
//! A [`CellIndex`] built for radius `r` returns, for any query point, a
//! superset of the stored points at distance `< r`. Keys come from
//! coordinates that the metric dominates:
//!
//! * Euclidean / carpet: `|Δcᵢ| ≤ d`, up to three coordinates are bucketed.
//! * ℍ¹: `|Δx| ≤ d`, and the vertical coordinate is bucketed after a shear
//!   anchored at the horizontal cell center, which keeps vertical buckets
//!   of size `O(r²)` (see [`HEIS_SLAB`]).
//! * ℍⁿ, n > 1: horizontal coordinates only.
//! * Grushin: `|Δu| ≤ core`.

use std::collections::HashMap;

use crate::point::{Point, Space};
use crate::spaces::heisenberg::omega;

/// Vertical bucket height for ℍ¹, in units of `r²`.
///
/// For `d(p,q) < r` and a horizontal anchor `c` within `1.5·√2·r` of `p`,
/// the sheared heights `s_c = t − 2ω(c, x)` differ by less than
/// `r² + 2·(1.5√2 r)·r < 5.25 r²`.
const HEIS_SLAB: f64 = 6.0;
const HEIS_REACH: f64 = 5.25;

type Key = [i64; 3];

#[derive(Clone, Copy, Debug)]
enum Scheme {
    Axis { dims: usize },
    Heis1,
}

#[derive(Clone, Debug)]
pub(crate) struct CellIndex {
    scheme: Scheme,
    cell: f64,
    slab: f64,
    buckets: HashMap<Key, Vec<u32>>,
}

#[inline]
fn cell_of(v: f64, size: f64) -> i64 {
    (v / size).floor() as i64
}

impl CellIndex {
    pub fn new(space: Space, radius: f64) -> CellIndex {
        let radius = if radius.is_finite() && radius > 0.0 {
            radius
        } else {
            f64::MAX.sqrt()
        };
        let scheme = match space {
            Space::Euclidean(d) => Scheme::Axis { dims: d.min(3) },
            Space::Carpet => Scheme::Axis { dims: 2 },
            Space::Heisenberg(1) => Scheme::Heis1,
            Space::Heisenberg(n) => Scheme::Axis { dims: (2 * n).min(3) },
            Space::Grushin => Scheme::Axis { dims: 1 },
        };
        CellIndex {
            scheme,
            cell: radius,
            slab: HEIS_SLAB * radius * radius,
            buckets: HashMap::new(),
        }
    }

    pub fn from_points(space: Space, radius: f64, points: &[Point]) -> CellIndex {
        let mut idx = CellIndex::new(space, radius);
        for (i, p) in points.iter().enumerate() {
            idx.insert(i as u32, p);
        }
        idx
    }

    fn key(&self, c: &[f64]) -> Key {
        let mut k = [0i64; 3];
        match self.scheme {
            Scheme::Axis { dims } => {
                for (slot, v) in k.iter_mut().zip(c.iter().take(dims)) {
                    *slot = cell_of(*v, self.cell);
                }
            }
            Scheme::Heis1 => {
                let (i, j) = (cell_of(c[0], self.cell), cell_of(c[1], self.cell));
                k[0] = i;
                k[1] = j;
                k[2] = cell_of(self.sheared(c, i, j), self.slab);
            }
        }
        k
    }

    #[inline]
    fn sheared(&self, c: &[f64], i: i64, j: i64) -> f64 {
        let anchor = [(i as f64 + 0.5) * self.cell, (j as f64 + 0.5) * self.cell];
        c[2] - 2.0 * omega(&anchor, &c[..2])
    }

    pub fn insert(&mut self, id: u32, p: &Point) {
        let k = self.key(p.coords());
        self.buckets.entry(k).or_default().push(id);
    }

    /// Calls `f` on every stored id that may lie within the index radius of
    /// `p`. Returning `false` from `f` stops the scan.
    pub fn scan<F: FnMut(u32) -> bool>(&self, p: &Point, mut f: F) {
        let c = p.coords();
        match self.scheme {
            Scheme::Axis { dims } => {
                let base = self.key(c);
                let mut offsets = [0i64; 3];
                let total = 3usize.pow(dims as u32);
                for code in 0..total {
                    let mut rem = code;
                    for o in offsets.iter_mut().take(dims) {
                        *o = (rem % 3) as i64 - 1;
                        rem /= 3;
                    }
                    let key = [
                        base[0] + offsets[0],
                        base[1] + offsets[1],
                        base[2] + offsets[2],
                    ];
                    if let Some(ids) = self.buckets.get(&key) {
                        for &id in ids {
                            if !f(id) {
                                return;
                            }
                        }
                    }
                }
            }
            Scheme::Heis1 => {
                let (i0, j0) = (cell_of(c[0], self.cell), cell_of(c[1], self.cell));
                let reach = HEIS_REACH * self.cell * self.cell;
                for di in -1..=1 {
                    for dj in -1..=1 {
                        let (i, j) = (i0 + di, j0 + dj);
                        let s = self.sheared(c, i, j);
                        let lo = cell_of(s - reach, self.slab);
                        let hi = cell_of(s + reach, self.slab);
                        for k in lo..=hi {
                            if let Some(ids) = self.buckets.get(&[i, j, k]) {
                                for &id in ids {
                                    if !f(id) {
                                        return;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[cfg(test)]
    /// Candidate ids in deterministic (bucket, insertion) order.
    pub fn candidates(&self, p: &Point) -> Vec<u32> {
        let mut out = Vec::new();
        self.scan(p, |id| {
            out.push(id);
            true
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::distance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Point], q: &Point, r: f64) -> Vec<u32> {
        (0..points.len() as u32)
            .filter(|&i| distance(&points[i as usize], q).unwrap() < r)
            .collect()
    }

    fn check(space: Space, gen: impl Fn(&mut ChaCha8Rng) -> Point) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Point> = (0..600).map(|_| gen(&mut rng)).collect();
        for r in [0.05, 0.2, 0.7] {
            let idx = CellIndex::from_points(space, r, &pts);
            for q in pts.iter().take(80) {
                let cand = idx.candidates(q);
                for id in brute(&pts, q, r) {
                    assert!(cand.contains(&id), "{space} r={r}: missed {id}");
                }
            }
        }
    }

    #[test]
    fn candidates_are_supersets() {
        check(Space::Euclidean(2), |r| Point::plane(r.random(), r.random()));
        check(Space::Euclidean(5), |r| {
            Point::euclidean(&(0..5).map(|_| r.random::<f64>()).collect::<Vec<_>>())
        });
        check(Space::Heisenberg(1), |r| {
            Point::h1(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-0.5..0.5))
        });
        check(Space::Heisenberg(2), |r| {
            Point::heisenberg(&[r.random(), r.random(), r.random(), r.random()], r.random()).unwrap()
        });
        check(Space::Grushin, |r| Point::grushin(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)));
    }
}
