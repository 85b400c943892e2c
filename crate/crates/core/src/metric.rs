//! Space-agnostic metric primitives: distance dispatch, greedy separated
//! nets, greedy covers and open-ball queries.
//!
//! Nets are greedy in input order; the order is part of the
//! reproducibility contract. Ball membership is strict (`d < r`), net
//! separation is `d ≥ ε`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::index::CellIndex;
use crate::point::{common_space, Point, Space};
use crate::spaces::{grushin, heisenberg};

/// Distance on raw coordinates of a known space.
#[inline]
pub(crate) fn dist_raw(space: Space, a: &[f64], b: &[f64]) -> f64 {
    match space {
        Space::Euclidean(_) | Space::Carpet => {
            let mut s = 0.0;
            for (x, y) in a.iter().zip(b) {
                let d = x - y;
                s += d * d;
            }
            s.sqrt()
        }
        Space::Heisenberg(_) => heisenberg::dist_raw(a, b),
        Space::Grushin => grushin::core_raw(a, b),
    }
}

#[inline]
pub(crate) fn dist_unchecked(p: &Point, q: &Point) -> f64 {
    dist_raw(p.space(), p.coords(), q.coords())
}

/// Distance between two points of the same space.
///
/// Grushin points use the bracket core, which is comparable to the
/// Carnot–Carathéodory distance but is not itself a metric.
pub fn distance(p: &Point, q: &Point) -> Result<f64> {
    p.check_space(q)?;
    Ok(dist_unchecked(p, q))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Ball> {
        if !(radius > 0.0) {
            return Err(invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Ball { center, radius })
    }

    pub fn contains(&self, p: &Point) -> Result<bool> {
        Ok(distance(&self.center, p)? < self.radius)
    }
}

/// Link from a refined net to the coarser net whose centers it extends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParentLink {
    pub epsilon: f64,
    /// Number of leading centers inherited from the parent.
    pub len: usize,
}

/// An ε-separated set of sample points that covers the sample at radius ε.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub epsilon: f64,
    pub centers: Vec<Point>,
    /// Position of each center in the sample it was built from.
    pub sample_ids: Vec<usize>,
    pub covering_radius: f64,
    pub parent: Option<ParentLink>,
}

impl Net {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn space(&self) -> Option<Space> {
        self.centers.first().map(Point::space)
    }

    /// Nearest center (lowest index on ties) for every sample point, among
    /// centers at distance `< ε`. Points with no such center get `None`.
    pub fn assign(&self, points: &[Point]) -> Vec<Option<usize>> {
        let Some(space) = self.space() else {
            return vec![None; points.len()];
        };
        let idx = CellIndex::from_points(space, self.epsilon, &self.centers);
        points
            .par_iter()
            .map(|p| {
                let mut best: Option<(f64, usize)> = None;
                idx.scan(p, |id| {
                    let id = id as usize;
                    let d = dist_unchecked(p, &self.centers[id]);
                    if d < self.epsilon {
                        match best {
                            Some((bd, bi)) if bd < d || (bd == d && bi < id) => {}
                            _ => best = Some((d, id)),
                        }
                    }
                    true
                });
                best.map(|(_, i)| i)
            })
            .collect()
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value: v,
            interval: "(0, ∞)".into(),
        })
    }
}

/// Greedy maximal ε-separated subset of `points`, scanning in input order.
///
/// With `seed`, the seed's centers are kept as a prefix and extended; the
/// seed must have been built at a scale `≥ eps` from the same sample.
pub fn maximal_separated_net(points: &[Point], eps: f64, seed: Option<&Net>) -> Result<Net> {
    let space = common_space(points)?;
    check_positive("eps", eps)?;
    let mut index = CellIndex::new(space, eps);
    let mut centers = Vec::new();
    let mut sample_ids = Vec::new();
    let mut taken = vec![false; points.len()];
    let mut parent = None;
    if let Some(seed) = seed {
        if seed.epsilon < eps {
            return Err(invalid(format!(
                "seed net scale {} is finer than requested {eps}",
                seed.epsilon
            )));
        }
        if seed.space().is_some_and(|s| s != space) {
            return Err(Error::SpaceMismatch {
                left: seed.space().unwrap(),
                right: space,
            });
        }
        for (c, &sid) in seed.centers.iter().zip(&seed.sample_ids) {
            index.insert(centers.len() as u32, c);
            centers.push(c.clone());
            sample_ids.push(sid);
            if sid < taken.len() {
                taken[sid] = true;
            }
        }
        parent = Some(ParentLink {
            epsilon: seed.epsilon,
            len: seed.len(),
        });
    }
    for (i, p) in points.iter().enumerate() {
        if taken[i] {
            continue;
        }
        let mut blocked = false;
        index.scan(p, |id| {
            blocked = dist_unchecked(p, &centers[id as usize]) < eps;
            !blocked
        });
        if !blocked {
            index.insert(centers.len() as u32, p);
            centers.push(p.clone());
            sample_ids.push(i);
        }
    }
    Ok(Net {
        epsilon: eps,
        centers,
        sample_ids,
        covering_radius: eps,
        parent,
    })
}

/// Nested nets at the given decreasing scales; level `k+1` extends level `k`.
pub fn nested_nets(points: &[Point], scales: &[f64]) -> Result<Vec<Net>> {
    if scales.windows(2).any(|w| w[1] > w[0]) {
        return Err(invalid("nested net scales must be non-increasing"));
    }
    let mut nets: Vec<Net> = Vec::with_capacity(scales.len());
    for &eps in scales {
        let net = maximal_separated_net(points, eps, nets.last())?;
        nets.push(net);
    }
    Ok(nets)
}

/// A cover of a sample by open balls of a common radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cover {
    pub radius: f64,
    pub count: usize,
    pub centers: Vec<Point>,
}

impl Cover {
    pub fn balls(&self) -> impl Iterator<Item = Ball> + '_ {
        self.centers.iter().map(|c| Ball {
            center: c.clone(),
            radius: self.radius,
        })
    }
}

/// Cover of `points` by open balls of radius `r` centered at an
/// `r`-separated greedy net. Every point lies within `< r` of a center.
pub fn greedy_cover_count(points: &[Point], r: f64) -> Result<Cover> {
    check_positive("r", r)?;
    let net = maximal_separated_net(points, r, None)?;
    Ok(Cover {
        radius: r,
        count: net.len(),
        centers: net.centers,
    })
}

/// Points of the sample strictly inside `B(center, r)`, in sample order.
pub fn ball_members(points: &[Point], center: &Point, r: f64) -> Result<Vec<Point>> {
    Ok(ball_member_ids(points, center, r)?
        .into_iter()
        .map(|i| points[i].clone())
        .collect())
}

pub fn ball_member_ids(points: &[Point], center: &Point, r: f64) -> Result<Vec<usize>> {
    for p in points {
        center.check_space(p)?;
    }
    if !(r > 0.0) {
        return Ok(Vec::new());
    }
    Ok(points
        .iter()
        .enumerate()
        .filter(|(_, p)| dist_unchecked(center, p) < r)
        .map(|(i, _)| i)
        .collect())
}

/// Lower estimate of the sample diameter: the largest distance seen from up
/// to `anchors` evenly spaced sample points. Exact when `anchors ≥ n`.
pub fn diameter_estimate(points: &[Point], anchors: usize) -> Result<f64> {
    common_space(points)?;
    let n = points.len();
    let stride = n.div_ceil(anchors.max(1)).max(1);
    let ids: Vec<usize> = (0..n).step_by(stride).collect();
    Ok(ids
        .par_iter()
        .map(|&i| {
            points
                .iter()
                .map(|q| dist_unchecked(&points[i], q))
                .fold(0.0f64, f64::max)
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(0.0, f64::max))
}

/// Median nearest-neighbour distance over up to `probes` evenly spaced
/// sample points. Zero for fewer than two distinct points.
pub fn sample_resolution(points: &[Point], probes: usize) -> Result<f64> {
    common_space(points)?;
    let n = points.len();
    if n < 2 {
        return Ok(0.0);
    }
    let stride = n.div_ceil(probes.max(1)).max(1);
    let ids: Vec<usize> = (0..n).step_by(stride).collect();
    let mut nn: Vec<f64> = ids
        .par_iter()
        .map(|&i| {
            points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| dist_unchecked(&points[i], q))
                .filter(|d| *d > 0.0)
                .fold(f64::INFINITY, f64::min)
        })
        .filter(|d| d.is_finite())
        .collect();
    if nn.is_empty() {
        return Ok(0.0);
    }
    nn.sort_by(f64::total_cmp);
    Ok(nn[nn.len() / 2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> Vec<Point> {
        xs.iter().map(|&x| Point::line(x)).collect()
    }

    fn xs(net: &Net) -> Vec<f64> {
        net.centers.iter().map(|c| c.coords()[0]).collect()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(&Point::plane(0.0, 0.0), &Point::plane(3.0, 4.0)).unwrap(), 5.0);
        let p = Point::h1(0.3, -1.0, 2.0);
        assert_eq!(distance(&p, &p).unwrap(), 0.0);
        assert_eq!(
            distance(&Point::h1(0.0, 0.0, 0.0), &Point::h1(0.0, 0.0, 1.0)).unwrap(),
            1.0
        );
        assert!(matches!(
            distance(&Point::plane(0.0, 0.0), &Point::h1(0.0, 0.0, 0.0)),
            Err(Error::SpaceMismatch { .. })
        ));
    }

    #[test]
    fn greedy_net_hand_simulations() {
        let net = maximal_separated_net(&line(&[0.0, 0.4, 1.0]), 0.5, None).unwrap();
        assert_eq!(xs(&net), vec![0.0, 1.0]);
        let net = maximal_separated_net(&line(&[0.0, 0.25, 0.5, 0.75, 1.0]), 0.3, None).unwrap();
        assert_eq!(xs(&net), vec![0.0, 0.5, 1.0]);
        let net = maximal_separated_net(&line(&[0.7, 0.0, 1.0]), 5.0, None).unwrap();
        assert_eq!(xs(&net), vec![0.7]);
        assert!(matches!(
            maximal_separated_net(&[], 1.0, None),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn nested_nets_keep_prefix() {
        let pts: Vec<Point> = (0..200).map(|i| Point::line((i as f64 * 0.61803).fract())).collect();
        let nets = nested_nets(&pts, &[0.5, 0.25, 0.125, 0.01]).unwrap();
        for w in nets.windows(2) {
            assert_eq!(&w[1].centers[..w[0].len()], &w[0].centers[..]);
            assert_eq!(w[1].parent.unwrap().len, w[0].len());
        }
        assert!(maximal_separated_net(&pts, 0.5, Some(&nets[3])).is_err());
    }

    #[test]
    fn cover_examples() {
        assert_eq!(greedy_cover_count(&line(&[0.3]), 0.01).unwrap().count, 1);
        assert_eq!(greedy_cover_count(&line(&[0.0, 10.0]), 1.0).unwrap().count, 2);
        let pts: Vec<Point> = (0..=100).map(|i| Point::line(i as f64 / 100.0)).collect();
        let c = greedy_cover_count(&pts, 0.25).unwrap();
        assert!((2..=5).contains(&c.count));
        assert!(c.count as f64 * 0.25 <= 1.25);
        assert!(greedy_cover_count(&pts, 0.0).is_err());
        assert!(greedy_cover_count(&pts, -1.0).is_err());
    }

    #[test]
    fn greedy_counts_can_invert_for_close_radii() {
        // Greedy order lets a radius-1 net pick (1.2, 0), which then blocks
        // two points that a radius-1.5 net keeps.
        let pts = vec![
            Point::plane(0.0, 0.0),
            Point::plane(1.2, 0.0),
            Point::plane(1.5, 0.9),
            Point::plane(1.5, -0.9),
        ];
        assert_eq!(greedy_cover_count(&pts, 1.0).unwrap().count, 2);
        assert_eq!(greedy_cover_count(&pts, 1.5).unwrap().count, 3);
    }

    #[test]
    fn ball_member_examples() {
        let pts = line(&[0.0, 1.0, 2.0]);
        assert_eq!(ball_members(&pts, &Point::line(1.0), 1.5).unwrap(), pts);
        assert_eq!(ball_members(&pts, &Point::line(1.0), 100.0).unwrap(), pts);
        assert_eq!(ball_members(&pts, &Point::line(1.0), 1e-9).unwrap(), line(&[1.0]));
        assert!(ball_members(&pts, &Point::line(0.5), 1e-9).unwrap().is_empty());
        // open ball excludes the boundary
        assert_eq!(ball_members(&pts, &Point::line(1.0), 1.0).unwrap(), line(&[1.0]));
        assert!(ball_members(&pts, &Point::plane(0.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn resolution_and_diameter() {
        let pts: Vec<Point> = (0..=10).map(|i| Point::line(i as f64 / 10.0)).collect();
        assert!((diameter_estimate(&pts, 100).unwrap() - 1.0).abs() < 1e-15);
        assert!((sample_resolution(&pts, 100).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(sample_resolution(&line(&[2.0]), 10).unwrap(), 0.0);
    }

    fn planar_sample() -> impl Strategy<Value = Vec<Point>> {
        prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..150)
            .prop_map(|v| v.into_iter().map(|(x, y)| Point::plane(x, y)).collect())
    }

    fn heis_sample() -> impl Strategy<Value = Vec<Point>> {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 1..150)
            .prop_map(|v| v.into_iter().map(|(x, y, t)| Point::h1(x, y, t)).collect())
    }

    fn check_net(pts: &[Point], eps: f64) -> std::result::Result<(), TestCaseError> {
        let net = maximal_separated_net(pts, eps, None).unwrap();
        for (i, a) in net.centers.iter().enumerate() {
            for b in &net.centers[i + 1..] {
                prop_assert!(distance(a, b).unwrap() >= eps);
            }
        }
        for p in pts {
            let m = net
                .centers
                .iter()
                .map(|c| distance(p, c).unwrap())
                .fold(f64::INFINITY, f64::min);
            prop_assert!(m <= eps);
        }
        let again = maximal_separated_net(pts, eps, None).unwrap();
        prop_assert_eq!(net, again);
        Ok(())
    }

    proptest! {
        #[test]
        fn net_invariants_euclidean(pts in planar_sample(), eps in 0.01..0.8f64) {
            check_net(&pts, eps)?;
        }

        #[test]
        fn net_invariants_heisenberg(pts in heis_sample(), eps in 0.01..1.0f64) {
            check_net(&pts, eps)?;
        }

        #[test]
        fn cover_soundness_and_monotonicity(pts in planar_sample(), r in 0.01..0.4f64, k in 2.0..6.0f64) {
            let small = greedy_cover_count(&pts, r).unwrap();
            let large = greedy_cover_count(&pts, k * r).unwrap();
            for p in &pts {
                prop_assert!(small.balls().any(|b| b.contains(p).unwrap()));
            }
            prop_assert!(small.count >= large.count);
        }

        #[test]
        fn triangle_inequality(a in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
                               b in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
                               c in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)) {
            for make in [|p: (f64, f64, f64)| Point::euclidean(&[p.0, p.1, p.2]),
                         |p: (f64, f64, f64)| Point::h1(p.0, p.1, p.2)] {
                let (p, q, r) = (make(a), make(b), make(c));
                let pq = distance(&p, &q).unwrap();
                prop_assert_eq!(pq, distance(&q, &p).unwrap());
                let bound = distance(&p, &r).unwrap() + distance(&r, &q).unwrap();
                prop_assert!(pq <= bound * (1.0 + 1e-9));
            }
        }
    }
}
