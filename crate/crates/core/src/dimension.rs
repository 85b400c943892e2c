//! Box-counting dimension and even-coverability audits.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::index::CellIndex;
use crate::metric::{diameter_estimate, dist_unchecked, greedy_cover_count, maximal_separated_net, sample_resolution};
use crate::point::{common_space, Point, Space};

/// Anchors used for diameter estimates and probes for the resolution.
const DIAMETER_ANCHORS: usize = 512;
const RESOLUTION_PROBES: usize = 2000;

/// Box-counting slope with its regression diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub value: f64,
    pub scale_window: (f64, f64),
    /// Root-mean-square residual of the log-log fit; `+∞` when degenerate.
    pub slope_residual: f64,
    pub point_count: usize,
    /// `value ± 2·(standard error of the slope)`.
    pub confidence_band: (f64, f64),
    /// `(r, N(r))` rows, `r` decreasing.
    pub counts: Vec<(f64, usize)>,
    pub degenerate: bool,
    pub label: String,
}

/// Geometric grid of `k ≥ 2` radii from `r_max` down to `r_min`.
pub fn geometric_grid(r_max: f64, r_min: f64, k: usize) -> Result<Vec<f64>> {
    if !(r_min > 0.0 && r_max > r_min && k >= 2) {
        return Err(invalid(format!(
            "geometric grid needs 0 < r_min < r_max and k >= 2, got [{r_min}, {r_max}], k={k}"
        )));
    }
    let ratio = (r_min / r_max).ln() / (k - 1) as f64;
    Ok((0..k).map(|i| r_max * (ratio * i as f64).exp()).collect())
}

/// Default scale window `[4·resolution, diameter/4]`, where the resolution
/// is the median nearest-neighbour distance of the sample.
pub fn default_window(points: &[Point]) -> Result<Option<(f64, f64)>> {
    let diam = diameter_estimate(points, DIAMETER_ANCHORS)?;
    let res = sample_resolution(points, RESOLUTION_PROBES)?;
    let (lo, hi) = (4.0 * res, diam / 4.0);
    Ok((lo > 0.0 && hi > lo).then_some((lo, hi)))
}

/// How `N(r)` is counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxCounter {
    /// Balls of radius `r` at a greedy `r`-separated net (any space).
    #[default]
    GreedyCover,
    /// Occupied cubes of side `r` aligned at the sample's lower corner
    /// (euclidean and carpet samples only).
    GridBoxes,
}

/// Number of occupied side-`r` cubes, aligned at the coordinatewise minimum.
pub fn occupied_boxes(points: &[Point], r: f64) -> Result<usize> {
    let space = common_space(points)?;
    if !matches!(space, Space::Euclidean(_) | Space::Carpet) {
        return Err(invalid(format!("grid boxes need a euclidean sample, got {space}")));
    }
    if !(r > 0.0) {
        return Err(invalid(format!("box side must be positive, got {r}")));
    }
    let d = space.coord_len();
    let mut lo = vec![f64::INFINITY; d];
    for p in points {
        for (l, c) in lo.iter_mut().zip(p.coords()) {
            *l = l.min(*c);
        }
    }
    let mut seen = HashSet::new();
    for p in points {
        let key: Vec<i64> = p
            .coords()
            .iter()
            .zip(&lo)
            .map(|(c, l)| ((c - l) / r).floor() as i64)
            .collect();
        seen.insert(key);
    }
    Ok(seen.len())
}

/// Least-squares slope of `log N(r)` against `log(1/r)` over `r_grid`, with
/// `N(r)` from [`greedy_cover_count`].
pub fn box_dimension(points: &[Point], r_grid: &[f64]) -> Result<DimensionEstimate> {
    box_dimension_with(points, r_grid, BoxCounter::GreedyCover)
}

pub fn box_dimension_with(
    points: &[Point],
    r_grid: &[f64],
    counter: BoxCounter,
) -> Result<DimensionEstimate> {
    common_space(points)?;
    if r_grid.len() < 2 {
        return Err(invalid("box dimension needs at least two scales"));
    }
    if r_grid.windows(2).any(|w| !(w[1] < w[0])) || r_grid.iter().any(|r| !(*r > 0.0)) {
        return Err(invalid("box dimension scales must be positive and strictly decreasing"));
    }
    let counts = r_grid
        .iter()
        .map(|&r| {
            let n = match counter {
                BoxCounter::GreedyCover => greedy_cover_count(points, r)?.count,
                BoxCounter::GridBoxes => occupied_boxes(points, r)?,
            };
            Ok((r, n))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(fit(points.len(), counts))
}

/// [`box_dimension`] on `k` geometric scales spanning the default window.
/// A sample with no usable window (a single point, say) is reported as a
/// degenerate estimate of 0.
pub fn box_dimension_auto(points: &[Point], k: usize) -> Result<DimensionEstimate> {
    box_dimension_auto_with(points, k, BoxCounter::GreedyCover)
}

pub fn box_dimension_auto_with(
    points: &[Point],
    k: usize,
    counter: BoxCounter,
) -> Result<DimensionEstimate> {
    match default_window(points)? {
        Some((lo, hi)) => box_dimension_with(points, &geometric_grid(hi, lo, k)?, counter),
        None => {
            let r = diameter_estimate(points, DIAMETER_ANCHORS)?.max(1.0);
            box_dimension_with(points, &[2.0 * r, r], counter)
        }
    }
}

fn fit(point_count: usize, counts: Vec<(f64, usize)>) -> DimensionEstimate {
    let xs: Vec<f64> = counts.iter().map(|(r, _)| -r.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|(_, n)| (*n as f64).ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let window = (counts.last().unwrap().0, counts[0].0);
    let degenerate = counts.iter().all(|c| c.1 == counts[0].1);
    if degenerate {
        return DimensionEstimate {
            value: 0.0,
            scale_window: window,
            slope_residual: f64::INFINITY,
            point_count,
            confidence_band: (0.0, 0.0),
            counts,
            degenerate: true,
            label: "box proxy".into(),
        };
    }
    let slope = sxy / sxx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let rms = (sse / m).sqrt();
    let se = if xs.len() > 2 {
        (sse / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let value = slope.max(0.0);
    DimensionEstimate {
        value,
        scale_window: window,
        slope_residual: rms,
        point_count,
        confidence_band: ((slope - 2.0 * se).max(0.0), (slope + 2.0 * se).max(0.0)),
        counts,
        degenerate: false,
        label: "box proxy".into(),
    }
}

/// Outcome of the even-coverability audit at one scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverabilityReport {
    pub eps: f64,
    pub sigma: f64,
    pub t_dim: f64,
    pub cover_size: usize,
    /// Largest cover radius (all radii equal `eps`).
    pub sup_radius: f64,
    /// `Σ r_k^t` over the cover.
    pub sum_r_t: f64,
    /// `sup_x #{k : x ∈ B(x_k, σ r_k)}` over the sample.
    pub max_overlap: usize,
}

/// Cover the sample by `eps`-balls at a maximal `eps`-separated net and
/// report the radius bound, the `t`-sum and the `σ`-dilated overlap.
pub fn even_coverability_audit(
    points: &[Point],
    t_dim: f64,
    sigma: f64,
    eps: f64,
) -> Result<CoverabilityReport> {
    let space = common_space(points)?;
    if !(sigma >= 1.0) {
        return Err(invalid(format!("sigma must be >= 1, got {sigma}")));
    }
    if !(t_dim >= 0.0) {
        return Err(invalid(format!("t_dim must be >= 0, got {t_dim}")));
    }
    let net = maximal_separated_net(points, eps, None)?;
    let reach = sigma * eps;
    let idx = CellIndex::from_points(space, reach, &net.centers);
    let max_overlap = points
        .iter()
        .map(|p| {
            let mut k = 0;
            idx.scan(p, |id| {
                if dist_unchecked(p, &net.centers[id as usize]) < reach {
                    k += 1;
                }
                true
            });
            k
        })
        .max()
        .unwrap_or(0);
    Ok(CoverabilityReport {
        eps,
        sigma,
        t_dim,
        cover_size: net.len(),
        sup_radius: eps,
        sum_r_t: net.len() as f64 * eps.powf(t_dim),
        max_overlap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_is_degenerate_zero() {
        let e = box_dimension_auto(&[Point::plane(0.3, 0.3)], 8).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.degenerate);
        assert_eq!(e.slope_residual, f64::INFINITY);
    }

    #[test]
    fn grid_validation() {
        let pts = [Point::line(0.0), Point::line(1.0)];
        assert!(box_dimension(&pts, &[0.5]).is_err());
        assert!(box_dimension(&pts, &[0.1, 0.5]).is_err());
        assert!(geometric_grid(1.0, 2.0, 4).is_err());
        let g = geometric_grid(1.0, 0.01, 3).unwrap();
        assert!((g[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn segment_has_dimension_one() {
        let pts: Vec<Point> = (0..=2000).map(|i| Point::line(i as f64 / 2000.0)).collect();
        let e = box_dimension_auto(&pts, 10).unwrap();
        assert!((e.value - 1.0).abs() < 0.05, "{e:?}");
        assert!(e.scale_window.0 < e.scale_window.1);
    }

    #[test]
    fn occupied_box_counts() {
        let pts: Vec<Point> = (0..10).map(|i| Point::plane(i as f64 / 10.0, 0.0)).collect();
        assert_eq!(occupied_boxes(&pts, 0.5).unwrap(), 2);
        assert_eq!(occupied_boxes(&pts, 0.25).unwrap(), 4);
        assert!(occupied_boxes(&[Point::h1(0.0, 0.0, 0.0)], 0.1).is_err());
    }

    #[test]
    fn coverability_examples() {
        let one = even_coverability_audit(&[Point::line(0.2)], 1.0, 2.0, 0.1).unwrap();
        assert_eq!((one.cover_size, one.max_overlap), (1, 1));
        let pts: Vec<Point> = (0..=1000).map(|i| Point::line(i as f64 / 1000.0)).collect();
        let r = even_coverability_audit(&pts, 1.0, 2.0, 0.1).unwrap();
        assert!(r.sum_r_t <= 2.2, "{r:?}");
        assert!(r.max_overlap <= 5, "{r:?}");
        assert!(even_coverability_audit(&pts, 1.0, 0.5, 0.1).is_err());
    }
}
