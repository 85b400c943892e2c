//! Foliation charts, leaf samples, covering-count regularity tables and
//! quotient distances between right cosets of the horizontal `x`-axis in ℍ¹.
//!
//! The `x`-axis is `V = {(x,0,0)}` and its vertical complement is
//! `V⊥ = {(0,y,t)}`. Every `p = (x,y,t)` splits as
//! `p = (0,y,t−2xy) * (x,0,0)` (left) and `p = (x,0,0) * (0,y,t+2xy)` (right).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metric::{dist_unchecked, greedy_cover_count, maximal_separated_net};
use crate::point::{common_space, format_f64, Point, Space};
use crate::spaces::carpet::{carpet_contains, cells_in_strip, CarpetSpec};
use crate::spaces::grushin::{grushin_bracket, GrushinBracket, DEFAULT_C1};
use crate::spaces::heisenberg::{dist_raw as heis_dist, gauge};

fn h1_coords(p: &Point) -> Result<(f64, f64, f64)> {
    if p.space() != Space::Heisenberg(1) {
        return Err(Error::SpaceMismatch {
            left: p.space(),
            right: Space::Heisenberg(1),
        });
    }
    let c = p.coords();
    Ok((c[0], c[1], c[2]))
}

/// Left splitting `p = p_{V⊥} * p_V`; returns `(p_{V⊥}, p_V)`.
pub fn project_left(p: &Point) -> Result<(Point, Point)> {
    let (x, y, t) = h1_coords(p)?;
    Ok((Point::h1(0.0, y, t - 2.0 * x * y), Point::h1(x, 0.0, 0.0)))
}

/// Right splitting `p = p_V * p^R_{V⊥}`; returns `(p_V, p^R_{V⊥})`.
pub fn project_right(p: &Point) -> Result<(Point, Point)> {
    let (x, y, t) = h1_coords(p)?;
    Ok((Point::h1(x, 0.0, 0.0), Point::h1(0.0, y, t + 2.0 * x * y)))
}

/// Which foliation a chart describes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "chart", rename_all = "snake_case")]
pub enum ChartKind {
    /// `ℝ^dim → ℝ^keep`, dropping the trailing coordinates.
    EuclideanProjection { dim: usize, keep: usize },
    /// `(x, y) ↦ x` on a carpet; leaves are vertical fibers.
    CarpetVertical { carpet: CarpetSpec, depth: usize },
    /// `π_V`: ℍ¹ → V; leaves are the vertical planes `V⊥ * a`.
    HeisLeft,
    /// `π_{V⊥}` with the euclidean metric on `V⊥` in coordinates `(y, t)`;
    /// leaves are the horizontal lines `a * V`.
    HeisLeftHorizontal,
    /// Right splitting onto the Grushin plane `(u, v) = (y, t + 2xy)`;
    /// leaves are the right cosets `V * a`.
    HeisRight,
}

impl ChartKind {
    pub fn label(&self) -> &'static str {
        match self {
            ChartKind::EuclideanProjection { .. } => "euclidean_projection",
            ChartKind::CarpetVertical { .. } => "carpet_vertical",
            ChartKind::HeisLeft => "heis_left",
            ChartKind::HeisLeftHorizontal => "heis_left_horizontal",
            ChartKind::HeisRight => "heis_right",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoliationChart {
    pub kind: ChartKind,
    pub ambient: Space,
    pub parameter_space: Space,
}

impl FoliationChart {
    pub fn new(kind: ChartKind) -> Result<FoliationChart> {
        let (ambient, parameter_space) = match &kind {
            ChartKind::EuclideanProjection { dim, keep } => {
                if *keep == 0 || keep >= dim {
                    return Err(invalid(format!("projection needs 0 < keep < dim, got {keep}, {dim}")));
                }
                (Space::Euclidean(*dim), Space::Euclidean(*keep))
            }
            ChartKind::CarpetVertical { carpet, depth } => {
                carpet.validate()?;
                if *depth == 0 || *depth > carpet.max_depth {
                    return Err(invalid(format!("carpet chart depth must be in 1..={}", carpet.max_depth)));
                }
                (Space::Carpet, Space::Euclidean(1))
            }
            ChartKind::HeisLeft => (Space::Heisenberg(1), Space::Heisenberg(1)),
            ChartKind::HeisLeftHorizontal => (Space::Heisenberg(1), Space::Euclidean(2)),
            ChartKind::HeisRight => (Space::Heisenberg(1), Space::Grushin),
        };
        Ok(FoliationChart {
            kind,
            ambient,
            parameter_space,
        })
    }

    pub fn label(&self) -> &'static str {
        self.kind.label()
    }

    /// Exponent `s` of the covering condition satisfied by the chart.
    pub fn regularity_exponent(&self) -> f64 {
        match &self.kind {
            ChartKind::EuclideanProjection { dim, keep } => (dim - keep) as f64,
            ChartKind::CarpetVertical { .. } => 1.0,
            ChartKind::HeisLeft => 3.0,
            ChartKind::HeisLeftHorizontal | ChartKind::HeisRight => 2.0,
        }
    }

    /// Largest dimension of a single leaf.
    pub fn leaf_dimension(&self) -> f64 {
        match &self.kind {
            ChartKind::HeisLeftHorizontal => 1.0,
            _ => self.regularity_exponent(),
        }
    }

    fn check_ambient(&self, p: &Point) -> Result<()> {
        let ok = p.space() == self.ambient
            || (self.ambient == Space::Carpet && p.space() == Space::Euclidean(2));
        if ok {
            Ok(())
        } else {
            Err(Error::SpaceMismatch {
                left: p.space(),
                right: self.ambient,
            })
        }
    }

    fn check_parameter(&self, a: &Point) -> Result<()> {
        if a.space() != self.parameter_space {
            return Err(Error::SpaceMismatch {
                left: a.space(),
                right: self.parameter_space,
            });
        }
        if self.kind == ChartKind::HeisLeft && (a.coords()[1] != 0.0 || a.coords()[2] != 0.0) {
            return Err(invalid("heis_left parameters lie on the x-axis (x, 0, 0)"));
        }
        Ok(())
    }

    /// The parameter `π(p)` of the leaf through `p`.
    pub fn project(&self, p: &Point) -> Result<Point> {
        self.check_ambient(p)?;
        let c = p.coords();
        Ok(match &self.kind {
            ChartKind::EuclideanProjection { keep, .. } => Point::euclidean(&c[..*keep]),
            ChartKind::CarpetVertical { .. } => Point::line(c[0]),
            ChartKind::HeisLeft => project_left(p)?.1,
            ChartKind::HeisLeftHorizontal => {
                let w = project_left(p)?.0;
                Point::plane(w.coords()[1], w.coords()[2])
            }
            ChartKind::HeisRight => {
                let w = project_right(p)?.1;
                Point::grushin(w.coords()[1], w.coords()[2])
            }
        })
    }

    /// Points of the leaf `π⁻¹(a)` over `grid`, taken once per leaf
    /// coordinate (tensor product for leaves of dimension > 1).
    pub fn leaf_sample(&self, a: &Point, grid: &[f64]) -> Result<Vec<Point>> {
        self.check_parameter(a)?;
        let c = a.coords();
        Ok(match &self.kind {
            ChartKind::EuclideanProjection { dim, keep } => tensor(grid, dim - keep)
                .map(|rest| {
                    let mut v = c.to_vec();
                    v.extend(rest);
                    Point::euclidean(&v)
                })
                .collect(),
            ChartKind::CarpetVertical { carpet, depth } => {
                let x = c[0];
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::OutsideUnitSquare { x, y: 0.0 });
                }
                let mut out = Vec::new();
                for &y in grid {
                    let p = Point::carpet(x, y, None);
                    if carpet_contains(carpet, &p, *depth)? {
                        out.push(p);
                    }
                }
                out
            }
            ChartKind::HeisLeft => {
                // w * a with w = (0, y, t) ∈ V⊥ and a = (x0, 0, 0)
                let x0 = c[0];
                tensor(grid, 2)
                    .map(|w| Point::h1(x0, w[0], w[1] + 2.0 * w[0] * x0))
                    .collect()
            }
            ChartKind::HeisLeftHorizontal => {
                // (0, y, τ) * (x, 0, 0)
                let (y, tau) = (c[0], c[1]);
                grid.iter().map(|&x| Point::h1(x, y, tau + 2.0 * x * y)).collect()
            }
            ChartKind::HeisRight => {
                // (x, 0, 0) * (0, y, τ)
                let (y, tau) = (c[0], c[1]);
                grid.iter().map(|&x| Point::h1(x, y, tau - 2.0 * x * y)).collect()
            }
        })
    }
}

/// All `k`-tuples over `grid`.
fn tensor(grid: &[f64], k: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
    let total = grid.len().pow(k as u32);
    (0..total).map(move |mut i| {
        (0..k)
            .map(|_| {
                let v = grid[i % grid.len()];
                i /= grid.len();
                v
            })
            .collect()
    })
}

/// Convenience wrapper for [`FoliationChart::leaf_sample`].
pub fn leaf_sample(chart: &FoliationChart, a: &Point, param_grid: &[f64]) -> Result<Vec<Point>> {
    chart.leaf_sample(a, param_grid)
}

/// A compact set, given by points or analytically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KSpec {
    /// `{p ∈ ℍ¹ : ‖p‖ ≤ 1}`.
    KoranyiUnitBall,
    /// `[0,1]^dim`.
    UnitCube { dim: usize },
    /// The carpet of a carpet chart.
    Carpet,
}

/// The compact set `K` of a regularity table.
#[derive(Clone, Debug, PartialEq)]
pub enum KSample {
    /// A fixed point sample, used at every scale.
    Points { id: String, points: Vec<Point> },
    /// An analytic set, sampled afresh at every scale on a lattice of
    /// spacing proportional to the scale, restricted to the preimage of
    /// each parameter ball.
    Analytic(KSpec),
}

impl KSample {
    pub fn id(&self) -> String {
        match self {
            KSample::Points { id, .. } => id.clone(),
            KSample::Analytic(KSpec::KoranyiUnitBall) => "koranyi_unit_ball".into(),
            KSample::Analytic(KSpec::UnitCube { dim }) => format!("unit_cube_{dim}"),
            KSample::Analytic(KSpec::Carpet) => "carpet".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityOptions {
    /// At most this many parameter-ball centers per scale, evenly strided
    /// through the parameter net.
    pub max_centers: usize,
    /// Lattice spacing of analytic samples in units of `r` (and of `r²`
    /// along the Heisenberg center).
    pub spacing: f64,
    /// Size of the coarse `K` sample used to build parameter nets for
    /// analytic sets.
    pub samples: usize,
}

impl Default for RegularityOptions {
    fn default() -> Self {
        RegularityOptions {
            max_centers: 5,
            spacing: 0.9,
            samples: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityRow {
    pub r: f64,
    /// Worst count over the audited parameter balls.
    pub n: usize,
    /// `N(r)·r^s`.
    pub normalized: f64,
    pub centers: usize,
    pub preimage_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityTable {
    pub chart: String,
    pub s: f64,
    pub k_id: String,
    pub options: RegularityOptions,
    pub rows: Vec<RegularityRow>,
    pub notes: Vec<String>,
}

impl RegularityTable {
    /// `max/min` of `N(r)·r^s` over the rows.
    pub fn window(&self) -> f64 {
        let v: Vec<f64> = self.rows.iter().map(|r| r.normalized).collect();
        let max = v.iter().cloned().fold(0.0, f64::max);
        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        if v.is_empty() {
            1.0
        } else {
            max / min
        }
    }

    pub fn max_normalized(&self) -> f64 {
        self.rows.iter().map(|r| r.normalized).fold(0.0, f64::max)
    }

    /// CSV with columns `r,N,N_r_pow_s,chart,s,K_id`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "N", "N_r_pow_s", "chart", "s", "K_id"])?;
        for row in &self.rows {
            w.write_record([
                format_f64(row.r),
                row.n.to_string(),
                format_f64(row.normalized),
                self.chart.clone(),
                format_f64(self.s),
                self.k_id.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `count` indices spread evenly over `0..len`.
fn strided(len: usize, count: usize) -> Vec<usize> {
    if len <= count || count == 0 {
        return (0..len).collect();
    }
    if count == 1 {
        return vec![len / 2];
    }
    let mut v: Vec<usize> = (0..count)
        .map(|i| ((i as f64) * (len - 1) as f64 / (count - 1) as f64).round() as usize)
        .collect();
    v.dedup();
    v
}

/// Midpoints `lo + (i + ½)h` strictly inside `(lo, hi)`.
fn anchored(lo: f64, hi: f64, h: f64) -> impl Iterator<Item = f64> {
    let n = ((hi - lo) / h).ceil().max(0.0) as usize;
    (0..n).map(move |i| lo + (i as f64 + 0.5) * h).filter(move |v| *v < hi)
}

/// Midpoints `(k + ½)h` of the global lattice inside `[lo, hi]`.
fn global(lo: f64, hi: f64, h: f64) -> impl Iterator<Item = f64> {
    let k0 = (lo / h - 0.5).ceil() as i64;
    let k1 = (hi / h - 0.5).floor() as i64;
    (k0..=k1).map(move |k| (k as f64 + 0.5) * h)
}

fn in_koranyi_ball(x: f64, y: f64, t: f64) -> bool {
    gauge(&[x, y, t]) <= 1.0
}

/// Lattice sample of `π⁻¹(B(c, r)) ∩ K` for an analytic `K`.
fn analytic_preimage(chart: &FoliationChart, k: &KSpec, c: &Point, r: f64, spacing: f64) -> Result<Vec<Point>> {
    let h = spacing * r;
    let ht = h * h;
    let cc = c.coords();
    let mut out = Vec::new();
    match (&chart.kind, k) {
        (ChartKind::HeisLeft, KSpec::KoranyiUnitBall) => {
            for x in anchored(cc[0] - r, cc[0] + r, h) {
                for y in global(-1.0, 1.0, h) {
                    let q = (x * x + y * y).powi(2);
                    if q > 1.0 {
                        continue;
                    }
                    let tm = (1.0 - q).sqrt();
                    for t in global(-tm, tm, ht) {
                        if in_koranyi_ball(x, y, t) {
                            out.push(Point::h1(x, y, t));
                        }
                    }
                }
            }
        }
        (ChartKind::HeisLeftHorizontal, KSpec::KoranyiUnitBall) => {
            // (y − y0)² + (τ − τ0)² < r², τ = t − 2xy
            let (y0, tau0) = (cc[0], cc[1]);
            for y in anchored(y0 - r, y0 + r, h) {
                let half = (r * r - (y - y0).powi(2)).max(0.0).sqrt();
                for tau in anchored(tau0 - half, tau0 + half, ht) {
                    for x in global(-1.0, 1.0, h) {
                        let t = tau + 2.0 * x * y;
                        if in_koranyi_ball(x, y, t) {
                            out.push(Point::h1(x, y, t));
                        }
                    }
                }
            }
        }
        (ChartKind::HeisRight, KSpec::KoranyiUnitBall) => {
            // core((y, t+2xy), (u0, v0)) < r  ⇔  |y−u0| < r and |Δv| < max(r², r·max(|y|,|u0|))
            let (u0, v0) = (cc[0], cc[1]);
            for y in anchored(u0 - r, u0 + r, h) {
                let w = (r * r).max(r * y.abs().max(u0.abs()));
                for v in anchored(v0 - w, v0 + w, ht) {
                    for x in global(-1.0, 1.0, h) {
                        let t = v - 2.0 * x * y;
                        if in_koranyi_ball(x, y, t) {
                            out.push(Point::h1(x, y, t));
                        }
                    }
                }
            }
        }
        (ChartKind::EuclideanProjection { dim, keep }, KSpec::UnitCube { dim: kd }) if dim == kd => {
            let axis: Vec<f64> = global(0.0, 1.0, h).collect();
            let free = dim - keep;
            let lo: Vec<f64> = cc.iter().map(|v| v - r).collect();
            let hi: Vec<f64> = cc.iter().map(|v| v + r).collect();
            let head: Vec<Vec<f64>> = (0..*keep)
                .map(|i| anchored(lo[i].max(0.0), hi[i].min(1.0), h).collect())
                .collect();
            let mut idx = vec![0usize; *keep];
            if head.iter().all(|v| !v.is_empty()) {
                'outer: loop {
                    let p: Vec<f64> = idx.iter().zip(&head).map(|(&i, v)| v[i]).collect();
                    let d2: f64 = p.iter().zip(cc).map(|(a, b)| (a - b).powi(2)).sum();
                    if d2 < r * r {
                        for rest in tensor(&axis, free) {
                            let mut v = p.clone();
                            v.extend(rest);
                            out.push(Point::euclidean(&v));
                        }
                    }
                    for a in 0..*keep {
                        if idx[a] + 1 < head[a].len() {
                            idx[a] += 1;
                            continue 'outer;
                        }
                        idx[a] = 0;
                    }
                    break;
                }
            }
        }
        (ChartKind::CarpetVertical { carpet, depth }, KSpec::Carpet) => {
            // finest depth whose cells are no wider than the lattice spacing
            let mut d = 1;
            while d < *depth && carpet.cell_side(d) > h {
                d += 1;
            }
            let side = carpet.cell_side(d);
            for (x, y) in cells_in_strip(carpet, d, cc[0] - r, cc[0] + r)? {
                let (px, py) = (x + side / 2.0, y + side / 2.0);
                if (px - cc[0]).abs() < r {
                    out.push(Point::carpet(px, py, None));
                }
            }
        }
        (kind, k) => {
            return Err(Error::Unsupported(format!(
                "no analytic sample of {k:?} for chart {}",
                kind.label()
            )))
        }
    }
    Ok(out)
}

/// Coarse sample of an analytic `K`, used to build parameter nets.
fn coarse_sample(chart: &FoliationChart, k: &KSpec, samples: usize) -> Result<Vec<Point>> {
    let samples = samples.max(8) as f64;
    Ok(match (k, &chart.kind) {
        (KSpec::KoranyiUnitBall, _) => {
            // the ball fills about 5/8 of [-1,1]³
            let m = (samples * 1.6).cbrt().ceil() as usize;
            let h = 2.0 / m as f64;
            let mut out = Vec::new();
            for x in anchored(-1.0, 1.0, h) {
                for y in anchored(-1.0, 1.0, h) {
                    for t in anchored(-1.0, 1.0, h) {
                        if in_koranyi_ball(x, y, t) {
                            out.push(Point::h1(x, y, t));
                        }
                    }
                }
            }
            out
        }
        (KSpec::UnitCube { dim }, _) => {
            let m = samples.powf(1.0 / *dim as f64).ceil() as usize;
            let axis: Vec<f64> = anchored(0.0, 1.0, 1.0 / m as f64).collect();
            tensor(&axis, *dim).map(|v| Point::euclidean(&v)).collect()
        }
        (KSpec::Carpet, ChartKind::CarpetVertical { carpet, depth }) => {
            let mut d = 1;
            while d < *depth && (carpet.cell_count(d) as f64) < samples {
                d += 1;
            }
            let side = carpet.cell_side(d);
            cells_in_strip(carpet, d, -1.0, 2.0)?
                .into_iter()
                .map(|(x, y)| Point::carpet(x + side / 2.0, y + side / 2.0, None))
                .collect()
        }
        (KSpec::Carpet, kind) => {
            return Err(invalid(format!("carpet K needs a carpet chart, got {}", kind.label())))
        }
    })
}

/// Worst-case covering counts of ball preimages, one row per radius.
///
/// At each `r` the parameter image `π(K)` is covered by the balls of a
/// maximal `r`-separated net; for up to `max_centers` of them the preimage
/// points are covered greedily by ambient `r`-balls and the largest count
/// is recorded as `N(r)`.
pub fn ds_regularity_table(
    chart: &FoliationChart,
    k: &KSample,
    s: f64,
    r_grid: &[f64],
    opts: &RegularityOptions,
) -> Result<RegularityTable> {
    if r_grid.is_empty() {
        return Err(Error::EmptyInput("regularity radii"));
    }
    if r_grid.windows(2).any(|w| !(w[1] < w[0])) || r_grid.iter().any(|r| !(*r > 0.0)) {
        return Err(invalid("regularity radii must be positive and strictly decreasing"));
    }
    if !(opts.spacing > 0.0 && opts.spacing <= 1.0) {
        return Err(invalid(format!("lattice spacing must be in (0, 1], got {}", opts.spacing)));
    }
    let param_source: Vec<Point> = match k {
        KSample::Points { points, .. } => {
            if points.is_empty() {
                return Err(Error::EmptyInput("K sample"));
            }
            common_space(points)?;
            points.clone()
        }
        KSample::Analytic(spec) => coarse_sample(chart, spec, opts.samples)?,
    };
    let params: Vec<Point> = param_source
        .iter()
        .map(|p| chart.project(p))
        .collect::<Result<_>>()?;
    let mut notes = Vec::new();
    let mut rows = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let net = maximal_separated_net(&params, r, None)?;
        let picks = strided(net.len(), opts.max_centers);
        let mut worst = 0usize;
        let mut most_points = 0usize;
        let mut audited = 0usize;
        for &i in &picks {
            let c = &net.centers[i];
            let pre: Vec<Point> = match k {
                KSample::Points { points, .. } => points
                    .par_iter()
                    .zip(params.par_iter())
                    .filter(|(_, a)| dist_unchecked(a, c) < r)
                    .map(|(p, _)| p.clone())
                    .collect(),
                KSample::Analytic(spec) => analytic_preimage(chart, spec, c, r, opts.spacing)?,
            };
            if pre.is_empty() {
                notes.push(format!("r={}: empty preimage at parameter center {:?} skipped", format_f64(r), c.coords()));
                continue;
            }
            audited += 1;
            most_points = most_points.max(pre.len());
            worst = worst.max(greedy_cover_count(&pre, r)?.count);
        }
        if audited == 0 {
            notes.push(format!("r={}: no nonempty preimage; row skipped", format_f64(r)));
            continue;
        }
        rows.push(RegularityRow {
            r,
            n: worst,
            normalized: worst as f64 * r.powf(s),
            centers: audited,
            preimage_points: most_points,
        });
    }
    Ok(RegularityTable {
        chart: chart.label().into(),
        s,
        k_id: k.id(),
        options: opts.clone(),
        rows,
        notes,
    })
}

/// Distance between two right cosets of `V`, with the Grushin bracket of
/// their parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientDistance {
    /// `min_x ‖((x,0,0) * a1)⁻¹ * a2‖`.
    pub value: f64,
    pub argmin_x: f64,
    /// Set when the search fell back to a grid.
    pub coarse: bool,
    pub bracket: GrushinBracket,
    /// `value / core`; `1` when both vanish.
    pub ratio: f64,
}

const GOLDEN_TOL: f64 = 1e-13;
const GOLDEN_MAX_ITER: usize = 400;

/// Golden-section minimization of `f` on `[lo, hi]`; `None` if the
/// bracket did not shrink below the tolerance.
fn golden_min<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> Option<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..GOLDEN_MAX_ITER {
        if hi - lo <= GOLDEN_TOL * (1.0 + lo.abs().max(hi.abs())) {
            let x = 0.5 * (lo + hi);
            return Some((x, f(x)));
        }
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    None
}

/// Grid minimum of `f` on `[lo, hi]`.
fn grid_min<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let n = 100_000;
    (0..=n)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            (x, f(x))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
}

fn right_coset_params(a: &Point) -> Result<(f64, f64)> {
    let (x, y, t) = h1_coords(a)?;
    if x != 0.0 {
        return Err(invalid("right coset parameters have the form (0, y, τ)"));
    }
    Ok((y, t))
}

/// Minimize `x ↦ d((x,0,0) * a1, b)`. The objective is the fourth root of
/// a convex quartic in `x`, and its minimizer lies within `d(a1, b)` of 0
/// because the first coordinate of `((x,0,0)*a1)⁻¹ * b` is `b_x − x`.
fn minimize_over_first(a1: (f64, f64), b: [f64; 3]) -> (f64, f64, bool) {
    let (y1, tau1) = a1;
    let f = |x: f64| heis_dist(&[x, y1, tau1 - 2.0 * x * y1], &b);
    let reach = f(b[0]);
    let (lo, hi) = (b[0] - reach, b[0] + reach);
    if reach == 0.0 {
        return (b[0], 0.0, false);
    }
    match golden_min(&f, lo, hi) {
        Some((x, v)) => (x, v, false),
        None => {
            let (x, v) = grid_min(&f, lo, hi);
            (x, v, true)
        }
    }
}

fn quotient(a1: (f64, f64), a2: (f64, f64), b: [f64; 3]) -> Result<QuotientDistance> {
    let (argmin_x, value, coarse) = minimize_over_first(a1, b);
    let bracket = grushin_bracket(&Point::grushin(a1.0, a1.1), &Point::grushin(a2.0, a2.1), DEFAULT_C1)?;
    let ratio = if bracket.core == 0.0 && value == 0.0 {
        1.0
    } else {
        value / bracket.core
    };
    Ok(QuotientDistance {
        value,
        argmin_x,
        coarse,
        bracket,
        ratio,
    })
}

/// Distance between the right cosets `V * a1` and `V * a2`, minimized over
/// representatives of the first coset against `a2`.
pub fn coset_quotient_distance(a1: &Point, a2: &Point) -> Result<QuotientDistance> {
    let p1 = right_coset_params(a1)?;
    let p2 = right_coset_params(a2)?;
    quotient(p1, p2, [0.0, p2.0, p2.1])
}

/// As [`coset_quotient_distance`], anchored at the representative
/// `(x*, 0, 0) * a2 = (x*, y2, τ2 − 2x*y2)` of the second coset.
pub fn coset_quotient_distance_anchored(a1: &Point, a2: &Point, x_star: f64) -> Result<QuotientDistance> {
    let p1 = right_coset_params(a1)?;
    let p2 = right_coset_params(a2)?;
    if !x_star.is_finite() {
        return Err(invalid("anchor must be finite"));
    }
    quotient(p1, p2, [x_star, p2.0, p2.1 - 2.0 * x_star * p2.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::heisenberg::heis_mul;
    use proptest::prelude::*;

    fn close(a: &Point, b: &Point, tol: f64) -> bool {
        a.space() == b.space() && a.coords().iter().zip(b.coords()).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn splitting_examples() {
        let p = Point::h1(1.0, 2.0, 3.0);
        let (w, v) = project_left(&p).unwrap();
        assert_eq!((w.coords(), v.coords()), (&[0.0, 2.0, -1.0][..], &[1.0, 0.0, 0.0][..]));
        let (v, w) = project_right(&p).unwrap();
        assert_eq!((v.coords(), w.coords()), (&[1.0, 0.0, 0.0][..], &[0.0, 2.0, 7.0][..]));
        let e = Point::h1(0.0, 0.0, 0.0);
        assert_eq!(project_left(&e).unwrap(), (e.clone(), e.clone()));
        assert_eq!(project_right(&e).unwrap(), (e.clone(), e.clone()));
        let on_v = Point::h1(0.7, 0.0, 0.0);
        assert_eq!(project_left(&on_v).unwrap(), (e.clone(), on_v.clone()));
        let central = Point::h1(0.0, 0.0, 0.4);
        assert_eq!(project_right(&central).unwrap(), (e, central));
        assert!(project_left(&Point::plane(0.0, 0.0)).is_err());
    }

    #[test]
    fn right_leaf_examples() {
        let chart = FoliationChart::new(ChartKind::HeisRight).unwrap();
        let leaf = chart.leaf_sample(&Point::grushin(0.0, 0.0), &[-1.0, 0.0, 1.0]).unwrap();
        let want = [Point::h1(-1.0, 0.0, 0.0), Point::h1(0.0, 0.0, 0.0), Point::h1(1.0, 0.0, 0.0)];
        assert_eq!(leaf, want);
        let leaf = chart.leaf_sample(&Point::grushin(1.0, 0.0), &[1.0]).unwrap();
        assert_eq!(leaf, vec![Point::h1(1.0, 1.0, -2.0)]);
        assert!(chart.leaf_sample(&Point::plane(0.0, 0.0), &[0.0]).is_err());
        let left = FoliationChart::new(ChartKind::HeisLeft).unwrap();
        assert!(left.leaf_sample(&Point::h1(0.0, 1.0, 0.0), &[0.0]).is_err());
    }

    #[test]
    fn carpet_leaves_skip_removed_cells() {
        let carpet = CarpetSpec::odd_linear(3);
        let chart = FoliationChart::new(ChartKind::CarpetVertical { carpet, depth: 1 }).unwrap();
        let grid: Vec<f64> = (0..30).map(|i| (i as f64 + 0.5) / 30.0).collect();
        let leaf = chart.leaf_sample(&Point::line(0.5), &grid).unwrap();
        assert_eq!(leaf.len(), 20);
        for p in &leaf {
            assert_eq!(chart.project(p).unwrap(), Point::line(0.5));
        }
        assert!(chart.leaf_sample(&Point::line(1.5), &grid).is_err());
    }

    fn charts() -> Vec<FoliationChart> {
        [ChartKind::HeisLeft, ChartKind::HeisLeftHorizontal, ChartKind::HeisRight]
            .into_iter()
            .map(|k| FoliationChart::new(k).unwrap())
            .collect()
    }

    proptest! {
        #[test]
        fn splittings_recompose(x in -5.0..5.0f64, y in -5.0..5.0f64, t in -5.0..5.0f64) {
            let p = Point::h1(x, y, t);
            let (w, v) = project_left(&p).unwrap();
            prop_assert!(close(&heis_mul(&w, &v).unwrap(), &p, 1e-12));
            let (v, w) = project_right(&p).unwrap();
            prop_assert!(close(&heis_mul(&v, &w).unwrap(), &p, 1e-12));
        }

        #[test]
        fn leaves_project_to_their_parameter(x in -2.0..2.0f64, y in -2.0..2.0f64, t in -2.0..2.0f64) {
            let grid = [-1.3, -0.2, 0.0, 0.45, 1.7];
            for chart in charts() {
                let a = chart.project(&Point::h1(x, y, t)).unwrap();
                for q in chart.leaf_sample(&a, &grid).unwrap() {
                    prop_assert!(close(&chart.project(&q).unwrap(), &a, 1e-12), "{}", chart.label());
                }
            }
        }

        #[test]
        fn quotient_distance_is_anchor_independent(
            y1 in -2.0..2.0f64, t1 in -2.0..2.0f64, y2 in -2.0..2.0f64, t2 in -2.0..2.0f64, xs in -3.0..3.0f64
        ) {
            let (a1, a2) = (Point::h1(0.0, y1, t1), Point::h1(0.0, y2, t2));
            let d = coset_quotient_distance(&a1, &a2).unwrap();
            let e = coset_quotient_distance_anchored(&a1, &a2, xs).unwrap();
            prop_assert!(!d.coarse && !e.coarse);
            prop_assert!((d.value - e.value).abs() <= 1e-6, "{} vs {}", d.value, e.value);
            // no representative does better than the minimum
            for x in [-1.0, -0.1, 0.0, 0.3, 2.0] {
                let p = [x, y1, t1 - 2.0 * x * y1];
                prop_assert!(heis_dist(&p, &[0.0, y2, t2]) >= d.value - 1e-9);
            }
        }
    }

    #[test]
    fn quotient_examples() {
        let a = Point::h1(0.0, 0.4, -0.3);
        let same = coset_quotient_distance(&a, &a).unwrap();
        assert_eq!(same.value, 0.0);
        let d = coset_quotient_distance(&Point::h1(0.0, 0.0, 0.0), &Point::h1(0.0, 0.0, 1.0)).unwrap();
        // the objective is flat to fourth order at the minimizer
        assert!((d.value - 1.0).abs() < 1e-9 && d.argmin_x.abs() < 1e-3);
        assert!((d.bracket.core - 1.0).abs() < 1e-15 && (d.ratio - 1.0).abs() < 1e-9);
        // min over x of ((x² )² + (1 + 8x)²)^{1/4}, solved by brute force
        let e = coset_quotient_distance(&Point::h1(0.0, 2.0, 0.0), &Point::h1(0.0, 2.0, 1.0)).unwrap();
        let brute = (0..=200_000)
            .map(|i| -0.2 + 0.2 * i as f64 / 200_000.0)
            .map(|x: f64| (x.powi(4) + (1.0 + 8.0 * x).powi(2)).powf(0.25))
            .fold(f64::INFINITY, f64::min);
        assert!((e.value - brute).abs() < 1e-6);
        assert!((e.value - 0.125).abs() < 0.01);
        assert_eq!(e.bracket.core, 0.5);
        assert!((e.ratio - e.value / 0.5).abs() < 1e-15);
        assert!(coset_quotient_distance(&Point::h1(1.0, 0.0, 0.0), &a).is_err());
    }

    #[test]
    fn table_with_large_radius_counts_one_ball() {
        let chart = FoliationChart::new(ChartKind::EuclideanProjection { dim: 2, keep: 1 }).unwrap();
        let pts: Vec<Point> = (0..100).map(|i| Point::plane((i % 10) as f64 / 10.0, (i / 10) as f64 / 10.0)).collect();
        let k = KSample::Points { id: "grid".into(), points: pts };
        let t = ds_regularity_table(&chart, &k, 1.0, &[4.0, 2.0], &RegularityOptions::default()).unwrap();
        for row in &t.rows {
            assert_eq!(row.n, 1);
            assert_eq!(row.normalized, row.r);
        }
        assert!(ds_regularity_table(&chart, &k, 1.0, &[1.0, 2.0], &RegularityOptions::default()).is_err());
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r,N,N_r_pow_s,chart,s,K_id\n4.0,1,4.0,euclidean_projection,1.0,grid\n"), "{text}");
    }

    #[test]
    fn euclidean_projection_table_is_regular() {
        let chart = FoliationChart::new(ChartKind::EuclideanProjection { dim: 3, keep: 1 }).unwrap();
        let k = KSample::Analytic(KSpec::UnitCube { dim: 3 });
        let opts = RegularityOptions { max_centers: 3, samples: 4000, ..Default::default() };
        let radii = [0.25, 0.125, 0.0625];
        let t = ds_regularity_table(&chart, &k, 2.0, &radii, &opts).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert!(t.window() <= 4.0, "{t:?}");
    }

    #[test]
    fn strided_picks() {
        assert_eq!(strided(3, 5), vec![0, 1, 2]);
        assert_eq!(strided(11, 3), vec![0, 5, 10]);
        assert_eq!(strided(10, 1), vec![5]);
    }
}
