//! The random series map `f_ξ = Σ_n (1+n)⁻² Σ_{B∈Q_n} ν(D·B)^{1/α} ψ_B ξ_B`.
//!
//! `Q_n` are the balls of radius `2^{-n}` centered at a nested
//! `2^{-n}`-net of the sample, `ψ_B = clamp(2 − d(·,c_B)/r_B, 0, 1)` and the
//! `ξ_B` are independent and uniform in the closed unit ball of `ℝ^N`.

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::index::CellIndex;
use crate::measure::{compensated_sum, DiscreteMeasure};
use crate::metric::{diameter_estimate, dist_unchecked, nested_nets};
use crate::point::{common_space, format_f64, Point, Space};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevConfig {
    pub alpha: f64,
    /// Target dimension `N`.
    pub target_dim: usize,
    pub n_max: u32,
    /// Ball dilation `D` in the weights `ν(D·B)^{1/α}`.
    #[serde(default = "default_dilation")]
    pub dilation: f64,
    pub seed: u64,
}

fn default_dilation() -> f64 {
    100.0
}

impl SobolevConfig {
    pub fn new(alpha: f64, target_dim: usize, n_max: u32, seed: u64) -> SobolevConfig {
        SobolevConfig {
            alpha,
            target_dim,
            n_max,
            dilation: default_dilation(),
            seed,
        }
    }

    pub fn with_dilation(mut self, dilation: f64) -> SobolevConfig {
        self.dilation = dilation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.target_dim as f64 > self.alpha) {
            return Err(Error::OutOfRange {
                name: "N",
                value: self.target_dim as f64,
                interval: format!("({}, ∞)", self.alpha),
            });
        }
        if self.n_max == 0 || self.n_max > 30 {
            return Err(invalid(format!("n_max must be in 1..=30, got {}", self.n_max)));
        }
        if !(self.dilation >= 1.0) || !self.dilation.is_finite() {
            return Err(invalid(format!("dilation must be >= 1, got {}", self.dilation)));
        }
        Ok(())
    }
}

/// The balls of one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub n: u32,
    pub radius: f64,
    pub centers: Vec<Point>,
    /// `ν(D·B)` per ball.
    pub dilated_mass: Vec<f64>,
    /// `ν(D·B)^{1/α}` per ball.
    pub weights: Vec<f64>,
    pub xi: Vec<Vec<f64>>,
}

impl Level {
    pub fn damping(&self) -> f64 {
        damping(self.n)
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().cloned().fold(0.0, f64::max)
    }
}

/// `(1+n)⁻²`.
pub fn damping(n: u32) -> f64 {
    let m = 1.0 + n as f64;
    1.0 / (m * m)
}

/// Uniform point of the closed unit ball of `ℝ^dim`: Gaussian direction
/// times `U^{1/dim}`.
pub fn uniform_in_ball<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let u: f64 = rng.random();
            let radius = u.powf(1.0 / dim as f64);
            return g.into_iter().map(|v| (v / norm * radius).clamp(-1.0, 1.0)).collect();
        }
    }
}

/// Homothety used to bring the sample inside a set of diameter `< 1`.
pub(crate) fn scale_point(p: &Point, lambda: f64) -> Point {
    if lambda == 1.0 {
        return p.clone();
    }
    let c = p.coords();
    let out: Vec<f64> = match p.space() {
        Space::Euclidean(_) | Space::Carpet => c.iter().map(|v| v * lambda).collect(),
        Space::Heisenberg(_) => {
            let (x, t) = c.split_at(c.len() - 1);
            x.iter().map(|v| v * lambda).chain([t[0] * lambda * lambda]).collect()
        }
        Space::Grushin => vec![c[0] * lambda, c[1] * lambda * lambda],
    };
    p.with_coords(&out)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RandomSobolevMap {
    pub config: SobolevConfig,
    pub space: Space,
    /// Inputs are mapped by the homothety of this factor before evaluation.
    pub scale: f64,
    pub nu_total_mass: f64,
    pub levels: Vec<Level>,
    #[serde(skip)]
    index: OnceLock<Vec<CellIndex>>,
}

impl Clone for RandomSobolevMap {
    fn clone(&self) -> Self {
        RandomSobolevMap {
            config: self.config.clone(),
            space: self.space,
            scale: self.scale,
            nu_total_mass: self.nu_total_mass,
            levels: self.levels.clone(),
            index: OnceLock::new(),
        }
    }
}

impl PartialEq for RandomSobolevMap {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.space == other.space
            && self.scale == other.scale
            && self.nu_total_mass == other.nu_total_mass
            && self.levels == other.levels
    }
}

/// Build the construction on `e_sample` with weights from `nu`.
pub fn build_construction(
    e_sample: &[Point],
    nu: &DiscreteMeasure,
    config: &SobolevConfig,
) -> Result<RandomSobolevMap> {
    config.validate()?;
    let space = common_space(e_sample)?;
    if nu.is_empty() || !(nu.total_mass() > 0.0) {
        return Err(invalid("construction needs a measure of positive mass"));
    }
    if nu.space() != Some(space) {
        return Err(Error::SpaceMismatch {
            left: nu.space().unwrap(),
            right: space,
        });
    }
    let diam = diameter_estimate(e_sample, 1024)?;
    let mut scale = 1.0;
    while diam * scale >= 0.9 {
        scale /= 2.0;
    }
    let sample: Vec<Point> = e_sample.iter().map(|p| scale_point(p, scale)).collect();
    let nu = nu.push_forward(|p| Ok(scale_point(p, scale)))?;
    let radii: Vec<f64> = (1..=config.n_max).map(|n| 2f64.powi(-(n as i32))).collect();
    let nets = nested_nets(&sample, &radii)?;
    let mut levels = Vec::with_capacity(nets.len());
    for (k, net) in nets.into_iter().enumerate() {
        let n = k as u32 + 1;
        let r = net.epsilon;
        let dilated_mass = nu.ball_masses(&net.centers, config.dilation * r)?;
        let weights = dilated_mass.iter().map(|m| m.powf(1.0 / config.alpha)).collect();
        let xi = (0..net.len() as u64)
            .into_par_iter()
            .map(|i| {
                let mut g = rng::stream(config.seed, ((n as u64) << 40) | i);
                uniform_in_ball(&mut g, config.target_dim)
            })
            .collect();
        levels.push(Level {
            n,
            radius: r,
            centers: net.centers,
            dilated_mass,
            weights,
            xi,
        });
    }
    Ok(RandomSobolevMap {
        config: config.clone(),
        space,
        scale,
        nu_total_mass: nu.total_mass(),
        levels,
        index: OnceLock::new(),
    })
}

impl RandomSobolevMap {
    /// The constant zero map, used for a zero measure.
    pub fn zero(space: Space, config: &SobolevConfig) -> RandomSobolevMap {
        RandomSobolevMap {
            config: config.clone(),
            space,
            scale: 1.0,
            nu_total_mass: 0.0,
            levels: Vec::new(),
            index: OnceLock::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.levels.iter().all(|l| l.weights.iter().all(|w| *w == 0.0))
    }

    fn indexes(&self) -> &[CellIndex] {
        self.index.get_or_init(|| {
            self.levels
                .iter()
                .map(|l| CellIndex::from_points(self.space, 2.0 * l.radius, &l.centers))
                .collect()
        })
    }

    fn check(&self, x: &Point) -> Result<Point> {
        if x.space() != self.space {
            return Err(Error::SpaceMismatch {
                left: x.space(),
                right: self.space,
            });
        }
        Ok(scale_point(x, self.scale))
    }

    /// Visit `(ball index, d(x, c_B))` for balls of level `k` with `d < 2r`.
    fn active<F: FnMut(usize, f64)>(&self, k: usize, xs: &Point, mut f: F) {
        let level = &self.levels[k];
        let reach = 2.0 * level.radius;
        self.indexes()[k].scan(xs, |id| {
            let d = dist_unchecked(xs, &level.centers[id as usize]);
            if d < reach {
                f(id as usize, d);
            }
            true
        });
    }

    /// Undamped level term `f_{ξ,n}` at an already rescaled point.
    fn level_value(&self, k: usize, xs: &Point, out: &mut [f64]) {
        let level = &self.levels[k];
        self.active(k, xs, |i, d| {
            let psi = (2.0 - d / level.radius).clamp(0.0, 1.0);
            let c = level.weights[i] * psi;
            for (o, x) in out.iter_mut().zip(&level.xi[i]) {
                *o += c * x;
            }
        });
    }

    /// Undamped `Lip f_{ξ,n}` bound in rescaled units.
    fn level_lip(&self, k: usize, xs: &Point) -> f64 {
        let level = &self.levels[k];
        let mut acc = 0.0;
        self.active(k, xs, |i, _| acc += level.weights[i] / level.radius);
        acc
    }

    pub fn evaluate(&self, x: &Point) -> Result<Vec<f64>> {
        let xs = self.check(x)?;
        let mut total = vec![0.0; self.config.target_dim];
        let mut buf = vec![0.0; self.config.target_dim];
        for k in 0..self.levels.len() {
            buf.iter_mut().for_each(|v| *v = 0.0);
            self.level_value(k, &xs, &mut buf);
            let damp = self.levels[k].damping();
            for (t, b) in total.iter_mut().zip(&buf) {
                *t += damp * b;
            }
        }
        Ok(total)
    }

    /// `Σ_n (1+n)⁻² Σ_{B: x∈2B} ν(D·B)^{1/α}/r_B`, in the input metric.
    pub fn lip_upper(&self, x: &Point) -> Result<f64> {
        let xs = self.check(x)?;
        let mut acc = 0.0;
        for k in 0..self.levels.len() {
            acc += self.levels[k].damping() * self.level_lip(k, &xs);
        }
        Ok(self.scale * acc)
    }

    /// Undamped per-level bound `Lip f_{ξ,n}(x)` in the input metric.
    pub fn level_lip_upper(&self, n: u32, x: &Point) -> Result<f64> {
        let xs = self.check(x)?;
        let k = self.level_slot(n)?;
        Ok(self.scale * self.level_lip(k, &xs))
    }

    fn level_slot(&self, n: u32) -> Result<usize> {
        self.levels
            .iter()
            .position(|l| l.n == n)
            .ok_or_else(|| invalid(format!("no level {n} in the construction")))
    }

    /// `Σ_{n ≤ n_max} (1+n)⁻² max_B ν(D·B)^{1/α}`, a bound on `|f_ξ|`.
    pub fn sup_bound(&self) -> f64 {
        self.levels.iter().map(|l| l.damping() * l.max_weight()).sum()
    }

    /// Bound on the truncated tail `Σ_{n>n_max}(1+n)⁻²·ν(X)^{1/α}`.
    pub fn tail_bound(&self) -> f64 {
        let m = self.config.n_max as f64 + 1.0;
        // Σ_{k ≥ m+1} k⁻² ≤ 1/m
        self.nu_total_mass.powf(1.0 / self.config.alpha) / m
    }

    /// `∫_{[a,b]} lip_upper` along the euclidean segment, computed exactly
    /// from the chord lengths inside every support `2B`.
    pub fn segment_integral(&self, a: &Point, b: &Point) -> Result<f64> {
        if !matches!(self.space, Space::Euclidean(_) | Space::Carpet) {
            return Err(Error::Unsupported(format!(
                "segment integrals need a euclidean ambient, got {}",
                self.space
            )));
        }
        a.check_space(b)?;
        let (sa, sb) = (self.check(a)?, self.check(b)?);
        let dir: Vec<f64> = sb.coords().iter().zip(sa.coords()).map(|(q, p)| q - p).collect();
        let len2: f64 = dir.iter().map(|v| v * v).sum();
        if len2 == 0.0 {
            return Ok(0.0);
        }
        let len = len2.sqrt();
        let mut total = 0.0;
        for level in &self.levels {
            let reach = 2.0 * level.radius;
            let mut acc = 0.0;
            for (c, w) in level.centers.iter().zip(&level.weights) {
                // |sa + t·dir − c|² < reach², t ∈ [0,1]
                let o: Vec<f64> = sa.coords().iter().zip(c.coords()).map(|(p, q)| p - q).collect();
                let bq = 2.0 * o.iter().zip(&dir).map(|(u, v)| u * v).sum::<f64>();
                let cq = o.iter().map(|u| u * u).sum::<f64>() - reach * reach;
                let disc = bq * bq - 4.0 * len2 * cq;
                if disc <= 0.0 {
                    continue;
                }
                let sq = disc.sqrt();
                let t0 = ((-bq - sq) / (2.0 * len2)).max(0.0);
                let t1 = ((-bq + sq) / (2.0 * len2)).min(1.0);
                if t1 > t0 {
                    acc += w / level.radius * (t1 - t0) * len;
                }
            }
            total += level.damping() * acc;
        }
        // rescaled arclength already carries the factor `scale` of lip_upper
        Ok(total)
    }

    /// Per-level ball counts.
    pub fn ball_counts(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.centers.len()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<RandomSobolevMap> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Write `space,coord…,f0,…,f{N-1}` rows for each input point.
pub fn write_evaluations_csv<W: Write>(map: &dyn TestMap, points: &[Point], out: W) -> Result<()> {
    let values = points
        .par_iter()
        .map(|p| map.eval(p))
        .collect::<Result<Vec<_>>>()?;
    let width = map.domain().coord_len();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["space".to_string()];
    header.extend((0..width).map(|i| format!("coord{i}")));
    header.extend((0..map.target_dim()).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for (p, v) in points.iter().zip(values) {
        let mut row = vec![p.space().label()];
        row.extend(p.coords().iter().map(|c| format_f64(*c)));
        row.extend(v.iter().map(|c| format_f64(*c)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// A map with a pointwise upper gradient and a known Sobolev exponent.
pub trait TestMap: Sync {
    fn name(&self) -> String;
    fn domain(&self) -> Space;
    fn target_dim(&self) -> usize;
    fn eval(&self, x: &Point) -> Result<Vec<f64>>;
    fn upper_gradient(&self, x: &Point) -> Result<f64>;
    /// Supremum of the exponents `p` with an upper gradient in `L^p_loc`,
    /// and whether it is attained. `None` when unknown.
    fn certified_exponent(&self) -> Option<Exponent>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponent {
    pub sup: f64,
    pub attained: bool,
}

impl Exponent {
    pub fn admits(&self, p: f64) -> bool {
        p < self.sup || (self.attained && p == self.sup)
    }
}

/// A construction together with the `(Q, s)` it was built for; the level
/// norms are uniformly bounded up to `p = α(Q−s)/(α−s)`.
pub struct CertifiedSobolevMap<'a> {
    pub map: &'a RandomSobolevMap,
    pub q: f64,
    pub s: f64,
}

impl TestMap for CertifiedSobolevMap<'_> {
    fn name(&self) -> String {
        format!("random_sobolev(alpha={})", self.map.config.alpha)
    }
    fn domain(&self) -> Space {
        self.map.space
    }
    fn target_dim(&self) -> usize {
        self.map.config.target_dim
    }
    fn eval(&self, x: &Point) -> Result<Vec<f64>> {
        self.map.evaluate(x)
    }
    fn upper_gradient(&self, x: &Point) -> Result<f64> {
        self.map.lip_upper(x)
    }
    fn certified_exponent(&self) -> Option<Exponent> {
        let a = self.map.config.alpha;
        if a > self.s {
            Some(Exponent {
                sup: a * (self.q - self.s) / (a - self.s),
                attained: true,
            })
        } else {
            Some(Exponent {
                sup: f64::INFINITY,
                attained: false,
            })
        }
    }
}

/// The identity of `ℝ^d`.
pub struct Identity(pub usize);

impl TestMap for Identity {
    fn name(&self) -> String {
        "identity".into()
    }
    fn domain(&self) -> Space {
        Space::Euclidean(self.0)
    }
    fn target_dim(&self) -> usize {
        self.0
    }
    fn eval(&self, x: &Point) -> Result<Vec<f64>> {
        check_domain(self, x)?;
        Ok(x.coords().to_vec())
    }
    fn upper_gradient(&self, x: &Point) -> Result<f64> {
        check_domain(self, x)?;
        Ok(1.0)
    }
    fn certified_exponent(&self) -> Option<Exponent> {
        Some(Exponent {
            sup: f64::INFINITY,
            attained: false,
        })
    }
}

/// `x ↦ |x|^{β−1} x` on `ℝ^d`, `β ∈ (0, 1]`, with upper gradient
/// `|x|^{β−1}`; the gradient is in `L^p_loc` iff `p(1−β) < d`.
pub struct RadialHolder {
    pub dim: usize,
    pub beta: f64,
}

impl RadialHolder {
    pub fn new(dim: usize, beta: f64) -> Result<RadialHolder> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::OutOfRange {
                name: "beta",
                value: beta,
                interval: "(0, 1]".into(),
            });
        }
        Ok(RadialHolder { dim, beta })
    }
}

impl TestMap for RadialHolder {
    fn name(&self) -> String {
        format!("radial_holder(beta={})", self.beta)
    }
    fn domain(&self) -> Space {
        Space::Euclidean(self.dim)
    }
    fn target_dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &Point) -> Result<Vec<f64>> {
        check_domain(self, x)?;
        let r = norm(x.coords());
        if r == 0.0 {
            return Ok(vec![0.0; self.dim]);
        }
        let f = r.powf(self.beta - 1.0);
        Ok(x.coords().iter().map(|v| v * f).collect())
    }
    fn upper_gradient(&self, x: &Point) -> Result<f64> {
        check_domain(self, x)?;
        let r = norm(x.coords());
        Ok(if r == 0.0 {
            if self.beta == 1.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            r.powf(self.beta - 1.0)
        })
    }
    fn certified_exponent(&self) -> Option<Exponent> {
        if self.beta == 1.0 {
            return Some(Exponent {
                sup: f64::INFINITY,
                attained: false,
            });
        }
        Some(Exponent {
            sup: self.dim as f64 / (1.0 - self.beta),
            attained: false,
        })
    }
}

/// `(x, y) ↦ (x + A sin 2πy, y + A sin 2πx)` on the plane, or on ℍ¹ after
/// dropping `t`. Lipschitz with constant `1 + 2πA`.
pub struct SmoothWarp {
    pub domain: Space,
    pub amplitude: f64,
}

impl TestMap for SmoothWarp {
    fn name(&self) -> String {
        format!("smooth_warp(A={})", self.amplitude)
    }
    fn domain(&self) -> Space {
        self.domain
    }
    fn target_dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &Point) -> Result<Vec<f64>> {
        check_domain(self, x)?;
        let c = x.coords();
        let tau = std::f64::consts::TAU;
        Ok(vec![
            c[0] + self.amplitude * (tau * c[1]).sin(),
            c[1] + self.amplitude * (tau * c[0]).sin(),
        ])
    }
    fn upper_gradient(&self, x: &Point) -> Result<f64> {
        check_domain(self, x)?;
        Ok(1.0 + std::f64::consts::TAU * self.amplitude.abs())
    }
    fn certified_exponent(&self) -> Option<Exponent> {
        Some(Exponent {
            sup: f64::INFINITY,
            attained: false,
        })
    }
}

fn norm(c: &[f64]) -> f64 {
    c.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_domain<M: TestMap + ?Sized>(m: &M, x: &Point) -> Result<()> {
    let ok = x.space() == m.domain()
        || (m.domain() == Space::Euclidean(2) && x.space() == Space::Carpet);
    if ok {
        Ok(())
    } else {
        Err(Error::SpaceMismatch {
            left: x.space(),
            right: m.domain(),
        })
    }
}

/// Reference measure for `L^p` quadrature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LpReference {
    /// Weighted atoms, e.g. a carpet natural measure.
    Discrete(DiscreteMeasure),
    /// Lebesgue measure on a euclidean ambient, integrated on a grid of
    /// `cells_per_radius` cells per ball radius laid over each level's
    /// supports.
    AdaptiveLebesgue { cells_per_radius: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelNorm {
    pub n: u32,
    pub balls: usize,
    /// `‖Lip f_{ξ,n}‖_p` (undamped).
    pub norm: f64,
    /// `Σ_B ν(D·B)`, the quantity the level norm is compared with.
    pub dilated_mass_sum: f64,
    pub quadrature_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpTable {
    pub p: f64,
    pub levels: Vec<LevelNorm>,
    /// `Σ_n (1+n)⁻² ‖Lip f_{ξ,n}‖_p ≥ ‖lip_upper‖_p` (Minkowski).
    pub total_upper: f64,
    /// Direct quadrature of `lip_upper^p` (discrete reference only).
    pub total_direct: Option<f64>,
}

impl LpTable {
    /// `max/min` of the level norms over `n ∈ [lo, hi]` (ignoring zeros).
    pub fn ratio_window(&self, lo: u32, hi: u32) -> f64 {
        let vals: Vec<f64> = self
            .levels
            .iter()
            .filter(|l| l.n >= lo && l.n <= hi && l.norm > 0.0)
            .map(|l| l.norm)
            .collect();
        if vals.is_empty() {
            return 1.0;
        }
        let max = vals.iter().cloned().fold(0.0, f64::max);
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// Least-squares slope of `log₂ ‖Lip f_{ξ,n}‖_p` against `n` over `[lo, hi]`.
    pub fn log2_slope(&self, lo: u32, hi: u32) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .levels
            .iter()
            .filter(|l| l.n >= lo && l.n <= hi && l.norm > 0.0)
            .map(|l| (l.n as f64, l.norm.log2()))
            .collect();
        let m = pts.len() as f64;
        if pts.len() < 2 {
            return 0.0;
        }
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }
}

pub fn level_lp_norms(map: &RandomSobolevMap, p: f64, reference: &LpReference) -> Result<LpTable> {
    if !(p >= 1.0) {
        return Err(invalid(format!("p must be >= 1, got {p}")));
    }
    let mut levels = Vec::with_capacity(map.levels.len());
    let mut total_direct = None;
    match reference {
        LpReference::Discrete(m) => {
            if m.is_empty() {
                return Err(Error::EmptyInput("reference measure"));
            }
            let scaled: Vec<Point> = m
                .atoms()
                .iter()
                .map(|a| map.check(a))
                .collect::<Result<_>>()?;
            for (k, level) in map.levels.iter().enumerate() {
                let vals: Vec<f64> = scaled
                    .par_iter()
                    .zip(m.weights())
                    .map(|(x, w)| w * (map.scale * map.level_lip(k, x)).powf(p))
                    .collect();
                levels.push(LevelNorm {
                    n: level.n,
                    balls: level.centers.len(),
                    norm: compensated_sum(vals).powf(1.0 / p),
                    dilated_mass_sum: compensated_sum(level.dilated_mass.iter().copied()),
                    quadrature_points: m.len(),
                });
            }
            let vals: Vec<f64> = m
                .atoms()
                .par_iter()
                .zip(m.weights())
                .map(|(x, w)| Ok(w * map.lip_upper(x)?.powf(p)))
                .collect::<Result<_>>()?;
            total_direct = Some(compensated_sum(vals).powf(1.0 / p));
        }
        LpReference::AdaptiveLebesgue { cells_per_radius } => {
            let Space::Euclidean(d) = map.space else {
                return Err(Error::Unsupported(format!(
                    "lebesgue quadrature needs a euclidean ambient, got {}",
                    map.space
                )));
            };
            let m = (*cells_per_radius).max(1);
            for (k, level) in map.levels.iter().enumerate() {
                let h = level.radius / m as f64;
                let mut cells: BTreeSet<Vec<i64>> = BTreeSet::new();
                for c in &level.centers {
                    let lo: Vec<i64> = c.coords().iter().map(|v| ((v - 2.0 * level.radius) / h).floor() as i64).collect();
                    let hi: Vec<i64> = c.coords().iter().map(|v| ((v + 2.0 * level.radius) / h).floor() as i64).collect();
                    let mut cur = lo.clone();
                    'outer: loop {
                        cells.insert(cur.clone());
                        for axis in 0..d {
                            if cur[axis] < hi[axis] {
                                cur[axis] += 1;
                                continue 'outer;
                            }
                            cur[axis] = lo[axis];
                        }
                        break;
                    }
                }
                let cells: Vec<Vec<i64>> = cells.into_iter().collect();
                let vol = h.powi(d as i32);
                let vals: Vec<f64> = cells
                    .par_iter()
                    .map(|key| {
                        let x: Vec<f64> = key.iter().map(|&i| (i as f64 + 0.5) * h).collect();
                        let xp = Point::euclidean(&x);
                        vol * map.level_lip(k, &xp).powf(p)
                    })
                    .collect();
                let rescaled = compensated_sum(vals).powf(1.0 / p);
                levels.push(LevelNorm {
                    n: level.n,
                    balls: level.centers.len(),
                    norm: map.scale.powf(1.0 - d as f64 / p) * rescaled,
                    dilated_mass_sum: compensated_sum(level.dilated_mass.iter().copied()),
                    quadrature_points: cells.len(),
                });
            }
        }
    }
    let total_upper = levels.iter().map(|l| damping(l.n) * l.norm).sum();
    Ok(LpTable {
        p,
        levels,
        total_upper,
        total_direct,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorreyRow {
    pub center: Vec<f64>,
    pub radius: f64,
    pub image_diameter: f64,
    pub gradient_mean: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorreyReport {
    pub p: f64,
    pub sup_ratio: f64,
    /// Grid points per ball radius used to sample each ball.
    pub resolution: usize,
    /// Every ball had zero image diameter and zero gradient.
    pub vacuous: bool,
    pub rows: Vec<MorreyRow>,
}

/// `sup_B diam f(B) / (diam B · (⨍_B g^p)^{1/p})` over euclidean balls,
/// each sampled on a grid with `resolution` points per radius.
pub fn morrey_diagnostic(
    map: &dyn TestMap,
    balls: &[crate::metric::Ball],
    p: f64,
    resolution: usize,
) -> Result<MorreyReport> {
    if balls.is_empty() {
        return Err(Error::EmptyInput("morrey balls"));
    }
    if !(p >= 1.0) {
        return Err(invalid(format!("p must be >= 1, got {p}")));
    }
    let k = resolution.max(2) as i64;
    let rows = balls
        .par_iter()
        .map(|ball| {
            let c = ball.center.coords();
            let d = c.len();
            if !matches!(ball.center.space(), Space::Euclidean(_) | Space::Carpet) || d > 3 {
                return Err(Error::Unsupported("morrey balls must be euclidean, dim <= 3".into()));
            }
            let h = ball.radius / k as f64;
            let mut pts = Vec::new();
            let mut idx = vec![-k; d];
            'outer: loop {
                let off: Vec<f64> = idx.iter().map(|&i| i as f64 * h).collect();
                if norm(&off) < ball.radius {
                    let x: Vec<f64> = c.iter().zip(&off).map(|(a, b)| a + b).collect();
                    pts.push(ball.center.with_coords(&x));
                }
                for axis in 0..d {
                    if idx[axis] < k {
                        idx[axis] += 1;
                        continue 'outer;
                    }
                    idx[axis] = -k;
                }
                break;
            }
            if pts.is_empty() {
                return Err(Error::EmptyInput("morrey ball sample"));
            }
            let vals = pts.iter().map(|x| map.eval(x)).collect::<Result<Vec<_>>>()?;
            let mut diam = 0.0f64;
            for i in 0..vals.len() {
                for j in i + 1..vals.len() {
                    let dd: f64 = vals[i].iter().zip(&vals[j]).map(|(a, b)| (a - b).powi(2)).sum();
                    diam = diam.max(dd);
                }
            }
            let diam = diam.sqrt();
            let grads = pts
                .iter()
                .map(|x| Ok(map.upper_gradient(x)?.powf(p)))
                .collect::<Result<Vec<_>>>()?;
            let mean = (compensated_sum(grads) / pts.len() as f64).powf(1.0 / p);
            let ratio = if diam == 0.0 {
                0.0
            } else {
                diam / (2.0 * ball.radius * mean)
            };
            Ok(MorreyRow {
                center: c.to_vec(),
                radius: ball.radius,
                image_diameter: diam,
                gradient_mean: mean,
                ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sup_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let vacuous = rows.iter().all(|r| r.image_diameter == 0.0 && r.gradient_mean == 0.0);
    Ok(MorreyReport {
        p,
        sup_ratio,
        resolution: resolution.max(2),
        vacuous,
        rows,
    })
}
