//! Frostman measures on finite samples by capped top-down mass splitting.
//!
//! Scales are dyadic, `ρ_j = 2^{-j}`. The coarsest level is the first
//! dyadic scale above the sample diameter, so its net has one center. Each
//! finer net extends the previous one; a center's parent is its nearest
//! coarser center. Mass flows down proportionally to subtree point counts
//! and is capped at `ρ_j^s` in every level-`j` cell; a finest cell shares
//! its mass equally among its points.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measure::DiscreteMeasure;
use crate::metric::{diameter_estimate, nested_nets, sample_resolution, Net};
use crate::point::{common_space, Point};

/// Finest scale used when the sample has no resolution of its own.
pub const DEGENERATE_SCALE: f64 = 1.0 / 1_048_576.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrostmanOptions {
    /// Finest net scale; defaults to the sample resolution.
    pub finest_scale: Option<f64>,
    /// Number of audit centers (evenly strided atoms).
    pub audit_centers: usize,
    /// Number of geometric audit radii.
    pub audit_radii: usize,
}

impl Default for FrostmanOptions {
    fn default() -> Self {
        FrostmanOptions {
            finest_scale: None,
            audit_centers: 400,
            audit_radii: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrostmanAudit {
    pub s: f64,
    /// `max ν(B(x,r)) / r^s` over the audited pairs.
    pub constant: f64,
    /// Audited `(center index, r, ν(B), ratio)` rows.
    pub rows: Vec<(usize, f64, f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrostmanResult {
    pub measure: DiscreteMeasure,
    pub s: f64,
    /// Dyadic net levels used (`j` with scale `2^{-j}`).
    pub levels: Vec<i32>,
    pub audit: FrostmanAudit,
    /// Set when the sample carries no `s`-dimensional content.
    pub degenerate: bool,
    pub notes: Vec<String>,
}

impl FrostmanResult {
    pub fn constant(&self) -> f64 {
        self.audit.constant
    }
}

/// Dyadic index `j` of the first scale `2^{-j}` strictly above `diam`.
fn root_level(diam: f64) -> i32 {
    let mut j = (-diam.log2()).floor() as i32;
    while 2f64.powi(-j) <= diam {
        j -= 1;
    }
    while 2f64.powi(-(j + 1)) > diam {
        j += 1;
    }
    j
}

/// Nearest center of `net` (lowest index on ties) for each point.
fn nearest_centers(net: &Net, points: &[Point]) -> Vec<usize> {
    net.assign(points)
        .into_iter()
        .zip(points)
        .map(|(a, p)| {
            a.unwrap_or_else(|| {
                // the net covers the sample, so this only guards foreign points
                net.centers
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (crate::metric::dist_unchecked(p, c), i))
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                    .map(|x| x.1)
                    .unwrap()
            })
        })
        .collect()
}

pub fn frostman_measure(points: &[Point], s: f64, opts: &FrostmanOptions) -> Result<FrostmanResult> {
    common_space(points)?;
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::OutOfRange {
            name: "s",
            value: s,
            interval: "[0, ∞)".into(),
        });
    }
    let mut notes = Vec::new();
    let diam = diameter_estimate(points, 512)?;
    let resolution = sample_resolution(points, 2000)?;
    let finest = match opts.finest_scale {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(invalid(format!("finest scale must be positive, got {h}"))),
        None if resolution > 0.0 => resolution,
        None => DEGENERATE_SCALE,
    };

    if diam == 0.0 {
        let mass = finest.powf(s);
        let n = points.len();
        let measure = DiscreteMeasure::new(points.to_vec(), vec![mass / n as f64; n])?;
        notes.push("degenerate: content ≈ 0 (single distinct point)".into());
        return Ok(FrostmanResult {
            audit: audit(&measure, s, finest, finest.max(1.0), opts)?,
            measure,
            s,
            levels: vec![],
            degenerate: s > 0.0,
            notes,
        });
    }

    let j0 = root_level(diam);
    let j1 = (-finest.log2()).floor() as i32;
    let j1 = j1.max(j0 + 1);
    let levels: Vec<i32> = (j0..=j1).collect();
    let scales: Vec<f64> = levels.iter().map(|&j| 2f64.powi(-j)).collect();
    let nets = nested_nets(points, &scales)?;

    // parent of each center at level k+1 within level k
    let mut parents: Vec<Vec<usize>> = Vec::with_capacity(nets.len());
    parents.push(vec![usize::MAX; nets[0].len()]);
    for k in 1..nets.len() {
        let coarse = &nets[k - 1];
        let prefix = coarse.len();
        let fresh = nearest_centers(coarse, &nets[k].centers[prefix..]);
        parents.push((0..prefix).chain(fresh).collect());
    }

    // leaf cell of every point at the finest level
    let leaf = nearest_centers(nets.last().unwrap(), points);

    // subtree point counts, bottom-up
    let mut counts: Vec<Vec<usize>> = nets.iter().map(|n| vec![0; n.len()]).collect();
    for &l in &leaf {
        counts[nets.len() - 1][l] += 1;
    }
    for k in (1..nets.len()).rev() {
        for i in 0..nets[k].len() {
            let c = counts[k][i];
            counts[k - 1][parents[k][i]] += c;
        }
    }

    // masses, top-down
    let cap = |k: usize| scales[k].powf(s);
    let mut mass: Vec<Vec<f64>> = Vec::with_capacity(nets.len());
    mass.push(counts[0].iter().map(|_| cap(0).min(1.0)).collect());
    for k in 1..nets.len() {
        let m: Vec<f64> = (0..nets[k].len())
            .map(|i| {
                let p = parents[k][i];
                let share = if counts[k - 1][p] == 0 {
                    0.0
                } else {
                    mass[k - 1][p] * counts[k][i] as f64 / counts[k - 1][p] as f64
                };
                share.min(cap(k))
            })
            .collect();
        mass.push(m);
    }
    let last = &mass[nets.len() - 1];
    let last_counts = &counts[nets.len() - 1];
    let weights: Vec<f64> = leaf
        .iter()
        .map(|&l| last[l] / last_counts[l] as f64)
        .collect();
    let measure = DiscreteMeasure::new(points.to_vec(), weights)?;
    let degenerate = s > 0.0 && measure.total_mass() <= finest.powf(s) * (1.0 + 1e-12);
    if degenerate {
        notes.push("degenerate: content ≈ 0".into());
    }
    let r_hi = diam;
    let r_lo = (2.0 * finest).max(r_hi / 100.0);
    Ok(FrostmanResult {
        audit: audit(&measure, s, r_lo, r_hi, opts)?,
        measure,
        s,
        levels,
        degenerate,
        notes,
    })
}

/// `max ν(B(x,r))/r^s` over strided atoms and geometric radii in `[r_lo, r_hi]`.
pub fn audit(
    measure: &DiscreteMeasure,
    s: f64,
    r_lo: f64,
    r_hi: f64,
    opts: &FrostmanOptions,
) -> Result<FrostmanAudit> {
    let n = measure.len();
    let stride = n.div_ceil(opts.audit_centers.max(1)).max(1);
    let ids: Vec<usize> = (0..n).step_by(stride).collect();
    let centers: Vec<Point> = ids.iter().map(|&i| measure.atoms()[i].clone()).collect();
    let k = opts.audit_radii.max(2);
    let radii: Vec<f64> = if r_hi > r_lo {
        crate::dimension::geometric_grid(r_hi, r_lo, k)?
    } else {
        vec![r_hi]
    };
    let mut rows = Vec::with_capacity(ids.len() * radii.len());
    for &r in &radii {
        let masses = measure.ball_masses(&centers, r)?;
        for (&i, m) in ids.iter().zip(masses) {
            rows.push((i, r, m, m / r.powf(s)));
        }
    }
    let constant = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    Ok(FrostmanAudit { s, constant, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::{middle_thirds_cantor, unit_interval_grid};

    #[test]
    fn root_level_is_first_scale_above_diameter() {
        assert_eq!(root_level(0.99), 0);
        assert_eq!(root_level(1.0), -1);
        assert_eq!(root_level(0.3), 1);
        assert_eq!(root_level(5.0), -3);
    }

    #[test]
    fn uniform_grid_gets_near_uniform_weights() {
        let n = 1000;
        let pts = unit_interval_grid(n);
        let f = frostman_measure(&pts, 1.0, &FrostmanOptions::default()).unwrap();
        assert!(!f.degenerate);
        assert!(f.constant() <= 4.0, "C = {}", f.constant());
        let w = f.measure.weights();
        let max = w.iter().cloned().fold(0.0, f64::max);
        assert!(max <= 4.0 / n as f64, "max weight {max}");
        for row in &f.audit.rows {
            assert!(row.2 <= f.constant() * row.1.powf(1.0) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn cantor_audit() {
        let s = 2f64.ln() / 3f64.ln();
        let f = frostman_measure(&middle_thirds_cantor(10), s, &FrostmanOptions::default()).unwrap();
        assert!(f.constant() <= 4.0, "C = {}", f.constant());
        assert!(f.measure.total_mass() > 0.1);
    }

    #[test]
    fn single_atom_is_degenerate() {
        let opts = FrostmanOptions {
            finest_scale: Some(1e-3),
            ..Default::default()
        };
        let f = frostman_measure(&[Point::plane(0.2, 0.2)], 1.0, &opts).unwrap();
        assert!(f.degenerate);
        assert!((f.measure.total_mass() - 1e-3).abs() < 1e-15);
        assert!(frostman_measure(&[Point::line(0.0)], -1.0, &opts).is_err());
    }
}
