//! Finitely supported measures.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::index::CellIndex;
use crate::metric::dist_unchecked;
use crate::point::{common_space, format_f64, Point, Space};

/// Neumaier-compensated sum; the result depends only on the input order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Weighted atoms in a single space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<Point>,
    weights: Vec<f64>,
    total_mass: f64,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<Point>, weights: Vec<f64>) -> Result<DiscreteMeasure> {
        if atoms.len() != weights.len() {
            return Err(invalid(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if !atoms.is_empty() {
            common_space(&atoms)?;
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(invalid(format!("measure weight {w} is not a finite nonnegative number")));
        }
        let total_mass = compensated_sum(weights.iter().copied());
        Ok(DiscreteMeasure {
            atoms,
            weights,
            total_mass,
        })
    }

    /// Equal weights summing to one.
    pub fn uniform(atoms: Vec<Point>) -> Result<DiscreteMeasure> {
        if atoms.is_empty() {
            return Err(Error::EmptyInput("measure atoms"));
        }
        let w = 1.0 / atoms.len() as f64;
        let n = atoms.len();
        DiscreteMeasure::new(atoms, vec![w; n])
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn space(&self) -> Option<Space> {
        self.atoms.first().map(Point::space)
    }

    /// Same atoms, weights multiplied by `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Result<DiscreteMeasure> {
        DiscreteMeasure::new(self.atoms.clone(), self.weights.iter().map(|w| w * c).collect())
    }

    /// `f♯μ`: each atom is mapped, weights are carried over unchanged.
    pub fn push_forward<F>(&self, f: F) -> Result<DiscreteMeasure>
    where
        F: Fn(&Point) -> Result<Point> + Sync + Send,
    {
        let atoms = self.atoms.par_iter().map(f).collect::<Result<Vec<_>>>()?;
        let mut out = DiscreteMeasure::new(atoms, self.weights.clone())?;
        out.total_mass = self.total_mass;
        Ok(out)
    }

    /// `μ(B(center, r))` for the open ball.
    pub fn ball_mass(&self, center: &Point, r: f64) -> Result<f64> {
        if let Some(a) = self.atoms.first() {
            center.check_space(a)?;
        }
        if !(r > 0.0) {
            return Ok(0.0);
        }
        Ok(compensated_sum(
            self.atoms
                .iter()
                .zip(&self.weights)
                .filter(|(a, _)| dist_unchecked(center, a) < r)
                .map(|(_, w)| *w),
        ))
    }

    /// `μ(B(c, r))` for many centers at one radius, using a bucket index.
    pub fn ball_masses(&self, centers: &[Point], r: f64) -> Result<Vec<f64>> {
        let Some(space) = self.space() else {
            return Ok(vec![0.0; centers.len()]);
        };
        for c in centers {
            if c.space() != space {
                return Err(Error::SpaceMismatch {
                    left: c.space(),
                    right: space,
                });
            }
        }
        if !(r > 0.0) {
            return Ok(vec![0.0; centers.len()]);
        }
        let idx = CellIndex::from_points(space, r, &self.atoms);
        Ok(centers
            .par_iter()
            .map(|c| {
                let mut ids: Vec<u32> = Vec::new();
                idx.scan(c, |id| {
                    if dist_unchecked(c, &self.atoms[id as usize]) < r {
                        ids.push(id);
                    }
                    true
                });
                ids.sort_unstable();
                compensated_sum(ids.into_iter().map(|i| self.weights[i as usize]))
            })
            .collect())
    }

    /// CSV rows `space,coord0,…,coordk,weight`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let width = self.space().map_or(0, Space::coord_len);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["space".to_string()];
        header.extend((0..width).map(|i| format!("coord{i}")));
        header.push("weight".into());
        w.write_record(&header)?;
        for (a, wt) in self.atoms.iter().zip(&self.weights) {
            let mut row = vec![a.space().label()];
            row.extend(a.coords().iter().map(|c| format_f64(*c)));
            row.push(format_f64(*wt));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<DiscreteMeasure> {
        let mut r = csv::Reader::from_reader(input);
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for record in r.records() {
            let record = record?;
            let fields: Vec<&str> = record.iter().collect();
            if fields.len() < 2 {
                return Err(invalid("measure row needs a space and a weight"));
            }
            let space = Space::parse(fields[0])?;
            let nums = fields[1..]
                .iter()
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| invalid(format!("bad number `{f}`: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            let (coords, w) = nums.split_at(nums.len() - 1);
            atoms.push(Point::new(space, coords)?);
            weights.push(w[0]);
        }
        DiscreteMeasure::new(atoms, weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn rejects_bad_weights() {
        let a = vec![Point::line(0.0)];
        assert!(DiscreteMeasure::new(a.clone(), vec![-1.0]).is_err());
        assert!(DiscreteMeasure::new(a.clone(), vec![f64::NAN]).is_err());
        assert!(DiscreteMeasure::new(a, vec![]).is_err());
        assert!(DiscreteMeasure::new(vec![Point::line(0.0), Point::plane(0.0, 0.0)], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn ball_masses_match_direct() {
        let atoms: Vec<Point> = (0..50).map(|i| Point::h1(i as f64 * 0.02, 0.1, -0.3)).collect();
        let m = DiscreteMeasure::uniform(atoms.clone()).unwrap();
        for r in [0.01, 0.1, 0.5] {
            let fast = m.ball_masses(&atoms, r).unwrap();
            for (c, f) in atoms.iter().zip(fast) {
                assert_eq!(f, m.ball_mass(c, r).unwrap());
            }
        }
    }

    #[test]
    fn push_forward_keeps_mass() {
        let m = DiscreteMeasure::new(
            vec![Point::line(0.0), Point::line(1.0), Point::line(2.0)],
            vec![0.1, 0.2, 0.3],
        )
        .unwrap();
        let f = m.push_forward(|p| Ok(Point::plane(p.coords()[0], 0.0))).unwrap();
        assert_eq!(f.total_mass(), m.total_mass());
        assert_eq!(f.space(), Some(Space::Euclidean(2)));
    }

    #[test]
    fn csv_round_trip() {
        let m = DiscreteMeasure::new(
            vec![Point::h1(0.1, 0.2, 0.3), Point::h1(-1.0, 0.0, 1e-300)],
            vec![0.25, 0.75],
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("space,coord0,coord1,coord2,weight\n"));
        assert_eq!(DiscreteMeasure::read_csv(buf.as_slice()).unwrap(), m);
    }
}
