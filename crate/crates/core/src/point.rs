//! Tagged points over the supported spaces and their CSV layout.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{invalid, Error, Result};

/// The metric space a point lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    /// ℝⁿ with the Euclidean metric.
    Euclidean(usize),
    /// ℍⁿ in exponential coordinates `(x ∈ ℝ²ⁿ, t)` with the Korányi metric.
    Heisenberg(usize),
    /// Grushin plane `(u, v)`; distances are the two-sided bracket core.
    Grushin,
    /// Planar carpet point, Euclidean metric on `[0,1]²`.
    Carpet,
}

impl Space {
    pub fn coord_len(self) -> usize {
        match self {
            Space::Euclidean(d) => d,
            Space::Heisenberg(n) => 2 * n + 1,
            Space::Grushin | Space::Carpet => 2,
        }
    }

    pub fn label(self) -> String {
        match self {
            Space::Euclidean(d) => format!("euclidean{d}"),
            Space::Heisenberg(n) => format!("heisenberg{n}"),
            Space::Grushin => "grushin".to_string(),
            Space::Carpet => "carpet".to_string(),
        }
    }

    pub fn parse(label: &str) -> Result<Space> {
        let label = label.trim();
        let numeric = |prefix: &str| -> Option<usize> {
            label.strip_prefix(prefix).and_then(|rest| rest.parse().ok())
        };
        let space = if label == "grushin" {
            Space::Grushin
        } else if label == "carpet" {
            Space::Carpet
        } else if let Some(d) = numeric("euclidean") {
            Space::Euclidean(d)
        } else if let Some(n) = numeric("heisenberg") {
            Space::Heisenberg(n)
        } else {
            return Err(invalid(format!("unknown space label `{label}`")));
        };
        match space {
            Space::Euclidean(0) | Space::Heisenberg(0) => {
                Err(invalid(format!("space `{label}` has no dimensions")))
            }
            s => Ok(s),
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub type Coords = SmallVec<[f64; 3]>;

/// A point in one of the supported spaces.
///
/// Carpet points may carry a digit address: the index `row * a_k + col` of
/// the retained cell chosen at each level `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    space: Space,
    coords: Coords,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    address: Option<Vec<u32>>,
}

impl Point {
    pub fn new(space: Space, coords: &[f64]) -> Result<Point> {
        if coords.len() != space.coord_len() {
            return Err(invalid(format!(
                "{space} point needs {} coordinates, got {}",
                space.coord_len(),
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(invalid(format!("non-finite coordinate {bad}")));
        }
        Ok(Point {
            space,
            coords: SmallVec::from_slice(coords),
            address: None,
        })
    }

    /// Euclidean point. Panics on non-finite input; use [`Point::new`] for
    /// untrusted data.
    pub fn euclidean(coords: &[f64]) -> Point {
        Point::new(Space::Euclidean(coords.len()), coords).expect("finite euclidean coordinates")
    }

    pub fn line(x: f64) -> Point {
        Point::euclidean(&[x])
    }

    pub fn plane(x: f64, y: f64) -> Point {
        Point::euclidean(&[x, y])
    }

    /// ℍ¹ point `(x, y, t)`.
    pub fn h1(x: f64, y: f64, t: f64) -> Point {
        Point::new(Space::Heisenberg(1), &[x, y, t]).expect("finite heisenberg coordinates")
    }

    /// ℍⁿ point from horizontal part `x ∈ ℝ²ⁿ` and vertical `t`.
    pub fn heisenberg(x: &[f64], t: f64) -> Result<Point> {
        if x.is_empty() || x.len() % 2 != 0 {
            return Err(invalid("heisenberg horizontal part must have even, positive length"));
        }
        let mut c: Vec<f64> = x.to_vec();
        c.push(t);
        Point::new(Space::Heisenberg(x.len() / 2), &c)
    }

    pub fn grushin(u: f64, v: f64) -> Point {
        Point::new(Space::Grushin, &[u, v]).expect("finite grushin coordinates")
    }

    pub fn carpet(x: f64, y: f64, address: Option<Vec<u32>>) -> Point {
        let mut p = Point::new(Space::Carpet, &[x, y]).expect("finite carpet coordinates");
        p.address = address;
        p
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn address(&self) -> Option<&[u32]> {
        self.address.as_deref()
    }

    /// Same tag, new coordinates (address dropped).
    pub(crate) fn with_coords(&self, coords: &[f64]) -> Point {
        debug_assert_eq!(coords.len(), self.space.coord_len());
        Point {
            space: self.space,
            coords: SmallVec::from_slice(coords),
            address: None,
        }
    }

    pub(crate) fn check_space(&self, other: &Point) -> Result<()> {
        if self.space == other.space {
            Ok(())
        } else {
            Err(Error::SpaceMismatch {
                left: self.space,
                right: other.space,
            })
        }
    }
}

/// All points share one tag; returns it.
pub fn common_space(points: &[Point]) -> Result<Space> {
    let first = points.first().ok_or(Error::EmptyInput("point sample"))?;
    for p in &points[1..] {
        first.check_space(p)?;
    }
    Ok(first.space)
}

/// Write `space,coord0,...,coordk` rows. A header row names the columns of
/// the widest point.
pub fn write_points_csv<W: Write>(points: &[Point], out: W) -> Result<()> {
    let width = points.iter().map(|p| p.coords.len()).max().unwrap_or(0);
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let mut header = vec!["space".to_string()];
    header.extend((0..width).map(|i| format!("coord{i}")));
    w.write_record(&header)?;
    for p in points {
        let mut row = vec![p.space.label()];
        row.extend(p.coords.iter().map(|c| format_f64(*c)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points_csv<R: Read>(input: R) -> Result<Vec<Point>> {
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(input);
    let mut points = Vec::new();
    for record in r.records() {
        let record = record?;
        let mut fields = record.iter();
        let space = Space::parse(fields.next().ok_or(Error::EmptyInput("csv row"))?)?;
        let coords = fields
            .filter(|f| !f.trim().is_empty())
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| invalid(format!("bad coordinate `{f}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        points.push(Point::new(space, &coords)?);
    }
    Ok(points)
}

/// Shortest representation that round-trips exactly.
pub(crate) fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_counts_are_enforced() {
        assert!(Point::new(Space::Heisenberg(1), &[0.0, 1.0]).is_err());
        assert!(Point::new(Space::Heisenberg(2), &[0.0; 5]).is_ok());
        assert!(Point::new(Space::Grushin, &[0.0, 1.0, 2.0]).is_err());
        assert!(Point::new(Space::Euclidean(2), &[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn labels_parse_back() {
        for s in [
            Space::Euclidean(3),
            Space::Heisenberg(2),
            Space::Grushin,
            Space::Carpet,
        ] {
            assert_eq!(Space::parse(&s.label()).unwrap(), s);
        }
        assert!(Space::parse("euclidean0").is_err());
        assert!(Space::parse("sphere2").is_err());
    }

    #[test]
    fn csv_round_trip_mixed_widths() {
        let pts = vec![
            Point::line(0.1),
            Point::h1(1.0, -2.0, 1.0 / 3.0),
            Point::grushin(0.5, 1e-17),
        ];
        let mut buf = Vec::new();
        write_points_csv(&pts, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("space,coord0,coord1,coord2\n"));
        assert_eq!(read_points_csv(buf.as_slice()).unwrap(), pts);
    }
}
