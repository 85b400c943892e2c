//! Deterministic test sets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::point::Point;
use crate::rng;

/// Left endpoints of the `2^depth` intervals of the middle-thirds Cantor
/// construction, in increasing order.
pub fn middle_thirds_cantor(depth: u32) -> Vec<Point> {
    let side = 3f64.powi(-(depth as i32));
    (0u64..1 << depth)
        .map(|code| {
            // binary digit b at level k contributes 2·b·3^{-k}
            let mut x = 0u64;
            for k in 0..depth {
                let bit = (code >> (depth - 1 - k)) & 1;
                x = 3 * x + 2 * bit;
            }
            Point::line(x as f64 * side)
        })
        .collect()
}

/// Lower-left corners of the `4^depth` squares of the planar four-corner
/// Cantor dust with contraction `1/4` (dimension 1).
pub fn cantor_dust(depth: u32) -> Vec<Point> {
    let side = 4f64.powi(-(depth as i32));
    (0u64..1 << (2 * depth))
        .map(|code| {
            let (mut x, mut y) = (0u64, 0u64);
            for k in 0..depth {
                let digit = (code >> (2 * (depth - 1 - k))) & 3;
                x = 4 * x + 3 * (digit & 1);
                y = 4 * y + 3 * (digit >> 1);
            }
            Point::plane(x as f64 * side, y as f64 * side)
        })
        .collect()
}

/// `n` independent uniform points in `[0,1]^d`.
pub fn uniform_cube(n: usize, d: usize, seed: u64) -> Vec<Point> {
    let mut r = rng::stream(seed, 0);
    (0..n)
        .map(|_| Point::euclidean(&(0..d).map(|_| r.random::<f64>()).collect::<Vec<_>>()))
        .collect()
}

/// `n` evenly spaced points on `[0,1]`.
pub fn unit_interval_grid(n: usize) -> Vec<Point> {
    match n {
        0 => Vec::new(),
        1 => vec![Point::line(0.0)],
        _ => (0..n).map(|i| Point::line(i as f64 / (n - 1) as f64)).collect(),
    }
}

/// `n` evenly spaced points on the circle of the given center and radius.
pub fn circle(center: (f64, f64), radius: f64, n: usize) -> Vec<Point> {
    (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            Point::plane(center.0 + radius * a.cos(), center.1 + radius * a.sin())
        })
        .collect()
}

/// Named compact sets that configs can refer to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetSpec {
    CantorDust { depth: u32 },
    MiddleThirds { depth: u32 },
    UniformSquare { n: usize },
    Circle { center: (f64, f64), radius: f64, n: usize },
    Csv { path: String },
}

impl SetSpec {
    /// Hausdorff dimension when known in closed form.
    pub fn known_dimension(&self) -> Option<f64> {
        match self {
            SetSpec::CantorDust { .. } | SetSpec::Circle { .. } => Some(1.0),
            SetSpec::MiddleThirds { .. } => Some(2f64.ln() / 3f64.ln()),
            SetSpec::UniformSquare { .. } => Some(2.0),
            SetSpec::Csv { .. } => None,
        }
    }

    pub fn build(&self, seed: u64) -> Result<Vec<Point>> {
        match self {
            SetSpec::CantorDust { depth } if *depth <= 12 => Ok(cantor_dust(*depth)),
            SetSpec::MiddleThirds { depth } if *depth <= 24 => Ok(middle_thirds_cantor(*depth)),
            SetSpec::CantorDust { .. } | SetSpec::MiddleThirds { .. } => {
                Err(invalid("cantor depth too large for an explicit sample"))
            }
            SetSpec::UniformSquare { n } => Ok(uniform_cube(*n, 2, seed)),
            SetSpec::Circle { center, radius, n } => Ok(circle(*center, *radius, *n)),
            SetSpec::Csv { path } => {
                let f = std::fs::File::open(path)?;
                crate::point::read_points_csv(f)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cantor_endpoints() {
        let c = middle_thirds_cantor(2);
        let xs: Vec<f64> = c.iter().map(|p| p.coords()[0]).collect();
        assert_eq!(xs, vec![0.0, 2.0 / 9.0, 6.0 / 9.0, 8.0 / 9.0]);
    }

    #[test]
    fn dust_corners() {
        let d = cantor_dust(1);
        let pts: Vec<(f64, f64)> = d.iter().map(|p| (p.coords()[0], p.coords()[1])).collect();
        assert_eq!(pts, vec![(0.0, 0.0), (0.75, 0.0), (0.0, 0.75), (0.75, 0.75)]);
        assert_eq!(cantor_dust(3).len(), 64);
    }

    #[test]
    fn set_spec_json() {
        let s: SetSpec = serde_json::from_str(r#"{"kind":"cantor_dust","depth":5}"#).unwrap();
        assert_eq!(s.build(0).unwrap().len(), 1024);
        assert_eq!(s.known_dimension(), Some(1.0));
    }
}
