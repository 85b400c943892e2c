//! Fat Sierpiński carpets `S_a`: at level `k` every retained square is cut
//! into an `a_k × a_k` grid and its open central cell is removed.

use std::fmt;

use rayon::prelude::*;
use rand::Rng;
use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measure::DiscreteMeasure;
use crate::point::{Point, Space};
use crate::rng;

/// The grid sizes `a_1, a_2, …`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CarpetSequence {
    /// `a_k = 2k + 1`.
    OddLinear,
    /// Explicit prefix `[a_1, a_2, …]`.
    Explicit(Vec<u32>),
}

impl Serialize for CarpetSequence {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CarpetSequence::OddLinear => s.serialize_str("2n+1"),
            CarpetSequence::Explicit(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for CarpetSequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct SeqVisitor;

        impl<'de> Visitor<'de> for SeqVisitor {
            type Value = CarpetSequence;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("\"2n+1\" or an array of odd integers >= 3")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                match v.replace(' ', "").as_str() {
                    "2n+1" => Ok(CarpetSequence::OddLinear),
                    other => Err(E::custom(format!("unknown carpet sequence `{other}`"))),
                }
            }

            fn visit_seq<A: de::SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<Self::Value, A::Error> {
                let mut v = Vec::new();
                while let Some(a) = seq.next_element::<u32>()? {
                    v.push(a);
                }
                Ok(CarpetSequence::Explicit(v))
            }
        }

        d.deserialize_any(SeqVisitor)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarpetSpec {
    pub sequence: CarpetSequence,
    pub max_depth: usize,
}

impl Default for CarpetSpec {
    fn default() -> Self {
        CarpetSpec {
            sequence: CarpetSequence::OddLinear,
            max_depth: 4,
        }
    }
}

impl CarpetSpec {
    pub fn new(sequence: CarpetSequence, max_depth: usize) -> Result<CarpetSpec> {
        let spec = CarpetSpec { sequence, max_depth };
        spec.validate()?;
        Ok(spec)
    }

    pub fn odd_linear(max_depth: usize) -> CarpetSpec {
        CarpetSpec::new(CarpetSequence::OddLinear, max_depth).expect("max_depth >= 1")
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(invalid("carpet max_depth must be at least 1"));
        }
        if let CarpetSequence::Explicit(v) = &self.sequence {
            if v.len() < self.max_depth {
                return Err(invalid(format!(
                    "carpet sequence has {} terms but max_depth is {}",
                    v.len(),
                    self.max_depth
                )));
            }
            if let Some(bad) = v.iter().find(|&&a| a < 3 || a % 2 == 0) {
                return Err(invalid(format!("carpet grid size {bad} is not an odd integer >= 3")));
            }
        }
        Ok(())
    }

    /// `a_k` for `k ≥ 1`.
    pub fn a(&self, k: usize) -> u32 {
        assert!(k >= 1, "carpet levels start at 1");
        match &self.sequence {
            CarpetSequence::OddLinear => 2 * k as u32 + 1,
            CarpetSequence::Explicit(v) => v[k - 1],
        }
    }

    /// Partial sums `Σ_{k ≤ m} a_k⁻²` for `m = 1..=depth`.
    pub fn partial_sums(&self, depth: usize) -> Vec<f64> {
        (1..=depth)
            .scan(0.0, |acc, k| {
                let a = self.a(k) as f64;
                *acc += 1.0 / (a * a);
                Some(*acc)
            })
            .collect()
    }

    /// Side length of a level-`depth` cell, `∏ a_k⁻¹`.
    pub fn cell_side(&self, depth: usize) -> f64 {
        (1..=depth).map(|k| 1.0 / self.a(k) as f64).product()
    }

    /// Natural measure of a retained level-`depth` cell, `∏ (a_k² − 1)⁻¹`.
    pub fn cell_mass(&self, depth: usize) -> f64 {
        (1..=depth)
            .map(|k| {
                let a = self.a(k) as f64;
                1.0 / (a * a - 1.0)
            })
            .product()
    }

    /// Number of retained cells at `depth`.
    pub fn cell_count(&self, depth: usize) -> u128 {
        (1..=depth)
            .map(|k| {
                let a = self.a(k) as u128;
                a * a - 1
            })
            .product()
    }

    fn check_depth(&self, depth: usize) -> Result<()> {
        self.validate()?;
        if depth == 0 || depth > self.max_depth {
            return Err(Error::OutOfRange {
                name: "depth",
                value: depth as f64,
                interval: format!("[1, {}]", self.max_depth),
            });
        }
        Ok(())
    }

    /// Lower-left corner and side of the cell with the given address.
    pub fn cell_of_address(&self, address: &[u32]) -> Result<(f64, f64, f64)> {
        self.check_depth(address.len())?;
        let (mut x, mut y, mut side) = (0.0, 0.0, 1.0);
        for (k, &digit) in address.iter().enumerate() {
            let a = self.a(k + 1);
            let (row, col) = (digit / a, digit % a);
            if row >= a || is_central(a, row, col) {
                return Err(invalid(format!("address digit {digit} is not a retained cell of a {a}×{a} grid")));
            }
            side /= a as f64;
            x += col as f64 * side;
            y += row as f64 * side;
        }
        Ok((x, y, side))
    }
}

#[inline]
fn is_central(a: u32, row: u32, col: u32) -> bool {
    let c = (a - 1) / 2;
    row == c && col == c
}

/// Lower-left corners and side of the retained depth-`depth` cells whose
/// column meets the open strip `lo < x < hi`, in address order.
pub(crate) fn cells_in_strip(spec: &CarpetSpec, depth: usize, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
    spec.check_depth(depth)?;
    let mut cells = vec![(0.0, 0.0)];
    let mut side = 1.0;
    for k in 1..=depth {
        let a = spec.a(k);
        let child = side / a as f64;
        let mut next = Vec::new();
        for &(x, y) in &cells {
            for row in 0..a {
                for col in 0..a {
                    let cx = x + col as f64 * child;
                    if is_central(a, row, col) || cx + child <= lo || cx >= hi {
                        continue;
                    }
                    next.push((cx, y + row as f64 * child));
                }
            }
        }
        cells = next;
        side = child;
    }
    Ok(cells)
}

/// Index of `v ∈ [0,1]` in a grid of `a` half-open cells, with `1` in the
/// last cell.
#[inline]
fn grid_index(v: f64, a: u32) -> u32 {
    ((v * a as f64).floor() as i64).clamp(0, a as i64 - 1) as u32
}

/// Whether `p` survives the first `depth` levels. Accepts euclidean-2 and
/// carpet points.
pub fn carpet_contains(spec: &CarpetSpec, p: &Point, depth: usize) -> Result<bool> {
    match p.space() {
        Space::Euclidean(2) | Space::Carpet => {}
        other => return Err(invalid(format!("carpet membership needs a planar point, got {other}"))),
    }
    spec.check_depth(depth)?;
    let (mut x, mut y) = (p.coords()[0], p.coords()[1]);
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(Error::OutsideUnitSquare { x, y });
    }
    for k in 1..=depth {
        let a = spec.a(k);
        let (col, row) = (grid_index(x, a), grid_index(y, a));
        if is_central(a, row, col) {
            return Ok(false);
        }
        x = (x * a as f64 - col as f64).clamp(0.0, 1.0);
        y = (y * a as f64 - row as f64).clamp(0.0, 1.0);
    }
    Ok(true)
}

/// Cell-center sample of the carpet with its natural measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarpetSample {
    pub spec: CarpetSpec,
    pub depth: usize,
    pub measure: DiscreteMeasure,
    pub exhaustive: bool,
}

impl CarpetSample {
    pub fn points(&self) -> &[Point] {
        self.measure.atoms()
    }
}

/// Refuse to enumerate more cells than this.
pub const MAX_EXHAUSTIVE_CELLS: u128 = 20_000_000;

/// Retained depth-`depth` cells as weighted cell centers.
///
/// `count = None` enumerates every cell (mass `∏(a_k²−1)⁻¹` each). With
/// `Some(count)`, each draw descends by choosing one of the `a_k² − 1`
/// retained children uniformly on its own random stream, and the drawn
/// cells share mass equally.
pub fn carpet_sample(
    spec: &CarpetSpec,
    depth: usize,
    count: Option<usize>,
    seed: u64,
) -> Result<CarpetSample> {
    spec.check_depth(depth)?;
    let exhaustive = count.is_none();
    let addresses: Vec<Vec<u32>> = match count {
        None => {
            let cells = spec.cell_count(depth);
            if cells > MAX_EXHAUSTIVE_CELLS {
                return Err(invalid(format!(
                    "exhaustive carpet sample would have {cells} cells; pass a draw count"
                )));
            }
            let mut out: Vec<Vec<u32>> = vec![Vec::new()];
            for k in 1..=depth {
                let a = spec.a(k);
                let kids: Vec<u32> = (0..a * a).filter(|&d| !is_central(a, d / a, d % a)).collect();
                out = out
                    .into_iter()
                    .flat_map(|addr| {
                        kids.iter().map(move |&d| {
                            let mut next = addr.clone();
                            next.push(d);
                            next
                        })
                    })
                    .collect();
            }
            out
        }
        Some(0) => return Err(invalid("carpet sample count must be at least 1")),
        Some(n) => (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let mut r = rng::stream(seed, i);
                (1..=depth)
                    .map(|k| {
                        let a = spec.a(k);
                        let c = (a - 1) / 2;
                        let mut d = r.random_range(0..a * a - 1);
                        if d >= c * a + c {
                            d += 1;
                        }
                        d
                    })
                    .collect()
            })
            .collect(),
    };
    let mass = if exhaustive {
        spec.cell_mass(depth)
    } else {
        1.0 / addresses.len() as f64
    };
    let mut atoms = Vec::with_capacity(addresses.len());
    for addr in addresses {
        let (x, y, side) = spec.cell_of_address(&addr)?;
        atoms.push(Point::carpet(x + side / 2.0, y + side / 2.0, Some(addr)));
    }
    let weights = vec![mass; atoms.len()];
    Ok(CarpetSample {
        spec: spec.clone(),
        depth,
        measure: DiscreteMeasure::new(atoms, weights)?,
        exhaustive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_examples() {
        let spec = CarpetSpec::new(CarpetSequence::Explicit(vec![3, 5, 7]), 3).unwrap();
        assert!(!carpet_contains(&spec, &Point::plane(0.5, 0.5), 1).unwrap());
        assert!(!carpet_contains(&spec, &Point::plane(0.4, 0.4), 1).unwrap());
        for d in 1..=3 {
            assert!(carpet_contains(&spec, &Point::plane(0.0, 0.0), d).unwrap());
            assert!(carpet_contains(&spec, &Point::plane(1.0, 1.0), d).unwrap());
        }
        // (0.1, 0.1) sits in cell (0,0), then at local (0.3,0.3) in cell (1,1) of the 5×5 grid
        assert!(carpet_contains(&spec, &Point::plane(0.1, 0.1), 1).unwrap());
        assert!(carpet_contains(&spec, &Point::plane(0.1, 0.1), 2).unwrap());
        // local 0.5 of the first cell hits the 5×5 center
        assert!(!carpet_contains(&spec, &Point::plane(1.0 / 6.0, 1.0 / 6.0), 2).unwrap());
        assert!(matches!(
            carpet_contains(&spec, &Point::plane(1.5, 0.0), 1),
            Err(Error::OutsideUnitSquare { .. })
        ));
        assert!(carpet_contains(&spec, &Point::plane(0.0, 0.0), 4).is_err());
    }

    #[test]
    fn spec_validation_and_json() {
        assert!(CarpetSpec::new(CarpetSequence::Explicit(vec![3, 4]), 2).is_err());
        assert!(CarpetSpec::new(CarpetSequence::Explicit(vec![1, 3]), 2).is_err());
        assert!(CarpetSpec::new(CarpetSequence::Explicit(vec![3]), 2).is_err());
        let s: CarpetSpec = serde_json::from_str(r#"{"sequence":"2n+1","max_depth":3}"#).unwrap();
        assert_eq!(s, CarpetSpec::odd_linear(3));
        let e: CarpetSpec = serde_json::from_str(r#"{"sequence":[3,5,9],"max_depth":2}"#).unwrap();
        assert_eq!(e.a(3), 9);
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"sequence":"2n+1","max_depth":3}"#);
        let back: CarpetSpec = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn exhaustive_depth_one() {
        let spec = CarpetSpec::new(CarpetSequence::Explicit(vec![3]), 1).unwrap();
        let s = carpet_sample(&spec, 1, None, 0).unwrap();
        assert_eq!(s.points().len(), 8);
        assert!(s.measure.weights().iter().all(|&w| w == 0.125));
        assert!(s.points().iter().all(|p| p.coords() != [0.5, 0.5]));
    }

    #[test]
    fn exhaustive_mass_is_one() {
        let spec = CarpetSpec::odd_linear(3);
        for depth in 1..=3 {
            let s = carpet_sample(&spec, depth, None, 0).unwrap();
            assert_eq!(s.points().len() as u128, spec.cell_count(depth));
            assert!((s.measure.total_mass() - 1.0).abs() < 1e-12);
            for p in s.points() {
                assert!(carpet_contains(&spec, p, depth).unwrap());
            }
        }
    }

    #[test]
    fn random_draws_are_retained_and_reproducible() {
        let spec = CarpetSpec::odd_linear(4);
        let a = carpet_sample(&spec, 4, Some(500), 9).unwrap();
        let b = carpet_sample(&spec, 4, Some(500), 9).unwrap();
        assert_eq!(a, b);
        assert!((a.measure.total_mass() - 1.0).abs() < 1e-12);
        for p in a.points() {
            assert!(carpet_contains(&spec, p, 4).unwrap());
            let addr = p.address().unwrap();
            let (x, y, side) = spec.cell_of_address(addr).unwrap();
            assert!((p.coords()[0] - x - side / 2.0).abs() < 1e-15);
            assert!((p.coords()[1] - y - side / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn partial_sums_converge() {
        let spec = CarpetSpec::odd_linear(1);
        let sums = spec.partial_sums(2000);
        // Σ_{k≥1} (2k+1)⁻² = π²/8 − 1
        let limit = std::f64::consts::PI.powi(2) / 8.0 - 1.0;
        assert!(sums.windows(2).all(|w| w[1] > w[0]));
        assert!(sums.iter().all(|&s| s < limit));
        assert!(limit - sums[1999] < 1.0 / (4.0 * 2000.0));
    }
}
