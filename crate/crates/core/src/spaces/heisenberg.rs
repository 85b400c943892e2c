//! Heisenberg group ℍⁿ in exponential coordinates `(x, t)`, `x ∈ ℝ²ⁿ`.
//!
//! Group law `(x,t)*(x',t') = (x+x', t+t'+2ω(x,x'))` with
//! `ω(x,x') = Σᵢ (x_{n+i} x'_i − x_i x'_{n+i})`. The Korányi gauge
//! `‖(x,t)‖ = (|x|⁴ + t²)^{1/4}` induces the left-invariant metric
//! `d(p,q) = ‖p⁻¹*q‖`, and `δ_r(x,t) = (rx, r²t)` scales it by `r`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::point::{Point, Space};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeisenbergParams {
    pub n: usize,
}

impl HeisenbergParams {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("heisenberg rank n must be >= 1"));
        }
        Ok(HeisenbergParams { n })
    }

    pub fn point_dim(self) -> usize {
        2 * self.n + 1
    }

    /// Homogeneous dimension `Q = 2n + 2`.
    pub fn homogeneous_dim(self) -> f64 {
        (2 * self.n + 2) as f64
    }

    pub fn space(self) -> Space {
        Space::Heisenberg(self.n)
    }
}

impl Default for HeisenbergParams {
    fn default() -> Self {
        HeisenbergParams { n: 1 }
    }
}

fn rank(p: &Point) -> Result<usize> {
    match p.space() {
        Space::Heisenberg(n) => Ok(n),
        other => Err(invalid(format!("expected a heisenberg point, got {other}"))),
    }
}

/// Standard symplectic form on ℝ²ⁿ.
#[inline]
pub(crate) fn omega(x: &[f64], xp: &[f64]) -> f64 {
    let n = x.len() / 2;
    (0..n).map(|i| x[n + i] * xp[i] - x[i] * xp[n + i]).sum()
}

/// Korányi gauge of raw coordinates `(x, t)`.
#[inline]
pub(crate) fn gauge(c: &[f64]) -> f64 {
    let (x, t) = c.split_at(c.len() - 1);
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (r2 * r2 + t[0] * t[0]).sqrt().sqrt()
}

/// `d(p,q)` on raw coordinates of equal rank.
#[inline]
pub(crate) fn dist_raw(p: &[f64], q: &[f64]) -> f64 {
    let m = p.len() - 1;
    let (xp, tp) = (&p[..m], p[m]);
    let (xq, tq) = (&q[..m], q[m]);
    let mut r2 = 0.0;
    for i in 0..m {
        let d = xq[i] - xp[i];
        r2 += d * d;
    }
    // p⁻¹*q = (xq − xp, tq − tp − 2ω(xp, xq))
    let t = tq - tp - 2.0 * omega(xp, xq);
    (r2 * r2 + t * t).sqrt().sqrt()
}

pub(crate) fn mul_raw(p: &[f64], q: &[f64]) -> Vec<f64> {
    let m = p.len() - 1;
    let mut out: Vec<f64> = (0..m).map(|i| p[i] + q[i]).collect();
    out.push(p[m] + q[m] + 2.0 * omega(&p[..m], &q[..m]));
    out
}

pub fn heis_mul(p: &Point, q: &Point) -> Result<Point> {
    rank(p)?;
    p.check_space(q)?;
    Ok(p.with_coords(&mul_raw(p.coords(), q.coords())))
}

pub fn heis_inverse(p: &Point) -> Result<Point> {
    rank(p)?;
    let neg: Vec<f64> = p.coords().iter().map(|c| -c).collect();
    Ok(p.with_coords(&neg))
}

pub fn identity(n: usize) -> Point {
    Point::new(Space::Heisenberg(n), &vec![0.0; 2 * n + 1]).expect("identity is finite")
}

pub fn koranyi_norm(p: &Point) -> Result<f64> {
    rank(p)?;
    Ok(gauge(p.coords()))
}

pub fn koranyi_dist(p: &Point, q: &Point) -> Result<f64> {
    rank(p)?;
    p.check_space(q)?;
    Ok(dist_raw(p.coords(), q.coords()))
}

/// Intrinsic dilation `δ_r`.
pub fn dilate(r: f64, p: &Point) -> Result<Point> {
    rank(p)?;
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid(format!("dilation factor must be positive, got {r}")));
    }
    let c = p.coords();
    let m = c.len() - 1;
    let mut out: Vec<f64> = c[..m].iter().map(|v| r * v).collect();
    out.push(r * r * c[m]);
    Ok(p.with_coords(&out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn h1() -> impl Strategy<Value = Point> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(x, y, t)| Point::h1(x, y, t))
    }

    #[test]
    fn group_law_example() {
        let p = heis_mul(&Point::h1(1.0, 0.0, 0.0), &Point::h1(0.0, 1.0, 0.0)).unwrap();
        assert_eq!(p.coords(), &[1.0, 1.0, -2.0]);
    }

    #[test]
    fn norm_examples() {
        let e = identity(1);
        assert_eq!(koranyi_dist(&e, &Point::h1(0.0, 0.0, 1.0)).unwrap(), 1.0);
        assert_eq!(koranyi_dist(&e, &Point::h1(-2.5, 0.0, 0.0)).unwrap(), 2.5);
        assert_eq!(koranyi_dist(&e, &Point::h1(0.0, 0.0, 9.0)).unwrap(), 3.0);
        assert_eq!(dilate(2.0, &Point::h1(1.0, 1.0, 1.0)).unwrap().coords(), &[2.0, 2.0, 4.0]);
    }

    #[test]
    fn rank_mismatch_and_bad_dilation() {
        let p = Point::h1(0.0, 0.0, 0.0);
        let q = identity(2);
        assert!(heis_mul(&p, &q).is_err());
        assert!(dilate(0.0, &p).is_err());
        assert!(koranyi_norm(&Point::plane(0.0, 0.0)).is_err());
    }

    #[test]
    fn higher_rank_symplectic_form() {
        // n = 2: ω(e₁, e₃) = x₃x'₁ − x₁x'₃ with x = e₁, x' = e₃ gives −1.
        let p = Point::heisenberg(&[1.0, 0.0, 0.0, 0.0], 0.0).unwrap();
        let q = Point::heisenberg(&[0.0, 0.0, 1.0, 0.0], 0.0).unwrap();
        assert_eq!(heis_mul(&p, &q).unwrap().coords()[4], -2.0);
    }

    proptest! {
        #[test]
        fn identity_and_inverse(p in h1()) {
            let e = identity(1);
            prop_assert_eq!(heis_mul(&e, &p).unwrap(), p.clone());
            let inv = heis_inverse(&p).unwrap();
            let prod = heis_mul(&p, &inv).unwrap();
            prop_assert!(prod.coords().iter().all(|c| c.abs() < 1e-12));
        }

        #[test]
        fn associativity(p in h1(), q in h1(), r in h1()) {
            let a = heis_mul(&heis_mul(&p, &q).unwrap(), &r).unwrap();
            let b = heis_mul(&p, &heis_mul(&q, &r).unwrap()).unwrap();
            for (u, v) in a.coords().iter().zip(b.coords()) {
                prop_assert!((u - v).abs() <= 1e-12);
            }
        }

        #[test]
        fn metric_axioms(p in h1(), q in h1(), r in h1()) {
            let dpq = koranyi_dist(&p, &q).unwrap();
            prop_assert_eq!(dpq, koranyi_dist(&q, &p).unwrap());
            let dpr = koranyi_dist(&p, &r).unwrap();
            let drq = koranyi_dist(&r, &q).unwrap();
            prop_assert!(dpq <= dpr + drq + 1e-12);
        }

        #[test]
        fn left_invariance_and_homogeneity(g in h1(), p in h1(), q in h1(), r in 0.1..5.0f64) {
            let d = koranyi_dist(&p, &q).unwrap();
            let dg = koranyi_dist(&heis_mul(&g, &p).unwrap(), &heis_mul(&g, &q).unwrap()).unwrap();
            prop_assert!((d - dg).abs() <= 1e-12 * d.max(1.0));
            let dd = koranyi_dist(&dilate(r, &p).unwrap(), &dilate(r, &q).unwrap()).unwrap();
            prop_assert!((dd - r * d).abs() <= 1e-12 * (r * d).max(1.0));
            let pq = heis_mul(&p, &q).unwrap();
            let lhs = dilate(r, &pq).unwrap();
            let rhs = heis_mul(&dilate(r, &p).unwrap(), &dilate(r, &q).unwrap()).unwrap();
            for (u, v) in lhs.coords().iter().zip(rhs.coords()) {
                prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
            }
        }
    }
}
