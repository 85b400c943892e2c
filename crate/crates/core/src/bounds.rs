//! Closed-form dimension distortion bounds.
//!
//! Notation: `Q` is the homogeneous dimension of the source, `s` the
//! regularity exponent of the foliation (or the dimension of the set), `p`
//! the Sobolev exponent (`p > Q`) and `α` the image-dimension threshold.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub q: f64,
    pub s: f64,
    pub p: f64,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub s_hat: Option<f64>,
}

impl BoundParams {
    pub fn new(q: f64, s: f64, p: f64) -> BoundParams {
        BoundParams {
            q,
            s,
            p,
            alpha: None,
            s_hat: None,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> BoundParams {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_s_hat(mut self, s_hat: f64) -> BoundParams {
        self.s_hat = Some(s_hat);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.q, self.s, self.p].iter().all(|v| v.is_finite());
        if !finite || self.q <= 0.0 {
            return Err(invalid(format!("Q = {} must be a positive real", self.q)));
        }
        if !(0.0..=self.q).contains(&self.s) {
            return Err(Error::OutOfRange {
                name: "s",
                value: self.s,
                interval: format!("[0, {}]", self.q),
            });
        }
        if !(self.p > self.q) {
            return Err(Error::OutOfRange {
                name: "p",
                value: self.p,
                interval: format!("({}, ∞)", self.q),
            });
        }
        if let Some(h) = self.s_hat {
            if !(h > 0.0 && h <= self.s) {
                return Err(Error::OutOfRange {
                    name: "s_hat",
                    value: h,
                    interval: format!("(0, {}]", self.s),
                });
            }
        }
        Ok(())
    }

    fn alpha(&self) -> Result<f64> {
        self.alpha
            .ok_or_else(|| invalid("this bound needs alpha"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `p s / (p − Q + s)`: image dimension of a set of dimension `s`.
    Universal,
    /// `(Q − s) − p(1 − s/α)` for `α ∈ (s, α_max]`.
    Foliation,
    /// ℍ¹ left cosets of a horizontal line: `1 − p(1 − 3/α)`, `α ∈ (3, 3p/(p−1)]`.
    HeisLeft,
    /// ℍ¹ right cosets, Grushin parameters: `2 − p(1 − 2/α)`, `α ∈ (2, 2p/(p−2)]`.
    HeisGrushin,
    /// ℍ¹ horizontal leaves, Euclidean parameters: `2 − p(1 − 2/α)`.
    HeisVerticalEuclidean,
    /// Same family measured in the Korányi metric: `3 − p(1 − 2/α)`.
    HeisVerticalKoranyi,
}

/// `α_max = p s / (p − Q + s)`.
pub fn alpha_max(q: f64, s: f64, p: f64) -> f64 {
    p * s / (p - q + s)
}

/// Critical exponent `(p − Q) − s(p/α − 1)`; zero exactly at `α = α_max`.
pub fn critical_exponent(q: f64, s: f64, p: f64, alpha: f64) -> f64 {
    (p - q) - s * (p / alpha - 1.0)
}

/// The `(Q, s)` fixed by a bound kind, or `None` when taken from params.
fn fixed_qs(kind: BoundKind) -> Option<(f64, f64)> {
    match kind {
        BoundKind::Universal | BoundKind::Foliation => None,
        BoundKind::HeisLeft => Some((4.0, 3.0)),
        BoundKind::HeisGrushin | BoundKind::HeisVerticalEuclidean | BoundKind::HeisVerticalKoranyi => {
            Some((4.0, 2.0))
        }
    }
}

/// Half-open admissible interval `(lo, hi]` for `α`.
pub fn admissible_alpha(kind: BoundKind, bp: &BoundParams) -> Result<(f64, f64)> {
    let (q, s) = fixed_qs(kind).unwrap_or((bp.q, bp.s));
    let probe = BoundParams { q, s, ..*bp };
    probe.validate()?;
    match kind {
        BoundKind::Universal => Err(invalid("the universal bound has no alpha parameter")),
        _ => Ok((s, alpha_max(q, s, bp.p))),
    }
}

fn check_alpha(kind: BoundKind, bp: &BoundParams) -> Result<f64> {
    let alpha = bp.alpha()?;
    let (lo, hi) = admissible_alpha(kind, bp)?;
    if alpha > lo && alpha <= hi {
        Ok(alpha)
    } else {
        Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
            interval: format!("({lo}, {hi}]"),
        })
    }
}

/// Evaluate a bound. For `Universal` the value is `α_max` with `s` the
/// source dimension; every other kind bounds the dimension of the set of
/// leaf parameters whose image has dimension `≥ α`.
pub fn distortion_bounds(bp: &BoundParams, which: BoundKind) -> Result<f64> {
    match which {
        BoundKind::Universal => {
            bp.validate()?;
            Ok(alpha_max(bp.q, bp.s, bp.p))
        }
        BoundKind::Foliation => {
            let a = check_alpha(which, bp)?;
            Ok((bp.q - bp.s) - bp.p * (1.0 - bp.s / a))
        }
        BoundKind::HeisLeft => {
            let a = check_alpha(which, bp)?;
            Ok(1.0 - bp.p * (1.0 - 3.0 / a))
        }
        BoundKind::HeisGrushin | BoundKind::HeisVerticalEuclidean => {
            let a = check_alpha(which, bp)?;
            Ok(2.0 - bp.p * (1.0 - 2.0 / a))
        }
        BoundKind::HeisVerticalKoranyi => {
            let a = check_alpha(which, bp)?;
            Ok(3.0 - bp.p * (1.0 - 2.0 / a))
        }
    }
}

/// Carpet leaves: admissible `α ∈ (1, p/(p−1)]` and bound `1 − p(1 − 1/α)`.
pub fn carpet_bound(p: f64, alpha: f64) -> Result<f64> {
    distortion_bounds(&BoundParams::new(2.0, 1.0, p).with_alpha(alpha), BoundKind::Foliation)
}

/// Excess of the foliation bound at `α = p ŝ/(p − Q + ŝ)` when leaves have
/// dimension `ŝ < s`: equals `(p − Q)(s/ŝ − 1)`.
pub fn leaf_gap(bp: &BoundParams) -> Result<f64> {
    bp.validate()?;
    let h = bp.s_hat.ok_or_else(|| invalid("leaf gap needs s_hat"))?;
    Ok((bp.p - bp.q) * (bp.s / h - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let bp = BoundParams::new(2.0, 1.0, 4.0);
        assert!((distortion_bounds(&bp, BoundKind::Universal).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        let f = BoundParams::new(4.0, 3.0, 5.0).with_alpha(3.5);
        assert!((distortion_bounds(&f, BoundKind::Foliation).unwrap() - 2.0 / 7.0).abs() < 1e-12);
        assert!((distortion_bounds(&f, BoundKind::HeisLeft).unwrap() - 2.0 / 7.0).abs() < 1e-12);
        let g = BoundParams::new(4.0, 2.0, 5.0).with_alpha(2.5);
        assert!((distortion_bounds(&g, BoundKind::HeisGrushin).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn carpet_interval() {
        let bp = BoundParams::new(2.0, 1.0, 3.0);
        assert_eq!(admissible_alpha(BoundKind::Foliation, &bp).unwrap(), (1.0, 1.5));
        assert!(carpet_bound(3.0, 1.0).is_err());
        assert!(carpet_bound(3.0, 1.5).is_ok());
        let err = carpet_bound(3.0, 1.6).unwrap_err().to_string();
        assert!(err.contains("(1, 1.5]"), "{err}");
    }

    #[test]
    fn range_checks() {
        assert!(BoundParams::new(2.0, 1.0, 2.0).validate().is_err());
        assert!(BoundParams::new(2.0, 3.0, 4.0).validate().is_err());
        assert!(BoundParams::new(2.0, 1.0, 4.0).with_s_hat(1.5).validate().is_err());
        assert!(distortion_bounds(&BoundParams::new(4.0, 3.0, 5.0), BoundKind::HeisLeft).is_err());
    }

    #[test]
    fn s_equals_q_limit() {
        for p in [2.5, 4.0, 10.0] {
            assert_eq!(alpha_max(2.0, 2.0, p), 2.0);
        }
    }

    #[test]
    fn gap_matches_bound_at_leaf_threshold() {
        let bp = BoundParams::new(4.0, 2.0, 6.0).with_s_hat(1.0);
        let a = alpha_max(4.0, 1.0, 6.0);
        let direct = (4.0 - 2.0) - 6.0 * (1.0 - 2.0 / a);
        assert!((leaf_gap(&bp).unwrap() - direct).abs() < 1e-12);
    }
}
