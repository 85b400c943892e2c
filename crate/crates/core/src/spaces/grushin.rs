//! Two-sided estimate for the Carnot–Carathéodory distance on the Grushin
//! plane. No geodesics are computed; every comparison carries the bracket.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::point::{Point, Space};

/// Default bracket constant.
pub const DEFAULT_C1: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrushinBracket {
    pub lower: f64,
    pub upper: f64,
    pub core: f64,
    pub c1: f64,
}

impl GrushinBracket {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// `max{|u₁−u₂|, min{√|v₁−v₂|, |v₁−v₂| / max(|u₁|,|u₂|)}}`, with the ratio
/// read as `+∞` when `u₁ = u₂ = 0`.
#[inline]
pub(crate) fn core_raw(w1: &[f64], w2: &[f64]) -> f64 {
    let du = (w1[0] - w2[0]).abs();
    let dv = (w1[1] - w2[1]).abs();
    let umax = w1[0].abs().max(w2[0].abs());
    let ratio = if umax == 0.0 { f64::INFINITY } else { dv / umax };
    du.max(dv.sqrt().min(ratio))
}

pub fn grushin_bracket(w1: &Point, w2: &Point, c1: f64) -> Result<GrushinBracket> {
    for w in [w1, w2] {
        if w.space() != Space::Grushin {
            return Err(invalid(format!("expected a grushin point, got {}", w.space())));
        }
    }
    if !(c1 >= 1.0) || !c1.is_finite() {
        return Err(invalid(format!("bracket constant must be >= 1, got {c1}")));
    }
    let core = core_raw(w1.coords(), w2.coords());
    Ok(GrushinBracket {
        lower: core / c1,
        upper: c1 * core,
        core,
        c1,
    })
}
