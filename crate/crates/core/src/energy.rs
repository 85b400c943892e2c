//! Discrete Riesz energies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::measure::{compensated_sum, DiscreteMeasure};
use crate::metric::dist_unchecked;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    /// `Σ_{i≠j} wᵢ wⱼ d(xᵢ,xⱼ)^{-t}`; `+∞` when coincident atoms meet `t > 0`.
    pub value: f64,
    /// Ordered pairs `i ≠ j` with `d(xᵢ,xⱼ) = 0` and positive weights.
    pub coincident_pairs: usize,
}

impl EnergyReport {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Off-diagonal `t`-energy of a discrete measure.
pub fn t_energy(nu: &DiscreteMeasure, t: f64) -> Result<EnergyReport> {
    if !(t >= 0.0) {
        return Err(invalid(format!("energy exponent must be >= 0, got {t}")));
    }
    if nu.len() < 2 {
        return Err(invalid("t-energy needs at least two atoms"));
    }
    let atoms = nu.atoms();
    let w = nu.weights();
    let rows: Vec<(f64, usize)> = (0..atoms.len())
        .into_par_iter()
        .map(|i| {
            let mut coincident = 0;
            let row = compensated_sum((0..atoms.len()).filter(|&j| j != i).map(|j| {
                let d = dist_unchecked(&atoms[i], &atoms[j]);
                let ww = w[i] * w[j];
                if t == 0.0 {
                    ww
                } else if d == 0.0 {
                    if ww > 0.0 {
                        coincident += 1;
                    }
                    0.0
                } else {
                    ww * d.powf(-t)
                }
            }));
            (row, coincident)
        })
        .collect();
    let coincident_pairs: usize = rows.iter().map(|r| r.1).sum();
    let value = if coincident_pairs > 0 {
        f64::INFINITY
    } else {
        compensated_sum(rows.iter().map(|r| r.0))
    };
    Ok(EnergyReport {
        t,
        value,
        coincident_pairs,
    })
}
