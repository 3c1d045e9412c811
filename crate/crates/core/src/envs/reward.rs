use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::plant::PlantKind;
use crate::error::{Error, Result};

/// Weights of `r = −xᵀQx − uᵀRu − λγ (+ alive bonus)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    /// State cost, one inner vector per row.
    pub q: Vec<Vec<f64>>,
    /// Input cost, one inner vector per row.
    pub r: Vec<Vec<f64>>,
    /// Penalty per transmitted input.
    pub lambda: f64,
    /// Added on every step that does not terminate the episode.
    pub alive_bonus: f64,
}

impl RewardWeights {
    pub fn default_for(kind: PlantKind) -> Self {
        match kind {
            PlantKind::Pendulum => Self {
                q: diag(&[1.0, 0.1]),
                r: diag(&[0.1]),
                lambda: 1.0,
                alive_bonus: 0.0,
            },
            PlantKind::CartPole => Self {
                q: diag(&[1.0, 0.1, 1.0, 0.1]),
                r: diag(&[0.01]),
                lambda: 1.0,
                alive_bonus: 1.0,
            },
        }
    }

    pub fn validate(&self, state_dim: usize, input_dim: usize) -> Result<()> {
        check_psd("reward.q", &self.q, state_dim, false)?;
        check_psd("reward.r", &self.r, input_dim, false)?;
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid("reward.lambda", format!("must be finite and >= 0, got {}", self.lambda)));
        }
        if !self.alive_bonus.is_finite() {
            return Err(Error::invalid("reward.alive_bonus", "must be finite"));
        }
        Ok(())
    }

    pub fn q_matrix(&self) -> DMatrix<f64> {
        to_dmatrix(&self.q)
    }

    pub fn r_matrix(&self) -> DMatrix<f64> {
        to_dmatrix(&self.r)
    }

    pub fn state_cost(&self, x: &[f64]) -> f64 {
        quadratic_form(&self.q, x)
    }

    pub fn input_cost(&self, u: &[f64]) -> f64 {
        quadratic_form(&self.r, u)
    }
}

pub fn diag(values: &[f64]) -> Vec<Vec<f64>> {
    (0..values.len())
        .map(|i| (0..values.len()).map(|j| if i == j { values[i] } else { 0.0 }).collect())
        .collect()
}

pub(crate) fn to_dmatrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, m, |i, j| rows[i][j])
}

pub fn quadratic_form(m: &[Vec<f64>], v: &[f64]) -> f64 {
    m.iter()
        .zip(v)
        .map(|(row, vi)| vi * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

/// Checks shape, symmetry and positive semi-definiteness (definiteness when
/// `strict`).
pub(crate) fn check_psd(field: &str, m: &[Vec<f64>], n: usize, strict: bool) -> Result<()> {
    if m.len() != n || m.iter().any(|r| r.len() != n) {
        return Err(Error::invalid(field, format!("must be {n}x{n}")));
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid(field, "entries must be finite"));
    }
    for i in 0..n {
        for j in 0..i {
            if (m[i][j] - m[j][i]).abs() > 1e-12 * (1.0 + m[i][j].abs()) {
                return Err(Error::invalid(field, "must be symmetric"));
            }
        }
    }
    let eig = to_dmatrix(m).symmetric_eigenvalues();
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = eig.iter().fold(1.0_f64, |s, v| s.max(v.abs()));
    if min < -1e-12 * scale || (strict && min <= 0.0) {
        return Err(Error::invalid(field, format!("must be positive {}definite", if strict { "" } else { "semi-" })));
    }
    Ok(())
}

/// `−xᵀQx − uᵀRu − λγ`, plus the alive bonus unless the step terminated.
pub fn reward(x: &[f64], u_applied: &[f64], gamma: bool, weights: &RewardWeights, terminated: bool) -> f64 {
    let comm = if gamma { weights.lambda } else { 0.0 };
    let bonus = if terminated { 0.0 } else { weights.alive_bonus };
    -weights.state_cost(x) - weights.input_cost(u_applied) - comm + bonus
}
