//! Combining several encodings into one for a new start/goal pair.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::DmpModel;
use crate::error::{Error, Result};

/// Residual above which the coefficient system is reported as infeasible.
const FEASIBILITY_TOL: f64 = 1e-9;

/// Subset of the spatial axes `x, y, z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AxisMask(pub [bool; 3]);

impl AxisMask {
    pub const NONE: AxisMask = AxisMask([false; 3]);
    pub const XY: AxisMask = AxisMask([true, true, false]);
    pub const XYZ: AxisMask = AxisMask([true; 3]);

    pub fn contains(self, axis: usize) -> bool {
        self.0[axis]
    }

    pub fn axes(self) -> impl Iterator<Item = usize> {
        (0..3).filter(move |&d| self.0[d])
    }

    pub fn is_empty(self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    /// Axes along which `points` are not all equal (within `tol`).
    pub fn varying(points: &[Vector3<f64>], tol: f64) -> Self {
        let mut mask = [false; 3];
        if let Some(first) = points.first() {
            for (d, m) in mask.iter_mut().enumerate() {
                *m = points.iter().any(|p| (p[d] - first[d]).abs() > tol);
            }
        }
        AxisMask(mask)
    }
}

/// Minimum-norm `alpha` with `sum(alpha) = 1` and `sum(alpha_n g_n) = g`
/// along every axis in `varying`.
///
/// Returns [`Error::Infeasible`] when the constraints cannot be met exactly.
pub fn minimal_norm_coefficients(
    goals: &[Vector3<f64>],
    target: &Vector3<f64>,
    varying: AxisMask,
) -> Result<Vec<f64>> {
    let m = goals.len();
    if m == 0 {
        return Err(Error::invalid("need at least one goal"));
    }
    if !target.iter().all(|v| v.is_finite())
        || goals.iter().any(|g| !g.iter().all(|v| v.is_finite()))
    {
        return Err(Error::invalid("goals must be finite"));
    }
    let axes: Vec<usize> = varying.axes().collect();
    let rows = axes.len() + 1;
    let mut c = DMatrix::zeros(rows, m);
    let mut rhs = DVector::zeros(rows);
    for (r, &d) in axes.iter().enumerate() {
        for (n, g) in goals.iter().enumerate() {
            c[(r, n)] = g[d];
        }
        rhs[r] = target[d];
    }
    c.row_mut(rows - 1).fill(1.0);
    rhs[rows - 1] = 1.0;

    let svd = c.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-12 * rows.max(m) as f64;
    let alpha = svd
        .solve(&rhs, eps)
        .map_err(|e| Error::Conditioning(e.to_string()))?;
    let residual = (&c * &alpha - &rhs).norm();
    if !(residual <= FEASIBILITY_TOL) {
        return Err(Error::Infeasible { residual });
    }
    Ok(alpha.iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpGeneralization {
    pub model: DmpModel,
    pub coefficients: Vec<f64>,
}

/// Builds a model for `new_start -> new_goal` from encodings of nearby movements.
///
/// Coefficients match the new goal offset `g - s` along the `varying` axes;
/// weights of those axes are combined with the coefficients, weights of the
/// remaining axes are averaged without weighting. The duration is the
/// coefficient-weighted average, falling back to the mean if that is not
/// positive.
pub fn dmp_generalize(
    models: &[DmpModel],
    new_start: Vector3<f64>,
    new_goal: Vector3<f64>,
    varying: AxisMask,
) -> Result<DmpGeneralization> {
    let first = models
        .first()
        .ok_or_else(|| Error::invalid("need at least one model"))?;
    for m in models {
        if m.kernels != first.kernels || m.kappa != first.kappa || m.dt != first.dt {
            return Err(Error::invalid(
                "models differ in kernel count, width or time step",
            ));
        }
    }
    let offsets: Vec<Vector3<f64>> = models.iter().map(|m| m.goal() - m.start()).collect();
    let alpha = minimal_norm_coefficients(&offsets, &(new_goal - new_start), varying)?;

    let k = first.kernels;
    let count = models.len() as f64;
    let mut weights = [vec![0.0; k], vec![0.0; k], vec![0.0; k]];
    for (d, w) in weights.iter_mut().enumerate() {
        for (a, m) in alpha.iter().zip(models) {
            let coef = if varying.contains(d) { *a } else { 1.0 / count };
            for (wi, mi) in w.iter_mut().zip(&m.weights[d]) {
                *wi += coef * mi;
            }
        }
    }
    let weighted: f64 = alpha.iter().zip(models).map(|(a, m)| a * m.duration).sum();
    let duration = if weighted > 0.0 {
        weighted
    } else {
        models.iter().map(|m| m.duration).sum::<f64>() / count
    };
    let model = DmpModel {
        weights,
        start: new_start.into(),
        goal: new_goal.into(),
        duration,
        ..first.clone()
    };
    Ok(DmpGeneralization {
        model,
        coefficients: alpha,
    })
}
