//! Central-difference Jacobians of autonomous vector fields.

use super::{NumError, OdeField};
use nalgebra::DMatrix;

/// Jacobian of `field` at `y` by central differences with a single step
/// `h' = h (1 + ||y||)` in every direction; entry error is O(h'^2).
pub fn jacobian_fd(field: &dyn OdeField, y: &[f64], h: f64) -> Result<DMatrix<f64>, NumError> {
    let n = field.dim();
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scales = vec![1.0 + norm; n];
    jacobian_fd_scaled(field, y, h, &scales)
}

/// Central-difference Jacobian with a per-coordinate probe step
/// `h_j = h * scales[j]`. Needed when state blocks live on very different
/// scales; an isotropic step loses the small blocks' derivatives in
/// truncation error.
pub fn jacobian_fd_scaled(
    field: &dyn OdeField,
    y: &[f64],
    h: f64,
    scales: &[f64],
) -> Result<DMatrix<f64>, NumError> {
    let n = field.dim();
    assert_eq!(y.len(), n);
    assert_eq!(scales.len(), n);
    let mut jac = DMatrix::zeros(n, n);
    let mut yp = y.to_vec();
    let mut ym = y.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        let hj = h * scales[j];
        yp[j] = y[j] + hj;
        ym[j] = y[j] - hj;
        field
            .eval(0.0, &yp, &mut fp)
            .map_err(|_| NumError::NonFiniteState { t: 0.0 })?;
        field
            .eval(0.0, &ym, &mut fm)
            .map_err(|_| NumError::NonFiniteState { t: 0.0 })?;
        for i in 0..n {
            let v = (fp[i] - fm[i]) / (2.0 * hj);
            if !v.is_finite() {
                return Err(NumError::NonFiniteState { t: 0.0 });
            }
            jac[(i, j)] = v;
        }
        yp[j] = y[j];
        ym[j] = y[j];
    }
    Ok(jac)
}
