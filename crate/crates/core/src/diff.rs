//! Central finite differences with one level of Richardson extrapolation.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// Default step for derivatives of model fields.
pub const DEFAULT_STEP: f64 = 1e-6;

/// Derivative of a scalar function of one variable at 0.
pub fn derivative(f: impl Fn(f64) -> f64, step: f64) -> f64 {
    let d = |h: f64| (f(h) - f(-h)) / (2.0 * h);
    let coarse = d(step);
    let fine = d(0.5 * step);
    (4.0 * fine - coarse) / 3.0
}

/// [`derivative`] for a fallible function.
pub fn try_derivative(f: impl Fn(f64) -> Result<f64>, step: f64) -> Result<f64> {
    let d = |h: f64| -> Result<f64> { Ok((f(h)? - f(-h)?) / (2.0 * h)) };
    let coarse = d(step)?;
    let fine = d(0.5 * step)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Plain central difference, no extrapolation.
pub fn central(f: impl Fn(f64) -> f64, step: f64) -> f64 {
    (f(step) - f(-step)) / (2.0 * step)
}

/// Derivative of a vector-valued curve at 0.
pub fn derivative_vec(
    f: impl Fn(f64) -> Result<DVector<f64>>,
    step: f64,
) -> Result<DVector<f64>> {
    let d = |h: f64| -> Result<DVector<f64>> { Ok((f(h)? - f(-h)?) / (2.0 * h)) };
    let coarse = d(step)?;
    let fine = d(0.5 * step)?;
    Ok((fine * 4.0 - coarse) / 3.0)
}

/// Central-difference gradient of a scalar function.
pub fn gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> DVector<f64> {
    let mut probe: Vec<f64> = x.to_vec();
    DVector::from_fn(x.len(), |i, _| {
        probe[i] = x[i] + step;
        let up = f(&probe);
        probe[i] = x[i] - step;
        let down = f(&probe);
        probe[i] = x[i];
        (up - down) / (2.0 * step)
    })
}

/// Directional derivative of `f` at `x` along `v`.
pub fn directional(
    f: impl Fn(&[f64]) -> Result<DVector<f64>>,
    x: &[f64],
    v: &[f64],
    step: f64,
) -> Result<DVector<f64>> {
    derivative_vec(
        |s| {
            let probe: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + s * b).collect();
            f(&probe)
        },
        step,
    )
}

/// Jacobian of a vector map, one column per coordinate direction.
pub fn jacobian(
    f: impl Fn(&[f64]) -> Result<DVector<f64>>,
    x: &[f64],
    step: f64,
) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut e = alloc::vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        cols.push(directional(&f, x, &e, step)?);
        e[j] = 0.0;
    }
    Ok(DMatrix::from_columns(&cols))
}
