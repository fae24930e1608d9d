//! Dormand–Prince 5(4) with the standard fourth-order dense output.

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use nalgebra::DVector;

use crate::dynamics::VectorField;
use crate::error::Result;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One attempted step with everything needed for dense output.
#[derive(Debug, Clone)]
pub struct Step {
    pub h: f64,
    pub y0: DVector<f64>,
    pub y1: DVector<f64>,
    pub k1: DVector<f64>,
    pub k7: DVector<f64>,
    /// Weighted RMS error estimate; accept when ≤ 1.
    pub error: f64,
    dense: DVector<f64>,
}

impl Step {
    /// Interpolated state at fraction θ ∈ [0, 1] of the step.
    pub fn interpolate(&self, theta: f64) -> DVector<f64> {
        let rc2 = &self.y1 - &self.y0;
        let rc3 = &self.k1 * self.h - &rc2;
        let rc4 = &rc2 - &self.k7 * self.h - &rc3;
        let t1 = 1.0 - theta;
        &self.y0 + (rc2 + (rc3 + (rc4 + &self.dense * t1) * theta) * t1) * theta
    }
}

/// Takes one step of size `h` from `y0` where `k1 = f(y0)`.
pub fn step(field: &dyn VectorField, y0: &DVector<f64>, k1: &DVector<f64>, h: f64, rtol: f64, atol: f64) -> Result<Step> {
    let f = |y: DVector<f64>| field.eval(y.as_slice());
    let k2 = f(y0 + k1 * (h * A21))?;
    let k3 = f(y0 + (k1 * A31 + &k2 * A32) * h)?;
    let k4 = f(y0 + (k1 * A41 + &k2 * A42 + &k3 * A43) * h)?;
    let k5 = f(y0 + (k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h)?;
    let k6 = f(y0 + (k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h)?;
    let y1 = y0 + (k1 * A71 + &k3 * A73 + &k4 * A74 + &k5 * A75 + &k6 * A76) * h;
    let k7 = f(y1.clone())?;
    let err = (k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;
    let mut acc = 0.0;
    for i in 0..y0.len() {
        let sc = atol + rtol * y0[i].abs().max(y1[i].abs());
        acc += (err[i] / sc).powi(2);
    }
    let error = if y0.is_empty() { 0.0 } else { (acc / y0.len() as f64).sqrt() };
    let dense = (k1 * D1 + &k3 * D3 + &k4 * D4 + &k5 * D5 + &k6 * D6 + &k7 * D7) * h;
    Ok(Step { h, y0: y0.clone(), y1, k1: k1.clone(), k7, error, dense })
}

/// Next step size from an error estimate.
pub fn next_step_size(h: f64, error: f64) -> f64 {
    let fac = if error == 0.0 { 10.0 } else { (0.9 * error.powf(-0.2)).clamp(0.2, 10.0) };
    h * fac
}

/// Starting step size heuristic.
pub fn initial_step(field: &dyn VectorField, y0: &DVector<f64>, k1: &DVector<f64>, rtol: f64, atol: f64) -> Result<f64> {
    let scale = |y: &DVector<f64>, i: usize| atol + rtol * y[i].abs();
    let n = y0.len().max(1) as f64;
    let d0 = (y0.iter().enumerate().map(|(i, v)| (v / scale(y0, i)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (k1.iter().enumerate().map(|(i, v)| (v / scale(y0, i)).powi(2)).sum::<f64>() / n).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = y0 + k1 * h0;
    let k2 = field.eval(y1.as_slice())?;
    let d2 = ((&k2 - k1).iter().enumerate().map(|(i, v)| (v / scale(y0, i)).powi(2)).sum::<f64>() / n).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    Ok((100.0 * h0).min(h1))
}
