//! Elastic impact maps: specular reflection, the nonholonomic map on the
//! constraint distribution and its global linear extension, plus the
//! augmented differential of an impact map.
//!
//! Velocity-side functions take `(q, q̇)` and return the post-impact
//! velocity with its multipliers; q is left unchanged by every map.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use nalgebra::DVector;

use crate::diff;
use crate::dynamics::VectorField;
use crate::error::{Error, Result};
use crate::geometry::{Frame, ImpactSurface, MechanicalSystem};

/// |dh(q̇)| below this multiple of ‖q̇‖_g counts as grazing.
pub const GRAZING_TOL: f64 = 1e-8;
/// Relative floor for dh(π_D ∇h) against dh(∇h).
pub const DENOMINATOR_TOL: f64 = 1e-12;
/// Relative tolerance on η(q̇) for the restricted map.
pub const CONSTRAINT_TOL: f64 = 1e-8;

/// Post-impact velocity and the multipliers (ε along ∇h, λ along W^k).
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactOutcome {
    pub velocity: DVector<f64>,
    pub epsilon: f64,
    pub lambda: DVector<f64>,
}

/// A recorded impact along a hybrid trajectory. States are phase vectors.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImpactEvent {
    pub time: f64,
    pub surface: usize,
    pub label: String,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
    /// Configuration velocities before and after.
    pub velocity_pre: Vec<f64>,
    pub velocity_post: Vec<f64>,
    pub epsilon: Option<f64>,
    pub lambda: Vec<f64>,
    /// Time since the previous impact, or since the start of the flow.
    pub dwell: f64,
    pub grazing: bool,
}

struct Normal {
    dh: DVector<f64>,
    grad: DVector<f64>,
    dh_grad: f64,
}

fn normal(frame: &Frame, surface: &ImpactSurface, q: &[f64]) -> Normal {
    let dh = surface.differential(q);
    let grad = &frame.g_inv * &dh;
    let dh_grad = dh.dot(&grad);
    Normal { dh, grad, dh_grad }
}

fn check_approach(frame: &Frame, dh_v: f64, v: &DVector<f64>) -> Result<()> {
    let speed = (2.0 * frame.kinetic(v)).sqrt();
    let tolerance = GRAZING_TOL * speed;
    if dh_v.abs() < tolerance || speed == 0.0 {
        return Err(Error::Grazing { normal_speed: dh_v.abs(), tolerance });
    }
    if dh_v > 0.0 {
        return Err(Error::NotApproaching(dh_v));
    }
    Ok(())
}

/// q̇ − 2 dh(q̇)/dh(∇h) ∇h, without guard checks.
pub fn specular_reflection(sys: &MechanicalSystem, surface: &ImpactSurface, q: &[f64], v: &DVector<f64>) -> Result<ImpactOutcome> {
    let frame = sys.frame(q)?;
    let nrm = normal(&frame, surface, q);
    let epsilon = -2.0 * nrm.dh.dot(v) / nrm.dh_grad;
    Ok(ImpactOutcome { velocity: v + &nrm.grad * epsilon, epsilon, lambda: DVector::zeros(0) })
}

/// Specular impact. Requires an approaching, non-grazing velocity.
pub fn holonomic_impact(sys: &MechanicalSystem, surface: &ImpactSurface, q: &[f64], v: &DVector<f64>) -> Result<ImpactOutcome> {
    let frame = sys.frame(q)?;
    let dh_v = surface.differential(q).dot(v);
    check_approach(&frame, dh_v, v)?;
    specular_reflection(sys, surface, q, v)
}

struct ConstrainedNormal {
    base: Normal,
    /// m_{αβ} dh(W^β)
    weighted: DVector<f64>,
    denominator: f64,
}

fn constrained_normal(frame: &Frame, surface: &ImpactSurface, q: &[f64]) -> Result<ConstrainedNormal> {
    let base = normal(frame, surface, q);
    let dh_w = frame.w.transpose() * &base.dh;
    let weighted = &frame.mass_inv * &dh_w;
    let denominator = base.dh_grad - dh_w.dot(&weighted);
    if !(denominator > DENOMINATOR_TOL * base.dh_grad) {
        return Err(Error::VanishingDenominator(denominator));
    }
    Ok(ConstrainedNormal { base, weighted, denominator })
}

/// Globally defined map: the g-reflection of q̇ across π_D ∇h. Linear in q̇,
/// valid off the constraint distribution, no guard checks.
pub fn global_reflection(sys: &MechanicalSystem, surface: &ImpactSurface, q: &[f64], v: &DVector<f64>) -> Result<ImpactOutcome> {
    let frame = sys.frame(q)?;
    let cn = constrained_normal(&frame, surface, q)?;
    let dh_v = cn.base.dh.dot(v);
    // m_{αβ} dh(W^β) η^α(q̇)
    let s = cn.weighted.dot(&(&frame.eta * v));
    let epsilon = 2.0 * (s - dh_v) / cn.denominator;
    let lambda = &cn.weighted * (-2.0 * (s - dh_v) / cn.denominator);
    let velocity = v + &frame.w * &lambda + &cn.base.grad * epsilon;
    Ok(ImpactOutcome { velocity, epsilon, lambda })
}

/// Nonholonomic impact for velocities in the constraint distribution.
pub fn nonholonomic_impact(sys: &MechanicalSystem, surface: &ImpactSurface, q: &[f64], v: &DVector<f64>) -> Result<ImpactOutcome> {
    let frame = sys.frame(q)?;
    let cn = constrained_normal(&frame, surface, q)?;
    let dh_v = cn.base.dh.dot(v);
    check_approach(&frame, dh_v, v)?;
    let eta_v = &frame.eta * v;
    let scale = (frame.eta.norm() * v.norm()).max(1.0);
    if eta_v.norm() > CONSTRAINT_TOL * scale {
        return Err(Error::OffConstraint(eta_v.norm()));
    }
    Ok(restricted_formula(&frame, &cn, v))
}

fn restricted_formula(frame: &Frame, cn: &ConstrainedNormal, v: &DVector<f64>) -> ImpactOutcome {
    let dh_v = cn.base.dh.dot(v);
    let epsilon = -2.0 * dh_v / cn.denominator;
    let lambda = &cn.weighted * (2.0 * dh_v / cn.denominator);
    let velocity = v + &frame.w * &lambda + &cn.base.grad * epsilon;
    ImpactOutcome { velocity, epsilon, lambda }
}

/// The restricted nonholonomic formula evaluated for any q̇, without
/// checks. Off the constraint distribution it neither conserves energy nor
/// the constraint values.
pub fn restricted_reflection(sys: &MechanicalSystem, surface: &ImpactSurface, q: &[f64], v: &DVector<f64>) -> Result<ImpactOutcome> {
    let frame = sys.frame(q)?;
    let cn = constrained_normal(&frame, surface, q)?;
    Ok(restricted_formula(&frame, &cn, v))
}

/// The global nonholonomic impact with guard checks; q̇ may violate the
/// constraints.
pub fn nonholonomic_impact_global(sys: &MechanicalSystem, surface: &ImpactSurface, q: &[f64], v: &DVector<f64>) -> Result<ImpactOutcome> {
    let frame = sys.frame(q)?;
    let dh_v = surface.differential(q).dot(v);
    check_approach(&frame, dh_v, v)?;
    global_reflection(sys, surface, q, v)
}

/// Augmented differential of an impact map at `x` applied to `v`.
///
/// `guard_grad` is dΓ at x for the defining function Γ of the impact set,
/// `impact` the impact map extended smoothly off the impact set.
pub fn augmented_differential(
    field: &dyn VectorField,
    guard_grad: &DVector<f64>,
    impact: impl Fn(&[f64]) -> Result<DVector<f64>>,
    x: &[f64],
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    let xf = field.eval(x)?;
    let rate = guard_grad.dot(&xf);
    let scale = guard_grad.norm() * xf.norm();
    if !(rate.abs() > GRAZING_TOL * scale) {
        return Err(Error::TransversalityFailure(rate.abs()));
    }
    let a = guard_grad.dot(v) / rate;
    let tangent = v - &xf * a;
    let post = impact(x)?;
    let mut out = field.eval(post.as_slice())? * a;
    if tangent.norm() > 0.0 {
        out += diff::directional(&impact, x, tangent.as_slice(), diff::DEFAULT_STEP)?;
    }
    Ok(out)
}
