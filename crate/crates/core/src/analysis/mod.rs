//! Sampled checks of hybrid invariance: Lie derivatives, the impact
//! conditions on forms, hybrid Jacobians, divergences and the cohomology
//! equation.

mod forms;

pub use forms::SampledKForm;

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::diff;
use crate::dynamics::VectorField;
use crate::error::{Error, Result};
use crate::flow::{self, IntegratorConfig, Termination};
use crate::impacts::GRAZING_TOL;
use crate::linalg;
use crate::system::HybridSystem;

/// Length of the short flows used to differentiate pullbacks.
pub const LIE_TIME_STEP: f64 = 1e-3;
/// Step for pushforwards through short flow maps.
pub const PUSHFORWARD_STEP: f64 = 1e-5;
/// Step for Jacobians of finite-time flow maps.
pub const FLOW_JACOBIAN_STEP: f64 = 1e-5;
/// No impact may fall this close to either end of a flow whose Jacobian
/// is differenced.
pub const STENCIL_TIME: f64 = 1e-3;

const BASIS_ATTEMPTS: usize = 8;

/// Residuals of the three conditions characterising hybrid invariance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InvarianceReport {
    pub form: alloc::string::String,
    pub degree: usize,
    pub lie_derivative: f64,
    pub energy_condition: f64,
    pub specular_condition: f64,
    pub samples: usize,
    pub impact_samples: usize,
    pub tolerance: f64,
    pub lie_pass: bool,
    pub energy_pass: bool,
    pub specular_pass: bool,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.lie_pass && self.energy_pass && self.specular_pass
    }
}

/// Uniform direction on the unit sphere.
fn random_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-8 {
            return v / norm;
        }
    }
}

/// `count` random vectors tangent to the level set with normal `normal`.
fn random_tangents<R: Rng + ?Sized>(normal: &DVector<f64>, count: usize, rng: &mut R) -> Vec<DVector<f64>> {
    let nn = normal.norm_squared();
    (0..count)
        .map(|_| {
            let v = random_vector(normal.len(), rng);
            if nn > 0.0 {
                let t = &v - normal * (normal.dot(&v) / nn);
                let norm = t.norm();
                if norm > 1e-8 {
                    t / norm
                } else {
                    t
                }
            } else {
                v
            }
        })
        .collect()
}

/// Orthonormal basis of the hyperplane orthogonal to `normal`, from random
/// draws.
fn tangent_basis<R: Rng + ?Sized>(normal: &DVector<f64>, rng: &mut R) -> Result<Vec<DVector<f64>>> {
    let dim = normal.len();
    let unit = normal.normalize();
    'attempt: for _ in 0..BASIS_ATTEMPTS {
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(dim - 1);
        for _ in 0..dim - 1 {
            let mut v = random_vector(dim, rng);
            v -= &unit * unit.dot(&v);
            for b in &basis {
                v -= b * b.dot(&v);
            }
            let norm = v.norm();
            if norm < 1e-6 {
                continue 'attempt;
            }
            basis.push(v / norm);
        }
        return Ok(basis);
    }
    Err(Error::DegenerateBasis)
}

fn check_transversal(sys: &HybridSystem, surface: usize, x: &[f64]) -> Result<()> {
    let dgamma = sys.guard_gradient(surface, x);
    let xf = sys.field.eval(x)?;
    let rate = dgamma.dot(&xf);
    if !(rate.abs() > GRAZING_TOL * dgamma.norm() * xf.norm()) {
        return Err(Error::TransversalityFailure(rate.abs()));
    }
    Ok(())
}

/// Classical fourth-order Runge–Kutta over a short signed time.
fn short_flow(field: &dyn VectorField, x: &[f64], t: f64) -> Result<DVector<f64>> {
    const SUBSTEPS: usize = 4;
    let h = t / SUBSTEPS as f64;
    let mut y = linalg::to_dvector(x);
    for _ in 0..SUBSTEPS {
        let k1 = field.eval(y.as_slice())?;
        let k2 = field.eval((&y + &k1 * (0.5 * h)).as_slice())?;
        let k3 = field.eval((&y + &k2 * (0.5 * h)).as_slice())?;
        let k4 = field.eval((&y + &k3 * h).as_slice())?;
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Ok(y)
}

/// (φ_t*α)_x(v₁, …, v_k).
fn pullback(form: &SampledKForm, field: &dyn VectorField, x: &[f64], vectors: &[DVector<f64>], t: f64) -> Result<f64> {
    let moved = short_flow(field, x, t)?;
    let pushed = vectors
        .iter()
        .map(|v| diff::directional(|y| short_flow(field, y, t), x, v.as_slice(), PUSHFORWARD_STEP))
        .collect::<Result<Vec<_>>>()?;
    form.eval(moved.as_slice(), &pushed)
}

/// Largest |ℒ_X α| over the points, each evaluated on random arguments.
pub fn lie_derivative_residual<R: Rng + ?Sized>(
    form: &SampledKForm,
    field: &dyn VectorField,
    points: &[Vec<f64>],
    rng: &mut R,
) -> Result<f64> {
    if form.degree() > field.dim() {
        return Err(Error::Dimension { expected: field.dim(), got: form.degree() });
    }
    let mut worst: f64 = 0.0;
    for x in points {
        let vectors: Vec<DVector<f64>> = (0..form.degree()).map(|_| random_vector(field.dim(), rng)).collect();
        let rate = diff::try_derivative(|t| pullback(form, field, x, &vectors, t), LIE_TIME_STEP)?;
        worst = worst.max(rate.abs());
    }
    Ok(worst)
}

/// Largest |(i_Xα)(Δx)(Δ_*ũ) − (i_Xα)(x)(ũ)| over impact points, with
/// random ũ tangent to the impact set.
pub fn energy_condition_residual<R: Rng + ?Sized>(
    form: &SampledKForm,
    sys: &HybridSystem,
    impact_points: &[(usize, Vec<f64>)],
    rng: &mut R,
) -> Result<f64> {
    if form.degree() == 0 {
        return Ok(0.0);
    }
    let contracted = form.interior(sys.field.clone());
    condition_residual(&contracted, sys, impact_points, rng)
}

/// Largest |α(Δx)(Δ_*ũ) − α(x)(ũ)| over impact points. Zero for
/// top-degree forms.
pub fn specular_condition_residual<R: Rng + ?Sized>(
    form: &SampledKForm,
    sys: &HybridSystem,
    impact_points: &[(usize, Vec<f64>)],
    rng: &mut R,
) -> Result<f64> {
    if form.degree() >= sys.dim() {
        return Ok(0.0);
    }
    condition_residual(form, sys, impact_points, rng)
}

fn condition_residual<R: Rng + ?Sized>(
    form: &SampledKForm,
    sys: &HybridSystem,
    impact_points: &[(usize, Vec<f64>)],
    rng: &mut R,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (surface, x) in impact_points {
        check_transversal(sys, *surface, x)?;
        let normal = sys.guard_gradient(*surface, x);
        let tangents = random_tangents(&normal, form.degree(), rng);
        let post = sys.raw_impact(*surface, x)?;
        let pushed = tangents
            .iter()
            .map(|u| sys.augmented_differential(*surface, x, u))
            .collect::<Result<Vec<_>>>()?;
        let before = form.eval(x, &tangents)?;
        let after = form.eval(post.as_slice(), &pushed)?;
        worst = worst.max((after - before).abs());
    }
    Ok(worst)
}

/// Runs all three residual checks for one form.
pub fn check_invariance<R: Rng + ?Sized>(
    form: &SampledKForm,
    sys: &HybridSystem,
    points: &[Vec<f64>],
    impact_points: &[(usize, Vec<f64>)],
    tolerance: f64,
    rng: &mut R,
) -> Result<InvarianceReport> {
    let lie = lie_derivative_residual(form, sys.field.as_ref(), points, rng)?;
    let energy = energy_condition_residual(form, sys, impact_points, rng)?;
    let specular = specular_condition_residual(form, sys, impact_points, rng)?;
    Ok(InvarianceReport {
        form: form.name.clone(),
        degree: form.degree(),
        lie_derivative: lie,
        energy_condition: energy,
        specular_condition: specular,
        samples: points.len(),
        impact_samples: impact_points.len(),
        tolerance,
        lie_pass: lie <= tolerance,
        energy_pass: energy <= tolerance,
        specular_pass: specular <= tolerance,
    })
}

/// The factor J with Δ*(i_X fμ) = J · i_X fμ on the impact set, where μ is
/// the coordinate volume of phase space.
pub fn hybrid_jacobian<R: Rng + ?Sized>(
    sys: &HybridSystem,
    density: &dyn Fn(&[f64]) -> f64,
    surface: usize,
    x: &[f64],
    rng: &mut R,
) -> Result<f64> {
    check_transversal(sys, surface, x)?;
    let normal = sys.guard_gradient(surface, x);
    let basis = tangent_basis(&normal, rng)?;
    let post = sys.raw_impact(surface, x)?;
    let pushed = basis
        .iter()
        .map(|u| sys.augmented_differential(surface, x, u))
        .collect::<Result<Vec<_>>>()?;
    let mut before = Vec::with_capacity(sys.dim());
    before.push(sys.field.eval(x)?);
    before.extend(basis);
    let mut after = Vec::with_capacity(sys.dim());
    after.push(sys.field.eval(post.as_slice())?);
    after.extend(pushed);
    let f0 = positive_density(density, x)?;
    let f1 = positive_density(density, post.as_slice())?;
    let den = f0 * DMatrix::from_columns(&before).determinant();
    if den == 0.0 {
        return Err(Error::DegenerateBasis);
    }
    Ok(f1 * DMatrix::from_columns(&after).determinant() / den)
}

/// (2 dh(π_D q̇) − dh(q̇)) / dh(q̇) at a phase point on the impact set.
pub fn nonholonomic_jacobian_closed_form(sys: &HybridSystem, surface: usize, x: &[f64]) -> Result<f64> {
    let n = sys.dof();
    let q = &x[..n];
    let dh = sys.surfaces[surface].differential(q);
    let qdot = sys.configuration_velocity(x)?;
    let projected = match &sys.mechanics {
        Some(m) if !m.constraints.is_empty() => m.frame(q)?.project(&qdot),
        _ => qdot.clone(),
    };
    let rate = dh.dot(&qdot);
    if !(rate.abs() > GRAZING_TOL * dh.norm() * qdot.norm()) {
        return Err(Error::VanishingDenominator(rate));
    }
    Ok((2.0 * dh.dot(&projected) - rate) / rate)
}

fn positive_density(density: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Result<f64> {
    let f = density(x);
    if !(f > 0.0) {
        return Err(Error::NonPositiveDensity(f));
    }
    Ok(f)
}

/// div_{fμ}(X) = (1/f) Σ ∂ᵢ(f Xⁱ) at each point.
pub fn divergence(field: &dyn VectorField, density: &dyn Fn(&[f64]) -> f64, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|x| {
            let f = positive_density(density, x)?;
            let mut total = 0.0;
            for i in 0..x.len() {
                let step = diff::DEFAULT_STEP * x[i].abs().max(1.0);
                let component = |s: f64| -> Result<f64> {
                    let mut probe = x.clone();
                    probe[i] += s;
                    Ok(density(&probe) * field.eval(&probe)?[i])
                };
                total += diff::try_derivative(component, step)?;
            }
            Ok(total / f)
        })
        .collect()
}

/// ϑ at a configuration, for a mechanical system.
pub fn theta_c(sys: &crate::geometry::MechanicalSystem, q: &[f64]) -> Result<DVector<f64>> {
    sys.theta_c(q)
}

/// Residuals of dg(X) + div_{fμ}(X) = 0 over `points` and of
/// g∘Δ − g + ln J = 0 over `impact_points`.
pub fn cohomology_residual<R: Rng + ?Sized>(
    sys: &HybridSystem,
    g: &dyn Fn(&[f64]) -> f64,
    density: &dyn Fn(&[f64]) -> f64,
    points: &[Vec<f64>],
    impact_points: &[(usize, Vec<f64>)],
    rng: &mut R,
) -> Result<(f64, f64)> {
    let divs = divergence(sys.field.as_ref(), density, points)?;
    let mut continuous: f64 = 0.0;
    for (x, div) in points.iter().zip(divs) {
        let xf = sys.field.eval(x)?;
        let dg = diff::derivative(
            |s| {
                let probe: Vec<f64> = x.iter().zip(xf.iter()).map(|(a, b)| a + s * b).collect();
                g(&probe)
            },
            diff::DEFAULT_STEP,
        );
        continuous = continuous.max((dg + div).abs());
    }
    let mut jump: f64 = 0.0;
    for (surface, x) in impact_points {
        let j = hybrid_jacobian(sys, density, *surface, x, rng)?;
        if !(j > 0.0) {
            return Err(Error::NonPositiveDensity(j));
        }
        let post = sys.raw_impact(*surface, x)?;
        jump = jump.max((g(post.as_slice()) - g(x) + j.ln()).abs());
    }
    Ok((continuous, jump))
}

/// Finite-difference Jacobian of the hybrid flow map over time `horizon`.
/// Fails when an impact falls near either end of the interval.
pub fn flow_jacobian(sys: &HybridSystem, x: &[f64], horizon: f64, config: &IntegratorConfig) -> Result<DMatrix<f64>> {
    let cfg = IntegratorConfig { record_arcs: false, ..config.clone() };
    let traj = flow::hybrid_flow(sys, x, horizon, &cfg)?;
    if traj.termination != Termination::Horizon {
        flow::termination_error(&traj)?;
    }
    if traj.events.iter().any(|e| e.time < STENCIL_TIME || e.time > horizon - STENCIL_TIME) {
        return Err(Error::ImpactNearStencil);
    }
    diff::jacobian(|y| flow::flow_for(sys, y, horizon, &cfg), x, FLOW_JACOBIAN_STEP)
}

/// det(Dφ_T) · f(φ_T x) / f(x) − 1.
pub fn flow_volume_check(
    sys: &HybridSystem,
    density: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    horizon: f64,
    config: &IntegratorConfig,
) -> Result<f64> {
    let jac = flow_jacobian(sys, x, horizon, config)?;
    let end = flow::flow_for(sys, x, horizon, config)?;
    let ratio = positive_density(density, end.as_slice())? / positive_density(density, x)?;
    Ok(jac.determinant() * ratio - 1.0)
}
