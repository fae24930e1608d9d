//! Continuous dynamics on T*Q: the natural Hamiltonian, Poisson brackets,
//! Hamiltonian and nonholonomic vector fields, and the fiber derivative.
//!
//! Phase-space points are flat vectors `x = (q, p)` of length `2n`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::diff;
use crate::error::{Error, Result};
use crate::geometry::MechanicalSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Representation {
    Velocity,
    Momentum,
}

/// Configuration plus either velocities or momenta.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HybridState {
    pub q: Vec<f64>,
    pub fiber: Vec<f64>,
    pub representation: Representation,
}

impl HybridState {
    pub fn velocity(q: Vec<f64>, v: Vec<f64>) -> Self {
        Self { q, fiber: v, representation: Representation::Velocity }
    }

    pub fn momentum(q: Vec<f64>, p: Vec<f64>) -> Self {
        Self { q, fiber: p, representation: Representation::Momentum }
    }

    /// Splits a flat phase vector.
    pub fn from_phase(x: &[f64]) -> Self {
        let n = x.len() / 2;
        Self::momentum(x[..n].to_vec(), x[n..].to_vec())
    }

    /// Flat `(q, p)`; the state must already be in momentum form.
    pub fn to_phase(&self) -> Result<DVector<f64>> {
        if self.representation != Representation::Momentum {
            return Err(Error::InvalidParameter("phase vector needs momenta".into()));
        }
        Ok(DVector::from_iterator(
            self.q.len() * 2,
            self.q.iter().chain(self.fiber.iter()).copied(),
        ))
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }
}

/// Fiber derivative p = g q̇ or its inverse, whichever converts the state.
pub fn legendre(sys: &MechanicalSystem, state: &HybridState) -> Result<HybridState> {
    if state.q.len() != sys.dof() || state.fiber.len() != sys.dof() {
        return Err(Error::Dimension { expected: sys.dof(), got: state.q.len() });
    }
    let fiber = DVector::from_column_slice(&state.fiber);
    Ok(match state.representation {
        Representation::Velocity => {
            let p = sys.metric.at(&state.q) * fiber;
            HybridState::momentum(state.q.clone(), p.as_slice().to_vec())
        }
        Representation::Momentum => {
            let v = sys.metric_inverse_at(&state.q)? * fiber;
            HybridState::velocity(state.q.clone(), v.as_slice().to_vec())
        }
    })
}

/// Observable on T*Q with access to both partial gradients.
pub trait PhaseFunction: Send + Sync {
    fn dof(&self) -> usize;

    fn value(&self, q: &[f64], p: &[f64]) -> f64;

    fn grad_q(&self, q: &[f64], p: &[f64]) -> DVector<f64> {
        diff::gradient(|x| self.value(x, p), q, diff::DEFAULT_STEP)
    }

    fn grad_p(&self, q: &[f64], p: &[f64]) -> DVector<f64> {
        diff::gradient(|x| self.value(q, x), p, diff::DEFAULT_STEP)
    }
}

/// H(q, p) = ½ pᵀ g⁻¹ p + V(q).
#[derive(Debug, Clone)]
pub struct NaturalHamiltonian {
    pub sys: Arc<MechanicalSystem>,
}

impl NaturalHamiltonian {
    pub fn new(sys: Arc<MechanicalSystem>) -> Self {
        Self { sys }
    }

    fn velocity(&self, q: &[f64], p: &[f64]) -> DVector<f64> {
        match self.sys.metric_inverse_at(q) {
            Ok(inv) => inv * DVector::from_column_slice(p),
            Err(_) => DVector::from_element(p.len(), f64::NAN),
        }
    }
}

impl PhaseFunction for NaturalHamiltonian {
    fn dof(&self) -> usize {
        self.sys.dof()
    }

    fn value(&self, q: &[f64], p: &[f64]) -> f64 {
        let v = self.velocity(q, p);
        0.5 * v.dot(&DVector::from_column_slice(p)) + self.sys.potential.value(q)
    }

    fn grad_q(&self, q: &[f64], p: &[f64]) -> DVector<f64> {
        let v = self.velocity(q, p);
        let dv = self.sys.potential_gradient(q);
        DVector::from_fn(q.len(), |i, _| {
            let dg = self.sys.metric.partial(q, i);
            -0.5 * v.dot(&(dg * &v)) + dv[i]
        })
    }

    fn grad_p(&self, q: &[f64], p: &[f64]) -> DVector<f64> {
        self.velocity(q, p)
    }
}

/// P(W^α)(q, p) = p · W^α(q), the momentum of one constraint field.
#[derive(Debug, Clone)]
pub struct MomentumFunction {
    pub sys: Arc<MechanicalSystem>,
    pub index: usize,
}

impl MomentumFunction {
    fn field(&self, q: &[f64]) -> DVector<f64> {
        self.sys
            .constraint_vector_fields(q)
            .map(|w| w[self.index].clone())
            .unwrap_or_else(|_| DVector::from_element(q.len(), f64::NAN))
    }
}

impl PhaseFunction for MomentumFunction {
    fn dof(&self) -> usize {
        self.sys.dof()
    }

    fn value(&self, q: &[f64], p: &[f64]) -> f64 {
        self.field(q).dot(&DVector::from_column_slice(p))
    }

    fn grad_p(&self, q: &[f64], _p: &[f64]) -> DVector<f64> {
        self.field(q)
    }
}

type PhaseValueFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
type PhaseGradFn = Arc<dyn Fn(&[f64], &[f64]) -> DVector<f64> + Send + Sync>;

/// Phase function given by closures, for systems that are not natural.
#[derive(Clone)]
pub struct ClosurePhaseFunction {
    dof: usize,
    value: PhaseValueFn,
    grads: Option<(PhaseGradFn, PhaseGradFn)>,
}

impl ClosurePhaseFunction {
    pub fn new(dof: usize, value: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { dof, value: Arc::new(value), grads: None }
    }

    pub fn with_gradients(
        mut self,
        grad_q: impl Fn(&[f64], &[f64]) -> DVector<f64> + Send + Sync + 'static,
        grad_p: impl Fn(&[f64], &[f64]) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.grads = Some((Arc::new(grad_q), Arc::new(grad_p)));
        self
    }
}

impl PhaseFunction for ClosurePhaseFunction {
    fn dof(&self) -> usize {
        self.dof
    }

    fn value(&self, q: &[f64], p: &[f64]) -> f64 {
        (self.value)(q, p)
    }

    fn grad_q(&self, q: &[f64], p: &[f64]) -> DVector<f64> {
        match &self.grads {
            Some((gq, _)) => gq(q, p),
            None => diff::gradient(|x| (self.value)(x, p), q, diff::DEFAULT_STEP),
        }
    }

    fn grad_p(&self, q: &[f64], p: &[f64]) -> DVector<f64> {
        match &self.grads {
            Some((_, gp)) => gp(q, p),
            None => diff::gradient(|x| (self.value)(q, x), p, diff::DEFAULT_STEP),
        }
    }
}

fn split(x: &[f64]) -> (&[f64], &[f64]) {
    x.split_at(x.len() / 2)
}

/// (∂H/∂p, −∂H/∂q).
pub fn hamiltonian_vector_field(h: &dyn PhaseFunction, x: &[f64]) -> DVector<f64> {
    let (q, p) = split(x);
    let dq = h.grad_p(q, p);
    let dp = -h.grad_q(q, p);
    DVector::from_iterator(x.len(), dq.iter().chain(dp.iter()).copied())
}

/// {f, g} = ∂f/∂q·∂g/∂p − ∂f/∂p·∂g/∂q.
pub fn poisson_bracket(f: &dyn PhaseFunction, g: &dyn PhaseFunction, x: &[f64]) -> f64 {
    let (q, p) = split(x);
    f.grad_q(q, p).dot(&g.grad_p(q, p)) - f.grad_p(q, p).dot(&g.grad_q(q, p))
}

/// Hamiltonian field of the natural Hamiltonian plus the constraint forces
/// m_{αβ}{H, P(W^α)} η^β. Off the constraint manifold this is the globally
/// defined extension; each P(W^α) is a first integral.
pub fn nonholonomic_vector_field(sys: &MechanicalSystem, x: &[f64]) -> Result<DVector<f64>> {
    let n = sys.dof();
    if x.len() != 2 * n {
        return Err(Error::Dimension { expected: 2 * n, got: x.len() });
    }
    let (q, p) = split(x);
    let frame = sys.frame(q)?;
    let p = DVector::from_column_slice(p);
    let v = &frame.g_inv * &p;
    let dv = sys.potential_gradient(q);
    let m = frame.eta.nrows();

    let mut h_q = DVector::zeros(n);
    // {H, P_α} = ∂_qH · W^α − q̇ · (p · ∂_q W^α)
    let mut bracket = DVector::zeros(m);
    for i in 0..n {
        let dg = sys.metric.partial(q, i);
        h_q[i] = -0.5 * v.dot(&(&dg * &v)) + dv[i];
        if m > 0 {
            let deta = sys.constraints.partial(q, i);
            let dw = &frame.g_inv * (deta.transpose() - &dg * &frame.w);
            let pdw = dw.transpose() * &p;
            bracket -= pdw * v[i];
        }
    }
    if m > 0 {
        bracket += frame.w.transpose() * &h_q;
    }
    let mut dp = -h_q;
    if m > 0 {
        let lambda = &frame.mass_inv * bracket;
        dp += frame.eta.transpose() * lambda;
    }
    Ok(DVector::from_iterator(2 * n, v.iter().chain(dp.iter()).copied()))
}

/// Autonomous vector field on a flat phase space.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<DVector<f64>>;
}

/// X_H for an arbitrary phase function.
#[derive(Clone)]
pub struct HamiltonianField<H> {
    pub hamiltonian: H,
}

impl<H: PhaseFunction> VectorField for HamiltonianField<H> {
    fn dim(&self) -> usize {
        2 * self.hamiltonian.dof()
    }

    fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        Ok(hamiltonian_vector_field(&self.hamiltonian, x))
    }
}

/// The global nonholonomic field of a mechanical system; the Hamiltonian
/// field when there are no constraints.
#[derive(Debug, Clone)]
pub struct NonholonomicField {
    pub sys: Arc<MechanicalSystem>,
}

impl VectorField for NonholonomicField {
    fn dim(&self) -> usize {
        2 * self.sys.dof()
    }

    fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        nonholonomic_vector_field(&self.sys, x)
    }
}

type FieldFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;

/// Vector field from a closure, for non-mechanical examples.
#[derive(Clone)]
pub struct ClosureField {
    dim: usize,
    f: FieldFn,
}

impl ClosureField {
    pub fn new(dim: usize, f: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Self { dim, f: Arc::new(f) }
    }
}

impl VectorField for ClosureField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        Ok((self.f)(x))
    }
}

impl<T: VectorField + ?Sized> VectorField for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        (**self).eval(x)
    }
}
