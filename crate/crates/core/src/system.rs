//! A hybrid system: continuous field, impact surfaces and the impact law
//! applied on them, with optional mechanical structure and energy.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use nalgebra::DVector;

use crate::dynamics::{NaturalHamiltonian, NonholonomicField, PhaseFunction, VectorField};
use crate::error::{Error, Result};
use crate::geometry::{ImpactSurface, MechanicalSystem};
use crate::impacts::{self, ImpactOutcome, GRAZING_TOL};

/// Impact map on phase space, given the index of the surface hit.
pub type CustomImpact = Arc<dyn Fn(usize, &[f64]) -> DVector<f64> + Send + Sync>;

#[derive(Clone)]
pub enum ImpactLaw {
    Holonomic,
    /// Restricted map; velocities must satisfy the constraints.
    Nonholonomic,
    /// Linear extension of the restricted map to all velocities.
    NonholonomicGlobal,
    Custom(CustomImpact),
}

impl core::fmt::Debug for ImpactLaw {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl ImpactLaw {
    pub fn name(&self) -> &'static str {
        match self {
            ImpactLaw::Holonomic => "holonomic",
            ImpactLaw::Nonholonomic => "nonholonomic",
            ImpactLaw::NonholonomicGlobal => "nonholonomic-global",
            ImpactLaw::Custom(_) => "custom",
        }
    }
}

/// Result of applying an impact to a phase-space point.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseImpact {
    pub post: DVector<f64>,
    pub velocity_pre: DVector<f64>,
    pub velocity_post: DVector<f64>,
    pub epsilon: Option<f64>,
    pub lambda: Vec<f64>,
}

#[derive(Clone)]
pub struct HybridSystem {
    pub name: String,
    pub field: Arc<dyn VectorField>,
    pub surfaces: Vec<ImpactSurface>,
    pub law: ImpactLaw,
    pub mechanics: Option<Arc<MechanicalSystem>>,
    pub energy: Option<Arc<dyn PhaseFunction>>,
}

impl core::fmt::Debug for HybridSystem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("HybridSystem")
            .field("name", &self.name)
            .field("dim", &self.field.dim())
            .field("surfaces", &self.surfaces.len())
            .field("law", &self.law)
            .finish()
    }
}

impl HybridSystem {
    /// Natural mechanical system driven by its (nonholonomic) field.
    pub fn mechanical(
        name: impl Into<String>,
        sys: Arc<MechanicalSystem>,
        surfaces: Vec<ImpactSurface>,
        law: ImpactLaw,
    ) -> Self {
        Self {
            name: name.into(),
            field: Arc::new(NonholonomicField { sys: sys.clone() }),
            surfaces,
            law,
            energy: Some(Arc::new(NaturalHamiltonian::new(sys.clone()))),
            mechanics: Some(sys),
        }
    }

    /// Arbitrary field with a custom impact law.
    pub fn custom(
        name: impl Into<String>,
        field: Arc<dyn VectorField>,
        surfaces: Vec<ImpactSurface>,
        impact: CustomImpact,
        energy: Option<Arc<dyn PhaseFunction>>,
    ) -> Self {
        Self { name: name.into(), field, surfaces, law: ImpactLaw::Custom(impact), mechanics: None, energy }
    }

    pub fn with_law(mut self, law: ImpactLaw) -> Self {
        self.law = law;
        self
    }

    /// Configuration dimension n; phase space has dimension 2n.
    pub fn dof(&self) -> usize {
        self.field.dim() / 2
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn surface_index(&self, label: &str) -> Option<usize> {
        self.surfaces.iter().position(|s| s.label == label)
    }

    pub fn guard(&self, i: usize, x: &[f64]) -> f64 {
        self.surfaces[i].value(&x[..self.dof()])
    }

    /// dΓ for Γ = h∘π on phase space.
    pub fn guard_gradient(&self, i: usize, x: &[f64]) -> DVector<f64> {
        let n = self.dof();
        let dh = self.surfaces[i].differential(&x[..n]);
        DVector::from_fn(2 * n, |k, _| if k < n { dh[k] } else { 0.0 })
    }

    /// q̇ at a phase point.
    pub fn configuration_velocity(&self, x: &[f64]) -> Result<DVector<f64>> {
        let n = self.dof();
        match &self.mechanics {
            Some(sys) => Ok(sys.metric_inverse_at(&x[..n])? * DVector::from_column_slice(&x[n..])),
            None => Ok(self.field.eval(x)?.rows(0, n).into_owned()),
        }
    }

    /// dh(q̇), the rate of the guard along the flow.
    pub fn guard_rate(&self, i: usize, x: &[f64]) -> Result<f64> {
        let n = self.dof();
        let v = self.configuration_velocity(x)?;
        Ok(self.surfaces[i].differential(&x[..n]).dot(&v))
    }

    /// ‖q̇‖_g, or the Euclidean norm of q̇ without a metric.
    pub fn speed(&self, x: &[f64]) -> Result<f64> {
        let n = self.dof();
        let v = self.configuration_velocity(x)?;
        Ok(match &self.mechanics {
            Some(sys) => v.dot(&(sys.metric.at(&x[..n]) * &v)).sqrt(),
            None => v.norm(),
        })
    }

    pub fn energy(&self, x: &[f64]) -> Option<f64> {
        let n = self.dof();
        self.energy.as_ref().map(|h| h.value(&x[..n], &x[n..]))
    }

    fn mechanics(&self) -> Result<&MechanicalSystem> {
        self.mechanics
            .as_deref()
            .ok_or_else(|| Error::InvalidModel("impact law needs a mechanical system".into()))
    }

    fn velocity_impact(
        &self,
        i: usize,
        x: &[f64],
        checked: bool,
    ) -> Result<(ImpactOutcome, DVector<f64>)> {
        let sys = self.mechanics()?;
        let n = self.dof();
        let q = &x[..n];
        let v = sys.metric_inverse_at(q)? * DVector::from_column_slice(&x[n..]);
        let s = &self.surfaces[i];
        let out = match (&self.law, checked) {
            (ImpactLaw::Holonomic, true) => impacts::holonomic_impact(sys, s, q, &v)?,
            (ImpactLaw::Holonomic, false) => impacts::specular_reflection(sys, s, q, &v)?,
            (ImpactLaw::Nonholonomic, true) => impacts::nonholonomic_impact(sys, s, q, &v)?,
            (ImpactLaw::Nonholonomic, false) => impacts::restricted_reflection(sys, s, q, &v)?,
            (ImpactLaw::NonholonomicGlobal, true) => impacts::nonholonomic_impact_global(sys, s, q, &v)?,
            (ImpactLaw::NonholonomicGlobal, false) => impacts::global_reflection(sys, s, q, &v)?,
            (ImpactLaw::Custom(_), _) => unreachable!(),
        };
        Ok((out, v))
    }

    fn to_phase(&self, q: &[f64], v: &DVector<f64>) -> Result<DVector<f64>> {
        let sys = self.mechanics()?;
        let p = sys.metric.at(q) * v;
        Ok(DVector::from_iterator(2 * q.len(), q.iter().copied().chain(p.iter().copied())))
    }

    /// The impact map extended off the impact set, with no guard checks.
    pub fn raw_impact(&self, i: usize, x: &[f64]) -> Result<DVector<f64>> {
        if let ImpactLaw::Custom(f) = &self.law {
            return Ok(f(i, x));
        }
        let (out, _) = self.velocity_impact(i, x, false)?;
        self.to_phase(&x[..self.dof()], &out.velocity)
    }

    /// Applies the impact on surface `i`, rejecting grazing or departing
    /// states.
    pub fn apply_impact(&self, i: usize, x: &[f64]) -> Result<PhaseImpact> {
        let n = self.dof();
        if let ImpactLaw::Custom(f) = &self.law {
            let rate = self.guard_rate(i, x)?;
            let tolerance = GRAZING_TOL * self.speed(x)?;
            if !(rate.abs() >= tolerance) || rate == 0.0 {
                return Err(Error::Grazing { normal_speed: rate.abs(), tolerance });
            }
            if rate > 0.0 {
                return Err(Error::NotApproaching(rate));
            }
            let post = f(i, x);
            let velocity_pre = self.configuration_velocity(x)?;
            let velocity_post = self.configuration_velocity(post.as_slice())?;
            return Ok(PhaseImpact { post, velocity_pre, velocity_post, epsilon: None, lambda: Vec::new() });
        }
        let (out, v) = self.velocity_impact(i, x, true)?;
        let post = self.to_phase(&x[..n], &out.velocity)?;
        Ok(PhaseImpact {
            post,
            velocity_pre: v,
            velocity_post: out.velocity,
            epsilon: Some(out.epsilon),
            lambda: out.lambda.iter().copied().collect(),
        })
    }

    /// Augmented differential of the impact on surface `i` at `x`.
    pub fn augmented_differential(&self, i: usize, x: &[f64], v: &DVector<f64>) -> Result<DVector<f64>> {
        let dgamma = self.guard_gradient(i, x);
        impacts::augmented_differential(self.field.as_ref(), &dgamma, |y| self.raw_impact(i, y), x, v)
    }

    /// Geometry checks on the mechanical part and the surfaces at probes.
    pub fn validate(&self, probes: &[Vec<f64>]) -> Result<()> {
        if !self.field.dim().is_multiple_of(2) {
            return Err(Error::InvalidModel("phase space must have even dimension".into()));
        }
        if let Some(sys) = &self.mechanics {
            if sys.dof() != self.dof() {
                return Err(Error::Dimension { expected: self.dof(), got: sys.dof() });
            }
            sys.validate(probes)?;
            for s in &self.surfaces {
                sys.validate_surface(s, probes)?;
            }
        } else {
            for s in &self.surfaces {
                s.h.check_gradient(probes)?;
            }
        }
        Ok(())
    }
}
