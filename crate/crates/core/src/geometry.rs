//! Configuration-space data of a natural mechanical system: chart, metric,
//! potential, linear velocity constraints and impact surfaces, plus the
//! pointwise objects derived from them (constraint vector fields, constraint
//! mass matrix, gradients and the g-orthogonal projection onto the
//! constraint distribution).

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use nalgebra::{DMatrix, DVector};

use crate::diff;
use crate::error::{Error, Result};
use crate::linalg;

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type CovectorFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
/// `(q, i) ↦ ∂/∂qⁱ` of a matrix-valued field.
pub type MatrixPartialFn = Arc<dyn Fn(&[f64], usize) -> DMatrix<f64> + Send + Sync>;

/// Relative tolerance for analytic-vs-numeric derivative agreement.
pub const DERIVATIVE_CHECK_TOL: f64 = 1e-5;

/// How derivatives of a field are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMode {
    Analytic,
    /// Central differences with the given step.
    FiniteDifference { step: f64 },
}

/// A single coordinate chart: names and periodicity flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartSpec {
    names: Vec<String>,
    periodic: Vec<bool>,
}

impl ChartSpec {
    pub fn new(names: Vec<String>, periodic: Vec<bool>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidModel("chart needs at least one coordinate".into()));
        }
        if names.len() != periodic.len() {
            return Err(Error::InvalidModel(format!(
                "{} coordinate names but {} periodicity flags",
                names.len(),
                periodic.len()
            )));
        }
        Ok(Self { names, periodic })
    }

    /// Chart with no periodic coordinates.
    pub fn euclidean(names: &[&str]) -> Result<Self> {
        Self::new(
            names.iter().map(|s| String::from(*s)).collect(),
            alloc::vec![false; names.len()],
        )
    }

    pub fn dimension(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    /// Wraps periodic coordinates into (−π, π]. Only used for output.
    pub fn wrap(&self, q: &[f64]) -> Vec<f64> {
        q.iter()
            .zip(&self.periodic)
            .map(|(&v, &p)| if p { wrap_angle(v) } else { v })
            .collect()
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = a - two_pi * (a / two_pi).floor();
    if r > PI {
        r -= two_pi;
    }
    r
}

/// Scalar field on Q, e.g. the potential V or an impact function h.
#[derive(Clone)]
pub struct SmoothScalarField {
    value: ScalarFn,
    gradient: Option<CovectorFn>,
    step: f64,
}

impl core::fmt::Debug for SmoothScalarField {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SmoothScalarField").field("mode", &self.mode()).finish()
    }
}

impl SmoothScalarField {
    pub fn new(value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { value: Arc::new(value), gradient: None, step: diff::DEFAULT_STEP }
    }

    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn zero(n: usize) -> Self {
        Self::new(|_| 0.0).with_gradient(move |_| DVector::zeros(n))
    }

    pub fn mode(&self) -> DerivativeMode {
        match self.gradient {
            Some(_) => DerivativeMode::Analytic,
            None => DerivativeMode::FiniteDifference { step: self.step },
        }
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        (self.value)(q)
    }

    pub fn gradient(&self, q: &[f64]) -> DVector<f64> {
        match &self.gradient {
            Some(g) => g(q),
            None => self.numeric_gradient(q),
        }
    }

    fn numeric_gradient(&self, q: &[f64]) -> DVector<f64> {
        diff::gradient(|x| (self.value)(x), q, self.step)
    }

    /// Checks an analytic gradient against central differences at `probes`.
    pub fn check_gradient(&self, probes: &[Vec<f64>]) -> Result<()> {
        if self.gradient.is_none() {
            return Ok(());
        }
        for q in probes {
            let analytic = self.gradient(q);
            let numeric = self.numeric_gradient(q);
            let scale = analytic.norm().max(1.0);
            let err = (&analytic - &numeric).norm();
            if err > DERIVATIVE_CHECK_TOL * scale {
                return Err(Error::InvalidModel(format!(
                    "analytic gradient disagrees with finite differences by {err:e}"
                )));
            }
        }
        Ok(())
    }
}

/// Riemannian metric g(q) as a symmetric matrix field.
#[derive(Clone)]
pub struct MetricField {
    eval: MatrixFn,
    partial: Option<MatrixPartialFn>,
    step: f64,
}

impl core::fmt::Debug for MetricField {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("MetricField").field("analytic", &self.partial.is_some()).finish()
    }
}

impl MetricField {
    pub fn new(eval: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(eval), partial: None, step: diff::DEFAULT_STEP }
    }

    pub fn with_partials(
        mut self,
        partial: impl Fn(&[f64], usize) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.partial = Some(Arc::new(partial));
        self
    }

    /// Constant metric.
    pub fn constant(g: DMatrix<f64>) -> Self {
        let n = g.nrows();
        Self::new(move |_| g.clone()).with_partials(move |_, _| DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(DMatrix::identity(n, n))
    }

    pub fn mode(&self) -> DerivativeMode {
        match self.partial {
            Some(_) => DerivativeMode::Analytic,
            None => DerivativeMode::FiniteDifference { step: self.step },
        }
    }

    pub fn at(&self, q: &[f64]) -> DMatrix<f64> {
        (self.eval)(q)
    }

    /// ∂g/∂qⁱ.
    pub fn partial(&self, q: &[f64], i: usize) -> DMatrix<f64> {
        match &self.partial {
            Some(p) => p(q, i),
            None => numeric_partial(&self.eval, q, i, self.step),
        }
    }

    /// Symmetry, positive-definiteness and derivative agreement at `probes`.
    pub fn validate(&self, probes: &[Vec<f64>]) -> Result<()> {
        for q in probes {
            let g = self.at(q);
            if g.nrows() != q.len() || g.ncols() != q.len() {
                return Err(Error::Dimension { expected: q.len(), got: g.nrows() });
            }
            let asym = (&g - g.transpose()).norm();
            if asym > 1e-12 * g.norm().max(1.0) {
                return Err(Error::InvalidModel(format!("metric not symmetric ({asym:e})")));
            }
            let eig = linalg::symmetric_eigenvalues(&g);
            let hi = eig.iter().cloned().fold(0.0, f64::max);
            let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            if !(lo > linalg::RELATIVE_RANK_TOL * hi) {
                return Err(Error::NonInvertibleMetric);
            }
            if self.partial.is_some() {
                for i in 0..q.len() {
                    let a = self.partial(q, i);
                    let b = numeric_partial(&self.eval, q, i, self.step);
                    let err = (&a - &b).norm();
                    if err > DERIVATIVE_CHECK_TOL * a.norm().max(1.0) {
                        return Err(Error::InvalidModel(format!(
                            "analytic metric partial {i} disagrees with finite differences by {err:e}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn numeric_partial(f: &MatrixFn, q: &[f64], i: usize, step: f64) -> DMatrix<f64> {
    let mut probe = q.to_vec();
    probe[i] = q[i] + step;
    let up = f(&probe);
    probe[i] = q[i] - step;
    let down = f(&probe);
    (up - down) / (2.0 * step)
}

/// Linear velocity constraints η^α(q̇) = 0, stored as an m×n matrix of rows.
#[derive(Clone)]
pub struct ConstraintSet {
    count: usize,
    eval: MatrixFn,
    partial: Option<MatrixPartialFn>,
    step: f64,
}

impl core::fmt::Debug for ConstraintSet {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ConstraintSet").field("count", &self.count).finish()
    }
}

impl ConstraintSet {
    pub fn new(
        count: usize,
        eval: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { count, eval: Arc::new(eval), partial: None, step: diff::DEFAULT_STEP }
    }

    pub fn with_partials(
        mut self,
        partial: impl Fn(&[f64], usize) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.partial = Some(Arc::new(partial));
        self
    }

    pub fn none(n: usize) -> Self {
        Self::new(0, move |_| DMatrix::zeros(0, n)).with_partials(move |_, _| DMatrix::zeros(0, n))
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Rows η^α(q).
    pub fn at(&self, q: &[f64]) -> DMatrix<f64> {
        (self.eval)(q)
    }

    pub fn partial(&self, q: &[f64], i: usize) -> DMatrix<f64> {
        match &self.partial {
            Some(p) => p(q, i),
            None => numeric_partial(&self.eval, q, i, self.step),
        }
    }

    pub fn validate(&self, probes: &[Vec<f64>]) -> Result<()> {
        for q in probes {
            let eta = self.at(q);
            if eta.nrows() != self.count || eta.ncols() != q.len() {
                return Err(Error::Dimension { expected: self.count, got: eta.nrows() });
            }
            let ratio = linalg::relative_min_singular_value(&eta);
            if self.count > 0 && !(ratio > linalg::RELATIVE_RANK_TOL) {
                return Err(Error::DependentConstraints(ratio));
            }
            if self.partial.is_some() {
                for i in 0..q.len() {
                    let a = self.partial(q, i);
                    let b = numeric_partial(&self.eval, q, i, self.step);
                    let err = (&a - &b).norm();
                    if err > DERIVATIVE_CHECK_TOL * a.norm().max(1.0) {
                        return Err(Error::InvalidModel(format!(
                            "analytic constraint partial {i} disagrees by {err:e}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// S = h⁻¹(0). The admissible side is h > 0.
#[derive(Debug, Clone)]
pub struct ImpactSurface {
    pub label: String,
    pub h: SmoothScalarField,
}

impl ImpactSurface {
    pub fn new(label: impl Into<String>, h: SmoothScalarField) -> Self {
        Self { label: label.into(), h }
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        self.h.value(q)
    }

    pub fn differential(&self, q: &[f64]) -> DVector<f64> {
        self.h.gradient(q)
    }

    /// Projects `q` onto S by Newton steps along dh.
    pub fn project(&self, q: &[f64]) -> Option<Vec<f64>> {
        let mut x = q.to_vec();
        for _ in 0..50 {
            let h = self.value(&x);
            if h.abs() < 1e-14 {
                return Some(x);
            }
            let dh = self.differential(&x);
            let nn = dh.norm_squared();
            if nn == 0.0 {
                return None;
            }
            for (xi, di) in x.iter_mut().zip(dh.iter()) {
                *xi -= h * di / nn;
            }
        }
        (self.value(&x).abs() < 1e-12).then_some(x)
    }
}

/// Pointwise geometric data at one configuration.
#[derive(Debug, Clone)]
pub struct Frame {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// m×n, rows η^α.
    pub eta: DMatrix<f64>,
    /// n×m, columns W^α = g⁻¹η^α.
    pub w: DMatrix<f64>,
    /// m^{αβ} = η^α(W^β).
    pub mass: DMatrix<f64>,
    pub mass_inv: DMatrix<f64>,
}

impl Frame {
    /// g-orthogonal projection onto the constraint distribution.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.eta.nrows() == 0 {
            return v.clone();
        }
        v - &self.w * (&self.mass_inv * (&self.eta * v))
    }

    pub fn raise(&self, covector: &DVector<f64>) -> DVector<f64> {
        &self.g_inv * covector
    }

    pub fn lower(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.g * v
    }

    pub fn kinetic(&self, v: &DVector<f64>) -> f64 {
        0.5 * v.dot(&(&self.g * v))
    }
}

/// The (Q, g, V, 𝒟) of a natural mechanical system.
#[derive(Debug, Clone)]
pub struct MechanicalSystem {
    pub chart: ChartSpec,
    pub metric: MetricField,
    pub potential: SmoothScalarField,
    pub constraints: ConstraintSet,
}

impl MechanicalSystem {
    pub fn new(
        chart: ChartSpec,
        metric: MetricField,
        potential: SmoothScalarField,
        constraints: ConstraintSet,
    ) -> Self {
        Self { chart, metric, potential, constraints }
    }

    pub fn dof(&self) -> usize {
        self.chart.dimension()
    }

    /// Runs all construction-time checks at the given probe configurations.
    pub fn validate(&self, probes: &[Vec<f64>]) -> Result<()> {
        for q in probes {
            if q.len() != self.dof() {
                return Err(Error::Dimension { expected: self.dof(), got: q.len() });
            }
        }
        self.metric.validate(probes)?;
        self.potential.check_gradient(probes)?;
        self.constraints.validate(probes)?;
        for q in probes {
            let frame = self.frame(q)?;
            let eig = linalg::symmetric_eigenvalues(&frame.mass);
            if eig.iter().any(|&e| e <= 0.0) {
                return Err(Error::SingularConstraintMass);
            }
        }
        Ok(())
    }

    /// Checks H.2 and the nontrivial-impact condition at probe points of S.
    pub fn validate_surface(&self, surface: &ImpactSurface, probes: &[Vec<f64>]) -> Result<()> {
        surface.h.check_gradient(probes)?;
        for q in probes {
            let Some(q) = surface.project(q) else { continue };
            let dh = surface.differential(&q);
            if !(dh.norm() > 1e-12) {
                return Err(Error::InvalidModel(format!(
                    "dh vanishes on surface {}",
                    surface.label
                )));
            }
            if !self.constraints.is_empty() {
                let eta = self.constraints.at(&q);
                let resid = linalg::span_residual(&eta.transpose(), &dh);
                if !(resid > 1e-8 * dh.norm()) {
                    return Err(Error::VanishingDenominator(resid));
                }
            }
        }
        Ok(())
    }

    pub fn frame(&self, q: &[f64]) -> Result<Frame> {
        let g = self.metric.at(q);
        let g_inv = linalg::spd_inverse(&g).ok_or(Error::NonInvertibleMetric)?;
        let eta = self.constraints.at(q);
        let w = &g_inv * eta.transpose();
        let mass = &eta * &w;
        let mass_inv = linalg::spd_inverse(&mass).ok_or(Error::SingularConstraintMass)?;
        Ok(Frame { g, g_inv, eta, w, mass, mass_inv })
    }

    pub fn metric_inverse_at(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        linalg::spd_inverse(&self.metric.at(q)).ok_or(Error::NonInvertibleMetric)
    }

    /// W^α = g⁻¹η^α, one vector per constraint.
    pub fn constraint_vector_fields(&self, q: &[f64]) -> Result<Vec<DVector<f64>>> {
        let g_inv = self.metric_inverse_at(q)?;
        let eta = self.constraints.at(q);
        Ok((0..eta.nrows()).map(|a| &g_inv * eta.row(a).transpose()).collect())
    }

    /// (m^{αβ}, m_{αβ}).
    pub fn constraint_mass_matrix(&self, q: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let f = self.frame(q)?;
        Ok((f.mass, f.mass_inv))
    }

    /// ∇h = g⁻¹ dh.
    pub fn grad_h(&self, surface: &ImpactSurface, q: &[f64]) -> Result<DVector<f64>> {
        Ok(self.metric_inverse_at(q)? * surface.differential(q))
    }

    pub fn project_onto_d(&self, q: &[f64], v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.frame(q)?.project(v))
    }

    /// ∂W/∂qⁱ for i = 0..n, each n×m.
    pub fn constraint_field_partials(&self, q: &[f64], frame: &Frame) -> Vec<DMatrix<f64>> {
        (0..self.dof())
            .map(|i| {
                let dg = self.metric.partial(q, i);
                let deta = self.constraints.partial(q, i);
                &frame.g_inv * (deta.transpose() - dg * &frame.w)
            })
            .collect()
    }

    /// ∂V/∂q.
    pub fn potential_gradient(&self, q: &[f64]) -> DVector<f64> {
        self.potential.gradient(q)
    }

    /// ϑ_𝒞 = m_{αβ} ℒ_{W^α} η^β as a covector.
    pub fn theta_c(&self, q: &[f64]) -> Result<DVector<f64>> {
        let n = self.dof();
        let frame = self.frame(q)?;
        let m = frame.eta.nrows();
        let dw = self.constraint_field_partials(q, &frame);
        let deta: Vec<DMatrix<f64>> = (0..n).map(|i| self.constraints.partial(q, i)).collect();
        let mut theta = DVector::zeros(n);
        for a in 0..m {
            for b in 0..m {
                let coeff = frame.mass_inv[(a, b)];
                // (ℒ_W η)_j = Wⁱ ∂_i η_j + η_i ∂_j Wⁱ
                for j in 0..n {
                    let mut lie = 0.0;
                    for i in 0..n {
                        lie += frame.w[(i, a)] * deta[i][(b, j)];
                        lie += frame.eta[(b, i)] * dw[j][(i, a)];
                    }
                    theta[j] += coeff * lie;
                }
            }
        }
        Ok(theta)
    }
}
