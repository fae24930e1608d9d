//! Catalog of reference systems: super-elastic bouncers, an escaping
//! Hamiltonian example, an elliptical point billiard and three rolling
//! billiards (Chaplygin sleigh, vertical disk, rolling ball), plus a flat
//! nonholonomic toy.
//!
//! Impact surfaces are oriented so that the admissible region is h > 0.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dynamics::{ClosurePhaseFunction, HamiltonianField, PhaseFunction};
use crate::error::{Error, Result};
use crate::geometry::{ChartSpec, ConstraintSet, ImpactSurface, MechanicalSystem, MetricField, SmoothScalarField};
use crate::system::{HybridSystem, ImpactLaw};

pub const CATALOG: [&str; 8] = [
    "interval-bouncer",
    "planar-box",
    "tan-escape",
    "point-billiard",
    "chaplygin-sleigh",
    "vertical-disk",
    "rolling-ball",
    "heisenberg-toy",
];

/// Planar region bounding the reference point(s) of a system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Table {
    /// X²/a² + Y²/b² < 1.
    Ellipse { a: f64, b: f64 },
    /// 0 < X < width.
    Slab { width: f64 },
}

type PlanarValue = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type PlanarGrad = Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>;

struct PlanarWall {
    label: &'static str,
    value: PlanarValue,
    grad: PlanarGrad,
}

impl Table {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Table::Ellipse { a, b } => a > 0.0 && b > 0.0,
            Table::Slab { width } => width > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad table {self:?}")))
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Table::Ellipse { a, b } => (x / a).powi(2) + (y / b).powi(2) < 1.0,
            Table::Slab { width } => x > 0.0 && x < width,
        }
    }

    /// Bounding box (x_lo, x_hi, y_lo, y_hi); the slab is given unit height.
    pub fn bounds(&self) -> [f64; 4] {
        match *self {
            Table::Ellipse { a, b } => [-a, a, -b, b],
            Table::Slab { width } => [0.0, width, -0.5, 0.5],
        }
    }

    fn walls(&self) -> Vec<PlanarWall> {
        match *self {
            Table::Ellipse { a, b } => vec![PlanarWall {
                label: "wall",
                value: Arc::new(move |x, y| 1.0 - x * x / (a * a) - y * y / (b * b)),
                grad: Arc::new(move |x, y| (-2.0 * x / (a * a), -2.0 * y / (b * b))),
            }],
            Table::Slab { width } => vec![
                PlanarWall { label: "left", value: Arc::new(|x, _| x), grad: Arc::new(|_, _| (1.0, 0.0)) },
                PlanarWall {
                    label: "right",
                    value: Arc::new(move |x, _| width - x),
                    grad: Arc::new(|_, _| (-1.0, 0.0)),
                },
            ],
        }
    }
}

/// Surfaces for a rigid point at offset `± length·(cos θ, sin θ)` from the
/// planar coordinates (q[0], q[1]), θ = q[angle]. `length = 0` gives one
/// surface per wall on the reference point itself.
fn offset_surfaces(table: &Table, n: usize, angle: usize, length: f64) -> Vec<ImpactSurface> {
    let signs: &[(f64, &str)] = if length == 0.0 { &[(0.0, "")] } else { &[(1.0, "front"), (-1.0, "back")] };
    let mut out = Vec::new();
    for wall in table.walls() {
        for &(sign, tag) in signs {
            let value = wall.value.clone();
            let grad = wall.grad.clone();
            let l = sign * length;
            let h = SmoothScalarField::new(move |q| {
                let (c, s) = if l == 0.0 { (0.0, 0.0) } else { (q[angle].cos(), q[angle].sin()) };
                value(q[0] + l * c, q[1] + l * s)
            })
            .with_gradient(move |q| {
                let (c, s) = if l == 0.0 { (0.0, 0.0) } else { (q[angle].cos(), q[angle].sin()) };
                let (gx, gy) = grad(q[0] + l * c, q[1] + l * s);
                let mut d = DVector::zeros(n);
                d[0] = gx;
                d[1] = gy;
                if l != 0.0 {
                    d[angle] = gx * (-l * s) + gy * (l * c);
                }
                d
            });
            let label = if tag.is_empty() { wall.label.to_string() } else { format!("{}-{tag}", wall.label) };
            out.push(ImpactSurface::new(label, h));
        }
    }
    out
}

type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type Locator = Arc<dyn Fn(&[f64]) -> [f64; 2] + Send + Sync>;

/// A phase-space density f > 0 with respect to canonical volume.
#[derive(Clone)]
pub struct Density {
    pub name: String,
    f: DensityFn,
}

impl core::fmt::Debug for Density {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Density").field("name", &self.name).finish()
    }
}

impl Density {
    pub fn new(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }

    pub fn canonical() -> Self {
        Self::new("canonical", |_| 1.0)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    /// ln f, the candidate for the cohomology equation.
    pub fn log(&self, x: &[f64]) -> f64 {
        (self.f)(x).ln()
    }
}

/// How random states are drawn for an entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSpec {
    /// Box for configurations, before rejection against the surfaces.
    pub q_lo: Vec<f64>,
    pub q_hi: Vec<f64>,
    /// Range of ‖q̇‖_g.
    pub speed: (f64, f64),
    /// Minimum guard value for interior samples.
    pub margin: f64,
}

/// One catalog system with its parameters and sampling defaults.
#[derive(Clone)]
pub struct ZooEntry {
    pub name: String,
    pub system: HybridSystem,
    pub parameters: Vec<(String, f64)>,
    pub sampler: SamplerSpec,
    pub densities: Vec<Density>,
    pub table: Option<Table>,
    /// Planar location used for occupancy histograms.
    pub locate: Locator,
    pub description: &'static str,
    /// An impact state at which p_θ^{-3} jumps (sleigh only).
    pub certificate: Option<Vec<f64>>,
}

impl core::fmt::Debug for ZooEntry {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ZooEntry").field("name", &self.name).field("system", &self.system).finish()
    }
}

impl ZooEntry {
    pub fn dof(&self) -> usize {
        self.system.dof()
    }

    pub fn constraint_count(&self) -> usize {
        self.system.mechanics.as_ref().map_or(0, |m| m.constraints.count())
    }

    pub fn density(&self, name: &str) -> Option<&Density> {
        self.densities.iter().find(|d| d.name == name)
    }

    fn mechanics(&self) -> Option<&MechanicalSystem> {
        self.system.mechanics.as_deref()
    }

    fn sample_q<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sampler.q_lo.iter().zip(&self.sampler.q_hi).map(|(&lo, &hi)| if hi > lo { rng.random_range(lo..hi) } else { lo }).collect()
    }

    fn sample_velocity<R: Rng + ?Sized>(&self, q: &[f64], rng: &mut R) -> Result<DVector<f64>> {
        let n = self.dof();
        let raw = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let (lo, hi) = self.sampler.speed;
        let target = if hi > lo { rng.random_range(lo..hi) } else { lo };
        let (v, norm) = match self.mechanics() {
            Some(sys) => {
                let frame = sys.frame(q)?;
                let v = frame.project(&raw);
                let norm = v.dot(&(&frame.g * &v)).sqrt();
                (v, norm)
            }
            None => {
                let norm = raw.norm();
                (raw, norm)
            }
        };
        if !(norm > 0.0) {
            return Err(Error::DegenerateBasis);
        }
        Ok(v * (target / norm))
    }

    fn phase(&self, q: &[f64], v: &DVector<f64>) -> Vec<f64> {
        let p = match self.mechanics() {
            Some(sys) => sys.metric.at(q) * v,
            None => v.clone(),
        };
        q.iter().copied().chain(p.iter().copied()).collect()
    }

    fn interior(&self, q: &[f64], skip: Option<usize>) -> bool {
        self.system.surfaces.iter().enumerate().all(|(i, s)| Some(i) == skip || s.value(q) > self.sampler.margin)
    }

    /// A phase state strictly inside every surface, velocity in the
    /// constraint distribution.
    pub fn sample_interior<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        for _ in 0..10_000 {
            let q = self.sample_q(rng);
            if !self.interior(&q, None) {
                continue;
            }
            let v = self.sample_velocity(&q, rng)?;
            return Ok(self.phase(&q, &v));
        }
        Err(Error::InvalidModel(format!("no interior sample found for {}", self.name)))
    }

    /// A phase state on surface `surface`, approaching it, velocity in the
    /// constraint distribution, inside all other surfaces.
    pub fn sample_impact<R: Rng + ?Sized>(&self, surface: usize, rng: &mut R) -> Result<Vec<f64>> {
        let s = self.system.surfaces.get(surface).ok_or_else(|| Error::InvalidParameter(format!("no surface {surface}")))?;
        for _ in 0..10_000 {
            let Some(q) = s.project(&self.sample_q(rng)) else { continue };
            if !self.interior(&q, Some(surface)) {
                continue;
            }
            let v = self.sample_velocity(&q, rng)?;
            let dh = s.differential(&q);
            for v in [v.clone(), -v] {
                let x = self.phase(&q, &v);
                let rate = self.system.guard_rate(surface, &x)?;
                let speed = self.system.speed(&x)?;
                if rate < -1e-2 * dh.norm() * speed {
                    return Ok(x);
                }
            }
        }
        Err(Error::InvalidModel(format!("no impact sample found on {}", s.label)))
    }
}

fn param(params: &BTreeMap<String, f64>, defaults: &[(&str, f64)]) -> Result<Vec<(String, f64)>> {
    for key in params.keys() {
        if !defaults.iter().any(|(k, _)| k == key) {
            return Err(Error::InvalidParameter(format!("unknown parameter `{key}`")));
        }
    }
    Ok(defaults
        .iter()
        .map(|&(k, v)| (k.to_string(), params.get(k).copied().unwrap_or(v)))
        .collect())
}

fn get(values: &[(String, f64)], key: &str) -> f64 {
    values.iter().find(|(k, _)| k == key).map(|(_, v)| *v).unwrap_or(f64::NAN)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Builds a catalog entry by name, overriding defaults with `params`.
pub fn build(name: &str, params: &BTreeMap<String, f64>) -> Result<ZooEntry> {
    let ellipse = |v: &[(String, f64)]| Table::Ellipse { a: get(v, "table_a"), b: get(v, "table_b") };
    match name {
        "interval-bouncer" => {
            let v = param(params, &[("alpha", 1.0)])?;
            make_interval_bouncer(get(&v, "alpha"))
        }
        "planar-box" => {
            let v = param(params, &[("alpha", 2.0), ("beta", 0.25)])?;
            make_planar_box(get(&v, "alpha"), get(&v, "beta"))
        }
        "tan-escape" => {
            param(params, &[])?;
            Ok(make_tan_escape())
        }
        "point-billiard" => {
            let v = param(params, &[("table_a", 2.0), ("table_b", 1.5)])?;
            make_point_billiard(ellipse(&v))
        }
        "chaplygin-sleigh" => {
            let v = param(params, &[("m", 1.0), ("inertia", 1.0), ("a", 0.5), ("length", 1.0), ("table_a", 2.0), ("table_b", 1.5)])?;
            make_chaplygin_sleigh(get(&v, "m"), get(&v, "inertia"), get(&v, "a"), get(&v, "length"), ellipse(&v))
        }
        "vertical-disk" => {
            let v = param(params, &[("m", 1.0), ("inertia", 1.0), ("j", 1.0), ("radius", 1.0), ("table_a", 2.0), ("table_b", 1.5)])?;
            make_vertical_disk(get(&v, "m"), get(&v, "inertia"), get(&v, "j"), get(&v, "radius"), ellipse(&v))
        }
        "rolling-ball" => {
            let v = param(params, &[("k2", 0.4), ("r", 1.0), ("table_a", 2.0), ("table_b", 1.5)])?;
            make_rolling_ball(get(&v, "k2").sqrt(), get(&v, "r"), ellipse(&v))
        }
        "heisenberg-toy" => {
            let v = param(params, &[("slab_width", 2.0)])?;
            make_heisenberg_toy(Table::Slab { width: get(&v, "slab_width") })
        }
        other => Err(Error::InvalidParameter(format!("unknown system `{other}`"))),
    }
}

fn flat_system(names: &[&str]) -> Result<MechanicalSystem> {
    let n = names.len();
    Ok(MechanicalSystem::new(ChartSpec::euclidean(names)?, MetricField::identity(n), SmoothScalarField::zero(n), ConstraintSet::none(n)))
}

fn slab_walls(n: usize) -> Vec<ImpactSurface> {
    let unit = |sign: f64| {
        move |_: &[f64]| {
            let mut d = DVector::zeros(n);
            d[0] = sign;
            d
        }
    };
    vec![
        ImpactSurface::new("left", SmoothScalarField::new(|q| q[0]).with_gradient(unit(1.0))),
        ImpactSurface::new("right", SmoothScalarField::new(|q| 1.0 - q[0]).with_gradient(unit(-1.0))),
    ]
}

/// Free particle on [0, 1] with q̇ ↦ −α q̇ at both ends.
pub fn make_interval_bouncer(alpha: f64) -> Result<ZooEntry> {
    positive("alpha", alpha)?;
    let sys = Arc::new(flat_system(&["q"])?);
    let law = ImpactLaw::Custom(Arc::new(move |_, x| DVector::from_vec(vec![x[0], -alpha * x[1]])));
    let system = HybridSystem::mechanical("interval-bouncer", sys, slab_walls(1), law);
    Ok(ZooEntry {
        name: "interval-bouncer".into(),
        system,
        parameters: vec![("alpha".into(), alpha)],
        sampler: SamplerSpec { q_lo: vec![0.0], q_hi: vec![1.0], speed: (0.5, 2.0), margin: 1e-3 },
        densities: vec![Density::canonical()],
        table: Some(Table::Slab { width: 1.0 }),
        locate: Arc::new(|x| [x[0], 0.0]),
        description: "free particle on [0,1], impacts scale velocity by -alpha",
        certificate: None,
    })
}

/// Free particle in [0, 1] × ℝ with (ẋ, ẏ) ↦ (−αẋ, βẏ) at x ∈ {0, 1}.
pub fn make_planar_box(alpha: f64, beta: f64) -> Result<ZooEntry> {
    positive("alpha", alpha)?;
    positive("beta", beta)?;
    let sys = Arc::new(flat_system(&["x", "y"])?);
    let law = ImpactLaw::Custom(Arc::new(move |_, x| DVector::from_vec(vec![x[0], x[1], -alpha * x[2], beta * x[3]])));
    let system = HybridSystem::mechanical("planar-box", sys, slab_walls(2), law);
    Ok(ZooEntry {
        name: "planar-box".into(),
        system,
        parameters: vec![("alpha".into(), alpha), ("beta".into(), beta)],
        sampler: SamplerSpec { q_lo: vec![0.0, -1.0], q_hi: vec![1.0, 1.0], speed: (0.5, 2.0), margin: 1e-3 },
        densities: vec![Density::canonical()],
        table: Some(Table::Slab { width: 1.0 }),
        locate: Arc::new(|x| [x[0], x[1]]),
        description: "strip [0,1]xR, impacts (xdot, ydot) -> (-alpha xdot, beta ydot)",
        certificate: None,
    })
}

/// H = p_x(1 + x²) + ½ p_y² x on ℝ², walls x ∈ {0, 1}, impact p_y ↦ −p_y.
pub fn make_tan_escape() -> ZooEntry {
    let h = ClosurePhaseFunction::new(2, |q, p| p[0] * (1.0 + q[0] * q[0]) + 0.5 * p[1] * p[1] * q[0]).with_gradients(
        |q, p| DVector::from_vec(vec![2.0 * q[0] * p[0] + 0.5 * p[1] * p[1], 0.0]),
        |q, p| DVector::from_vec(vec![1.0 + q[0] * q[0], p[1] * q[0]]),
    );
    let energy: Arc<dyn PhaseFunction> = Arc::new(h.clone());
    let field = Arc::new(HamiltonianField { hamiltonian: h });
    let impact = Arc::new(|_: usize, x: &[f64]| DVector::from_vec(vec![x[0], x[1], x[2], -x[3]]));
    let system = HybridSystem::custom("tan-escape", field, slab_walls(2), impact, Some(energy));
    ZooEntry {
        name: "tan-escape".into(),
        system,
        parameters: vec![],
        sampler: SamplerSpec { q_lo: vec![0.0, -1.0], q_hi: vec![1.0, 1.0], speed: (0.5, 2.0), margin: 1e-3 },
        densities: vec![Density::canonical()],
        table: Some(Table::Slab { width: 1.0 }),
        locate: Arc::new(|x| [x[0], x[1]]),
        description: "Hamiltonian with x(t) = tan t, escapes in finite time",
        certificate: None,
    }
}

fn table_sampler(table: &Table, extra_lo: &[f64], extra_hi: &[f64]) -> SamplerSpec {
    let [x0, x1, y0, y1] = table.bounds();
    let mut q_lo = vec![x0, y0];
    let mut q_hi = vec![x1, y1];
    q_lo.extend_from_slice(extra_lo);
    q_hi.extend_from_slice(extra_hi);
    SamplerSpec { q_lo, q_hi, speed: (0.5, 1.5), margin: 1e-2 }
}

/// Free unit-mass particle in an elliptical table with specular walls.
pub fn make_point_billiard(table: Table) -> Result<ZooEntry> {
    table.validate()?;
    let sys = Arc::new(flat_system(&["x", "y"])?);
    let surfaces = offset_surfaces(&table, 2, 0, 0.0);
    let system = HybridSystem::mechanical("point-billiard", sys, surfaces, ImpactLaw::Holonomic);
    Ok(ZooEntry {
        name: "point-billiard".into(),
        system,
        parameters: table_params(&table),
        sampler: table_sampler(&table, &[], &[]),
        densities: vec![Density::canonical()],
        table: Some(table),
        locate: Arc::new(|x| [x[0], x[1]]),
        description: "free particle in an elliptical table, specular impacts",
        certificate: None,
    })
}

fn table_params(table: &Table) -> Vec<(String, f64)> {
    match *table {
        Table::Ellipse { a, b } => vec![("table_a".into(), a), ("table_b".into(), b)],
        Table::Slab { width } => vec![("slab_width".into(), width)],
    }
}

/// Chaplygin sleigh in a table; walls are hit by the front or back end at
/// distance `length` from the reference point.
pub fn make_chaplygin_sleigh(m: f64, inertia: f64, a: f64, length: f64, table: Table) -> Result<ZooEntry> {
    positive("m", m)?;
    positive("inertia", inertia)?;
    positive("length", length)?;
    if !a.is_finite() {
        return Err(Error::InvalidParameter("a must be finite".into()));
    }
    table.validate()?;
    let ma = m * a;
    let j = inertia + m * a * a;
    let metric = MetricField::new(move |q| {
        let (s, c) = (q[2].sin(), q[2].cos());
        DMatrix::from_row_slice(3, 3, &[m, 0.0, -ma * s, 0.0, m, ma * c, -ma * s, ma * c, j])
    })
    .with_partials(move |q, i| {
        if i != 2 {
            return DMatrix::zeros(3, 3);
        }
        let (s, c) = (q[2].sin(), q[2].cos());
        DMatrix::from_row_slice(3, 3, &[0.0, 0.0, -ma * c, 0.0, 0.0, -ma * s, -ma * c, -ma * s, 0.0])
    });
    let constraints = ConstraintSet::new(1, |q| DMatrix::from_row_slice(1, 3, &[-q[2].sin(), q[2].cos(), 0.0])).with_partials(|q, i| {
        if i != 2 {
            return DMatrix::zeros(1, 3);
        }
        DMatrix::from_row_slice(1, 3, &[-q[2].cos(), -q[2].sin(), 0.0])
    });
    let sys = Arc::new(MechanicalSystem::new(
        ChartSpec::new(vec!["x".into(), "y".into(), "theta".into()], vec![false, false, true])?,
        metric,
        SmoothScalarField::zero(3),
        constraints,
    ));
    let surfaces = offset_surfaces(&table, 3, 2, length);
    let system = HybridSystem::mechanical("chaplygin-sleigh", sys, surfaces, ImpactLaw::NonholonomicGlobal);
    let pi = core::f64::consts::PI;
    let mut parameters = vec![("m".into(), m), ("inertia".into(), inertia), ("a".into(), a), ("length".into(), length)];
    parameters.extend(table_params(&table));
    let mut entry = ZooEntry {
        name: "chaplygin-sleigh".into(),
        system,
        parameters,
        sampler: table_sampler(&table, &[-pi], &[pi]),
        densities: vec![
            Density::canonical(),
            Density::new("p-theta-inv3", |x| x[5].abs().powi(-3)),
            Density::new("p-theta-inv1", |x| 1.0 / x[5].abs()),
        ],
        table: Some(table),
        locate: Arc::new(|x| [x[0], x[1]]),
        description: "Chaplygin sleigh; knife-edge constraint, front/back ends hit the wall",
        certificate: None,
    };
    entry.certificate = sleigh_certificate(&entry);
    Ok(entry)
}

/// Relative jump of p_θ^{-3} across one impact.
pub fn sleigh_density_jump(entry: &ZooEntry, x: &[f64], surface: usize) -> Result<f64> {
    let post = entry.system.apply_impact(surface, x)?.post;
    let f = |p: f64| p.abs().powi(-3);
    Ok((f(post[5]) - f(x[5])).abs() / f(x[5]))
}

fn sleigh_certificate(entry: &ZooEntry) -> Option<Vec<f64>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let x = entry.sample_impact(0, &mut rng).ok()?;
        if sleigh_density_jump(entry, &x, 0).is_ok_and(|j| j >= 0.01) {
            return Some(x);
        }
    }
    None
}

/// Vertical rolling disk; the wall is touched by the rim points at
/// distance `radius` along the rolling direction.
pub fn make_vertical_disk(m: f64, inertia: f64, j: f64, radius: f64, table: Table) -> Result<ZooEntry> {
    positive("m", m)?;
    positive("inertia", inertia)?;
    positive("j", j)?;
    positive("radius", radius)?;
    table.validate()?;
    let metric = MetricField::constant(DMatrix::from_diagonal(&DVector::from_vec(vec![m, m, inertia, j])));
    let r = radius;
    // rolling and lateral components of the no-slip condition
    let constraints = ConstraintSet::new(2, move |q| {
        let (s, c) = (q[3].sin(), q[3].cos());
        DMatrix::from_row_slice(2, 4, &[c, s, -r, 0.0, -s, c, 0.0, 0.0])
    })
    .with_partials(move |q, i| {
        if i != 3 {
            return DMatrix::zeros(2, 4);
        }
        let (s, c) = (q[3].sin(), q[3].cos());
        DMatrix::from_row_slice(2, 4, &[-s, c, 0.0, 0.0, -c, -s, 0.0, 0.0])
    });
    let sys = Arc::new(MechanicalSystem::new(
        ChartSpec::new(vec!["x".into(), "y".into(), "theta".into(), "phi".into()], vec![false, false, true, true])?,
        metric,
        SmoothScalarField::zero(4),
        constraints,
    ));
    let surfaces = offset_surfaces(&table, 4, 3, radius);
    let system = HybridSystem::mechanical("vertical-disk", sys, surfaces, ImpactLaw::NonholonomicGlobal);
    let pi = core::f64::consts::PI;
    let mut parameters = vec![("m".into(), m), ("inertia".into(), inertia), ("j".into(), j), ("radius".into(), radius)];
    parameters.extend(table_params(&table));
    Ok(ZooEntry {
        name: "vertical-disk".into(),
        system,
        parameters,
        sampler: table_sampler(&table, &[-pi, -pi], &[pi, pi]),
        densities: vec![Density::canonical()],
        table: Some(table),
        locate: Arc::new(|x| [x[0], x[1]]),
        description: "vertical rolling disk; rim points hit the wall",
        certificate: None,
    })
}

/// Ball of radius `r` and gyration radius `k` rolling without slipping,
/// Euler angles (θ, φ, ψ); the contact point hits the wall.
pub fn make_rolling_ball(k: f64, r: f64, table: Table) -> Result<ZooEntry> {
    positive("k", k)?;
    positive("r", r)?;
    table.validate()?;
    let k2 = k * k;
    let metric = MetricField::new(move |q| {
        let c = q[2].cos();
        let mut g = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, k2, k2, k2]));
        g[(3, 4)] = k2 * c;
        g[(4, 3)] = k2 * c;
        g
    })
    .with_partials(move |q, i| {
        let mut d = DMatrix::zeros(5, 5);
        if i == 2 {
            d[(3, 4)] = -k2 * q[2].sin();
            d[(4, 3)] = -k2 * q[2].sin();
        }
        d
    });
    let constraints = ConstraintSet::new(2, move |q| {
        let st = q[2].sin();
        let (sp, cp) = (q[4].sin(), q[4].cos());
        DMatrix::from_row_slice(2, 5, &[1.0, 0.0, -r * sp, r * st * cp, 0.0, 0.0, 1.0, r * cp, r * st * sp, 0.0])
    })
    .with_partials(move |q, i| {
        let (st, ct) = (q[2].sin(), q[2].cos());
        let (sp, cp) = (q[4].sin(), q[4].cos());
        match i {
            2 => DMatrix::from_row_slice(2, 5, &[0.0, 0.0, 0.0, r * ct * cp, 0.0, 0.0, 0.0, 0.0, r * ct * sp, 0.0]),
            4 => DMatrix::from_row_slice(2, 5, &[0.0, 0.0, -r * cp, -r * st * sp, 0.0, 0.0, 0.0, -r * sp, r * st * cp, 0.0]),
            _ => DMatrix::zeros(2, 5),
        }
    });
    let sys = Arc::new(MechanicalSystem::new(
        ChartSpec::new(
            vec!["x".into(), "y".into(), "theta".into(), "phi".into(), "psi".into()],
            vec![false, false, true, true, true],
        )?,
        metric,
        SmoothScalarField::zero(5),
        constraints,
    ));
    let surfaces = offset_surfaces(&table, 5, 2, 0.0);
    let system = HybridSystem::mechanical("rolling-ball", sys, surfaces, ImpactLaw::NonholonomicGlobal);
    let pi = core::f64::consts::PI;
    let mut parameters = vec![("k2".into(), k2), ("r".into(), r)];
    parameters.extend(table_params(&table));
    Ok(ZooEntry {
        name: "rolling-ball".into(),
        system,
        parameters,
        sampler: table_sampler(&table, &[0.5, -pi, -pi], &[pi - 0.5, pi, pi]),
        densities: vec![Density::canonical()],
        table: Some(table),
        locate: Arc::new(|x| [x[0], x[1]]),
        description: "homogeneous-type ball rolling on the table; contact point hits the wall",
        certificate: None,
    })
}

/// Flat ℝ³ with the constraint ż = y ẋ.
pub fn make_heisenberg_toy(table: Table) -> Result<ZooEntry> {
    table.validate()?;
    let constraints = ConstraintSet::new(1, |q| DMatrix::from_row_slice(1, 3, &[-q[1], 0.0, 1.0])).with_partials(|_, i| {
        let mut d = DMatrix::zeros(1, 3);
        if i == 1 {
            d[(0, 0)] = -1.0;
        }
        d
    });
    let sys = Arc::new(MechanicalSystem::new(
        ChartSpec::euclidean(&["x", "y", "z"])?,
        MetricField::identity(3),
        SmoothScalarField::zero(3),
        constraints,
    ));
    let surfaces = offset_surfaces(&table, 3, 2, 0.0);
    let system = HybridSystem::mechanical("heisenberg-toy", sys, surfaces, ImpactLaw::NonholonomicGlobal);
    Ok(ZooEntry {
        name: "heisenberg-toy".into(),
        system,
        parameters: table_params(&table),
        sampler: table_sampler(&table, &[-1.0], &[1.0]),
        densities: vec![Density::canonical(), Density::new("sqrt-1-plus-y2", |x| (1.0 + x[1] * x[1]).sqrt())],
        table: Some(table),
        locate: Arc::new(|x| [x[0], x[1]]),
        description: "flat R^3 with constraint dz - y dx",
        certificate: None,
    })
}

/// Every catalog entry with default parameters, in catalog order.
pub fn catalog() -> Result<Vec<ZooEntry>> {
    CATALOG.iter().map(|n| build(n, &BTreeMap::new())).collect()
}
