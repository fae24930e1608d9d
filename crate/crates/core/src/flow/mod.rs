//! Hybrid flow: adaptive integration of the continuous field between
//! impacts, event location on the impact surfaces, impact application and
//! Zeno accounting.

pub mod dopri;
mod zeno;

pub use zeno::{detect_zeno, ZenoClass, ZenoReport};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::impacts::ImpactEvent;
use crate::system::HybridSystem;

/// Interior fractions of each step at which guards are sampled, so that a
/// surface crossed twice within one step is not missed.
const GUARD_SAMPLES: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    /// Required |h| at a located impact.
    pub event_tol: f64,
    pub max_impacts: usize,
    /// Inter-impact gap below which the Zeno guard fires.
    pub min_gap: f64,
    /// Number of trailing gaps used by the Zeno detector.
    pub zeno_window: usize,
    /// Phase-space norm counted as escape (diagnostic only).
    pub escape_threshold: f64,
    /// Phase-space norm at which the flow is stopped as a domain exit.
    pub divergence_limit: f64,
    pub max_steps: usize,
    pub record_arcs: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-12,
            max_step: 0.5,
            event_tol: 1e-10,
            max_impacts: 100_000,
            min_gap: 1e-13,
            zeno_window: 8,
            escape_threshold: 1e6,
            divergence_limit: 1e15,
            max_steps: 50_000_000,
            record_arcs: true,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("max_step", self.max_step),
            ("event_tol", self.event_tol),
            ("min_gap", self.min_gap),
            ("escape_threshold", self.escape_threshold),
            ("divergence_limit", self.divergence_limit),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_impacts < 1 {
            return Err(Error::InvalidParameter("max_impacts must be at least 1".into()));
        }
        if self.zeno_window < 2 {
            return Err(Error::InvalidParameter("zeno_window must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Termination {
    Horizon,
    ZenoGuard,
    Grazing,
    DomainExit,
    CornerHit,
    Error(String),
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Horizon => "horizon",
            Termination::ZenoGuard => "zeno-guard",
            Termination::Grazing => "grazing",
            Termination::DomainExit => "domain-exit",
            Termination::CornerHit => "corner-hit",
            Termination::Error(_) => "error",
        }
    }
}

/// Smooth piece of a trajectory, sampled at accepted steps.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Arc {
    pub id: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HybridTrajectory {
    pub arcs: Vec<Arc>,
    pub events: Vec<ImpactEvent>,
    pub termination: Termination,
    pub final_time: f64,
    pub final_state: Vec<f64>,
    /// First time the phase norm exceeded the escape threshold.
    pub escape_time: Option<f64>,
    pub max_norm: f64,
    pub steps: usize,
}

/// How a single arc ended.
#[derive(Debug, Clone, PartialEq)]
pub enum ArcEnd {
    Horizon,
    Hit { surface: usize },
    Corner,
    Escape,
    StepLimit,
}

/// Outcome of [`integrate_arc`]: final state, elapsed time and end reason.
#[derive(Debug, Clone)]
pub struct ArcResult {
    pub state: DVector<f64>,
    pub elapsed: f64,
    pub end: ArcEnd,
    pub steps: usize,
    pub escape_elapsed: Option<f64>,
    pub max_norm: f64,
}

/// Event bookkeeping for one surface: impacts count only while armed.
#[derive(Debug, Clone)]
pub struct Guards {
    pub armed: Vec<bool>,
}

impl Guards {
    /// Arms every surface whose guard is clearly positive at `x`.
    pub fn at(sys: &HybridSystem, x: &[f64], tol: f64) -> Self {
        Self { armed: (0..sys.surfaces.len()).map(|i| sys.guard(i, x) > tol).collect() }
    }
}

struct Integrator<'a> {
    sys: &'a HybridSystem,
    config: &'a IntegratorConfig,
    h: Option<f64>,
}

impl Integrator<'_> {
    fn approach_cap(&self, x: &DVector<f64>, guards: &Guards) -> f64 {
        let mut cap = f64::INFINITY;
        for (i, &armed) in guards.armed.iter().enumerate() {
            if !armed {
                continue;
            }
            let value = self.sys.guard(i, x.as_slice());
            if let Ok(rate) = self.sys.guard_rate(i, x.as_slice()) {
                if rate < 0.0 && value > 0.0 {
                    cap = cap.min(2.0 * value / -rate);
                }
            }
        }
        cap
    }

    /// Armed surfaces crossed in the earliest sampled sub-interval of an
    /// accepted step, as (surface, θ_lo, θ_hi).
    fn crossings(&self, step: &dopri::Step, guards: &Guards) -> Vec<(usize, f64, f64)> {
        let samples: Vec<DVector<f64>> = GUARD_SAMPLES
            .iter()
            .map(|&th| if th == 1.0 { step.y1.clone() } else { step.interpolate(th) })
            .collect();
        let mut first = GUARD_SAMPLES.len();
        let mut hits = Vec::new();
        for (i, &armed) in guards.armed.iter().enumerate() {
            if !armed {
                continue;
            }
            if let Some(k) = samples.iter().position(|y| self.sys.guard(i, y.as_slice()) <= 0.0) {
                if k < first {
                    first = k;
                    hits.clear();
                }
                if k == first {
                    hits.push(i);
                }
            }
        }
        let lo = if first == 0 { 0.0 } else { GUARD_SAMPLES.get(first.wrapping_sub(1)).copied().unwrap_or(0.0) };
        hits.into_iter().map(|i| (i, lo, GUARD_SAMPLES[first])).collect()
    }

    /// Locates the crossing time inside a step and returns (fraction of h, state).
    fn locate(&self, step: &dopri::Step, surface: usize, lo: f64, hi: f64) -> Result<(f64, DVector<f64>)> {
        let g = |th: f64| self.sys.guard(surface, step.interpolate(th).as_slice());
        let (mut a, mut b) = (lo, hi);
        let (mut fa, mut fb) = (g(a), g(b));
        // Illinois regula falsi on the dense output
        let mut side = 0i8;
        for _ in 0..200 {
            if (b - a) * step.h <= 1e-15 * step.h.max(1e-300) || fb == 0.0 {
                break;
            }
            let mut c = (a * fb - b * fa) / (fb - fa);
            if !(c > a && c < b) {
                c = 0.5 * (a + b);
            }
            let fc = g(c);
            if fc > 0.0 {
                a = c;
                fa = fc;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                b = c;
                fb = fc;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
            if fc.abs() <= 1e-3 * self.config.event_tol {
                break;
            }
        }
        // polish with direct steps from the start of the step
        let mut s = b * step.h;
        let mut state = dopri::step(self.sys.field.as_ref(), &step.y0, &step.k1, s, self.config.rtol, self.config.atol)?.y1;
        for _ in 0..6 {
            let value = self.sys.guard(surface, state.as_slice());
            if value.abs() <= 1e-3 * self.config.event_tol {
                break;
            }
            let rate = self.sys.guard_rate(surface, state.as_slice())?;
            if rate == 0.0 {
                break;
            }
            let next = s - value / rate;
            if !(next > 0.0 && next <= step.h * 1.0000001) {
                break;
            }
            s = next;
            state = dopri::step(self.sys.field.as_ref(), &step.y0, &step.k1, s, self.config.rtol, self.config.atol)?.y1;
        }
        Ok((s / step.h, state))
    }

    fn run(
        &mut self,
        x0: &DVector<f64>,
        duration: f64,
        guards: &mut Guards,
        mut record: Option<&mut Arc>,
        t_offset: f64,
        step_budget: usize,
    ) -> Result<ArcResult> {
        let cfg = self.config;
        let field = self.sys.field.as_ref();
        let mut y = x0.clone();
        let mut k1 = field.eval(y.as_slice())?;
        let mut tau = 0.0;
        let mut steps = 0usize;
        let mut max_norm = y.norm();
        let mut escape_elapsed = (max_norm > cfg.escape_threshold).then_some(0.0);
        let mut h = match self.h {
            Some(h) => h,
            None => dopri::initial_step(field, &y, &k1, cfg.rtol, cfg.atol)?,
        };
        if let Some(r) = record.as_deref_mut() {
            r.times.push(t_offset);
            r.states.push(y.as_slice().to_vec());
        }
        let finish = |state: DVector<f64>, elapsed: f64, end: ArcEnd, steps: usize, escape: Option<f64>, max_norm: f64| ArcResult {
            state,
            elapsed,
            end,
            steps,
            escape_elapsed: escape,
            max_norm,
        };
        loop {
            let remaining = duration - tau;
            if remaining <= 0.0 {
                return Ok(finish(y, tau, ArcEnd::Horizon, steps, escape_elapsed, max_norm));
            }
            if steps >= step_budget {
                return Ok(finish(y, tau, ArcEnd::StepLimit, steps, escape_elapsed, max_norm));
            }
            let mut hs = h.min(cfg.max_step).min(self.approach_cap(&y, guards));
            let last = hs >= remaining;
            if last {
                hs = remaining;
            }
            let step = dopri::step(field, &y, &k1, hs, cfg.rtol, cfg.atol)?;
            steps += 1;
            let finite = step.y1.iter().all(|v| v.is_finite());
            if !finite || step.error > 1.0 {
                let shrink = if finite { dopri::next_step_size(hs, step.error).min(0.9 * hs) } else { 0.25 * hs };
                if tau + shrink == tau || shrink <= 0.0 {
                    return Err(Error::StepUnderflow(t_offset + tau));
                }
                h = shrink;
                continue;
            }
            h = dopri::next_step_size(hs, step.error);
            self.h = Some(h);

            let crossings = self.crossings(&step, guards);
            if !crossings.is_empty() {
                let mut best: Option<(usize, f64, DVector<f64>)> = None;
                for (surface, lo, hi) in crossings {
                    let (frac, state) = self.locate(&step, surface, lo, hi)?;
                    if best.as_ref().is_none_or(|b| frac < b.1) {
                        best = Some((surface, frac, state));
                    }
                }
                let (surface, frac, state) = best.expect("non-empty crossings");
                let elapsed = tau + frac * step.h;
                let corner = guards.armed.iter().enumerate().any(|(j, &a)| {
                    a && j != surface && self.sys.guard(j, state.as_slice()) <= cfg.event_tol
                });
                if let Some(r) = record.as_deref_mut() {
                    r.times.push(t_offset + elapsed);
                    r.states.push(state.as_slice().to_vec());
                }
                let end = if corner { ArcEnd::Corner } else { ArcEnd::Hit { surface } };
                return Ok(finish(state, elapsed, end, steps, escape_elapsed, max_norm));
            }

            tau = if last { duration } else { tau + step.h };
            y = step.y1;
            k1 = step.k7;
            for (i, armed) in guards.armed.iter_mut().enumerate() {
                if !*armed && self.sys.guard(i, y.as_slice()) > cfg.event_tol {
                    *armed = true;
                }
            }
            let norm = y.norm();
            max_norm = max_norm.max(norm);
            if escape_elapsed.is_none() && norm > cfg.escape_threshold {
                escape_elapsed = Some(tau);
            }
            if let Some(r) = record.as_deref_mut() {
                r.times.push(t_offset + tau);
                r.states.push(y.as_slice().to_vec());
            }
            if norm > cfg.divergence_limit {
                return Ok(finish(y, tau, ArcEnd::Escape, steps, escape_elapsed, max_norm));
            }
        }
    }
}

/// Integrates the continuous field from `x0` for at most `duration`,
/// stopping at the first armed surface crossed from the interior.
pub fn integrate_arc(
    sys: &HybridSystem,
    x0: &[f64],
    duration: f64,
    guards: &mut Guards,
    config: &IntegratorConfig,
) -> Result<ArcResult> {
    if x0.len() != sys.dim() {
        return Err(Error::Dimension { expected: sys.dim(), got: x0.len() });
    }
    let mut it = Integrator { sys, config, h: None };
    it.run(&DVector::from_column_slice(x0), duration, guards, None, 0.0, config.max_steps)
}

/// The hybrid flow over `[0, horizon]` from `x0`.
pub fn hybrid_flow(sys: &HybridSystem, x0: &[f64], horizon: f64, config: &IntegratorConfig) -> Result<HybridTrajectory> {
    config.validate()?;
    if x0.len() != sys.dim() {
        return Err(Error::Dimension { expected: sys.dim(), got: x0.len() });
    }
    if !(horizon >= 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be non-negative, got {horizon}")));
    }
    let mut traj = HybridTrajectory {
        arcs: Vec::new(),
        events: Vec::new(),
        termination: Termination::Horizon,
        final_time: 0.0,
        final_state: x0.to_vec(),
        escape_time: None,
        max_norm: DVector::from_column_slice(x0).norm(),
        steps: 0,
    };
    let mut x = DVector::from_column_slice(x0);
    let mut t = 0.0;
    let mut since_impact = 0.0;
    let mut guards = Guards::at(sys, x0, config.event_tol);
    let mut it = Integrator { sys, config, h: None };

    // a start on a surface while approaching it means an impact right away
    let mut pending: Option<usize> = None;
    for i in 0..sys.surfaces.len() {
        let value = sys.guard(i, x0);
        if value < -config.event_tol {
            return Err(Error::InvalidParameter(format!(
                "initial state lies outside surface {} (h = {value:e})",
                sys.surfaces[i].label
            )));
        }
        if value <= config.event_tol && sys.guard_rate(i, x0)? < 0.0 {
            pending = Some(i);
        }
    }

    loop {
        if let Some(surface) = pending.take() {
            match apply(sys, surface, &x, t, since_impact) {
                Ok(ev) => {
                    x = DVector::from_column_slice(&ev.post);
                    traj.events.push(ev);
                    for (j, armed) in guards.armed.iter_mut().enumerate() {
                        *armed = j != surface && sys.guard(j, x.as_slice()) > config.event_tol;
                    }
                    since_impact = 0.0;
                }
                Err(Error::Grazing { .. }) => {
                    let mut ev = grazing_event(sys, surface, &x, t, since_impact);
                    ev.grazing = true;
                    traj.events.push(ev);
                    traj.termination = Termination::Grazing;
                    break;
                }
                Err(e) => {
                    traj.termination = Termination::Error(e.to_string());
                    break;
                }
            }
            if traj.events.len() >= config.max_impacts {
                traj.termination = Termination::ZenoGuard;
                break;
            }
        }
        let remaining = horizon - t;
        if remaining <= 0.0 {
            break;
        }
        let mut arc = config.record_arcs.then(|| Arc { id: traj.arcs.len(), ..Arc::default() });
        let budget = config.max_steps.saturating_sub(traj.steps);
        let res = it.run(&x, remaining, &mut guards, arc.as_mut(), t, budget);
        if let Some(a) = arc {
            traj.arcs.push(a);
        }
        let res = match res {
            Ok(r) => r,
            Err(e) => {
                traj.termination = Termination::Error(e.to_string());
                break;
            }
        };
        traj.steps += res.steps;
        traj.max_norm = traj.max_norm.max(res.max_norm);
        if traj.escape_time.is_none() {
            traj.escape_time = res.escape_elapsed.map(|e| t + e);
        }
        since_impact += res.elapsed;
        t = match res.end {
            ArcEnd::Horizon => horizon,
            _ => t + res.elapsed,
        };
        x = res.state;
        match res.end {
            ArcEnd::Horizon => break,
            ArcEnd::Escape => {
                traj.termination = Termination::DomainExit;
                break;
            }
            ArcEnd::StepLimit => {
                traj.termination = Termination::Error("step limit reached".into());
                break;
            }
            ArcEnd::Corner => {
                traj.termination = Termination::CornerHit;
                break;
            }
            ArcEnd::Hit { surface } => {
                if since_impact < config.min_gap && !traj.events.is_empty() {
                    traj.termination = Termination::ZenoGuard;
                    break;
                }
                pending = Some(surface);
            }
        }
    }
    traj.final_time = t;
    traj.final_state = x.as_slice().to_vec();
    Ok(traj)
}

fn apply(sys: &HybridSystem, surface: usize, x: &DVector<f64>, t: f64, dwell: f64) -> Result<ImpactEvent> {
    let out = sys.apply_impact(surface, x.as_slice())?;
    Ok(ImpactEvent {
        time: t,
        surface,
        label: sys.surfaces[surface].label.clone(),
        pre: x.as_slice().to_vec(),
        post: out.post.as_slice().to_vec(),
        velocity_pre: out.velocity_pre.as_slice().to_vec(),
        velocity_post: out.velocity_post.as_slice().to_vec(),
        epsilon: out.epsilon,
        lambda: out.lambda,
        dwell,
        grazing: false,
    })
}

fn grazing_event(sys: &HybridSystem, surface: usize, x: &DVector<f64>, t: f64, dwell: f64) -> ImpactEvent {
    let v = sys.configuration_velocity(x.as_slice()).map(|v| v.as_slice().to_vec()).unwrap_or_default();
    ImpactEvent {
        time: t,
        surface,
        label: sys.surfaces[surface].label.clone(),
        pre: x.as_slice().to_vec(),
        post: x.as_slice().to_vec(),
        velocity_pre: v.clone(),
        velocity_post: v,
        epsilon: None,
        lambda: vec![],
        dwell,
        grazing: true,
    }
}

/// φ^H(1, x) as a phase vector. Any termination other than reaching the
/// horizon is an error.
pub fn time_1_map(sys: &HybridSystem, x: &[f64], config: &IntegratorConfig) -> Result<DVector<f64>> {
    flow_for(sys, x, 1.0, config)
}

/// φ^H(T, x), failing unless the horizon is reached.
pub fn flow_for(sys: &HybridSystem, x: &[f64], horizon: f64, config: &IntegratorConfig) -> Result<DVector<f64>> {
    let cfg = IntegratorConfig { record_arcs: false, ..config.clone() };
    let traj = hybrid_flow(sys, x, horizon, &cfg)?;
    termination_error(&traj)?;
    Ok(DVector::from_vec(traj.final_state))
}

/// Maps a non-horizon termination to the corresponding error.
pub fn termination_error(traj: &HybridTrajectory) -> Result<()> {
    let t = traj.final_time;
    match &traj.termination {
        Termination::Horizon => Ok(()),
        Termination::ZenoGuard => Err(Error::ZenoGuard(t)),
        Termination::Grazing => Err(Error::GrazingTermination(t)),
        Termination::DomainExit => Err(Error::DomainExit(t)),
        Termination::CornerHit => Err(Error::CornerHit(t)),
        Termination::Error(msg) => Err(Error::InvalidModel(msg.clone())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ClosureField;
    use crate::geometry::{ImpactSurface, SmoothScalarField};
    use crate::zoo;
    use alloc::sync::Arc as Shared;
    use approx::assert_relative_eq;

    fn free_line(wall: ImpactSurface) -> HybridSystem {
        let field = Shared::new(ClosureField::new(2, |x| DVector::from_vec(vec![x[1], 0.0])));
        HybridSystem::custom("line", field, vec![wall], Shared::new(|_, x| DVector::from_vec(vec![x[0], -x[1]])), None)
    }

    #[test]
    fn free_particle_hits_wall_at_unit_time() {
        // interior q < 0, wall at the origin
        let sys = free_line(ImpactSurface::new("0", SmoothScalarField::new(|q| -q[0])));
        let cfg = IntegratorConfig::default();
        let mut guards = Guards::at(&sys, &[-1.0, 1.0], cfg.event_tol);
        let res = integrate_arc(&sys, &[-1.0, 1.0], 5.0, &mut guards, &cfg).unwrap();
        assert_eq!(res.end, ArcEnd::Hit { surface: 0 });
        assert!((res.elapsed - 1.0).abs() < 1e-9);
        assert!(res.state[0].abs() <= cfg.event_tol);
    }

    #[test]
    fn oscillator_without_crossing_reaches_horizon() {
        let field = Shared::new(ClosureField::new(2, |x| DVector::from_vec(vec![x[1], -x[0]])));
        let wall = ImpactSurface::new("far", SmoothScalarField::new(|q| 2.0 - q[0]));
        let sys = HybridSystem::custom("osc", field, vec![wall], Shared::new(|_, x| DVector::from_column_slice(x)), None);
        let cfg = IntegratorConfig::default();
        let mut guards = Guards::at(&sys, &[1.0, 0.0], cfg.event_tol);
        let res = integrate_arc(&sys, &[1.0, 0.0], 10.0, &mut guards, &cfg).unwrap();
        assert_eq!(res.end, ArcEnd::Horizon);
        assert_relative_eq!(res.state[0], 10f64.cos(), epsilon = 1e-8);
    }

    #[test]
    fn tan_escape_reaches_unit_wall_at_quarter_pi() {
        let e = zoo::make_tan_escape();
        let cfg = IntegratorConfig::default();
        let x0 = [0.0, 0.0, 0.0, 0.0];
        let mut guards = Guards::at(&e.system, &x0, cfg.event_tol);
        let res = integrate_arc(&e.system, &x0, 1.0, &mut guards, &cfg).unwrap();
        assert_eq!(res.end, ArcEnd::Hit { surface: 1 });
        assert!((res.elapsed - core::f64::consts::FRAC_PI_4).abs() < 1e-9);
    }

    #[test]
    fn elastic_bouncer_hits_every_unit_time() {
        let e = zoo::make_interval_bouncer(1.0).unwrap();
        let traj = hybrid_flow(&e.system, &[0.0, 1.0], 5.5, &IntegratorConfig::default()).unwrap();
        assert_eq!(traj.termination, Termination::Horizon);
        let times: Vec<f64> = traj.events.iter().map(|e| e.time).collect();
        assert_eq!(times.len(), 5);
        for (k, t) in times.iter().enumerate() {
            assert!((t - (k + 1) as f64).abs() < 1e-9, "{t}");
        }
        for w in traj.events.windows(2) {
            assert!(w[1].time > w[0].time);
        }
    }

    #[test]
    fn super_elastic_bouncer_accumulates_at_two() {
        let e = zoo::make_interval_bouncer(2.0).unwrap();
        let traj = hybrid_flow(&e.system, &[0.0, 1.0], 3.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(traj.termination, Termination::ZenoGuard);
        assert!(traj.events.len() >= 40);
        assert!((traj.events[39].time - 2.0).abs() < 1e-6);
        let report = detect_zeno(&traj, &e.system, &IntegratorConfig::default());
        assert!((report.t_infinity.unwrap() - 2.0).abs() < 1e-4);
        assert_relative_eq!(report.ratio.unwrap(), 0.5, epsilon = 1e-6);
    }

    #[test]
    fn sub_elastic_bouncer_is_not_zeno() {
        let e = zoo::make_interval_bouncer(0.5).unwrap();
        let traj = hybrid_flow(&e.system, &[0.0, 1.0], 60.0, &IntegratorConfig::default()).unwrap();
        let report = detect_zeno(&traj, &e.system, &IntegratorConfig::default());
        assert_eq!(report.classification, ZenoClass::None);
        let e = zoo::make_interval_bouncer(1.0).unwrap();
        let traj = hybrid_flow(&e.system, &[0.0, 1.0], 20.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(detect_zeno(&traj, &e.system, &IntegratorConfig::default()).classification, ZenoClass::None);
    }

    #[test]
    fn too_few_impacts_give_no_report() {
        let e = zoo::make_interval_bouncer(2.0).unwrap();
        let traj = hybrid_flow(&e.system, &[0.0, 1.0], 1.6, &IntegratorConfig::default()).unwrap();
        assert_eq!(traj.events.len(), 2);
        let r = detect_zeno(&traj, &e.system, &IntegratorConfig::default());
        assert_eq!(r.classification, ZenoClass::None);
        assert!(r.t_infinity.is_none());
    }

    #[test]
    fn planar_box_is_spasmodic() {
        let e = zoo::make_planar_box(2.0, 0.25).unwrap();
        let cfg = IntegratorConfig::default();
        let traj = hybrid_flow(&e.system, &[0.5, 0.0, 1.0, 1.0], 3.0, &cfg).unwrap();
        let r = detect_zeno(&traj, &e.system, &cfg);
        assert_eq!(r.classification, ZenoClass::SuspectedSpasmodic);
    }

    #[test]
    fn time_one_maps() {
        let e = zoo::make_point_billiard(zoo::Table::Ellipse { a: 10.0, b: 10.0 }).unwrap();
        let cfg = IntegratorConfig::default();
        let y = time_1_map(&e.system, &[0.1, 0.2, 0.5, -0.25], &cfg).unwrap();
        assert_relative_eq!(y, DVector::from_vec(vec![0.6, -0.05, 0.5, -0.25]), epsilon = 1e-10);
        // piecewise oracle: 0.5 → wall at 1 (t = 0.5) → back to 0.5 at t = 1
        let b = zoo::make_interval_bouncer(1.0).unwrap();
        let y = time_1_map(&b.system, &[0.5, 1.0], &cfg).unwrap();
        assert_relative_eq!(y, DVector::from_vec(vec![0.5, -1.0]), epsilon = 1e-9);
        let rest = time_1_map(&b.system, &[0.3, 0.0], &cfg).unwrap();
        assert_eq!(rest, DVector::from_vec(vec![0.3, 0.0]));
    }

    #[test]
    fn starting_on_a_wall_while_approaching_impacts_immediately() {
        let b = zoo::make_interval_bouncer(1.0).unwrap();
        let traj = hybrid_flow(&b.system, &[0.0, -1.0], 0.5, &IntegratorConfig::default()).unwrap();
        assert_eq!(traj.events.len(), 1);
        assert_eq!(traj.events[0].time, 0.0);
        assert_relative_eq!(traj.final_state[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn tan_escape_is_flagged_before_blow_up() {
        let e = zoo::make_tan_escape();
        let traj = hybrid_flow(&e.system, &[0.0, 0.0, 0.0, 0.5], 2.0, &IntegratorConfig::default()).unwrap();
        let t = traj.escape_time.expect("escape");
        assert!(t < core::f64::consts::FRAC_PI_2);
        assert_ne!(traj.termination, Termination::Horizon);
        assert_eq!(traj.events.len(), 1);
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::default().validate().is_ok());
        let bad = IntegratorConfig { rtol: 0.0, ..IntegratorConfig::default() };
        assert!(bad.validate().is_err());
        let bad = IntegratorConfig { max_impacts: 0, ..IntegratorConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn impacts_lie_on_surfaces_and_flows_are_deterministic() {
        let e = zoo::make_point_billiard(zoo::Table::Ellipse { a: 2.0, b: 1.0 }).unwrap();
        let cfg = IntegratorConfig::default();
        let x0 = [0.3, 0.1, 0.8, 0.45];
        let a = hybrid_flow(&e.system, &x0, 30.0, &cfg).unwrap();
        let b = hybrid_flow(&e.system, &x0, 30.0, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.events.len() > 5);
        for ev in &a.events {
            assert!(e.system.guard(ev.surface, &ev.pre).abs() <= cfg.event_tol);
            assert!(e.system.guard_rate(ev.surface, &ev.pre).unwrap() < 0.0);
            assert!(e.system.guard_rate(ev.surface, &ev.post).unwrap() > 0.0);
        }
        let h0 = e.system.energy(&x0).unwrap();
        assert!((e.system.energy(&a.final_state).unwrap() - h0).abs() < 1e-9);
    }
}
