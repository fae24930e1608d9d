//! Property tests over randomly sampled states of the catalog systems.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use hybridmech_core::analysis::{self, SampledKForm};
use hybridmech_core::dynamics::{legendre, poisson_bracket, ClosurePhaseFunction, HybridState, PhaseFunction};
use hybridmech_core::flow::{self, IntegratorConfig};
use hybridmech_core::linalg;
use hybridmech_core::stats::{self, DensitySettings};
use hybridmech_core::zoo::{self, ZooEntry};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MECHANICAL: [&str; 5] = ["point-billiard", "chaplygin-sleigh", "vertical-disk", "rolling-ball", "heisenberg-toy"];
const CONSTRAINED: [&str; 4] = ["chaplygin-sleigh", "vertical-disk", "rolling-ball", "heisenberg-toy"];

fn entries() -> &'static Vec<ZooEntry> {
    static ENTRIES: OnceLock<Vec<ZooEntry>> = OnceLock::new();
    ENTRIES.get_or_init(|| MECHANICAL.iter().map(|n| zoo::build(n, &BTreeMap::new()).unwrap()).collect())
}

fn entry(name: &str) -> &'static ZooEntry {
    entries().iter().find(|e| e.name == name).unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn system_index() -> impl Strategy<Value = usize> {
    0..MECHANICAL.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn metric_and_constraint_mass_are_spd(idx in system_index(), seed in any::<u64>()) {
        let e = &entries()[idx];
        let x = e.sample_interior(&mut rng(seed)).unwrap();
        let sys = e.system.mechanics.as_ref().unwrap();
        let q = &x[..e.dof()];
        let frame = sys.frame(q).unwrap();
        prop_assert!(linalg::symmetric_eigenvalues(&frame.g).iter().all(|&l| l > 0.0));
        prop_assert!(linalg::symmetric_eigenvalues(&frame.mass).iter().all(|&l| l > 0.0));
        let direct = &frame.eta * &frame.w;
        prop_assert!((direct - &frame.mass).abs().max() <= 1e-14 * frame.mass.abs().max().max(1.0));
    }

    #[test]
    fn projection_is_idempotent_and_annihilated(idx in system_index(), seed in any::<u64>()) {
        let e = &entries()[idx];
        let mut r = rng(seed);
        let x = e.sample_interior(&mut r).unwrap();
        let sys = e.system.mechanics.as_ref().unwrap();
        let frame = sys.frame(&x[..e.dof()]).unwrap();
        let v = DVector::from_fn(e.dof(), |i, _| ((seed >> (i % 16)) % 17) as f64 - 8.0 + 0.1 * i as f64);
        let once = frame.project(&v);
        let twice = frame.project(&once);
        prop_assert!((&twice - &once).norm() <= 1e-12 * v.norm().max(1.0));
        if frame.eta.nrows() > 0 {
            prop_assert!((&frame.eta * &once).norm() <= 1e-12 * v.norm().max(1.0));
        }
    }

    #[test]
    fn analytic_metric_partials_match_differences(idx in system_index(), seed in any::<u64>()) {
        let e = &entries()[idx];
        let x = e.sample_interior(&mut rng(seed)).unwrap();
        let sys = e.system.mechanics.as_ref().unwrap();
        let q = &x[..e.dof()];
        for i in 0..e.dof() {
            let h = 1e-6;
            let mut up = q.to_vec();
            up[i] += h;
            let mut down = q.to_vec();
            down[i] -= h;
            let fd = (sys.metric.at(&up) - sys.metric.at(&down)) / (2.0 * h);
            let an = sys.metric.partial(q, i);
            prop_assert!((&fd - &an).abs().max() <= 1e-5 * an.abs().max().max(1.0));
            if !sys.constraints.is_empty() {
                let fd = (sys.constraints.at(&up) - sys.constraints.at(&down)) / (2.0 * h);
                let an = sys.constraints.partial(q, i);
                prop_assert!((&fd - &an).abs().max() <= 1e-5 * an.abs().max().max(1.0));
            }
        }
    }

    #[test]
    fn legendre_round_trip(idx in system_index(), seed in any::<u64>()) {
        let e = &entries()[idx];
        let x = e.sample_interior(&mut rng(seed)).unwrap();
        let sys = e.system.mechanics.as_ref().unwrap();
        let state = HybridState::from_phase(&x);
        let back = legendre(sys, &legendre(sys, &state).unwrap()).unwrap();
        for (a, b) in back.fiber.iter().zip(&state.fiber) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn impact_corner_conditions(idx in system_index(), seed in any::<u64>()) {
        let e = &entries()[idx];
        let mut r = rng(seed);
        let surface = (seed % e.system.surfaces.len() as u64) as usize;
        let x = e.sample_impact(surface, &mut r).unwrap();
        let n = e.dof();
        let imp = e.system.apply_impact(surface, &x).unwrap();
        let h0 = e.system.energy(&x).unwrap();
        let h1 = e.system.energy(imp.post.as_slice()).unwrap();
        prop_assert!((h1 - h0).abs() <= 1e-9 * h0.max(1.0));
        let s = &e.system.surfaces[surface];
        let dh = s.differential(&x[..n]);
        prop_assert!((dh.dot(&imp.velocity_post) + dh.dot(&imp.velocity_pre)).abs() <= 1e-9);
        prop_assert!(dh.dot(&imp.velocity_post) > 0.0);
        let sys = e.system.mechanics.as_ref().unwrap();
        let eta = sys.constraints.at(&x[..n]);
        if eta.nrows() > 0 {
            prop_assert!((&eta * &imp.velocity_post).norm() <= 1e-9);
        }
        let mut cols: Vec<DVector<f64>> = (0..eta.nrows()).map(|k| eta.row(k).transpose()).collect();
        cols.push(dh.clone());
        let basis = DMatrix::from_columns(&cols);
        let jump = DVector::from_fn(n, |i, _| imp.post[n + i] - x[n + i]);
        prop_assert!(linalg::span_residual(&basis, &jump) <= 1e-9);
    }

    #[test]
    fn bracket_is_antisymmetric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x: Vec<f64> = (0..4).map(|_| rand::Rng::random_range(&mut r, -2.0..2.0)).collect();
        let f = ClosurePhaseFunction::new(2, |q, p| q[0] * p[1] + (q[1] * p[0]).sin());
        let g = ClosurePhaseFunction::new(2, |q, p| q[0] * q[0] * p[0] + p[1] * p[1] * q[1]);
        let fg = poisson_bracket(&f, &g, &x);
        let gf = poisson_bracket(&g, &f, &x);
        prop_assert!((fg + gf).abs() <= 1e-6 * fg.abs().max(1.0));
        prop_assert!(poisson_bracket(&f, &f, &x).abs() <= 1e-6);
    }

    #[test]
    fn wedge_products_alternate(seed in any::<u64>()) {
        let mut r = rng(seed);
        let vs: Vec<DVector<f64>> = (0..4).map(|_| DVector::from_fn(4, |_, _| rand::Rng::random_range(&mut r, -1.0..1.0))).collect();
        let w = SampledKForm::symplectic(2);
        let ww = w.wedge(&w);
        let x = [0.0; 4];
        prop_assert!(w.check_alternating(&x, &vs[..2]).unwrap() <= 1e-10);
        prop_assert!(ww.check_alternating(&x, &vs).unwrap() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn energy_and_constraints_conserved_along_flow(idx in system_index(), seed in any::<u64>()) {
        let e = &entries()[idx];
        let x = e.sample_interior(&mut rng(seed)).unwrap();
        let cfg = IntegratorConfig::default();
        let traj = flow::hybrid_flow(&e.system, &x, 10.0, &cfg).unwrap();
        prop_assert_eq!(traj.termination, flow::Termination::Horizon);
        let h0 = e.system.energy(&x).unwrap();
        let n = e.dof();
        let sys = e.system.mechanics.as_ref().unwrap();
        for arc in &traj.arcs {
            for s in &arc.states {
                prop_assert!((e.system.energy(s).unwrap() - h0).abs() <= 1e-8);
                let eta = sys.constraints.at(&s[..n]);
                if eta.nrows() > 0 {
                    let v = e.system.configuration_velocity(s).unwrap();
                    prop_assert!((&eta * v).norm() <= 1e-8);
                }
            }
        }
        for ev in &traj.events {
            let s = &e.system.surfaces[ev.surface];
            prop_assert!(s.value(&ev.pre[..n]).abs() <= cfg.event_tol);
            let dh = s.differential(&ev.pre[..n]);
            prop_assert!(dh.dot(&DVector::from_column_slice(&ev.velocity_pre)) < 0.0);
            prop_assert!(dh.dot(&DVector::from_column_slice(&ev.velocity_post)) > 0.0);
        }
    }

    #[test]
    fn flow_is_deterministic(idx in system_index(), seed in any::<u64>()) {
        let e = &entries()[idx];
        let x = e.sample_interior(&mut rng(seed)).unwrap();
        let cfg = IntegratorConfig::default();
        let a = flow::hybrid_flow(&e.system, &x, 5.0, &cfg).unwrap();
        let b = flow::hybrid_flow(&e.system, &x, 5.0, &cfg).unwrap();
        prop_assert_eq!(a.events, b.events);
        prop_assert_eq!(a.final_state, b.final_state);
    }

    #[test]
    fn jacobians_agree_on_the_distribution(idx in 0..CONSTRAINED.len(), seed in any::<u64>()) {
        let e = entry(CONSTRAINED[idx]);
        let mut r = rng(seed);
        let surface = (seed % e.system.surfaces.len() as u64) as usize;
        let x = e.sample_impact(surface, &mut r).unwrap();
        let density = if e.name == "heisenberg-toy" { e.density("sqrt-1-plus-y2").unwrap().clone() } else { zoo::Density::canonical() };
        let closed = analysis::nonholonomic_jacobian_closed_form(&e.system, surface, &x).unwrap();
        let numeric = analysis::hybrid_jacobian(&e.system, &|y| density.value(y), surface, &x, &mut r).unwrap();
        prop_assert!((closed - 1.0).abs() <= 1e-10);
        prop_assert!((numeric - closed).abs() <= 1e-6);
    }

    #[test]
    fn top_degree_specular_is_zero(idx in system_index(), seed in any::<u64>()) {
        let e = &entries()[idx];
        let mut r = rng(seed);
        let x = e.sample_impact(0, &mut r).unwrap();
        let vol = SampledKForm::volume(e.system.dim(), |_| 1.0);
        prop_assert_eq!(analysis::specular_condition_residual(&vol, &e.system, &[(0, x)], &mut r).unwrap(), 0.0);
    }

    #[test]
    fn density_grids_normalize_and_repeat(seed in any::<u64>()) {
        let e = entry("point-billiard");
        let s = DensitySettings { iterations: 30, burn_in: 3, rows: 16, cols: 16, seed };
        let cfg = IntegratorConfig::default();
        let a = stats::member_density(e, seed, &s, &cfg).unwrap();
        let b = stats::member_density(e, seed, &s, &cfg).unwrap();
        prop_assert_eq!(&a.counts, &b.counts);
        prop_assert!((a.normalized().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn unconstrained_flow_is_symplectic() {
    // pendulum-like Hamiltonian without walls
    let h = ClosurePhaseFunction::new(2, |q, p| 0.5 * (p[0] * p[0] + p[1] * p[1]) - q[0].cos() + 0.1 * q[0] * q[1] * q[1]);
    let energy: Arc<dyn PhaseFunction> = Arc::new(h.clone());
    let field = Arc::new(hybridmech_core::dynamics::HamiltonianField { hamiltonian: h });
    let sys = hybridmech_core::system::HybridSystem::custom("free", field, vec![], Arc::new(|_, x: &[f64]| DVector::from_column_slice(x)), Some(energy));
    let x = [0.3, -0.4, 0.5, 0.2];
    let jac = analysis::flow_jacobian(&sys, &x, 2.0, &IntegratorConfig::default()).unwrap();
    assert!(linalg::symplectic_defect(&jac) <= 1e-5);
}

#[test]
fn energy_audit_over_a_thousand_impacts() {
    for name in ["point-billiard", "vertical-disk"] {
        let e = entry(name);
        let x = e.sample_interior(&mut rng(11)).unwrap();
        let cfg = IntegratorConfig { record_arcs: false, ..IntegratorConfig::default() };
        let mut state = x.clone();
        let mut count = 0;
        while count < 1000 {
            let traj = flow::hybrid_flow(&e.system, &state, 400.0, &cfg).unwrap();
            count += traj.events.len();
            state = traj.final_state;
        }
        let drift = (e.system.energy(&state).unwrap() - e.system.energy(&x).unwrap()).abs();
        assert!(drift <= 1e-7, "{name}: drift {drift} after {count} impacts");
    }
}
