//! Acceptance suite. Each criterion runs once, sequentially, under its own
//! time budget and prints a PASS/FAIL line; the test fails if any does.
//!
//! Run with `cargo test -p hybridmech --test acceptance -- --nocapture`.

use std::collections::BTreeMap;
use std::fs;
use std::time::{Duration, Instant};

use hybridmech::{commands, RunConfig};
use hybridmech_core::analysis::{self, SampledKForm};
use hybridmech_core::flow::{self, IntegratorConfig, ZenoClass};
use hybridmech_core::linalg;
use hybridmech_core::zoo::{self, ZooEntry};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn build(name: &str) -> ZooEntry {
    zoo::build(name, &BTreeMap::new()).unwrap()
}

fn with_table(name: &str, a: f64, b: f64) -> ZooEntry {
    let params = BTreeMap::from([("table_a".to_string(), a), ("table_b".to_string(), b)]);
    zoo::build(name, &params).unwrap()
}

/// Impact states on alternating surfaces.
fn impact_states(e: &ZooEntry, count: usize, seed: u64) -> Vec<(usize, Vec<f64>)> {
    let mut r = rng(seed);
    let surfaces = e.system.surfaces.len();
    (0..count).map(|k| (k % surfaces, e.sample_impact(k % surfaces, &mut r).unwrap())).collect()
}

fn interior_states(e: &ZooEntry, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..count).map(|_| e.sample_interior(&mut r).unwrap()).collect()
}

/// A horizon placing exactly one impact well inside (0, T), or None.
fn one_impact_horizon(e: &ZooEntry, x: &[f64]) -> Option<f64> {
    let cfg = IntegratorConfig { record_arcs: false, ..IntegratorConfig::default() };
    let traj = flow::hybrid_flow(&e.system, x, 20.0, &cfg).ok()?;
    let t1 = traj.events.first()?.time;
    let t2 = traj.events.get(1).map_or(20.0, |ev| ev.time);
    (t1 > 0.05 && t2 - t1 > 0.05).then(|| t1 + 0.5 * (t2 - t1).min(1.0))
}

fn c1_zeno_time() -> Verdict {
    let e = zoo::make_interval_bouncer(2.0).unwrap();
    let traj = flow::hybrid_flow(&e.system, &[0.0, 1.0], 3.0, &IntegratorConfig::default()).unwrap();
    let Some(ev) = traj.events.get(39) else {
        return verdict(false, format!("only {} impacts", traj.events.len()));
    };
    let err = (ev.time - 2.0).abs();
    verdict(err <= 1e-6, format!("t_40 = {:.12}, |t_40 - 2| = {err:.3e}", ev.time))
}

fn c2_box_jacobian() -> Verdict {
    let mut worst: f64 = 0.0;
    for (alpha, beta) in [(2.0, 1.0), (2.0, 0.25), (1.0, 1.0)] {
        let e = zoo::make_planar_box(alpha, beta).unwrap();
        let mut r = rng(3);
        for surface in 0..2 {
            for _ in 0..10 {
                let x = e.sample_impact(surface, &mut r).unwrap();
                let j = analysis::hybrid_jacobian(&e.system, &|_| 1.0, surface, &x, &mut r).unwrap();
                worst = worst.max((j - alpha * alpha * beta).abs());
            }
        }
    }
    verdict(worst <= 1e-8, format!("max |J - alpha^2 beta| = {worst:.3e}"))
}

fn c3_nonholonomic_jacobian() -> Verdict {
    let mut closed_err: f64 = 0.0;
    let mut numeric_err: f64 = 0.0;
    for name in ["chaplygin-sleigh", "vertical-disk", "rolling-ball", "heisenberg-toy"] {
        let e = build(name);
        let density = if name == "heisenberg-toy" { e.density("sqrt-1-plus-y2").unwrap().clone() } else { zoo::Density::canonical() };
        let mut r = rng(5);
        for (surface, x) in impact_states(&e, 1000, 17) {
            let closed = analysis::nonholonomic_jacobian_closed_form(&e.system, surface, &x).unwrap();
            let numeric = analysis::hybrid_jacobian(&e.system, &|y| density.value(y), surface, &x, &mut r).unwrap();
            closed_err = closed_err.max((closed - 1.0).abs());
            numeric_err = numeric_err.max((numeric - closed).abs());
        }
    }
    verdict(
        closed_err <= 1e-10 && numeric_err <= 1e-6,
        format!("max |J_closed - 1| = {closed_err:.3e}, max |J_numeric - J_closed| = {numeric_err:.3e}"),
    )
}

/// Solves the corner conditions directly: the momentum jump ε dh + λ·η,
/// the constraints after impact and conservation of kinetic energy.
/// The multipliers are linear in ε on the constraint equations, leaving one
/// scalar energy equation whose nonzero root is bracketed and bisected.
fn corner_root(e: &ZooEntry, surface: usize, x: &[f64]) -> (f64, Vec<f64>) {
    let n = e.dof();
    let sys = e.system.mechanics.as_ref().unwrap();
    let q = &x[..n];
    let g = sys.metric.at(q);
    let g_inv = g.clone().try_inverse().unwrap();
    let eta = sys.constraints.at(q);
    let k = eta.nrows();
    let dh = e.system.surfaces[surface].differential(q);
    let v = &g_inv * DVector::from_column_slice(&x[n..]);
    let lambda_for = |eps: f64| -> DVector<f64> {
        if k == 0 {
            return DVector::zeros(0);
        }
        // η g⁻¹ ηᵀ λ = −η v − ε η g⁻¹ dh
        let a = &eta * &g_inv * eta.transpose();
        let rhs = -(&eta * &v) - (&eta * &g_inv * &dh) * eps;
        a.lu().solve(&rhs).unwrap()
    };
    let post = |eps: f64| -> DVector<f64> {
        let jump = &dh * eps + eta.transpose() * lambda_for(eps);
        &v + &g_inv * jump
    };
    let kinetic = |w: &DVector<f64>| 0.5 * w.dot(&(&g * w));
    let pre_energy = kinetic(&post(0.0));
    let residual = |eps: f64| kinetic(&post(eps)) - pre_energy;
    let mut hi = 1.0;
    while residual(hi) <= 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eps = 0.5 * (lo + hi);
    (eps, lambda_for(eps).iter().copied().collect())
}

fn c4_corner_conditions() -> Verdict {
    let mut energy: f64 = 0.0;
    let mut constraint: f64 = 0.0;
    let mut flip: f64 = 0.0;
    let mut span: f64 = 0.0;
    let mut oracle: f64 = 0.0;
    for name in ["point-billiard", "chaplygin-sleigh", "vertical-disk", "rolling-ball", "heisenberg-toy"] {
        let e = build(name);
        let n = e.dof();
        let sys = e.system.mechanics.as_ref().unwrap();
        for (idx, (surface, x)) in impact_states(&e, 1000, 29).into_iter().enumerate() {
            let imp = e.system.apply_impact(surface, &x).unwrap();
            let h0 = e.system.energy(&x).unwrap();
            let h1 = e.system.energy(imp.post.as_slice()).unwrap();
            energy = energy.max((h1 - h0).abs());
            let q = &x[..n];
            let eta = sys.constraints.at(q);
            if eta.nrows() > 0 {
                constraint = constraint.max((&eta * &imp.velocity_post).amax());
            }
            let dh = e.system.surfaces[surface].differential(q);
            flip = flip.max((dh.dot(&imp.velocity_post) + dh.dot(&imp.velocity_pre)).abs());
            let mut cols: Vec<DVector<f64>> = (0..eta.nrows()).map(|r| eta.row(r).transpose()).collect();
            cols.push(dh.clone());
            let jump = DVector::from_fn(n, |i, _| imp.post[n + i] - x[n + i]);
            span = span.max(linalg::span_residual(&DMatrix::from_columns(&cols), &jump));
            if idx < 100 {
                let (eps, lambda) = corner_root(&e, surface, &x);
                let eps_impl = imp.epsilon.unwrap();
                oracle = oracle.max((eps - eps_impl).abs() / eps_impl.abs().max(1.0));
                for (a, b) in lambda.iter().zip(&imp.lambda) {
                    oracle = oracle.max((a - b).abs() / b.abs().max(1.0));
                }
            }
        }
    }
    let pass = energy <= 1e-9 && constraint <= 1e-9 && flip <= 1e-9 && span <= 1e-9 && oracle <= 1e-9;
    verdict(
        pass,
        format!("|dH| {energy:.2e}, |eta(v+)| {constraint:.2e}, |dh(v+)+dh(v-)| {flip:.2e}, span {span:.2e}, oracle {oracle:.2e}"),
    )
}

fn c5_billiard_volume() -> Verdict {
    let e = build("point-billiard");
    let mut r = rng(41);
    let cfg = IntegratorConfig::default();
    let mut det_err: f64 = 0.0;
    let mut defect: f64 = 0.0;
    let mut tested = 0;
    while tested < 5 {
        let x = e.sample_interior(&mut r).unwrap();
        let Some(horizon) = one_impact_horizon(&e, &x) else { continue };
        let jac = analysis::flow_jacobian(&e.system, &x, horizon, &cfg).unwrap();
        det_err = det_err.max((jac.determinant() - 1.0).abs());
        defect = defect.max(linalg::symplectic_defect(&jac));
        tested += 1;
    }
    verdict(det_err <= 1e-4 && defect <= 1e-4, format!("max |det - 1| = {det_err:.3e}, max symplectic defect = {defect:.3e}"))
}

fn c6_configuration_density() -> Verdict {
    let cfg = IntegratorConfig::default();
    let mut flow_res: f64 = 0.0;
    let mut jump_res: f64 = 0.0;
    let mut volume: f64 = 0.0;
    for name in ["vertical-disk", "rolling-ball"] {
        for (a, b) in [(1.5, 1.5), (2.0, 1.0)] {
            let e = with_table(name, a, b);
            let points = interior_states(&e, 200, 53);
            let impacts = impact_states(&e, 200, 59);
            let (c, j) = analysis::cohomology_residual(&e.system, &|_| 0.0, &|_| 1.0, &points, &impacts, &mut rng(61)).unwrap();
            flow_res = flow_res.max(c);
            jump_res = jump_res.max(j);
            let mut r = rng(67);
            let mut tested = 0;
            while tested < 3 {
                let x = e.sample_interior(&mut r).unwrap();
                let Some(horizon) = one_impact_horizon(&e, &x) else { continue };
                let dev = analysis::flow_volume_check(&e.system, &|_| 1.0, &x, horizon, &cfg).unwrap();
                volume = volume.max(dev.abs());
                tested += 1;
            }
        }
    }
    verdict(
        flow_res <= 1e-5 && jump_res <= 1e-5 && volume <= 1e-3,
        format!("flow residual {flow_res:.3e}, impact residual {jump_res:.3e}, volume dev {volume:.3e}"),
    )
}

fn c7_sleigh() -> Verdict {
    let e = build("chaplygin-sleigh");
    let points = interior_states(&e, 100, 71);
    let inv3 = e.density("p-theta-inv3").unwrap().clone();
    let div = analysis::divergence(e.system.field.as_ref(), &|x| inv3.value(x), &points).unwrap();
    let continuous = div.iter().fold(0.0_f64, |m, d| m.max(d.abs()));

    let mut jump: f64 = 0.0;
    for (surface, x) in impact_states(&e, 200, 73) {
        if let Ok(j) = zoo::sleigh_density_jump(&e, &x, surface) {
            jump = jump.max(j);
        }
    }

    let configuration: [fn(&[f64]) -> f64; 2] = [|_| 1.0, |x| (0.3 * x[0] - 0.2 * x[1] + 0.5 * x[2].sin()).exp()];
    let mut config_median = f64::INFINITY;
    for f in configuration {
        let mut d: Vec<f64> = analysis::divergence(e.system.field.as_ref(), &f, &points).unwrap().iter().map(|v| v.abs()).collect();
        d.sort_by(f64::total_cmp);
        config_median = config_median.min(d[d.len() / 2]);
    }
    verdict(
        continuous <= 1e-5 && jump >= 0.01 && config_median >= 1e-3,
        format!(
            "p_theta^-3 divergence {continuous:.3e}, largest impact jump {jump:.3e}, configuration-only median divergence {config_median:.3e}"
        ),
    )
}

fn c8_zeno_classification() -> Verdict {
    let cfg = IntegratorConfig { record_arcs: false, ..IntegratorConfig::default() };
    let classify = |e: &ZooEntry, x: &[f64], horizon: f64| {
        let traj = flow::hybrid_flow(&e.system, x, horizon, &cfg).unwrap();
        flow::detect_zeno(&traj, &e.system, &cfg)
    };
    let damped = classify(&zoo::make_interval_bouncer(0.5).unwrap(), &[0.0, 1.0], 20.0);
    let super_elastic = classify(&zoo::make_interval_bouncer(2.0).unwrap(), &[0.0, 1.0], 3.0);
    let planar = classify(&zoo::make_planar_box(2.0, 0.25).unwrap(), &[0.5, 0.0, 1.0, 1.0], 3.0);
    let tan = flow::hybrid_flow(&zoo::make_tan_escape().system, &[0.0, 0.0, 0.0, 0.5], 2.0, &cfg).unwrap();
    let t_inf_err = super_elastic.t_infinity.map_or(f64::INFINITY, |t| (t - 2.0).abs());
    let escape = tan.escape_time.is_some_and(|t| t < std::f64::consts::FRAC_PI_2);
    let pass = damped.classification == ZenoClass::None
        && super_elastic.classification == ZenoClass::SuspectedSteady
        && t_inf_err <= 1e-4
        && planar.classification == ZenoClass::SuspectedSpasmodic
        && escape;
    verdict(
        pass,
        format!(
            "alpha=0.5: {}; alpha=2: {} (|t_inf - 2| = {t_inf_err:.3e}); box (2, 1/4): {}; tan escape at {:?}",
            damped.classification.label(),
            super_elastic.classification.label(),
            planar.classification.label(),
            tan.escape_time
        ),
    )
}

fn c9_density_pipeline() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "[system]\nname = \"chaplygin-sleigh\"\n[run]\nseed = 2024\niterations = 10000\nburn_in = 0\nrows = 100\ncols = 100\n[output]\ndir = {:?}\n",
        tmp.path().to_str().unwrap()
    );
    let cfg = RunConfig::parse(&text).unwrap();
    let read = |name: &str| fs::read(tmp.path().join(name)).unwrap();
    let (_, grid) = commands::density(&cfg).unwrap();
    let first = (read("density.csv"), read("density.json"));
    let (_, again) = commands::density(&cfg).unwrap();
    let identical = first == (read("density.csv"), read("density.json")) && grid == again;
    let sum: f64 = grid.normalized().iter().sum();
    let occupied = grid.occupied();
    verdict(
        (sum - 1.0).abs() <= 1e-12 && identical && occupied > 50 && grid.flags.is_empty(),
        format!("sum - 1 = {:.1e}, identical files: {identical}, occupied cells {occupied}, flags {:?}", sum - 1.0, grid.flags),
    )
}

fn c10_form_algebra() -> Verdict {
    let e = build("point-billiard");
    let points = interior_states(&e, 100, 83);
    let impacts = impact_states(&e, 100, 89);
    let omega = SampledKForm::symplectic(2);
    let contracted = omega.interior(e.system.field.clone());
    let forms = [omega.clone(), contracted.clone(), omega.wedge(&omega)];
    let mut worst: f64 = 0.0;
    let mut r = rng(97);
    for form in &forms {
        let rep = analysis::check_invariance(form, &e.system, &points, &impacts, 1e-5, &mut r).unwrap();
        worst = worst.max(rep.lie_derivative).max(rep.energy_condition).max(rep.specular_condition);
    }
    // i_X ω against dH for H = |p|²/2
    let dh = SampledKForm::exact("dH", 4, |x| 0.5 * (x[2] * x[2] + x[3] * x[3]));
    let mut identity: f64 = 0.0;
    for x in &points {
        for k in 0..4 {
            let v = DVector::from_fn(4, |i, _| if i == k { 1.0 } else { 0.0 });
            let a = contracted.eval(x, std::slice::from_ref(&v)).unwrap();
            let b = dh.eval(x, std::slice::from_ref(&v)).unwrap();
            identity = identity.max((a - b).abs());
        }
    }
    verdict(worst <= 1e-5 && identity <= 1e-5, format!("max residual {worst:.3e}, |i_X omega - dH| = {identity:.3e}"))
}

type Criterion = (u32, &'static str, Duration, fn() -> Verdict);

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 10] = [
        (1, "Zeno time of the super-elastic bouncer", Duration::from_secs(1), c1_zeno_time),
        (2, "hybrid Jacobian of the planar box", Duration::from_secs(1), c2_box_jacobian),
        (3, "nonholonomic impacts are volume neutral", Duration::from_secs(30), c3_nonholonomic_jacobian),
        (4, "corner conditions and multiplier oracle", Duration::from_secs(60), c4_corner_conditions),
        (5, "billiard flow is symplectic across an impact", Duration::from_secs(10), c5_billiard_volume),
        (6, "configuration-only density for disk and ball", Duration::from_secs(60), c6_configuration_density),
        (7, "sleigh density fails at impacts", Duration::from_secs(30), c7_sleigh),
        (8, "Zeno classification", Duration::from_secs(10), c8_zeno_classification),
        (9, "sleigh density pipeline", Duration::from_secs(600), c9_density_pipeline),
        (10, "invariant form algebra on the billiard", Duration::from_secs(30), c10_form_algebra),
    ];
    let mut failed = Vec::new();
    for (id, title, budget, run) in criteria {
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let pass = v.pass && elapsed <= budget;
        println!(
            "criterion {id:>2} {}: {title}: {} [{:.2}s of {}s]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        if !pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
