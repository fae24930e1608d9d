use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use nalgebra::DVector;

use super::{HybridTrajectory, IntegratorConfig, Termination};
use crate::system::HybridSystem;

/// Trailing gap ratios must stay below 1 − this to count as shrinking.
pub const RATIO_TOL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ZenoClass {
    None,
    SuspectedSteady,
    SuspectedSpasmodic,
}

impl ZenoClass {
    pub fn label(&self) -> &'static str {
        match self {
            ZenoClass::None => "none",
            ZenoClass::SuspectedSteady => "suspected-steady",
            ZenoClass::SuspectedSpasmodic => "suspected-spasmodic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ZenoReport {
    pub impact_times: Vec<f64>,
    pub gaps: Vec<f64>,
    /// Geometric-mean ratio of the trailing gaps.
    pub ratio: Option<f64>,
    pub t_infinity: Option<f64>,
    pub classification: ZenoClass,
    /// Largest phase-space norm seen along the trajectory.
    pub max_state_norm: f64,
    pub escape_time: Option<f64>,
    /// Smallest |dh(q̇)|/‖dh‖ over the trailing impacts: a distance proxy to
    /// the tangency set {h = 0, dh(q̇) = 0}.
    pub tangency_distance: Option<f64>,
    pub termination: Termination,
}

/// Fits a geometric law to the trailing inter-impact gaps.
pub fn detect_zeno(traj: &HybridTrajectory, sys: &HybridSystem, config: &IntegratorConfig) -> ZenoReport {
    let impact_times: Vec<f64> = traj.events.iter().map(|e| e.time).collect();
    let gaps: Vec<f64> = traj.events.iter().skip(1).map(|e| e.dwell).collect();
    let mut report = ZenoReport {
        impact_times,
        gaps: gaps.clone(),
        ratio: None,
        t_infinity: None,
        classification: ZenoClass::None,
        max_state_norm: traj.max_norm,
        escape_time: traj.escape_time,
        tangency_distance: None,
        termination: traj.termination.clone(),
    };
    if traj.events.len() < 3 {
        return report;
    }
    let window = config.zeno_window.min(gaps.len());
    let tail = &gaps[gaps.len() - window..];
    let (first, last) = (tail[0], tail[window - 1]);
    if !(first > 0.0 && last > 0.0) {
        return report;
    }
    let ratio = (last / first).powf(1.0 / (window - 1) as f64);
    report.ratio = Some(ratio);

    let n = sys.dof();
    let tangency = traj.events[traj.events.len() - window..]
        .iter()
        .filter_map(|e| {
            let dh = sys.surfaces.get(e.surface)?.differential(&e.pre[..n]);
            let v = DVector::from_column_slice(&e.velocity_pre);
            (dh.len() == v.len() && dh.norm() > 0.0).then(|| dh.dot(&v).abs() / dh.norm())
        })
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))));
    report.tangency_distance = tangency;

    let shrinking = tail.windows(2).all(|w| w[1] < (1.0 - RATIO_TOL) * w[0]);
    if !shrinking {
        return report;
    }
    let t_last = *report.impact_times.last().expect("at least three impacts");
    report.t_infinity = Some(t_last + last * ratio / (1.0 - ratio));
    let window_norm = traj.events[traj.events.len() - window..]
        .iter()
        .map(|e| DVector::from_column_slice(&e.post).norm())
        .fold(0.0, f64::max);
    report.classification = if window_norm.max(traj.max_norm) > config.escape_threshold {
        ZenoClass::SuspectedSpasmodic
    } else {
        ZenoClass::SuspectedSteady
    };
    report
}
