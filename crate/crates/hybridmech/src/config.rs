//! Run configuration, read from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hybridmech_core::flow::IntegratorConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub name: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Flow horizon for `simulate` and `zeno`.
    pub horizon: f64,
    pub seed: u64,
    /// Phase state (q then p); sampled from the seed when absent.
    pub initial: Option<Vec<f64>>,
    /// Time-1 iterates per trajectory for `density`.
    pub iterations: usize,
    pub burn_in: usize,
    pub rows: usize,
    pub cols: usize,
    pub trajectories: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { horizon: 10.0, seed: 0, initial: None, iterations: 10_000, burn_in: 1_000, rows: 100, cols: 100, trajectories: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormChoice {
    /// The density times the coordinate volume.
    Volume,
    Symplectic,
    /// dH.
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Lie,
    Energy,
    Specular,
    Jacobian,
    ClosedForm,
    Divergence,
    Cohomology,
}

impl CheckKind {
    pub const ALL: [CheckKind; 7] = [
        CheckKind::Lie,
        CheckKind::Energy,
        CheckKind::Specular,
        CheckKind::Jacobian,
        CheckKind::ClosedForm,
        CheckKind::Divergence,
        CheckKind::Cohomology,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub tolerance: f64,
    /// Interior states for continuous checks.
    pub samples: usize,
    /// Impact states for impact checks, spread over the surfaces.
    pub impact_samples: usize,
    /// Name of one of the system's densities.
    pub density: String,
    pub form: FormChoice,
    pub checks: Vec<CheckKind>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            tolerance: 1e-5,
            samples: 100,
            impact_samples: 100,
            density: "canonical".into(),
            form: FormChoice::Volume,
            checks: CheckKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Command-line overrides applied after parsing.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tolerance: Option<f64>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            match e.span() {
                Some(span) => CliError::Config(format!("line {}: {msg}", line_of(text, span.start))),
                None => CliError::Config(msg),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> CliResult<()> {
        if let Some(s) = o.seed {
            self.run.seed = s;
        }
        if let Some(d) = &o.out {
            self.output.dir = d.clone();
        }
        if let Some(t) = o.tolerance {
            self.analysis.tolerance = t;
        }
        self.validate()
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        self.integrator.validate().map_err(|e| CliError::Config(format!("[integrator] {e}")))?;
        if !(self.run.horizon > 0.0 && self.run.horizon.is_finite()) {
            return bad("[run] horizon must be positive");
        }
        if self.run.burn_in > self.run.iterations {
            return bad("[run] burn_in exceeds iterations");
        }
        if self.run.rows == 0 || self.run.cols == 0 || self.run.trajectories == 0 {
            return bad("[run] rows, cols and trajectories must be positive");
        }
        if self.analysis.tolerance.is_nan() || self.analysis.tolerance <= 0.0 {
            return bad("[analysis] tolerance must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = RunConfig::parse("[system]\nname = \"interval-bouncer\"\n").unwrap();
        assert_eq!(cfg.run, RunSection::default());
        assert_eq!(cfg.integrator, IntegratorConfig::default());
        assert_eq!(cfg.analysis.checks.len(), 7);
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let text = "[system]\nname = \"planar-box\"\n\n[run]\nhorizon = 2.0\nhorizn = 3.0\n";
        match RunConfig::parse(text) {
            Err(CliError::Config(m)) => assert!(m.starts_with("line 6"), "{m}"),
            other => panic!("{other:?}"),
        }
        let text = "[system]\nname = \"planar-box\"\n[integrator]\nrtol = -1.0\n";
        assert!(matches!(RunConfig::parse(text), Err(CliError::Config(_))));
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = RunConfig::parse("[system]\nname = \"planar-box\"\n[run]\nseed = 4\n").unwrap();
        cfg.apply(&Overrides { seed: Some(9), out: Some("x".into()), tolerance: Some(1e-3) }).unwrap();
        assert_eq!(cfg.run.seed, 9);
        assert_eq!(cfg.output.dir, PathBuf::from("x"));
        assert_eq!(cfg.analysis.tolerance, 1e-3);
        assert!(cfg.apply(&Overrides { tolerance: Some(-1.0), ..Overrides::default() }).is_err());
    }
}
