//! Experiment configuration files.
//!
//! ```toml
//! seed = 7
//!
//! [oscillator]
//! omega = 1.0
//! gamma = 1e-6
//! n_th = 1e4
//!
//! [drive]
//! b = 0.05
//! ```
//!
//! Every section except `[oscillator]` and `[drive]` is optional. Unknown keys
//! are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use phasecool::engine::{Integrator, Noise, SimConfig};
use phasecool::feedback::{FeedbackMode, FeedbackSettings, IntervalPolicy};
use phasecool::multimode::{DegeneratePolicy, ForceModel, ModeSet, MultimodeFeedback};
use phasecool::{Drive, OscillatorParams};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub oscillator: OscillatorSection,
    pub drive: DriveSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<FeedbackSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<ModesSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantum: Option<QuantumSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorSection {
    #[serde(default = "one")]
    pub omega: f64,
    pub gamma: f64,
    pub n_th: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub b: f64,
    /// Fixed modulation phase. Absent: the optimal phase of the initial state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorName {
    TransferMatrix,
    #[default]
    RotationSplitting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default)]
    pub integrator: IntegratorName,
    /// Thermal noise at the oscillator's `n_th`.
    #[serde(default)]
    pub noise: bool,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            t_end: default_t_end(),
            integrator: IntegratorName::default(),
            noise: false,
            sample_stride: default_stride(),
        }
    }
}

/// Initial state: explicit `(q0, p0)`, or a thermal draw of mean occupancy `n0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    SingleShot,
    #[default]
    Adaptive,
    Delayed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    Fixed,
    #[default]
    InitialTurning,
    PerSegment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackSection {
    #[serde(default)]
    pub mode: ModeName,
    #[serde(default)]
    pub policy: PolicyName,
    /// Interval for `policy = "fixed"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_tau: Option<f64>,
    /// Fraction of τ for the turning-time policies.
    #[serde(default = "half")]
    pub fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_updates: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub count: usize,
    /// Mean initial occupancy; defaults to the bath `n_th`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<f64>,
    #[serde(default = "default_late")]
    pub late_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ForceName {
    #[default]
    Shared,
    Private,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateName {
    #[default]
    Unmodulated,
    SummedQuadratures,
}

/// Modes share `[oscillator].gamma`, `[oscillator].n_th` and `[drive].b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesSection {
    pub frequencies: Vec<f64>,
    pub delta_tau: f64,
    #[serde(default)]
    pub force: ForceName,
    #[serde(default)]
    pub degenerate: DegenerateName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    /// Mean initial occupancy per mode; defaults to `n_th`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<f64>,
    #[serde(default = "one_usize")]
    pub count: usize,
    #[serde(default = "default_late")]
    pub late_fraction: f64,
    /// Also run every mode on its own.
    #[serde(default)]
    pub baselines: bool,
}

/// Grid for the closed-form vs quadrature comparison. Γ = ratio·γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumSection {
    pub ratios: Vec<f64>,
    pub phases: Vec<f64>,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn half() -> f64 {
    0.5
}
fn default_dt() -> f64 {
    phasecool::engine::DEFAULT_DT
}
fn default_t_end() -> f64 {
    100.0
}
fn default_stride() -> usize {
    100
}
fn default_late() -> f64 {
    0.2
}

fn invalid(e: phasecool::Error) -> CliError {
    CliError::Validation(e.to_string())
}

fn check(ok: bool, msg: impl Into<String>) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Validation(msg.into()))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_column(text, s.start))
                .unwrap_or((0, 0));
            CliError::Parse {
                path: origin.to_path_buf(),
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let params = self.params()?;
        let drive = self.drive()?;
        self.sim_config()?;
        if let Some(n0) = self.initial.n0 {
            check(n0.is_finite() && n0 >= 0.0, format!("initial.n0 = {n0}: n0 must be finite and >= 0"))?;
        }
        let explicit = self.initial.q0.is_some() || self.initial.p0.is_some();
        check(
            !(explicit && self.initial.n0.is_some()),
            "initial: give either q0/p0 or n0, not both",
        )?;
        if let (Some(q), Some(p)) = (self.initial.q0, self.initial.p0) {
            check(q.is_finite() && p.is_finite(), "initial: q0 and p0 must be finite")?;
        }
        if self.feedback.is_some() {
            self.feedback_settings()?;
            check(
                drive.gamma_mod > 0.0,
                format!("drive.b = {}: feedback needs b > 0", drive.b),
            )?;
        }
        if let Some(e) = &self.ensemble {
            check(e.count >= 1, "ensemble.count >= 1 required")?;
            if let Some(n0) = e.n0 {
                check(n0.is_finite() && n0 >= 0.0, format!("ensemble.n0 = {n0}: n0 must be finite and >= 0"))?;
            }
            check(
                e.late_fraction > 0.0 && e.late_fraction <= 1.0,
                "ensemble.late_fraction must lie in (0, 1]",
            )?;
        }
        if let Some(m) = &self.modes {
            self.mode_set()?;
            check(m.count >= 1, "modes.count >= 1 required")?;
            check(
                m.late_fraction > 0.0 && m.late_fraction <= 1.0,
                "modes.late_fraction must lie in (0, 1]",
            )?;
            if let Some(n0) = m.n0 {
                check(n0.is_finite() && n0 >= 0.0, format!("modes.n0 = {n0}: n0 must be finite and >= 0"))?;
            }
            if let Some(r) = m.resolution {
                check(r > 0.0, format!("modes.resolution = {r}: resolution must be > 0"))?;
            }
            check(
                m.delta_tau >= phasecool::feedback::MIN_INTERVAL_STEPS * self.sim.dt,
                format!("modes.delta_tau = {}: delta_tau >= 10·dt required", m.delta_tau),
            )?;
        }
        if let Some(q) = &self.quantum {
            check(!q.ratios.is_empty() && !q.phases.is_empty(), "quantum: ratios and phases must be non-empty")?;
            check(params.gamma > 0.0, "quantum: oscillator.gamma > 0 required")?;
            for &r in &q.ratios {
                check(r.is_finite() && r >= 0.0, format!("quantum.ratios: {r} must be finite and >= 0"))?;
            }
            for &p in &q.phases {
                check(p.is_finite(), format!("quantum.phases: {p} must be finite"))?;
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<OscillatorParams, CliError> {
        let o = &self.oscillator;
        OscillatorParams::new(o.omega, o.gamma, o.n_th).map_err(invalid)
    }

    /// Drive at the configured phase, or phase 0 when none is given.
    pub fn drive(&self) -> Result<Drive, CliError> {
        Drive::new(self.drive.b, self.drive.phi.unwrap_or(0.0), self.oscillator.omega).map_err(invalid)
    }

    pub fn sim_config(&self) -> Result<SimConfig, CliError> {
        let params = self.params()?;
        let cfg = SimConfig::new(self.sim.dt, self.sim.t_end).map_err(invalid)?;
        let integrator = match self.sim.integrator {
            IntegratorName::TransferMatrix => Integrator::TransferMatrix,
            IntegratorName::RotationSplitting => Integrator::RotationSplitting,
        };
        let noise = if self.sim.noise { Noise::thermal(&params) } else { Noise::Off };
        let cfg = cfg
            .with_integrator(integrator)
            .with_noise(noise)
            .with_stride(self.sim.sample_stride)
            .with_seed(self.seed);
        cfg.validate().map_err(invalid)?;
        Ok(cfg)
    }

    pub fn feedback_settings(&self) -> Result<FeedbackSettings, CliError> {
        let Some(f) = &self.feedback else {
            return Ok(FeedbackSettings::single_shot());
        };
        let policy = match f.policy {
            PolicyName::Fixed => {
                let d = f.delta_tau.ok_or_else(|| {
                    CliError::Validation("feedback.delta_tau is required for policy = \"fixed\"".into())
                })?;
                check(
                    d >= phasecool::feedback::MIN_INTERVAL_STEPS * self.sim.dt,
                    format!("feedback.delta_tau = {d}: delta_tau >= 10·dt required"),
                )?;
                IntervalPolicy::Fixed(d)
            }
            PolicyName::InitialTurning => IntervalPolicy::InitialTurning { fraction: f.fraction },
            PolicyName::PerSegment => IntervalPolicy::PerSegment { fraction: f.fraction },
        };
        check(
            f.fraction > 0.0 && f.fraction.is_finite(),
            format!("feedback.fraction = {}: fraction must be > 0", f.fraction),
        )?;
        let mode = match f.mode {
            ModeName::SingleShot => FeedbackMode::SingleShot,
            ModeName::Adaptive => FeedbackMode::Adaptive,
            ModeName::Delayed => FeedbackMode::Delayed,
        };
        if mode == FeedbackMode::SingleShot {
            return Ok(FeedbackSettings::single_shot());
        }
        Ok(FeedbackSettings {
            policy,
            max_updates: f.max_updates,
            mode,
        })
    }

    pub fn mode_set(&self) -> Result<ModeSet, CliError> {
        let m = self
            .modes
            .as_ref()
            .ok_or_else(|| CliError::Validation("a [modes] section is required".into()))?;
        check(!m.frequencies.is_empty(), "modes.frequencies must list at least one mode")?;
        ModeSet::uniform(&m.frequencies, self.oscillator.gamma, self.oscillator.n_th, self.drive.b).map_err(invalid)
    }

    pub fn multimode_feedback(&self) -> Result<MultimodeFeedback, CliError> {
        let m = self
            .modes
            .as_ref()
            .ok_or_else(|| CliError::Validation("a [modes] section is required".into()))?;
        Ok(MultimodeFeedback {
            delta_tau: m.delta_tau,
            force: match m.force {
                ForceName::Shared => ForceModel::Shared,
                ForceName::Private => ForceModel::Private,
            },
            degenerate: match m.degenerate {
                DegenerateName::Unmodulated => DegeneratePolicy::Unmodulated,
                DegenerateName::SummedQuadratures => DegeneratePolicy::SummedQuadratures,
            },
            resolution: m.resolution,
        })
    }

    /// Flattened `section.key = value` pairs, values in TOML syntax.
    pub fn manifest(&self) -> Vec<(String, String)> {
        let value = toml::Value::try_from(self).expect("config serializes");
        let mut out = Vec::new();
        flatten("", &value, &mut out);
        out
    }

    /// Inverse of [`ExperimentConfig::manifest`].
    pub fn from_manifest<'a, I>(pairs: I) -> Result<Self, CliError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut root = toml::Table::new();
        for (key, raw) in pairs {
            let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .map_err(|e| CliError::Validation(format!("manifest value for `{key}`: {}", e.message())))?
                .remove("v")
                .expect("parsed key");
            let mut table = &mut root;
            let mut parts = key.split('.').peekable();
            while let Some(part) = parts.next() {
                if parts.peek().is_none() {
                    table.insert(part.to_string(), value.clone());
                } else {
                    table = table
                        .entry(part.to_string())
                        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                        .as_table_mut()
                        .ok_or_else(|| CliError::Validation(format!("manifest key `{key}` clashes with a value")))?;
                }
            }
        }
        let cfg: Self = toml::Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Validation(format!("manifest: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<(String, String)>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        v => out.push((prefix.to_string(), v.to_string())),
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentConfig::parse(&text, path)
}

/// Manifest pairs as a map, for lookups in tests and tools.
pub fn manifest_map(cfg: &ExperimentConfig) -> BTreeMap<String, String> {
    cfg.manifest().into_iter().collect()
}
