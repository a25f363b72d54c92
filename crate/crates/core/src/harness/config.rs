use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    IampGoe,
    MaxcutSparse,
    Universality,
    UnrollCheck,
    ValidateMoments,
    ParisiOpt,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::IampGoe,
        Mode::MaxcutSparse,
        Mode::Universality,
        Mode::UnrollCheck,
        Mode::ValidateMoments,
        Mode::ParisiOpt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::IampGoe => "iamp_goe",
            Mode::MaxcutSparse => "maxcut_sparse",
            Mode::Universality => "universality",
            Mode::UnrollCheck => "unroll_check",
            Mode::ValidateMoments => "validate_moments",
            Mode::ParisiOpt => "parisi_opt",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?}")))
    }

    fn needs_n(self) -> bool {
        !matches!(self, Mode::ParisiOpt)
    }

    fn needs_d(self) -> bool {
        matches!(self, Mode::MaxcutSparse | Mode::Universality | Mode::ValidateMoments)
    }
}

/// Polynomial fitting knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub degree: u32,
    pub max_degree: u32,
    pub eta: f64,
    pub rank: usize,
    pub inflation: f64,
    /// In training standard deviations; `null` disables the clamp.
    pub frame_clamp: Option<f64>,
    /// Clip each fitted step to the range of the exact denoiser.
    pub bound_output: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { degree: 21, max_degree: 21, eta: 1.0, rank: 2, inflation: 1.4, frame_clamp: Some(4.0), bound_output: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    /// Monte Carlo size for calibrating the incremental denoisers.
    pub iamp: usize,
    /// State evolution.
    pub se: usize,
    /// Least-squares training set per step.
    pub fit: usize,
    pub frozen_runs: usize,
    pub frozen_samples: usize,
    /// Single-entry draws per moment order.
    pub moments: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { iamp: 100_000, se: 100_000, fit: 100_000, frozen_runs: 16, frozen_samples: 100_000, moments: 10_000_000 }
    }
}

/// Pass/fail thresholds for the report assertions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub energy_min: f64,
    pub cube_distance_max: f64,
    pub energy_gap_max: f64,
    pub excess_min: f64,
    pub baseline_tol: f64,
    pub unroll_tol: f64,
    pub moment_sigmas: f64,
    pub functional_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            energy_min: 0.70,
            cube_distance_max: 0.1,
            energy_gap_max: 0.05,
            excess_min: 0.60,
            baseline_tol: 0.05,
            unroll_tol: 1e-9,
            moment_sigmas: 4.0,
            functional_tol: 1e-3,
        }
    }
}

/// One experiment. Precedence: built-in defaults, then the JSON document,
/// then command-line flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub d: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_qbar")]
    pub qbar: f64,
    /// Number of γ atoms when `atoms` is not given.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Explicit order parameter as `[t, γ]` pairs; skips the descent.
    #[serde(default)]
    pub atoms: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Seed for everything built once per run (denoisers, fits, b̄).
    #[serde(default)]
    pub build_seed: u64,
    #[serde(default)]
    pub samples: SampleConfig,
    /// Iterations for `unroll_check`.
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Random disorders per seed for `unroll_check`.
    #[serde(default = "default_disorders")]
    pub disorders: usize,
    #[serde(default = "default_orders")]
    pub moment_orders: Vec<u32>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_delta() -> f64 {
    crate::amp::DEFAULT_DELTA
}
fn default_qbar() -> f64 {
    crate::amp::DEFAULT_QBAR
}
fn default_k() -> usize {
    2
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}
fn default_steps() -> usize {
    2
}
fn default_disorders() -> usize {
    20
}
fn default_orders() -> Vec<u32> {
    vec![1, 2, 3, 4]
}

/// Command-line values that take precedence over the document.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub n: Option<usize>,
    pub d: Option<f64>,
    pub delta: Option<f64>,
    pub qbar: Option<f64>,
    pub k: Option<usize>,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for `mode`, with nothing mode-specific filled in.
    pub fn new(mode: Mode) -> Self {
        serde_json::from_value(serde_json::json!({ "mode": mode })).expect("defaults deserialize")
    }

    pub fn from_json(text: &str, ov: &Overrides) -> Result<Self> {
        let mut v: serde_json::Value = serde_json::from_str(text)?;
        let obj = v
            .as_object_mut()
            .ok_or_else(|| Error::Config("configuration must be a JSON object".into()))?;
        if let Some(m) = ov.mode {
            obj.insert("mode".into(), serde_json::to_value(m)?);
        }
        let mut cfg: Self = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        cfg.apply(ov);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path, ov: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
        Self::from_json(&text, ov)
    }

    pub fn apply(&mut self, ov: &Overrides) {
        if let Some(m) = ov.mode {
            self.mode = m;
        }
        if ov.n.is_some() {
            self.n = ov.n;
        }
        if ov.d.is_some() {
            self.d = ov.d;
        }
        if let Some(x) = ov.delta {
            self.delta = x;
        }
        if let Some(x) = ov.qbar {
            self.qbar = x;
        }
        if let Some(x) = ov.k {
            self.k = x;
        }
        if !ov.seeds.is_empty() {
            self.seeds = ov.seeds.clone();
        }
        if ov.out.is_some() {
            self.out = ov.out.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mode = self.mode.name();
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        if self.mode.needs_n() && self.n.is_none() {
            return Err(Error::Config(format!("mode {mode} needs n")));
        }
        if self.mode.needs_d() && self.d.is_none() {
            return Err(Error::Config(format!("mode {mode} needs d")));
        }
        if !(self.delta > 0.0 && self.qbar >= self.delta && self.qbar <= 1.0) {
            return Err(Error::Config(format!("need 0 < δ ≤ q̄ ≤ 1, got δ = {}, q̄ = {}", self.delta, self.qbar)));
        }
        if matches!(self.mode, Mode::MaxcutSparse | Mode::Universality) {
            let (n, d) = (self.n() as f64, self.d());
            if !(d > 0.0 && d < n - 1.0) {
                return Err(Error::Config(format!("sparse disorder needs 0 < d < n − 1, got d = {d}, n = {n}")));
            }
        }
        if self.mode == Mode::UnrollCheck && self.steps == 0 {
            return Err(Error::Config("steps must be positive".into()));
        }
        if self.fit.max_degree < self.fit.degree {
            return Err(Error::Config("fit.max_degree < fit.degree".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n.unwrap_or(0)
    }

    pub fn d(&self) -> f64 {
        self.d.unwrap_or(f64::NAN)
    }
}
