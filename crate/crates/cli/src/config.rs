//! Run configuration: a flat `key = value` text format, overridable by
//! command-line flags, validated before any computation.

use std::collections::BTreeMap;
use std::path::PathBuf;

use fracfilm_core::entropy::MobilitySpec;
use fracfilm_core::stepper::{
    project_initial, ModelParams, ProjectedInitial, DEFAULT_DAMPING_MIN, DEFAULT_NEWTON_MAX_ITER, DEFAULT_NEWTON_TOL,
};
use fracfilm_core::{GridField, SpectralField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Number of random modes drawn for `cosine_mix` when no coefficients are
/// given.
const RANDOM_MIX_MODES: usize = 8;

pub const KEYS: [&str; 17] = [
    "alpha",
    "n",
    "epsilon",
    "T",
    "n_steps",
    "n_modes",
    "initial_condition",
    "ic_level",
    "ic_amplitude",
    "ic_offset",
    "ic_coefficients",
    "seed",
    "output_dir",
    "newton_tol",
    "newton_max_iter",
    "damping_min",
    "positivity_floor",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPreset {
    /// `u₀ = ic_level`.
    Constant,
    /// `u₀ = max(0, ic_offset + ic_amplitude·(1 − cos 2πx)/2)`, projected.
    Bump,
    /// `u₀ = ic_level + Σ_k a_k φ_k`; `a_k` from `ic_coefficients`, or drawn
    /// from `seed` as `ic_amplitude·U(−1,1)/k²` when none are given.
    CosineMix,
    /// `ic_coefficients` are the full coefficient list `c_0, c_1, …`.
    Custom,
}

impl InitialPreset {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "constant" => Some(Self::Constant),
            "bump" => Some(Self::Bump),
            "cosine_mix" => Some(Self::CosineMix),
            "custom" => Some(Self::Custom),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Bump => "bump",
            Self::CosineMix => "cosine_mix",
            Self::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub n: f64,
    /// One value, or a strictly decreasing continuation schedule.
    pub epsilon: Vec<f64>,
    pub t_final: f64,
    pub n_steps: usize,
    pub n_modes: usize,
    pub initial_condition: InitialPreset,
    pub ic_level: f64,
    pub ic_amplitude: f64,
    pub ic_offset: f64,
    pub ic_coefficients: Vec<f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub damping_min: f64,
    /// Positivity floor relative to the initial mass.
    pub positivity_floor: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            n: 3.0,
            epsilon: vec![1e-3],
            t_final: 0.01,
            n_steps: 20,
            n_modes: 32,
            initial_condition: InitialPreset::CosineMix,
            ic_level: 1.0,
            ic_amplitude: 0.1,
            ic_offset: 0.0,
            ic_coefficients: Vec::new(),
            seed: 0,
            output_dir: PathBuf::from("out"),
            newton_tol: DEFAULT_NEWTON_TOL,
            newton_max_iter: DEFAULT_NEWTON_MAX_ITER,
            damping_min: DEFAULT_DAMPING_MIN,
            positivity_floor: fracfilm_core::diagnostics::POSITIVITY_FLOOR_FACTOR,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_f64(key: &str, v: &str) -> Result<f64, CliError> {
    v.trim()
        .parse()
        .map_err(|_| config_err(format!("{key}: cannot parse '{v}' as a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, CliError> {
    v.trim()
        .parse()
        .map_err(|_| config_err(format!("{key}: cannot parse '{v}' as a non-negative integer")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|item| parse_f64(key, item)).collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Splits `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("line {}: expected 'key = value'", lineno + 1)))?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

impl RunConfig {
    /// Starts from the defaults, applies `pairs` in order and validates.
    pub fn from_pairs<K: AsRef<str>, V: AsRef<str>>(pairs: impl IntoIterator<Item = (K, V)>) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        cfg.apply(pairs)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        Self::from_pairs(parse_config_text(text)?)
    }

    /// Applies overrides without validating.
    pub fn apply<K: AsRef<str>, V: AsRef<str>>(
        &mut self,
        pairs: impl IntoIterator<Item = (K, V)>,
    ) -> Result<(), CliError> {
        for (k, v) in pairs {
            self.set(k.as_ref(), v.as_ref())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = if key == "T" {
            key.to_string()
        } else {
            key.replace('-', "_")
        };
        match key.as_str() {
            "alpha" => self.alpha = parse_f64(&key, value)?,
            "n" => self.n = parse_f64(&key, value)?,
            "epsilon" => self.epsilon = parse_list(&key, value)?,
            "T" => self.t_final = parse_f64(&key, value)?,
            "n_steps" => self.n_steps = parse_usize(&key, value)?,
            "n_modes" => self.n_modes = parse_usize(&key, value)?,
            "initial_condition" => {
                self.initial_condition = InitialPreset::parse(value.trim()).ok_or_else(|| {
                    config_err(format!(
                        "initial_condition: unknown preset '{value}' (constant, bump, cosine_mix, custom)"
                    ))
                })?
            }
            "ic_level" => self.ic_level = parse_f64(&key, value)?,
            "ic_amplitude" => self.ic_amplitude = parse_f64(&key, value)?,
            "ic_offset" => self.ic_offset = parse_f64(&key, value)?,
            "ic_coefficients" => self.ic_coefficients = parse_list(&key, value)?,
            "seed" => {
                self.seed = value
                    .trim()
                    .parse()
                    .map_err(|_| config_err(format!("seed: cannot parse '{value}'")))?
            }
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            "newton_tol" => self.newton_tol = parse_f64(&key, value)?,
            "newton_max_iter" => self.newton_max_iter = parse_usize(&key, value)?,
            "damping_min" => self.damping_min = parse_f64(&key, value)?,
            "positivity_floor" => self.positivity_floor = parse_f64(&key, value)?,
            other => return Err(config_err(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let finite = [
            ("alpha", self.alpha),
            ("n", self.n),
            ("T", self.t_final),
            ("ic_level", self.ic_level),
            ("ic_amplitude", self.ic_amplitude),
            ("ic_offset", self.ic_offset),
            ("newton_tol", self.newton_tol),
            ("damping_min", self.damping_min),
            ("positivity_floor", self.positivity_floor),
        ];
        if let Some((k, v)) = finite.iter().find(|(_, v)| !v.is_finite()) {
            return Err(config_err(format!("{k} = {v} is not finite")));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(config_err(format!("alpha = {} must lie in (0, 2)", self.alpha)));
        }
        if !(self.n >= 1.0) {
            return Err(config_err(format!("n = {} must be >= 1", self.n)));
        }
        match self.epsilon.as_slice() {
            [] => return Err(config_err("epsilon must be given")),
            [e] if !(*e >= 0.0 && e.is_finite()) => return Err(config_err(format!("epsilon = {e} must be >= 0"))),
            [_] => {}
            schedule => {
                let ok = schedule.iter().all(|e| *e > 0.0 && e.is_finite()) && schedule.windows(2).all(|w| w[1] < w[0]);
                if !ok {
                    return Err(config_err("epsilon schedule must be positive and strictly decreasing"));
                }
            }
        }
        if !(self.t_final > 0.0) {
            return Err(config_err(format!("T = {} must be positive", self.t_final)));
        }
        if self.n_steps < 1 {
            return Err(config_err("n_steps must be >= 1"));
        }
        if self.n_modes < 4 {
            return Err(config_err(format!("n_modes = {} must be >= 4", self.n_modes)));
        }
        if !(self.newton_tol > 0.0) {
            return Err(config_err("newton_tol must be positive"));
        }
        if self.newton_max_iter < 1 {
            return Err(config_err("newton_max_iter must be >= 1"));
        }
        if !(self.damping_min > 0.0 && self.damping_min <= 1.0) {
            return Err(config_err("damping_min must lie in (0, 1]"));
        }
        if !(self.positivity_floor >= 0.0) {
            return Err(config_err("positivity_floor must be >= 0"));
        }
        if self.ic_coefficients.iter().any(|c| !c.is_finite()) {
            return Err(config_err("ic_coefficients must be finite"));
        }
        match self.initial_condition {
            InitialPreset::Custom if self.ic_coefficients.is_empty() => {
                return Err(config_err("initial_condition = custom requires ic_coefficients"))
            }
            InitialPreset::Custom if self.ic_coefficients.len() > self.n_modes => {
                return Err(config_err(format!(
                    "{} custom coefficients exceed n_modes = {}",
                    self.ic_coefficients.len(),
                    self.n_modes
                )))
            }
            InitialPreset::CosineMix if self.ic_coefficients.len() >= self.n_modes => {
                return Err(config_err(format!(
                    "{} cosine_mix coefficients exceed n_modes - 1 = {}",
                    self.ic_coefficients.len(),
                    self.n_modes - 1
                )))
            }
            _ => {}
        }
        Ok(())
    }

    /// Every key with its effective value; feeding the result back through
    /// [`from_pairs`](Self::from_pairs) reproduces `self` exactly.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let entries: [(&str, String); 17] = [
            ("alpha", self.alpha.to_string()),
            ("n", self.n.to_string()),
            ("epsilon", join(&self.epsilon)),
            ("T", self.t_final.to_string()),
            ("n_steps", self.n_steps.to_string()),
            ("n_modes", self.n_modes.to_string()),
            ("initial_condition", self.initial_condition.name().to_string()),
            ("ic_level", self.ic_level.to_string()),
            ("ic_amplitude", self.ic_amplitude.to_string()),
            ("ic_offset", self.ic_offset.to_string()),
            ("ic_coefficients", join(&self.ic_coefficients)),
            ("seed", self.seed.to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("newton_tol", self.newton_tol.to_string()),
            ("newton_max_iter", self.newton_max_iter.to_string()),
            ("damping_min", self.damping_min.to_string()),
            ("positivity_floor", self.positivity_floor.to_string()),
        ];
        entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_text(&self) -> String {
        self.to_pairs().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Model parameters for the first entry of the ε schedule.
    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        self.model_params_for(self.epsilon[0])
    }

    pub fn model_params_for(&self, epsilon: f64) -> Result<ModelParams, CliError> {
        let mobility = MobilitySpec::new(self.n, epsilon).map_err(|e| config_err(e.to_string()))?;
        ModelParams::new(self.alpha, mobility, self.n_modes)
            .and_then(|p| p.with_tolerances(self.newton_tol, self.newton_max_iter, self.damping_min))
            .map_err(|e| config_err(e.to_string()))
    }

    /// Builds the initial state; `bump` also returns its projection report.
    pub fn initial_state(&self) -> Result<(SpectralField, Option<ProjectedInitial>), CliError> {
        let n = self.n_modes;
        let field = |c: Vec<f64>| SpectralField::new(c).map_err(|e| config_err(e.to_string()));
        match self.initial_condition {
            InitialPreset::Constant => Ok((SpectralField::constant(n, self.ic_level), None)),
            InitialPreset::Custom => {
                let mut c = self.ic_coefficients.clone();
                c.resize(n, 0.0);
                Ok((field(c)?, None))
            }
            InitialPreset::CosineMix => {
                let mut c = vec![0.0; n];
                c[0] = self.ic_level;
                if self.ic_coefficients.is_empty() {
                    let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                    for (k, slot) in c.iter_mut().enumerate().take(RANDOM_MIX_MODES + 1).skip(1) {
                        *slot = self.ic_amplitude * rng.gen_range(-1.0..1.0) / (k * k) as f64;
                    }
                } else {
                    c[1..=self.ic_coefficients.len()].copy_from_slice(&self.ic_coefficients);
                }
                Ok((field(c)?, None))
            }
            InitialPreset::Bump => {
                let (offset, amp) = (self.ic_offset, self.ic_amplitude);
                let values = GridField::from_fn(4 * n, |x| {
                    (offset + amp * (1.0 - (2.0 * std::f64::consts::PI * x).cos()) / 2.0).max(0.0)
                })
                .map_err(|e| config_err(e.to_string()))?;
                let params = self.model_params()?;
                let projected = project_initial(&values, &params).map_err(|e| config_err(e.to_string()))?;
                Ok((projected.field.clone(), Some(projected)))
            }
        }
    }
}
