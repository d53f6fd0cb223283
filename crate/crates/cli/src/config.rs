//! Run configuration: one JSON document with keys `model`, `sweep`, `loop`,
//! `sim`, `output` and optionally `verify`. Missing keys take defaults, so
//! `{}` is the unit-rate example model with `n_th = 0`.

use std::path::{Path, PathBuf};

use qest::feedback::{transduction_plant, LoopModel};
use qest::mc::SimConfig;
use qest::models::{Bath, Loss, Measurement, OscMeasParams, SpectralModel};
use qest::ratpoly::{Polynomial, RationalFn};
use qest::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default, rename = "loop")]
    pub feedback: Option<LoopConfig>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config parses")
    }
}

fn one() -> f64 {
    1.0
}

fn default_omega0() -> f64 {
    1.0e5
}

fn default_loss() -> Loss {
    Loss::Rate { gamma0: 1.0 }
}

fn default_bath() -> Bath {
    Bath::Occupancy { n_th: 0.0 }
}

fn default_measurement() -> Measurement {
    Measurement::Rate { gamma_meas: 1.0 }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "default_omega0")]
    pub omega0: f64,
    #[serde(default = "default_loss")]
    pub loss: Loss,
    #[serde(default = "default_bath")]
    pub bath: Bath,
    #[serde(default = "default_measurement")]
    pub measurement: Measurement,
    #[serde(default = "one")]
    pub eta: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty model parses")
    }
}

impl ModelConfig {
    pub fn params(&self) -> OscMeasParams {
        OscMeasParams {
            hbar: self.hbar,
            mass: self.mass,
            omega0: self.omega0,
            loss: self.loss,
            bath: self.bath,
            measurement: self.measurement,
            eta: self.eta,
        }
    }
}

fn default_ratios() -> Vec<f64> {
    vec![0.01, 0.1, 1.0, 10.0, 100.0, 1000.0]
}

fn default_occupancies() -> Vec<f64> {
    vec![0.0, 0.5, 5.0, 50.0]
}

/// Grid of `gamma_meas / gamma0` and `n_th`; the rest of the model is kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_ratios")]
    pub gamma_meas_over_gamma0: Vec<f64>,
    #[serde(default = "default_occupancies")]
    pub n_th: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { gamma_meas_over_gamma0: default_ratios(), n_th: default_occupancies() }
    }
}

/// A coefficient: a real number or `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coef {
    Real(f64),
    Complex([f64; 2]),
}

impl Coef {
    fn value(self) -> Complex64 {
        match self {
            Coef::Real(r) => Complex64::new(r, 0.0),
            Coef::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

/// `num(s) / den(s)` in the envelope variable, coefficients lowest degree first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RationalSpec {
    pub num: Vec<Coef>,
    pub den: Vec<Coef>,
}

impl RationalSpec {
    pub fn build(&self, what: &str) -> Result<RationalFn, CliError> {
        let poly = |c: &[Coef]| -> Result<Polynomial, CliError> {
            if c.is_empty() || c.iter().any(|v| !v.value().re.is_finite() || !v.value().im.is_finite()) {
                return Err(CliError::validation(format!("{what}: coefficients must be a non-empty list of finite numbers")));
            }
            Ok(Polynomial::new(c.iter().map(|v| v.value()).collect()))
        };
        RationalFn::new(poly(&self.num)?, poly(&self.den)?).map_err(|e| CliError::validation(format!("{what}: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlantSpec {
    /// `"transduction"`: the oscillator's own response `1 / (s + gamma0/2)`.
    Named(String),
    Rational(RationalSpec),
}

impl Default for PlantSpec {
    fn default() -> Self {
        PlantSpec::Named("transduction".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopConfig {
    #[serde(default)]
    pub plant: PlantSpec,
    pub controller: RationalSpec,
}

impl LoopConfig {
    pub fn build(&self, model: &SpectralModel) -> Result<LoopModel, CliError> {
        let plant = match &self.plant {
            PlantSpec::Named(n) if n == "transduction" => transduction_plant(model),
            PlantSpec::Named(n) => return Err(CliError::validation(format!("unknown plant {n:?}; use \"transduction\" or {{num, den}}"))),
            PlantSpec::Rational(r) => r.build("loop.plant")?,
        };
        let controller = self.controller.build("loop.controller")?;
        LoopModel::new(plant, controller).map_err(|e| CliError::validation(format!("loop: {e}")))
    }
}

fn default_batches() -> usize {
    100
}

fn default_seed() -> u64 {
    42
}

fn default_trace_rows() -> usize {
    10_000
}

fn default_warmup() -> f64 {
    40.0
}

/// Simulation settings. `dt` and `duration` default to `0.01 / gamma_w`
/// and `2000 / gamma_w`; the resolved config records the values used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub duration: Option<f64>,
    #[serde(default = "default_batches")]
    pub n_batches: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "one")]
    pub noise_scale: f64,
    #[serde(default = "default_trace_rows")]
    pub trace_rows: usize,
    #[serde(default = "default_warmup")]
    pub warmup_bandwidths: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty sim parses")
    }
}

fn default_dir() -> String {
    "out".into()
}

fn name(s: &str) -> String {
    s.into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "sweep_csv")]
    pub sweep_csv: String,
    #[serde(default = "verify_json")]
    pub verify_json: String,
    #[serde(default = "traces_csv")]
    pub traces_csv: String,
    #[serde(default = "stats_json")]
    pub stats_json: String,
    /// Written by closed-loop runs only.
    #[serde(default = "loop_json")]
    pub loop_json: String,
}

fn sweep_csv() -> String {
    name("sweep.csv")
}

fn verify_json() -> String {
    name("verify.json")
}

fn traces_csv() -> String {
    name("traces.csv")
}

fn stats_json() -> String {
    name("stats.json")
}

fn loop_json() -> String {
    name("loop.json")
}

impl Default for OutputConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty output parses")
    }
}

impl OutputConfig {
    pub fn path(&self, file: &str) -> PathBuf {
        Path::new(&self.dir).join(file)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Replace the position estimator by its time reverse, which is
    /// anticausal, to exercise the failure path.
    #[serde(default)]
    pub anticausal_filter: bool,
}

impl RunConfig {
    /// Accepts a config, or any emitted report, whose `config` key is used.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let bad = |e: serde_json::Error| CliError::validation(format!("config: {e}"));
        let mut value: serde_json::Value = serde_json::from_str(text).map_err(bad)?;
        if let Some(inner) = value.get_mut("config").filter(|v| v.is_object()).map(serde_json::Value::take) {
            value = inner;
        }
        serde_json::from_value(value).map_err(bad)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn spectral_model(&self) -> Result<SpectralModel, CliError> {
        let p = self.model.params();
        p.validate().map_err(|e| CliError::validation(format!("model: {e}")))?;
        qest::models::near_resonance_model(&p).map_err(|e| CliError::validation(format!("model: {e}")))
    }

    pub fn validate_sweep(&self) -> Result<(), CliError> {
        let s = &self.sweep;
        if s.gamma_meas_over_gamma0.is_empty() || s.n_th.is_empty() {
            return Err(CliError::validation("sweep: grids must be non-empty"));
        }
        if let Some(v) = s.gamma_meas_over_gamma0.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(CliError::validation(format!("sweep: gamma_meas_over_gamma0 must be positive, got {v}")));
        }
        if let Some(v) = s.n_th.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(CliError::validation(format!("sweep: n_th must be >= 0, got {v}")));
        }
        self.model.params().validate().map_err(|e| CliError::validation(format!("model: {e}")))
    }

    /// Simulation config with defaults filled in; also writes them back so
    /// the embedded config is complete.
    pub fn resolve_sim(&mut self) -> Result<SimConfig, CliError> {
        let params = self.model.params();
        let gw = params
            .rates()
            .map_err(|e| CliError::validation(format!("model: {e}")))?
            .gamma_w;
        let s = &mut self.sim;
        let dt = *s.dt.get_or_insert(0.01 / gw);
        let duration = *s.duration.get_or_insert(2000.0 / gw);
        let cfg = SimConfig {
            params,
            dt,
            duration,
            n_batches: s.n_batches,
            seed: s.seed,
            noise_scale: s.noise_scale,
            trace_rows: s.trace_rows,
            warmup_bandwidths: s.warmup_bandwidths,
        };
        cfg.validate().map_err(|e| CliError::validation(e.to_string()))?;
        Ok(cfg)
    }
}
