//! TOML scenario files.
//!
//! ```toml
//! [option]
//! kind = "put"
//! strike = 100.0
//! moneyness = [0.8, 1.0, 1.2]   # spot = moneyness * strike
//! maturity = 1.0
//! volatility = 0.4
//! carry_rate = 0.0
//!
//! [rate]
//! model = "bachelier"           # or a list of models
//! stochastic = "r1"
//! r0 = 0.01
//! r_bar = 0.0418
//! sigma_r = [0.0, 0.0128]
//!
//! [numerics]
//! steps = 2000
//! quad_order = 20
//! method = "single"
//!
//! [output]
//! format = "csv"
//! layout = "full"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fugit::DEFAULT_COMPACTION;
use crate::integrator::Method;
use crate::lattice::{LatticeConfig, DEFAULT_STEPS};
use crate::option::{OptionKind, OptionSpec, RateSlot};
use crate::optionality::{FugitRate, PipelineConfig};
use crate::quadrature::DEFAULT_ORDER;
use crate::rates::ModelKind;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// A scalar or a list in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionBlock {
    pub kind: OptionKind,
    pub strike: f64,
    /// Used when `moneyness` is absent; defaults to the strike.
    #[serde(default)]
    pub spot: Option<f64>,
    #[serde(default)]
    pub moneyness: Option<Vec<f64>>,
    pub maturity: f64,
    pub volatility: f64,
    /// Value of the non-stochastic slot; the stochastic slot is overwritten per node.
    #[serde(default)]
    pub funding_rate: f64,
    #[serde(default)]
    pub carry_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateBlock {
    pub model: OneOrMany<ModelKind>,
    #[serde(default = "default_slot")]
    pub stochastic: RateSlot,
    pub r0: f64,
    pub r_bar: f64,
    pub sigma_r: OneOrMany<f64>,
    #[serde(default)]
    pub kappa: Option<f64>,
}

fn default_slot() -> RateSlot {
    RateSlot::R1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    #[default]
    Single,
    Full,
}

impl MethodChoice {
    pub fn method(self) -> Method {
        match self {
            MethodChoice::Single => Method::SingleFugit,
            MethodChoice::Full => Method::FullDistribution,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsBlock {
    pub steps: usize,
    pub quad_order: usize,
    pub method: MethodChoice,
    /// Same as `rate.kappa`; either may be given.
    pub kappa: Option<f64>,
    pub delta: Option<f64>,
    pub rho_rate: RateSlot,
    pub fugit_rate: FugitRate,
    pub compaction: f64,
    pub unconditional: bool,
    pub refine: bool,
}

impl Default for NumericsBlock {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            quad_order: DEFAULT_ORDER,
            method: MethodChoice::Single,
            kappa: None,
            delta: None,
            rho_rate: RateSlot::R2,
            fugit_rate: FugitRate::TargetMean,
            compaction: DEFAULT_COMPACTION,
            unconditional: false,
            refine: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Column set of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// Every report field.
    #[default]
    Full,
    /// `O_A(r*)`, `Õ_A`, `π_A`.
    Convexity,
    /// Rhos, `Ω` and `τ*` only; skips the rate integration.
    Stopping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub format: Format,
    pub path: Option<PathBuf>,
    pub precision: usize,
    pub layout: Layout,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            format: Format::Csv,
            path: None,
            precision: 4,
            layout: Layout::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub title: Option<String>,
    pub option: OptionBlock,
    pub rate: RateBlock,
    #[serde(default)]
    pub numerics: NumericsBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

/// One point of the Cartesian sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub model: ModelKind,
    pub moneyness: f64,
    pub sigma_r: f64,
    pub spec: OptionSpec,
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn finite(name: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let o = &self.option;
        for (name, v) in [
            ("option.strike", o.strike),
            ("option.maturity", o.maturity),
            ("option.volatility", o.volatility),
            ("option.funding_rate", o.funding_rate),
            ("option.carry_rate", o.carry_rate),
        ] {
            finite(name, v)?;
        }
        if o.strike <= 0.0 || o.maturity <= 0.0 || o.volatility < 0.0 {
            return Err(invalid("option needs strike > 0, maturity > 0, volatility >= 0"));
        }
        if let Some(s) = o.spot {
            finite("option.spot", s)?;
            if s <= 0.0 {
                return Err(invalid("option.spot must be > 0"));
            }
        }
        if let Some(grid) = &o.moneyness {
            if grid.is_empty() {
                return Err(invalid("option.moneyness grid is empty"));
            }
            if grid.iter().any(|m| !m.is_finite() || *m <= 0.0) {
                return Err(invalid("option.moneyness entries must be finite and > 0"));
            }
        }

        let r = &self.rate;
        if r.model.to_vec().is_empty() {
            return Err(invalid("rate.model list is empty"));
        }
        finite("rate.r0", r.r0)?;
        finite("rate.r_bar", r.r_bar)?;
        let grid = r.sigma_r.to_vec();
        if grid.is_empty() {
            return Err(invalid("rate.sigma_r grid is empty"));
        }
        if grid.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(invalid("rate.sigma_r entries must be finite and >= 0"));
        }
        if let (Some(a), Some(b)) = (r.kappa, self.numerics.kappa) {
            if a != b {
                return Err(invalid(format!(
                    "rate.kappa = {a} and numerics.kappa = {b} disagree"
                )));
            }
        }
        if let Some(k) = self.kappa() {
            if !k.is_finite() || k <= 0.0 {
                return Err(invalid(format!("kappa must be > 0, got {k}")));
            }
        }

        let n = &self.numerics;
        if n.steps == 0 {
            return Err(invalid("numerics.steps must be >= 1"));
        }
        if n.quad_order == 0 {
            return Err(invalid("numerics.quad_order must be >= 1"));
        }
        if !(n.compaction.is_finite() && n.compaction >= 0.0) {
            return Err(invalid("numerics.compaction must be finite and >= 0"));
        }
        if let Some(d) = n.delta {
            if !d.is_finite() || d < 0.0 {
                return Err(invalid("numerics.delta must be finite and >= 0"));
            }
        }
        if self.output.precision > 15 {
            return Err(invalid("output.precision must be <= 15"));
        }
        Ok(())
    }

    pub fn kappa(&self) -> Option<f64> {
        self.rate.kappa.or(self.numerics.kappa)
    }

    pub fn moneyness_grid(&self) -> Vec<f64> {
        match &self.option.moneyness {
            Some(grid) => grid.clone(),
            None => vec![self.option.spot.unwrap_or(self.option.strike) / self.option.strike],
        }
    }

    /// Contract at a given moneyness, before the stochastic slot is set.
    pub fn spec_at(&self, moneyness: f64) -> OptionSpec {
        let o = &self.option;
        let spot = match (&o.moneyness, o.spot) {
            (None, Some(s)) => s,
            _ => moneyness * o.strike,
        };
        OptionSpec {
            spot,
            strike: o.strike,
            maturity: o.maturity,
            volatility: o.volatility,
            funding_rate: o.funding_rate,
            carry_rate: o.carry_rate,
            kind: o.kind,
        }
    }

    /// Cells in sweep order: model, then moneyness, then `σ_r`.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for model in self.rate.model.to_vec() {
            for &moneyness in &self.moneyness_grid() {
                for sigma_r in self.rate.sigma_r.to_vec() {
                    out.push(Cell {
                        index: out.len(),
                        model,
                        moneyness,
                        sigma_r,
                        spec: self.spec_at(moneyness),
                    });
                }
            }
        }
        out
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let n = &self.numerics;
        PipelineConfig {
            lattice: LatticeConfig::with_steps(n.steps),
            quad_order: n.quad_order,
            method: n.method.method(),
            rho_slot: n.rho_rate,
            fugit_rate: n.fugit_rate,
            refine: n.refine,
            unconditional: n.unconditional,
            compaction: n.compaction,
            delta: n.delta,
        }
    }

    /// SHA-256 of the canonical JSON of everything that affects computed values.
    /// The output block is excluded so the destination does not change the digest.
    pub fn digest(&self) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            title: &'a Option<String>,
            option: &'a OptionBlock,
            rate: &'a RateBlock,
            numerics: &'a NumericsBlock,
            precision: usize,
            layout: Layout,
        }
        let canonical = Canonical {
            title: &self.title,
            option: &self.option,
            rate: &self.rate,
            numerics: &self.numerics,
            precision: self.output.precision,
            layout: self.output.layout,
        };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let hash = Sha256::digest(json.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        [option]
        kind = "put"
        strike = 100.0
        moneyness = [0.8, 1.0]
        maturity = 1.0
        volatility = 0.4

        [rate]
        model = ["bachelier", "vasicek"]
        r0 = 0.01
        r_bar = 0.0418
        sigma_r = [0.0, 0.0128, 0.0228]
    "#;

    #[test]
    fn parses_and_expands_grid() {
        let cfg = ScenarioConfig::from_toml_str(BASE).unwrap();
        let cells = cfg.cells();
        assert_eq!(cells.len(), 12);
        assert_eq!(cells[0].model, ModelKind::Bachelier);
        assert_eq!(cells[3].moneyness, 1.0);
        assert_eq!(cells[3].spec.spot, 100.0);
        assert_eq!(cells[11].model, ModelKind::Vasicek);
        assert!(cells.iter().enumerate().all(|(i, c)| c.index == i));
        assert_eq!(cfg.numerics.steps, 2000);
        assert_eq!(cfg.rate.stochastic, RateSlot::R1);
    }

    #[test]
    fn empty_sigma_grid_rejected() {
        let text = BASE.replace("sigma_r = [0.0, 0.0128, 0.0228]", "sigma_r = []");
        let err = ScenarioConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("sigma_r grid is empty"), "{err}");
    }

    #[test]
    fn unknown_field_rejected() {
        let text = BASE.replace("volatility = 0.4", "volatility = 0.4\nvol = 0.3");
        assert!(matches!(
            ScenarioConfig::from_toml_str(&text),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn conflicting_kappa_rejected() {
        let text = format!("{BASE}\nkappa = 0.5\n[numerics]\nkappa = 0.7\n");
        assert!(matches!(
            ScenarioConfig::from_toml_str(&text),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn scalar_grids_and_explicit_spot() {
        let text = BASE
            .replace("moneyness = [0.8, 1.0]", "spot = 80.0")
            .replace("[\"bachelier\", \"vasicek\"]", "\"lognormal\"")
            .replace("[0.0, 0.0128, 0.0228]", "0.0128");
        let cfg = ScenarioConfig::from_toml_str(&text).unwrap();
        let cells = cfg.cells();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].spec.spot, 80.0);
        assert_eq!(cells[0].moneyness, 0.8);
    }

    #[test]
    fn digest_ignores_output_path() {
        let mut a = ScenarioConfig::from_toml_str(BASE).unwrap();
        let d0 = a.digest();
        a.output.path = Some("elsewhere.csv".into());
        assert_eq!(a.digest(), d0);
        a.numerics.steps = 1000;
        assert_ne!(a.digest(), d0);
        assert_eq!(d0.len(), 64);
    }
}
