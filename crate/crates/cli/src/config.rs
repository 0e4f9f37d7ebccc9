use serde::{Deserialize, Serialize};
use serde_json::Value;

use coupled_opo_core::criteria::{Objective, Pairing};
use coupled_opo_core::model::derived_scales;
use coupled_opo_core::sde::SdeConfig;
use coupled_opo_core::spectrum::{FrequencyGrid, Mode};
use coupled_opo_core::{SystemParams, C64};

pub const PRESETS: [(&str, &str); 6] = [
    ("fig1", include_str!("../presets/fig1.json")),
    ("fig2", include_str!("../presets/fig2.json")),
    ("fig3", include_str!("../presets/fig3.json")),
    ("fig4", include_str!("../presets/fig4.json")),
    ("fig5", include_str!("../presets/fig5.json")),
    ("fig6", include_str!("../presets/fig6.json")),
];

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Physical parameters. The pump is given either as a fraction of the
/// analytic threshold or as an absolute real amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSpec {
    pub kappa: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub j_a: f64,
    pub j_b: f64,
    pub delta_a: f64,
    pub delta_b: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pump_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Second pump, when it differs from the first.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps2: Option<f64>,
}

impl Default for SystemSpec {
    fn default() -> Self {
        let p = SystemParams::default();
        Self {
            kappa: p.kappa,
            gamma_a: p.gamma_a,
            gamma_b: p.gamma_b,
            j_a: p.j_a,
            j_b: p.j_b,
            delta_a: p.delta_a,
            delta_b: p.delta_b,
            pump_fraction: None,
            eps: None,
            eps2: None,
        }
    }
}

impl SystemSpec {
    pub fn params(&self) -> Result<SystemParams, ConfigError> {
        let base = SystemParams {
            kappa: self.kappa,
            gamma_a: self.gamma_a,
            gamma_b: self.gamma_b,
            j_a: self.j_a,
            j_b: self.j_b,
            delta_a: self.delta_a,
            delta_b: self.delta_b,
            ..SystemParams::default()
        };
        let mut p = match (self.pump_fraction, self.eps) {
            (Some(_), Some(_)) => {
                return Err(ConfigError(
                    "give either pump_fraction or eps, not both".into(),
                ))
            }
            (Some(f), None) => {
                let eps_c = derived_scales(&base)
                    .map_err(|e| ConfigError(e.to_string()))?
                    .eps_crit;
                base.with_pump(f * eps_c)
            }
            (None, Some(e)) => base.with_pump(e),
            (None, None) => base,
        };
        if let Some(e2) = self.eps2 {
            p.eps2 = C64::new(e2, 0.0);
        }
        p.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaPolicy {
    Fixed { degrees: f64 },
    Optimize { objective: Objective },
}

impl Default for ThetaPolicy {
    fn default() -> Self {
        ThetaPolicy::Fixed { degrees: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriteriaSpec {
    pub pairing: Pairing,
    /// Mode whose quadratures are inferred for the EPR product.
    pub epr_mode: Mode,
}

impl Default for CriteriaSpec {
    fn default() -> Self {
        Self {
            pairing: Pairing::XMinusYPlus,
            epr_mode: Mode::One,
        }
    }
}

/// One curve of a sweep: dotted-path overrides applied to the base config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    pub label: String,
    #[serde(default)]
    pub set: serde_json::Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySpec {
    /// Empty lists fall back to the single value in `system`.
    pub j_a: Vec<f64>,
    pub j_b: Vec<f64>,
    pub pump_fractions: Vec<f64>,
    /// Set `Δ_a = J_a`, `Δ_b = J_b` at every grid point.
    pub match_detuning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    pub omegas: Vec<f64>,
    /// Quadrature names: X1, Y1, X2, Y2, Xp, Yp, Xm, Ym.
    pub quadratures: Vec<String>,
    pub theta_degrees: f64,
    /// Negative control: flip the sign of the parametric gain entries of
    /// the drift matrix used for the linearized prediction.
    pub corrupt_drift: bool,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            omegas: vec![0.0, 0.5, 1.0, 2.0, 4.0],
            quadratures: vec!["Y1".into()],
            theta_degrees: 0.0,
            corrupt_drift: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DumpSpec {
    pub stride: usize,
}

impl Default for DumpSpec {
    fn default() -> Self {
        Self { stride: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    pub omega: FrequencyGrid,
    pub theta: ThetaPolicy,
    pub criteria: CriteriaSpec,
    pub series: Vec<Series>,
    pub stability: StabilitySpec,
    /// Frequencies for `optimize-angle`.
    pub optimize_omegas: Vec<f64>,
    pub verify: VerifySpec,
    pub sde: SdeConfig,
    pub dump: DumpSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemSpec::default(),
            omega: FrequencyGrid::default(),
            theta: ThetaPolicy::default(),
            criteria: CriteriaSpec::default(),
            series: vec![],
            stability: StabilitySpec::default(),
            optimize_omegas: vec![0.0],
            verify: VerifySpec::default(),
            sde: SdeConfig::default(),
            dump: DumpSpec::default(),
            output: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(s).map_err(|e| ConfigError(format!("config: {e}")))
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ConfigError(format!("unknown preset {name:?}")))?;
        Self::from_json(text)
    }

    /// Apply `key=value` overrides, where `key` is a dotted path and `value`
    /// is JSON (bare words are taken as strings).
    pub fn with_overrides<S: AsRef<str>>(&self, sets: &[S]) -> Result<Self, ConfigError> {
        let mut tree = serde_json::to_value(self).map_err(|e| ConfigError(e.to_string()))?;
        for s in sets {
            let (key, raw) = s.as_ref().split_once('=').ok_or_else(|| {
                ConfigError(format!("--set expects key=value, got {:?}", s.as_ref()))
            })?;
            let value =
                serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut tree, key, value)?;
        }
        serde_json::from_value(tree).map_err(|e| ConfigError(format!("config: {e}")))
    }

    /// Configs for each curve; a config without series is its own single curve.
    pub fn expand_series(&self) -> Result<Vec<(String, RunConfig)>, ConfigError> {
        if self.series.is_empty() {
            return Ok(vec![(String::new(), self.clone())]);
        }
        let mut base = self.clone();
        base.series.clear();
        self.series
            .iter()
            .map(|s| {
                let sets: Vec<String> = s.set.iter().map(|(k, v)| format!("{k}={v}")).collect();
                Ok((s.label.clone(), base.with_overrides(&sets)?))
            })
            .collect()
    }
}

fn set_path(tree: &mut Value, key: &str, value: Value) -> Result<(), ConfigError> {
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| ConfigError(format!("{key}: {part:?} is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Err(ConfigError(format!("empty key {key:?}")))
}
