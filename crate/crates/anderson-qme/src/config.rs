//! Run configuration files.
//!
//! All energies, rates and temperatures are in units of the total coupling Γ,
//! times in units of 1/Γ.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Scheme;
use crate::model::{ModelParams, TimeGrid};
use crate::propagation::Route;
use crate::superop::DotMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelParams,
    #[serde(default)]
    pub grid: TimeGrid,
    pub method: MethodConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    Empty,
    Up,
    Down,
    Double,
    Mixed,
}

impl InitialState {
    pub fn density(self) -> DotMatrix {
        let mut rho = DotMatrix::zeros();
        let one = num_complex::Complex64::new(1.0, 0.0);
        match self {
            InitialState::Empty => rho[(0, 0)] = one,
            InitialState::Up => rho[(1, 1)] = one,
            InitialState::Down => rho[(2, 2)] = one,
            InitialState::Double => rho[(3, 3)] = one,
            InitialState::Mixed => rho = DotMatrix::identity() * (one * 0.25),
        }
        rho
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorForm {
    #[default]
    Direct,
    Recursive,
}

fn default_order() -> u8 {
    4
}

fn default_initial() -> InitialState {
    InitialState::Empty
}

fn default_max_iters() -> usize {
    30
}

fn default_tol() -> f64 {
    1e-6
}

fn default_physicality_tol() -> f64 {
    crate::diagnostics::DEFAULT_TOL
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub scheme: Scheme,
    pub route: Route,
    #[serde(default = "default_order")]
    pub order: u8,
    #[serde(default = "default_initial")]
    pub initial_state: InitialState,
    /// evaluation of the perturbative generator orders
    #[serde(default)]
    pub generator_form: GeneratorForm,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_physicality_tol")]
    pub physicality_tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    #[default]
    None,
    ExactU0,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogSpacing {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

fn default_stride() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// explicit list of T/Γ
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperatures: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_spaced: Option<LogSpacing>,
    #[serde(default)]
    pub compare: Comparison,
    /// every `stride`-th grid sample is reported
    #[serde(default = "default_stride")]
    pub stride: usize,
}

impl SweepConfig {
    pub fn temperature_list(&self) -> Result<Vec<f64>> {
        match (&self.temperatures, &self.log_spaced) {
            (Some(_), Some(_)) => Err(Error::Config(
                "sweep: give either `temperatures` or `log_spaced`, not both".into(),
            )),
            (Some(t), None) => Ok(t.clone()),
            (None, Some(l)) => {
                if !(l.min > 0.0 && l.max >= l.min) {
                    return Err(Error::Config("sweep.log_spaced: need 0 < min <= max".into()));
                }
                Ok(match l.count {
                    0 => Vec::new(),
                    1 => vec![l.min],
                    n => (0..n)
                        .map(|i| l.min * (l.max / l.min).powf(i as f64 / (n - 1) as f64))
                        .collect(),
                })
            }
            (None, None) => Ok(Vec::new()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    #[serde(default = "default_name")]
    pub name: String,
    /// sample stride for kernel and generator dumps
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_name() -> String {
    "run".into()
}

impl OutputConfig {
    pub fn path(&self, suffix: &str) -> PathBuf {
        self.directory.join(format!("{}{}", self.name, suffix))
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config, or the `config` member of a JSON run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        if path.extension().is_some_and(|e| e == "json") {
            #[derive(Deserialize)]
            struct Manifest {
                config: Config,
            }
            let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Config(format!("manifest: {e}")))?;
            m.config.validate()?;
            return Ok(m.config);
        }
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| Error::Config(format!("model: {e}")))?;
        self.grid.validate().map_err(|e| Error::Config(format!("grid: {e}")))?;
        if !matches!(self.method.order, 2 | 4) {
            return Err(Error::Config(format!("method.order must be 2 or 4, got {}", self.method.order)));
        }
        if !(self.method.tol > 0.0) || !(self.method.physicality_tol >= 0.0) {
            return Err(Error::Config("method: tolerances must be positive".into()));
        }
        if self.output.stride == 0 {
            return Err(Error::Config("output.stride must be at least 1".into()));
        }
        if let Some(s) = &self.sweep {
            if s.stride == 0 {
                return Err(Error::Config("sweep.stride must be at least 1".into()));
            }
            for t in s.temperature_list()? {
                if !(t >= 0.0 && t.is_finite()) {
                    return Err(Error::Config(format!("sweep: invalid temperature {t}")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
epsilon = 2.0

[[model.reservoir]]
gamma_up = 0.5
gamma_down = 0.5
temperature = 1.0

[method]
scheme = "renormalized"
route = "kernel"

[output]
directory = "out"
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = Config::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.grid, TimeGrid::default());
        assert_eq!(cfg.method.order, 4);
        assert_eq!(cfg.method.initial_state, InitialState::Empty);
        assert_eq!(cfg.model.reservoirs[0].mu, 0.0);
        assert_eq!(cfg.output.path(".csv"), PathBuf::from("out/run.csv"));
    }

    #[test]
    fn unknown_field_reports_location() {
        let bad = MINIMAL.replace("epsilon = 2.0", "epsilon = 2.0\nepsilom = 1.0");
        let err = Config::from_toml(&bad).unwrap_err().to_string();
        assert!(err.contains("epsilom") && err.contains("line"), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(Config::from_toml(&MINIMAL.replace("route = \"kernel\"", "route = \"kernel\"\norder = 3")).is_err());
        assert!(Config::from_toml(&MINIMAL.replace("route = \"kernel\"", "route = \"tunnel\"")).is_err());
        let both = format!("{MINIMAL}\n[sweep]\ntemperatures = [1.0]\nlog_spaced = {{ min = 0.1, max = 1.0, count = 3 }}\n");
        assert!(Config::from_toml(&both).is_err());
    }

    #[test]
    fn log_spacing() {
        let s = SweepConfig {
            temperatures: None,
            log_spaced: Some(LogSpacing {
                min: 0.1,
                max: 10.0,
                count: 5,
            }),
            compare: Comparison::None,
            stride: 1,
        };
        let t = s.temperature_list().unwrap();
        assert_eq!(t.len(), 5);
        assert!((t[2] - 1.0).abs() < 1e-12 && (t[4] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip_through_json() {
        let cfg = Config::from_toml(MINIMAL).unwrap();
        let back: Config = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
