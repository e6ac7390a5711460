//! Run configuration: a TOML file or a named preset, plus flag overrides.

use std::path::{Path, PathBuf};

use lpm_core::bench::{GridConfig, GridSpec, RefMode};
use lpm_core::{FilterKind, Layout, LsMethod, NoiseTarget, OffsetProcess, Point};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub layout: LayoutConfig,
    #[serde(default = "GridSpec::paper")]
    pub grid: GridSpec,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub bench: BenchConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    /// 2 or 3; inferred from the reference point when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    pub stations: Vec<Vec<f64>>,
    pub reference: Vec<f64>,
}

/// Exactly one of `sigma` (metres) or `variance` (m²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(default)]
    pub target: NoiseTarget,
}

/// Station number (1-based) or a selection policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReferenceSetting {
    Station(usize),
    Policy(RefPolicy),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefPolicy {
    Best,
    BestObserved,
}

impl std::str::FromStr for ReferenceSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "best" => Ok(Self::Policy(RefPolicy::Best)),
            "best-observed" | "best_observed" => Ok(Self::Policy(RefPolicy::BestObserved)),
            _ => s
                .parse::<usize>()
                .map(Self::Station)
                .map_err(|_| format!("expected a station number, `best` or `best-observed`, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub realizations: usize,
    pub reference: ReferenceSetting,
    pub method: LsMethod,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { realizations: 25, reference: ReferenceSetting::Station(1), method: LsMethod::Qr }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterConfig {
    #[default]
    Passthrough,
    MovingAverage {
        window: usize,
    },
    Exponential {
        alpha: f64,
    },
    Synthetic {
        sigma: f64,
    },
}

impl FilterConfig {
    pub fn kind(&self) -> FilterKind<f64> {
        match *self {
            Self::Passthrough => FilterKind::Passthrough,
            Self::MovingAverage { window } => FilterKind::MovingAverage { window },
            Self::Exponential { alpha } => FilterKind::Exponential { alpha },
            Self::Synthetic { sigma } => FilterKind::Synthetic { sigma },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OffsetConfig {
    Constant { value: f64 },
    IidUniform { lo: f64, hi: f64 },
    RandomWalk { step_sigma: f64 },
}

impl Default for OffsetConfig {
    fn default() -> Self {
        Self::IidUniform { lo: -1.5e5, hi: 1.5e5 }
    }
}

impl OffsetConfig {
    pub fn process(&self) -> OffsetProcess<f64> {
        match *self {
            Self::Constant { value } => OffsetProcess::Constant(value),
            Self::IidUniform { lo, hi } => OffsetProcess::IidUniform { lo, hi },
            Self::RandomWalk { step_sigma } => OffsetProcess::RandomWalk { step_sigma },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub trajectory: Vec<Vec<f64>>,
    /// Epochs emitted per trajectory point.
    pub epochs_per_point: usize,
    pub offset: OffsetConfig,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { trajectory: vec![vec![3.0, 4.0]], epochs_per_point: 1, offset: OffsetConfig::default() }
    }
}

pub const PRESETS: &[&str] = &["paper-hexagon", "paper-pentagon", "exact-hexagon"];

fn layout_config(layout: &Layout<f64>) -> LayoutConfig {
    LayoutConfig {
        dimension: Some(layout.dim()),
        stations: layout.stations().iter().map(|p| p.coords().to_vec()).collect(),
        reference: layout.reference().coords().to_vec(),
    }
}

impl RunConfig {
    /// `paper-hexagon`: the six printed stations, reference at the origin,
    /// variance 0.064 m² on the ranges, 60 m × 60 m grid at 1 m, station 1 as
    /// the non-symmetric reference. `paper-pentagon` and `exact-hexagon` swap
    /// in a regular 5- or 6-gon of radius 10 m.
    pub fn preset(name: &str) -> Result<Self, CliError> {
        let layout = match name {
            "paper-hexagon" => Layout::hexagon_rounded(),
            "paper-pentagon" => Layout::regular_polygon(5, 10.0),
            "exact-hexagon" => Layout::hexagon(),
            _ => {
                return Err(CliError::Validation(format!(
                    "unknown preset `{name}` (available: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(Self {
            seed: 1,
            out: None,
            layout: layout_config(&layout),
            grid: GridSpec::paper(),
            noise: NoiseConfig { sigma: None, variance: Some(0.064), target: NoiseTarget::PerRange },
            bench: BenchConfig::default(),
            filter: FilterConfig::default(),
            simulate: SimulateConfig::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("invalid config: {e}")))
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn layout(&self) -> Result<Layout<f64>, CliError> {
        let point = |v: &Vec<f64>| Point::new(v.clone()).map_err(CliError::from);
        let reference = point(&self.layout.reference)?;
        if let Some(d) = self.layout.dimension {
            if d != reference.dim() {
                return Err(CliError::Validation(format!(
                    "layout dimension {d} does not match reference point of dimension {}",
                    reference.dim()
                )));
            }
        }
        let stations = self.layout.stations.iter().map(point).collect::<Result<_, _>>()?;
        let layout = Layout::new(stations, reference);
        layout.check()?;
        Ok(layout)
    }

    pub fn sigma(&self) -> Result<f64, CliError> {
        let sigma = match (self.noise.sigma, self.noise.variance) {
            (Some(s), None) => s,
            (None, Some(v)) if v >= 0.0 => v.sqrt(),
            (None, Some(v)) => return Err(CliError::Validation(format!("negative variance {v}"))),
            _ => return Err(CliError::Validation("exactly one of noise.sigma or noise.variance must be set".into())),
        };
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(CliError::Validation(format!("invalid noise sigma {sigma}")));
        }
        Ok(sigma)
    }

    pub fn set_sigma(&mut self, sigma: f64) {
        self.noise.sigma = Some(sigma);
        self.noise.variance = None;
    }

    pub fn set_variance(&mut self, variance: f64) {
        self.noise.sigma = None;
        self.noise.variance = Some(variance);
    }

    /// Zero-based reference mode for the benchmark.
    pub fn ref_mode(&self, n: usize) -> Result<RefMode, CliError> {
        Ok(match self.bench.reference {
            ReferenceSetting::Station(s) => RefMode::FixedRef(station_index(s, n)?),
            ReferenceSetting::Policy(RefPolicy::Best) => RefMode::BestRef,
            ReferenceSetting::Policy(RefPolicy::BestObserved) => RefMode::BestRefObserved,
        })
    }

    pub fn grid_config(&self, n: usize) -> Result<GridConfig, CliError> {
        let config = GridConfig {
            sigma: self.sigma()?,
            realizations: self.bench.realizations,
            mode: self.ref_mode(n)?,
            noise_target: self.noise.target,
            offsets: self.simulate.offset.process(),
            method: self.bench.method,
        };
        config.validate(n)?;
        Ok(config)
    }

    /// Everything that determines results; excludes the output location.
    pub fn echo(&self) -> Self {
        Self { out: None, ..self.clone() }
    }
}

/// Converts a 1-based station number to a zero-based index.
pub fn station_index(station: usize, n: usize) -> Result<usize, CliError> {
    if (1..=n).contains(&station) {
        Ok(station - 1)
    } else {
        Err(CliError::Validation(format!("station {station} out of range 1..={n}")))
    }
}
