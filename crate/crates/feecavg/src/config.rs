//! Experiment configuration: the JSON config file is the reproducibility
//! artifact; flags stay minimal.

use serde::{Deserialize, Serialize};

use feec::analysis::NormSpec;
use feec::projection::{Backend, WeightKind};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeshSource {
    /// built-in generator name
    Generator(String),
    /// mesh file on disk
    File { file: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceConfig {
    Named {
        name: String,
        r: usize,
    },
    Explicit {
        family: feec::fespace::Family,
        r: usize,
        k: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeAssertion {
    pub norm: NormSpec,
    pub expected: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Assertions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<SlopeAssertion>,
    /// errors must decrease from level to level
    #[serde(default)]
    pub monotone: bool,
    /// spot-check that space members reproduce under the projection
    #[serde(default)]
    pub projection_property: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default = "default_report")]
    pub report: String,
    #[serde(default = "default_csv")]
    pub csv: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            report: default_report(),
            csv: default_csv(),
        }
    }
}

fn default_report() -> String {
    "report.json".into()
}

fn default_csv() -> String {
    "errors.csv".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mesh: MeshSource,
    pub levels: usize,
    pub space: SpaceConfig,
    /// "none", "all", or "side_<axis><value>" like "side_y0"
    #[serde(default = "default_boundary")]
    pub boundary: String,
    pub weights: WeightKind,
    pub backend: Backend,
    pub field: String,
    pub norms: Vec<NormSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<OutputConfig>,
    #[serde(default)]
    pub assertions: Assertions,
}

fn default_boundary() -> String {
    "none".into()
}

#[derive(Debug)]
pub enum ConfigError {
    Parse(String),
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Parse(msg) => write!(f, "config parse error: {msg}"),
            ConfigError::Invalid(msg) => write!(f, "invalid config: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let config: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| ConfigError::Parse(format!("line {}: {}", e.line(), e)))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.levels < 1 {
            return Err(ConfigError::Invalid("levels must be at least 1".into()));
        }
        if self.assertions.slope.is_some() && self.levels < 3 {
            return Err(ConfigError::Invalid(
                "slopes need >=3 levels".into(),
            ));
        }
        if let MeshSource::Generator(name) = &self.mesh {
            if feec::mesh::generator(name).is_none() {
                return Err(ConfigError::Invalid(format!(
                    "unknown mesh generator {name:?}"
                )));
            }
        }
        if feec::fields::field_by_name(&self.field).is_none() {
            return Err(ConfigError::Invalid(format!(
                "unknown field {:?}",
                self.field
            )));
        }
        if self.norms.is_empty() {
            return Err(ConfigError::Invalid("at least one norm is required".into()));
        }
        parse_boundary(&self.boundary)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown boundary {:?}", self.boundary)))?;
        Ok(())
    }
}

/// Parsed boundary selector: `None` for the empty set, `All`, or one
/// axis-aligned side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryChoice {
    NoneAtAll,
    All,
    Side { axis: usize, value: f64 },
}

pub fn parse_boundary(text: &str) -> Option<BoundaryChoice> {
    match text {
        "none" => Some(BoundaryChoice::NoneAtAll),
        "all" => Some(BoundaryChoice::All),
        _ => {
            let rest = text.strip_prefix("side_")?;
            let mut chars = rest.chars();
            let axis = match chars.next()? {
                'x' => 0,
                'y' => 1,
                'z' => 2,
                _ => return None,
            };
            let value: f64 = chars.as_str().parse().ok()?;
            Some(BoundaryChoice::Side { axis, value })
        }
    }
}

pub fn boundary_of(
    choice: BoundaryChoice,
    complex: &feec::mesh::SimplicialComplex,
) -> feec::mesh::BoundarySubcomplex {
    match choice {
        BoundaryChoice::NoneAtAll => feec::mesh::BoundarySubcomplex::empty(),
        BoundaryChoice::All => complex.boundary_all(),
        BoundaryChoice::Side { axis, value } => {
            complex.boundary_subcomplex(|x| (x[axis] - value).abs() < 1e-12)
        }
    }
}
