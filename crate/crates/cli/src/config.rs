//! Experiment configuration files.
//!
//! A configuration is a TOML document. Top-level keys name the experiment;
//! `[profile]`, `[family]` and `[grid]` describe the objects it runs on.
//!
//! ```toml
//! name = "convergence-uniform"
//! experiment = "convergence"
//! seed = 1
//! dimension = 1
//! horizon = 64
//! function = "cosine-packet"
//!
//! [profile]
//! kind = "indicator"
//!
//! [family]
//! kind = "uniform-variance"
//! s_max = 1.0
//!
//! [grid]
//! lower = [-6.0]
//! upper = [6.0]
//! resolution = [2048]
//! ```

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use randmoll_core::profiles::ProfileKind;
use randmoll_core::randomness::{Atom, JointForm};
use randmoll_core::transport::Catalog;
use randmoll_core::{FamilyKind, FamilySpec, JointDistributionSpec, MollifyPath, Profile};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Convergence,
    AeConvergence,
    Divergence,
    Check,
    WeakTypeStability,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::AeConvergence => "ae-convergence",
            ExperimentKind::Divergence => "divergence",
            ExperimentKind::Check => "check",
            ExperimentKind::WeakTypeStability => "weak-type-stability",
        }
    }
}

/// Checks runnable by the `check` experiment.
pub const CHECKS: [&str; 9] = [
    "vague", "density", "zo", "gradient", "moment", "declared", "dyadic", "domination", "weak-type",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProfileConfig {
    Indicator,
    ScaledIndicator { alpha: f64, beta: f64 },
    PowerTail { delta: f64 },
    Gaussian,
    Exponential,
    PoissonTail,
    OriginSingular,
}

impl ProfileConfig {
    pub fn kind(&self) -> ProfileKind {
        match *self {
            ProfileConfig::Indicator => ProfileKind::Indicator,
            ProfileConfig::ScaledIndicator { alpha, beta } => ProfileKind::ScaledIndicator { alpha, beta },
            ProfileConfig::PowerTail { delta } => ProfileKind::PowerTail { delta },
            ProfileConfig::Gaussian => ProfileKind::Gaussian,
            ProfileConfig::Exponential => ProfileKind::Exponential,
            ProfileConfig::PoissonTail => ProfileKind::PoissonTail,
            ProfileConfig::OriginSingular => ProfileKind::OriginSingular,
        }
    }

    pub fn build(&self, dimension: usize, normalize: bool) -> Result<Profile> {
        let p = if normalize {
            Profile::normalized(self.kind(), dimension)?
        } else {
            Profile::new(self.kind(), dimension)?
        };
        Ok(p)
    }
}

impl FromStr for ProfileConfig {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        parse_inline(s)
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilyConfig {
    /// Dilation uniform on `(0, s_max/j]`, no shift.
    UniformVariance {
        #[serde(default = "one")]
        s_max: f64,
    },
    /// Dilation uniform on `(0, s_max/j]`, shift `c ε_j u` with `|u| = 1`.
    Coupled {
        #[serde(default = "one")]
        s_max: f64,
        #[serde(default = "one")]
        c: f64,
    },
    UniformBox {
        #[serde(default = "one")]
        s_max: f64,
        #[serde(default = "one")]
        y_radius: f64,
        #[serde(default = "one")]
        s_rate: f64,
        #[serde(default = "one")]
        y_rate: f64,
    },
    Tent {
        #[serde(default = "one")]
        alpha: f64,
        #[serde(default = "one")]
        beta: f64,
    },
    /// Pure translation with shift density `(1 − p)(1 − y)^{−p}` on `(0, length)`
    /// scaled by `j`.
    Translation {
        exponent: f64,
        #[serde(default = "one")]
        length: f64,
    },
    /// Dilations of a single point mass at `(s, y)`.
    Point { s: f64, y: Vec<f64> },
}

impl FamilyConfig {
    pub fn build(&self, dimension: usize, horizon: u32) -> Result<FamilySpec> {
        let kind = match self.clone() {
            FamilyConfig::UniformVariance { s_max } => FamilyKind::UniformVariance { s_max },
            FamilyConfig::Coupled { s_max, c } => FamilyKind::Coupled { s_max, c },
            FamilyConfig::UniformBox { s_max, y_radius, s_rate, y_rate } => FamilyKind::UniformBox {
                s_max,
                y_radius,
                s_rate,
                y_rate,
            },
            FamilyConfig::Tent { alpha, beta } => FamilyKind::Tent { alpha, beta },
            FamilyConfig::Translation { exponent, length } => FamilyKind::Translation { exponent, length },
            FamilyConfig::Point { s, y } => {
                if y.len() != dimension {
                    return Err(CliError::Config(format!(
                        "point family shift has {} coordinates, dimension is {dimension}",
                        y.len()
                    )));
                }
                let base = JointDistributionSpec::new(JointForm::Atoms(vec![Atom { s, y, weight: 1.0 }]), dimension)?;
                FamilyKind::SelfSimilar(Box::new(base))
            }
        };
        Ok(FamilySpec::new(kind, dimension, horizon)?)
    }
}

impl FromStr for FamilyConfig {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        parse_inline(s)
    }
}

/// Parses `kind:key=value,key=value` through the TOML deserializer, so the
/// inline form accepts exactly what a config table accepts.
fn parse_inline<T: for<'de> Deserialize<'de>>(s: &str) -> Result<T> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut doc = format!("kind = {:?}\n", kind.trim());
    let mut depth = 0i32;
    let mut start = 0;
    let bytes = rest.as_bytes();
    let mut fields = Vec::new();
    for (i, b) in bytes.iter().enumerate() {
        match b {
            b'[' => depth += 1,
            b']' => depth -= 1,
            b',' if depth == 0 => {
                fields.push(&rest[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    fields.push(&rest[start..]);
    for f in fields.into_iter().map(str::trim).filter(|f| !f.is_empty()) {
        let (k, v) = f
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected key=value, got {f:?}")))?;
        doc.push_str(&format!("{} = {}\n", k.trim(), v.trim()));
    }
    toml::from_str(&doc).map_err(|e| CliError::Config(format!("{s:?}: {}", e.message())))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resolution: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathConfig {
    Direct,
    #[default]
    Fft,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub experiment: ExperimentKind,
    pub seed: u64,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<String>,
    #[serde(default)]
    pub path: PathConfig,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_true")]
    pub normalize_profile: bool,
    #[serde(default)]
    pub plots: bool,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Horizons of the divergence search or the weak-type stability study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<u32>>,
    /// Grid resolutions compared by the a.e. experiment, one per axis each.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolutions: Option<Vec<usize>>,
    /// Horizon of the hypothesis check run by the a.e. experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis_horizon: Option<u32>,
    /// Shift exponent of the bounded control family in the divergence search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub profile: ProfileConfig,
    pub family: FamilyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
}

fn default_dimension() -> usize {
    1
}

fn default_horizon() -> u32 {
    64
}

fn default_samples() -> usize {
    100_000
}

fn default_true() -> bool {
    true
}

fn default_tolerance() -> f64 {
    1e-2
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    /// Checks that every name resolves and the sizes agree; building the
    /// profile and family catches invalid parameters early.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("name {:?} cannot be used as a directory", self.name));
        }
        if !(1..=2).contains(&self.dimension) {
            return bad(format!("dimension {} not in 1..=2", self.dimension));
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive".into());
        }
        if let Some(f) = &self.function {
            f.parse::<Catalog>().map_err(|_| CliError::Config(format!("unknown test function {f:?}")))?;
        }
        if let Some(g) = &self.grid {
            let n = self.dimension;
            if g.lower.len() != n || g.upper.len() != n || g.resolution.len() != n {
                return bad(format!("grid vectors must have {n} entries"));
            }
            if g.lower.iter().zip(&g.upper).any(|(a, b)| !(a < b)) || g.resolution.contains(&0) {
                return bad("grid box is empty".into());
            }
        }
        if self.path == PathConfig::MonteCarlo && self.samples < 1000 {
            return bad("monte-carlo path needs at least 1000 samples".into());
        }
        if let Some(h) = &self.horizons {
            if h.is_empty() || h[0] == 0 || h.windows(2).any(|w| w[0] >= w[1]) {
                return bad("horizons must be positive and increasing".into());
            }
        }
        if let Some(r) = &self.resolutions {
            if r.is_empty() || r.contains(&0) {
                return bad("resolutions must be positive".into());
            }
        }
        let needs_function = matches!(
            self.experiment,
            ExperimentKind::Convergence | ExperimentKind::AeConvergence | ExperimentKind::WeakTypeStability
        ) || matches!(self.check.as_deref(), Some("domination" | "weak-type"));
        if needs_function && (self.function.is_none() || self.grid.is_none()) {
            return bad(format!("{} needs `function` and `[grid]`", self.experiment.name()));
        }
        match self.experiment {
            ExperimentKind::Check => match self.check.as_deref() {
                Some(c) if CHECKS.contains(&c) => {}
                Some(c) => return bad(format!("unknown check {c:?}; expected one of {}", CHECKS.join(", "))),
                None => return bad("check experiment needs `check`".into()),
            },
            ExperimentKind::Divergence => {
                if self.dimension != 1 {
                    return bad("divergence search is one-dimensional".into());
                }
                if self.grid.is_none() {
                    return bad("divergence needs `[grid]`".into());
                }
            }
            _ => {}
        }
        self.profile()?;
        self.family()?;
        Ok(())
    }

    pub fn profile(&self) -> Result<Profile> {
        self.profile.build(self.dimension, self.normalize_profile)
    }

    /// The family up to the largest horizon any part of the experiment uses.
    pub fn family(&self) -> Result<FamilySpec> {
        let top = self.horizons.as_ref().and_then(|h| h.last().copied()).unwrap_or(0);
        self.family.build(self.dimension, self.horizon.max(top))
    }

    pub fn catalog(&self) -> Result<Catalog> {
        let name = self
            .function
            .as_deref()
            .ok_or_else(|| CliError::Config("no test function configured".into()))?;
        Ok(name.parse::<Catalog>()?)
    }

    pub fn grid(&self) -> Result<&GridConfig> {
        self.grid.as_ref().ok_or_else(|| CliError::Config("no grid configured".into()))
    }

    /// The mollification path for index `j`; Monte Carlo streams differ per `j`.
    pub fn path_for(&self, j: u32) -> MollifyPath {
        match self.path {
            PathConfig::Direct => MollifyPath::Direct,
            PathConfig::Fft => MollifyPath::FastConvolution,
            PathConfig::MonteCarlo => MollifyPath::MonteCarlo {
                samples: self.samples,
                seed: self.seed ^ (u64::from(j) << 32),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
name = "basic"
experiment = "convergence"
seed = 3
function = "cosine-packet"

[profile]
kind = "indicator"

[family]
kind = "uniform-variance"

[grid]
lower = [-4.0]
upper = [4.0]
resolution = [512]
"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse(BASIC).unwrap();
        assert_eq!(c.horizon, 64);
        assert_eq!(c.path, PathConfig::Fft);
        assert!(c.normalize_profile);
        assert_eq!(c.family, FamilyConfig::UniformVariance { s_max: 1.0 });
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::parse(BASIC).unwrap();
        let again = ExperimentConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn seed_is_mandatory() {
        let text = BASIC.replace("seed = 3\n", "");
        assert!(matches!(ExperimentConfig::parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_names_are_config_errors() {
        for text in [
            BASIC.replace("cosine-packet", "wavelet"),
            BASIC.replace("uniform-variance", "lognormal"),
            BASIC.replace("experiment = \"convergence\"", "experiment = \"check\"\ncheck = \"nope\""),
            BASIC.replace("resolution = [512]", "resolution = [512, 4]"),
        ] {
            assert!(matches!(ExperimentConfig::parse(&text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn inline_specs() {
        let f: FamilyConfig = "coupled:s_max=2,c=0.5".parse().unwrap();
        assert_eq!(f, FamilyConfig::Coupled { s_max: 2.0, c: 0.5 });
        let f: FamilyConfig = "point:s=0.5,y=[0.25, 0.0]".parse().unwrap();
        assert_eq!(f, FamilyConfig::Point { s: 0.5, y: vec![0.25, 0.0] });
        let p: ProfileConfig = "power-tail:delta=1".parse().unwrap();
        assert_eq!(p, ProfileConfig::PowerTail { delta: 1.0 });
        assert!("power-tail".parse::<ProfileConfig>().is_err());
    }
}
