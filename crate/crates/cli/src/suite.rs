//! Directories of configurations run as one suite.

use std::fs;
use std::path::{Path, PathBuf};

use randmoll_core::Verdict;

use crate::config::{ExperimentConfig, ExperimentKind, FamilyConfig, GridConfig, PathConfig, ProfileConfig};
use crate::error::{CliError, Result};
use crate::experiments;

#[derive(Debug)]
pub struct SuiteEntry {
    pub file: PathBuf,
    pub name: String,
    /// `(status, verdict)`, or the error that stopped the experiment.
    pub outcome: std::result::Result<(Verdict, String), String>,
}

impl SuiteEntry {
    pub fn failed(&self) -> bool {
        !matches!(self.outcome, Ok((Verdict::Pass | Verdict::Info, _)))
    }
}

#[derive(Debug, Default)]
pub struct SuiteOutcome {
    pub entries: Vec<SuiteEntry>,
}

impl SuiteOutcome {
    pub fn any_failed(&self) -> bool {
        self.entries.iter().any(SuiteEntry::failed)
    }

    pub fn exit_code(&self) -> i32 {
        i32::from(self.any_failed())
    }
}

/// `*.toml` files of `dir`, sorted by name.
pub fn config_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in rd {
        let p = entry.map_err(|e| CliError::io(dir, e))?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == "toml") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

/// Runs every configuration in `dir`, writing each report to
/// `out/<name>`. A failing or erroring experiment does not stop the rest.
pub fn run_suite(dir: &Path, out: &Path) -> Result<SuiteOutcome> {
    let files = config_files(dir)?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut outcome = SuiteOutcome::default();
    for file in files {
        let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let result = fs::read_to_string(&file)
            .map_err(|e| CliError::io(&file, e))
            .and_then(|text| ExperimentConfig::parse(&text))
            .and_then(|cfg| {
                let rep = experiments::run(&cfg)?;
                rep.write(&out.join(&cfg.name), cfg.plots)?;
                Ok((cfg.name.clone(), rep))
            });
        let entry = match result {
            Ok((name, rep)) => SuiteEntry {
                file,
                name,
                outcome: Ok((rep.status, rep.verdict)),
            },
            Err(e) => SuiteEntry {
                file,
                name: stem,
                outcome: Err(e.to_string()),
            },
        };
        outcome.entries.push(entry);
    }
    Ok(outcome)
}

/// Writes the default suite into `dir` as `NN-<name>.toml`.
pub fn init_suite(dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    for (k, cfg) in default_suite().iter().enumerate() {
        let p = dir.join(format!("{:02}-{}.toml", k + 1, cfg.name));
        fs::write(&p, cfg.to_toml()).map_err(|e| CliError::io(&p, e))?;
        written.push(p);
    }
    Ok(written)
}

fn grid(lo: f64, hi: f64, res: usize) -> Option<GridConfig> {
    Some(GridConfig {
        lower: vec![lo],
        upper: vec![hi],
        resolution: vec![res],
    })
}

fn base(name: &str, experiment: ExperimentKind, profile: ProfileConfig, family: FamilyConfig) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        experiment,
        seed: 20_240_601,
        dimension: 1,
        horizon: 64,
        function: None,
        check: None,
        path: PathConfig::Fft,
        samples: 100_000,
        normalize_profile: true,
        plots: true,
        tolerance: 1e-2,
        horizons: None,
        resolutions: None,
        hypothesis_horizon: None,
        control_exponent: None,
        output: None,
        profile,
        family,
        grid: None,
    }
}

fn check(name: &str, check: &str, profile: ProfileConfig, family: FamilyConfig, horizon: u32) -> ExperimentConfig {
    let mut c = base(name, ExperimentKind::Check, profile, family);
    c.check = Some(check.into());
    c.horizon = horizon;
    c
}

/// Twelve configurations: the three convergence experiments, the divergence
/// search, and every hypothesis check the results rest on.
pub fn default_suite() -> Vec<ExperimentConfig> {
    use ExperimentKind as E;
    use FamilyConfig as F;
    use ProfileConfig as P;
    let uniform = F::UniformVariance { s_max: 1.0 };
    let tent = F::Tent { alpha: 1.0, beta: 1.0 };

    let mut conv = base("convergence-uniform", E::Convergence, P::Indicator, uniform.clone());
    conv.function = Some("cosine-packet".into());
    conv.grid = grid(-6.0, 6.0, 2048);

    let mut coupled = conv.clone();
    coupled.name = "convergence-coupled".into();
    coupled.family = F::Coupled { s_max: 1.0, c: 1.0 };

    let mut step = base("ae-step", E::AeConvergence, P::Indicator, tent.clone());
    step.function = Some("step".into());
    step.grid = grid(-5.0, 5.0, 1024);
    step.resolutions = Some(vec![1024, 2048]);

    let mut spike = base("ae-spike", E::AeConvergence, P::Gaussian, uniform.clone());
    spike.function = Some("spike".into());
    spike.grid = grid(-5.0, 5.0, 1024);
    spike.resolutions = Some(vec![1024, 2048]);
    spike.hypothesis_horizon = Some(4);

    let mut div = base(
        "divergence",
        E::Divergence,
        P::Indicator,
        F::Translation {
            exponent: 0.5,
            length: 1.0,
        },
    );
    div.function = Some("spike".into());
    div.grid = grid(-1.0, 2.0, 1 << 14);
    div.control_exponent = Some(0.0);

    let vague = check("check-vague", "vague", P::Indicator, F::Coupled { s_max: 1.0, c: 1.0 }, 64);
    let density = check("check-density", "density", P::Indicator, tent.clone(), 32);
    let gradient = check("check-gradient", "gradient", P::PowerTail { delta: 1.0 }, uniform.clone(), 8);
    let zo = check("check-zo", "zo", P::PowerTail { delta: 1.0 }, uniform, 8);
    let mut dyadic = check("check-dyadic", "dyadic", P::Exponential, tent.clone(), 8);
    dyadic.normalize_profile = false;

    let mut dom = check("domination-spike", "domination", P::Indicator, tent.clone(), 32);
    dom.function = Some("spike".into());
    dom.grid = grid(-4.0, 4.0, 1024);

    let mut weak = base("weak-type-spike", E::WeakTypeStability, P::Indicator, tent);
    weak.function = Some("spike".into());
    weak.grid = grid(-4.0, 4.0, 1024);
    weak.horizons = Some(experiments::WEAK_TYPE_HORIZONS.to_vec());

    vec![conv, coupled, step, spike, div, vague, density, gradient, zo, dyadic, dom, weak]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_is_valid_and_named_uniquely() {
        let s = default_suite();
        assert_eq!(s.len(), 12);
        let mut names: Vec<&str> = s.iter().map(|c| c.name.as_str()).collect();
        for c in &s {
            c.validate().unwrap();
            assert_eq!(&ExperimentConfig::parse(&c.to_toml()).unwrap(), c);
        }
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 12);
    }

    #[test]
    fn empty_directory_gives_empty_suite() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let r = run_suite(dir.path(), &out).unwrap();
        assert!(r.entries.is_empty());
        assert_eq!(r.exit_code(), 0);
        assert_eq!(fs::read_dir(&out).unwrap().count(), 0);
    }

    #[test]
    fn broken_config_is_isolated() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.toml"), "name = \"a\"\n").unwrap();
        let mut ok = default_suite().remove(7);
        ok.plots = false;
        fs::write(dir.path().join("b.toml"), ok.to_toml()).unwrap();
        let out = dir.path().join("out");
        let r = run_suite(dir.path(), &out).unwrap();
        assert_eq!(r.entries.len(), 2);
        assert!(r.entries[0].outcome.is_err());
        assert!(r.entries[1].outcome.is_ok());
        assert!(out.join(&ok.name).join("report.txt").exists());
        assert_eq!(r.exit_code(), 1);
    }
}
