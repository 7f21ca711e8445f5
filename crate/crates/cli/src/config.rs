//! Experiment configuration: defaults, TOML files and command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use causal_core::OffspringDistribution;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Speed,
    Regen,
    Hyperbolicity,
    Resistance,
    Explore,
    Kbad,
    Boundary,
    Escape,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Speed,
        Experiment::Regen,
        Experiment::Hyperbolicity,
        Experiment::Resistance,
        Experiment::Explore,
        Experiment::Kbad,
        Experiment::Boundary,
        Experiment::Escape,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Speed => "speed",
            Experiment::Regen => "regen",
            Experiment::Hyperbolicity => "hyperbolicity",
            Experiment::Resistance => "resistance",
            Experiment::Explore => "explore",
            Experiment::Kbad => "kbad",
            Experiment::Boundary => "boundary",
            Experiment::Escape => "escape",
        }
    }

    /// Runs on the half-plane model, whose law must not allow zero children.
    pub fn needs_leafless(self) -> bool {
        matches!(self, Experiment::Speed | Experiment::Regen | Experiment::Explore | Experiment::Boundary | Experiment::Kbad)
    }

    fn defaults(self) -> Defaults {
        let generic = Defaults { mu: "0:1/4,2:3/4", depth: 12, steps: 10_000, trials: 100, k: 1 };
        match self {
            Experiment::Speed | Experiment::Regen => Defaults { mu: "1:1/2,2:1/2", ..generic },
            Experiment::Explore => Defaults { mu: "1:1/2,2:1/4,3:1/4", steps: 200, ..generic },
            Experiment::Boundary => Defaults { mu: "1:1/2,2:1/2", depth: 10, steps: 6000, ..generic },
            Experiment::Kbad => Defaults { mu: "1:1/2,3:1/2", trials: 10_000, ..generic },
            Experiment::Hyperbolicity => Defaults { depth: 8, steps: 200, trials: 10, ..generic },
            Experiment::Resistance => Defaults { depth: 30, trials: 20, ..generic },
            Experiment::Escape => Defaults { depth: 100, trials: 1000, k: 7, ..generic },
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hyper" => Ok(Experiment::Hyperbolicity),
            "resist" => Ok(Experiment::Resistance),
            _ => Experiment::ALL
                .into_iter()
                .find(|e| e.name() == s)
                .ok_or_else(|| CliError::ConfigInvalid(format!("unknown experiment `{s}`"))),
        }
    }
}

struct Defaults {
    mu: &'static str,
    depth: usize,
    steps: usize,
    trials: u64,
    k: usize,
}

/// Optional settings, as read from a TOML file or from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub mu: Option<String>,
    pub depth: Option<usize>,
    pub steps: Option<usize>,
    pub trials: Option<u64>,
    pub k: Option<usize>,
    pub lambda: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::ConfigInvalid(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merge(self, over: Overrides) -> Overrides {
        Overrides {
            mu: over.mu.or(self.mu),
            depth: over.depth.or(self.depth),
            steps: over.steps.or(self.steps),
            trials: over.trials.or(self.trials),
            k: over.k.or(self.k),
            lambda: over.lambda.or(self.lambda),
            seed: over.seed.or(self.seed),
            out: over.out.or(self.out),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Offspring law in `count:prob` text form.
    pub offspring: String,
    pub depth_cap: usize,
    pub n_steps: usize,
    pub trials: u64,
    pub k: usize,
    pub lambda: f64,
    pub master_seed: u64,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// Fill unset fields with the experiment defaults and validate.
    pub fn resolve(experiment: Experiment, o: Overrides) -> Result<Self> {
        let d = experiment.defaults();
        let cfg = ExperimentConfig {
            experiment,
            offspring: o.mu.unwrap_or_else(|| d.mu.to_string()),
            depth_cap: o.depth.unwrap_or(d.depth),
            n_steps: o.steps.unwrap_or(d.steps),
            trials: o.trials.unwrap_or(d.trials),
            k: o.k.unwrap_or(d.k),
            lambda: o.lambda.unwrap_or(1.0),
            master_seed: o.seed.unwrap_or(0),
            out_dir: o.out.unwrap_or_else(|| PathBuf::from("out")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn law(&self) -> Result<OffspringDistribution> {
        let d: OffspringDistribution =
            self.offspring.parse().map_err(|e| CliError::ConfigInvalid(format!("--mu: {e}")))?;
        if !d.is_supercritical() {
            return Err(CliError::ConfigInvalid(format!("--mu: mean {} is not above 1", d.mean())));
        }
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::ConfigInvalid(m));
        let d = self.law()?;
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.depth_cap == 0 {
            return bad("depth must be positive".into());
        }
        if self.n_steps == 0 {
            return bad("steps must be positive".into());
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.experiment.needs_leafless() && d.weight(0) > 0.0 {
            return bad(format!("{} needs a law with no weight on 0 children", self.experiment));
        }
        match self.experiment {
            Experiment::Kbad | Experiment::Explore if self.k == 0 => bad("k must be positive".into()),
            Experiment::Resistance if self.depth_cap < 2 => bad("resistance needs depth >= 2".into()),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = Overrides::from_toml("mu = \"2:1\"\ntrials = 7\nseed = 3\n").unwrap();
        let flags = Overrides { trials: Some(9), ..Default::default() };
        let cfg = ExperimentConfig::resolve(Experiment::Speed, file.merge(flags)).unwrap();
        assert_eq!(cfg.trials, 9);
        assert_eq!(cfg.master_seed, 3);
        assert_eq!(cfg.offspring, "2:1");
    }

    #[test]
    fn rejects_bad_values() {
        let zero = Overrides { trials: Some(0), ..Default::default() };
        assert!(matches!(ExperimentConfig::resolve(Experiment::Speed, zero), Err(CliError::ConfigInvalid(_))));
        let leafy = Overrides { mu: Some("0:0.25,2:0.75".into()), ..Default::default() };
        assert!(ExperimentConfig::resolve(Experiment::Speed, leafy).is_err());
        let sub = Overrides { mu: Some("0:0.5,1:0.5".into()), ..Default::default() };
        assert!(ExperimentConfig::resolve(Experiment::Escape, sub).is_err());
        assert!(Overrides::from_toml("colour = 3").is_err());
    }

    #[test]
    fn defaults_are_valid() {
        for e in Experiment::ALL {
            ExperimentConfig::resolve(e, Overrides::default()).unwrap();
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
    }
}
