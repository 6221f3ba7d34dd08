//! Settings resolution. Command-line flags win over environment variables
//! (clap reads both), which win over the TOML config file, which wins over
//! built-in defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use serde::Deserialize;

use fsa_core::fuzzy::{default_registry, Defuzzifier, FuzzyEngine};
use fsa_core::rules::{self, default_rule_base, has_errors, parse_rules};
use fsa_core::scenario::{self, load_scenario, ScenarioDefinition};
use fsa_core::scoring::{BreakerConfig, ClassifierClient, Scorer, ScoringConfig};
use fsa_core::supervisor::{Supervisor, SupervisorConfig};

use crate::classifier::HttpTransport;

pub const DEFAULT_PORT: u16 = 8080;

/// Contents of the optional config file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data_dir: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub scenarios: Option<PathBuf>,
    pub port: Option<u16>,
    pub defuzzifier: Option<String>,
    pub hint_cooldown: Option<usize>,
    #[serde(default)]
    pub classifier: ClassifierFile,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierFile {
    pub url: Option<String>,
    pub timeout_ms: Option<u64>,
    pub breaker_threshold: Option<u32>,
    pub breaker_cooldown_secs: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
    }
}

/// Values supplied on the command line or through the environment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub data_dir: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub scenarios: Option<PathBuf>,
    pub classifier_url: Option<String>,
    pub classifier_timeout_ms: Option<u64>,
    pub port: Option<u16>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSettings {
    pub url: String,
    pub timeout: Duration,
    pub breaker: BreakerConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub data_dir: PathBuf,
    /// `None` uses the bundled rule file.
    pub rules: Option<PathBuf>,
    /// Directory of scenario JSON files; `None` uses the bundled ones.
    pub scenarios: Option<PathBuf>,
    pub classifier: Option<ClassifierSettings>,
    pub port: u16,
    pub defuzzifier: Defuzzifier,
    pub hint_cooldown: Option<usize>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings::resolve(Overrides::default(), FileConfig::default()).expect("defaults resolve")
    }
}

impl Settings {
    pub fn resolve(over: Overrides, file: FileConfig) -> anyhow::Result<Self> {
        let url = over.classifier_url.or(file.classifier.url).filter(|u| !u.trim().is_empty());
        let classifier = url.map(|url| ClassifierSettings {
            url,
            timeout: Duration::from_millis(
                over.classifier_timeout_ms
                    .or(file.classifier.timeout_ms)
                    .unwrap_or(ClassifierClient::DEFAULT_TIMEOUT.as_millis() as u64),
            ),
            breaker: BreakerConfig {
                threshold: file.classifier.breaker_threshold.unwrap_or(BreakerConfig::default().threshold),
                cooldown: file
                    .classifier
                    .breaker_cooldown_secs
                    .map_or(BreakerConfig::default().cooldown, Duration::from_secs),
            },
        });
        let defuzzifier = match file.defuzzifier {
            Some(name) => name.parse().map_err(|e| anyhow::anyhow!("config key `defuzzifier`: {e}"))?,
            None => Defuzzifier::default(),
        };
        Ok(Settings {
            data_dir: over.data_dir.or(file.data_dir).unwrap_or_else(|| PathBuf::from("data")),
            rules: over.rules.or(file.rules),
            scenarios: over.scenarios.or(file.scenarios),
            classifier,
            port: over.port.or(file.port).unwrap_or(DEFAULT_PORT),
            defuzzifier,
            hint_cooldown: file.hint_cooldown,
        })
    }

    pub fn engine(&self) -> anyhow::Result<FuzzyEngine> {
        let rules = match &self.rules {
            None => default_rule_base(),
            Some(path) => load_rules(path)?,
        };
        let engine = FuzzyEngine::new(rules, default_registry())?;
        Ok(engine.with_defuzzifier(self.defuzzifier))
    }

    pub fn scenarios(&self) -> anyhow::Result<BTreeMap<String, Arc<ScenarioDefinition>>> {
        let list = match &self.scenarios {
            None => scenario::bundled(),
            Some(dir) => load_scenario_dir(dir)?,
        };
        let mut map = BTreeMap::new();
        for sc in list {
            if map.insert(sc.id.clone(), Arc::new(sc)).is_some() {
                bail!("two scenarios share an id");
            }
        }
        Ok(map)
    }

    /// Supervisor with the configured engine, plus the external classifier
    /// when `with_classifier` is set and a URL is configured.
    pub fn supervisor(&self, with_classifier: bool) -> anyhow::Result<Supervisor> {
        let mut scorer = Scorer::new(ScoringConfig::default());
        if let (true, Some(c)) = (with_classifier, &self.classifier) {
            scorer = scorer.with_classifier(ClassifierClient::new(HttpTransport::new(&c.url), c.timeout, c.breaker));
        }
        let config = SupervisorConfig { hint_cooldown: self.hint_cooldown, ..SupervisorConfig::default() };
        Ok(Supervisor::new(self.engine()?, scorer).with_config(config))
    }
}

pub fn load_rules(path: &Path) -> anyhow::Result<rules::RuleBase> {
    let text = fs::read_to_string(path).with_context(|| format!("reading rule file {}", path.display()))?;
    let rb = parse_rules(&text).map_err(|diags| {
        let lines: Vec<String> = diags.iter().map(ToString::to_string).collect();
        anyhow::anyhow!("{}:\n{}", path.display(), lines.join("\n"))
    })?;
    let diags = rules::validate(&rb, &default_registry());
    if has_errors(&diags) {
        let lines: Vec<String> = diags.iter().map(ToString::to_string).collect();
        bail!("{}:\n{}", path.display(), lines.join("\n"));
    }
    Ok(rb)
}

fn load_scenario_dir(dir: &Path) -> anyhow::Result<Vec<ScenarioDefinition>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading scenario directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        out.push(load_scenario(&text).with_context(|| format!("loading {}", path.display()))?);
    }
    if out.is_empty() {
        bail!("no scenario files in {}", dir.display());
    }
    Ok(out)
}
