//! TOML run configuration.
//!
//! ```toml
//! seed = 7                     # required
//! output_dir = "out"           # default "out"
//!
//! [data]
//! edgelist = "edges.tsv"       # or rollcall_members + rollcall_votes
//! labels = "labels.tsv"        # optional
//! ideology = "ideology.tsv"    # optional
//! min_degree = 1
//! negative_relations = []
//! exclude_from_target = []
//!
//! [data.rollcall]              # optional filters for roll-call input
//! congress = 105
//! chamber = "House"
//! unknown_cast = "reject"      # reject | abstain | skip
//!
//! [model]                      # see ModelConfig
//! [train]                      # see TrainConfig; `seed` lives at the top
//! [train.pi]
//! [train.ablations]
//! [analysis]
//! k_axes = 2
//! ```
//!
//! Unknown keys are errors. Relative paths resolve against the directory of
//! the config file, and every referenced input must exist.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::rollcall::{RollcallOptions, UnknownCast};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::trainer::TrainConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RollcallConfig {
    pub congress: Option<u32>,
    pub chamber: Option<String>,
    pub unknown_cast: UnknownCast,
}

impl RollcallConfig {
    pub fn options(&self) -> RollcallOptions {
        RollcallOptions {
            congress: self.congress,
            chamber: self.chamber.clone(),
            unknown_cast: self.unknown_cast,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub edgelist: Option<PathBuf>,
    pub rollcall_members: Option<PathBuf>,
    pub rollcall_votes: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub ideology: Option<PathBuf>,
    pub min_degree: usize,
    pub negative_relations: Vec<String>,
    pub exclude_from_target: Vec<String>,
    pub rollcall: RollcallConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            edgelist: None,
            rollcall_members: None,
            rollcall_votes: None,
            labels: None,
            ideology: None,
            min_degree: 1,
            negative_relations: Vec::new(),
            exclude_from_target: Vec::new(),
            rollcall: RollcallConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub k_axes: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { k_axes: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// A config over an edge list with every other setting at its default.
    pub fn for_edgelist(edgelist: PathBuf, labels: Option<PathBuf>, seed: u64) -> Self {
        let train = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        Self {
            seed,
            output_dir: default_output(),
            data: DataConfig {
                edgelist: Some(edgelist),
                labels,
                ..Default::default()
            },
            model: ModelConfig::default(),
            train,
            analysis: AnalysisConfig::default(),
        }
    }

    /// Parses and validates; `base` anchors relative paths.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if table
            .get("train")
            .and_then(|t| t.as_table())
            .is_some_and(|t| t.contains_key("seed"))
        {
            return Err(Error::Config(
                "`train.seed` is not allowed; set the top-level `seed`".into(),
            ));
        }
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.train.seed = cfg.seed;
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for p in [
            &mut self.data.edgelist,
            &mut self.data.rollcall_members,
            &mut self.data.rollcall_votes,
            &mut self.data.labels,
            &mut self.data.ideology,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        let d = &self.data;
        match (&d.edgelist, &d.rollcall_members, &d.rollcall_votes) {
            (Some(_), None, None) | (None, Some(_), Some(_)) => {}
            _ => {
                return Err(Error::Config(
                    "set either data.edgelist or both data.rollcall_members and data.rollcall_votes"
                        .into(),
                ))
            }
        }
        for p in [
            &d.edgelist,
            &d.rollcall_members,
            &d.rollcall_votes,
            &d.labels,
            &d.ideology,
        ]
        .into_iter()
        .flatten()
        {
            if !p.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", p.display())));
            }
        }
        if self.analysis.k_axes != 2 {
            return Err(Error::Config(format!(
                "analysis.k_axes must be 2 for binary polarity, got {}",
                self.analysis.k_axes
            )));
        }
        if self.analysis.k_axes > self.model.latent_dim {
            return Err(Error::Config("analysis.k_axes exceeds model.latent_dim".into()));
        }
        Ok(())
    }

    /// Renders the config as TOML.
    pub fn to_toml(&self) -> String {
        let mut value = toml::Value::try_from(self).expect("config serializes");
        if let Some(train) = value.get_mut("train").and_then(|t| t.as_table_mut()) {
            train.remove("seed");
        }
        toml::to_string(&value).expect("config serializes")
    }
}
