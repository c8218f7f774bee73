//! Stage directories and their hash-chained manifests.
//!
//! Every stage writes `<workdir>/<stage>/manifest.json` listing the SHA-256
//! of each upstream manifest it consumed. Loading a stage re-hashes those
//! upstream files, so an artifact built from inputs that have since been
//! regenerated is reported as stale instead of being silently reused.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use scarmap_core::io::{file_sha256, read_json, write_json};
use scarmap_core::substrate::FieldKind;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::Invalid;

pub const STAGE_KIND: &str = "scarmap_stage";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Substrates,
    Sims,
    Egm,
    Dataset,
    Eval,
    Surrogate,
}

impl Stage {
    pub fn dir_name(self) -> &'static str {
        match self {
            Stage::Substrates => "substrates",
            Stage::Sims => "sims",
            Stage::Egm => "egm",
            Stage::Dataset => "dataset",
            Stage::Eval => "eval",
            Stage::Surrogate => "surrogate",
        }
    }

    /// The subcommand that produces this stage.
    pub fn command(self) -> &'static str {
        match self {
            Stage::Substrates => "gen",
            Stage::Sims => "simulate",
            Stage::Egm => "egm",
            Stage::Dataset => "dataset",
            Stage::Eval => "eval",
            Stage::Surrogate => "surrogate",
        }
    }

    fn from_dir_name(s: &str) -> Option<Self> {
        [
            Stage::Substrates,
            Stage::Sims,
            Stage::Egm,
            Stage::Dataset,
            Stage::Eval,
            Stage::Surrogate,
        ]
        .into_iter()
        .find(|st| st.dir_name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub sim_id: u32,
    pub kind: FieldKind,
    pub seed: u64,
    /// Per-simulation artifact manifest, relative to the stage directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub info: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub kind: String,
    pub stage: String,
    pub version: u32,
    pub seed: u64,
    pub config: Value,
    pub upstream: BTreeMap<String, String>,
    pub entries: Vec<Entry>,
}

impl StageManifest {
    pub fn new(stage: Stage, seed: u64, config: Value) -> Self {
        Self {
            kind: STAGE_KIND.into(),
            stage: stage.dir_name().into(),
            version: 1,
            seed,
            config,
            upstream: BTreeMap::new(),
            entries: Vec::new(),
        }
    }
}

pub struct Workspace {
    root: PathBuf,
    force: bool,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>, force: bool) -> Self {
        Self {
            root: root.into(),
            force,
        }
    }

    pub fn dir(&self, stage: Stage) -> PathBuf {
        self.root.join(stage.dir_name())
    }

    pub fn manifest_path(&self, stage: Stage) -> PathBuf {
        self.dir(stage).join("manifest.json")
    }

    /// Creates an empty output directory for `stage`. Existing outputs are an
    /// error unless `--force` was given, in which case they are removed.
    pub fn prepare_output(&self, stage: Stage) -> Result<PathBuf> {
        let dir = self.dir(stage);
        if dir.exists() {
            let populated = std::fs::read_dir(&dir)
                .with_context(|| format!("reading {}", dir.display()))?
                .next()
                .is_some();
            if populated && !self.force {
                return Err(Invalid(format!(
                    "{} already exists; pass --force to overwrite it",
                    dir.display()
                ))
                .into());
            }
            if populated {
                std::fs::remove_dir_all(&dir)
                    .with_context(|| format!("removing {}", dir.display()))?;
            }
        }
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    /// Hash of a stage manifest after checking that its own upstream chain
    /// is current.
    pub fn verified_hash(&self, stage: Stage) -> Result<String> {
        let path = self.require(stage)?;
        self.verify_chain(stage)?;
        Ok(file_sha256(&path)?)
    }

    pub fn load(&self, stage: Stage) -> Result<(StageManifest, String)> {
        let hash = self.verified_hash(stage)?;
        let m: StageManifest = read_json(self.manifest_path(stage))?;
        if m.kind != STAGE_KIND || m.stage != stage.dir_name() {
            return Err(Invalid(format!(
                "{} is not a {} stage manifest",
                self.manifest_path(stage).display(),
                stage.dir_name()
            ))
            .into());
        }
        Ok((m, hash))
    }

    pub fn save(&self, stage: Stage, m: &StageManifest) -> Result<()> {
        write_json(self.manifest_path(stage), m)?;
        Ok(())
    }

    fn require(&self, stage: Stage) -> Result<PathBuf> {
        let path = self.manifest_path(stage);
        if !path.exists() {
            return Err(Invalid(format!(
                "no {} manifest at {}; run `scarmap {}` first",
                stage.dir_name(),
                path.display(),
                stage.command()
            ))
            .into());
        }
        Ok(path)
    }

    fn verify_chain(&self, stage: Stage) -> Result<()> {
        let path = self.require(stage)?;
        let raw: Value = read_json(&path)?;
        let Some(up) = raw.get("upstream").and_then(Value::as_object) else {
            return Ok(());
        };
        for (name, recorded) in up {
            let up_stage = Stage::from_dir_name(name).ok_or_else(|| {
                Invalid(format!(
                    "{}: unknown upstream stage `{name}`",
                    path.display()
                ))
            })?;
            let current = file_sha256(self.require(up_stage)?)?;
            if Some(current.as_str()) != recorded.as_str() {
                return Err(Invalid(format!(
                    "{} outputs are stale: {} changed after they were built; rerun `scarmap {}`",
                    stage.dir_name(),
                    self.manifest_path(up_stage).display(),
                    stage.command()
                ))
                .into());
            }
            self.verify_chain(up_stage)?;
        }
        Ok(())
    }
}

/// `sim_00042`
pub fn sim_stem(sim_id: u32) -> String {
    format!("sim_{sim_id:05}")
}

pub fn entry_file(dir: &Path, e: &Entry, stage: Stage) -> Result<PathBuf> {
    e.file.as_ref().map(|f| dir.join(f)).ok_or_else(|| {
        Invalid(format!(
            "simulation {} has no {} artifact",
            e.sim_id,
            stage.dir_name()
        ))
        .into()
    })
}
