//! TOML experiment configuration.
//!
//! ```toml
//! output_dir = "out"
//!
//! [source]
//! path = "clip.raw"          # raw file with sidecar, or PNG directory
//! format = "raw"             # optional: raw | image-dir
//!
//! [end]
//! order = "key-frames-first" # or redundancy-first
//! eliminate_redundant = true
//!
//! [end.selection]
//! mode = "fixed"             # or adaptive
//! k = 15
//! w = 13
//! include_endpoints = false
//! # d_min = 15
//! # max_interior = 1
//!
//! [end.redundancy]
//! tau_int = 0.5
//! tau_mot = 15.0
//! m = 2
//!
//! [codec]
//! mode = "raw"               # or external
//! video.encode = "..."
//! video.decode = "..."
//! image.encode = "..."
//! image.decode = "..."
//!
//! [reconstructor]
//! kind = "classical"         # or external
//! command = "..."
//!
//! [eval]
//! exclude_keys = true
//! exclude_redundant = false
//! ```
//!
//! Overrides use dotted keys, e.g. `end.selection.k=25`. Values of string
//! settings are taken verbatim; others are parsed as TOML literals and fall
//! back to a string.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::codec::{CodecAdapter, ExternalCodec};
use crate::endcloud::EndConfig;
use crate::error::{Error, Result};
use crate::eval::EvalFlags;
use crate::io::SequenceFormat;
use crate::reconstruct::{ClassicalReconstructor, ExternalReconstructor, Reconstructor};

/// Name of the captured config inside an output directory.
pub const CAPTURED_CONFIG: &str = "config.toml";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub path: PathBuf,
    pub format: Option<SequenceFormat>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodecMode {
    #[default]
    Raw,
    External,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandPair {
    #[serde(default)]
    pub encode: String,
    #[serde(default)]
    pub decode: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecConfig {
    pub mode: CodecMode,
    pub video: CommandPair,
    pub image: CommandPair,
}

impl CodecConfig {
    pub fn adapter(&self) -> Result<CodecAdapter> {
        match self.mode {
            CodecMode::Raw => Ok(CodecAdapter::Raw),
            CodecMode::External => {
                let ext = ExternalCodec {
                    video_encode: self.video.encode.clone(),
                    video_decode: self.video.decode.clone(),
                    image_encode: self.image.encode.clone(),
                    image_decode: self.image.decode.clone(),
                };
                for (k, v) in [
                    ("codec.video.encode", &ext.video_encode),
                    ("codec.video.decode", &ext.video_decode),
                    ("codec.image.encode", &ext.image_encode),
                    ("codec.image.decode", &ext.image_decode),
                ] {
                    if v.trim().is_empty() {
                        return Err(Error::InvalidArgument(format!("{k} is required in external mode")));
                    }
                }
                Ok(CodecAdapter::External(ext))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReconstructorKind {
    #[default]
    Classical,
    External,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructorConfig {
    pub kind: ReconstructorKind,
    pub command: String,
}

impl ReconstructorConfig {
    pub fn build(&self) -> Result<Arc<dyn Reconstructor>> {
        match self.kind {
            ReconstructorKind::Classical => Ok(Arc::new(ClassicalReconstructor)),
            ReconstructorKind::External if self.command.trim().is_empty() => Err(Error::InvalidArgument(
                "reconstructor.command is required for the external reconstructor".into(),
            )),
            ReconstructorKind::External => Ok(Arc::new(ExternalReconstructor::new(self.command.clone()))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: SourceConfig,
    pub end: EndConfig,
    pub codec: CodecConfig,
    pub reconstructor: ReconstructorConfig,
    pub eval: EvalFlags,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            source: SourceConfig::default(),
            end: EndConfig::default(),
            codec: CodecConfig::default(),
            reconstructor: ReconstructorConfig::default(),
            eval: EvalFlags::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

fn lookup<'a>(table: &'a toml::Table, key: &str) -> Option<&'a toml::Value> {
    let mut parts = key.split('.');
    let mut cur = table.get(parts.next()?)?;
    for part in parts {
        cur = cur.as_table()?.get(part)?;
    }
    Some(cur)
}

/// Parse an override value; keys whose default is a string always take the
/// raw text.
fn parse_literal(key: &str, raw: &str) -> toml::Value {
    let defaults = toml::Table::try_from(ExperimentConfig::default()).expect("defaults serialize");
    if matches!(lookup(&defaults, key), Some(toml::Value::String(_))) {
        return toml::Value::String(raw.to_string());
    }
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts = key.split('.').peekable();
    let mut cur = table;
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(Error::InvalidArgument(format!("bad override key `{key}`")));
        }
        if parts.peek().is_none() {
            cur.insert(part.to_string(), value);
            return Ok(());
        }
        let next = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = next
            .as_table_mut()
            .ok_or_else(|| Error::InvalidArgument(format!("`{part}` in `{key}` is not a table")))?;
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &[])
    }

    /// Parse `text` and apply `key=value` overrides before validation.
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("override `{o}` is not key=value")))?;
            set_dotted(&mut table, k.trim(), parse_literal(k.trim(), v.trim()))?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_with(&text, overrides)?;
        if let Some(base) = path.parent() {
            if cfg.source.path.is_relative() && !cfg.source.path.as_os_str().is_empty() {
                cfg.source.path = base.join(&cfg.source.path);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.end.selection.validate()?;
        self.end.redundancy.validate()?;
        self.codec.adapter()?;
        self.reconstructor.build()?;
        if self.eval.exclude_redundant && !self.eval.exclude_keys {
            return Err(Error::InvalidArgument(
                "eval.exclude_redundant requires eval.exclude_keys".into(),
            ));
        }
        Ok(())
    }

    /// Check that referenced inputs exist.
    pub fn check_paths(&self) -> Result<()> {
        if !self.source.path.exists() {
            return Err(Error::InvalidArgument(format!(
                "source.path {} does not exist",
                self.source.path.display()
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Write the effective config into `dir` so the run can be repeated.
    /// The source path is stored absolute.
    pub fn capture(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut cfg = self.clone();
        if !cfg.source.path.as_os_str().is_empty() {
            cfg.source.path = std::path::absolute(&cfg.source.path).map_err(|e| Error::io(&self.source.path, e))?;
        }
        let path = dir.join(CAPTURED_CONFIG);
        fs::write(&path, cfg.to_toml()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyframe::SelectionMode;

    #[test]
    fn defaults_from_empty() {
        let c = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn overrides_apply() {
        let c = ExperimentConfig::from_toml_with(
            "[end.selection]\nk = 15\n",
            &["end.selection.k=33".into(), "end.selection.mode=adaptive".into()],
        )
        .unwrap();
        assert_eq!(c.end.selection.k, 33);
        assert_eq!(c.end.selection.mode, SelectionMode::Adaptive);
        let c = ExperimentConfig::from_toml_with(
            "",
            &["codec.mode=external".into(), "codec.video.encode=true".into(), "codec.video.decode=1".into(),
              "codec.image.encode=x".into(), "codec.image.decode=y".into()],
        )
        .unwrap();
        assert_eq!(c.codec.video.encode, "true");
        assert_eq!(c.codec.video.decode, "1");
    }

    #[test]
    fn captured_config_round_trips() {
        let mut c = ExperimentConfig::default();
        c.end.selection.k = 41;
        c.codec.mode = CodecMode::External;
        c.codec.video = CommandPair { encode: "a {input}".into(), decode: "b".into() };
        c.codec.image = CommandPair { encode: "c".into(), decode: "d".into() };
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
        assert!(ExperimentConfig::from_toml("[codec]\nmode = \"external\"").is_err());
        assert!(ExperimentConfig::from_toml("[end.selection]\nk = 1").is_err());
        assert!(ExperimentConfig::from_toml("[reconstructor]\nkind = \"external\"").is_err());
    }
}
