use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use msf_core::eval::ExperimentConfig;
use msf_core::io::SyntheticConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Zsl,
    #[default]
    Gzsl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSection {
    #[serde(flatten)]
    pub generator: SyntheticConfig,
    /// Classes held out as unseen.
    pub n_unseen: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            generator: SyntheticConfig::default(),
            n_unseen: 4,
        }
    }
}

/// Input locations. Unset files default to the names `msf synth` writes
/// inside `dir`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub dir: Option<PathBuf>,
    pub skeleton_train: Option<PathBuf>,
    pub skeleton_test: Option<PathBuf>,
    pub text_lb: Option<PathBuf>,
    pub text_ad: Option<PathBuf>,
    pub text_md: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub classes: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub mode: Mode,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub synthetic: SynthSection,
    pub data: DataSection,
    pub experiment: ExperimentConfig,
    pub output: OutputSection,
    pub eval: EvalSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base: PathBuf,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig {
                base: PathBuf::from("."),
                ..RunConfig::default()
            });
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.synthetic.generator.validate()?;
        if self.synthetic.n_unseen == 0 || self.synthetic.n_unseen >= self.synthetic.generator.n_classes {
            bail!(
                "synthetic.n_unseen must be in 1..{}, got {}",
                self.synthetic.generator.n_classes,
                self.synthetic.n_unseen
            );
        }
        self.experiment.validate()?;
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.resolve(self.data.dir.as_deref().unwrap_or(Path::new("data")))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(self.output.dir.as_deref().unwrap_or(Path::new("run")))
    }

    pub fn data_file(&self, explicit: &Option<PathBuf>, default_name: &str) -> PathBuf {
        match explicit {
            Some(p) => self.resolve(p),
            None => self.data_dir().join(default_name),
        }
    }

    pub fn split_path(&self) -> PathBuf {
        self.data_file(&self.data.split, "split.txt")
    }
}

/// Fails with the path in the message when an input file is absent.
pub fn require(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("missing input file: {}", path.display());
    }
    Ok(())
}
