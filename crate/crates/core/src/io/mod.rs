//! On-disk formats and the synthetic benchmark generator.

pub mod checkpoint;
pub mod feature_file;
pub mod manifest;
pub mod synthetic;

use std::io::Write;
use std::path::Path;

use crate::error::{MsfError, Result};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, Checkpoint, CheckpointHeader};
pub use feature_file::{read_features, write_features, Dtype};
pub use manifest::{read_class_names, read_split_manifest, write_class_names, write_split_manifest};
pub use synthetic::{generate_synthetic, nearest_prototype_accuracy, SyntheticConfig, SyntheticDataset};

/// Writes `bytes` to a sibling temp file and renames it over `path`, so
/// readers never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| MsfError::Config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        MsfError::io(path, e)
    })
}
