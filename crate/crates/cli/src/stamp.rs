//! Reproducibility stamps: every run writes the merged config it actually
//! used, plus a `[run]` header with the binary version, subcommand, seed and
//! a hash of that config. Stamps contain no timestamps or paths, so repeated
//! runs emit byte-identical stamps and a stamp replays as `--config`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, RunMeta};

pub fn config_hash(config: &RunConfig) -> Result<String> {
    let mut hashed = config.clone();
    hashed.run = None;
    let text = toml::to_string(&hashed).context("serializing config for hashing")?;
    let digest = Sha256::digest(text.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

pub fn render(command: &str, seed: u64, config: &RunConfig) -> Result<String> {
    let mut stamped = config.clone();
    stamped.run = Some(RunMeta {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        seed,
        config_hash: config_hash(config)?,
    });
    toml::to_string(&stamped).context("serializing stamp")
}

/// Stamp location: `stamp.toml` inside an output directory, or
/// `<file>.stamp.toml` beside an output file.
pub fn path_for(output: &Path, output_is_dir: bool) -> PathBuf {
    if output_is_dir {
        output.join("stamp.toml")
    } else {
        let mut name = output.as_os_str().to_os_string();
        name.push(".stamp.toml");
        PathBuf::from(name)
    }
}

pub fn write(output: &Path, output_is_dir: bool, command: &str, seed: u64, config: &RunConfig) -> Result<PathBuf> {
    let path = path_for(output, output_is_dir);
    let text = render(command, seed, config)?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(&path, text).with_context(|| format!("writing stamp {}", path.display()))?;
    Ok(path)
}
