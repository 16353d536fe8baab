//! Provenance headers and file writers.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// What every output file carries.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub artifact_version: String,
    pub manifest_sha256: String,
    pub seed: Option<u64>,
}

impl Provenance {
    /// Hash of the canonical JSON form of whatever produced the output.
    pub fn of<T: Serialize>(manifest: &T, seed: Option<u64>) -> Result<Self> {
        let bytes = serde_json::to_vec(manifest)?;
        let digest = Sha256::digest(&bytes);
        let manifest_sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        Ok(Provenance { artifact_version: ARTIFACT_VERSION.to_string(), manifest_sha256, seed })
    }

    fn header(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "# rmpu {}\n# manifest_sha256 {}\n# seed {}\n",
            self.artifact_version, self.manifest_sha256, seed
        )
    }
}

/// CSV text with `#` provenance lines on top.
pub fn csv_string<R: Serialize>(prov: &Provenance, rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let body = String::from_utf8(w.into_inner().context("flushing CSV")?)?;
    Ok(prov.header() + &body)
}

/// JSON object with the provenance fields merged in front of `body`.
pub fn json_string<T: Serialize>(prov: &Provenance, body: &T) -> Result<String> {
    let mut v = serde_json::to_value(prov)?;
    let extra = serde_json::to_value(body)?;
    if let (Some(obj), Some(rest)) = (v.as_object_mut(), extra.as_object()) {
        for (k, x) in rest {
            obj.insert(k.clone(), x.clone());
        }
    } else {
        v["result"] = extra;
    }
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

/// Write to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// `prefix.ext`, keeping any extension-like dots inside the prefix.
pub fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}
