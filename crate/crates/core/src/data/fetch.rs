//! Download and checksum verification of the benchmark file.

use std::io::Read;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::data::parse_dataset;
use crate::error::{Error, Result};

pub const DEFAULT_DATASET_URL: &str =
    "https://archive.ics.uci.edu/ml/machine-learning-databases/00422/wifi_localization.txt";
pub const DATASET_FILE_NAME: &str = "wifi_localization.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchOutcome {
    /// The file was already present with the expected digest.
    Cached {
        sha256: String,
    },
    Downloaded {
        sha256: String,
    },
}

impl FetchOutcome {
    pub fn sha256(&self) -> &str {
        match self {
            FetchOutcome::Cached { sha256 } | FetchOutcome::Downloaded { sha256 } => sha256,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Path of the digest recorded on first download when no checksum is pinned.
pub fn digest_sidecar(dest: &Path) -> PathBuf {
    let mut name = dest.file_name().unwrap_or_default().to_os_string();
    name.push(".sha256");
    dest.with_file_name(name)
}

pub fn quarantine_path(dest: &Path) -> PathBuf {
    let mut name = dest.file_name().unwrap_or_default().to_os_string();
    name.push(".quarantine");
    dest.with_file_name(name)
}

/// Makes sure `dest` holds the benchmark file.
///
/// With `expected` set, an existing file with that digest is reused and a download with any
/// other digest is moved to the quarantine path and reported as [`Error::Checksum`]. Without a
/// pinned digest the first download must parse as a dataset, and its digest is recorded next to
/// the file; later calls verify against that record.
pub fn fetch_dataset(url: &str, dest: &Path, expected: Option<&str>) -> Result<FetchOutcome> {
    let sidecar = digest_sidecar(dest);
    let recorded = std::fs::read_to_string(&sidecar)
        .ok()
        .map(|s| s.trim().to_lowercase());
    let expected = expected
        .map(|e| e.trim().to_lowercase())
        .filter(|e| !e.is_empty())
        .or(recorded);

    if dest.exists() {
        let actual = sha256_file(dest)?;
        match &expected {
            Some(e) if *e == actual => return Ok(FetchOutcome::Cached { sha256: actual }),
            Some(e) => {
                return Err(quarantine(dest, e.clone(), actual)?);
            }
            None => {
                parse_dataset(&std::fs::read_to_string(dest)?, dest)?;
                std::fs::write(&sidecar, format!("{actual}\n"))?;
                return Ok(FetchOutcome::Cached { sha256: actual });
            }
        }
    }

    let bytes = download(url)?;
    if let Some(parent) = dest.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(dest, &bytes)?;
    let actual = sha256_hex(&bytes);
    match expected {
        Some(e) if e != actual => Err(quarantine(dest, e, actual)?),
        Some(_) => Ok(FetchOutcome::Downloaded { sha256: actual }),
        None => {
            if let Err(e) = std::str::from_utf8(&bytes)
                .map_err(|_| Error::data("download is not text"))
                .and_then(|t| parse_dataset(t, dest))
            {
                std::fs::rename(dest, quarantine_path(dest))?;
                return Err(e);
            }
            std::fs::write(&sidecar, format!("{actual}\n"))?;
            Ok(FetchOutcome::Downloaded { sha256: actual })
        }
    }
}

fn quarantine(dest: &Path, expected: String, actual: String) -> Result<Error> {
    std::fs::rename(dest, quarantine_path(dest))?;
    Ok(Error::Checksum {
        path: dest.to_path_buf(),
        expected,
        actual,
    })
}

fn download(url: &str) -> Result<Vec<u8>> {
    let fail = |msg: String| Error::Download {
        url: url.to_string(),
        msg,
    };
    if let Some(local) = url.strip_prefix("file://") {
        return std::fs::read(local).map_err(|e| fail(e.to_string()));
    }
    let mut resp = ureq::get(url).call().map_err(|e| fail(e.to_string()))?;
    let mut bytes = Vec::new();
    resp.body_mut()
        .as_reader()
        .read_to_end(&mut bytes)
        .map_err(|e| fail(e.to_string()))?;
    Ok(bytes)
}
