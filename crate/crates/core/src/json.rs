//! Versioned JSON documents.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

pub(crate) fn parse_error(path: &Path, err: &serde_json::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: err.line(),
        message: err.to_string(),
    }
}

/// Parse `text` as a document of version `expected`, checking the version before the body.
pub(crate) fn from_versioned_str<T: DeserializeOwned>(
    path: &Path,
    text: &str,
    expected: u32,
) -> Result<T> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| parse_error(path, &e))?;
    if probe.format_version != expected {
        return Err(Error::Version {
            path: path.to_path_buf(),
            expected,
            found: probe.format_version,
        });
    }
    serde_json::from_str(text).map_err(|e| parse_error(path, &e))
}

pub(crate) fn read_versioned<T: DeserializeOwned>(path: &Path, expected: u32) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_versioned_str(path, &text, expected)
}

pub(crate) fn write_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable document");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
