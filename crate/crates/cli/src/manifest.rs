//! Run manifests: enough to re-execute a command and check its outputs.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use rulestrata::Error;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self, Error> {
        Ok(FileDigest {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        })
    }
}

pub fn sha256_file(path: &Path) -> Result<String, Error> {
    let mut file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| io_err(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Wall-clock time and thread count are logged, not recorded, so that
/// repeated runs produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Arguments that re-run this command, every parameter spelled out.
    pub argv: Vec<String>,
    pub config: Option<PathBuf>,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub summary: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(subcommand: &str, argv: Vec<String>) -> Self {
        RunManifest {
            tool: "rulestrata".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            argv,
            config: None,
            parameters: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.parameters.insert(key.into(), json(value));
        self
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.summary.insert(key.into(), json(value));
        self
    }

    pub fn path_for(output: &Path) -> PathBuf {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    pub fn write_beside(&self, output: &Path) -> Result<PathBuf, Error> {
        let path = Self::path_for(output);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

fn json(value: impl Serialize) -> serde_json::Value {
    serde_json::to_value(value).expect("parameter serializes")
}
