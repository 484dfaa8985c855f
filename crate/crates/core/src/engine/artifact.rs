use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use super::{ModelSpec, TrainedModel};
use crate::error::{Error, Result};
use crate::ingest::to_csv_string;
use crate::series::{FeatureFrame, MinMaxScaler};

pub const ARTIFACT_VERSION: &str = "1";

/// A fitted model with everything needed to forecast without the
/// training data: the spec, the history tail the forecaster reads and a
/// fingerprint of the data it was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub commodity: String,
    pub spec: ModelSpec,
    pub model: TrainedModel,
    pub context: FeatureFrame,
    pub fingerprint: String,
}

/// SHA-256 over the canonical CSV rendering of `frame`.
pub fn fingerprint(frame: &FeatureFrame) -> Result<String> {
    let text = to_csv_string(frame, "")?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

impl ModelArtifact {
    pub fn new(commodity: &str, spec: ModelSpec, model: TrainedModel, train: &FeatureFrame) -> Result<Self> {
        let keep = model.context_rows().min(train.len());
        let context = train.slice(train.len() - keep..train.len())?;
        Ok(Self {
            commodity: commodity.to_string(),
            spec,
            fingerprint: fingerprint(train)?,
            model,
            context,
        })
    }

    /// Forecast continuing from the end of the training data.
    pub fn forecast(&self, horizon: usize) -> Result<Vec<f64>> {
        self.model.forecast(&self.context, horizon)
    }

    pub fn scaler(&self) -> Option<&MinMaxScaler> {
        self.model.scaler()
    }

    /// Serializes into a versioned envelope carrying a SHA-256 of the exact
    /// payload text. Returns the envelope and the hash.
    pub fn to_envelope(&self) -> Result<(String, String)> {
        let payload = serde_json::to_string(self)?;
        let hash = hex::encode(Sha256::digest(payload.as_bytes()));
        let raw = RawValue::from_string(payload)?;
        let env = Envelope {
            version: ARTIFACT_VERSION.to_string(),
            sha256: hash.clone(),
            payload: &raw,
        };
        Ok((serde_json::to_string(&env)?, hash))
    }

    pub fn from_envelope(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            version: serde_json::Value,
        }
        let header: Header =
            serde_json::from_str(text).map_err(|e| Error::CorruptArtifact(format!("unreadable envelope: {e}")))?;
        let version = match header.version {
            serde_json::Value::String(s) => s,
            other => other.to_string(),
        };
        if version != ARTIFACT_VERSION {
            return Err(Error::VersionMismatch { found: version });
        }
        let env: Envelope<'_> =
            serde_json::from_str(text).map_err(|e| Error::CorruptArtifact(format!("unreadable envelope: {e}")))?;
        let actual = hex::encode(Sha256::digest(env.payload.get().as_bytes()));
        if actual != env.sha256 {
            return Err(Error::CorruptArtifact("content hash mismatch".into()));
        }
        serde_json::from_str(env.payload.get()).map_err(|e| Error::CorruptArtifact(format!("bad payload: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope<'a> {
    version: String,
    sha256: String,
    #[serde(borrow)]
    payload: &'a RawValue,
}

/// Writes `artifact` under `dir` as `<sha256>.json` and returns the path.
pub fn save_artifact(dir: impl AsRef<Path>, artifact: &ModelArtifact) -> Result<PathBuf> {
    let (text, hash) = artifact.to_envelope()?;
    fs::create_dir_all(dir.as_ref())?;
    let path = dir.as_ref().join(format!("{hash}.json"));
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, &path)?;
    Ok(path)
}

pub fn load_artifact(path: impl AsRef<Path>) -> Result<ModelArtifact> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::ArtifactNotFound(path.display().to_string())
        } else {
            Error::Io(e)
        }
    })?;
    ModelArtifact::from_envelope(&text)
}
