use super::{
    validate_disruption, validate_network, ClientOrder, CostParams, DisruptionProfile,
    ServiceNetwork, ValidationReport,
};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed instance: {0}")]
    Json(#[from] serde_json::Error),
}

/// A complete problem instance as stored on disk.
///
/// The JSON document has the top-level keys `nodes`, `arcs`, `services`,
/// `service_arcs`, `origin`, `clients`, `cost_params` and `disruption`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(flatten)]
    pub network: ServiceNetwork,
    pub clients: Vec<ClientOrder>,
    pub cost_params: CostParams,
    pub disruption: DisruptionProfile,
}

impl Instance {
    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("instance is serializable");
        text.push('\n');
        text
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| InstanceError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), InstanceError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| InstanceError::Write {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = validate_network(&self.network, &self.clients, &self.cost_params);
        report.extend(validate_disruption(&self.network, &self.disruption));
        report
    }
}
