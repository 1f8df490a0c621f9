//! Run manifests: what produced an output file, from which input, when.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

/// Provenance record accompanying every output. The numeric payload of a
/// command is deterministic in (inputs, flags, seed); the manifest carries
/// the non-deterministic bookkeeping (timing) separately.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub elapsed_secs: f64,
}

impl RunManifest {
    pub fn new(start: Instant) -> RunManifest {
        RunManifest {
            tool: "rectikernel",
            version: env!("CARGO_PKG_VERSION"),
            command: std::env::args().collect(),
            input: None,
            input_sha256: None,
            seed: None,
            elapsed_secs: start.elapsed().as_secs_f64(),
        }
    }

    pub fn with_input(mut self, path: &Path, sha256: String) -> RunManifest {
        self.input = Some(path.display().to_string());
        self.input_sha256 = Some(sha256);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> RunManifest {
        self.seed = Some(seed);
        self
    }
}
