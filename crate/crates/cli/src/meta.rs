use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance attached to every output.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub version: &'static str,
    pub seed: u64,
    pub config_hash: String,
}

impl Meta {
    /// Hashes the canonical JSON form of `config`.
    pub fn new<C: Serialize>(seed: u64, config: &C) -> Meta {
        let json = serde_json::to_vec(config).expect("config serializes");
        Meta {
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config_hash: hex::encode(Sha256::digest(&json)),
        }
    }

    /// A `#` comment line for CSV outputs.
    pub fn csv_comment(&self) -> String {
        format!(
            "# missreg {} seed={} config_hash={}\n",
            self.version, self.seed, self.config_hash
        )
    }
}
