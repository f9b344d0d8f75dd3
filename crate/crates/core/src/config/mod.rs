//! Fabric configuration: the YAML file carrying VLANs, datapaths, their
//! interfaces and the ACLs attached to them.

#[cfg(feature = "testkit")]
pub mod arbitrary;
mod diff;
mod emit;
mod error;
mod model;
mod parse;
mod snippet;
mod validate;
pub mod yaml;

pub use diff::{diff_config, Change, ConfigDelta, DatapathMeta, DeltaEntry, PortRef};
pub use emit::emit_config;
pub use error::{ConfigError, ErrorCode, ValidationReport, Violation, ViolationKind};
pub use model::{
    AclActions, AclRule, DatapathConfig, FabricConfig, InterfaceConfig, PortNo, VlanConfig,
    ETH_TYPE_IPV4, ETH_TYPE_IPV6,
};
pub use parse::parse_document;
pub use snippet::{acl_rules, render_acl, AclKind, RuleMatch};
pub use validate::validate;

pub(crate) use emit::render;
pub(crate) use parse::{entries, fields, int_in, require, text, type_error};

use sha2::{Digest, Sha256};

/// Default configuration file name.
pub const DEFAULT_CONFIG_FILE: &str = "sdx.yaml";

/// Parse and fully validate a configuration document.
pub fn parse_config(text: &str) -> Result<FabricConfig, ConfigError> {
    let cfg = parse_document(text)?;
    let report = validate(&cfg);
    if report.is_valid() {
        Ok(cfg)
    } else {
        Err(ConfigError::from_report(report))
    }
}

/// Short stable digest of a configuration's canonical rendering.
pub fn fingerprint(cfg: &FabricConfig) -> String {
    digest(&render(cfg))
}

pub(crate) fn digest(text: &str) -> String {
    let hash = Sha256::digest(text.as_bytes());
    hash[..8].iter().map(|b| format!("{b:02x}")).collect()
}
