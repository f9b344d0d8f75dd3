use std::collections::BTreeMap;

use super::error::{ConfigError, ErrorCode};
use super::model::{AclActions, AclRule, DatapathConfig, FabricConfig, InterfaceConfig, VlanConfig};
use super::yaml::{self, Node, NodeKind};

type Result<T> = std::result::Result<T, ConfigError>;

/// Read the document structure without checking cross references or value
/// invariants.
pub fn parse_document(text: &str) -> Result<FabricConfig> {
    let root = yaml::parse(text)
        .map_err(|e| ConfigError::at(ErrorCode::Syntax, e.message, e.pos))?
        .ok_or_else(|| ConfigError::new(ErrorCode::MissingSection, "missing section: vlans", None))?;
    let top = fields(&root, &["vlans", "dps", "acls"], "document")?;

    let vlans_node = top
        .get("vlans")
        .ok_or_else(|| ConfigError::new(ErrorCode::MissingSection, "missing section: vlans", None))?;
    let dps_node = top
        .get("dps")
        .ok_or_else(|| ConfigError::new(ErrorCode::MissingSection, "missing section: dps", None))?;

    let mut cfg = FabricConfig::default();
    for (name, node) in entries(vlans_node, "vlans")? {
        cfg.vlans.insert(name.to_string(), vlan(node, name)?);
    }
    for (name, node) in entries(dps_node, "dps")? {
        cfg.dps.insert(name.to_string(), datapath(node, name)?);
    }
    if let Some(acls) = top.get("acls") {
        for (name, node) in entries(acls, "acls")? {
            cfg.acls.insert(name.to_string(), acl(node, name)?);
        }
    }
    Ok(cfg)
}

fn vlan(node: &Node, name: &str) -> Result<VlanConfig> {
    let ctx = format!("vlan {name}");
    let f = fields(node, &["vid", "description"], &ctx)?;
    let vid = require(&f, "vid", node, &ctx)?;
    Ok(VlanConfig {
        vid: int_in(vid, "vid", &ctx)?,
        description: opt_text(&f, "description", &ctx)?,
    })
}

fn datapath(node: &Node, name: &str) -> Result<DatapathConfig> {
    let ctx = format!("datapath {name}");
    let f = fields(node, &["dp_id", "hardware", "interfaces"], &ctx)?;
    let dp_id = int_in(require(&f, "dp_id", node, &ctx)?, "dp_id", &ctx)?;
    let mut interfaces = BTreeMap::new();
    if let Some(ifaces) = f.get("interfaces") {
        for (key, inode) in entries(ifaces, &format!("{ctx} interfaces"))? {
            let port: u32 = parse_int(key)
                .and_then(|v| u32::try_from(v).ok())
                .ok_or_else(|| {
                    ConfigError::at(
                        ErrorCode::InvalidValue,
                        format!("interface key '{key}' in {ctx} is not a port number"),
                        inode.pos,
                    )
                })?;
            interfaces.insert(port, interface(inode, &format!("{ctx} port {port}"))?);
        }
    }
    Ok(DatapathConfig {
        dp_id,
        hardware: opt_text(&f, "hardware", &ctx)?,
        interfaces,
    })
}

fn interface(node: &Node, ctx: &str) -> Result<InterfaceConfig> {
    let f = fields(node, &["name", "description", "native_vlan", "acls_in"], ctx)?;
    let native = require(&f, "native_vlan", node, ctx)?;
    let acls_in = match f.get("acls_in") {
        None => Vec::new(),
        Some(n) if n.is_null() => Vec::new(),
        Some(n) => match &n.kind {
            NodeKind::Seq(items) => items
                .iter()
                .map(|i| text(i, "acls_in entry", ctx))
                .collect::<Result<Vec<_>>>()?,
            _ => return Err(type_error(n, "acls_in", "a sequence", ctx)),
        },
    };
    Ok(InterfaceConfig {
        name: opt_text(&f, "name", ctx)?,
        description: opt_text(&f, "description", ctx)?,
        native_vlan: text(native, "native_vlan", ctx)?,
        acls_in,
    })
}

fn acl(node: &Node, name: &str) -> Result<Vec<AclRule>> {
    let ctx = format!("acl {name}");
    if node.is_null() {
        return Ok(Vec::new());
    }
    let NodeKind::Seq(items) = &node.kind else {
        return Err(type_error(node, name, "a sequence of rules", &ctx));
    };
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let rctx = format!("{ctx} rule {i}");
            let outer = fields(item, &["rule"], &rctx)?;
            let rule = require(&outer, "rule", item, &rctx)?;
            acl_rule(rule, &rctx)
        })
        .collect()
}

fn acl_rule(node: &Node, ctx: &str) -> Result<AclRule> {
    let f = fields(node, &["dl_type", "ip_proto", "actions"], ctx)?;
    let actions = match f.get("actions") {
        None => AclActions::default(),
        Some(a) => {
            let actx = format!("{ctx} actions");
            let af = fields(a, &["allow", "mirror", "redirect"], &actx)?;
            AclActions {
                allow: match af.get("allow") {
                    Some(n) => boolean(n, "allow", &actx)?,
                    None => false,
                },
                mirror: af.get("mirror").map(|n| int_in(n, "mirror", &actx)).transpose()?,
                redirect: af
                    .get("redirect")
                    .map(|n| int_in(n, "redirect", &actx))
                    .transpose()?,
            }
        }
    };
    Ok(AclRule {
        dl_type: f.get("dl_type").map(|n| int_in(n, "dl_type", ctx)).transpose()?,
        ip_proto: f.get("ip_proto").map(|n| int_in(n, "ip_proto", ctx)).transpose()?,
        actions,
    })
}

/// Decimal or `0x`-prefixed hexadecimal.
pub(crate) fn parse_int(s: &str) -> Option<u64> {
    let s = s.trim();
    if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        if hex.is_empty() || hex.starts_with('+') {
            return None;
        }
        u64::from_str_radix(hex, 16).ok()
    } else if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) {
        s.parse().ok()
    } else {
        None
    }
}

pub(crate) fn int_in<T: TryFrom<u64>>(node: &Node, field: &str, ctx: &str) -> Result<T> {
    let raw = node
        .plain()
        .ok_or_else(|| type_error(node, field, "an integer", ctx))?;
    let value = parse_int(raw).ok_or_else(|| type_error(node, field, "an integer", ctx))?;
    T::try_from(value).map_err(|_| {
        ConfigError::at(
            ErrorCode::InvalidValue,
            format!("{field} value {raw} in {ctx} is out of range"),
            node.pos,
        )
    })
}

fn boolean(node: &Node, field: &str, ctx: &str) -> Result<bool> {
    match node.plain() {
        Some("true" | "True") => Ok(true),
        Some("false" | "False") => Ok(false),
        _ => Err(type_error(node, field, "a boolean", ctx)),
    }
}

pub(crate) fn text(node: &Node, field: &str, ctx: &str) -> Result<String> {
    node.scalar()
        .map(str::to_string)
        .ok_or_else(|| type_error(node, field, "a string", ctx))
}

fn opt_text(f: &BTreeMap<&str, &Node>, field: &str, ctx: &str) -> Result<String> {
    match f.get(field) {
        None => Ok(String::new()),
        Some(n) => text(n, field, ctx),
    }
}

pub(crate) fn type_error(node: &Node, field: &str, expected: &str, ctx: &str) -> ConfigError {
    ConfigError::at(
        ErrorCode::InvalidValue,
        format!("{field} in {ctx} must be {expected}, found {}", node.describe()),
        node.pos,
    )
}

pub(crate) fn require<'n>(
    f: &BTreeMap<&str, &'n Node>,
    field: &str,
    owner: &Node,
    ctx: &str,
) -> Result<&'n Node> {
    f.get(field).copied().ok_or_else(|| {
        ConfigError::at(
            ErrorCode::MissingField,
            format!("missing field '{field}' in {ctx}"),
            owner.pos,
        )
    })
}

/// Map entries keyed by scalar text; a null value reads as an empty map.
pub(crate) fn entries<'n>(node: &'n Node, ctx: &str) -> Result<Vec<(&'n str, &'n Node)>> {
    if node.is_null() {
        return Ok(Vec::new());
    }
    match &node.kind {
        NodeKind::Map(items) => Ok(items
            .iter()
            .map(|(k, v)| (k.scalar().unwrap_or_default(), v))
            .collect()),
        _ => Err(type_error(node, ctx, "a mapping", "document")),
    }
}

/// A mapping restricted to a known key set.
pub(crate) fn fields<'n>(
    node: &'n Node,
    allowed: &[&'static str],
    ctx: &str,
) -> Result<BTreeMap<&'static str, &'n Node>> {
    if node.is_null() {
        return Ok(BTreeMap::new());
    }
    let NodeKind::Map(items) = &node.kind else {
        return Err(ConfigError::at(
            ErrorCode::InvalidValue,
            format!("{ctx} must be a mapping, found {}", node.describe()),
            node.pos,
        ));
    };
    let mut out = BTreeMap::new();
    for (k, v) in items {
        let key = k.scalar().unwrap_or_default();
        let Some(known) = allowed.iter().find(|a| **a == key) else {
            return Err(ConfigError::at(
                ErrorCode::UnknownKey,
                format!("unknown key '{key}' in {ctx}"),
                k.pos,
            ));
        };
        out.insert(*known, v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ints_accept_hex_and_decimal() {
        assert_eq!(parse_int("0x1"), Some(1));
        assert_eq!(parse_int("0x86dd"), Some(0x86dd));
        assert_eq!(parse_int("4094"), Some(4094));
        assert_eq!(parse_int("0x"), None);
        assert_eq!(parse_int("-1"), None);
        assert_eq!(parse_int("1e3"), None);
    }

    #[test]
    fn quoted_numbers_are_not_numbers() {
        let e = parse_document("vlans:\n  v:\n    vid: \"100\"\ndps: {}\n").unwrap_err();
        assert_eq!(e.code, ErrorCode::InvalidValue);
    }

    #[test]
    fn unknown_key_reports_position() {
        let e = parse_document("vlans:\n  v:\n    vid: 1\n    colour: red\ndps: {}\n").unwrap_err();
        assert_eq!(e.code, ErrorCode::UnknownKey);
        assert_eq!(e.pos.unwrap().line, 4);
    }

    #[test]
    fn misspelt_vlans_key_is_rejected() {
        let e = parse_document("vlangs:\n  v:\n    vid: 1\ndps: {}\n").unwrap_err();
        assert_eq!(e.code, ErrorCode::UnknownKey);
    }

    #[test]
    fn booleans() {
        let doc = |b: &str| {
            format!(
                "vlans: {{v: {{vid: 1}}}}\ndps: {{}}\nacls:\n  a:\n    - rule:\n        actions: {{allow: {b}}}\n"
            )
        };
        for (text, want) in [("True", true), ("true", true), ("False", false), ("false", false)] {
            let cfg = parse_document(&doc(text)).unwrap();
            assert_eq!(cfg.acls["a"][0].actions.allow, want);
        }
        assert!(parse_document(&doc("yes")).is_err());
    }
}
