use std::fmt::Write;

use super::error::ConfigError;
use super::model::{AclRule, FabricConfig};
use super::validate::validate;

/// Render a valid configuration as a canonical document: `vlans`, `dps`,
/// `acls` in that order, entries sorted by name, rule order preserved.
pub fn emit_config(cfg: &FabricConfig) -> Result<String, ConfigError> {
    let report = validate(cfg);
    if !report.is_valid() {
        return Err(ConfigError::from_report(report));
    }
    Ok(render(cfg))
}

/// Render without validating. Used for fingerprints of config slices.
pub(crate) fn render(cfg: &FabricConfig) -> String {
    let mut out = String::new();
    out.push_str("vlans:\n");
    for (name, vlan) in &cfg.vlans {
        let _ = writeln!(out, "  {}:", ident(name));
        let _ = writeln!(out, "    vid: {}", vlan.vid);
        if !vlan.description.is_empty() {
            let _ = writeln!(out, "    description: {}", quote(&vlan.description));
        }
    }
    out.push_str("dps:\n");
    for (name, dp) in &cfg.dps {
        let _ = writeln!(out, "  {}:", ident(name));
        let _ = writeln!(out, "    dp_id: {:#x}", dp.dp_id);
        if !dp.hardware.is_empty() {
            let _ = writeln!(out, "    hardware: {}", quote(&dp.hardware));
        }
        if !dp.interfaces.is_empty() {
            out.push_str("    interfaces:\n");
        }
        for (port, iface) in &dp.interfaces {
            let _ = writeln!(out, "      {port}:");
            if !iface.name.is_empty() {
                let _ = writeln!(out, "        name: {}", quote(&iface.name));
            }
            if !iface.description.is_empty() {
                let _ = writeln!(out, "        description: {}", quote(&iface.description));
            }
            let _ = writeln!(out, "        native_vlan: {}", ident(&iface.native_vlan));
            if !iface.acls_in.is_empty() {
                let list: Vec<String> = iface.acls_in.iter().map(|a| ident(a)).collect();
                let _ = writeln!(out, "        acls_in: [{}]", list.join(", "));
            }
        }
    }
    if !cfg.acls.is_empty() {
        out.push_str("acls:\n");
        for (name, rules) in &cfg.acls {
            if rules.is_empty() {
                let _ = writeln!(out, "  {}: []", ident(name));
                continue;
            }
            let _ = writeln!(out, "  {}:", ident(name));
            for rule in rules {
                write_rule(&mut out, rule, "    ");
            }
        }
    }
    out
}

/// One `- rule:` list item at the given indentation.
fn write_rule(out: &mut String, rule: &AclRule, indent: &str) {
    let _ = writeln!(out, "{indent}- rule:");
    if let Some(t) = rule.dl_type {
        let _ = writeln!(out, "{indent}    dl_type: {t:#x}");
    }
    if let Some(p) = rule.ip_proto {
        let _ = writeln!(out, "{indent}    ip_proto: {p}");
    }
    let _ = writeln!(out, "{indent}    actions:");
    let _ = writeln!(out, "{indent}      allow: {}", rule.actions.allow);
    if let Some(m) = rule.actions.mirror {
        let _ = writeln!(out, "{indent}      mirror: {m}");
    }
    if let Some(r) = rule.actions.redirect {
        let _ = writeln!(out, "{indent}      redirect: {r}");
    }
}

const RESERVED: &[&str] = &[
    "true", "false", "null", "yes", "no", "on", "off", "y", "n", "~",
];

/// Names are written bare when that cannot change how they read back.
pub(crate) fn ident(s: &str) -> String {
    let bare = s
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !RESERVED.contains(&s.to_ascii_lowercase().as_str());
    if bare {
        s.to_string()
    } else {
        quote(s)
    }
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 || c == '\u{7f}' => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identifiers() {
        assert_eq!(ident("allow-all"), "allow-all");
        assert_eq!(ident("office"), "office");
        assert_eq!(ident("True"), "\"True\"");
        assert_eq!(ident("1x"), "\"1x\"");
        assert_eq!(ident("a b"), "\"a b\"");
        assert_eq!(ident(""), "\"\"");
    }

    #[test]
    fn quoting_escapes() {
        assert_eq!(quote("a\"b\\c\n"), r#""a\"b\\c\n""#);
        assert_eq!(quote("\u{1}"), r#""\u0001""#);
    }
}
