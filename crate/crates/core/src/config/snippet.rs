//! ACL snippets in the hand-written style of a Faucet config: protocol
//! comments on match fields and capitalised booleans.

use std::fmt::Write;

use super::emit::ident;
use super::model::{AclActions, AclRule, PortNo, ETH_TYPE_IPV4, ETH_TYPE_IPV6};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AclKind {
    Mirror { to: PortNo, allow: bool },
    Block,
    Redirect { to: PortNo },
    AllowAll,
}

impl AclKind {
    pub fn default_name(&self) -> &'static str {
        match self {
            AclKind::Mirror { .. } => "mirror",
            AclKind::Block => "block",
            AclKind::Redirect { .. } => "redirect",
            AclKind::AllowAll => "allow-all",
        }
    }

    fn actions(&self) -> AclActions {
        match *self {
            AclKind::Mirror { to, allow } => AclActions {
                allow,
                mirror: Some(to),
                redirect: None,
            },
            AclKind::Block => AclActions::default(),
            AclKind::Redirect { to } => AclActions {
                allow: false,
                mirror: None,
                redirect: Some(to),
            },
            AclKind::AllowAll => AclActions {
                allow: true,
                ..Default::default()
            },
        }
    }
}

/// Header fields a generated rule matches on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RuleMatch {
    pub dl_type: Option<u16>,
    pub ip_proto: Option<u8>,
}

impl RuleMatch {
    pub const IPV4_ICMP: RuleMatch = RuleMatch {
        dl_type: Some(ETH_TYPE_IPV4),
        ip_proto: Some(1),
    };
    pub const IPV6_ICMP: RuleMatch = RuleMatch {
        dl_type: Some(ETH_TYPE_IPV6),
        ip_proto: Some(58),
    };
}

/// Rules for an ACL of the given kind. No matches means one rule covering
/// all traffic; allow-all ignores matches.
pub fn acl_rules(kind: AclKind, matches: &[RuleMatch]) -> Vec<AclRule> {
    let actions = kind.actions();
    if matches.is_empty() || kind == AclKind::AllowAll {
        return vec![AclRule {
            dl_type: None,
            ip_proto: None,
            actions,
        }];
    }
    matches
        .iter()
        .map(|m| AclRule {
            dl_type: m.dl_type,
            ip_proto: m.ip_proto,
            actions: actions.clone(),
        })
        .collect()
}

fn eth_type_name(t: u16) -> Option<&'static str> {
    Some(match t {
        0x0800 => "IPv4",
        0x86dd => "IPv6",
        0x0806 => "ARP",
        _ => return None,
    })
}

fn ip_proto_name(p: u8) -> Option<&'static str> {
    Some(match p {
        1 => "ICMP",
        6 => "TCP",
        17 => "UDP",
        58 => "ICMPv6",
        _ => return None,
    })
}

fn comment(name: Option<&str>) -> String {
    name.map(|n| format!(" # {n}")).unwrap_or_default()
}

fn capital(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

/// One named ACL as it would appear under `acls:`, starting at column 0.
pub fn render_acl(name: &str, rules: &[AclRule]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}:", ident(name));
    for rule in rules {
        out.push_str("  - rule:\n");
        if let Some(t) = rule.dl_type {
            let _ = writeln!(out, "      dl_type: {t:#x}{}", comment(eth_type_name(t)));
        }
        if let Some(p) = rule.ip_proto {
            let _ = writeln!(out, "      ip_proto: {p}{}", comment(ip_proto_name(p)));
        }
        out.push_str("      actions:\n");
        let _ = writeln!(out, "        allow: {}", capital(rule.actions.allow));
        if let Some(m) = rule.actions.mirror {
            let _ = writeln!(out, "        mirror: {m}");
        }
        if let Some(r) = rule.actions.redirect {
            let _ = writeln!(out, "        redirect: {r}");
        }
    }
    out
}
