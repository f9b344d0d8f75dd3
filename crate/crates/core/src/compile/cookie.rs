//! Flow cookies record which piece of configuration produced an entry.
//!
//! Layout: the top byte is the kind; for ACL entries the next 32 bits are a
//! hash of the ACL name and the low 24 bits the rule's index in that ACL;
//! for per-port entries the low 32 bits are the port. Learned entries set
//! the top bit, so `cookie & LEARNED_BIT == 0` selects compiled entries.

use crate::config::PortNo;

pub const LEARNED_BIT: u64 = 1 << 63;

const KIND_ACL: u8 = 0x01;
const KIND_CATCH_ALL: u8 = 0x02;
const KIND_VLAN: u8 = 0x03;
const KIND_L2_MISS: u8 = 0x04;
const KIND_LEARNED: u8 = 0x80;

const INDEX_BITS: u32 = 24;
pub const MAX_RULE_INDEX: usize = (1 << INDEX_BITS) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CookieTag {
    AclRule { acl_hash: u32, index: u32 },
    CatchAll { port: PortNo },
    VlanAssign { port: PortNo },
    L2Miss,
    Learned { vid: u16 },
}

impl CookieTag {
    pub fn acl_rule(acl: &str, index: usize) -> Self {
        CookieTag::AclRule {
            acl_hash: acl_hash(acl),
            index: index as u32,
        }
    }

    pub fn encode(self) -> u64 {
        let kind = |k: u8| (k as u64) << 56;
        match self {
            CookieTag::AclRule { acl_hash, index } => {
                kind(KIND_ACL) | (acl_hash as u64) << INDEX_BITS | (index as u64 & MAX_RULE_INDEX as u64)
            }
            CookieTag::CatchAll { port } => kind(KIND_CATCH_ALL) | port as u64,
            CookieTag::VlanAssign { port } => kind(KIND_VLAN) | port as u64,
            CookieTag::L2Miss => kind(KIND_L2_MISS),
            CookieTag::Learned { vid } => kind(KIND_LEARNED) | vid as u64,
        }
    }

    pub fn decode(cookie: u64) -> Option<Self> {
        let low32 = cookie as u32;
        Some(match (cookie >> 56) as u8 {
            KIND_ACL => CookieTag::AclRule {
                acl_hash: (cookie >> INDEX_BITS) as u32,
                index: (cookie & MAX_RULE_INDEX as u64) as u32,
            },
            KIND_CATCH_ALL if cookie >> 32 & 0xff_ffff == 0 => CookieTag::CatchAll { port: low32 },
            KIND_VLAN if cookie >> 32 & 0xff_ffff == 0 => CookieTag::VlanAssign { port: low32 },
            KIND_L2_MISS if cookie << 8 == 0 => CookieTag::L2Miss,
            KIND_LEARNED if cookie & 0x00ff_ffff_ffff_0000 == 0 => CookieTag::Learned { vid: cookie as u16 },
            _ => return None,
        })
    }
}

/// 32-bit FNV-1a of the ACL name.
pub fn acl_hash(name: &str) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for b in name.bytes() {
        h ^= b as u32;
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

pub fn is_learned(cookie: u64) -> bool {
    cookie & LEARNED_BIT != 0
}
