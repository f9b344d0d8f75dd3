//! OXM match fields (`ofp_match` with `OFPMT_OXM`).

use std::fmt;

use super::wire::{padded8, Put, Reader};
use super::DecodeError;

pub const OXM_CLASS_OPENFLOW_BASIC: u16 = 0x8000;
const OFPMT_OXM: u16 = 1;

pub const OXM_IN_PORT: u8 = 0;
pub const OXM_METADATA: u8 = 2;
pub const OXM_ETH_DST: u8 = 3;
pub const OXM_ETH_SRC: u8 = 4;
pub const OXM_ETH_TYPE: u8 = 5;
pub const OXM_VLAN_VID: u8 = 6;
pub const OXM_IP_PROTO: u8 = 10;

pub type MacAddr = [u8; 6];

pub fn fmt_mac(mac: &MacAddr) -> String {
    mac.iter()
        .map(|b| format!("{b:02x}"))
        .collect::<Vec<_>>()
        .join(":")
}

pub fn parse_mac(s: &str) -> Option<MacAddr> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 6 {
        return None;
    }
    let mut out = [0u8; 6];
    for (o, p) in out.iter_mut().zip(parts) {
        if p.len() != 2 {
            return None;
        }
        *o = u8::from_str_radix(p, 16).ok()?;
    }
    Some(out)
}

/// An OXM TLV that is not one of the fields this controller interprets.
/// Kept verbatim so it can be re-encoded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RawOxm {
    pub class: u16,
    pub field: u8,
    pub has_mask: bool,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MatchField {
    InPort(u32),
    Metadata(u64),
    EthDst(MacAddr),
    EthSrc(MacAddr),
    EthType(u16),
    VlanVid(u16),
    IpProto(u8),
    Other(RawOxm),
}

impl MatchField {
    fn code(&self) -> (u16, u8) {
        match self {
            MatchField::InPort(_) => (OXM_CLASS_OPENFLOW_BASIC, OXM_IN_PORT),
            MatchField::Metadata(_) => (OXM_CLASS_OPENFLOW_BASIC, OXM_METADATA),
            MatchField::EthDst(_) => (OXM_CLASS_OPENFLOW_BASIC, OXM_ETH_DST),
            MatchField::EthSrc(_) => (OXM_CLASS_OPENFLOW_BASIC, OXM_ETH_SRC),
            MatchField::EthType(_) => (OXM_CLASS_OPENFLOW_BASIC, OXM_ETH_TYPE),
            MatchField::VlanVid(_) => (OXM_CLASS_OPENFLOW_BASIC, OXM_VLAN_VID),
            MatchField::IpProto(_) => (OXM_CLASS_OPENFLOW_BASIC, OXM_IP_PROTO),
            MatchField::Other(r) => (r.class, r.field),
        }
    }

    fn encode(&self, out: &mut Vec<u8>) -> Result<(), super::EncodeError> {
        let (class, field) = self.code();
        let (has_mask, payload): (bool, Vec<u8>) = match self {
            MatchField::InPort(p) => (false, p.to_be_bytes().to_vec()),
            MatchField::Metadata(m) => (false, m.to_be_bytes().to_vec()),
            MatchField::EthDst(m) | MatchField::EthSrc(m) => (false, m.to_vec()),
            MatchField::EthType(t) => (false, t.to_be_bytes().to_vec()),
            MatchField::VlanVid(v) => (false, v.to_be_bytes().to_vec()),
            MatchField::IpProto(p) => (false, vec![*p]),
            MatchField::Other(r) => (r.has_mask, r.payload.clone()),
        };
        if field > 0x7f || payload.len() > 255 {
            return Err(super::EncodeError::Unrepresentable(format!(
                "OXM field {field} with {} byte payload",
                payload.len()
            )));
        }
        out.put_u16(class);
        out.put_u8((field << 1) | has_mask as u8);
        out.put_u8(payload.len() as u8);
        out.extend_from_slice(&payload);
        Ok(())
    }

    fn decode(r: &mut Reader<'_>) -> Result<MatchField, DecodeError> {
        let class = r.u16()?;
        let fh = r.u8()?;
        let len = r.u8()? as usize;
        let (field, has_mask) = (fh >> 1, fh & 1 == 1);
        let payload = r
            .bytes(len)
            .map_err(|_| DecodeError::MalformedOxm(format!("field {field} overruns match")))?;
        let fixed = |want: usize| {
            if len == want {
                Ok(())
            } else {
                Err(DecodeError::MalformedOxm(format!(
                    "field {field} has length {len}, expected {want}"
                )))
            }
        };
        if class != OXM_CLASS_OPENFLOW_BASIC || has_mask {
            return Ok(MatchField::Other(RawOxm {
                class,
                field,
                has_mask,
                payload: payload.to_vec(),
            }));
        }
        let mut p = Reader::new(payload);
        Ok(match field {
            OXM_IN_PORT => {
                fixed(4)?;
                MatchField::InPort(p.u32()?)
            }
            OXM_METADATA => {
                fixed(8)?;
                MatchField::Metadata(p.u64()?)
            }
            OXM_ETH_DST => {
                fixed(6)?;
                MatchField::EthDst(p.mac()?)
            }
            OXM_ETH_SRC => {
                fixed(6)?;
                MatchField::EthSrc(p.mac()?)
            }
            OXM_ETH_TYPE => {
                fixed(2)?;
                MatchField::EthType(p.u16()?)
            }
            OXM_VLAN_VID => {
                fixed(2)?;
                MatchField::VlanVid(p.u16()?)
            }
            OXM_IP_PROTO => {
                fixed(1)?;
                MatchField::IpProto(p.u8()?)
            }
            _ => MatchField::Other(RawOxm {
                class,
                field,
                has_mask,
                payload: payload.to_vec(),
            }),
        })
    }
}

impl fmt::Display for MatchField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchField::InPort(p) => write!(f, "in_port={p}"),
            MatchField::Metadata(m) => write!(f, "metadata={m:#x}"),
            MatchField::EthDst(m) => write!(f, "eth_dst={}", fmt_mac(m)),
            MatchField::EthSrc(m) => write!(f, "eth_src={}", fmt_mac(m)),
            MatchField::EthType(t) => write!(f, "eth_type={t:#06x}"),
            MatchField::VlanVid(v) => write!(f, "vlan_vid={v}"),
            MatchField::IpProto(p) => write!(f, "ip_proto={p}"),
            MatchField::Other(r) => {
                write!(f, "oxm({:#06x}:{}", r.class, r.field)?;
                if r.has_mask {
                    f.write_str("/m")?;
                }
                write!(f, "={})", r.payload.iter().map(|b| format!("{b:02x}")).collect::<String>())
            }
        }
    }
}

/// The match part of a flow entry: an ordered list of OXM fields. Field
/// order is preserved across encode/decode; [`Match::canonical`] sorts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Match(pub Vec<MatchField>);

impl Match {
    pub fn new() -> Self {
        Match(Vec::new())
    }

    pub fn with(mut self, field: MatchField) -> Self {
        self.0.push(field);
        self
    }

    pub fn in_port(self, p: u32) -> Self {
        self.with(MatchField::InPort(p))
    }

    pub fn eth_type(self, t: u16) -> Self {
        self.with(MatchField::EthType(t))
    }

    pub fn ip_proto(self, p: u8) -> Self {
        self.with(MatchField::IpProto(p))
    }

    pub fn metadata(self, m: u64) -> Self {
        self.with(MatchField::Metadata(m))
    }

    pub fn eth_dst(self, mac: MacAddr) -> Self {
        self.with(MatchField::EthDst(mac))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn fields(&self) -> &[MatchField] {
        &self.0
    }

    /// Sorted by OXM class/field code, the order the compiler emits.
    pub fn canonical(mut self) -> Self {
        self.0.sort_by_key(|f| f.code());
        self
    }

    pub fn get_in_port(&self) -> Option<u32> {
        self.0.iter().find_map(|f| match f {
            MatchField::InPort(p) => Some(*p),
            _ => None,
        })
    }

    /// Non-strict containment: every field of `self` also appears, with the
    /// same value, in `other`. An empty match contains everything.
    pub fn contains(&self, other: &Match) -> bool {
        self.0.iter().all(|f| other.0.contains(f))
    }

    /// Same set of fields regardless of order.
    pub fn same_fields(&self, other: &Match) -> bool {
        self.0.len() == other.0.len() && self.contains(other)
    }

    pub(crate) fn encode(&self, out: &mut Vec<u8>) -> Result<(), super::EncodeError> {
        let start = out.len();
        out.put_u16(OFPMT_OXM);
        out.put_u16(0);
        for f in &self.0 {
            f.encode(out)?;
        }
        let len = out.len() - start;
        if len > u16::MAX as usize {
            return Err(super::EncodeError::Unrepresentable("match too long".into()));
        }
        out.patch_u16(start + 2, len as u16);
        out.pad8_from(start);
        Ok(())
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<Match, DecodeError> {
        let typ = r.u16()?;
        let len = r.u16()? as usize;
        if typ != OFPMT_OXM {
            return Err(DecodeError::MalformedOxm(format!("match type {typ} is not OXM")));
        }
        if len < 4 {
            return Err(DecodeError::MalformedOxm(format!("match length {len} < 4")));
        }
        let mut body = r
            .sub(len - 4)
            .map_err(|_| DecodeError::MalformedOxm("match overruns message".into()))?;
        r.skip(padded8(len) - len)
            .map_err(|_| DecodeError::MalformedOxm("match padding missing".into()))?;
        let mut fields = Vec::new();
        while !body.is_empty() {
            if body.remaining() < 4 {
                return Err(DecodeError::MalformedOxm("trailing bytes in match".into()));
            }
            fields.push(MatchField::decode(&mut body)?);
        }
        Ok(Match(fields))
    }
}

impl fmt::Display for Match {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("*");
        }
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}
