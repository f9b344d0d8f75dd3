//! Just enough of Ethernet/IP headers to carry a frame's identity through
//! PacketIn and PacketOut. Payloads are never materialised.

use crate::ofp::MacAddr;

pub const BROADCAST: MacAddr = [0xff; 6];
pub const ETH_TYPE_ARP: u16 = 0x0806;
pub const ETH_HEADER_LEN: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameHeader {
    pub dst: MacAddr,
    pub src: MacAddr,
    pub eth_type: u16,
    pub ip_proto: Option<u8>,
}

pub fn is_multicast(mac: &MacAddr) -> bool {
    mac[0] & 1 == 1
}

impl FrameHeader {
    /// Header bytes: Ethernet, then a zeroed IPv4/IPv6 header carrying the
    /// protocol number, or a zeroed ARP body.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(ETH_HEADER_LEN + 40);
        out.extend_from_slice(&self.dst);
        out.extend_from_slice(&self.src);
        out.extend_from_slice(&self.eth_type.to_be_bytes());
        match self.eth_type {
            0x0800 => {
                let mut ip = [0u8; 20];
                ip[0] = 0x45;
                ip[9] = self.ip_proto.unwrap_or(0);
                out.extend_from_slice(&ip);
            }
            0x86dd => {
                let mut ip = [0u8; 40];
                ip[0] = 0x60;
                ip[6] = self.ip_proto.unwrap_or(0);
                out.extend_from_slice(&ip);
            }
            ETH_TYPE_ARP => out.extend_from_slice(&[0u8; 28]),
            _ => {}
        }
        out
    }

    pub fn parse(bytes: &[u8]) -> Option<FrameHeader> {
        if bytes.len() < ETH_HEADER_LEN {
            return None;
        }
        let mac = |at: usize| -> MacAddr { bytes[at..at + 6].try_into().unwrap() };
        let eth_type = u16::from_be_bytes([bytes[12], bytes[13]]);
        let l3 = &bytes[ETH_HEADER_LEN..];
        let ip_proto = match eth_type {
            0x0800 => Some(*l3.get(9)?),
            0x86dd => Some(*l3.get(6)?),
            _ => None,
        };
        Some(FrameHeader {
            dst: mac(0),
            src: mac(6),
            eth_type,
            ip_proto,
        })
    }
}
