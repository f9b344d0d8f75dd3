//! OpenFlow 1.3 wire codec for the message subset the controller, the stats
//! poller and the simulator exchange. Big-endian throughout.

mod frame;
mod instruction;
mod message;
mod oxm;
mod wire;

pub use frame::{frame_stream, FrameBuffer, FramingError};
pub use instruction::*;
pub use message::*;
pub use oxm::*;

pub const OFP_VERSION: u8 = 0x04;
pub const HEADER_LEN: usize = 8;
/// Largest body that fits the 16-bit length field.
pub const MAX_BODY_LEN: usize = u16::MAX as usize - HEADER_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OfHeader {
    pub version: u8,
    pub msg_type: u8,
    pub length: u16,
    pub xid: u32,
}

impl OfHeader {
    pub fn parse(bytes: &[u8]) -> Result<OfHeader, DecodeError> {
        if bytes.len() < HEADER_LEN {
            return Err(DecodeError::Truncated {
                needed: HEADER_LEN,
                available: bytes.len(),
            });
        }
        Ok(OfHeader {
            version: bytes[0],
            msg_type: bytes[1],
            length: u16::from_be_bytes([bytes[2], bytes[3]]),
            xid: u32::from_be_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("truncated: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("unsupported version {0:#04x}")]
    BadVersion(u8),
    #[error("header length {0} is shorter than the header")]
    BadLength(u16),
    /// The frame is kept so it can be logged; the stream stays usable.
    #[error("unknown message type {msg_type}")]
    UnknownType { msg_type: u8, frame: Vec<u8> },
    #[error("unsupported multipart type {0}")]
    UnsupportedMultipart(u16),
    #[error("malformed OXM: {0}")]
    MalformedOxm(String),
    #[error("malformed message: {0}")]
    Malformed(String),
}

impl DecodeError {
    /// Errors after which the rest of the stream can still be read.
    pub fn is_skippable(&self) -> bool {
        matches!(
            self,
            DecodeError::UnknownType { .. } | DecodeError::UnsupportedMultipart(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("message of {0} bytes exceeds the 16-bit length field")]
    TooLong(usize),
    #[error("unrepresentable field: {0}")]
    Unrepresentable(String),
}

pub fn encode(msg: &OfMessage) -> Result<Vec<u8>, EncodeError> {
    msg.encode()
}

pub fn decode(bytes: &[u8]) -> Result<OfMessage, DecodeError> {
    OfMessage::decode(bytes)
}

#[cfg(feature = "testkit")]
pub mod arbitrary;
#[cfg(feature = "testkit")]
pub mod golden;
