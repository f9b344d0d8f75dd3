use std::fmt;

use super::wire::{Put, Reader};
use super::{DecodeError, EncodeError};

pub const OFPP_MAX: u32 = 0xffff_ff00;
pub const OFPP_IN_PORT: u32 = 0xffff_fff8;
pub const OFPP_FLOOD: u32 = 0xffff_fffb;
pub const OFPP_ALL: u32 = 0xffff_fffc;
pub const OFPP_CONTROLLER: u32 = 0xffff_fffd;
pub const OFPP_LOCAL: u32 = 0xffff_fffe;
pub const OFPP_ANY: u32 = 0xffff_ffff;

/// `max_len` meaning "send the whole packet to the controller".
pub const OFPCML_NO_BUFFER: u16 = 0xffff;

const OFPAT_OUTPUT: u16 = 0;
const OFPIT_GOTO_TABLE: u16 = 1;
const OFPIT_WRITE_METADATA: u16 = 2;
const OFPIT_APPLY_ACTIONS: u16 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Output { port: u32, max_len: u16 },
    Other { action_type: u16, body: Vec<u8> },
}

impl Action {
    pub fn output(port: u32) -> Self {
        let max_len = if port == OFPP_CONTROLLER { OFPCML_NO_BUFFER } else { 0 };
        Action::Output { port, max_len }
    }

    pub(crate) fn encode(&self, out: &mut Vec<u8>) -> Result<(), EncodeError> {
        match self {
            Action::Output { port, max_len } => {
                out.put_u16(OFPAT_OUTPUT);
                out.put_u16(16);
                out.put_u32(*port);
                out.put_u16(*max_len);
                out.put_zeros(6);
            }
            Action::Other { action_type, body } => {
                let len = body.len() + 4;
                if len % 8 != 0 || len > u16::MAX as usize {
                    return Err(EncodeError::Unrepresentable(format!(
                        "action {action_type} body of {} bytes",
                        body.len()
                    )));
                }
                out.put_u16(*action_type);
                out.put_u16(len as u16);
                out.extend_from_slice(body);
            }
        }
        Ok(())
    }

    pub(crate) fn decode_list(mut r: Reader<'_>) -> Result<Vec<Action>, DecodeError> {
        let mut out = Vec::new();
        while !r.is_empty() {
            let typ = r.u16()?;
            let len = r.u16()? as usize;
            if len < 8 || len % 8 != 0 {
                return Err(DecodeError::Malformed(format!("action length {len}")));
            }
            let mut body = r.sub(len - 4)?;
            out.push(match typ {
                OFPAT_OUTPUT if len == 16 => {
                    let port = body.u32()?;
                    let max_len = body.u16()?;
                    Action::Output { port, max_len }
                }
                OFPAT_OUTPUT => return Err(DecodeError::Malformed(format!("output action length {len}"))),
                _ => Action::Other {
                    action_type: typ,
                    body: body.rest().to_vec(),
                },
            });
        }
        Ok(out)
    }
}

pub fn port_name(port: u32) -> String {
    match port {
        OFPP_FLOOD => "flood".into(),
        OFPP_ALL => "all".into(),
        OFPP_CONTROLLER => "controller".into(),
        OFPP_IN_PORT => "in_port".into(),
        OFPP_LOCAL => "local".into(),
        OFPP_ANY => "any".into(),
        p => p.to_string(),
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Output { port, .. } => write!(f, "output:{}", port_name(*port)),
            Action::Other { action_type, .. } => write!(f, "action({action_type})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Instruction {
    GotoTable(u8),
    WriteMetadata { metadata: u64, mask: u64 },
    ApplyActions(Vec<Action>),
    Other { instruction_type: u16, body: Vec<u8> },
}

impl Instruction {
    pub(crate) fn encode(&self, out: &mut Vec<u8>) -> Result<(), EncodeError> {
        let start = out.len();
        match self {
            Instruction::GotoTable(t) => {
                out.put_u16(OFPIT_GOTO_TABLE);
                out.put_u16(8);
                out.put_u8(*t);
                out.put_zeros(3);
            }
            Instruction::WriteMetadata { metadata, mask } => {
                out.put_u16(OFPIT_WRITE_METADATA);
                out.put_u16(24);
                out.put_zeros(4);
                out.put_u64(*metadata);
                out.put_u64(*mask);
            }
            Instruction::ApplyActions(actions) => {
                out.put_u16(OFPIT_APPLY_ACTIONS);
                out.put_u16(0);
                out.put_zeros(4);
                for a in actions {
                    a.encode(out)?;
                }
                let len = out.len() - start;
                if len > u16::MAX as usize {
                    return Err(EncodeError::Unrepresentable("action list too long".into()));
                }
                out.patch_u16(start + 2, len as u16);
            }
            Instruction::Other {
                instruction_type,
                body,
            } => {
                let len = body.len() + 4;
                if len % 8 != 0 || len > u16::MAX as usize {
                    return Err(EncodeError::Unrepresentable(format!(
                        "instruction {instruction_type} body of {} bytes",
                        body.len()
                    )));
                }
                out.put_u16(*instruction_type);
                out.put_u16(len as u16);
                out.extend_from_slice(body);
            }
        }
        Ok(())
    }

    pub(crate) fn decode_list(mut r: Reader<'_>) -> Result<Vec<Instruction>, DecodeError> {
        let mut out = Vec::new();
        while !r.is_empty() {
            let typ = r.u16()?;
            let len = r.u16()? as usize;
            if len < 8 || len % 8 != 0 {
                return Err(DecodeError::Malformed(format!("instruction length {len}")));
            }
            let mut body = r.sub(len - 4)?;
            out.push(match (typ, len) {
                (OFPIT_GOTO_TABLE, 8) => Instruction::GotoTable(body.u8()?),
                (OFPIT_WRITE_METADATA, 24) => {
                    body.skip(4)?;
                    let metadata = body.u64()?;
                    let mask = body.u64()?;
                    Instruction::WriteMetadata { metadata, mask }
                }
                (OFPIT_APPLY_ACTIONS, _) => {
                    body.skip(4)?;
                    Instruction::ApplyActions(Action::decode_list(body)?)
                }
                (OFPIT_GOTO_TABLE | OFPIT_WRITE_METADATA, _) => {
                    return Err(DecodeError::Malformed(format!(
                        "instruction {typ} has length {len}"
                    )))
                }
                _ => Instruction::Other {
                    instruction_type: typ,
                    body: body.rest().to_vec(),
                },
            });
        }
        Ok(out)
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::GotoTable(t) => write!(f, "goto:{t}"),
            Instruction::WriteMetadata { metadata, .. } => write!(f, "write_metadata:{metadata:#x}"),
            Instruction::ApplyActions(actions) => {
                for (i, a) in actions.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                Ok(())
            }
            Instruction::Other {
                instruction_type, ..
            } => write!(f, "instruction({instruction_type})"),
        }
    }
}
