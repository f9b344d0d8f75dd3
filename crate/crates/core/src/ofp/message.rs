use super::instruction::{Action, Instruction};
use super::oxm::{MacAddr, Match};
use super::wire::{Put, Reader};
use super::{DecodeError, EncodeError, OfHeader, HEADER_LEN, OFP_VERSION};

pub const OFPT_HELLO: u8 = 0;
pub const OFPT_ERROR: u8 = 1;
pub const OFPT_ECHO_REQUEST: u8 = 2;
pub const OFPT_ECHO_REPLY: u8 = 3;
pub const OFPT_FEATURES_REQUEST: u8 = 5;
pub const OFPT_FEATURES_REPLY: u8 = 6;
pub const OFPT_PACKET_IN: u8 = 10;
pub const OFPT_PORT_STATUS: u8 = 12;
pub const OFPT_PACKET_OUT: u8 = 13;
pub const OFPT_FLOW_MOD: u8 = 14;
pub const OFPT_MULTIPART_REQUEST: u8 = 18;
pub const OFPT_MULTIPART_REPLY: u8 = 19;
pub const OFPT_BARRIER_REQUEST: u8 = 20;
pub const OFPT_BARRIER_REPLY: u8 = 21;

pub const OFPMP_DESC: u16 = 0;
pub const OFPMP_PORT_STATS: u16 = 4;
pub const OFPMPF_REPLY_MORE: u16 = 1;

pub const OFP_NO_BUFFER: u32 = 0xffff_ffff;
pub const OFPTT_ALL: u8 = 0xff;
pub const OFPG_ANY: u32 = 0xffff_ffff;

pub const OFPET_HELLO_FAILED: u16 = 0;
pub const OFPHFC_INCOMPATIBLE: u16 = 0;

pub const OFPR_NO_MATCH: u8 = 0;
pub const OFPR_ACTION: u8 = 1;

const HELLO_ELEM_VERSIONBITMAP: u16 = 1;
const PORT_STATS_LEN: usize = 112;
const PORT_DESC_LEN: usize = 64;
const DESC_STR_LEN: usize = 256;
const SERIAL_NUM_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HelloElement {
    VersionBitmap(Vec<u32>),
    Other { element_type: u16, body: Vec<u8> },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Hello {
    pub elements: Vec<HelloElement>,
}

impl Hello {
    /// A hello advertising exactly OpenFlow 1.3.
    pub fn v13_only() -> Self {
        Hello {
            elements: vec![HelloElement::VersionBitmap(vec![1 << OFP_VERSION])],
        }
    }

    /// Whether the sender can speak `version`; without a bitmap the header
    /// version is the sender's highest, and we only decode 1.3 headers.
    pub fn supports(&self, version: u8) -> bool {
        for e in &self.elements {
            if let HelloElement::VersionBitmap(words) = e {
                let word = (version / 32) as usize;
                return words
                    .get(word)
                    .is_some_and(|w| w & (1 << (version % 32)) != 0);
            }
        }
        version == OFP_VERSION
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorMsg {
    pub err_type: u16,
    pub code: u16,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeaturesReply {
    pub datapath_id: u64,
    pub n_buffers: u32,
    pub n_tables: u8,
    pub auxiliary_id: u8,
    pub capabilities: u32,
    pub reserved: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowModCommand {
    Add,
    Modify,
    ModifyStrict,
    Delete,
    DeleteStrict,
}

impl FlowModCommand {
    fn code(self) -> u8 {
        match self {
            FlowModCommand::Add => 0,
            FlowModCommand::Modify => 1,
            FlowModCommand::ModifyStrict => 2,
            FlowModCommand::Delete => 3,
            FlowModCommand::DeleteStrict => 4,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => FlowModCommand::Add,
            1 => FlowModCommand::Modify,
            2 => FlowModCommand::ModifyStrict,
            3 => FlowModCommand::Delete,
            4 => FlowModCommand::DeleteStrict,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowMod {
    pub cookie: u64,
    pub cookie_mask: u64,
    pub table_id: u8,
    pub command: FlowModCommand,
    pub idle_timeout: u16,
    pub hard_timeout: u16,
    pub priority: u16,
    pub buffer_id: u32,
    pub out_port: u32,
    pub out_group: u32,
    pub flags: u16,
    pub matches: Match,
    pub instructions: Vec<Instruction>,
}

impl FlowMod {
    /// A flow mod with the "don't care" defaults for every optional field.
    pub fn new(command: FlowModCommand, table_id: u8, priority: u16, matches: Match) -> Self {
        FlowMod {
            cookie: 0,
            cookie_mask: 0,
            table_id,
            command,
            idle_timeout: 0,
            hard_timeout: 0,
            priority,
            buffer_id: OFP_NO_BUFFER,
            out_port: super::OFPP_ANY,
            out_group: OFPG_ANY,
            flags: 0,
            matches,
            instructions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketIn {
    pub buffer_id: u32,
    pub total_len: u16,
    pub reason: u8,
    pub table_id: u8,
    pub cookie: u64,
    pub matches: Match,
    pub data: Vec<u8>,
}

impl PacketIn {
    pub fn in_port(&self) -> Option<u32> {
        self.matches.get_in_port()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketOut {
    pub buffer_id: u32,
    pub in_port: u32,
    pub actions: Vec<Action>,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PortDesc {
    pub port_no: u32,
    pub hw_addr: MacAddr,
    pub name: String,
    pub config: u32,
    pub state: u32,
    pub curr: u32,
    pub advertised: u32,
    pub supported: u32,
    pub peer: u32,
    pub curr_speed: u32,
    pub max_speed: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortStatus {
    pub reason: u8,
    pub desc: PortDesc,
}

/// Cumulative counters for one port, as carried in a PORT_STATS reply.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PortStatsEntry {
    pub port_no: u32,
    pub rx_packets: u64,
    pub tx_packets: u64,
    pub rx_bytes: u64,
    pub tx_bytes: u64,
    pub rx_dropped: u64,
    pub tx_dropped: u64,
    pub rx_errors: u64,
    pub tx_errors: u64,
    pub rx_frame_err: u64,
    pub rx_over_err: u64,
    pub rx_crc_err: u64,
    pub collisions: u64,
    pub duration_sec: u32,
    pub duration_nsec: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DescStats {
    pub mfr_desc: String,
    pub hw_desc: String,
    pub sw_desc: String,
    pub serial_num: String,
    pub dp_desc: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MultipartRequestBody {
    Desc,
    PortStats { port_no: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultipartRequest {
    pub flags: u16,
    pub body: MultipartRequestBody,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MultipartReplyBody {
    Desc(DescStats),
    PortStats(Vec<PortStatsEntry>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultipartReply {
    pub flags: u16,
    pub body: MultipartReplyBody,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OfBody {
    Hello(Hello),
    Error(ErrorMsg),
    EchoRequest(Vec<u8>),
    EchoReply(Vec<u8>),
    FeaturesRequest,
    FeaturesReply(FeaturesReply),
    PacketIn(PacketIn),
    PortStatus(PortStatus),
    PacketOut(PacketOut),
    FlowMod(FlowMod),
    MultipartRequest(MultipartRequest),
    MultipartReply(MultipartReply),
    BarrierRequest,
    BarrierReply,
}

impl OfBody {
    pub fn msg_type(&self) -> u8 {
        match self {
            OfBody::Hello(_) => OFPT_HELLO,
            OfBody::Error(_) => OFPT_ERROR,
            OfBody::EchoRequest(_) => OFPT_ECHO_REQUEST,
            OfBody::EchoReply(_) => OFPT_ECHO_REPLY,
            OfBody::FeaturesRequest => OFPT_FEATURES_REQUEST,
            OfBody::FeaturesReply(_) => OFPT_FEATURES_REPLY,
            OfBody::PacketIn(_) => OFPT_PACKET_IN,
            OfBody::PortStatus(_) => OFPT_PORT_STATUS,
            OfBody::PacketOut(_) => OFPT_PACKET_OUT,
            OfBody::FlowMod(_) => OFPT_FLOW_MOD,
            OfBody::MultipartRequest(_) => OFPT_MULTIPART_REQUEST,
            OfBody::MultipartReply(_) => OFPT_MULTIPART_REPLY,
            OfBody::BarrierRequest => OFPT_BARRIER_REQUEST,
            OfBody::BarrierReply => OFPT_BARRIER_REPLY,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OfBody::Hello(_) => "HELLO",
            OfBody::Error(_) => "ERROR",
            OfBody::EchoRequest(_) => "ECHO_REQUEST",
            OfBody::EchoReply(_) => "ECHO_REPLY",
            OfBody::FeaturesRequest => "FEATURES_REQUEST",
            OfBody::FeaturesReply(_) => "FEATURES_REPLY",
            OfBody::PacketIn(_) => "PACKET_IN",
            OfBody::PortStatus(_) => "PORT_STATUS",
            OfBody::PacketOut(_) => "PACKET_OUT",
            OfBody::FlowMod(_) => "FLOW_MOD",
            OfBody::MultipartRequest(_) => "MULTIPART_REQUEST",
            OfBody::MultipartReply(_) => "MULTIPART_REPLY",
            OfBody::BarrierRequest => "BARRIER_REQUEST",
            OfBody::BarrierReply => "BARRIER_REPLY",
        }
    }
}

/// A decoded OpenFlow 1.3 message. The header's version and length are
/// implied: version is always 1.3 and length is computed on encode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OfMessage {
    pub xid: u32,
    pub body: OfBody,
}

impl OfMessage {
    pub fn new(xid: u32, body: OfBody) -> Self {
        OfMessage { xid, body }
    }

    pub fn encode(&self) -> Result<Vec<u8>, EncodeError> {
        let mut out = Vec::with_capacity(64);
        out.put_u8(OFP_VERSION);
        out.put_u8(self.body.msg_type());
        out.put_u16(0);
        out.put_u32(self.xid);
        encode_body(&self.body, &mut out)?;
        if out.len() > u16::MAX as usize {
            return Err(EncodeError::TooLong(out.len()));
        }
        let len = out.len() as u16;
        out.patch_u16(2, len);
        Ok(out)
    }

    /// Decode the first frame in `bytes`. Trailing bytes past the header's
    /// length are ignored.
    pub fn decode(bytes: &[u8]) -> Result<OfMessage, DecodeError> {
        let header = OfHeader::parse(bytes)?;
        if header.version != OFP_VERSION {
            return Err(DecodeError::BadVersion(header.version));
        }
        let len = header.length as usize;
        if len < HEADER_LEN {
            return Err(DecodeError::BadLength(header.length));
        }
        if bytes.len() < len {
            return Err(DecodeError::Truncated {
                needed: len,
                available: bytes.len(),
            });
        }
        let frame = &bytes[..len];
        let mut r = Reader::new(&frame[HEADER_LEN..]);
        let body = decode_body(header.msg_type, &mut r).map_err(|e| match e {
            DecodeError::UnknownType { msg_type, .. } => DecodeError::UnknownType {
                msg_type,
                frame: frame.to_vec(),
            },
            other => other,
        })?;
        if !r.is_empty() {
            return Err(DecodeError::Malformed(format!(
                "{} trailing bytes in {}",
                r.remaining(),
                body.name()
            )));
        }
        Ok(OfMessage {
            xid: header.xid,
            body,
        })
    }
}

fn put_str(out: &mut Vec<u8>, s: &str, width: usize) -> Result<(), EncodeError> {
    if s.len() >= width || s.contains('\0') {
        return Err(EncodeError::Unrepresentable(format!(
            "string of {} bytes does not fit a {width}-byte field",
            s.len()
        )));
    }
    out.extend_from_slice(s.as_bytes());
    out.put_zeros(width - s.len());
    Ok(())
}

fn get_str(r: &mut Reader<'_>, width: usize) -> Result<String, DecodeError> {
    let raw = r.bytes(width)?;
    let end = raw.iter().position(|b| *b == 0).unwrap_or(width);
    Ok(String::from_utf8_lossy(&raw[..end]).into_owned())
}

fn encode_body(body: &OfBody, out: &mut Vec<u8>) -> Result<(), EncodeError> {
    match body {
        OfBody::Hello(h) => {
            for e in &h.elements {
                let start = out.len();
                match e {
                    HelloElement::VersionBitmap(words) => {
                        out.put_u16(HELLO_ELEM_VERSIONBITMAP);
                        out.put_u16((4 + 4 * words.len()) as u16);
                        for w in words {
                            out.put_u32(*w);
                        }
                    }
                    HelloElement::Other { element_type, body } => {
                        if body.len() + 4 > u16::MAX as usize {
                            return Err(EncodeError::TooLong(body.len()));
                        }
                        out.put_u16(*element_type);
                        out.put_u16((4 + body.len()) as u16);
                        out.extend_from_slice(body);
                    }
                }
                out.pad8_from(start);
            }
        }
        OfBody::Error(e) => {
            out.put_u16(e.err_type);
            out.put_u16(e.code);
            out.extend_from_slice(&e.data);
        }
        OfBody::EchoRequest(p) | OfBody::EchoReply(p) => out.extend_from_slice(p),
        OfBody::FeaturesRequest | OfBody::BarrierRequest | OfBody::BarrierReply => {}
        OfBody::FeaturesReply(f) => {
            out.put_u64(f.datapath_id);
            out.put_u32(f.n_buffers);
            out.put_u8(f.n_tables);
            out.put_u8(f.auxiliary_id);
            out.put_zeros(2);
            out.put_u32(f.capabilities);
            out.put_u32(f.reserved);
        }
        OfBody::PacketIn(p) => {
            out.put_u32(p.buffer_id);
            out.put_u16(p.total_len);
            out.put_u8(p.reason);
            out.put_u8(p.table_id);
            out.put_u64(p.cookie);
            p.matches.encode(out)?;
            out.put_zeros(2);
            out.extend_from_slice(&p.data);
        }
        OfBody::PortStatus(s) => {
            out.put_u8(s.reason);
            out.put_zeros(7);
            encode_port_desc(&s.desc, out)?;
        }
        OfBody::PacketOut(p) => {
            out.put_u32(p.buffer_id);
            out.put_u32(p.in_port);
            let len_at = out.len();
            out.put_u16(0);
            out.put_zeros(6);
            let start = out.len();
            for a in &p.actions {
                a.encode(out)?;
            }
            let alen = out.len() - start;
            if alen > u16::MAX as usize {
                return Err(EncodeError::TooLong(alen));
            }
            out.patch_u16(len_at, alen as u16);
            out.extend_from_slice(&p.data);
        }
        OfBody::FlowMod(f) => {
            out.put_u64(f.cookie);
            out.put_u64(f.cookie_mask);
            out.put_u8(f.table_id);
            out.put_u8(f.command.code());
            out.put_u16(f.idle_timeout);
            out.put_u16(f.hard_timeout);
            out.put_u16(f.priority);
            out.put_u32(f.buffer_id);
            out.put_u32(f.out_port);
            out.put_u32(f.out_group);
            out.put_u16(f.flags);
            out.put_zeros(2);
            f.matches.encode(out)?;
            for i in &f.instructions {
                i.encode(out)?;
            }
        }
        OfBody::MultipartRequest(m) => match &m.body {
            MultipartRequestBody::Desc => {
                out.put_u16(OFPMP_DESC);
                out.put_u16(m.flags);
                out.put_zeros(4);
            }
            MultipartRequestBody::PortStats { port_no } => {
                out.put_u16(OFPMP_PORT_STATS);
                out.put_u16(m.flags);
                out.put_zeros(4);
                out.put_u32(*port_no);
                out.put_zeros(4);
            }
        },
        OfBody::MultipartReply(m) => match &m.body {
            MultipartReplyBody::Desc(d) => {
                out.put_u16(OFPMP_DESC);
                out.put_u16(m.flags);
                out.put_zeros(4);
                put_str(out, &d.mfr_desc, DESC_STR_LEN)?;
                put_str(out, &d.hw_desc, DESC_STR_LEN)?;
                put_str(out, &d.sw_desc, DESC_STR_LEN)?;
                put_str(out, &d.serial_num, SERIAL_NUM_LEN)?;
                put_str(out, &d.dp_desc, DESC_STR_LEN)?;
            }
            MultipartReplyBody::PortStats(entries) => {
                out.put_u16(OFPMP_PORT_STATS);
                out.put_u16(m.flags);
                out.put_zeros(4);
                for e in entries {
                    out.put_u32(e.port_no);
                    out.put_zeros(4);
                    for v in [
                        e.rx_packets,
                        e.tx_packets,
                        e.rx_bytes,
                        e.tx_bytes,
                        e.rx_dropped,
                        e.tx_dropped,
                        e.rx_errors,
                        e.tx_errors,
                        e.rx_frame_err,
                        e.rx_over_err,
                        e.rx_crc_err,
                        e.collisions,
                    ] {
                        out.put_u64(v);
                    }
                    out.put_u32(e.duration_sec);
                    out.put_u32(e.duration_nsec);
                }
            }
        },
    }
    Ok(())
}

fn encode_port_desc(d: &PortDesc, out: &mut Vec<u8>) -> Result<(), EncodeError> {
    out.put_u32(d.port_no);
    out.put_zeros(4);
    out.extend_from_slice(&d.hw_addr);
    out.put_zeros(2);
    put_str(out, &d.name, 16)?;
    for v in [
        d.config,
        d.state,
        d.curr,
        d.advertised,
        d.supported,
        d.peer,
        d.curr_speed,
        d.max_speed,
    ] {
        out.put_u32(v);
    }
    Ok(())
}

fn decode_port_desc(r: &mut Reader<'_>) -> Result<PortDesc, DecodeError> {
    let port_no = r.u32()?;
    r.skip(4)?;
    let hw_addr = r.mac()?;
    r.skip(2)?;
    let name = get_str(r, 16)?;
    Ok(PortDesc {
        port_no,
        hw_addr,
        name,
        config: r.u32()?,
        state: r.u32()?,
        curr: r.u32()?,
        advertised: r.u32()?,
        supported: r.u32()?,
        peer: r.u32()?,
        curr_speed: r.u32()?,
        max_speed: r.u32()?,
    })
}

fn decode_body(msg_type: u8, r: &mut Reader<'_>) -> Result<OfBody, DecodeError> {
    Ok(match msg_type {
        OFPT_HELLO => {
            let mut elements = Vec::new();
            while !r.is_empty() {
                let typ = r.u16()?;
                let len = r.u16()? as usize;
                if len < 4 {
                    return Err(DecodeError::Malformed(format!("hello element length {len}")));
                }
                let mut body = r.sub(len - 4)?;
                // padding may be absent on the final element
                let pad = (8 - len % 8) % 8;
                r.skip(pad.min(r.remaining()))?;
                elements.push(if typ == HELLO_ELEM_VERSIONBITMAP {
                    if (len - 4) % 4 != 0 {
                        return Err(DecodeError::Malformed("version bitmap length".into()));
                    }
                    let mut words = Vec::new();
                    while !body.is_empty() {
                        words.push(body.u32()?);
                    }
                    HelloElement::VersionBitmap(words)
                } else {
                    HelloElement::Other {
                        element_type: typ,
                        body: body.rest().to_vec(),
                    }
                });
            }
            OfBody::Hello(Hello { elements })
        }
        OFPT_ERROR => OfBody::Error(ErrorMsg {
            err_type: r.u16()?,
            code: r.u16()?,
            data: r.rest().to_vec(),
        }),
        OFPT_ECHO_REQUEST => OfBody::EchoRequest(r.rest().to_vec()),
        OFPT_ECHO_REPLY => OfBody::EchoReply(r.rest().to_vec()),
        OFPT_FEATURES_REQUEST => OfBody::FeaturesRequest,
        OFPT_BARRIER_REQUEST => OfBody::BarrierRequest,
        OFPT_BARRIER_REPLY => OfBody::BarrierReply,
        OFPT_FEATURES_REPLY => {
            let datapath_id = r.u64()?;
            let n_buffers = r.u32()?;
            let n_tables = r.u8()?;
            let auxiliary_id = r.u8()?;
            r.skip(2)?;
            OfBody::FeaturesReply(FeaturesReply {
                datapath_id,
                n_buffers,
                n_tables,
                auxiliary_id,
                capabilities: r.u32()?,
                reserved: r.u32()?,
            })
        }
        OFPT_PACKET_IN => {
            let buffer_id = r.u32()?;
            let total_len = r.u16()?;
            let reason = r.u8()?;
            let table_id = r.u8()?;
            let cookie = r.u64()?;
            let matches = Match::decode(r)?;
            r.skip(2)?;
            OfBody::PacketIn(PacketIn {
                buffer_id,
                total_len,
                reason,
                table_id,
                cookie,
                matches,
                data: r.rest().to_vec(),
            })
        }
        OFPT_PORT_STATUS => {
            let reason = r.u8()?;
            r.skip(7)?;
            let mut d = r.sub(PORT_DESC_LEN)?;
            OfBody::PortStatus(PortStatus {
                reason,
                desc: decode_port_desc(&mut d)?,
            })
        }
        OFPT_PACKET_OUT => {
            let buffer_id = r.u32()?;
            let in_port = r.u32()?;
            let actions_len = r.u16()? as usize;
            r.skip(6)?;
            let actions = Action::decode_list(r.sub(actions_len)?)?;
            OfBody::PacketOut(PacketOut {
                buffer_id,
                in_port,
                actions,
                data: r.rest().to_vec(),
            })
        }
        OFPT_FLOW_MOD => {
            let cookie = r.u64()?;
            let cookie_mask = r.u64()?;
            let table_id = r.u8()?;
            let cmd = r.u8()?;
            let command = FlowModCommand::from_code(cmd)
                .ok_or_else(|| DecodeError::Malformed(format!("flow_mod command {cmd}")))?;
            let idle_timeout = r.u16()?;
            let hard_timeout = r.u16()?;
            let priority = r.u16()?;
            let buffer_id = r.u32()?;
            let out_port = r.u32()?;
            let out_group = r.u32()?;
            let flags = r.u16()?;
            r.skip(2)?;
            let matches = Match::decode(r)?;
            let instructions = Instruction::decode_list(Reader::new(r.rest()))?;
            OfBody::FlowMod(FlowMod {
                cookie,
                cookie_mask,
                table_id,
                command,
                idle_timeout,
                hard_timeout,
                priority,
                buffer_id,
                out_port,
                out_group,
                flags,
                matches,
                instructions,
            })
        }
        OFPT_MULTIPART_REQUEST => {
            let mp_type = r.u16()?;
            let flags = r.u16()?;
            r.skip(4)?;
            let body = match mp_type {
                OFPMP_DESC => MultipartRequestBody::Desc,
                OFPMP_PORT_STATS => {
                    let port_no = r.u32()?;
                    r.skip(4)?;
                    MultipartRequestBody::PortStats { port_no }
                }
                other => return Err(DecodeError::UnsupportedMultipart(other)),
            };
            OfBody::MultipartRequest(MultipartRequest { flags, body })
        }
        OFPT_MULTIPART_REPLY => {
            let mp_type = r.u16()?;
            let flags = r.u16()?;
            r.skip(4)?;
            let body = match mp_type {
                OFPMP_DESC => MultipartReplyBody::Desc(DescStats {
                    mfr_desc: get_str(r, DESC_STR_LEN)?,
                    hw_desc: get_str(r, DESC_STR_LEN)?,
                    sw_desc: get_str(r, DESC_STR_LEN)?,
                    serial_num: get_str(r, SERIAL_NUM_LEN)?,
                    dp_desc: get_str(r, DESC_STR_LEN)?,
                }),
                OFPMP_PORT_STATS => {
                    if r.remaining() % PORT_STATS_LEN != 0 {
                        return Err(DecodeError::Malformed(format!(
                            "port stats body of {} bytes",
                            r.remaining()
                        )));
                    }
                    let mut entries = Vec::with_capacity(r.remaining() / PORT_STATS_LEN);
                    while !r.is_empty() {
                        let port_no = r.u32()?;
                        r.skip(4)?;
                        entries.push(PortStatsEntry {
                            port_no,
                            rx_packets: r.u64()?,
                            tx_packets: r.u64()?,
                            rx_bytes: r.u64()?,
                            tx_bytes: r.u64()?,
                            rx_dropped: r.u64()?,
                            tx_dropped: r.u64()?,
                            rx_errors: r.u64()?,
                            tx_errors: r.u64()?,
                            rx_frame_err: r.u64()?,
                            rx_over_err: r.u64()?,
                            rx_crc_err: r.u64()?,
                            collisions: r.u64()?,
                            duration_sec: r.u32()?,
                            duration_nsec: r.u32()?,
                        });
                    }
                    MultipartReplyBody::PortStats(entries)
                }
                other => return Err(DecodeError::UnsupportedMultipart(other)),
            };
            OfBody::MultipartReply(MultipartReply { flags, body })
        }
        other => {
            return Err(DecodeError::UnknownType {
                msg_type: other,
                frame: Vec::new(),
            })
        }
    })
}
