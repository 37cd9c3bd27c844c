//! Classic libpcap container: reader, UDP payload extraction and a small
//! writer used to build captures.

use crate::error::{Error, Result};

pub const GLOBAL_HEADER_LEN: usize = 24;
pub const RECORD_HEADER_LEN: usize = 16;

const MAGIC_MICROS: u32 = 0xA1B2_C3D4;
const MAGIC_NANOS: u32 = 0xA1B2_3C4D;

pub const LINKTYPE_NULL: u32 = 0;
pub const LINKTYPE_ETHERNET: u32 = 1;
pub const LINKTYPE_RAW: u32 = 101;
pub const LINKTYPE_LINUX_SLL: u32 = 113;
pub const LINKTYPE_IPV4: u32 = 228;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endian {
    Little,
    Big,
}

impl Endian {
    fn u32(self, b: &[u8]) -> u32 {
        let a = [b[0], b[1], b[2], b[3]];
        match self {
            Endian::Little => u32::from_le_bytes(a),
            Endian::Big => u32::from_be_bytes(a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Record<'a> {
    /// Byte offset of the record header in the file.
    pub offset: usize,
    pub ts_sec: u32,
    pub ts_frac: u32,
    pub data: &'a [u8],
    /// Record header plus captured bytes.
    pub record_len: usize,
}

/// Outcome of pulling one record.
#[derive(Debug)]
pub enum Next<'a> {
    Record(Record<'a>),
    /// The record header claims more bytes than remain in the file.
    Truncated { offset: usize },
}

#[derive(Debug)]
pub struct PcapReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    endian: Endian,
    pub link_type: u32,
    pub nanosecond: bool,
}

impl<'a> PcapReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Result<Self> {
        if bytes.len() < GLOBAL_HEADER_LEN {
            return Err(Error::Pcap {
                offset: bytes.len(),
                reason: format!("file shorter than the {GLOBAL_HEADER_LEN}-byte global header"),
            });
        }
        let le = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
        let be = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
        let (endian, nanosecond) = match (le, be) {
            (MAGIC_MICROS, _) => (Endian::Little, false),
            (MAGIC_NANOS, _) => (Endian::Little, true),
            (_, MAGIC_MICROS) => (Endian::Big, false),
            (_, MAGIC_NANOS) => (Endian::Big, true),
            _ => {
                return Err(Error::Pcap { offset: 0, reason: format!("bad magic number {le:#010x}") })
            }
        };
        let major = match endian {
            Endian::Little => u16::from_le_bytes([bytes[4], bytes[5]]),
            Endian::Big => u16::from_be_bytes([bytes[4], bytes[5]]),
        };
        if major != 2 {
            return Err(Error::Pcap { offset: 4, reason: format!("unsupported version {major}") });
        }
        let link_type = endian.u32(&bytes[20..24]) & 0x0FFF_FFFF;
        Ok(PcapReader { bytes, pos: GLOBAL_HEADER_LEN, endian, link_type, nanosecond })
    }

    pub fn next_record(&mut self) -> Option<Next<'a>> {
        let rest = &self.bytes[self.pos..];
        if rest.is_empty() {
            return None;
        }
        let offset = self.pos;
        if rest.len() < RECORD_HEADER_LEN {
            self.pos = self.bytes.len();
            return Some(Next::Truncated { offset });
        }
        let incl = self.endian.u32(&rest[8..12]) as usize;
        if rest.len() - RECORD_HEADER_LEN < incl {
            self.pos = self.bytes.len();
            return Some(Next::Truncated { offset });
        }
        let record = Record {
            offset,
            ts_sec: self.endian.u32(&rest[0..4]),
            ts_frac: self.endian.u32(&rest[4..8]),
            data: &rest[RECORD_HEADER_LEN..RECORD_HEADER_LEN + incl],
            record_len: RECORD_HEADER_LEN + incl,
        };
        self.pos += record.record_len;
        Some(Next::Record(record))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UdpDatagram<'a> {
    pub src_port: u16,
    pub dst_port: u16,
    pub payload: &'a [u8],
}

/// Extracts the UDP datagram from a captured link-layer frame. Returns `None`
/// for anything that is not IPv4/UDP or is cut short.
pub fn udp_payload(link_type: u32, frame: &[u8]) -> Option<UdpDatagram<'_>> {
    let ip = match link_type {
        LINKTYPE_ETHERNET => {
            let mut ethertype = u16::from_be_bytes([*frame.get(12)?, *frame.get(13)?]);
            let mut start = 14;
            while ethertype == 0x8100 || ethertype == 0x88A8 {
                ethertype = u16::from_be_bytes([*frame.get(start + 2)?, *frame.get(start + 3)?]);
                start += 4;
            }
            if ethertype != 0x0800 {
                return None;
            }
            frame.get(start..)?
        }
        LINKTYPE_NULL => frame.get(4..)?,
        LINKTYPE_LINUX_SLL => {
            if u16::from_be_bytes([*frame.get(14)?, *frame.get(15)?]) != 0x0800 {
                return None;
            }
            frame.get(16..)?
        }
        LINKTYPE_RAW | LINKTYPE_IPV4 => frame,
        _ => return None,
    };
    let version_ihl = *ip.first()?;
    if version_ihl >> 4 != 4 || *ip.get(9)? != 17 {
        return None;
    }
    let ihl = (version_ihl & 0x0F) as usize * 4;
    let total_len = u16::from_be_bytes([*ip.get(2)?, *ip.get(3)?]) as usize;
    let udp = ip.get(ihl..total_len.max(ihl).min(ip.len()))?;
    if udp.len() < 8 {
        return None;
    }
    let udp_len = u16::from_be_bytes([udp[4], udp[5]]) as usize;
    if udp_len < 8 || udp_len > udp.len() {
        return None;
    }
    Some(UdpDatagram {
        src_port: u16::from_be_bytes([udp[0], udp[1]]),
        dst_port: u16::from_be_bytes([udp[2], udp[3]]),
        payload: &udp[8..udp_len],
    })
}

/// Writes little-endian microsecond captures of Ethernet/IPv4/UDP datagrams.
#[derive(Debug, Clone)]
pub struct PcapWriter {
    buf: Vec<u8>,
}

/// Ethernet + IPv4 + UDP header bytes added around each payload.
pub const UDP_FRAME_OVERHEAD: usize = 14 + 20 + 8;

impl Default for PcapWriter {
    fn default() -> Self {
        Self::new()
    }
}

impl PcapWriter {
    pub fn new() -> Self {
        let mut buf = Vec::with_capacity(1 << 20);
        buf.extend_from_slice(&MAGIC_MICROS.to_le_bytes());
        buf.extend_from_slice(&2u16.to_le_bytes());
        buf.extend_from_slice(&4u16.to_le_bytes());
        buf.extend_from_slice(&0i32.to_le_bytes());
        buf.extend_from_slice(&0u32.to_le_bytes());
        buf.extend_from_slice(&65535u32.to_le_bytes());
        buf.extend_from_slice(&LINKTYPE_ETHERNET.to_le_bytes());
        PcapWriter { buf }
    }

    pub fn push_raw(&mut self, ts_micros: u64, frame: &[u8]) {
        self.buf.extend_from_slice(&((ts_micros / 1_000_000) as u32).to_le_bytes());
        self.buf.extend_from_slice(&((ts_micros % 1_000_000) as u32).to_le_bytes());
        self.buf.extend_from_slice(&(frame.len() as u32).to_le_bytes());
        self.buf.extend_from_slice(&(frame.len() as u32).to_le_bytes());
        self.buf.extend_from_slice(frame);
    }

    pub fn push_udp(&mut self, ts_micros: u64, dst_port: u16, payload: &[u8]) {
        let mut frame = Vec::with_capacity(UDP_FRAME_OVERHEAD + payload.len());
        frame.extend_from_slice(&[0xFF; 6]);
        frame.extend_from_slice(&[0x60, 0x76, 0x88, 0x00, 0x00, 0x01]);
        frame.extend_from_slice(&0x0800u16.to_be_bytes());

        let total = (20 + 8 + payload.len()) as u16;
        let mut ip = [0u8; 20];
        ip[0] = 0x45;
        ip[2..4].copy_from_slice(&total.to_be_bytes());
        ip[6] = 0x40;
        ip[8] = 64;
        ip[9] = 17;
        ip[12..16].copy_from_slice(&[192, 168, 1, 201]);
        ip[16..20].copy_from_slice(&[255, 255, 255, 255]);
        let checksum = ipv4_checksum(&ip);
        ip[10..12].copy_from_slice(&checksum.to_be_bytes());
        frame.extend_from_slice(&ip);

        frame.extend_from_slice(&dst_port.to_be_bytes());
        frame.extend_from_slice(&dst_port.to_be_bytes());
        frame.extend_from_slice(&((8 + payload.len()) as u16).to_be_bytes());
        frame.extend_from_slice(&0u16.to_be_bytes());
        frame.extend_from_slice(payload);
        self.push_raw(ts_micros, &frame);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.len() == GLOBAL_HEADER_LEN
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

fn ipv4_checksum(header: &[u8; 20]) -> u16 {
    let mut sum: u32 = header
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
        .sum();
    while sum > 0xFFFF {
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    !(sum as u16)
}
