//! Streaming reader and writer for the MRT BGP4MP subset (RFC 6396) that
//! carries BGP UPDATE messages (RFC 4271).
//!
//! Supported record types are BGP4MP (16) and BGP4MP_ET (17) with subtypes
//! MESSAGE (1) and MESSAGE_AS4 (4) over IPv4. Everything else is counted as
//! skipped. A malformed payload inside a well-framed record is counted and
//! skipped; a truncated header or payload ends the stream because the next
//! record boundary can no longer be trusted.

use std::io::{self, Cursor, Read, Write};
use std::net::Ipv4Addr;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::{BgpUpdateRecord, Ipv4Prefix, Origin, PrefixAnnouncement, Timestamp, ValidationError};

pub const MRT_HEADER_LEN: usize = 12;
pub const TYPE_BGP4MP: u16 = 16;
pub const TYPE_BGP4MP_ET: u16 = 17;
pub const SUBTYPE_MESSAGE: u16 = 1;
pub const SUBTYPE_MESSAGE_AS4: u16 = 4;

/// Largest payload accepted before the length field is treated as corrupt.
pub const MAX_RECORD_LEN: u32 = 1 << 20;

const BGP_MARKER: [u8; 16] = [0xff; 16];
const BGP_HEADER_LEN: usize = 19;
const BGP_MSG_UPDATE: u8 = 2;
const AFI_IPV4: u16 = 1;

const ATTR_ORIGIN: u8 = 1;
const ATTR_AS_PATH: u8 = 2;
const ATTR_AS4_PATH: u8 = 17;
const FLAG_TRANSITIVE: u8 = 0x40;
const FLAG_EXTENDED_LEN: u8 = 0x10;

const SEG_AS_SET: u8 = 1;
const SEG_AS_SEQUENCE: u8 = 2;
const SEG_CONFED_SEQUENCE: u8 = 3;
const SEG_CONFED_SET: u8 = 4;

/// Where and why a stream was abandoned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamAbort {
    pub offset: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseStats {
    pub records_emitted: u64,
    pub records_skipped: u64,
    pub malformed: u64,
    /// Set when a framing error made it impossible to continue.
    pub abort: Option<StreamAbort>,
}

impl ParseStats {
    pub fn total(&self) -> u64 {
        self.records_emitted + self.records_skipped + self.malformed
    }
}

/// Outcome of decoding one framed payload.
enum Decoded {
    Record(BgpUpdateRecord),
    Skipped,
}

/// Iterates over the UPDATE records of an MRT stream, one record in memory
/// at a time. Counters are available from [`MrtReader::stats`] at any point.
pub struct MrtReader<R> {
    inner: R,
    offset: u64,
    stats: ParseStats,
    done: bool,
    payload: Vec<u8>,
}

impl<R: Read> MrtReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            offset: 0,
            stats: ParseStats::default(),
            done: false,
            payload: Vec::new(),
        }
    }

    pub fn stats(&self) -> &ParseStats {
        &self.stats
    }

    pub fn into_stats(self) -> ParseStats {
        self.stats
    }

    fn abort(&mut self, offset: u64, reason: String) {
        self.stats.malformed += 1;
        self.stats.abort = Some(StreamAbort { offset, reason });
        self.done = true;
    }

    fn read_up_to(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let mut filled = 0;
        while filled < buf.len() {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e),
            }
        }
        Ok(filled)
    }
}

impl<R: Read> Iterator for MrtReader<R> {
    type Item = BgpUpdateRecord;

    fn next(&mut self) -> Option<BgpUpdateRecord> {
        while !self.done {
            let record_offset = self.offset;
            let mut header = [0u8; MRT_HEADER_LEN];
            let got = match self.read_up_to(&mut header) {
                Ok(n) => n,
                Err(e) => {
                    self.abort(record_offset, format!("read error: {e}"));
                    return None;
                }
            };
            if got == 0 {
                self.done = true;
                return None;
            }
            if got < MRT_HEADER_LEN {
                self.abort(
                    record_offset,
                    format!("truncated MRT header ({got} of {MRT_HEADER_LEN} bytes)"),
                );
                return None;
            }
            let seconds = u32::from_be_bytes([header[0], header[1], header[2], header[3]]);
            let mrt_type = u16::from_be_bytes([header[4], header[5]]);
            let subtype = u16::from_be_bytes([header[6], header[7]]);
            let length = u32::from_be_bytes([header[8], header[9], header[10], header[11]]);
            if length > MAX_RECORD_LEN {
                self.abort(record_offset, format!("implausible MRT length {length}"));
                return None;
            }
            let mut payload = std::mem::take(&mut self.payload);
            payload.resize(length as usize, 0);
            let got = match self.read_up_to(&mut payload) {
                Ok(n) => n,
                Err(e) => {
                    self.abort(record_offset, format!("read error: {e}"));
                    return None;
                }
            };
            self.offset += (MRT_HEADER_LEN + got) as u64;
            if got < length as usize {
                self.abort(
                    record_offset,
                    format!("MRT payload truncated: declared {length} bytes, found {got}"),
                );
                return None;
            }
            let decoded = decode_payload(seconds, mrt_type, subtype, &payload);
            self.payload = payload;
            match decoded {
                Ok(Decoded::Record(record)) => {
                    self.stats.records_emitted += 1;
                    return Some(record);
                }
                Ok(Decoded::Skipped) => self.stats.records_skipped += 1,
                Err(reason) => {
                    log::debug!("malformed MRT record at offset {record_offset}: {reason}");
                    self.stats.malformed += 1;
                }
            }
        }
        None
    }
}

/// Parses a complete in-memory MRT stream.
pub fn parse_mrt(bytes: &[u8]) -> (Vec<BgpUpdateRecord>, ParseStats) {
    let mut reader = MrtReader::new(bytes);
    let records: Vec<_> = reader.by_ref().collect();
    (records, reader.into_stats())
}

fn decode_payload(seconds: u32, mrt_type: u16, subtype: u16, payload: &[u8]) -> Result<Decoded, String> {
    let (micros, body) = match mrt_type {
        TYPE_BGP4MP => (0, payload),
        TYPE_BGP4MP_ET => {
            if payload.len() < 4 {
                return Err("BGP4MP_ET payload shorter than microsecond field".into());
            }
            let micros = u32::from_be_bytes([payload[0], payload[1], payload[2], payload[3]]);
            if micros >= 1_000_000 {
                return Err(format!("microsecond field {micros} out of range"));
            }
            (micros, &payload[4..])
        }
        _ => return Ok(Decoded::Skipped),
    };
    let as4 = match subtype {
        SUBTYPE_MESSAGE => false,
        SUBTYPE_MESSAGE_AS4 => true,
        _ => return Ok(Decoded::Skipped),
    };
    decode_bgp4mp_message(Timestamp { seconds, micros }, as4, body).map_err(|e| e.to_string())
}

fn short(what: &str) -> io::Error {
    io::Error::new(io::ErrorKind::UnexpectedEof, format!("truncated {what}"))
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn decode_bgp4mp_message(timestamp: Timestamp, as4: bool, body: &[u8]) -> io::Result<Decoded> {
    let mut cur = Cursor::new(body);
    let peer_as = if as4 {
        cur.read_u32::<BigEndian>()?
    } else {
        cur.read_u16::<BigEndian>()? as u32
    };
    let _local_as = if as4 {
        cur.read_u32::<BigEndian>()?
    } else {
        cur.read_u16::<BigEndian>()? as u32
    };
    let _ifindex = cur.read_u16::<BigEndian>()?;
    let afi = cur.read_u16::<BigEndian>()?;
    if afi != AFI_IPV4 {
        return Ok(Decoded::Skipped);
    }
    let peer_address = Ipv4Addr::from(cur.read_u32::<BigEndian>()?);
    let _local_address = cur.read_u32::<BigEndian>()?;

    let mut marker = [0u8; 16];
    cur.read_exact(&mut marker).map_err(|_| short("BGP header"))?;
    if marker != BGP_MARKER {
        return Err(invalid("bad BGP marker"));
    }
    let msg_len = cur.read_u16::<BigEndian>()? as usize;
    let msg_type = cur.read_u8()?;
    if msg_type != BGP_MSG_UPDATE {
        return Ok(Decoded::Skipped);
    }
    if msg_len < BGP_HEADER_LEN + 4 {
        return Err(invalid(format!("BGP UPDATE length {msg_len} too small")));
    }
    let start = cur.position() as usize;
    let end = start + (msg_len - BGP_HEADER_LEN);
    if end > body.len() {
        return Err(short("BGP UPDATE body"));
    }
    let update = &body[start..end];

    let mut cur = Cursor::new(update);
    let withdrawn_len = cur.read_u16::<BigEndian>()? as usize;
    let w_start = cur.position() as usize;
    if w_start + withdrawn_len > update.len() {
        return Err(short("withdrawn routes"));
    }
    let withdrawn = decode_prefixes(&update[w_start..w_start + withdrawn_len])?;
    cur.set_position((w_start + withdrawn_len) as u64);
    let attr_len = cur.read_u16::<BigEndian>()? as usize;
    let a_start = cur.position() as usize;
    if a_start + attr_len > update.len() {
        return Err(short("path attributes"));
    }
    let attrs = decode_attributes(&update[a_start..a_start + attr_len], as4)?;
    let nlri = decode_prefixes(&update[a_start + attr_len..])?;

    let mut announced = Vec::with_capacity(nlri.len());
    if !nlri.is_empty() {
        let origin = attrs.origin.ok_or_else(|| invalid("NLRI present without ORIGIN"))?;
        let as_path = attrs
            .as4_path
            .or(attrs.as_path)
            .ok_or_else(|| invalid("NLRI present without AS_PATH"))?;
        if as_path.contains(&0) {
            return Err(invalid("AS number 0 in AS_PATH"));
        }
        if as_path.is_empty() {
            // iBGP-style empty path: legal BGP, outside the record contract.
            return Ok(Decoded::Skipped);
        }
        for prefix in nlri {
            announced.push(PrefixAnnouncement {
                prefix,
                as_path: as_path.clone(),
                origin,
            });
        }
    }
    if announced.is_empty() && withdrawn.is_empty() {
        // End-of-RIB markers and MP_REACH-only (IPv6) updates.
        return Ok(Decoded::Skipped);
    }
    Ok(Decoded::Record(BgpUpdateRecord {
        timestamp,
        peer_address,
        peer_as,
        announced,
        withdrawn,
    }))
}

fn decode_prefixes(mut bytes: &[u8]) -> io::Result<Vec<Ipv4Prefix>> {
    let mut out = Vec::new();
    while let Some((&len, rest)) = bytes.split_first() {
        if len > 32 {
            return Err(invalid(format!("prefix length {len} exceeds 32")));
        }
        let octets = (len as usize).div_ceil(8);
        if rest.len() < octets {
            return Err(short("prefix"));
        }
        let mut addr = [0u8; 4];
        addr[..octets].copy_from_slice(&rest[..octets]);
        out.push(Ipv4Prefix::new(Ipv4Addr::from(addr), len).map_err(|e| invalid(e.to_string()))?);
        bytes = &rest[octets..];
    }
    Ok(out)
}

#[derive(Default)]
struct Attributes {
    origin: Option<Origin>,
    as_path: Option<Vec<u32>>,
    as4_path: Option<Vec<u32>>,
}

fn decode_attributes(bytes: &[u8], as4: bool) -> io::Result<Attributes> {
    let mut attrs = Attributes::default();
    let mut cur = Cursor::new(bytes);
    while (cur.position() as usize) < bytes.len() {
        let flags = cur.read_u8()?;
        let code = cur.read_u8()?;
        let len = if flags & FLAG_EXTENDED_LEN != 0 {
            cur.read_u16::<BigEndian>()? as usize
        } else {
            cur.read_u8()? as usize
        };
        let start = cur.position() as usize;
        if start + len > bytes.len() {
            return Err(short("path attribute"));
        }
        let value = &bytes[start..start + len];
        match code {
            ATTR_ORIGIN => {
                if len != 1 {
                    return Err(invalid(format!("ORIGIN length {len}")));
                }
                let origin =
                    Origin::from_code(value[0]).ok_or_else(|| invalid(format!("ORIGIN value {}", value[0])))?;
                attrs.origin = Some(origin);
            }
            ATTR_AS_PATH => attrs.as_path = Some(decode_as_path(value, if as4 { 4 } else { 2 })?),
            ATTR_AS4_PATH => attrs.as4_path = Some(decode_as_path(value, 4)?),
            _ => {}
        }
        cur.set_position((start + len) as u64);
    }
    Ok(attrs)
}

/// Flattens every segment, AS_SET included, into encoded order.
fn decode_as_path(value: &[u8], asn_size: usize) -> io::Result<Vec<u32>> {
    let mut path = Vec::new();
    let mut cur = Cursor::new(value);
    while (cur.position() as usize) < value.len() {
        let seg_type = cur.read_u8()?;
        if !matches!(
            seg_type,
            SEG_AS_SET | SEG_AS_SEQUENCE | SEG_CONFED_SEQUENCE | SEG_CONFED_SET
        ) {
            return Err(invalid(format!("unknown AS_PATH segment type {seg_type}")));
        }
        let count = cur.read_u8()? as usize;
        for _ in 0..count {
            let asn = if asn_size == 4 {
                cur.read_u32::<BigEndian>().map_err(|_| short("AS_PATH segment"))?
            } else {
                cur.read_u16::<BigEndian>().map_err(|_| short("AS_PATH segment"))? as u32
            };
            path.push(asn);
        }
    }
    Ok(path)
}

/// Encodes one record as a single BGP4MP MESSAGE_AS4 MRT record.
///
/// Records with a non-zero microsecond part are written with the extended
/// timestamp type (BGP4MP_ET) so the round trip stays exact. All
/// announcements of a record share one UPDATE, so they must carry the same
/// AS path and origin.
pub fn serialize_mrt(record: &BgpUpdateRecord) -> Result<Vec<u8>, ValidationError> {
    record.validate()?;
    if let Some(first) = record.announced.first() {
        if record
            .announced
            .iter()
            .any(|a| a.as_path != first.as_path || a.origin != first.origin)
        {
            return Err(ValidationError::new(
                "announced",
                "announcements in one UPDATE must share AS path and origin",
            ));
        }
    }

    let mut withdrawn = Vec::new();
    for prefix in &record.withdrawn {
        encode_prefix(&mut withdrawn, prefix);
    }
    let mut attrs = Vec::new();
    let mut nlri = Vec::new();
    if let Some(first) = record.announced.first() {
        attrs.extend_from_slice(&[FLAG_TRANSITIVE, ATTR_ORIGIN, 1, first.origin.code()]);
        let mut path = Vec::new();
        for chunk in first.as_path.chunks(255) {
            path.push(SEG_AS_SEQUENCE);
            path.push(chunk.len() as u8);
            for asn in chunk {
                path.extend_from_slice(&asn.to_be_bytes());
            }
        }
        if path.len() > 255 {
            attrs.extend_from_slice(&[FLAG_TRANSITIVE | FLAG_EXTENDED_LEN, ATTR_AS_PATH]);
            attrs.extend_from_slice(&(path.len() as u16).to_be_bytes());
        } else {
            attrs.extend_from_slice(&[FLAG_TRANSITIVE, ATTR_AS_PATH, path.len() as u8]);
        }
        attrs.extend_from_slice(&path);
        for ann in &record.announced {
            encode_prefix(&mut nlri, &ann.prefix);
        }
    }

    let msg_len = BGP_HEADER_LEN + 2 + withdrawn.len() + 2 + attrs.len() + nlri.len();
    if withdrawn.len() > u16::MAX as usize || attrs.len() > u16::MAX as usize || msg_len > u16::MAX as usize {
        return Err(ValidationError::new(
            "announced",
            format!("UPDATE of {msg_len} bytes exceeds 65535"),
        ));
    }

    let extended = record.timestamp.micros != 0;
    let body_len = 4 + 4 + 2 + 2 + 4 + 4 + msg_len + if extended { 4 } else { 0 };
    let mut out = Vec::with_capacity(MRT_HEADER_LEN + body_len);
    // Writes into a Vec cannot fail.
    let w = &mut out;
    w.write_u32::<BigEndian>(record.timestamp.seconds).unwrap();
    w.write_u16::<BigEndian>(if extended { TYPE_BGP4MP_ET } else { TYPE_BGP4MP })
        .unwrap();
    w.write_u16::<BigEndian>(SUBTYPE_MESSAGE_AS4).unwrap();
    w.write_u32::<BigEndian>(body_len as u32).unwrap();
    if extended {
        w.write_u32::<BigEndian>(record.timestamp.micros).unwrap();
    }
    w.write_u32::<BigEndian>(record.peer_as).unwrap();
    w.write_u32::<BigEndian>(0).unwrap(); // local AS
    w.write_u16::<BigEndian>(0).unwrap(); // interface index
    w.write_u16::<BigEndian>(AFI_IPV4).unwrap();
    w.write_u32::<BigEndian>(u32::from(record.peer_address)).unwrap();
    w.write_u32::<BigEndian>(0).unwrap(); // local address
    w.write_all(&BGP_MARKER).unwrap();
    w.write_u16::<BigEndian>(msg_len as u16).unwrap();
    w.write_u8(BGP_MSG_UPDATE).unwrap();
    w.write_u16::<BigEndian>(withdrawn.len() as u16).unwrap();
    w.write_all(&withdrawn).unwrap();
    w.write_u16::<BigEndian>(attrs.len() as u16).unwrap();
    w.write_all(&attrs).unwrap();
    w.write_all(&nlri).unwrap();
    Ok(out)
}

fn encode_prefix(out: &mut Vec<u8>, prefix: &Ipv4Prefix) {
    out.push(prefix.len());
    out.extend_from_slice(&prefix.addr().octets()[..prefix.wire_octets()]);
}
