//! Pipe-separated text form of BGP updates, one prefix per line:
//!
//! ```text
//! ts|peer_ip|peer_as|A|prefix|as1 as2 ...|origin
//! ts|peer_ip|peer_as|W|prefix
//! ```
//!
//! `ts` is whole seconds, optionally followed by `.` and six microsecond
//! digits. Blank lines and lines starting with `#` are ignored.

use std::io::{self, BufRead, Write};
use std::net::Ipv4Addr;

use thiserror::Error;

use super::{BgpUpdateRecord, Ipv4Prefix, Origin, PrefixAnnouncement, Timestamp};

#[derive(Debug, Error)]
pub enum TextParseError {
    #[error("line {line}: {reason}")]
    Invalid { line: usize, reason: String },
    #[error("read error: {0}")]
    Io(#[from] io::Error),
}

impl TextParseError {
    fn at(line: usize, reason: impl Into<String>) -> Self {
        TextParseError::Invalid {
            line,
            reason: reason.into(),
        }
    }
}

fn parse_timestamp(field: &str) -> Option<Timestamp> {
    match field.split_once('.') {
        None => field.parse().ok().map(Timestamp::from_seconds),
        Some((secs, frac)) => {
            if frac.is_empty() || frac.len() > 6 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            let micros: u32 = format!("{frac:0<6}").parse().ok()?;
            Timestamp::new(secs.parse().ok()?, micros).ok()
        }
    }
}

/// Parses a single line. `line_number` is reported in errors.
pub fn parse_update_line(text: &str, line_number: usize) -> Result<BgpUpdateRecord, TextParseError> {
    let fields: Vec<&str> = text.split('|').map(str::trim).collect();
    let err = |reason: String| TextParseError::at(line_number, reason);
    if fields.len() < 5 {
        return Err(err(format!("expected 5 or 7 fields, found {}", fields.len())));
    }
    let timestamp = parse_timestamp(fields[0]).ok_or_else(|| err(format!("bad timestamp {:?}", fields[0])))?;
    let peer_address: Ipv4Addr = fields[1]
        .parse()
        .map_err(|_| err(format!("bad peer address {:?}", fields[1])))?;
    let peer_as: u32 = fields[2]
        .parse()
        .map_err(|_| err(format!("bad peer AS {:?}", fields[2])))?;
    let prefix: Ipv4Prefix = fields[4].parse().map_err(|e| err(format!("{e}")))?;
    match fields[3] {
        "A" => {
            if fields.len() != 7 {
                return Err(err(format!("announcement needs 7 fields, found {}", fields.len())));
            }
            let as_path = fields[5]
                .split_whitespace()
                .map(|t| t.parse::<u32>().map_err(|_| err(format!("bad AS number {t:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let origin: Origin = fields[6].parse().map_err(|e| err(format!("{e}")))?;
            let ann = PrefixAnnouncement {
                prefix,
                as_path,
                origin,
            };
            ann.validate().map_err(|e| err(e.to_string()))?;
            Ok(BgpUpdateRecord::announcement(timestamp, peer_address, peer_as, ann))
        }
        "W" => {
            if fields.len() != 5 {
                return Err(err(format!("withdrawal needs 5 fields, found {}", fields.len())));
            }
            Ok(BgpUpdateRecord::withdrawal(timestamp, peer_address, peer_as, prefix))
        }
        other => Err(err(format!("unknown update kind {other:?}"))),
    }
}

/// Reads every record of a text stream.
pub fn parse_update_text<R: BufRead>(reader: R) -> Result<Vec<BgpUpdateRecord>, TextParseError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push(parse_update_line(trimmed, idx + 1)?);
    }
    Ok(out)
}

fn format_timestamp(ts: Timestamp) -> String {
    if ts.micros == 0 {
        ts.seconds.to_string()
    } else {
        format!("{}.{:06}", ts.seconds, ts.micros)
    }
}

/// Renders a record as text lines: withdrawals first, then announcements,
/// matching the order they appear in an UPDATE.
pub fn format_update_lines(record: &BgpUpdateRecord) -> Vec<String> {
    let head = format!(
        "{}|{}|{}",
        format_timestamp(record.timestamp),
        record.peer_address,
        record.peer_as
    );
    let mut lines = Vec::with_capacity(record.withdrawn.len() + record.announced.len());
    for prefix in &record.withdrawn {
        lines.push(format!("{head}|W|{prefix}"));
    }
    for ann in &record.announced {
        let path: Vec<String> = ann.as_path.iter().map(u32::to_string).collect();
        lines.push(format!(
            "{head}|A|{}|{}|{}",
            ann.prefix,
            path.join(" "),
            ann.origin.token()
        ));
    }
    lines
}

pub fn write_update_text<W: Write>(mut out: W, records: &[BgpUpdateRecord]) -> io::Result<()> {
    for record in records {
        for line in format_update_lines(record) {
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}
