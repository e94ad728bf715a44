//! Access-log line parsing for the Common and Combined formats.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::{DateTime, Utc};
use flate2::read::GzDecoder;
use regex::Regex;

use super::{IngestError, RawRequest};

/// Supported access-log dialects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    /// `host ident authuser [date] "request" status bytes`
    Common,
    /// Common plus quoted referer and user-agent fields.
    Combined,
}

/// Result of scanning one log stream.
#[derive(Debug, Clone)]
pub struct ParseOutcome {
    /// Successfully parsed requests, in input order.
    pub requests: Vec<RawRequest>,
    /// Non-empty lines that did not match the format and were skipped.
    pub malformed_lines: u64,
    /// Total non-empty lines seen.
    pub total_lines: u64,
}

fn line_pattern(format: LogFormat) -> Regex {
    let pattern = match format {
        LogFormat::Common => r#"^(\S+) \S+ \S+ \[([^\]]+)\] "([^"]*)" (\d{3}) (\S+)\s*$"#,
        LogFormat::Combined => {
            r#"^(\S+) \S+ \S+ \[([^\]]+)\] "([^"]*)" (\d{3}) (\S+) "[^"]*" "([^"]*)"\s*$"#
        }
    };
    Regex::new(pattern).expect("log line pattern is valid")
}

/// Reduces a request target to a normalized URL path: strips the scheme and
/// host of absolute URLs, drops query strings and fragments, and never
/// returns an empty path.
fn normalize_resource(target: &str) -> String {
    let mut path = target;
    for scheme in ["http://", "https://"] {
        if let Some(rest) = path.strip_prefix(scheme) {
            path = match rest.find('/') {
                Some(slash) => &rest[slash..],
                None => "/",
            };
            break;
        }
    }
    let end = path.find(['?', '#']).unwrap_or(path.len());
    let path = &path[..end];
    if path.is_empty() {
        "/".to_string()
    } else {
        path.to_string()
    }
}

fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_str(raw, "%d/%b/%Y:%H:%M:%S %z")
        .ok()
        .map(|t| t.with_timezone(&Utc))
}

/// Extracts the resource path from the quoted request field
/// (`"GET /path HTTP/1.0"`).
fn parse_request_field(raw: &str) -> Option<String> {
    let mut parts = raw.split_whitespace();
    let _method = parts.next()?;
    let target = parts.next()?;
    Some(normalize_resource(target))
}

/// Parses one log stream line by line.
///
/// I/O failures abort with an error; individual lines that do not match the
/// format are skipped and counted in [`ParseOutcome::malformed_lines`].
pub fn parse_log<R: BufRead>(reader: R, format: LogFormat) -> Result<ParseOutcome, IngestError> {
    let pattern = line_pattern(format);
    let mut requests = Vec::new();
    let mut malformed_lines = 0u64;
    let mut total_lines = 0u64;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        total_lines += 1;
        let parsed = pattern.captures(&line).and_then(|captures| {
            let host = captures.get(1)?.as_str();
            let timestamp = parse_timestamp(captures.get(2)?.as_str())?;
            let resource = parse_request_field(captures.get(3)?.as_str())?;
            let status: u16 = captures.get(4)?.as_str().parse().ok()?;
            let bytes_raw = captures.get(5)?.as_str();
            let bytes: u64 = if bytes_raw == "-" {
                0
            } else {
                bytes_raw.parse().ok()?
            };
            let user_key = match format {
                LogFormat::Common => host.to_string(),
                LogFormat::Combined => {
                    format!("{host} {}", captures.get(6)?.as_str())
                }
            };
            Some(RawRequest {
                timestamp,
                user_key,
                resource,
                status,
                bytes,
            })
        });
        match parsed {
            Some(request) => requests.push(request),
            None => malformed_lines += 1,
        }
    }
    Ok(ParseOutcome {
        requests,
        malformed_lines,
        total_lines,
    })
}

/// Opens a log file for reading, transparently decompressing gzip input
/// (detected by its magic bytes, so both plain and `.gz` files work with no
/// extra flag).
pub fn open_log(path: &Path) -> Result<Box<dyn Read>, IngestError> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    let head = reader.fill_buf()?;
    if head.starts_with(&[0x1f, 0x8b]) {
        Ok(Box::new(GzDecoder::new(reader)))
    } else {
        Ok(Box::new(reader))
    }
}
