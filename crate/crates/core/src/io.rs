//! Article stream records and timestamp handling.

use std::io::BufRead;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, SecondsFormat, Utc};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum InputError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: bad timestamp {value:?}")]
    BadTimestamp { line: usize, value: String },
    #[error("line {line}: empty article id")]
    EmptyId { line: usize },
    #[error("line {line}: {message}")]
    Io { line: usize, message: String },
}

impl InputError {
    pub fn line(&self) -> usize {
        match self {
            InputError::Parse { line, .. }
            | InputError::BadTimestamp { line, .. }
            | InputError::EmptyId { line }
            | InputError::Io { line, .. } => *line,
        }
    }
}

/// Parses an ISO-8601 timestamp into milliseconds since the Unix epoch.
///
/// Accepts RFC 3339 with any offset, a naive date-time (read as UTC) and a
/// bare date (midnight UTC). The UTC year must lie in 0000..=9999 so the
/// value can be written back in the same four-digit form.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let dt = parse_utc(s.trim())?;
    (0..=9999)
        .contains(&dt.year())
        .then(|| dt.timestamp_millis())
}

fn parse_utc(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc())
}

/// RFC 3339 in UTC with millisecond precision, e.g. `2016-06-24T00:00:00.000Z`.
pub fn format_timestamp(ms: i64) -> String {
    match DateTime::<Utc>::from_timestamp_millis(ms) {
        Some(dt) => dt.to_rfc3339_opts(SecondsFormat::Millis, true),
        None => ms.to_string(),
    }
}

#[derive(Deserialize)]
struct ArticleRecord {
    id: String,
    timestamp: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    vector: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Article {
    pub id: String,
    pub timestamp: i64,
    pub text: Option<String>,
    pub vector: Option<Vec<f64>>,
    /// 1-based line in the input.
    pub line: usize,
}

/// Parses one JSON Lines article record.
pub fn parse_article(line: &str, line_no: usize) -> Result<Article, InputError> {
    let rec: ArticleRecord = serde_json::from_str(line).map_err(|e| InputError::Parse {
        line: line_no,
        message: e.to_string(),
    })?;
    if rec.id.is_empty() {
        return Err(InputError::EmptyId { line: line_no });
    }
    let timestamp = parse_timestamp(&rec.timestamp).ok_or_else(|| InputError::BadTimestamp {
        line: line_no,
        value: rec.timestamp.clone(),
    })?;
    Ok(Article {
        id: rec.id,
        timestamp,
        text: rec.text,
        vector: rec.vector,
        line: line_no,
    })
}

/// Streams articles from JSON Lines, skipping blank lines.
pub struct ArticleReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> ArticleReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
        }
    }
}

impl<R: BufRead> Iterator for ArticleReader<R> {
    type Item = Result<Article, InputError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => {
                    return Some(Err(InputError::Io {
                        line: self.line_no,
                        message: e.to_string(),
                    }))
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            return Some(parse_article(&line, self.line_no));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DAY: i64 = 86_400_000;

    #[test]
    fn timestamp_forms() {
        let midnight = parse_timestamp("2016-06-24").unwrap();
        assert_eq!(midnight % DAY, 0);
        assert_eq!(parse_timestamp("2016-06-24T00:00:00Z"), Some(midnight));
        assert_eq!(parse_timestamp("2016-06-24T02:00:00+02:00"), Some(midnight));
        assert_eq!(parse_timestamp("2016-06-24T00:00:00"), Some(midnight));
        assert_eq!(
            parse_timestamp("2016-06-24T12:00:00.250Z"),
            Some(midnight + DAY / 2 + 250)
        );
        assert_eq!(parse_timestamp("1970-01-01T00:00:00Z"), Some(0));
        assert_eq!(parse_timestamp("yesterday"), None);
        assert_eq!(parse_timestamp("2016-13-01"), None);
        assert_eq!(parse_timestamp("-0001-01-01"), None);
        assert_eq!(parse_timestamp("0000-01-01T00:00:00+01:00"), None);
        assert!(parse_timestamp("0000-01-01").is_some());
    }

    #[test]
    fn format_round_trips() {
        for s in ["2016-06-24T00:00:00.000Z", "1969-12-31T23:59:59.999Z"] {
            assert_eq!(format_timestamp(parse_timestamp(s).unwrap()), s);
        }
    }

    #[test]
    fn reader_numbers_lines_and_skips_blanks() {
        let data = "{\"id\":\"a\",\"timestamp\":\"2016-06-24\",\"text\":\"x\"}\n\n{\"id\":\"b\",\"timestamp\":\"2016-06-25\",\"vector\":[1,0]}\n{\"id\":\"\",\"timestamp\":\"2016-06-25\"}\n";
        let got: Vec<_> = ArticleReader::new(data.as_bytes()).collect();
        assert_eq!(got.len(), 3);
        let b = got[1].as_ref().unwrap();
        assert_eq!((b.id.as_str(), b.line), ("b", 3));
        assert_eq!(b.vector.as_deref(), Some(&[1.0, 0.0][..]));
        assert_eq!(got[2], Err(InputError::EmptyId { line: 4 }));
    }

    #[test]
    fn bad_records_report_their_line() {
        assert!(matches!(
            parse_article("{", 7),
            Err(InputError::Parse { line: 7, .. })
        ));
        assert!(matches!(
            parse_article("{\"id\":\"a\",\"timestamp\":\"soon\"}", 2),
            Err(InputError::BadTimestamp { line: 2, .. })
        ));
    }
}
