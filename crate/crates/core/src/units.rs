//! Command-line value parsing: durations and seed lists.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum UnitError {
    #[error("invalid duration `{input}`: {reason}")]
    Duration { input: String, reason: String },
    #[error("invalid seed list `{0}`; expected `N`, `A..B` or `A,B,C`")]
    Seeds(String),
    #[error("seed range `{0}` is empty")]
    EmptyRange(String),
    #[error("seed range `{0}` has more than {MAX_SEEDS} seeds")]
    TooManySeeds(String),
}

pub const MAX_SEEDS: u64 = 100_000;

/// Parses `30s`, `500ms`, `10us`, `250ns` (or combinations such as
/// `1s 500ms`) into nanoseconds. A bare integer is taken as nanoseconds.
pub fn parse_duration(input: &str) -> Result<u64, UnitError> {
    let text = input.trim();
    if !text.is_empty() && text.bytes().all(|b| b.is_ascii_digit()) {
        return text.parse().map_err(|e: std::num::ParseIntError| UnitError::Duration {
            input: input.to_string(),
            reason: e.to_string(),
        });
    }
    let d = humantime::parse_duration(text).map_err(|e| UnitError::Duration {
        input: input.to_string(),
        reason: e.to_string(),
    })?;
    u64::try_from(d.as_nanos()).map_err(|_| UnitError::Duration {
        input: input.to_string(),
        reason: "does not fit in 64-bit nanoseconds".into(),
    })
}

/// `7`, `1..10` (inclusive) or `1,2,3`.
pub fn parse_seeds(input: &str) -> Result<Vec<u64>, UnitError> {
    let text = input.trim();
    let bad = || UnitError::Seeds(input.to_string());
    if let Some((a, b)) = text.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let lo: u64 = a.trim().parse().map_err(|_| bad())?;
        let hi: u64 = b.trim().parse().map_err(|_| bad())?;
        if hi < lo {
            return Err(UnitError::EmptyRange(input.to_string()));
        }
        if hi - lo >= MAX_SEEDS {
            return Err(UnitError::TooManySeeds(input.to_string()));
        }
        return Ok((lo..=hi).collect());
    }
    let seeds = text
        .split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(seeds)
}
