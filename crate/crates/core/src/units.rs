//! Durations written as `180s`, `6.5ms`, `26us`, `12960ns`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid duration {input:?}: {reason}")]
pub struct DurationError {
    pub input: String,
    pub reason: &'static str,
}

/// Parses a decimal number with a unit into integer nanoseconds. Fractions
/// finer than one nanosecond are rejected rather than rounded.
pub fn parse_duration(input: &str) -> Result<u64, DurationError> {
    let err = |reason| DurationError {
        input: input.to_string(),
        reason,
    };
    let s = input.trim();
    let split = s
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .ok_or_else(|| err("missing unit (ns, us, ms or s)"))?;
    let (number, unit) = s.split_at(split);
    let scale: u64 = match unit.trim() {
        "ns" => 1,
        "us" | "µs" => 1_000,
        "ms" => 1_000_000,
        "s" => 1_000_000_000,
        _ => return Err(err("unknown unit")),
    };
    let (int, frac) = number.split_once('.').unwrap_or((number, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(err("missing number"));
    }
    let int: u64 = if int.is_empty() {
        0
    } else {
        int.parse().map_err(|_| err("bad number"))?
    };
    let mut total = int.checked_mul(scale).ok_or_else(|| err("too large"))?;
    let mut place = scale;
    for d in frac.chars() {
        let d = d.to_digit(10).ok_or_else(|| err("bad number"))?;
        if !place.is_multiple_of(10) {
            if d != 0 {
                return Err(err("finer than one nanosecond"));
            }
            continue;
        }
        place /= 10;
        total = total
            .checked_add(u64::from(d) * place)
            .ok_or_else(|| err("too large"))?;
    }
    Ok(total)
}

/// Shortest exact rendering in the largest unit that keeps it readable.
pub fn format_duration(ns: u64) -> String {
    let (scale, unit) = if ns >= 1_000_000_000 {
        (1_000_000_000, "s")
    } else if ns >= 1_000_000 {
        (1_000_000, "ms")
    } else if ns >= 1_000 {
        (1_000, "us")
    } else {
        return format!("{ns}ns");
    };
    let int = ns / scale;
    let frac = ns % scale;
    if frac == 0 {
        return format!("{int}{unit}");
    }
    let width = scale.ilog10() as usize;
    let digits = format!("{frac:0width$}");
    format!("{int}.{}{unit}", digits.trim_end_matches('0'))
}
