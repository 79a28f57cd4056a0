//! Tick CSV reading and writing.
//!
//! ```text
//! # session day-1
//! # horizon=28800
//! time,price
//! 0,100.0
//! 2.5,100.05
//! ```
//!
//! Lines starting with `#` are comments, except `# horizon=<t>` which sets
//! the end of the current session's observation window (otherwise the last
//! tick time). A `# session` comment or a repeated `time,price` header
//! opens a new session. Times are seconds from the session open.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::EventSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub time: f64,
    pub price: f64,
}

/// One trading session as read from the file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Session {
    pub ticks: Vec<TickRecord>,
    pub horizon: Option<f64>,
    /// 1-based line of the first tick, for error messages downstream.
    pub first_line: usize,
}

/// What to do with transactions that leave the price unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroPolicy {
    /// Remove them; their waits fold into the next non-zero change.
    #[default]
    Drop,
    /// Keep them as zero-magnitude events.
    Keep,
}

pub const HEADER: &str = "time,price";

/// Parses tick CSV into sessions. Timestamps must be nondecreasing within a
/// session and prices strictly positive.
pub fn parse_ticks<R: BufRead>(reader: R) -> Result<Vec<Session>> {
    let mut sessions: Vec<Session> = Vec::new();
    let mut current = Session::default();
    let mut seen_header = false;
    let flush = |cur: &mut Session, out: &mut Vec<Session>| {
        if !cur.ticks.is_empty() || cur.horizon.is_some() {
            out.push(std::mem::take(cur));
        }
    };
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if let Some(comment) = text.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(value) = comment.strip_prefix("horizon=") {
                let h: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse { line: lineno, message: format!("bad horizon value {value:?}") })?;
                if !h.is_finite() {
                    return Err(Error::Parse { line: lineno, message: "horizon must be finite".into() });
                }
                current.horizon = Some(h);
            } else if comment == "session" || comment.starts_with("session ") {
                flush(&mut current, &mut sessions);
                seen_header = false;
            }
            continue;
        }
        if text.eq_ignore_ascii_case(HEADER) {
            if seen_header && !current.ticks.is_empty() {
                flush(&mut current, &mut sessions);
            }
            seen_header = true;
            continue;
        }
        if !seen_header {
            return Err(Error::Parse { line: lineno, message: format!("expected header `{HEADER}`") });
        }
        let mut fields = text.split(',');
        let (Some(t), Some(p), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse { line: lineno, message: "expected two columns".into() });
        };
        let time: f64 =
            t.trim().parse().map_err(|_| Error::Parse { line: lineno, message: format!("bad time {t:?}") })?;
        let price: f64 =
            p.trim().parse().map_err(|_| Error::Parse { line: lineno, message: format!("bad price {p:?}") })?;
        if !time.is_finite() {
            return Err(Error::Parse { line: lineno, message: "time must be finite".into() });
        }
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::Parse { line: lineno, message: format!("price must be > 0, got {price}") });
        }
        if let Some(last) = current.ticks.last() {
            if time < last.time {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("time {time} goes backwards (previous {})", last.time),
                });
            }
        } else {
            current.first_line = lineno;
        }
        current.ticks.push(TickRecord { time, price });
    }
    flush(&mut current, &mut sessions);
    Ok(sessions)
}

/// Converts one session into an event series. The first tick is the
/// reference: it opens the window and carries no jump. Ticks sharing a
/// timestamp collapse into one transaction at the last price.
pub fn session_events(session: &Session, policy: ZeroPolicy) -> Result<EventSeries> {
    let line = session.first_line;
    let Some(first) = session.ticks.first() else {
        return Err(Error::Parse { line, message: "session has no ticks".into() });
    };
    let last_time = session.ticks.last().map_or(first.time, |t| t.time);
    let horizon = session.horizon.unwrap_or(last_time);
    if horizon < last_time {
        return Err(Error::Parse { line, message: format!("horizon {horizon} precedes the last tick at {last_time}") });
    }
    let mut collapsed: Vec<TickRecord> = Vec::with_capacity(session.ticks.len());
    for tick in &session.ticks {
        match collapsed.last_mut() {
            Some(prev) if prev.time == tick.time => prev.price = tick.price,
            _ => collapsed.push(*tick),
        }
    }
    let mut times = Vec::with_capacity(collapsed.len());
    let mut jumps = Vec::with_capacity(collapsed.len());
    for pair in collapsed.windows(2) {
        let r = (pair[1].price - pair[0].price).abs();
        if r == 0.0 && policy == ZeroPolicy::Drop {
            continue;
        }
        times.push(pair[1].time);
        jumps.push(r);
    }
    EventSeries::new(times, jumps, first.time, horizon)
}

/// Reads tick CSV and returns one event series per session.
pub fn ingest_ticks<R: BufRead>(reader: R, policy: ZeroPolicy) -> Result<Vec<EventSeries>> {
    parse_ticks(reader)?.iter().map(|s| session_events(s, policy)).collect()
}

/// Writes series as tick CSV, one section per series. Each section opens
/// with a reference tick at the series origin priced at `base_price`;
/// prices then rise by each jump.
pub fn write_ticks<W: Write>(mut out: W, series: &[EventSeries], base_price: f64) -> Result<()> {
    if !(base_price.is_finite() && base_price > 0.0) {
        return Err(Error::InvalidArgument(format!("base price must be > 0, got {base_price}")));
    }
    for (i, s) in series.iter().enumerate() {
        writeln!(out, "# session {}", i + 1)?;
        writeln!(out, "# horizon={}", s.horizon)?;
        writeln!(out, "{HEADER}")?;
        let mut price = base_price;
        writeln!(out, "{},{}", s.origin, price)?;
        for (t, r) in s.times.iter().zip(&s.jumps) {
            price += r;
            writeln!(out, "{t},{price}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, policy: ZeroPolicy) -> Result<Vec<EventSeries>> {
        ingest_ticks(text.as_bytes(), policy)
    }

    #[test]
    fn drop_policy_folds_zero_changes() {
        let s = read("time,price\n0,100.0\n2,100.5\n5,100.5\n", ZeroPolicy::Drop).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].waits(), vec![2.0]);
        assert_eq!(s[0].jumps, vec![0.5]);
        assert_eq!(s[0].horizon, 5.0);
        let kept = read("time,price\n0,100.0\n2,100.5\n5,100.5\n", ZeroPolicy::Keep).unwrap();
        assert_eq!(kept[0].jumps, vec![0.5, 0.0]);
    }

    #[test]
    fn wait_after_dropped_tick_is_merged() {
        let s = read("time,price\n0,10\n1,11\n3,11\n4,10\n", ZeroPolicy::Drop).unwrap();
        assert_eq!(s[0].waits(), vec![1.0, 3.0]);
        assert_eq!(s[0].jumps, vec![1.0, 1.0]);
    }

    #[test]
    fn single_tick_gives_an_empty_series() {
        let s = read("time,price\n7,100\n", ZeroPolicy::Drop).unwrap();
        assert!(s[0].is_empty());
    }

    #[test]
    fn sessions_are_split() {
        let text = "# session a\n# horizon=10\ntime,price\n0,1\n4,2\n# session b\ntime,price\n1,5\n3,4\n";
        let s = read(text, ZeroPolicy::Drop).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].horizon, 10.0);
        assert_eq!(s[1].origin, 1.0);
        assert_eq!(s[1].jumps, vec![1.0]);
        // a bare repeated header also starts a new session
        let s = read("time,price\n0,1\n1,2\ntime,price\n0,3\n2,4\n", ZeroPolicy::Drop).unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn same_timestamp_ticks_collapse() {
        let s = read("time,price\n0,10\n1,11\n1,12\n2,13\n", ZeroPolicy::Drop).unwrap();
        assert_eq!(s[0].times, vec![1.0, 2.0]);
        assert_eq!(s[0].jumps, vec![2.0, 1.0]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = read("time,price\n0,10\n# note\n5,11\n4,12\n", ZeroPolicy::Drop).unwrap_err();
        assert_eq!(e, Error::Parse { line: 5, message: "time 4 goes backwards (previous 5)".into() });
        assert!(matches!(read("time,price\n0,-1\n", ZeroPolicy::Drop), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read("0,1\n", ZeroPolicy::Drop), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read("time,price\n0,1,2\n", ZeroPolicy::Drop), Err(Error::Parse { line: 2, .. })));
        assert!(read("", ZeroPolicy::Drop).unwrap().is_empty());
    }

    #[test]
    fn round_trip_through_csv() {
        let s = EventSeries::new(vec![0.5, 1.25, 9.0], vec![0.01, 0.37, 2.5], 0.0, 10.0).unwrap();
        let mut buf = Vec::new();
        write_ticks(&mut buf, &[s.clone(), s.clone()], 100.0).unwrap();
        let back = read(std::str::from_utf8(&buf).unwrap(), ZeroPolicy::Drop).unwrap();
        assert_eq!(back.len(), 2);
        for b in back {
            assert_eq!(b.times, s.times);
            assert_eq!((b.origin, b.horizon), (s.origin, s.horizon));
            for (x, y) in b.jumps.iter().zip(&s.jumps) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
