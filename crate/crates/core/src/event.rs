//! Session-log parsing, validation, and duplicate removal.
//!
//! A session log is a UTF-8 text file with one mouse event per line, five
//! whitespace-separated fields in the order `Timestamp X Y EventType UserID`,
//! and an optional header line. Consecutive events that repeat the previous
//! event's `(x, y, event_type)` are duplicates and get dropped before
//! segmentation.

use std::io::{self, BufRead, Write};

use thiserror::Error;

/// Event-type code for cursor movement. Click/scroll codes are not fixed by
/// the log format; they pass through parsing and are selected (or not) by the
/// segmenter's event filter.
pub const MOVEMENT_EVENT: i32 = -1;

/// Default inclusive upper bound for cursor coordinates.
pub const DEFAULT_MAX_COORD: u32 = 8192;

/// One timestamped cursor sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MouseEvent {
    /// Seconds since the UNIX epoch, fractional. Finite and non-negative.
    pub timestamp: f64,
    /// Cursor x-coordinate in pixels.
    pub x: u32,
    /// Cursor y-coordinate in pixels.
    pub y: u32,
    /// Event-type code; [`MOVEMENT_EVENT`] for movement, other codes pass
    /// through unchanged.
    pub event_type: i32,
    /// Non-negative user identifier.
    pub user_id: u32,
}

impl MouseEvent {
    /// The tuple that defines duplicate events. Timestamps are deliberately
    /// excluded: a repeated sample carries a fresh timestamp but no new
    /// information.
    pub fn dedupe_key(&self) -> (u32, u32, i32) {
        (self.x, self.y, self.event_type)
    }
}

/// One user's session: events sorted by timestamp (stable for ties), all
/// sharing `user_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub user_id: u32,
    pub events: Vec<MouseEvent>,
}

/// Parsing limits.
#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    /// Inclusive upper bound for x and y. Lines outside the bound fail.
    pub max_coord: u32,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            max_coord: DEFAULT_MAX_COORD,
        }
    }
}

/// A parsed session plus validation counters the caller may want to surface.
#[derive(Debug, Clone)]
pub struct ParsedLog {
    pub log: SessionLog,
    /// Events whose timestamp preceded the previous line's. They were kept
    /// and stably re-sorted into place.
    pub out_of_order: usize,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: expected 5 fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}, field {field} ({name}): invalid number {value:?}")]
    InvalidNumber {
        line: usize,
        field: usize,
        name: &'static str,
        value: String,
    },
    #[error("line {line}, field {field} ({name}): negative value {value}")]
    NegativeValue {
        line: usize,
        field: usize,
        name: &'static str,
        value: i64,
    },
    #[error("line {line}, field {field} ({name}): {value} exceeds screen bound {max}")]
    CoordOutOfBounds {
        line: usize,
        field: usize,
        name: &'static str,
        value: i64,
        max: u32,
    },
    #[error("line {line}: user id {found} differs from user id {expected} seen earlier")]
    MixedUserIds {
        line: usize,
        expected: u32,
        found: u32,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

const FIELD_NAMES: [&str; 5] = ["timestamp", "x", "y", "event_type", "user_id"];

fn parse_coord(
    token: &str,
    line: usize,
    field: usize,
    max_coord: u32,
) -> Result<u32, ParseError> {
    let name = FIELD_NAMES[field - 1];
    let value: i64 = token.parse().map_err(|_| ParseError::InvalidNumber {
        line,
        field,
        name,
        value: token.to_string(),
    })?;
    if value < 0 {
        return Err(ParseError::NegativeValue {
            line,
            field,
            name,
            value,
        });
    }
    if value > i64::from(max_coord) {
        return Err(ParseError::CoordOutOfBounds {
            line,
            field,
            name,
            value,
            max: max_coord,
        });
    }
    Ok(value as u32)
}

/// Parses one log line: 5 whitespace- or tab-separated base-10 fields.
///
/// `line_no` is the 1-based line number carried into errors.
pub fn parse_event_line(
    line: &str,
    line_no: usize,
    opts: &ParseOptions,
) -> Result<MouseEvent, ParseError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(ParseError::FieldCount {
            line: line_no,
            found: fields.len(),
        });
    }

    let timestamp: f64 = fields[0].parse().map_err(|_| ParseError::InvalidNumber {
        line: line_no,
        field: 1,
        name: FIELD_NAMES[0],
        value: fields[0].to_string(),
    })?;
    if !timestamp.is_finite() {
        return Err(ParseError::InvalidNumber {
            line: line_no,
            field: 1,
            name: FIELD_NAMES[0],
            value: fields[0].to_string(),
        });
    }
    if timestamp < 0.0 {
        return Err(ParseError::NegativeValue {
            line: line_no,
            field: 1,
            name: FIELD_NAMES[0],
            value: timestamp as i64,
        });
    }

    let x = parse_coord(fields[1], line_no, 2, opts.max_coord)?;
    let y = parse_coord(fields[2], line_no, 3, opts.max_coord)?;

    let event_type: i32 = fields[3].parse().map_err(|_| ParseError::InvalidNumber {
        line: line_no,
        field: 4,
        name: FIELD_NAMES[3],
        value: fields[3].to_string(),
    })?;

    let user_id: i64 = fields[4].parse().map_err(|_| ParseError::InvalidNumber {
        line: line_no,
        field: 5,
        name: FIELD_NAMES[4],
        value: fields[4].to_string(),
    })?;
    if user_id < 0 {
        return Err(ParseError::NegativeValue {
            line: line_no,
            field: 5,
            name: FIELD_NAMES[4],
            value: user_id,
        });
    }

    Ok(MouseEvent {
        timestamp,
        x,
        y,
        event_type,
        user_id: user_id as u32,
    })
}

/// Parses a whole session log.
///
/// A single leading header line is tolerated and skipped when its first token
/// is not numeric. Blank lines are skipped. All events must share one user
/// id. Out-of-order timestamps are stably sorted into place and counted in
/// [`ParsedLog::out_of_order`] rather than rejected. An empty source yields
/// an empty log with user id 0.
pub fn parse_session_log<R: BufRead>(
    reader: R,
    opts: &ParseOptions,
) -> Result<ParsedLog, ParseError> {
    let mut events: Vec<MouseEvent> = Vec::new();
    let mut user_id: Option<u32> = None;
    let mut out_of_order = 0usize;
    let mut saw_data_line = false;

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if !saw_data_line {
            // Header auto-detection: first non-blank line with a non-numeric
            // first token.
            let first = trimmed.split_whitespace().next().unwrap_or("");
            if first.parse::<f64>().is_err() {
                saw_data_line = true;
                continue;
            }
        }
        saw_data_line = true;

        let event = parse_event_line(trimmed, line_no, opts)?;
        match user_id {
            None => user_id = Some(event.user_id),
            Some(expected) if expected != event.user_id => {
                return Err(ParseError::MixedUserIds {
                    line: line_no,
                    expected,
                    found: event.user_id,
                })
            }
            Some(_) => {}
        }
        if let Some(prev) = events.last() {
            if event.timestamp < prev.timestamp {
                out_of_order += 1;
            }
        }
        events.push(event);
    }

    if out_of_order > 0 {
        events.sort_by(|a, b| a.timestamp.partial_cmp(&b.timestamp).expect("finite"));
    }

    Ok(ParsedLog {
        log: SessionLog {
            user_id: user_id.unwrap_or(0),
            events,
        },
        out_of_order,
    })
}

/// [`parse_session_log`] over an in-memory string.
pub fn parse_session_str(source: &str, opts: &ParseOptions) -> Result<ParsedLog, ParseError> {
    parse_session_log(source.as_bytes(), opts)
}

/// Drops every event that repeats the previous retained event's
/// `(x, y, event_type)`. The first event of each run is kept and relative
/// order is preserved. Idempotent.
pub fn dedupe_events(events: &[MouseEvent]) -> Vec<MouseEvent> {
    let mut out: Vec<MouseEvent> = Vec::with_capacity(events.len());
    for &event in events {
        match out.last() {
            Some(prev) if prev.dedupe_key() == event.dedupe_key() => {}
            _ => out.push(event),
        }
    }
    out
}

/// Writes a session log in the five-field text format, one event per line.
///
/// Timestamps use the shortest decimal form that round-trips, so
/// `parse_session_log(write(log)) == log`.
pub fn write_session_log<W: Write>(mut writer: W, log: &SessionLog) -> io::Result<()> {
    for e in &log.events {
        writeln!(
            writer,
            "{} {} {} {} {}",
            e.timestamp, e.x, e.y, e.event_type, e.user_id
        )?;
    }
    Ok(())
}

/// [`write_session_log`] into a `String`.
pub fn session_log_to_string(log: &SessionLog) -> String {
    let mut buf = Vec::new();
    write_session_log(&mut buf, log).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("log text is ASCII")
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    fn opts() -> ParseOptions {
        ParseOptions::default()
    }

    /// The 30 events of the published sample listing (header stripped).
    pub(crate) const SAMPLE_SESSION: &str = "\
1616448584.38407 1088 608 -1 0
1616448584.39206 1097 608 -1 0
1616448584.40092 1105 609 -1 0
1616448584.40905 1111 610 -1 0
1616448584.41694 1115 610 -1 0
1616448584.42525 1118 611 -1 0
1616448584.43254 1120 611 -1 0
1616448584.44124 1120 611 -1 0
1616448584.47240 1121 611 -1 0
1616448584.48063 1124 611 -1 0
1616448584.48944 1134 611 -1 0
1616448584.49721 1149 609 -1 0
1616448584.50498 1175 604 -1 0
1616448584.51301 1212 599 -1 0
1616448584.52069 1250 597 -1 0
1616448584.52879 1281 596 -1 0
1616448584.53722 1305 596 -1 0
1616448584.54413 1319 596 -1 0
1616448584.55292 1328 596 -1 0
1616448584.56013 1331 596 -1 0
1616448584.56824 1331 596 -1 0
1616448585.98513 1329 594 -1 0
1616448585.99257 1318 590 -1 0
1616448586.00097 1304 585 -1 0
1616448586.00924 1282 578 -1 0
1616448586.01713 1269 572 -1 0
1616448586.02524 1259 567 -1 0
1616448586.03287 1255 564 -1 0
1616448586.04110 1253 562 -1 0
1616448586.04918 1251 561 -1 0
";

    #[test]
    fn parses_sample_line() {
        let e = parse_event_line("1616448584.38407 1088 608 -1 0", 1, &opts()).unwrap();
        assert_eq!(e.timestamp, 1616448584.38407);
        assert_eq!((e.x, e.y), (1088, 608));
        assert_eq!(e.event_type, -1);
        assert_eq!(e.user_id, 0);
    }

    #[test]
    fn parses_all_zero_line() {
        let e = parse_event_line("0 0 0 -1 0", 1, &opts()).unwrap();
        assert_eq!(e.timestamp, 0.0);
        assert_eq!((e.x, e.y, e.event_type, e.user_id), (0, 0, -1, 0));
    }

    #[test]
    fn rejects_non_numeric_timestamp() {
        let err = parse_event_line("abc 1 2 -1 0", 7, &opts()).unwrap_err();
        match err {
            ParseError::InvalidNumber { line, field, .. } => {
                assert_eq!((line, field), (7, 1));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn rejects_bad_field_count_negative_coord_and_bounds() {
        assert!(matches!(
            parse_event_line("1 2 3 4", 1, &opts()),
            Err(ParseError::FieldCount { found: 4, .. })
        ));
        assert!(matches!(
            parse_event_line("1 -5 3 -1 0", 1, &opts()),
            Err(ParseError::NegativeValue { field: 2, .. })
        ));
        assert!(matches!(
            parse_event_line("1 9000 3 -1 0", 1, &opts()),
            Err(ParseError::CoordOutOfBounds { field: 2, .. })
        ));
        assert!(matches!(
            parse_event_line("nan 1 2 -1 0", 1, &opts()),
            Err(ParseError::InvalidNumber { field: 1, .. })
        ));
        assert!(matches!(
            parse_event_line("1 2 3 -1 -1", 1, &opts()),
            Err(ParseError::NegativeValue { field: 5, .. })
        ));
    }

    #[test]
    fn tabs_and_mixed_whitespace_are_accepted() {
        let e = parse_event_line("1.5\t10\t 20\t-1\t3", 1, &opts()).unwrap();
        assert_eq!((e.x, e.y, e.user_id), (10, 20, 3));
    }

    #[test]
    fn parses_sample_session_with_header() {
        let with_header = format!("Timestamp\tX\tY\tEvent Type\tUser ID\n{SAMPLE_SESSION}");
        let parsed = parse_session_str(&with_header, &opts()).unwrap();
        assert_eq!(parsed.log.events.len(), 30);
        assert_eq!(parsed.log.user_id, 0);
        assert_eq!(parsed.out_of_order, 0);
    }

    #[test]
    fn empty_input_gives_empty_log() {
        let parsed = parse_session_str("", &opts()).unwrap();
        assert!(parsed.log.events.is_empty());
    }

    #[test]
    fn mixed_user_ids_error() {
        let err = parse_session_str("1 2 3 -1 0\n2 3 4 -1 1\n", &opts()).unwrap_err();
        assert!(matches!(
            err,
            ParseError::MixedUserIds {
                line: 2,
                expected: 0,
                found: 1
            }
        ));
    }

    #[test]
    fn out_of_order_events_are_sorted_and_counted() {
        let parsed = parse_session_str("2 0 0 -1 0\n1 1 1 -1 0\n3 2 2 -1 0\n", &opts()).unwrap();
        assert_eq!(parsed.out_of_order, 1);
        let ts: Vec<f64> = parsed.log.events.iter().map(|e| e.timestamp).collect();
        assert_eq!(ts, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn dedupe_removes_the_sample_duplicates() {
        let parsed = parse_session_str(SAMPLE_SESSION, &opts()).unwrap();
        let deduped = dedupe_events(&parsed.log.events);
        assert_eq!(deduped.len(), 28);
        // The two dropped rows repeat (1120,611) and (1331,596).
        assert!(!deduped
            .iter()
            .any(|e| (e.timestamp - 1616448584.44124).abs() < 1e-9));
        assert!(!deduped
            .iter()
            .any(|e| (e.timestamp - 1616448584.56824).abs() < 1e-9));
    }

    #[test]
    fn dedupe_identity_and_run_collapse() {
        let distinct: Vec<MouseEvent> = (0..5)
            .map(|i| MouseEvent {
                timestamp: i as f64,
                x: i,
                y: 0,
                event_type: -1,
                user_id: 0,
            })
            .collect();
        assert_eq!(dedupe_events(&distinct), distinct);

        let identical: Vec<MouseEvent> = (0..5)
            .map(|i| MouseEvent {
                timestamp: i as f64,
                x: 7,
                y: 7,
                event_type: -1,
                user_id: 0,
            })
            .collect();
        assert_eq!(dedupe_events(&identical).len(), 1);
    }

    #[test]
    fn dedupe_distinguishes_event_types() {
        let mixed = vec![
            MouseEvent {
                timestamp: 0.0,
                x: 5,
                y: 5,
                event_type: -1,
                user_id: 0,
            },
            MouseEvent {
                timestamp: 1.0,
                x: 5,
                y: 5,
                event_type: 1,
                user_id: 0,
            },
            MouseEvent {
                timestamp: 2.0,
                x: 5,
                y: 5,
                event_type: -1,
                user_id: 0,
            },
        ];
        assert_eq!(dedupe_events(&mixed).len(), 3);
    }

    #[test]
    fn writer_round_trips_the_sample_session() {
        let parsed = parse_session_str(SAMPLE_SESSION, &opts()).unwrap();
        let text = session_log_to_string(&parsed.log);
        let reparsed = parse_session_str(&text, &opts()).unwrap();
        assert_eq!(reparsed.log, parsed.log);
    }

    prop_compose! {
        fn arb_event()(
            t in 0.0_f64..1e6,
            x in 0u32..100,
            y in 0u32..100,
            event_type in prop_oneof![Just(-1), Just(0), Just(1)],
        ) -> MouseEvent {
            MouseEvent { timestamp: t, x, y, event_type, user_id: 0 }
        }
    }

    proptest! {
        #[test]
        fn dedupe_is_idempotent(mut events in prop::collection::vec(arb_event(), 0..120)) {
            events.sort_by(|a, b| a.timestamp.partial_cmp(&b.timestamp).unwrap());
            let once = dedupe_events(&events);
            let twice = dedupe_events(&once);
            prop_assert_eq!(&once, &twice);
        }

        #[test]
        fn dedupe_leaves_no_adjacent_duplicates(mut events in prop::collection::vec(arb_event(), 0..120)) {
            events.sort_by(|a, b| a.timestamp.partial_cmp(&b.timestamp).unwrap());
            let out = dedupe_events(&events);
            for pair in out.windows(2) {
                prop_assert_ne!(pair[0].dedupe_key(), pair[1].dedupe_key());
            }
        }

        #[test]
        fn writer_round_trips(mut events in prop::collection::vec(arb_event(), 0..60)) {
            events.sort_by(|a, b| a.timestamp.partial_cmp(&b.timestamp).unwrap());
            let log = SessionLog { user_id: 0, events };
            let parsed = parse_session_str(&session_log_to_string(&log), &opts()).unwrap();
            prop_assert_eq!(parsed.log, log);
        }
    }
}
