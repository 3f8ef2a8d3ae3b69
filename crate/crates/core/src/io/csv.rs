//! EVT-CSV text event files: header `x,y,t,p`, one decimal event per line.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Polarity, SensorGeometry};

pub const CSV_HEADER: &str = "x,y,t,p";

/// Reads an EVT-CSV stream. Polarity accepts -1/1 and 0/1 (0 maps to -1).
///
/// Line numbers in errors are 1-based and count the header as line 1.
pub fn read_csv<R: BufRead>(source: R, geometry: SensorGeometry) -> Result<EventStream> {
    let mut lines = source.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim_end_matches('\r') != CSV_HEADER {
        return Err(Error::CsvHeader { found: header });
    }
    let mut events = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        events.push(parse_line(line).map_err(|reason| Error::CsvLine {
            line: line_no,
            reason,
        })?);
    }
    EventStream::new(geometry, events, None).map_err(Error::Invalid)
}

fn parse_line(line: &str) -> std::result::Result<Event, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 fields, found {}", fields.len()));
    }
    let x = fields[0]
        .parse::<u16>()
        .map_err(|e| format!("x {:?}: {e}", fields[0]))?;
    let y = fields[1]
        .parse::<u16>()
        .map_err(|e| format!("y {:?}: {e}", fields[1]))?;
    let t = fields[2]
        .parse::<i64>()
        .map_err(|e| format!("t {:?}: {e}", fields[2]))?;
    let p = fields[3]
        .parse::<i64>()
        .ok()
        .and_then(Polarity::from_lenient)
        .ok_or_else(|| format!("p {:?}: expected -1, 0 or 1", fields[3]))?;
    Ok(Event { x, y, t, p })
}

/// Writes polarity as -1/1. Returns bytes written.
pub fn write_csv<W: Write>(stream: &EventStream, mut sink: W) -> Result<u64> {
    let mut out = String::with_capacity(8 + 16 * stream.len());
    out.push_str(CSV_HEADER);
    out.push('\n');
    for e in stream.events() {
        use std::fmt::Write as _;
        let _ = writeln!(out, "{},{},{},{}", e.x, e.y, e.t, e.p.value());
    }
    sink.write_all(out.as_bytes())?;
    Ok(out.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<EventStream> {
        read_csv(s.as_bytes(), SensorGeometry::GEN1)
    }

    #[test]
    fn single_line() {
        let s = read("x,y,t,p\n3,5,1000,1\n").unwrap();
        assert_eq!(s.events(), &[Event::new(3, 5, 1000, Polarity::Pos)]);
    }

    #[test]
    fn zero_polarity_maps_to_negative() {
        let s = read("x,y,t,p\n3,5,1000,0\n").unwrap();
        assert_eq!(s.events()[0].p, Polarity::Neg);
    }

    #[test]
    fn malformed_reports_line() {
        match read("x,y,t,p\n3,5,abc,1\n").unwrap_err() {
            Error::CsvLine { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
        match read("x,y,t,p\n1,1,1,1\n3,5,7\n").unwrap_err() {
            Error::CsvLine { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn header_mismatch() {
        assert!(matches!(read("t,x,y,p\n"), Err(Error::CsvHeader { .. })));
        assert!(matches!(read(""), Err(Error::CsvHeader { .. })));
    }

    #[test]
    fn roundtrip() {
        let s = read("x,y,t,p\n3,5,1000,-1\n4,4,1000,1\n9,0,2000,1\n").unwrap();
        let mut buf = Vec::new();
        write_csv(&s, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "x,y,t,p\n3,5,1000,-1\n4,4,1000,1\n9,0,2000,1\n");
        assert_eq!(read_csv(buf.as_slice(), SensorGeometry::GEN1).unwrap(), s);
    }

    #[test]
    fn crlf_tolerated() {
        let s = read("x,y,t,p\r\n3,5,1000,1\r\n").unwrap();
        assert_eq!(s.len(), 1);
    }
}
