//! EVS1 binary event files.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size | field                     |
//! |--------|------|---------------------------|
//! | 0      | 4    | magic `"EVS1"`            |
//! | 4      | 2    | width (u16)               |
//! | 6      | 2    | height (u16)              |
//! | 8      | 8    | event count (u64)         |
//! | 16     | 13·n | events: x u16, y u16, t i64, p i8 |

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Polarity, SensorGeometry};

pub const EVS1_MAGIC: [u8; 4] = *b"EVS1";
pub const EVS1_HEADER_LEN: usize = 16;
pub const EVS1_RECORD_LEN: usize = 13;

pub fn encode_evs1(stream: &EventStream) -> Vec<u8> {
    let g = stream.geometry();
    let mut out = Vec::with_capacity(EVS1_HEADER_LEN + EVS1_RECORD_LEN * stream.len());
    out.extend_from_slice(&EVS1_MAGIC);
    out.extend_from_slice(&g.width.to_le_bytes());
    out.extend_from_slice(&g.height.to_le_bytes());
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for e in stream.events() {
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.extend_from_slice(&e.t.to_le_bytes());
        out.push(e.p.value() as u8);
    }
    out
}

/// Writes `stream` and returns the number of bytes emitted (`16 + 13·count`).
pub fn write_evs1<W: Write>(stream: &EventStream, mut sink: W) -> Result<u64> {
    let bytes = encode_evs1(stream);
    sink.write_all(&bytes)?;
    Ok(bytes.len() as u64)
}

pub fn decode_evs1(bytes: &[u8]) -> Result<EventStream> {
    if bytes.len() < EVS1_HEADER_LEN {
        return Err(Error::TruncatedHeader);
    }
    if bytes[0..4] != EVS1_MAGIC {
        return Err(Error::BadMagic);
    }
    let width = u16::from_le_bytes([bytes[4], bytes[5]]);
    let height = u16::from_le_bytes([bytes[6], bytes[7]]);
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let payload = &bytes[EVS1_HEADER_LEN..];
    let expected = count
        .checked_mul(EVS1_RECORD_LEN as u64)
        .filter(|&n| n == payload.len() as u64);
    if expected.is_none() {
        return Err(Error::TruncatedPayload {
            declared: count,
            remaining: payload.len(),
        });
    }

    let mut events = Vec::with_capacity(count as usize);
    for (index, rec) in payload.chunks_exact(EVS1_RECORD_LEN).enumerate() {
        let x = u16::from_le_bytes([rec[0], rec[1]]);
        let y = u16::from_le_bytes([rec[2], rec[3]]);
        let t = i64::from_le_bytes(rec[4..12].try_into().unwrap());
        let p = Polarity::from_signed(rec[12] as i8 as i64)
            .ok_or(Error::InvalidPolarity { index })?;
        events.push(Event { x, y, t, p });
    }
    let geometry = SensorGeometry { width, height };
    EventStream::new(geometry, events, None).map_err(Error::Invalid)
}

pub fn read_evs1<R: Read>(mut source: R) -> Result<EventStream> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    decode_evs1(&bytes)
}
