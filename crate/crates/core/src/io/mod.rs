//! Event file formats, dataset manifests, and split/fold generation.

mod csv;
mod evs1;
mod manifest;
mod split;

pub use self::csv::{read_csv, write_csv, CSV_HEADER};
pub use self::evs1::{decode_evs1, encode_evs1, read_evs1, write_evs1, EVS1_HEADER_LEN, EVS1_MAGIC, EVS1_RECORD_LEN};
pub use self::manifest::{DatasetManifest, Sample, Split};
pub use self::split::{kfold, split_dataset, FoldAssignment, SplitRatios};

use std::path::Path;

use crate::error::{Error, Result};
use crate::event::{EventStream, SensorGeometry};

/// Reads an event file, choosing the format from the extension (`.csv` or EVS1).
///
/// CSV files carry no geometry, so `geometry` is required for them.
pub fn read_event_file(path: &Path, geometry: Option<SensorGeometry>) -> Result<EventStream> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    if is_csv(path) {
        let geometry = geometry
            .ok_or_else(|| Error::Config("CSV input requires an explicit geometry".into()))?;
        read_csv(file, geometry)
    } else {
        read_evs1(file)
    }
}

pub fn write_event_file(path: &Path, stream: &EventStream) -> Result<u64> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let n = if is_csv(path) {
        write_csv(stream, &mut file)?
    } else {
        write_evs1(stream, &mut file)?
    };
    std::io::Write::flush(&mut file)?;
    Ok(n)
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}
