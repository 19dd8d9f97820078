//! CSV and JSON encodings of scan records and fit results.
//!
//! CSV layout, one row per scan point after a mandatory header:
//!
//! ```text
//! axis_um,coincidences,singles_a,singles_b,accidentals
//! ```
//!
//! The first column is `axis_rad` for waveplate scans. Floats are written in
//! Rust's shortest round-trip form, so writing a parsed file reproduces it
//! byte for byte.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::detector::{AxisKind, ScanRecord};
use crate::error::{Error, Result};

const DATA_COLUMNS: [&str; 4] = ["coincidences", "singles_a", "singles_b", "accidentals"];

fn axis_header(kind: AxisKind) -> String {
    format!("axis_{}", kind.unit())
}

fn axis_from_header(name: &str) -> Option<AxisKind> {
    [AxisKind::StagePositionUm, AxisKind::WaveplateAngleRad]
        .into_iter()
        .find(|k| axis_header(*k) == name)
}

pub fn write_scan_csv<W: Write>(scan: &ScanRecord, out: W) -> Result<()> {
    scan.validate()?;
    let mut w = csv::Writer::from_writer(out);
    let axis = axis_header(scan.axis_kind);
    w.write_record(std::iter::once(axis.as_str()).chain(DATA_COLUMNS))?;
    for i in 0..scan.len() {
        w.write_record([
            scan.axis_values[i].to_string(),
            scan.coincidences[i].to_string(),
            scan.singles_a[i].to_string(),
            scan.singles_b[i].to_string(),
            scan.accidental_estimate[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn scan_to_csv_string(scan: &ScanRecord) -> Result<String> {
    let mut buf = Vec::new();
    write_scan_csv(scan, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is ASCII"))
}

fn schema(line: u64, column: usize, message: impl Into<String>) -> Error {
    Error::Schema {
        line,
        column,
        message: message.into(),
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Csv(e),
        _ => schema(line, 0, e.to_string()),
    }
}

fn parse_field<T: std::str::FromStr>(
    field: &str,
    line: u64,
    column: usize,
    what: &str,
) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| schema(line, column, format!("cannot parse {field:?} as {what}")))
}

/// Parses the CSV layout described in the module docs. The returned record has
/// no configuration, seed or source.
pub fn read_scan_csv<R: Read>(input: R) -> Result<ScanRecord> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.len() != 5 {
        return Err(schema(
            1,
            header.len().min(5) + 1,
            format!("expected 5 columns, found {}", header.len()),
        ));
    }
    let axis_kind = axis_from_header(header[0].trim()).ok_or_else(|| {
        schema(
            1,
            1,
            format!(
                "first column must be axis_um or axis_rad, found {:?}",
                &header[0]
            ),
        )
    })?;
    for (k, name) in DATA_COLUMNS.iter().enumerate() {
        if header[k + 1].trim() != *name {
            return Err(schema(
                1,
                k + 2,
                format!("expected column {name:?}, found {:?}", &header[k + 1]),
            ));
        }
    }

    let mut scan = ScanRecord {
        axis_kind,
        axis_values: Vec::new(),
        coincidences: Vec::new(),
        singles_a: Vec::new(),
        singles_b: Vec::new(),
        accidental_estimate: Vec::new(),
        config: None,
        seed: None,
        source: None,
    };
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 5 {
            return Err(schema(
                line,
                row.len().min(5) + 1,
                format!("expected 5 fields, found {}", row.len()),
            ));
        }
        let x: f64 = parse_field(&row[0], line, 1, "a number")?;
        if !x.is_finite() {
            return Err(schema(line, 1, "axis value is not finite"));
        }
        let acc: f64 = parse_field(&row[4], line, 5, "a number")?;
        if !(acc.is_finite() && acc >= 0.0) {
            return Err(schema(
                line,
                5,
                "accidentals must be finite and nonnegative",
            ));
        }
        scan.axis_values.push(x);
        scan.coincidences
            .push(parse_field(&row[1], line, 2, "a count")?);
        scan.singles_a
            .push(parse_field(&row[2], line, 3, "a count")?);
        scan.singles_b
            .push(parse_field(&row[3], line, 4, "a count")?);
        scan.accidental_estimate.push(acc);
    }
    if scan.is_empty() {
        return Err(schema(2, 1, "no data rows"));
    }
    Ok(scan)
}

fn json_error(e: serde_json::Error) -> Error {
    if e.is_io() {
        Error::Json(e)
    } else {
        schema(e.line() as u64, e.column(), e.to_string())
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Deserializes JSON, reporting syntax and shape problems as [`Error::Schema`].
pub fn from_json_str<T: DeserializeOwned>(s: &str) -> Result<T> {
    serde_json::from_str(s).map_err(json_error)
}

pub fn read_json<T: DeserializeOwned, R: Read>(input: R) -> Result<T> {
    serde_json::from_reader(BufReader::new(input)).map_err(json_error)
}

pub fn read_scan_json<R: Read>(input: R) -> Result<ScanRecord> {
    let scan: ScanRecord = read_json(input)?;
    scan.validate()
        .map_err(|e| schema(0, 0, format!("inconsistent scan record: {e}")))?;
    Ok(scan)
}

/// Reads a scan from `path`, as JSON if the extension is `json` and as CSV otherwise.
pub fn load_scan(path: &Path) -> Result<ScanRecord> {
    let file = File::open(path)?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        read_scan_json(file)
    } else {
        read_scan_csv(BufReader::new(file))
    }
}

pub fn save_csv(scan: &ScanRecord, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_scan_csv(scan, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ScanRecord {
        ScanRecord {
            axis_kind: AxisKind::StagePositionUm,
            axis_values: vec![-200.0, -194.66666666666666, 0.1],
            coincidences: vec![1160, 0, 93],
            singles_a: vec![120_011, 119_870, 120_300],
            singles_b: vec![119_950, 120_102, 119_777],
            accidental_estimate: vec![7.0, 7.0, 6.999999999999999],
            config: None,
            seed: None,
            source: None,
        }
    }

    #[test]
    fn csv_layout() {
        let text = scan_to_csv_string(&sample()).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("axis_um,coincidences,singles_a,singles_b,accidentals")
        );
        assert_eq!(lines.next(), Some("-200,1160,120011,119950,7"));
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let text = scan_to_csv_string(&sample()).unwrap();
        let back = read_scan_csv(text.as_bytes()).unwrap();
        assert_eq!(back, sample());
        assert_eq!(scan_to_csv_string(&back).unwrap(), text);
    }

    #[test]
    fn csv_schema_errors_carry_positions() {
        let bad_header = "x,coincidences,singles_a,singles_b,accidentals\n1,2,3,4,5\n";
        match read_scan_csv(bad_header.as_bytes()) {
            Err(Error::Schema {
                line: 1, column: 1, ..
            }) => {}
            other => panic!("{other:?}"),
        }
        let bad_count =
            "axis_um,coincidences,singles_a,singles_b,accidentals\n1,2,3,4,5\n2,-1,3,4,5\n";
        match read_scan_csv(bad_count.as_bytes()) {
            Err(Error::Schema {
                line: 3, column: 2, ..
            }) => {}
            other => panic!("{other:?}"),
        }
        let short = "axis_rad,coincidences,singles_a,singles_b,accidentals\n1,2,3\n";
        match read_scan_csv(short.as_bytes()) {
            Err(Error::Schema {
                line: 2, column: 4, ..
            }) => {}
            other => panic!("{other:?}"),
        }
        let empty = "axis_rad,coincidences,singles_a,singles_b,accidentals\n";
        assert!(matches!(
            read_scan_csv(empty.as_bytes()),
            Err(Error::Schema { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let text = to_json_string(&sample()).unwrap();
        let back = read_scan_json(text.as_bytes()).unwrap();
        assert_eq!(back, sample());
    }

    #[test]
    fn json_errors_carry_positions() {
        match read_scan_json("{\n  \"axis_kind\": 3\n}".as_bytes()) {
            Err(Error::Schema { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        let mut s = sample();
        s.coincidences.pop();
        let text = to_json_string(&s).unwrap();
        assert!(matches!(
            read_scan_json(text.as_bytes()),
            Err(Error::Schema { .. })
        ));
    }
}
