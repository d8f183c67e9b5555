//! JSON documents and RFC-4180 CSV tables. Numbers are written with 17
//! significant digits so every value re-parses bit for bit; missing values
//! are empty cells. Files are replaced atomically (temp file + rename).

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::planner::Trajectory;

pub const TRAJECTORY_HEADER: [&str; 7] = ["t", "x", "y", "z", "vx", "vy", "vz"];

fn io_error(path: &Path, err: impl std::fmt::Display) -> Error {
    Error::Io { path: path.display().to_string(), message: err.to_string() }
}

/// Write `bytes` to a sibling temp file, then rename it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_error(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::invalid(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Parse JSON, reporting the failing field path and line/column.
pub fn from_json<T: DeserializeOwned>(text: &str, source: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            Error::invalid(format!("{source}: {inner}"))
        } else {
            Error::invalid(format!("{source}: field `{path}`: {inner}"))
        }
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json(value)?.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_json(&read_text(path)?, &path.display().to_string())
}

/// `{:.16e}` for finite values, empty otherwise.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

fn parse_cell(cell: &str, row: usize, col: usize) -> Result<f64> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(f64::NAN);
    }
    cell.parse()
        .map_err(|_| Error::invalid(format!("csv row {}, column {}: not a number: {cell:?}", row + 1, col + 1)))
}

fn csv_string(header: Option<&[&str]>, rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let err = |e: csv::Error| Error::invalid(e.to_string());
    if let Some(h) = header {
        w.write_record(h).map_err(err)?;
    }
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}

fn csv_rows(text: &str, has_header: bool) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new().has_headers(has_header).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::invalid(format!("csv: {e}")))?;
        out.push(rec.iter().enumerate().map(|(j, c)| parse_cell(c, i, j)).collect::<Result<Vec<_>>>()?);
    }
    Ok(out)
}

/// Headerless grid, one CSV row per grid row.
pub fn grid_to_csv(values: &[Vec<f64>]) -> Result<String> {
    csv_string(None, values.iter().map(|row| row.iter().map(|&v| format_number(v)).collect()))
}

pub fn parse_grid_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    csv_rows(text, false)
}

pub fn trajectory_to_csv(traj: &Trajectory) -> Result<String> {
    let rows = traj.times.iter().zip(&traj.states).map(|(t, s)| {
        [*t, s.r.x, s.r.y, s.r.z, s.v.x, s.v.y, s.v.z].iter().map(|&v| format_number(v)).collect()
    });
    csv_string(Some(&TRAJECTORY_HEADER), rows)
}

/// Rows of `(t, x, y, z, vx, vy, vz)`.
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<[f64; 7]>> {
    csv_rows(text, true)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            <[f64; 7]>::try_from(r)
                .map_err(|r| Error::invalid(format!("trajectory row {}: expected 7 columns, got {}", i + 1, r.len())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::astro::{OrbitState, Vec3};

    #[test]
    fn numbers_round_trip_exactly() {
        for x in [0.1, -1.0 / 3.0, 6.552653, 1e-300, 1.7976931348623157e308, 5e-324] {
            let s = format_number(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(format_number(f64::NAN), "");
        assert_eq!(format_number(f64::INFINITY), "");
    }

    #[test]
    fn grid_round_trip_with_missing_cells() {
        let g = vec![vec![1.0, f64::NAN, 3.25], vec![0.1, 0.2, f64::NAN]];
        let text = grid_to_csv(&g).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().next().unwrap().contains(",,"));
        let back = parse_grid_csv(&text).unwrap();
        for (a, b) in g.iter().flatten().zip(back.iter().flatten()) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }

    #[test]
    fn trajectory_round_trip() {
        let s = OrbitState { r: Vec3::new(7000.0, -1.5, 0.1), v: Vec3::new(0.0, 7.5, 1.0 / 7.0) };
        let traj = Trajectory { times: vec![0.0, 12.5], states: vec![s, s], tof: 12.5 };
        let text = trajectory_to_csv(&traj).unwrap();
        assert!(text.starts_with("t,x,y,z,vx,vy,vz\n"));
        let rows = parse_trajectory_csv(&text).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1], [12.5, 7000.0, -1.5, 0.1, 0.0, 7.5, 1.0 / 7.0]);
    }

    #[test]
    fn json_errors_name_the_field() {
        #[derive(serde::Deserialize, Debug)]
        #[allow(dead_code)]
        struct Inner {
            n: usize,
        }
        #[derive(serde::Deserialize, Debug)]
        #[allow(dead_code)]
        struct Outer {
            inner: Inner,
        }
        let err = from_json::<Outer>("{\n  \"inner\": { \"n\": -3 }\n}", "x.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("x.json") && msg.contains("inner.n") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.json");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
