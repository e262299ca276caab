//! CSV and binary snapshot formats.
//!
//! Snapshot layout, all little-endian: `n: u64`, `r_max: f64`, `dt: f64`,
//! `frames: u64`, then per frame `t: f64` followed by `n + 1` samples.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, RadialGrid, SpaceTimeField};

/// Write `path` by way of a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn field_to_csv(field: &Field) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["r", "value"])?;
    for (j, v) in field.values().iter().enumerate() {
        w.write_record([fmt(field.grid().r(j)), fmt(*v)])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn write_field_csv(path: &Path, field: &Field) -> Result<()> {
    write_atomic(path, &field_to_csv(field)?)
}

/// Read an `r,value` CSV; the grid is reconstructed from the radii.
pub fn read_field_csv(path: &Path) -> Result<Field> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rs = Vec::new();
    let mut vs = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Dimension("short CSV row".into()))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Argument(format!("bad number in CSV: {e}")))
        };
        rs.push(parse(0)?);
        vs.push(parse(1)?);
    }
    if rs.len() < 5 || rs[0] != 0.0 {
        return Err(Error::Dimension("CSV must start at r = 0 with at least 5 rows".into()));
    }
    let grid = RadialGrid::new(*rs.last().unwrap(), rs.len() - 1)?;
    Field::new(grid, vs)
}

/// Exact decimal rendering; round-trips through `parse::<f64>`.
pub fn fmt(x: f64) -> String {
    format!("{x:e}")
}

/// Write a table with a header row.
pub fn table_to_csv(header: &[String], rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Dimension(format!(
                "row has {} entries, header has {}",
                row.len(),
                header.len()
            )));
        }
        w.write_record(row.iter().map(|x| fmt(*x)))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn snapshot_bytes(field: &SpaceTimeField, dt: f64) -> Result<Vec<u8>> {
    let grid = field
        .grid()
        .copied()
        .ok_or_else(|| Error::Argument("cannot write an empty snapshot".into()))?;
    let mut out = Vec::with_capacity(32 + field.len() * 8 * (grid.len() + 1));
    out.extend_from_slice(&(grid.n() as u64).to_le_bytes());
    out.extend_from_slice(&grid.r_max().to_le_bytes());
    out.extend_from_slice(&dt.to_le_bytes());
    out.extend_from_slice(&(field.len() as u64).to_le_bytes());
    for (t, frame) in field.times().iter().zip(field.frames()) {
        out.extend_from_slice(&t.to_le_bytes());
        for v in frame.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_snapshots(path: &Path, field: &SpaceTimeField, dt: f64) -> Result<()> {
    write_atomic(path, &snapshot_bytes(field, dt)?)
}

/// Parsed snapshot file: the step size and the frames.
pub fn parse_snapshots(bytes: &[u8]) -> Result<(f64, SpaceTimeField)> {
    let mut cur = bytes;
    let mut word = || -> Result<[u8; 8]> {
        let mut b = [0u8; 8];
        cur.read_exact(&mut b).map_err(|_| Error::Dimension("truncated snapshot".into()))?;
        Ok(b)
    };
    let n = u64::from_le_bytes(word()?) as usize;
    let r_max = f64::from_le_bytes(word()?);
    let dt = f64::from_le_bytes(word()?);
    let frames = u64::from_le_bytes(word()?) as usize;
    let grid = RadialGrid::new(r_max, n)?;
    let mut times = Vec::with_capacity(frames);
    let mut fields = Vec::with_capacity(frames);
    for _ in 0..frames {
        times.push(f64::from_le_bytes(word()?));
        let mut vals = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            vals.push(f64::from_le_bytes(word()?));
        }
        fields.push(Field::new(grid, vals)?);
    }
    Ok((dt, SpaceTimeField::new(times, fields)?))
}

pub fn read_snapshots(path: &Path) -> Result<(f64, SpaceTimeField)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    parse_snapshots(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = RadialGrid::new(3.0, 30).unwrap();
        let f = Field::from_fn(g, |r| (r * 1.1).sin() / 7.0).unwrap();
        let p = dir.path().join("f.csv");
        write_field_csv(&p, &f).unwrap();
        let back = read_field_csv(&p).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.grid().n(), 30);
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let g = RadialGrid::new(2.0, 10).unwrap();
        let prof = Field::from_fn(g, |r| (-r).exp()).unwrap();
        let st = SpaceTimeField::separable(&[0.0, 0.25, 0.5], |t| 1.0 + t, &prof).unwrap();
        let bytes = snapshot_bytes(&st, 0.125).unwrap();
        assert_eq!(bytes.len(), 32 + 3 * 8 * 12);
        let (dt, back) = parse_snapshots(&bytes).unwrap();
        assert_eq!(dt, 0.125);
        assert_eq!(back, st);
        assert!(parse_snapshots(&bytes[..40]).is_err());
    }
}
