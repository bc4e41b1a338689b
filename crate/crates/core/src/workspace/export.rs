//! Boundary-set files: CSV (one row per point) or JSON (the whole set).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BoundaryKind, BoundarySet};
use crate::{Error, Result};

/// One point of a boundary polyline; rows of the same `curve` form a polyline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCsvRow {
    pub kind: BoundaryKind,
    pub sweep_param_value: f64,
    pub a_sx: f64,
    pub a_sz: f64,
    pub curve: usize,
}

/// Writes `set` as CSV or JSON, chosen by the file extension.
pub fn write_boundary_set(set: &BoundarySet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    match ext.as_deref() {
        Some("csv") => {
            let mut w = csv::Writer::from_writer(file);
            for (curve, c) in set.curves.iter().enumerate() {
                for p in &c.points {
                    w.serialize(BoundaryCsvRow {
                        kind: c.kind,
                        sweep_param_value: p.sweep,
                        a_sx: p.a_sx,
                        a_sz: p.a_sz,
                        curve,
                    })?;
                }
            }
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        Some("json") => {
            let mut w = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, set)?;
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        _ => {
            return Err(Error::Parse {
                path: path.into(),
                message: "expected a .csv or .json extension".into(),
            })
        }
    }
    Ok(())
}

pub fn read_boundary_json(path: impl AsRef<Path>) -> Result<BoundarySet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

pub fn read_boundary_csv(path: impl AsRef<Path>) -> Result<Vec<BoundaryCsvRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.into(),
            message: format!("{other:?}"),
        },
    })?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConfigClass, StructuralParams};
    use crate::workspace::boundary_set;
    use nalgebra::Vector3;

    #[test]
    fn csv_and_json_round_trip() {
        let set = boundary_set(
            &Vector3::new(60.0, 20.0, 150.0),
            ConfigClass::Ci2,
            &StructuralParams::default(),
            120,
        );
        assert!(!set.curves.is_empty());
        let dir = tempfile::tempdir().unwrap();
        let json = dir.path().join("b.json");
        write_boundary_set(&set, &json).unwrap();
        assert_eq!(read_boundary_json(&json).unwrap(), set);

        let csv_path = dir.path().join("b.csv");
        write_boundary_set(&set, &csv_path).unwrap();
        let rows = read_boundary_csv(&csv_path).unwrap();
        let n: usize = set.curves.iter().map(|c| c.points.len()).sum();
        assert_eq!(rows.len(), n);
        let first = &set.curves[0].points[0];
        assert_eq!(rows[0].kind, set.curves[0].kind);
        assert_eq!(rows[0].a_sx, first.a_sx);
        assert_eq!(rows[0].sweep_param_value, first.sweep);

        assert!(write_boundary_set(&set, dir.path().join("b.txt")).is_err());
    }
}
