//! Plain-text raster format.
//!
//! ```text
//! RMK-GRID 1
//! origin_x origin_y cell_size n_rows n_cols unit
//! v v v ...        (n_rows lines of n_cols values, north-up)
//! ```
//!
//! Values are written in shortest round-trip form, so every finite `f64`
//! survives an export/import cycle bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Geometry, Grid2D, Unit};
use crate::error::{Error, Result};

const MAGIC: &str = "RMK-GRID 1";

pub(crate) fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn write_raster<W: Write>(g: &Grid2D, mut w: W) -> std::io::Result<()> {
    let geo = g.geometry();
    writeln!(w, "{MAGIC}")?;
    writeln!(
        w,
        "{} {} {} {} {} {}",
        fmt_f64(geo.origin_x),
        fmt_f64(geo.origin_y),
        fmt_f64(geo.cell_size),
        geo.n_rows,
        geo.n_cols,
        g.unit().token()
    )?;
    let mut line = String::new();
    for row in g.values().chunks(geo.n_cols) {
        line.clear();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(&fmt_f64(*v));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_raster<R: BufRead>(r: R) -> Result<Grid2D> {
    let mut lines = r.lines();
    let mut next = |what: &str| -> Result<String> {
        match lines.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(Error::Raster(e.to_string())),
            None => Err(Error::Raster(format!("unexpected end of file, expected {what}"))),
        }
    };
    let magic = next("magic line")?;
    if magic.trim() != MAGIC {
        return Err(Error::Raster(format!("bad magic line {magic:?}")));
    }
    let header = next("header")?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 6 {
        return Err(Error::Raster(format!(
            "header needs 6 fields, found {}",
            fields.len()
        )));
    }
    let num = |s: &str, name: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::Raster(format!("bad {name} {s:?}")))
    };
    let count = |s: &str, name: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| Error::Raster(format!("bad {name} {s:?}")))
    };
    let geometry = Geometry {
        origin_x: num(fields[0], "origin_x")?,
        origin_y: num(fields[1], "origin_y")?,
        cell_size: num(fields[2], "cell_size")?,
        n_rows: count(fields[3], "n_rows")?,
        n_cols: count(fields[4], "n_cols")?,
    };
    geometry
        .validate()
        .map_err(|e| Error::Raster(e.to_string()))?;
    let unit =
        Unit::parse(fields[5]).ok_or_else(|| Error::Raster(format!("unknown unit {:?}", fields[5])))?;

    let mut values = Vec::with_capacity(geometry.n_cells());
    let mut rows = 0usize;
    for line in lines {
        let line = line.map_err(|e| Error::Raster(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        rows += 1;
        let before = values.len();
        for tok in line.split_whitespace() {
            values.push(num(tok, "value")?);
        }
        if values.len() - before != geometry.n_cols {
            return Err(Error::Raster(format!(
                "row {rows} has {} values, header declares {} columns",
                values.len() - before,
                geometry.n_cols
            )));
        }
    }
    if rows != geometry.n_rows {
        return Err(Error::Raster(format!(
            "found {rows} rows ({} values), header declares {}×{}",
            values.len(),
            geometry.n_rows,
            geometry.n_cols
        )));
    }
    Grid2D::new(geometry, values, unit).map_err(|e| Error::Raster(e.to_string()))
}

pub fn export_raster(g: &Grid2D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_raster(g, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn import_raster(path: impl AsRef<Path>) -> Result<Grid2D> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_raster(BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn round_trip(g: &Grid2D) -> Grid2D {
        let mut buf = Vec::new();
        write_raster(g, &mut buf).unwrap();
        read_raster(buf.as_slice()).unwrap()
    }

    #[test]
    fn small_grid_round_trip() {
        let geo = Geometry::new(-5.0, 12.5, 2.0, 3, 3).unwrap();
        let g = Grid2D::new(
            geo,
            vec![-200.0, -30.1, 0.0, 1e-7, -1e-300, 3.25, 7.0, 1e20, -0.5],
            Unit::Db,
        )
        .unwrap();
        assert_eq!(round_trip(&g), g);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.grid");
        let geo = Geometry::new(0.0, 0.0, 1.5, 2, 4).unwrap();
        let g = Grid2D::new(geo, vec![0.0, 1e-20, 0.25, 3.0, 1.0, 2.0, 4.0, 1e-13], Unit::LinearWatts)
            .unwrap();
        export_raster(&g, &p).unwrap();
        assert_eq!(import_raster(&p).unwrap(), g);
        assert!(matches!(
            import_raster(dir.path().join("missing.grid")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn large_grid_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let geo = Geometry::new(0.0, 0.0, 10.0, 1000, 1000).unwrap();
        let vals: Vec<f64> = (0..geo.n_cells()).map(|_| rng.random_range(-180.0..0.0)).collect();
        let g = Grid2D::new(geo, vals, Unit::Db).unwrap();
        let back = round_trip(&g);
        assert_eq!(back.values(), g.values());
    }

    #[test]
    fn malformed_inputs() {
        let count_mismatch = "RMK-GRID 1\n0 0 1 2 3 dB\n1 2 3\n";
        assert!(matches!(read_raster(count_mismatch.as_bytes()), Err(Error::Raster(_))));
        let short_row = "RMK-GRID 1\n0 0 1 2 2 dB\n1 2\n3\n";
        assert!(read_raster(short_row.as_bytes()).is_err());
        let bad_magic = "GRID\n0 0 1 1 1 dB\n1\n";
        assert!(read_raster(bad_magic.as_bytes()).is_err());
        let bad_unit = "RMK-GRID 1\n0 0 1 1 1 dBm\n1\n";
        assert!(read_raster(bad_unit.as_bytes()).is_err());
        let short_header = "RMK-GRID 1\n0 0 1 1 dB\n1\n";
        assert!(read_raster(short_header.as_bytes()).is_err());
        let negative_watts = "RMK-GRID 1\n0 0 1 1 1 linear_watts\n-1\n";
        assert!(read_raster(negative_watts.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn finite_values_round_trip(vals in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 6)) {
            let geo = Geometry::new(1.0, 2.0, 0.5, 2, 3).unwrap();
            let g = Grid2D::new(geo, vals, Unit::Db).unwrap();
            let back = round_trip(&g);
            for (a, b) in g.values().iter().zip(back.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
