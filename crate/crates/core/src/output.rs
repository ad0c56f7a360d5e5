//! File writers: CSV tables, legacy VTK point data, JSON reports.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::point_cloud::Vec3;

/// Scientific notation with 6 significant digits and a signed two-digit
/// exponent, e.g. `2.13510e-04`.
pub fn sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.5e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let e: i32 = exp.parse().expect("integer exponent");
    format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

/// A column of a point-data table.
pub enum Column<'a> {
    Scalar(&'a str, &'a [f64]),
    Vector(&'a str, &'a [Vec3]),
}

impl Column<'_> {
    fn len(&self) -> usize {
        match self {
            Column::Scalar(_, v) => v.len(),
            Column::Vector(_, v) => v.len(),
        }
    }
}

/// CSV of `x,y,z` followed by the given columns (vectors expand to
/// `name_x,name_y,name_z`).
pub fn point_table_csv(points: &[Vec3], columns: &[Column]) -> String {
    let mut s = String::from("x,y,z");
    for c in columns {
        match c {
            Column::Scalar(name, _) => {
                let _ = write!(s, ",{name}");
            }
            Column::Vector(name, _) => {
                let _ = write!(s, ",{name}_x,{name}_y,{name}_z");
            }
        }
    }
    s.push('\n');
    for (i, p) in points.iter().enumerate() {
        let _ = write!(s, "{},{},{}", sci(p.x), sci(p.y), sci(p.z));
        for c in columns {
            debug_assert_eq!(c.len(), points.len());
            match c {
                Column::Scalar(_, v) => {
                    let _ = write!(s, ",{}", sci(v[i]));
                }
                Column::Vector(_, v) => {
                    let _ = write!(s, ",{},{},{}", sci(v[i].x), sci(v[i].y), sci(v[i].z));
                }
            }
        }
        s.push('\n');
    }
    s
}

/// Legacy ASCII VTK polydata with one vertex cell per point.
pub fn write_vtk(path: &Path, title: &str, points: &[Vec3], columns: &[Column]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let n = points.len();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET POLYDATA")?;
    writeln!(w, "POINTS {n} double")?;
    for p in points {
        writeln!(w, "{:.17e} {:.17e} {:.17e}", p.x, p.y, p.z)?;
    }
    writeln!(w, "VERTICES {n} {}", 2 * n)?;
    for i in 0..n {
        writeln!(w, "1 {i}")?;
    }
    if !columns.is_empty() {
        writeln!(w, "POINT_DATA {n}")?;
    }
    for c in columns {
        match c {
            Column::Scalar(name, v) => {
                writeln!(w, "SCALARS {name} double 1")?;
                writeln!(w, "LOOKUP_TABLE default")?;
                for x in *v {
                    writeln!(w, "{x:.17e}")?;
                }
            }
            Column::Vector(name, v) => {
                writeln!(w, "VECTORS {name} double")?;
                for x in *v {
                    writeln!(w, "{:.17e} {:.17e} {:.17e}", x.x, x.y, x.z)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| crate::Error::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sci(2.1351e-4), "2.13510e-04");
        assert_eq!(sci(0.1), "1.00000e-01");
        assert_eq!(sci(-1234567.0), "-1.23457e+06");
        assert_eq!(sci(0.0), "0.00000e+00");
    }

    #[test]
    fn table_header_and_rows() {
        let pts = [Vec3::new(1.0, 0.0, 0.0)];
        let s = point_table_csv(&pts, &[Column::Scalar("phi", &[2.0]), Column::Vector("v", &[Vec3::z()])]);
        assert_eq!(
            s,
            "x,y,z,phi,v_x,v_y,v_z\n1.00000e+00,0.00000e+00,0.00000e+00,2.00000e+00,0.00000e+00,0.00000e+00,1.00000e+00\n"
        );
    }

    #[test]
    fn vtk_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.vtk");
        write_vtk(&p, "t", &[Vec3::zeros(), Vec3::x()], &[Column::Scalar("k", &[1.0, 2.0])]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("POINTS 2 double"));
        assert!(text.contains("VERTICES 2 4"));
        assert!(text.contains("SCALARS k double 1"));
    }
}
