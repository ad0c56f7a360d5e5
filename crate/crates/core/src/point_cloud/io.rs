use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::shape::Vec3;
use crate::error::{Error, Result};

/// Write `x y z nx ny nz` per line.
pub fn write_xyz(path: &Path, points: &[Vec3], normals: &[Vec3]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (p, n) in points.iter().zip(normals) {
        writeln!(
            w,
            "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
            p.x, p.y, p.z, n.x, n.y, n.z
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_xyz(path: &Path) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let r = BufReader::new(File::open(path)?);
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = t
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                what: format!("{}:{}", path.display(), lineno + 1),
                detail: e.to_string(),
            })?;
        if vals.len() != 6 {
            return Err(Error::Parse {
                what: format!("{}:{}", path.display(), lineno + 1),
                detail: format!("expected 6 columns (x y z nx ny nz), found {}", vals.len()),
            });
        }
        points.push(Vec3::new(vals[0], vals[1], vals[2]));
        normals.push(Vec3::new(vals[3], vals[4], vals[5]));
    }
    Ok((points, normals))
}

/// Binary little-endian PLY with double-precision positions and normals.
pub fn write_ply(path: &Path, points: &[Vec3], normals: &[Vec3]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
         property double x\nproperty double y\nproperty double z\n\
         property double nx\nproperty double ny\nproperty double nz\nend_header\n",
        points.len()
    )?;
    for (p, n) in points.iter().zip(normals) {
        for v in [p.x, p.y, p.z, n.x, n.y, n.z] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_ply(path: &Path) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let mut r = BufReader::new(File::open(path)?);
    let bad = |detail: &str| Error::Parse {
        what: path.display().to_string(),
        detail: detail.to_string(),
    };
    let mut count = None;
    let mut props: Vec<(String, usize)> = Vec::new();
    let mut line = String::new();
    let mut first = true;
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(bad("unexpected end of header"));
        }
        let t = line.trim();
        if first {
            if t != "ply" {
                return Err(bad("missing ply magic"));
            }
            first = false;
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match parts.as_slice() {
            ["format", fmt, _] => {
                if *fmt != "binary_little_endian" {
                    return Err(bad("only binary_little_endian PLY is supported"));
                }
            }
            ["element", "vertex", n] => {
                count = Some(n.parse::<usize>().map_err(|_| bad("bad vertex count"))?);
            }
            ["element", ..] => {}
            ["property", ty, name] => {
                let size = match *ty {
                    "double" | "float64" => 8,
                    "float" | "float32" => 4,
                    _ => return Err(bad("unsupported property type")),
                };
                props.push((name.to_string(), size));
            }
            ["end_header"] => break,
            _ => {}
        }
    }
    let n = count.ok_or_else(|| bad("no vertex element"))?;
    let names = ["x", "y", "z", "nx", "ny", "nz"];
    let mut slots = [usize::MAX; 6];
    for (k, name) in names.iter().enumerate() {
        slots[k] = props
            .iter()
            .position(|(p, _)| p == name)
            .ok_or_else(|| bad("PLY needs x y z nx ny nz properties"))?;
    }
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut vals = vec![0.0; props.len()];
    for _ in 0..n {
        for (v, (_, size)) in vals.iter_mut().zip(&props) {
            if *size == 8 {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                *v = f64::from_le_bytes(b);
            } else {
                let mut b = [0u8; 4];
                r.read_exact(&mut b)?;
                *v = f32::from_le_bytes(b) as f64;
            }
        }
        points.push(Vec3::new(vals[slots[0]], vals[slots[1]], vals[slots[2]]));
        normals.push(Vec3::new(vals[slots[3]], vals[slots[4]], vals[slots[5]]));
    }
    Ok((points, normals))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_formats() {
        let dir = tempfile::tempdir().unwrap();
        let pts = vec![Vec3::new(0.1, -0.2, 0.3), Vec3::new(1.0 / 3.0, 2.0, -5.5)];
        let nrm = vec![Vec3::z(), Vec3::new(0.6, 0.8, 0.0)];
        let xyz = dir.path().join("c.xyz");
        write_xyz(&xyz, &pts, &nrm).unwrap();
        let (p, n) = read_xyz(&xyz).unwrap();
        assert_eq!(p, pts);
        assert_eq!(n, nrm);
        let ply = dir.path().join("c.ply");
        write_ply(&ply, &pts, &nrm).unwrap();
        let (p, n) = read_ply(&ply).unwrap();
        assert_eq!(p, pts);
        assert_eq!(n, nrm);
    }

    #[test]
    fn xyz_wrong_columns() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("bad.xyz");
        std::fs::write(&f, "1 2 3\n").unwrap();
        assert!(matches!(read_xyz(&f), Err(Error::Parse { .. })));
    }
}
