//! Legacy ASCII VTK export of the nodal diffusivity `κ` and absorption `μ`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::Mesh;

/// VTK cell type of a linear tetrahedron.
pub const VTK_TETRA: u8 = 10;

/// Nine significant digits.
fn num(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn format_vtk(mesh: &Mesh, kappa: &[f64], mu: &[f64]) -> Result<String> {
    let n = mesh.node_count();
    if kappa.len() != n || mu.len() != n {
        return Err(Error::Dimension(format!(
            "fields of length {} and {} on a mesh with {n} nodes",
            kappa.len(),
            mu.len()
        )));
    }
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nabsorption and diffusivity\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for p in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", num(p[0]), num(p[1]), num(p[2]));
    }
    let tets = mesh.tets();
    let _ = writeln!(s, "CELLS {} {}", tets.len(), 5 * tets.len());
    for t in tets {
        let _ = writeln!(s, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", tets.len());
    for _ in tets {
        let _ = writeln!(s, "{VTK_TETRA}");
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    for (name, field) in [("absorption", mu), ("diffusivity", kappa)] {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for &v in field {
            let _ = writeln!(s, "{}", num(v));
        }
    }
    Ok(s)
}

pub fn export_vtk(mesh: &Mesh, kappa: &[f64], mu: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_vtk(mesh, kappa, mu)?).map_err(|e| Error::io(path, e))
}

/// Contents of a file written by [`export_vtk`].
#[derive(Debug, Clone, PartialEq)]
pub struct VtkGrid {
    pub points: Vec<Point>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub absorption: Vec<f64>,
    pub diffusivity: Vec<f64>,
}

/// Reads the subset of legacy VTK that [`export_vtk`] writes.
pub fn parse_vtk(text: &str, path: &Path) -> Result<VtkGrid> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let lines: Vec<&str> = text.lines().collect();
    let mut grid = VtkGrid {
        points: Vec::new(),
        cells: Vec::new(),
        cell_types: Vec::new(),
        absorption: Vec::new(),
        diffusivity: Vec::new(),
    };
    let mut i = 0;
    let count = |i: usize, f: &[&str], at: usize| -> Result<usize> {
        f.get(at)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(i + 1, "missing count".into()))
    };
    let float = |i: usize, v: &str| -> Result<f64> { v.parse().map_err(|_| err(i + 1, format!("bad number {v:?}"))) };
    while i < lines.len() {
        let f: Vec<&str> = lines[i].split_whitespace().collect();
        match f.first().copied() {
            Some("POINTS") => {
                let n = count(i, &f, 1)?;
                for k in 0..n {
                    let l = i + 1 + k;
                    let c: Vec<&str> = lines.get(l).ok_or_else(|| err(l, "truncated POINTS".into()))?.split_whitespace().collect();
                    if c.len() != 3 {
                        return Err(err(l + 1, "expected 3 coordinates".into()));
                    }
                    grid.points.push([float(l, c[0])?, float(l, c[1])?, float(l, c[2])?]);
                }
                i += n;
            }
            Some("CELLS") => {
                let n = count(i, &f, 1)?;
                for k in 0..n {
                    let l = i + 1 + k;
                    let c: Result<Vec<usize>> = lines
                        .get(l)
                        .ok_or_else(|| err(l, "truncated CELLS".into()))?
                        .split_whitespace()
                        .map(|v| v.parse().map_err(|_| err(l + 1, format!("bad index {v:?}"))))
                        .collect();
                    let c = c?;
                    if c.is_empty() || c[0] + 1 != c.len() {
                        return Err(err(l + 1, "cell size does not match its index count".into()));
                    }
                    grid.cells.push(c[1..].to_vec());
                }
                i += n;
            }
            Some("CELL_TYPES") => {
                let n = count(i, &f, 1)?;
                for k in 0..n {
                    let l = i + 1 + k;
                    let v = lines.get(l).ok_or_else(|| err(l, "truncated CELL_TYPES".into()))?.trim();
                    grid.cell_types.push(v.parse().map_err(|_| err(l + 1, format!("bad cell type {v:?}")))?);
                }
                i += n;
            }
            Some("SCALARS") => {
                let name = f.get(1).copied().unwrap_or_default();
                let n = grid.points.len();
                let mut values = Vec::with_capacity(n);
                // Skip the LOOKUP_TABLE line.
                for k in 0..n {
                    let l = i + 2 + k;
                    values.push(float(l, lines.get(l).ok_or_else(|| err(l, "truncated SCALARS".into()))?.trim())?);
                }
                match name {
                    "absorption" => grid.absorption = values,
                    "diffusivity" => grid.diffusivity = values,
                    _ => {}
                }
                i += n + 1;
            }
            _ => {}
        }
        i += 1;
    }
    Ok(grid)
}

pub fn read_vtk(path: impl AsRef<Path>) -> Result<VtkGrid> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_vtk(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_primitive, Shape};

    fn unit_tet() -> Mesh {
        Mesh::from_parts(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![[0, 1, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn single_tet_file() {
        let text = format_vtk(&unit_tet(), &[0.1; 4], &[0.5; 4]).unwrap();
        assert!(text.contains("POINTS 4 double\n"));
        assert!(text.contains("CELLS 1 5\n"));
        assert!(text.contains("CELL_TYPES 1\n10\n"));
        let g = parse_vtk(&text, Path::new("t.vtk")).unwrap();
        assert_eq!(g.cell_types, vec![VTK_TETRA]);
        assert_eq!(g.points.len(), 4);
    }

    #[test]
    fn constant_fields_write_identical_values() {
        let text = format_vtk(&unit_tet(), &[0.05; 4], &[0.05; 4]).unwrap();
        let data = text.split("POINT_DATA 4\n").nth(1).unwrap();
        let nums: Vec<&str> = data.lines().filter(|l| !l.starts_with(char::is_alphabetic)).collect();
        assert_eq!(nums.len(), 8);
        assert!(nums.iter().all(|v| *v == nums[0]));
    }

    #[test]
    fn roundtrip_to_nine_digits() {
        let mesh = generate_primitive(Shape::Cylinder { radius: 1.0, height: 1.0 }, 0.4).unwrap();
        let k: Vec<f64> = (0..mesh.node_count()).map(|i| 0.05 + (i as f64).sin() / 7.0).collect();
        let m: Vec<f64> = (0..mesh.node_count()).map(|i| 0.5 * (1.0 + (i as f64 * 0.3).cos().powi(2))).collect();
        let g = parse_vtk(&format_vtk(&mesh, &k, &m).unwrap(), Path::new("c.vtk")).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 5e-9 * b.abs();
        assert!(g.absorption.iter().zip(&m).all(|(&a, &b)| close(a, b)));
        assert!(g.diffusivity.iter().zip(&k).all(|(&a, &b)| close(a, b)));
        let tets: Vec<Vec<usize>> = mesh.tets().iter().map(|t| t.to_vec()).collect();
        assert_eq!(g.cells, tets);
    }

    #[test]
    fn wrong_field_length_rejected() {
        assert!(matches!(format_vtk(&unit_tet(), &[0.1; 3], &[0.5; 4]), Err(Error::Dimension(_))));
    }
}
