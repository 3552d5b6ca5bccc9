//! Structured tetrahedral meshes of a cylinder and a ball.
//!
//! Both shapes are block-structured hexahedral grids (an O-grid around an
//! inner square or cube) whose outer layer sits exactly on the curved
//! surface. Every hexahedron is split into twelve tetrahedra around an
//! added center node; the diagonal of each quadrilateral face runs through
//! its lowest-numbered vertex, so neighbouring hexahedra always agree on
//! the shared face.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use super::Mesh;
use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// `D(0, radius) × (0, height)`, axis along z.
    Cylinder { radius: f64, height: f64 },
    /// Ball centered at the origin.
    Ball { radius: f64 },
}

impl Shape {
    pub fn volume(&self) -> f64 {
        match *self {
            Shape::Cylinder { radius, height } => PI * radius * radius * height,
            Shape::Ball { radius } => 4.0 / 3.0 * PI * radius.powi(3),
        }
    }
}

/// Generates a tetrahedral mesh of `shape` with edge lengths close to
/// `h_target`. The output is a deterministic function of the inputs.
pub fn generate_primitive(shape: Shape, h_target: f64) -> Result<Mesh> {
    let positive = |x: f64| x.is_finite() && x > 0.0;
    if !positive(h_target) {
        return Err(Error::Generation(format!("edge length must be positive, got {h_target}")));
    }
    let mut builder = match shape {
        Shape::Cylinder { radius, height } => {
            if !positive(radius) || !positive(height) {
                return Err(Error::Generation(format!(
                    "cylinder needs positive radius and height, got {radius} x {height}"
                )));
            }
            cylinder(radius, height, h_target)
        }
        Shape::Ball { radius } => {
            if !positive(radius) {
                return Err(Error::Generation(format!("ball needs a positive radius, got {radius}")));
            }
            ball(radius, h_target)
        }
    };
    builder.finish()
}

struct HexBuilder {
    vertices: Vec<Point>,
    hexes: Vec<[usize; 8]>,
}

impl HexBuilder {
    fn finish(&mut self) -> Result<Mesh> {
        let mut vertices = std::mem::take(&mut self.vertices);
        let mut tets = Vec::with_capacity(self.hexes.len() * 12);
        for hex in &self.hexes {
            let mut c = [0.0; 3];
            for &v in hex {
                for d in 0..3 {
                    c[d] += vertices[v][d] / 8.0;
                }
            }
            let center = vertices.len();
            vertices.push(c);
            split_hex(hex, center, &mut tets);
        }
        Mesh::orient_tets(&vertices, &mut tets).map_err(|e| Error::Generation(e.to_string()))?;
        Mesh::from_parts(vertices, tets)
    }
}

const HEX_FACES: [[usize; 4]; 6] = [
    [0, 1, 2, 3],
    [4, 5, 6, 7],
    [0, 1, 5, 4],
    [1, 2, 6, 5],
    [2, 3, 7, 6],
    [3, 0, 4, 7],
];

fn split_hex(hex: &[usize; 8], center: usize, tets: &mut Vec<[usize; 4]>) {
    for face in HEX_FACES {
        let q = face.map(|i| hex[i]);
        let lowest = (0..4).min_by_key(|&i| q[i]).unwrap();
        if lowest % 2 == 0 {
            tets.push([q[0], q[1], q[2], center]);
            tets.push([q[0], q[2], q[3], center]);
        } else {
            tets.push([q[0], q[1], q[3], center]);
            tets.push([q[1], q[2], q[3], center]);
        }
    }
}

fn divisions(length: f64, h: f64, min: usize) -> usize {
    let n = (length / h).ceil();
    if n.is_finite() && n >= min as f64 {
        n.min(1e6) as usize
    } else {
        min
    }
}

fn cylinder(radius: f64, height: f64, h: f64) -> HexBuilder {
    let n = divisions(FRAC_PI_2 * radius, h, 2);
    let m = divisions(0.4 * radius, h, 1);
    let nz = divisions(height, h, 1);
    let s = 0.55 * radius;

    // Planar O-grid: inner (n+1)^2 lattice, then m rings of 4n nodes.
    let lattice = |i: usize, j: usize| i + (n + 1) * j;
    let perimeter = |p: usize| -> usize {
        let p = p % (4 * n);
        match p / n {
            0 => lattice(p, 0),
            1 => lattice(n, p - n),
            2 => lattice(n - (p - 2 * n), n),
            _ => lattice(0, n - (p - 3 * n)),
        }
    };
    let coord = |i: usize| -s + 2.0 * s * i as f64 / n as f64;
    let mut plane: Vec<[f64; 2]> = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            plane.push([coord(i), coord(j)]);
        }
    }
    let ring = |t: usize, p: usize| -> usize {
        if t == 0 {
            perimeter(p)
        } else {
            (n + 1) * (n + 1) + (t - 1) * 4 * n + p % (4 * n)
        }
    };
    for t in 1..=m {
        for p in 0..4 * n {
            let inner = plane[perimeter(p)];
            let theta = -3.0 * FRAC_PI_4 + p as f64 * (2.0 * PI / (4 * n) as f64);
            let outer = [radius * theta.cos(), radius * theta.sin()];
            let pt = if t == m {
                outer
            } else {
                let f = t as f64 / m as f64;
                [
                    inner[0] + f * (outer[0] - inner[0]),
                    inner[1] + f * (outer[1] - inner[1]),
                ]
            };
            plane.push(pt);
        }
    }
    let mut quads = Vec::new();
    for j in 0..n {
        for i in 0..n {
            quads.push([lattice(i, j), lattice(i + 1, j), lattice(i + 1, j + 1), lattice(i, j + 1)]);
        }
    }
    for t in 1..=m {
        for p in 0..4 * n {
            quads.push([ring(t - 1, p), ring(t - 1, p + 1), ring(t, p + 1), ring(t, p)]);
        }
    }

    let np = plane.len();
    let mut vertices = Vec::with_capacity(np * (nz + 1));
    for l in 0..=nz {
        let z = if l == nz { height } else { height * l as f64 / nz as f64 };
        vertices.extend(plane.iter().map(|q| [q[0], q[1], z]));
    }
    let mut hexes = Vec::with_capacity(quads.len() * nz);
    for l in 0..nz {
        for q in &quads {
            let b = q.map(|v| v + l * np);
            let t = q.map(|v| v + (l + 1) * np);
            hexes.push([b[0], b[1], b[2], b[3], t[0], t[1], t[2], t[3]]);
        }
    }
    HexBuilder { vertices, hexes }
}

fn ball(radius: f64, h: f64) -> HexBuilder {
    let n = divisions(FRAC_PI_2 * radius, h, 2);
    let s = 0.4 * radius;
    let m = divisions(0.75 * (radius - s), h, 1);

    let lattice = |i: usize, j: usize, k: usize| i + (n + 1) * (j + (n + 1) * k);
    let unit = |i: usize| (2 * i as i64 - n as i64) as f64 / n as f64;
    let mut vertices = Vec::new();
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([s * unit(i), s * unit(j), s * unit(k)]);
            }
        }
    }
    let on_surface = |i: usize| i == 0 || i == n;
    let mut surface_index = vec![usize::MAX; (n + 1).pow(3)];
    let mut surface: Vec<(Point, Point)> = Vec::new();
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                if !(on_surface(i) || on_surface(j) || on_surface(k)) {
                    continue;
                }
                surface_index[lattice(i, j, k)] = surface.len();
                let c = [unit(i), unit(j), unit(k)];
                // Equiangular projection of the cube face onto the sphere.
                let d = c.map(|x| if x.abs() == 1.0 { x } else { (FRAC_PI_4 * x).tan() });
                let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                let outer = d.map(|x| radius * x / len);
                surface.push((vertices[lattice(i, j, k)], outer));
            }
        }
    }
    let ns = surface.len();
    let base = vertices.len();
    for t in 1..=m {
        let f = t as f64 / m as f64;
        for (inner, outer) in &surface {
            vertices.push(if t == m {
                *outer
            } else {
                [0, 1, 2].map(|d| inner[d] + f * (outer[d] - inner[d]))
            });
        }
    }
    let shell = |t: usize, v: usize| -> usize {
        if t == 0 {
            v
        } else {
            base + (t - 1) * ns + surface_index[v]
        }
    };

    let mut hexes = Vec::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                hexes.push([
                    lattice(i, j, k),
                    lattice(i + 1, j, k),
                    lattice(i + 1, j + 1, k),
                    lattice(i, j + 1, k),
                    lattice(i, j, k + 1),
                    lattice(i + 1, j, k + 1),
                    lattice(i + 1, j + 1, k + 1),
                    lattice(i, j + 1, k + 1),
                ]);
            }
        }
    }
    let mut faces = Vec::with_capacity(6 * n * n);
    for a in 0..n {
        for b in 0..n {
            for side in [0, n] {
                faces.push([
                    lattice(side, a, b),
                    lattice(side, a + 1, b),
                    lattice(side, a + 1, b + 1),
                    lattice(side, a, b + 1),
                ]);
                faces.push([
                    lattice(a, side, b),
                    lattice(a + 1, side, b),
                    lattice(a + 1, side, b + 1),
                    lattice(a, side, b + 1),
                ]);
                faces.push([
                    lattice(a, b, side),
                    lattice(a + 1, b, side),
                    lattice(a + 1, b + 1, side),
                    lattice(a, b + 1, side),
                ]);
            }
        }
    }
    for t in 1..=m {
        for q in &faces {
            let lo = q.map(|v| shell(t - 1, v));
            let hi = q.map(|v| shell(t, v));
            hexes.push([lo[0], lo[1], lo[2], lo[3], hi[0], hi[1], hi[2], hi[3]]);
        }
    }
    HexBuilder { vertices, hexes }
}
