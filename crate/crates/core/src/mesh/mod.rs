//! Tetrahedral meshes, boundary patches and the free-node parameter map.

mod generate;
mod msh;
mod patches;
mod validate;

use std::collections::HashMap;

pub use generate::{generate_primitive, Shape};
pub use msh::{load_msh, read_msh, write_msh, MshData};
pub use patches::{define_patches, FreeNodeMap, Patch, PatchLayout, PatchSet};
pub use validate::{validate, MeshReport};

use crate::error::{Error, Result};
use crate::geometry::{self, Point, TetGeometry};

/// Linear tetrahedral mesh with its outward-oriented boundary facets.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    tets: Vec<[usize; 4]>,
    boundary_facets: Vec<[usize; 3]>,
}

impl Mesh {
    /// Builds a mesh from raw arrays. Vertex indices are checked and the
    /// boundary is derived as the set of faces owned by exactly one tet,
    /// each oriented away from its tet's opposite vertex. Tet orientation
    /// is left untouched; see [`Mesh::orient_tets`].
    pub fn from_parts(vertices: Vec<Point>, tets: Vec<[usize; 4]>) -> Result<Self> {
        if tets.is_empty() {
            return Err(Error::InvalidMesh("mesh has no tetrahedra".into()));
        }
        for (t, tet) in tets.iter().enumerate() {
            for &v in tet {
                if v >= vertices.len() {
                    return Err(Error::InvalidMesh(format!(
                        "tet {t} references vertex {v}, but only {} vertices exist",
                        vertices.len()
                    )));
                }
            }
            let mut s = *tet;
            s.sort_unstable();
            if s.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidMesh(format!("tet {t} repeats a vertex")));
            }
        }
        if vertices.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        let boundary_facets = boundary_of(&vertices, &tets)?;
        Ok(Mesh {
            vertices,
            tets,
            boundary_facets,
        })
    }

    /// Swaps two vertices of every tet with negative signed volume.
    /// Fails if any tet is degenerate relative to the mesh scale.
    pub fn orient_tets(vertices: &[Point], tets: &mut [[usize; 4]]) -> Result<()> {
        let scale = bounding_diameter(vertices).max(f64::MIN_POSITIVE);
        for (t, tet) in tets.iter_mut().enumerate() {
            let p = tet.map(|v| vertices[v]);
            let vol = geometry::signed_volume(&p);
            if !(vol.abs() > 1e-14 * scale.powi(3)) {
                return Err(Error::InvalidMesh(format!("tet {t} is degenerate (volume {vol:e})")));
            }
            if vol < 0.0 {
                tet.swap(2, 3);
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn boundary_facets(&self) -> &[[usize; 3]] {
        &self.boundary_facets
    }

    pub fn node_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn tet_points(&self, t: usize) -> [Point; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    pub fn facet_points(&self, f: usize) -> [Point; 3] {
        self.boundary_facets[f].map(|v| self.vertices[v])
    }

    pub fn tet_geometry(&self, t: usize) -> TetGeometry {
        TetGeometry::new(&self.tet_points(t))
    }

    pub fn signed_volumes(&self) -> Vec<f64> {
        (0..self.tets.len())
            .map(|t| geometry::signed_volume(&self.tet_points(t)))
            .collect()
    }

    pub fn total_volume(&self) -> f64 {
        self.signed_volumes().iter().sum()
    }

    pub fn boundary_area(&self) -> f64 {
        (0..self.boundary_facets.len())
            .map(|f| geometry::triangle_area_normal(&self.facet_points(f)).0)
            .sum()
    }

    /// Lumped nodal volumes: each tet contributes a quarter of its volume
    /// to each of its vertices.
    pub fn nodal_volumes(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.vertices.len()];
        for (t, tet) in self.tets.iter().enumerate() {
            let v = geometry::signed_volume(&self.tet_points(t)).abs() / 4.0;
            for &n in tet {
                w[n] += v;
            }
        }
        w
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut on = vec![false; self.vertices.len()];
        for f in &self.boundary_facets {
            for &v in f {
                on[v] = true;
            }
        }
        (0..on.len()).filter(|&i| on[i]).collect()
    }

    /// Characteristic edge length: cube root of the mean tet volume times
    /// the edge/volume ratio of a regular tetrahedron.
    pub fn mean_edge_length(&self) -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for tet in &self.tets {
            for a in 0..4 {
                for b in (a + 1)..4 {
                    total += geometry::distance(self.vertices[tet[a]], self.vertices[tet[b]]);
                    count += 1;
                }
            }
        }
        total / count as f64
    }

    /// Content hash of the vertex and tet arrays, as 16 hex digits.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for p in &self.vertices {
            for x in p {
                h.update(x.to_le_bytes());
            }
        }
        for t in &self.tets {
            for v in t {
                h.update((*v as u64).to_le_bytes());
            }
        }
        let d = h.finalize();
        d[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn bounding_diameter(vertices: &[Point]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in vertices {
        for d in 0..3 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    geometry::norm(geometry::sub(hi, lo))
}

const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

fn boundary_of(vertices: &[Point], tets: &[[usize; 4]]) -> Result<Vec<[usize; 3]>> {
    let mut count: HashMap<[usize; 3], u32> = HashMap::with_capacity(tets.len() * 2);
    for tet in tets {
        for face in TET_FACES {
            let mut key = face.map(|i| tet[i]);
            key.sort_unstable();
            *count.entry(key).or_insert(0) += 1;
        }
    }
    if let Some((k, c)) = count.iter().find(|(_, &c)| c > 2) {
        return Err(Error::InvalidMesh(format!(
            "face {k:?} is shared by {c} tetrahedra"
        )));
    }
    let mut facets = Vec::new();
    for tet in tets {
        for (opp, face) in TET_FACES.iter().enumerate() {
            let mut f = face.map(|i| tet[i]);
            let mut key = f;
            key.sort_unstable();
            if count[&key] != 1 {
                continue;
            }
            let p = f.map(|v| vertices[v]);
            let n = geometry::cross(geometry::sub(p[1], p[0]), geometry::sub(p[2], p[0]));
            let to_opp = geometry::sub(vertices[tet[opp]], p[0]);
            if geometry::dot(n, to_opp) > 0.0 {
                f.swap(1, 2);
            }
            facets.push(f);
        }
    }
    Ok(facets)
}

#[cfg(test)]
pub(crate) fn unit_tet() -> Mesh {
    Mesh::from_parts(
        vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ],
        vec![[0, 1, 2, 3]],
    )
    .unwrap()
}
