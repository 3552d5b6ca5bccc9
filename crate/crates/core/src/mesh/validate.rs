//! Report-only mesh and patch diagnostics.

use std::fmt;

use super::{Mesh, PatchSet};
use crate::geometry;

#[derive(Debug, Clone, PartialEq)]
pub struct MeshReport {
    pub node_count: usize,
    pub tet_count: usize,
    pub boundary_facet_count: usize,
    pub min_volume: f64,
    pub max_volume: f64,
    pub total_volume: f64,
    pub negative_tets: usize,
    /// Facets whose normal points into their owning tet.
    pub inward_facets: usize,
    /// `|Σ n_f A_f| / Σ A_f`; zero for a closed surface.
    pub closure_error: f64,
    /// `None` when no patch set was supplied.
    pub patches_disjoint: Option<bool>,
    pub dirichlet_count: Option<usize>,
}

impl MeshReport {
    pub fn is_valid(&self) -> bool {
        self.negative_tets == 0
            && self.inward_facets == 0
            && self.closure_error < 1e-10
            && self.patches_disjoint.unwrap_or(true)
            && self.dirichlet_count != Some(0)
    }
}

impl fmt::Display for MeshReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nodes {}", self.node_count)?;
        writeln!(f, "tets {}", self.tet_count)?;
        writeln!(f, "boundary_facets {}", self.boundary_facet_count)?;
        writeln!(f, "min_volume {:e}", self.min_volume)?;
        writeln!(f, "max_volume {:e}", self.max_volume)?;
        writeln!(f, "total_volume {:e}", self.total_volume)?;
        writeln!(f, "negative_tets {}", self.negative_tets)?;
        writeln!(f, "inward_facets {}", self.inward_facets)?;
        writeln!(f, "closure_error {:e}", self.closure_error)?;
        if let Some(d) = self.patches_disjoint {
            writeln!(f, "patches_disjoint {d}")?;
        }
        if let Some(s) = self.dirichlet_count {
            writeln!(f, "dirichlet_nodes {s}")?;
        }
        Ok(())
    }
}

pub fn validate(mesh: &Mesh, patches: Option<&PatchSet>) -> MeshReport {
    let vols = mesh.signed_volumes();
    let min_volume = vols.iter().copied().fold(f64::INFINITY, f64::min);
    let max_volume = vols.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let negative_tets = vols.iter().filter(|&&v| v <= 0.0).count();

    // Boundary facets orient away from the opposite vertex of the tet that
    // owns them, so the check compares against each owner's centroid.
    let mut owner = std::collections::HashMap::new();
    for (t, tet) in mesh.tets().iter().enumerate() {
        for face in super::TET_FACES {
            let mut key = face.map(|i| tet[i]);
            key.sort_unstable();
            owner.entry(key).or_insert(t);
        }
    }
    let mut inward_facets = 0;
    let mut sum = [0.0; 3];
    let mut area = 0.0;
    for (f, facet) in mesh.boundary_facets().iter().enumerate() {
        let p = mesh.facet_points(f);
        let (a, n) = geometry::triangle_area_normal(&p);
        sum = geometry::add(sum, geometry::scale(n, a));
        area += a;
        let mut key = *facet;
        key.sort_unstable();
        if let Some(&t) = owner.get(&key) {
            let c = geometry::centroid(&mesh.tet_points(t));
            if geometry::dot(n, geometry::sub(geometry::centroid(&p), c)) <= 0.0 {
                inward_facets += 1;
            }
        }
    }
    let closure_error = if area > 0.0 { geometry::norm(sum) / area } else { 0.0 };

    let (patches_disjoint, dirichlet_count) = match patches {
        Some(ps) => (Some(patches_disjoint(ps)), Some(ps.dirichlet_nodes().len())),
        None => (None, None),
    };
    MeshReport {
        node_count: mesh.node_count(),
        tet_count: mesh.tets().len(),
        boundary_facet_count: mesh.boundary_facets().len(),
        min_volume,
        max_volume,
        total_volume: vols.iter().sum(),
        negative_tets,
        inward_facets,
        closure_error,
        patches_disjoint,
        dirichlet_count,
    }
}

/// Circular patches are disjoint when their centers are at least two radii
/// apart; explicit ones when no facet is shared. Both reduce to the
/// requirement that no boundary point carries two patch weights, checked
/// here through the patch centers and areas.
fn patches_disjoint(ps: &PatchSet) -> bool {
    let all: Vec<_> = ps.sources.iter().chain(&ps.sensors).collect();
    for a in 0..all.len() {
        for b in (a + 1)..all.len() {
            let ra = (all[a].area / std::f64::consts::PI).sqrt();
            let rb = (all[b].area / std::f64::consts::PI).sqrt();
            let d = geometry::distance(all[a].center, all[b].center);
            let shared = all[a].facets.iter().any(|f| all[b].facets.binary_search(f).is_ok());
            // Facets may be shared by physically separate disks; only flag
            // genuinely overlapping footprints.
            if shared && d < 0.999 * (ra + rb) {
                return false;
            }
        }
    }
    true
}
