//! Source and sensor patches on the boundary, and the Dirichlet node set.
//!
//! A circular patch is the part of the boundary surface within Euclidean
//! distance `patch_radius` of its center. Facets cut by the patch rim are
//! integrated on a uniform sub-triangulation, so the patch integrals
//! `∫ Ψ φ_n dS` describe the same physical disk on every mesh.

use std::f64::consts::PI;

use super::Mesh;
use crate::error::{Error, Result};
use crate::geometry::{self, Point};

/// One boundary patch with its P1 load integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    /// Nominal center on the boundary surface.
    pub center: Point,
    /// Boundary facets (indices into [`Mesh::boundary_facets`]) that
    /// intersect the patch.
    pub facets: Vec<usize>,
    /// `(node, ∫ Ψ φ_node dS)`, sorted by node.
    pub node_integrals: Vec<(usize, f64)>,
    /// `∫ Ψ dS`.
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PatchLayout {
    /// Rings around the lateral surface of a z-axis cylinder centered at
    /// the origin. Sources and sensors alternate within each ring and the
    /// pattern shifts by one slot between consecutive rings.
    CylinderRings {
        sources: usize,
        sensors: usize,
        patch_radius: f64,
        ring_heights: Vec<f64>,
    },
    /// Patches spread over the surface of a ball centered at the origin.
    /// For 32 sources and 60 sensors the sensors sit at the vertices of a
    /// truncated icosahedron and the sources at its face centers.
    BallEven {
        sources: usize,
        sensors: usize,
        patch_radius: f64,
    },
    /// Explicit lists of boundary facet indices, fully weighted.
    Explicit {
        sources: Vec<Vec<usize>>,
        sensors: Vec<Vec<usize>>,
    },
}

impl PatchLayout {
    pub fn cylinder_default() -> Self {
        PatchLayout::CylinderRings {
            sources: 24,
            sensors: 24,
            patch_radius: 0.1,
            ring_heights: vec![0.25, 0.5, 0.75],
        }
    }

    pub fn ball_default() -> Self {
        PatchLayout::BallEven {
            sources: 32,
            sensors: 60,
            patch_radius: 1.0,
        }
    }

    pub fn counts(&self) -> (usize, usize) {
        match self {
            PatchLayout::CylinderRings { sources, sensors, .. }
            | PatchLayout::BallEven { sources, sensors, .. } => (*sources, *sensors),
            PatchLayout::Explicit { sources, sensors } => (sources.len(), sensors.len()),
        }
    }

    /// Canonical text form; mesh independent for circular layouts.
    pub fn descriptor(&self) -> String {
        match self {
            PatchLayout::CylinderRings {
                sources,
                sensors,
                patch_radius,
                ring_heights,
            } => format!(
                "cylinder_rings K={sources} J={sensors} r={patch_radius:e} heights={}",
                ring_heights.iter().map(|h| format!("{h:e}")).collect::<Vec<_>>().join(",")
            ),
            PatchLayout::BallEven {
                sources,
                sensors,
                patch_radius,
            } => format!("ball_even K={sources} J={sensors} r={patch_radius:e}"),
            PatchLayout::Explicit { sources, sensors } => format!("explicit {sources:?} {sensors:?}"),
        }
    }

    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let d = Sha256::digest(self.descriptor().as_bytes());
        d[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Sources, sensors and the Dirichlet node set `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub sources: Vec<Patch>,
    pub sensors: Vec<Patch>,
    dirichlet: Vec<usize>,
    layout_hash: String,
}

impl PatchSet {
    pub fn source_count(&self) -> usize {
        self.sources.len()
    }

    pub fn sensor_count(&self) -> usize {
        self.sensors.len()
    }

    /// Sorted node indices of `S`.
    pub fn dirichlet_nodes(&self) -> &[usize] {
        &self.dirichlet
    }

    pub fn layout_hash(&self) -> &str {
        &self.layout_hash
    }

    /// Replaces `S`. Fails if `nodes` is empty or out of range.
    pub fn with_dirichlet(mut self, mesh: &Mesh, mut nodes: Vec<usize>) -> Result<Self> {
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.is_empty() {
            return Err(Error::Layout("the Dirichlet node set must be nonempty".into()));
        }
        if nodes.last().is_some_and(|&n| n >= mesh.node_count()) {
            return Err(Error::Layout("Dirichlet node index out of range".into()));
        }
        self.dirichlet = nodes;
        Ok(self)
    }

    pub fn free_nodes(&self, mesh: &Mesh) -> FreeNodeMap {
        FreeNodeMap::new(mesh.node_count(), &self.dirichlet)
    }
}

/// Bijection between the mesh nodes outside `S` and parameter indices
/// `0..N`, ordered by node index.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeNodeMap {
    free: Vec<usize>,
    index_of: Vec<usize>,
}

impl FreeNodeMap {
    pub fn new(node_count: usize, dirichlet: &[usize]) -> Self {
        let mut fixed = vec![false; node_count];
        for &n in dirichlet {
            fixed[n] = true;
        }
        let mut index_of = vec![usize::MAX; node_count];
        let mut free = Vec::with_capacity(node_count);
        for n in 0..node_count {
            if !fixed[n] {
                index_of[n] = free.len();
                free.push(n);
            }
        }
        FreeNodeMap { free, index_of }
    }

    pub fn len(&self) -> usize {
        self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.free.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.index_of.len()
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free
    }

    pub fn param_index(&self, node: usize) -> Option<usize> {
        let i = self.index_of[node];
        (i != usize::MAX).then_some(i)
    }

    /// Nodal vector with `values` on free nodes and zero on `S`.
    pub fn scatter(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.free.len());
        let mut out = vec![0.0; self.index_of.len()];
        for (&n, &v) in self.free.iter().zip(values) {
            out[n] = v;
        }
        out
    }

    pub fn gather(&self, nodal: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&n| nodal[n]).collect()
    }
}

/// Builds the patches of `layout` on `mesh`. `S` defaults to every node
/// touched by a patch.
pub fn define_patches(mesh: &Mesh, layout: &PatchLayout) -> Result<PatchSet> {
    let (sources, sensors) = match layout {
        PatchLayout::CylinderRings {
            sources,
            sensors,
            patch_radius,
            ring_heights,
        } => {
            let (sc, mc) = cylinder_centers(mesh, *sources, *sensors, ring_heights)?;
            circular_patches(mesh, &sc, &mc, *patch_radius)?
        }
        PatchLayout::BallEven {
            sources,
            sensors,
            patch_radius,
        } => {
            let radius = mesh
                .boundary_nodes()
                .iter()
                .map(|&n| geometry::norm(mesh.vertices()[n]))
                .fold(0.0, f64::max);
            let (sc, mc) = sphere_centers(*sources, *sensors, radius)?;
            circular_patches(mesh, &sc, &mc, *patch_radius)?
        }
        PatchLayout::Explicit { sources, sensors } => {
            let nf = mesh.boundary_facets().len();
            let mut owner = vec![usize::MAX; nf];
            let all = sources.iter().chain(sensors.iter());
            for (p, list) in all.enumerate() {
                for &f in list {
                    if f >= nf {
                        return Err(Error::Layout(format!("facet {f} is not a boundary facet")));
                    }
                    if owner[f] != usize::MAX && owner[f] != p {
                        return Err(Error::Layout(format!(
                            "facet {f} belongs to patches {} and {p}",
                            owner[f]
                        )));
                    }
                    owner[f] = p;
                }
            }
            let build = |lists: &Vec<Vec<usize>>| -> Result<Vec<Patch>> {
                lists.iter().map(|l| facet_patch(mesh, l)).collect()
            };
            (build(sources)?, build(sensors)?)
        }
    };
    if sources.is_empty() || sensors.is_empty() {
        return Err(Error::Layout("need at least one source and one sensor".into()));
    }
    let mut dirichlet: Vec<usize> = sources
        .iter()
        .chain(sensors.iter())
        .flat_map(|p| p.node_integrals.iter().map(|&(n, _)| n))
        .collect();
    dirichlet.sort_unstable();
    dirichlet.dedup();
    Ok(PatchSet {
        sources,
        sensors,
        dirichlet,
        layout_hash: layout.hash(),
    })
}

fn facet_patch(mesh: &Mesh, facets: &[usize]) -> Result<Patch> {
    if facets.is_empty() {
        return Err(Error::Resolution("explicit patch has no facets".into()));
    }
    let mut acc = NodeAccumulator::default();
    let mut c = [0.0; 3];
    for &f in facets {
        let p = mesh.facet_points(f);
        let (a, _) = geometry::triangle_area_normal(&p);
        for &n in &mesh.boundary_facets()[f] {
            acc.add(n, a / 3.0);
        }
        c = geometry::add(c, geometry::scale(geometry::centroid(&p), a));
    }
    let (node_integrals, area) = acc.finish();
    let mut facets = facets.to_vec();
    facets.sort_unstable();
    facets.dedup();
    Ok(Patch {
        center: geometry::scale(c, 1.0 / area),
        facets,
        node_integrals,
        area,
    })
}

#[derive(Default)]
struct NodeAccumulator {
    entries: Vec<(usize, f64)>,
}

impl NodeAccumulator {
    fn add(&mut self, node: usize, value: f64) {
        self.entries.push((node, value));
    }

    fn finish(mut self) -> (Vec<(usize, f64)>, f64) {
        // Stable sort keeps the accumulation order deterministic.
        self.entries.sort_by_key(|e| e.0);
        let mut out: Vec<(usize, f64)> = Vec::new();
        for (n, v) in self.entries {
            match out.last_mut() {
                Some(last) if last.0 == n => last.1 += v,
                _ => out.push((n, v)),
            }
        }
        let area = out.iter().map(|e| e.1).sum();
        (out, area)
    }
}

fn circular_patches(
    mesh: &Mesh,
    source_centers: &[Point],
    sensor_centers: &[Point],
    radius: f64,
) -> Result<(Vec<Patch>, Vec<Patch>)> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Layout(format!("patch radius must be positive, got {radius}")));
    }
    let all: Vec<Point> = source_centers.iter().chain(sensor_centers).copied().collect();
    for a in 0..all.len() {
        for b in (a + 1)..all.len() {
            if geometry::distance(all[a], all[b]) < 2.0 * radius {
                return Err(Error::Layout(format!(
                    "patches {a} and {b} overlap at radius {radius}"
                )));
            }
        }
    }
    // Facet bounding spheres for a cheap rejection test.
    let bounds: Vec<(Point, f64)> = (0..mesh.boundary_facets().len())
        .map(|f| {
            let p = mesh.facet_points(f);
            let c = geometry::centroid(&p);
            let r = p.iter().map(|&q| geometry::distance(q, c)).fold(0.0, f64::max);
            (c, r)
        })
        .collect();
    let build = |center: Point| -> Result<Patch> {
        let mut acc = NodeAccumulator::default();
        let mut facets = Vec::new();
        for (f, &(c, r)) in bounds.iter().enumerate() {
            if geometry::distance(c, center) > radius + r {
                continue;
            }
            let p = mesh.facet_points(f);
            let w = clipped_integrals(&p, center, radius, r);
            if w.iter().all(|&x| x == 0.0) {
                continue;
            }
            facets.push(f);
            for (k, &n) in mesh.boundary_facets()[f].iter().enumerate() {
                acc.add(n, w[k]);
            }
        }
        let (node_integrals, area) = acc.finish();
        if facets.is_empty() || area <= 0.0 {
            return Err(Error::Resolution(format!(
                "patch at {center:?} with radius {radius} contains no boundary facet"
            )));
        }
        Ok(Patch {
            center,
            facets,
            node_integrals,
            area,
        })
    };
    let sources = source_centers.iter().map(|&c| build(c)).collect::<Result<Vec<_>>>()?;
    let sensors = sensor_centers.iter().map(|&c| build(c)).collect::<Result<Vec<_>>>()?;
    Ok((sources, sensors))
}

/// `∫_{T ∩ B(center, radius)} λ_k dS` for the three vertices of triangle
/// `p`, by midpoint quadrature on a uniform `q × q` sub-triangulation.
fn clipped_integrals(p: &[Point; 3], center: Point, radius: f64, facet_radius: f64) -> [f64; 3] {
    let (area, _) = geometry::triangle_area_normal(p);
    if p.iter().all(|&q| geometry::distance(q, center) <= radius) {
        return [area / 3.0; 3];
    }
    let q = ((32.0 * facet_radius / radius).ceil() as usize).clamp(16, 512);
    let qf = q as f64;
    let sub = area / (qf * qf);
    let mut out = [0.0; 3];
    let mut visit = |l1: f64, l2: f64| {
        let l0 = 1.0 - l1 - l2;
        let x = [0, 1, 2].map(|d| l0 * p[0][d] + l1 * p[1][d] + l2 * p[2][d]);
        if geometry::distance(x, center) <= radius {
            out[0] += sub * l0;
            out[1] += sub * l1;
            out[2] += sub * l2;
        }
    };
    for i in 0..q {
        for j in 0..(q - i) {
            let (a, b) = (i as f64, j as f64);
            visit((a + 1.0 / 3.0) / qf, (b + 1.0 / 3.0) / qf);
            if i + j + 1 < q {
                visit((a + 2.0 / 3.0) / qf, (b + 2.0 / 3.0) / qf);
            }
        }
    }
    out
}

fn cylinder_centers(
    mesh: &Mesh,
    sources: usize,
    sensors: usize,
    heights: &[f64],
) -> Result<(Vec<Point>, Vec<Point>)> {
    let rings = heights.len();
    if rings == 0 {
        return Err(Error::Layout("at least one ring height is required".into()));
    }
    if sources % rings != 0 || sensors % rings != 0 {
        return Err(Error::Layout(format!(
            "{sources} sources and {sensors} sensors cannot be split evenly over {rings} rings"
        )));
    }
    let radius = mesh
        .boundary_nodes()
        .iter()
        .map(|&n| {
            let v = mesh.vertices()[n];
            v[0].hypot(v[1])
        })
        .fold(0.0, f64::max);
    let slots = (sources + sensors) / rings;
    let per_ring = sources / rings;
    let mut sc = Vec::with_capacity(sources);
    let mut mc = Vec::with_capacity(sensors);
    for (r, &z) in heights.iter().enumerate() {
        for i in 0..slots {
            let theta = 2.0 * PI * i as f64 / slots as f64;
            let c = [radius * theta.cos(), radius * theta.sin(), z];
            if is_source_slot((i + r) % slots, per_ring, slots) {
                sc.push(c);
            } else {
                mc.push(c);
            }
        }
    }
    Ok((sc, mc))
}

/// Spreads `k` marked slots evenly among `n`.
fn is_source_slot(i: usize, k: usize, n: usize) -> bool {
    (i + 1) * k / n > i * k / n
}

fn sphere_centers(sources: usize, sensors: usize, radius: f64) -> Result<(Vec<Point>, Vec<Point>)> {
    if sources == 0 || sensors == 0 {
        return Err(Error::Layout("need at least one source and one sensor".into()));
    }
    let unit: (Vec<Point>, Vec<Point>) = if (sources, sensors) == (32, 60) {
        truncated_icosahedron()
    } else {
        let n = sources + sensors;
        let golden = PI * (3.0 - 5f64.sqrt());
        let mut sc = Vec::new();
        let mut mc = Vec::new();
        for i in 0..n {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            let p = [r * t.cos(), r * t.sin(), z];
            if is_source_slot(i, sources, n) {
                sc.push(p);
            } else {
                mc.push(p);
            }
        }
        (sc, mc)
    };
    let lift = |v: Vec<Point>| v.into_iter().map(|p| geometry::scale(p, radius)).collect();
    Ok((lift(unit.0), lift(unit.1)))
}

/// Unit face-center directions (12 pentagons, then 20 hexagons) and unit
/// vertex directions (60) of a truncated icosahedron.
fn truncated_icosahedron() -> (Vec<Point>, Vec<Point>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let even_perms = |v: Point| [v, [v[1], v[2], v[0]], [v[2], v[0], v[1]]];
    let signed = |v: Point| -> Vec<Point> {
        let mut out = Vec::new();
        for sx in [1.0, -1.0] {
            for sy in [1.0, -1.0] {
                for sz in [1.0, -1.0] {
                    let p = [v[0] * sx, v[1] * sy, v[2] * sz];
                    if !out.contains(&p) {
                        out.push(p);
                    }
                }
            }
        }
        out
    };
    let family = |v: Point| -> Vec<Point> {
        signed(v).into_iter().flat_map(even_perms).collect()
    };
    let normalize = |p: Point| geometry::scale(p, 1.0 / geometry::norm(p));

    let icosa: Vec<Point> = family([0.0, 1.0, phi]);
    let mut vertices: Vec<Point> = Vec::new();
    for base in [[0.0, 1.0, 3.0 * phi], [1.0, 2.0 + phi, 2.0 * phi], [phi, 2.0, phi.powi(3)]] {
        vertices.extend(family(base));
    }
    // Icosahedron faces: triples of mutually adjacent vertices (edge 2).
    let adjacent = |a: Point, b: Point| (geometry::distance(a, b) - 2.0).abs() < 1e-9;
    let mut hexagons = Vec::new();
    for a in 0..icosa.len() {
        for b in (a + 1)..icosa.len() {
            for c in (b + 1)..icosa.len() {
                if adjacent(icosa[a], icosa[b]) && adjacent(icosa[b], icosa[c]) && adjacent(icosa[a], icosa[c]) {
                    hexagons.push(normalize(geometry::add(geometry::add(icosa[a], icosa[b]), icosa[c])));
                }
            }
        }
    }
    let mut faces: Vec<Point> = icosa.into_iter().map(normalize).collect();
    faces.extend(hexagons);
    (faces, vertices.into_iter().map(normalize).collect())
}
