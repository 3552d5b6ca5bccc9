//! Gmsh MSH 2.2 ASCII reader and writer.
//!
//! Only linear tetrahedra (element type 4) carry volume. Triangles (type
//! 2) are kept as tagged facet groups, points and lines are skipped, and
//! any other element type is rejected.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use super::Mesh;
use crate::error::{Error, Result};

/// Parsed MSH contents: the mesh plus triangles grouped by physical tag.
#[derive(Debug, Clone)]
pub struct MshData {
    pub mesh: Mesh,
    pub tagged_triangles: BTreeMap<i64, Vec<[usize; 3]>>,
}

pub fn load_msh(path: impl AsRef<Path>) -> Result<Mesh> {
    Ok(read_msh(path)?.mesh)
}

pub fn read_msh(path: impl AsRef<Path>) -> Result<MshData> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_msh(&text, path)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    path: &'a Path,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<&'a str> {
        loop {
            match self.inner.next() {
                Some((i, l)) => {
                    self.line = i + 1;
                    let l = l.trim();
                    if !l.is_empty() {
                        return Ok(l);
                    }
                }
                None => return Err(self.err("unexpected end of file")),
            }
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        let l = self.next_line()?;
        if l != token {
            return Err(self.err(format!("expected `{token}`, found `{l}`")));
        }
        Ok(())
    }

    fn parse<T: std::str::FromStr>(&self, s: Option<&str>, what: &str) -> Result<T> {
        s.and_then(|s| s.parse().ok())
            .ok_or_else(|| self.err(format!("invalid or missing {what}")))
    }
}

fn parse_msh(text: &str, path: &Path) -> Result<MshData> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        path,
        line: 0,
    };
    lines.expect("$MeshFormat")?;
    let header = lines.next_line()?;
    let mut it = header.split_whitespace();
    let version: String = lines.parse(it.next(), "format version")?;
    let file_type: i32 = lines.parse(it.next(), "file type")?;
    if !version.starts_with("2.") {
        return Err(lines.err(format!("unsupported MSH version {version}, need 2.2")));
    }
    if file_type != 0 {
        return Err(lines.err("binary MSH files are not supported"));
    }
    lines.expect("$EndMeshFormat")?;

    let mut vertices = Vec::new();
    let mut node_of_tag: HashMap<i64, usize> = HashMap::new();
    let mut tets = Vec::new();
    let mut tagged_triangles: BTreeMap<i64, Vec<[usize; 3]>> = BTreeMap::new();
    let mut seen_nodes = false;
    let mut seen_elements = false;

    loop {
        let section = match lines.inner.next() {
            Some((i, l)) => {
                lines.line = i + 1;
                let l = l.trim();
                if l.is_empty() {
                    continue;
                }
                l
            }
            None => break,
        };
        match section {
            "$Nodes" => {
                let l = lines.next_line()?;
                let count: usize = lines.parse(Some(l), "node count")?;
                vertices.reserve(count);
                for _ in 0..count {
                    let l = lines.next_line()?;
                    let mut f = l.split_whitespace();
                    let tag: i64 = lines.parse(f.next(), "node tag")?;
                    let x: f64 = lines.parse(f.next(), "x coordinate")?;
                    let y: f64 = lines.parse(f.next(), "y coordinate")?;
                    let z: f64 = lines.parse(f.next(), "z coordinate")?;
                    if node_of_tag.insert(tag, vertices.len()).is_some() {
                        return Err(lines.err(format!("duplicate node tag {tag}")));
                    }
                    vertices.push([x, y, z]);
                }
                lines.expect("$EndNodes")?;
                seen_nodes = true;
            }
            "$Elements" => {
                if !seen_nodes {
                    return Err(lines.err("$Elements before $Nodes"));
                }
                let l = lines.next_line()?;
                let count: usize = lines.parse(Some(l), "element count")?;
                for _ in 0..count {
                    let l = lines.next_line()?;
                    let fields: Vec<&str> = l.split_whitespace().collect();
                    let _id: i64 = lines.parse(fields.first().copied(), "element id")?;
                    let kind: i32 = lines.parse(fields.get(1).copied(), "element type")?;
                    let ntags: usize = lines.parse(fields.get(2).copied(), "tag count")?;
                    let tags = fields.get(3..3 + ntags).ok_or_else(|| lines.err("missing tags"))?;
                    let physical: i64 = if ntags > 0 {
                        lines.parse(Some(tags[0]), "physical tag")?
                    } else {
                        0
                    };
                    let nodes = &fields[(3 + ntags).min(fields.len())..];
                    let expected = match kind {
                        15 => 1,
                        1 => 2,
                        2 => 3,
                        4 => 4,
                        other => {
                            return Err(lines.err(format!(
                                "unsupported element type {other}; only tetrahedra (4) are meshes"
                            )))
                        }
                    };
                    if nodes.len() != expected {
                        return Err(lines.err(format!(
                            "element of type {kind} needs {expected} nodes, found {}",
                            nodes.len()
                        )));
                    }
                    let mut idx = Vec::with_capacity(expected);
                    for n in nodes {
                        let tag: i64 = lines.parse(Some(n), "node reference")?;
                        let v = *node_of_tag
                            .get(&tag)
                            .ok_or_else(|| lines.err(format!("element references undefined node {tag}")))?;
                        idx.push(v);
                    }
                    match kind {
                        4 => tets.push([idx[0], idx[1], idx[2], idx[3]]),
                        2 => tagged_triangles
                            .entry(physical)
                            .or_default()
                            .push([idx[0], idx[1], idx[2]]),
                        _ => {}
                    }
                }
                lines.expect("$EndElements")?;
                seen_elements = true;
            }
            other if other.starts_with('$') => {
                // Skip unknown sections ($PhysicalNames, $NodeData, ...).
                let end = format!("$End{}", &other[1..]);
                loop {
                    if lines.next_line()? == end {
                        break;
                    }
                }
            }
            other => return Err(lines.err(format!("unexpected line `{other}`"))),
        }
    }
    if !seen_elements {
        return Err(lines.err("no $Elements section"));
    }
    if tets.is_empty() {
        return Err(lines.err("file contains no tetrahedra"));
    }
    Mesh::orient_tets(&vertices, &mut tets)?;
    let mesh = Mesh::from_parts(vertices, tets)?;
    Ok(MshData {
        mesh,
        tagged_triangles,
    })
}

/// Writes `mesh` as MSH 2.2 ASCII. Each entry of `patches` is written as a
/// group of triangles carrying its key as physical tag.
pub fn write_msh(
    path: impl AsRef<Path>,
    mesh: &Mesh,
    patches: &BTreeMap<i64, Vec<[usize; 3]>>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_msh(mesh, patches)).map_err(|e| Error::io(path, e))
}

pub(crate) fn format_msh(mesh: &Mesh, patches: &BTreeMap<i64, Vec<[usize; 3]>>) -> String {
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(s, "{}", mesh.node_count());
    for (i, p) in mesh.vertices().iter().enumerate() {
        // `{}` prints the shortest representation that parses back exactly.
        let _ = writeln!(s, "{} {} {} {}", i + 1, p[0], p[1], p[2]);
    }
    s.push_str("$EndNodes\n$Elements\n");
    let ntri: usize = patches.values().map(Vec::len).sum();
    let _ = writeln!(s, "{}", mesh.tets().len() + ntri);
    let mut id = 1;
    for (tag, tris) in patches {
        for t in tris {
            let _ = writeln!(s, "{id} 2 2 {tag} {tag} {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
            id += 1;
        }
    }
    for t in mesh.tets() {
        let _ = writeln!(s, "{id} 4 2 1 1 {} {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1, t[3] + 1);
        id += 1;
    }
    s.push_str("$EndElements\n");
    s
}
