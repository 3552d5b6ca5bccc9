//! Plain-text measurement, solution and convergence-log files.
//!
//! Floats are written in the shortest form that parses back to the same
//! bits, so a write/read round trip is exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::{MeasurementSet, RetentionMask};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::recon::ReconResult;

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `#key=value` header fields, several per line allowed.
fn header_fields(line: &str) -> impl Iterator<Item = (&str, &str)> {
    line.split_whitespace()
        .filter_map(|f| f.strip_prefix('#'))
        .filter_map(|f| f.split_once('='))
}

fn number<T: std::str::FromStr>(path: &Path, line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| parse_err(path, line, format!("bad value {v:?} for {key}")))
}

/// Measurement file text: headers, then `k j Re Im sigma_Re sigma_Im` per
/// retained pair. Without modulation the Im columns hold 0.
pub fn format_measurements(data: &MeasurementSet) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "#omega_over_c={:e}", data.omega_over_c);
    let _ = writeln!(s, "#K={} #J={}", data.mask.sources(), data.mask.sensors());
    let _ = writeln!(s, "#layout_hash={}", data.layout_hash);
    let n = data.mask.len();
    let im = data.imaginary();
    for (i, &(k, j)) in data.mask.pairs().iter().enumerate() {
        let (vi, si) = if im { (data.values[n + i], data.sigma[n + i]) } else { (0.0, 0.0) };
        let _ = writeln!(s, "{k} {j} {:e} {:e} {:e} {:e}", data.values[i], vi, data.sigma[i], si);
    }
    s
}

pub fn write_measurements(path: impl AsRef<Path>, data: &MeasurementSet) -> Result<()> {
    write(path.as_ref(), &format_measurements(data))
}

pub fn read_measurements(path: impl AsRef<Path>) -> Result<MeasurementSet> {
    let path = path.as_ref();
    parse_measurements(&read(path)?, path)
}

pub fn parse_measurements(text: &str, path: &Path) -> Result<MeasurementSet> {
    let (mut omega, mut k_count, mut j_count, mut hash) = (None, None, None, None);
    let mut rows: Vec<(usize, usize, [f64; 4])> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            for (key, v) in header_fields(line) {
                match key {
                    "omega_over_c" => omega = Some(number::<f64>(path, ln, key, v)?),
                    "K" => k_count = Some(number::<usize>(path, ln, key, v)?),
                    "J" => j_count = Some(number::<usize>(path, ln, key, v)?),
                    "layout_hash" => hash = Some(v.to_string()),
                    _ => return Err(parse_err(path, ln, format!("unknown header {key}"))),
                }
            }
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(parse_err(path, ln, format!("expected 6 columns, found {}", f.len())));
        }
        let k = number(path, ln, "k", f[0])?;
        let j = number(path, ln, "j", f[1])?;
        let mut v = [0.0; 4];
        for c in 0..4 {
            v[c] = number(path, ln, "value", f[c + 2])?;
        }
        rows.push((k, j, v));
    }
    let missing = |what: &str| parse_err(path, 0, format!("missing #{what} header"));
    let omega = omega.ok_or_else(|| missing("omega_over_c"))?;
    let k_count = k_count.ok_or_else(|| missing("K"))?;
    let j_count = j_count.ok_or_else(|| missing("J"))?;
    let hash = hash.ok_or_else(|| missing("layout_hash"))?;

    let pairs: Vec<(usize, usize)> = rows.iter().map(|r| (r.0, r.1)).collect();
    let mask = RetentionMask::from_pairs(k_count, j_count, pairs.clone())?;
    if mask.pairs() != pairs.as_slice() {
        return Err(parse_err(path, 0, "pairs must be unique and sorted by (k, j)"));
    }
    let mut values: Vec<f64> = rows.iter().map(|r| r.2[0]).collect();
    let mut sigma: Vec<f64> = rows.iter().map(|r| r.2[2]).collect();
    if crate::data::has_imaginary_block(omega) {
        values.extend(rows.iter().map(|r| r.2[1]));
        sigma.extend(rows.iter().map(|r| r.2[3]));
    }
    MeasurementSet::new(values, sigma, mask, omega, hash)
}

/// Nodal reconstruction as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub mesh_hash: String,
    pub kappa0: f64,
    pub mu0: f64,
    pub kappa: Vec<f64>,
    pub mu: Vec<f64>,
    pub converged: bool,
    pub linearizations: usize,
    pub final_residual: f64,
    pub target: f64,
}

impl Solution {
    pub fn from_result(result: &ReconResult, mesh: &Mesh) -> Self {
        Solution {
            mesh_hash: mesh.content_hash(),
            kappa0: result.params.kappa0,
            mu0: result.params.mu0,
            kappa: result.kappa_field.clone(),
            mu: result.mu_field.clone(),
            converged: result.converged,
            linearizations: result.outer_residuals.len(),
            final_residual: result.final_residual(),
            target: result.tau * result.epsilon,
        }
    }

    /// Fails unless the solution was computed on `mesh`.
    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        let h = mesh.content_hash();
        if h != self.mesh_hash || self.kappa.len() != mesh.node_count() {
            return Err(Error::Dimension(format!(
                "solution belongs to mesh {} with {} nodes, not {h} with {}",
                self.mesh_hash,
                self.kappa.len(),
                mesh.node_count()
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "#mesh_hash={}", self.mesh_hash);
        let _ = writeln!(s, "#nodes={}", self.kappa.len());
        let _ = writeln!(s, "#kappa0={:e} #mu0={:e}", self.kappa0, self.mu0);
        let _ = writeln!(
            s,
            "#converged={} #linearizations={} #final_residual={:e} #target={:e}",
            self.converged, self.linearizations, self.final_residual, self.target
        );
        for (k, m) in self.kappa.iter().zip(&self.mu) {
            let _ = writeln!(s, "{k:e} {m:e}");
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut sol = Solution {
            mesh_hash: String::new(),
            kappa0: f64::NAN,
            mu0: f64::NAN,
            kappa: Vec::new(),
            mu: Vec::new(),
            converged: false,
            linearizations: 0,
            final_residual: f64::NAN,
            target: f64::NAN,
        };
        let mut nodes = None;
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('#') {
                for (key, v) in header_fields(line) {
                    match key {
                        "mesh_hash" => sol.mesh_hash = v.to_string(),
                        "nodes" => nodes = Some(number::<usize>(path, ln, key, v)?),
                        "kappa0" => sol.kappa0 = number(path, ln, key, v)?,
                        "mu0" => sol.mu0 = number(path, ln, key, v)?,
                        "converged" => sol.converged = number(path, ln, key, v)?,
                        "linearizations" => sol.linearizations = number(path, ln, key, v)?,
                        "final_residual" => sol.final_residual = number(path, ln, key, v)?,
                        "target" => sol.target = number(path, ln, key, v)?,
                        _ => return Err(parse_err(path, ln, format!("unknown header {key}"))),
                    }
                }
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 2 {
                return Err(parse_err(path, ln, format!("expected 2 columns, found {}", f.len())));
            }
            sol.kappa.push(number(path, ln, "kappa", f[0])?);
            sol.mu.push(number(path, ln, "mu", f[1])?);
        }
        if sol.mesh_hash.is_empty() {
            return Err(parse_err(path, 0, "missing #mesh_hash header"));
        }
        if nodes != Some(sol.kappa.len()) {
            return Err(parse_err(
                path,
                0,
                format!("#nodes={nodes:?} but {} rows follow", sol.kappa.len()),
            ));
        }
        Ok(sol)
    }
}

pub fn write_solution(path: impl AsRef<Path>, solution: &Solution) -> Result<()> {
    write(path.as_ref(), &solution.to_text())
}

pub fn read_solution(path: impl AsRef<Path>) -> Result<Solution> {
    let path = path.as_ref();
    Solution::parse(&read(path)?, path)
}

/// `outer l residual r` for `l = 0, 1, …` and `lsqr l m residual r` for
/// LSQR step `m` of linearization `l`.
pub fn format_convergence_log(result: &ReconResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# target {:e}", result.tau * result.epsilon);
    let _ = writeln!(s, "outer 0 residual {:e}", result.initial_residual);
    for (l, r) in result.outer_residuals.iter().enumerate() {
        let _ = writeln!(s, "outer {} residual {r:e}", l + 1);
    }
    for (l, round) in result.lsqr_rounds.iter().enumerate() {
        for (m, r) in round.residual_history.iter().enumerate() {
            let _ = writeln!(s, "lsqr {} {m} residual {r:e}", l + 1);
        }
    }
    let _ = writeln!(s, "# termination {:?}", result.termination);
    s
}

pub fn write_convergence_log(path: impl AsRef<Path>, result: &ReconResult) -> Result<()> {
    write(path.as_ref(), &format_convergence_log(result))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(omega: f64) -> MeasurementSet {
        let mask = RetentionMask::from_pairs(2, 3, vec![(0, 1), (0, 2), (1, 0)]).unwrap();
        let n = if omega == 0.0 { 3 } else { 6 };
        let values = (0..n).map(|i| 0.1 * i as f64 - 0.17).collect();
        let sigma = (0..n).map(|i| 1e-3 * (i + 1) as f64 / 3.0).collect();
        MeasurementSet::new(values, sigma, mask, omega, "00ff".into()).unwrap()
    }

    #[test]
    fn measurements_roundtrip_exactly() {
        for omega in [0.0, 0.021] {
            let d = sample(omega);
            let text = format_measurements(&d);
            assert_eq!(parse_measurements(&text, Path::new("m")).unwrap(), d);
        }
    }

    #[test]
    fn unmodulated_file_writes_zero_imaginary_columns() {
        let text = format_measurements(&sample(0.0));
        let row = text.lines().nth(3).unwrap();
        let cols: Vec<&str> = row.split_whitespace().collect();
        assert_eq!((cols[3], cols[5]), ("0e0", "0e0"));
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = format_measurements(&sample(0.0)).replace("0 2 ", "0 2 x ");
        let err = parse_measurements(&text, Path::new("m")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }), "{err}");
    }

    #[test]
    fn solution_roundtrip() {
        let s = Solution {
            mesh_hash: "abc".into(),
            kappa0: 0.05,
            mu0: 0.5,
            kappa: vec![0.05, 0.1 / 3.0],
            mu: vec![0.5, 2.0f64.sqrt()],
            converged: true,
            linearizations: 3,
            final_residual: 27.5,
            target: 28.9,
        };
        assert_eq!(Solution::parse(&s.to_text(), Path::new("s")).unwrap(), s);
        let short = s.to_text().replace("#nodes=2", "#nodes=3");
        assert!(Solution::parse(&short, Path::new("s")).is_err());
    }
}
