//! Triangle meshes with approximate geodesic distance.
//!
//! Distances are shortest paths in a graph whose nodes are the vertices plus
//! `k` evenly spaced Steiner points per edge, with straight segments between
//! any two nodes on the boundary of a common face.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::path::Path;

use crate::config::STEINER_PER_EDGE;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct MeshSurface {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
    steiner: usize,
    /// Graph nodes: vertices first, then Steiner points edge by edge.
    nodes: Vec<[f64; 3]>,
    adjacency: Vec<Vec<(usize, f64)>>,
    eps_geo: Option<f64>,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]
}

/// Parses `v x y z` and `f i j k` lines (1-based indices). Blank lines and
/// lines starting with `#` are ignored.
pub fn parse_mesh(text: &str) -> Result<(Vec<[f64; 3]>, Vec<[usize; 3]>)> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let tag = it.next().unwrap_or_default();
        let rest: Vec<&str> = it.collect();
        let bad = |what: &str| Error::Mesh(format!("line {}: {what}: `{line}`", n + 1));
        if rest.len() != 3 {
            return Err(bad("expected three fields"));
        }
        match tag {
            "v" => {
                let mut p = [0.0f64; 3];
                for (slot, s) in p.iter_mut().zip(&rest) {
                    *slot = s.parse().map_err(|_| bad("bad coordinate"))?;
                    if !slot.is_finite() {
                        return Err(bad("non-finite coordinate"));
                    }
                }
                vertices.push(p);
            }
            "f" => {
                let mut f = [0usize; 3];
                for (slot, s) in f.iter_mut().zip(&rest) {
                    let i: usize = s.parse().map_err(|_| bad("bad index"))?;
                    if i == 0 {
                        return Err(bad("indices are 1-based"));
                    }
                    *slot = i - 1;
                }
                faces.push(f);
            }
            _ => return Err(bad("unknown record")),
        }
    }
    Ok((vertices, faces))
}

impl MeshSurface {
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>, steiner: usize) -> Result<Self> {
        let edges = validate(&vertices, &faces)?;
        let mut nodes = vertices.clone();
        let mut edge_nodes: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for &(a, b) in edges.keys() {
            let mut ids = vec![a];
            for s in 1..=steiner {
                ids.push(nodes.len());
                nodes.push(lerp(vertices[a], vertices[b], s as f64 / (steiner + 1) as f64));
            }
            ids.push(b);
            edge_nodes.insert((a, b), ids);
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for f in &faces {
            let mut on_face: Vec<usize> = Vec::new();
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                on_face.extend(&edge_nodes[&(a.min(b), a.max(b))]);
            }
            on_face.sort_unstable();
            on_face.dedup();
            for (i, &u) in on_face.iter().enumerate() {
                for &v in &on_face[i + 1..] {
                    let w = norm(sub(nodes[u], nodes[v]));
                    adjacency[u].push((v, w));
                    adjacency[v].push((u, w));
                }
            }
        }
        Ok(Self { vertices, faces, steiner, nodes, adjacency, eps_geo: None })
    }

    pub fn from_text(text: &str, steiner: Option<usize>) -> Result<Self> {
        let (v, f) = parse_mesh(text)?;
        Self::new(v, f, steiner.unwrap_or(STEINER_PER_EDGE))
    }

    pub fn load(path: &Path, steiner: Option<usize>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?, steiner)
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn steiner(&self) -> usize {
        self.steiner
    }

    /// Declared accuracy factor, set by calibration.
    pub fn eps_geo(&self) -> Option<f64> {
        self.eps_geo
    }

    pub fn with_eps_geo(mut self, eps: f64) -> Self {
        self.eps_geo = Some(eps);
        self
    }

    /// Graph distances from a vertex to every vertex.
    pub fn distances_from(&self, source: usize) -> Result<Vec<f64>> {
        if source >= self.vertices.len() {
            return Err(Error::Usage(format!("vertex {source} out of range")));
        }
        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Entry(0.0, source));
        while let Some(Entry(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adjacency[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Entry(nd, v));
                }
            }
        }
        dist.truncate(self.vertices.len());
        Ok(dist)
    }

    pub fn distance(&self, i: usize, j: usize) -> Result<f64> {
        if j >= self.vertices.len() {
            return Err(Error::Usage(format!("vertex {j} out of range")));
        }
        Ok(self.distances_from(i)?[j])
    }
}

/// Min-heap entry ordered by distance, then node.
#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Checks indices, degenerate faces and that every edge has exactly two
/// incident faces. Returns the edge incidence counts.
fn validate(vertices: &[[f64; 3]], faces: &[[usize; 3]]) -> Result<BTreeMap<(usize, usize), usize>> {
    if faces.is_empty() {
        return Err(Error::Mesh("no faces".into()));
    }
    let mut edges = BTreeMap::new();
    for (n, f) in faces.iter().enumerate() {
        if f.iter().any(|&i| i >= vertices.len()) {
            return Err(Error::Mesh(format!("face {} references a missing vertex", n + 1)));
        }
        if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            return Err(Error::Mesh(format!("face {} repeats a vertex", n + 1)));
        }
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    if let Some(((a, b), c)) = edges.iter().find(|(_, &c)| c != 2) {
        return Err(Error::Mesh(format!("edge ({}, {}) has {c} incident faces, expected 2", a + 1, b + 1)));
    }
    Ok(edges)
}

/// Two copies of a flat `n x n` grid on `[0,1]^2` glued along the boundary,
/// so every edge has two faces. The first `(n+1)^2` vertices are the top sheet.
pub fn flat_pillow(n: usize) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let side = n + 1;
    let is_boundary = |i: usize, j: usize| i == 0 || j == 0 || i == n || j == n;
    let mut vertices = Vec::new();
    let mut index = BTreeMap::new();
    for sheet in 0..2 {
        for j in 0..side {
            for i in 0..side {
                if sheet == 1 && is_boundary(i, j) {
                    continue;
                }
                index.insert((sheet, i, j), vertices.len());
                vertices.push([i as f64 / n as f64, j as f64 / n as f64, 0.0]);
            }
        }
    }
    let id = |sheet: usize, i: usize, j: usize| index[&(if is_boundary(i, j) { 0 } else { sheet }, i, j)];
    let mut faces = Vec::new();
    for sheet in 0..2 {
        for j in 0..n {
            for i in 0..n {
                let (a, b, c, d) = (id(sheet, i, j), id(sheet, i + 1, j), id(sheet, i + 1, j + 1), id(sheet, i, j + 1));
                let shared_diagonal = is_boundary(i, j) && is_boundary(i + 1, j + 1);
                if sheet == 0 {
                    faces.push([a, b, c]);
                    faces.push([a, c, d]);
                } else if shared_diagonal {
                    faces.push([a, d, b]);
                    faces.push([b, d, c]);
                } else {
                    faces.push([a, c, b]);
                    faces.push([a, d, c]);
                }
            }
        }
    }
    (vertices, faces)
}

/// Icosahedron subdivided `level` times, vertices on the unit sphere.
pub fn icosphere(level: usize) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<[f64; 3]> = [
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| {
        let r = norm(*p);
        [p[0] / r, p[1] / r, p[2] / r]
    })
    .collect();
    let mut f: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mids = BTreeMap::new();
        let mut mid = |a: usize, b: usize, v: &mut Vec<[f64; 3]>| {
            *mids.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = lerp(v[a], v[b], 0.5);
                let r = norm(m);
                v.push([m[0] / r, m[1] / r, m[2] / r]);
                v.len() - 1
            })
        };
        let mut next = Vec::with_capacity(4 * f.len());
        for &[a, b, c] in &f {
            let (ab, bc, ca) = (mid(a, b, &mut v), mid(b, c, &mut v), mid(c, a, &mut v));
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        f = next;
    }
    (v, f)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    /// `max(graph / reference) - 1` on the flat pillow (exact reference).
    pub flat: f64,
    /// Same on the icosphere against a lower bound of the polyhedral distance.
    pub sphere: f64,
    pub pairs: usize,
}

impl Calibration {
    pub fn eps_geo(&self) -> f64 {
        self.flat.max(self.sphere)
    }
}

/// Measures the accuracy factor on the two calibration meshes, comparing all
/// vertex pairs from a handful of sources.
///
/// On the icosphere the polyhedron lies between its inscribed and
/// circumscribed spheres and the nearest-point projection onto a convex body
/// is 1-Lipschitz, so the polyhedral distance is at least the inradius times
/// the central angle.
pub fn calibrate(steiner: usize) -> Result<Calibration> {
    let mut pairs = 0;
    let (v, f) = flat_pillow(8);
    let top = 81;
    let flat_mesh = MeshSurface::new(v, f, steiner)?;
    let mut flat: f64 = 0.0;
    for src in [0usize, 4, 40] {
        let d = flat_mesh.distances_from(src)?;
        let p = flat_mesh.vertices[src];
        for (j, q) in flat_mesh.vertices[..top].iter().enumerate() {
            let exact = norm(sub(p, *q));
            if j != src && exact > 0.0 {
                flat = flat.max(d[j] / exact - 1.0);
                pairs += 1;
            }
        }
    }
    let (v, f) = icosphere(2);
    let inradius = f
        .iter()
        .map(|t| {
            let (a, b, c) = (v[t[0]], v[t[1]], v[t[2]]);
            let (u, w) = (sub(b, a), sub(c, a));
            let n = [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]];
            (n[0] * a[0] + n[1] * a[1] + n[2] * a[2]).abs() / norm(n)
        })
        .fold(f64::INFINITY, f64::min);
    let sphere_mesh = MeshSurface::new(v, f, steiner)?;
    let mut sphere: f64 = 0.0;
    for src in [0usize, 17, 100] {
        let d = sphere_mesh.distances_from(src)?;
        let p = sphere_mesh.vertices[src];
        for (j, q) in sphere_mesh.vertices.iter().enumerate() {
            let cos = (p[0] * q[0] + p[1] * q[1] + p[2] * q[2]).clamp(-1.0, 1.0);
            let lower = inradius * cos.acos();
            if j != src && lower > 0.0 {
                sphere = sphere.max(d[j] / lower - 1.0);
                pairs += 1;
            }
        }
    }
    Ok(Calibration { flat, sphere, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TETRA: &str = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 1 4 3\nf 2 3 4\n";

    #[test]
    fn parses_and_measures_tetrahedron() {
        let m = MeshSurface::from_text(TETRA, Some(0)).unwrap();
        assert_eq!(m.vertices().len(), 4);
        assert!((m.distance(1, 2).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(m.distance(0, 0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(MeshSurface::from_text("v 0 0\n", None), Err(Error::Mesh(_))));
        assert!(matches!(MeshSurface::from_text("v 0 0 0\nf 0 1 2\n", None), Err(Error::Mesh(_))));
        let open = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
        let err = MeshSurface::from_text(open, None).unwrap_err().to_string();
        assert!(err.contains("incident faces"), "{err}");
    }

    #[test]
    fn steiner_points_shorten_paths() {
        let (v, f) = flat_pillow(4);
        let coarse = MeshSurface::new(v.clone(), f.clone(), 0).unwrap();
        let fine = MeshSurface::new(v, f, 4).unwrap();
        let (a, b) = (0, 4 * 5 + 3);
        let exact = norm(sub(coarse.vertices()[a], coarse.vertices()[b]));
        let (dc, df) = (coarse.distance(a, b).unwrap(), fine.distance(a, b).unwrap());
        assert!(df <= dc + 1e-12 && df >= exact - 1e-12);
        assert!(df / exact - 1.0 < 0.02);
    }

    #[test]
    fn icosphere_is_closed() {
        let (v, f) = icosphere(2);
        assert_eq!((v.len(), f.len()), (162, 320));
        MeshSurface::new(v, f, 0).unwrap();
    }

    #[test]
    fn calibration_factor_is_small_and_triangle_inequality_holds() {
        let c = calibrate(STEINER_PER_EDGE).unwrap();
        assert!(c.flat >= 0.0 && c.flat < 0.02, "{c:?}");
        assert!(c.sphere < 0.05, "{c:?}");
        let (v, f) = icosphere(1);
        let m = MeshSurface::new(v, f, 2).unwrap();
        let rows: Vec<Vec<f64>> = (0..m.vertices().len()).map(|i| m.distances_from(i).unwrap()).collect();
        for i in 0..rows.len() {
            for j in 0..rows.len() {
                assert!((rows[i][j] - rows[j][i]).abs() < 1e-12);
                for k in (0..rows.len()).step_by(7) {
                    assert!(rows[i][j] <= rows[i][k] + rows[k][j] + 1e-12);
                }
            }
        }
    }
}
