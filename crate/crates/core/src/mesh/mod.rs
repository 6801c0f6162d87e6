//! Triangular meshes of the unit disk and field transfer between a fine
//! solver mesh and a coarse reconstruction mesh.

mod disk;
mod locate;
mod transfer;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::field::CellField;

pub use disk::build_disk_mesh;
pub use locate::CellLocator;
pub use transfer::TransferOps;

/// Tolerance used to decide whether boundary vertices sit on the unit circle.
pub const CIRCLE_TOL: f64 = 1e-8;

/// A conforming triangulation with an ordered boundary loop.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Boundary edges ordered counterclockwise; edge `e` ends where `e + 1` starts.
    pub boundary_edges: Vec<[usize; 2]>,
    pub cell_areas: Vec<f64>,
    pub boundary_edge_lengths: Vec<f64>,
    /// Boundary vertices in loop order (the start vertex of each boundary edge).
    pub boundary_vertices: Vec<usize>,
    /// Position of a vertex in `boundary_vertices`, if it lies on the boundary.
    pub boundary_slot: Vec<Option<usize>>,
    /// Gradients of the three barycentric basis functions of every cell.
    pub gradients: Vec<[[f64; 2]; 3]>,
    unit_disk: bool,
}

impl Mesh {
    /// Validates and completes a triangulation.
    ///
    /// Clockwise triangles are reoriented; zero-area triangles are rejected.
    /// The boundary edges must form one closed loop; they are reordered to
    /// run counterclockwise.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<[usize; 2]>,
    ) -> Result<Self> {
        let nv = vertices.len();
        if triangles.is_empty() || nv < 3 {
            return Err(Error::InvalidMesh(format!(
                "{nv} vertices and {} triangles",
                triangles.len()
            )));
        }
        let mut cell_areas = Vec::with_capacity(triangles.len());
        for (c, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&i| i >= nv) {
                return Err(Error::InvalidMesh(format!("triangle {c} indexes past vertex count")));
            }
            let mut area = signed_area(&vertices, tri);
            if area < 0.0 {
                tri.swap(1, 2);
                area = -area;
            }
            if !(area > 1e-14) {
                return Err(Error::DegenerateCell { cell: c, area });
            }
            cell_areas.push(area);
        }

        let boundary_edges = order_boundary_loop(&vertices, boundary_edges)?;
        let boundary_edge_lengths = boundary_edges
            .iter()
            .map(|&[a, b]| dist(vertices[a], vertices[b]))
            .collect();
        let boundary_vertices: Vec<usize> = boundary_edges.iter().map(|e| e[0]).collect();
        let mut boundary_slot = vec![None; nv];
        for (slot, &v) in boundary_vertices.iter().enumerate() {
            boundary_slot[v] = Some(slot);
        }
        let gradients = triangles
            .iter()
            .zip(&cell_areas)
            .map(|(tri, &area)| basis_gradients(&vertices, tri, area))
            .collect();
        let unit_disk = boundary_vertices.iter().all(|&v| {
            let [x, y] = vertices[v];
            ((x * x + y * y).sqrt() - 1.0).abs() <= CIRCLE_TOL
        });

        Ok(Self {
            vertices,
            triangles,
            boundary_edges,
            cell_areas,
            boundary_edge_lengths,
            boundary_vertices,
            boundary_slot,
            gradients,
            unit_disk,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn cell_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary_vertices.len()
    }

    /// True when every boundary vertex lies on the unit circle.
    pub fn is_unit_disk(&self) -> bool {
        self.unit_disk
    }

    pub fn centroid(&self, cell: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[cell];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    pub fn centroids(&self) -> Vec<[f64; 2]> {
        (0..self.cell_count()).map(|c| self.centroid(c)).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.cell_areas.iter().sum()
    }

    /// Number of distinct edges.
    pub fn edge_count(&self) -> usize {
        let mut edges = BTreeSet::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges.len()
    }

    /// Longest edge over all cells.
    pub fn max_cell_diameter(&self) -> f64 {
        self.triangles
            .iter()
            .map(|tri| {
                (0..3)
                    .map(|k| dist(self.vertices[tri[k]], self.vertices[tri[(k + 1) % 3]]))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Diameter of one cell.
    pub fn cell_diameter(&self, cell: usize) -> f64 {
        let tri = self.triangles[cell];
        (0..3)
            .map(|k| dist(self.vertices[tri[k]], self.vertices[tri[(k + 1) % 3]]))
            .fold(0.0, f64::max)
    }

    /// Boundary length attributed to each boundary vertex (half of each
    /// adjacent edge), in `boundary_vertices` order.
    pub fn boundary_vertex_weights(&self) -> Vec<f64> {
        let nb = self.boundary_count();
        let mut w = vec![0.0; nb];
        for (e, len) in self.boundary_edge_lengths.iter().enumerate() {
            w[e] += 0.5 * len;
            w[(e + 1) % nb] += 0.5 * len;
        }
        w
    }

    /// Polar angle of each boundary vertex in `[0, 2π)`.
    pub fn boundary_angles(&self) -> Vec<f64> {
        self.boundary_vertices
            .iter()
            .map(|&v| {
                let [x, y] = self.vertices[v];
                let a = y.atan2(x);
                if a < 0.0 {
                    a + core::f64::consts::TAU
                } else {
                    a
                }
            })
            .collect()
    }

    /// Distance from every cell centroid to the boundary.
    ///
    /// On the unit disk this is `1 − ‖x‖`; other domains fall back to the
    /// distance to the nearest boundary edge.
    pub fn boundary_distance(&self) -> CellField {
        if self.unit_disk {
            CellField::scalar(
                (0..self.cell_count())
                    .map(|c| {
                        let [x, y] = self.centroid(c);
                        (1.0 - (x * x + y * y).sqrt()).max(0.0)
                    })
                    .collect(),
            )
        } else {
            self.boundary_distance_polygonal()
        }
    }

    /// Distance from every centroid to the nearest boundary edge.
    pub fn boundary_distance_polygonal(&self) -> CellField {
        CellField::scalar(
            (0..self.cell_count())
                .map(|c| {
                    let p = self.centroid(c);
                    self.boundary_edges
                        .iter()
                        .map(|&[a, b]| point_segment_distance(p, self.vertices[a], self.vertices[b]))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect(),
        )
    }

    /// Vertex adjacency lists (sorted, without self loops).
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![BTreeSet::new(); self.vertex_count()];
        for tri in &self.triangles {
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        sets[tri[i]].insert(tri[j]);
                    }
                }
            }
        }
        sets.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Cells sharing an edge with each cell.
    pub fn cell_neighbors(&self) -> Vec<Vec<usize>> {
        let mut by_edge: alloc::collections::BTreeMap<(usize, usize), Vec<usize>> = alloc::collections::BTreeMap::new();
        for (c, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                by_edge.entry((a.min(b), a.max(b))).or_default().push(c);
            }
        }
        let mut out = vec![Vec::new(); self.cell_count()];
        for cells in by_edge.values() {
            if let [a, b] = cells[..] {
                out[a].push(b);
                out[b].push(a);
            }
        }
        out
    }

    /// Interpolates a nodal field at a point inside `cell`.
    pub fn interpolate_in_cell(&self, cell: usize, nodal: &[f64], p: [f64; 2]) -> f64 {
        let lambda = barycentric(&self.vertices, &self.triangles[cell], p);
        let tri = self.triangles[cell];
        lambda[0] * nodal[tri[0]] + lambda[1] * nodal[tri[1]] + lambda[2] * nodal[tri[2]]
    }
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub(crate) fn signed_area(vertices: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub(crate) fn barycentric(vertices: &[[f64; 2]], tri: &[usize; 3], p: [f64; 2]) -> [f64; 3] {
    let [a, b, c] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

fn basis_gradients(vertices: &[[f64; 2]], tri: &[usize; 3], area: f64) -> [[f64; 2]; 3] {
    let p = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
    let mut g = [[0.0; 2]; 3];
    for (i, gi) in g.iter_mut().enumerate() {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        *gi = [(p[j][1] - p[k][1]) / (2.0 * area), (p[k][0] - p[j][0]) / (2.0 * area)];
    }
    g
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + s * dx, a[1] + s * dy])
}

/// Chains boundary edges into a single counterclockwise loop.
fn order_boundary_loop(vertices: &[[f64; 2]], edges: Vec<[usize; 2]>) -> Result<Vec<[usize; 2]>> {
    if edges.len() < 3 {
        return Err(Error::InvalidMesh(format!("{} boundary edges", edges.len())));
    }
    let nv = vertices.len();
    let mut next = vec![usize::MAX; nv];
    for &[a, b] in &edges {
        if a >= nv || b >= nv {
            return Err(Error::InvalidMesh("boundary edge indexes past vertex count".into()));
        }
        if next[a] != usize::MAX {
            return Err(Error::InvalidMesh(format!("vertex {a} starts two boundary edges")));
        }
        next[a] = b;
    }
    let start = edges[0][0];
    let mut ordered = Vec::with_capacity(edges.len());
    let mut v = start;
    loop {
        let w = next[v];
        if w == usize::MAX {
            return Err(Error::InvalidMesh(format!("boundary loop broken at vertex {v}")));
        }
        ordered.push([v, w]);
        v = w;
        if v == start {
            break;
        }
        if ordered.len() > edges.len() {
            return Err(Error::InvalidMesh("boundary edges do not close".into()));
        }
    }
    if ordered.len() != edges.len() {
        return Err(Error::InvalidMesh("boundary has more than one loop".into()));
    }
    // Shoelace sign of the loop decides its orientation.
    let twice_area: f64 = ordered
        .iter()
        .map(|&[a, b]| vertices[a][0] * vertices[b][1] - vertices[b][0] * vertices[a][1])
        .sum();
    if twice_area < 0.0 {
        ordered.reverse();
        ordered.iter_mut().for_each(|e| e.swap(0, 1));
    }
    Ok(ordered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_square() -> Mesh {
        Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 3, 2]],
            vec![[1, 0], [2, 1], [3, 2], [0, 3]],
        )
        .unwrap()
    }

    #[test]
    fn reorients_and_orders_boundary() {
        let m = unit_square();
        assert!(m.cell_areas.iter().all(|&a| a > 0.0));
        for tri in &m.triangles {
            assert!(signed_area(&m.vertices, tri) > 0.0);
        }
        // counterclockwise loop starting anywhere
        let twice: f64 = m
            .boundary_edges
            .iter()
            .map(|&[a, b]| m.vertices[a][0] * m.vertices[b][1] - m.vertices[b][0] * m.vertices[a][1])
            .sum();
        assert!(twice > 0.0);
        assert!(!m.is_unit_disk());
        assert_relative_eq!(m.total_area(), 1.0);
    }

    #[test]
    fn rejects_degenerate_cells() {
        let err = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 1, 3]],
            vec![[0, 1], [1, 3], [3, 0]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateCell { cell: 0, .. }));
    }

    #[test]
    fn rejects_open_boundary() {
        let err = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![[0, 1], [1, 2], [2, 3]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
    }

    #[test]
    fn polygonal_distance_on_square() {
        let m = unit_square();
        let d = m.boundary_distance();
        for (c, &v) in d.values.iter().enumerate() {
            let [x, y] = m.centroid(c);
            let expect = x.min(y).min(1.0 - x).min(1.0 - y);
            assert_relative_eq!(v, expect, epsilon = 1e-14);
        }
    }

    #[test]
    fn gradients_reproduce_linear_functions() {
        let m = unit_square();
        for (c, tri) in m.triangles.iter().enumerate() {
            let g = m.gradients[c];
            let gx: [f64; 2] = (0..3).fold([0.0, 0.0], |acc, i| {
                let x = m.vertices[tri[i]][0];
                [acc[0] + x * g[i][0], acc[1] + x * g[i][1]]
            });
            assert_relative_eq!(gx[0], 1.0, epsilon = 1e-14);
            assert_relative_eq!(gx[1], 0.0, epsilon = 1e-14);
        }
    }
}
