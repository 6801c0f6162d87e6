use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::{barycentric, Mesh};

/// Uniform bucket grid for point-in-cell queries.
#[derive(Debug, Clone)]
pub struct CellLocator {
    origin: [f64; 2],
    cell_size: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl CellLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in &mesh.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        let side = ((mesh.cell_count() as f64).sqrt().ceil() as usize).max(1);
        let dims = [side, side];
        let cell_size = [
            ((hi[0] - lo[0]) / side as f64).max(1e-12),
            ((hi[1] - lo[1]) / side as f64).max(1e-12),
        ];
        let mut locator = Self {
            origin: lo,
            cell_size,
            dims,
            buckets: vec![Vec::new(); side * side],
        };
        for (c, tri) in mesh.triangles.iter().enumerate() {
            let (mut blo, mut bhi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for &i in tri {
                for k in 0..2 {
                    blo[k] = blo[k].min(mesh.vertices[i][k]);
                    bhi[k] = bhi[k].max(mesh.vertices[i][k]);
                }
            }
            let [i0, j0] = locator.bucket_of(blo);
            let [i1, j1] = locator.bucket_of(bhi);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    locator.buckets[i * side + j].push(c);
                }
            }
        }
        locator
    }

    fn bucket_of(&self, p: [f64; 2]) -> [usize; 2] {
        let mut idx = [0; 2];
        for k in 0..2 {
            let s = ((p[k] - self.origin[k]) / self.cell_size[k]).floor();
            idx[k] = (s.max(0.0) as usize).min(self.dims[k] - 1);
        }
        idx
    }

    /// Cell containing `p`, if any (boundary points count as inside).
    pub fn locate(&self, mesh: &Mesh, p: [f64; 2]) -> Option<usize> {
        let [i, j] = self.bucket_of(p);
        self.buckets[i * self.dims[1] + j].iter().copied().find(|&c| {
            let l = barycentric(&mesh.vertices, &mesh.triangles[c], p);
            l.iter().all(|&x| x >= -1e-12)
        })
    }

    /// Containing cell, or the cell with the nearest centroid when `p` lies
    /// outside the triangulated region.
    pub fn locate_or_nearest(&self, mesh: &Mesh, p: [f64; 2]) -> usize {
        if let Some(c) = self.locate(mesh, p) {
            return c;
        }
        let [i, j] = self.bucket_of(p);
        let mut best = (f64::INFINITY, usize::MAX);
        for radius in 1..=self.dims[0].max(self.dims[1]) {
            let (ilo, ihi) = (i.saturating_sub(radius), (i + radius).min(self.dims[0] - 1));
            let (jlo, jhi) = (j.saturating_sub(radius), (j + radius).min(self.dims[1] - 1));
            for bi in ilo..=ihi {
                for bj in jlo..=jhi {
                    for &c in &self.buckets[bi * self.dims[1] + bj] {
                        let q = mesh.centroid(c);
                        let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
                        if d < best.0 {
                            best = (d, c);
                        }
                    }
                }
            }
            if best.1 != usize::MAX {
                return best.1;
            }
        }
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;

    #[test]
    fn finds_every_centroid() {
        let m = build_disk_mesh(600).unwrap();
        let loc = CellLocator::new(&m);
        for c in 0..m.cell_count() {
            assert_eq!(loc.locate(&m, m.centroid(c)), Some(c));
        }
    }

    #[test]
    fn outside_points_snap_to_nearby_cell() {
        let m = build_disk_mesh(600).unwrap();
        let loc = CellLocator::new(&m);
        assert_eq!(loc.locate(&m, [2.0, 0.0]), None);
        let c = loc.locate_or_nearest(&m, [0.99999, 0.001]);
        let [x, y] = m.centroid(c);
        assert!(x > 0.8 && y.abs() < 0.2);
    }
}
