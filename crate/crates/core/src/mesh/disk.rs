use alloc::vec::Vec;
use core::f64::consts::TAU;

#[allow(unused_imports)]
use num_traits::Float;

use super::{signed_area, Mesh};
use crate::error::{Error, Result};

/// Concentric-ring triangulation of the unit disk with exactly
/// `target_triangles` cells.
///
/// Ring `k` (of `R`) sits at radius `k / R` and carries roughly `c·k`
/// vertices; the band between two rings with `a` and `b` vertices holds
/// `a + b` triangles, the innermost ring is fanned to the center. The
/// outermost ring absorbs the rounding so the count is exact.
pub fn build_disk_mesh(target_triangles: usize) -> Result<Mesh> {
    if target_triangles < 16 {
        return Err(Error::MeshTooSmall(target_triangles));
    }
    let rings = ((target_triangles as f64 / 6.0).sqrt().floor() as usize).max(1);
    let counts = ring_counts(target_triangles, rings);

    let mut vertices = Vec::with_capacity(1 + counts.iter().sum::<usize>());
    vertices.push([0.0, 0.0]);
    let mut ring_start = Vec::with_capacity(rings);
    for (k, &n) in counts.iter().enumerate() {
        let radius = (k + 1) as f64 / rings as f64;
        let offset = ring_offset(k + 1, n);
        ring_start.push(vertices.len());
        for j in 0..n {
            let theta = offset + TAU * j as f64 / n as f64;
            let (s, c) = theta.sin_cos();
            if k + 1 == rings {
                // keep boundary vertices exactly on the circle
                vertices.push([c, s]);
            } else {
                vertices.push([radius * c, radius * s]);
            }
        }
    }

    let mut triangles = Vec::with_capacity(target_triangles);
    let n1 = counts[0];
    for j in 0..n1 {
        triangles.push([0, ring_start[0] + j, ring_start[0] + (j + 1) % n1]);
    }
    for k in 1..rings {
        stitch_band(
            (ring_start[k - 1], counts[k - 1], ring_offset(k, counts[k - 1])),
            (ring_start[k], counts[k], ring_offset(k + 1, counts[k])),
            &mut triangles,
        );
    }
    for tri in triangles.iter_mut() {
        if signed_area(&vertices, tri) < 0.0 {
            tri.swap(1, 2);
        }
    }

    let outer = ring_start[rings - 1];
    let nb = counts[rings - 1];
    let boundary_edges = (0..nb).map(|j| [outer + j, outer + (j + 1) % nb]).collect();
    Mesh::new(vertices, triangles, boundary_edges)
}

/// Vertex counts per ring, tuned so that the triangle total hits `target`.
fn ring_counts(target: usize, rings: usize) -> Vec<usize> {
    if rings == 1 {
        return alloc::vec![target];
    }
    let density = target as f64 / (rings * rings) as f64;
    let mut counts: Vec<usize> = (1..=rings)
        .map(|k| ((density * k as f64).round() as usize).max(3))
        .collect();
    for k in 1..rings {
        counts[k] = counts[k].max(counts[k - 1]);
    }
    let total = triangle_total(&counts) as isize;
    let last = counts[rings - 1] as isize + (target as isize - total);
    counts[rings - 1] = last.max(counts[rings - 2] as isize) as usize;
    counts
}

fn triangle_total(counts: &[usize]) -> usize {
    counts[0] + counts.windows(2).map(|w| w[0] + w[1]).sum::<usize>()
}

fn ring_offset(ring: usize, count: usize) -> f64 {
    if ring % 2 == 1 {
        0.5 * TAU / count as f64
    } else {
        0.0
    }
}

/// Triangulates the band between an inner and an outer ring by merging the
/// two angular sequences.
fn stitch_band(
    (a0, na, off_a): (usize, usize, f64),
    (b0, nb, off_b): (usize, usize, f64),
    triangles: &mut Vec<[usize; 3]>,
) {
    let angle_a = |i: usize| off_a + TAU * i as f64 / na as f64;
    let angle_b = |i: usize| off_b + TAU * i as f64 / nb as f64;
    let (mut ia, mut ib) = (0usize, 0usize);
    while ia < na || ib < nb {
        let advance_inner = ib == nb || (ia < na && angle_a(ia + 1) <= angle_b(ib + 1));
        let (va, vb) = (a0 + ia % na, b0 + ib % nb);
        if advance_inner {
            triangles.push([va, b0 + ib % nb, a0 + (ia + 1) % na]);
            ia += 1;
        } else {
            triangles.push([va, vb, b0 + (ib + 1) % nb]);
            ib += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::CIRCLE_TOL;
    use core::f64::consts::PI;

    fn euler(m: &Mesh) -> isize {
        m.vertex_count() as isize - m.edge_count() as isize + m.cell_count() as isize
    }

    #[test]
    fn paper_fine_mesh_size() {
        let m = build_disk_mesh(7002).unwrap();
        let t = m.cell_count();
        assert!((6300..=7700).contains(&t), "{t}");
        assert_eq!(euler(&m), 1);
        assert!((m.total_area() - PI).abs() / PI < 5e-3);
    }

    #[test]
    fn minimal_mesh() {
        let m = build_disk_mesh(16).unwrap();
        assert_eq!(m.cell_count(), 16);
        assert!(m.cell_areas.iter().all(|&a| a > 0.0));
        assert!((m.total_area() - PI).abs() / PI < 0.05);
        assert_eq!(euler(&m), 1);
    }

    #[test]
    fn coarse_mesh_boundary_on_circle() {
        let m = build_disk_mesh(1120).unwrap();
        assert!(m.is_unit_disk());
        for &v in &m.boundary_vertices {
            let [x, y] = m.vertices[v];
            assert!(((x * x + y * y).sqrt() - 1.0).abs() <= CIRCLE_TOL);
        }
    }

    #[test]
    fn too_small_target_is_rejected() {
        assert_eq!(build_disk_mesh(15).unwrap_err(), Error::MeshTooSmall(15));
    }

    #[test]
    fn counts_hit_target_exactly() {
        for target in [16, 17, 24, 50, 100, 333, 600, 1120, 3000, 7002, 13870] {
            let m = build_disk_mesh(target).unwrap();
            assert_eq!(m.cell_count(), target);
            assert_eq!(euler(&m), 1, "target {target}");
            for tri in &m.triangles {
                assert!(signed_area(&m.vertices, tri) > 0.0);
            }
            if target >= 1000 {
                assert!((m.total_area() - PI).abs() / PI < 5e-3);
            }
        }
    }

    #[test]
    fn doubling_target_shrinks_cells() {
        for target in [500, 1000, 1750, 3500, 7000] {
            let h1 = build_disk_mesh(target).unwrap().max_cell_diameter();
            let h2 = build_disk_mesh(2 * target).unwrap().max_cell_diameter();
            assert!(h1 / h2 >= 1.25, "target {target}: {h1} / {h2}");
        }
    }

    #[test]
    fn boundary_distance_properties() {
        let m = build_disk_mesh(1120).unwrap();
        let d = m.boundary_distance();
        let mut pairs: Vec<(f64, f64)> = (0..m.cell_count())
            .map(|c| {
                let [x, y] = m.centroid(c);
                ((x * x + y * y).sqrt(), d.values[c])
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in pairs.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-15);
        }
        for (c, &v) in d.values.iter().enumerate() {
            assert!((0.0..=1.0).contains(&v));
            let touches_boundary = m.triangles[c].iter().any(|&i| m.boundary_slot[i].is_some());
            if touches_boundary {
                assert!(v > 0.0 && v < m.cell_diameter(c));
            }
        }
    }
}
