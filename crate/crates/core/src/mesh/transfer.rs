use alloc::vec;
use alloc::vec::Vec;

use super::{CellLocator, Mesh};
use crate::error::{check_len, Result};
use crate::field::CellField;

/// Piecewise-constant transfer between independently generated fine and
/// coarse meshes.
///
/// Every fine cell is assigned to the coarse cell containing its centroid.
/// Restriction averages the assigned fine cells with area weights;
/// prolongation injects the coarse value into every assigned fine cell.
/// A coarse cell that receives no fine centroid borrows the fine cell under
/// its own centroid.
#[derive(Debug, Clone)]
pub struct TransferOps {
    fine_cells: usize,
    coarse_cells: usize,
    /// Coarse owner of every fine cell.
    owner: Vec<usize>,
    /// Fine cells per coarse cell with normalized area weights.
    members: Vec<Vec<(usize, f64)>>,
    /// Fine area assigned to each coarse cell.
    assigned_area: Vec<f64>,
}

impl TransferOps {
    pub fn new(fine: &Mesh, coarse: &Mesh) -> Self {
        let locator = CellLocator::new(coarse);
        let owner: Vec<usize> = (0..fine.cell_count())
            .map(|f| locator.locate_or_nearest(coarse, fine.centroid(f)))
            .collect();
        let mut members = vec![Vec::new(); coarse.cell_count()];
        for (f, &c) in owner.iter().enumerate() {
            members[c].push((f, fine.cell_areas[f]));
        }
        let mut assigned_area = vec![0.0; coarse.cell_count()];
        let mut fine_locator = None;
        for (c, list) in members.iter_mut().enumerate() {
            if list.is_empty() {
                let loc = fine_locator.get_or_insert_with(|| CellLocator::new(fine));
                let f = loc.locate_or_nearest(fine, coarse.centroid(c));
                list.push((f, fine.cell_areas[f]));
            }
            let total: f64 = list.iter().map(|m| m.1).sum();
            assigned_area[c] = total;
            list.iter_mut().for_each(|m| m.1 /= total);
        }
        Self {
            fine_cells: fine.cell_count(),
            coarse_cells: coarse.cell_count(),
            owner,
            members,
            assigned_area,
        }
    }

    pub fn fine_cells(&self) -> usize {
        self.fine_cells
    }

    pub fn coarse_cells(&self) -> usize {
        self.coarse_cells
    }

    /// Fine area whose centroids fall in each coarse cell.
    pub fn assigned_area(&self) -> &[f64] {
        &self.assigned_area
    }

    /// Number of coarse cells that received no fine centroid.
    pub fn orphan_count(&self) -> usize {
        let mut hit = vec![false; self.coarse_cells];
        self.owner.iter().for_each(|&c| hit[c] = true);
        hit.iter().filter(|h| !**h).count()
    }

    /// Area-weighted average of a fine field over each coarse cell.
    pub fn restrict(&self, field: &CellField) -> Result<CellField> {
        check_len("restrict input", self.fine_cells, field.cells)?;
        let mut out = CellField::zeros(field.components, self.coarse_cells);
        for l in 0..field.components {
            let src = field.component(l);
            for (dst, list) in out.component_mut(l).iter_mut().zip(&self.members) {
                *dst = list.iter().map(|&(f, w)| w * src[f]).sum();
            }
        }
        Ok(out)
    }

    /// Scalar restriction into a caller-provided buffer.
    pub fn restrict_into(&self, fine: &[f64], coarse: &mut [f64]) {
        for (dst, list) in coarse.iter_mut().zip(&self.members) {
            *dst = list.iter().map(|&(f, w)| w * fine[f]).sum();
        }
    }

    /// Piecewise-constant injection of a coarse field onto the fine mesh.
    pub fn prolong(&self, field: &CellField) -> Result<CellField> {
        check_len("prolong input", self.coarse_cells, field.cells)?;
        let mut out = CellField::zeros(field.components, self.fine_cells);
        for l in 0..field.components {
            let src = field.component(l);
            for (dst, &c) in out.component_mut(l).iter_mut().zip(&self.owner) {
                *dst = src[c];
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;
    use proptest::prelude::*;

    fn pair() -> (Mesh, Mesh, TransferOps) {
        let fine = build_disk_mesh(3000).unwrap();
        let coarse = build_disk_mesh(600).unwrap();
        let ops = TransferOps::new(&fine, &coarse);
        (fine, coarse, ops)
    }

    #[test]
    fn partition_of_unity() {
        let (fine, coarse, ops) = pair();
        let r = ops.restrict(&CellField::constant(1, fine.cell_count(), 1.0)).unwrap();
        assert!(r.values.iter().all(|v| (v - 1.0).abs() <= 1e-12));
        let p = ops.prolong(&CellField::constant(1, coarse.cell_count(), 1.0)).unwrap();
        assert!(p.values.iter().all(|v| (v - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn constants_and_zero() {
        let (fine, _, ops) = pair();
        let r = ops.restrict(&CellField::constant(1, fine.cell_count(), 3.0)).unwrap();
        assert!(r.values.iter().all(|v| (v - 3.0).abs() <= 1e-12));
        let z = ops.restrict(&CellField::zeros(1, fine.cell_count())).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn paper_meshes_have_no_orphans() {
        let fine = build_disk_mesh(7002).unwrap();
        let coarse = build_disk_mesh(1120).unwrap();
        assert_eq!(TransferOps::new(&fine, &coarse).orphan_count(), 0);
        assert_eq!(pair().2.orphan_count(), 0);
    }

    #[test]
    fn disk_indicator_mass() {
        let (fine, coarse, ops) = pair();
        let ind = CellField::scalar(
            (0..fine.cell_count())
                .map(|c| {
                    let [x, y] = fine.centroid(c);
                    if (x - 0.3).powi(2) + (y + 0.1).powi(2) < 0.04 {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
        );
        let r = ops.restrict(&ind).unwrap();
        assert!(r.values.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
        let fine_mass: f64 = ind.values.iter().zip(&fine.cell_areas).map(|(v, a)| v * a).sum();
        // exact against the assigned-area measure
        let assigned: f64 = r.values.iter().zip(ops.assigned_area()).map(|(v, a)| v * a).sum();
        assert!((assigned - fine_mass).abs() <= 1e-10 * fine_mass.max(1.0));
        // and close against the geometric coarse areas
        let geometric: f64 = r.values.iter().zip(&coarse.cell_areas).map(|(v, a)| v * a).sum();
        assert!((geometric - fine_mass).abs() / fine_mass < 0.05);
    }

    #[test]
    fn mismatched_sizes_rejected() {
        let (_, _, ops) = pair();
        assert!(ops.restrict(&CellField::zeros(1, 10)).is_err());
        assert!(ops.prolong(&CellField::zeros(1, 10)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn restrict_prolong_round_trip(seed in 0u64..1000) {
            let (_, coarse, ops) = pair();
            let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            let vals: Vec<f64> = (0..2 * coarse.cell_count()).map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
            }).collect();
            let u = CellField::from_values(2, coarse.cell_count(), vals).unwrap();
            let p = ops.prolong(&u).unwrap();
            let (lo, hi) = u.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let (plo, phi) = p.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            prop_assert_eq!((lo, hi), (plo, phi));
            let back = ops.restrict(&p).unwrap();
            for (a, b) in back.values.iter().zip(&u.values) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }
    }
}
