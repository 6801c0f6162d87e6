use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

#[allow(unused_imports)]
use num_traits::Float;

use once_cell::race::OnceBox;

use super::{InhomogeneityKind, InhomogeneityOp, SolveStats};
use crate::error::{check_len, Error, Result};
use crate::field::CellField;
use crate::mesh::Mesh;
use crate::sparse::{CholeskyFactor, SparsePattern, SymMatrix, SymbolicCholesky};

/// A mesh with everything needed to assemble and factor P1 operators on it.
#[derive(Debug)]
pub struct FemSpace {
    mesh: Mesh,
    pattern: Arc<SparsePattern>,
    symbolic: Arc<SymbolicCholesky>,
    /// Value slots of the 3×3 element matrix of every cell.
    slots: Vec<[usize; 9]>,
    mass: SymMatrix,
    laplace: SymMatrix,
    boundary_mask: Vec<bool>,
    background: OnceBox<(f64, CholeskyFactor)>,
    pub(crate) counters: Counters,
}

#[derive(Debug, Default)]
pub(crate) struct Counters {
    pub neumann: AtomicUsize,
    pub dirichlet: AtomicUsize,
    pub adjoint: AtomicUsize,
    pub factorizations: AtomicUsize,
}

impl FemSpace {
    pub fn new(mesh: Mesh) -> Result<Self> {
        let pattern = Arc::new(SparsePattern::from_neighbors(&mesh.vertex_neighbors()));
        let symbolic = Arc::new(SymbolicCholesky::for_mesh(&pattern, &mesh.vertices));
        let slots = element_slots(&mesh, &pattern)?;
        let mut boundary_mask = vec![false; mesh.vertex_count()];
        mesh.boundary_vertices.iter().for_each(|&v| boundary_mask[v] = true);
        let mut space = Self {
            mass: SymMatrix::zeros(pattern.clone()),
            laplace: SymMatrix::zeros(pattern.clone()),
            mesh,
            pattern,
            symbolic,
            slots,
            boundary_mask,
            background: OnceBox::new(),
            counters: Counters::default(),
        };
        let ones = vec![1.0; space.mesh.cell_count()];
        space.mass = space.reaction(&ones)?;
        space.laplace = space.stiffness(&ones)?;
        Ok(space)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn pattern(&self) -> &Arc<SparsePattern> {
        &self.pattern
    }

    pub fn symbolic(&self) -> &Arc<SymbolicCholesky> {
        &self.symbolic
    }

    /// Consistent P1 mass matrix.
    pub fn mass(&self) -> &SymMatrix {
        &self.mass
    }

    /// Stiffness matrix with unit coefficient.
    pub fn laplace(&self) -> &SymMatrix {
        &self.laplace
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }

    /// Number of solver sweeps performed on this space so far.
    pub fn stats(&self) -> SolveStats {
        let c = &self.counters;
        SolveStats {
            neumann: c.neumann.load(Ordering::Relaxed),
            dirichlet: c.dirichlet.load(Ordering::Relaxed),
            adjoint: c.adjoint.load(Ordering::Relaxed),
            factorizations: c.factorizations.load(Ordering::Relaxed),
        }
    }

    pub(crate) fn factor(&self, matrix: &SymMatrix) -> Result<CholeskyFactor> {
        self.counters.factorizations.fetch_add(1, Ordering::Relaxed);
        CholeskyFactor::factor(self.symbolic.clone(), matrix)
    }

    /// Factor of `M/dt + ½K` for the homogeneous background, cached for the
    /// first step size it is requested with.
    pub(crate) fn background_factor(&self, dt: f64) -> Result<BackgroundFactor<'_>> {
        let build =
            || -> Result<CholeskyFactor> { self.factor(&SymMatrix::combine(1.0 / dt, &self.mass, 0.5, &self.laplace)) };
        if let Some((cached_dt, f)) = self.background.get() {
            if *cached_dt == dt {
                return Ok(BackgroundFactor::Cached(f));
            }
            return Ok(BackgroundFactor::Owned(build()?));
        }
        let f = build()?;
        match self.background.set(Box::new((dt, f))) {
            Ok(()) => Ok(BackgroundFactor::Cached(&self.background.get().unwrap().1)),
            Err(boxed) => Ok(BackgroundFactor::Owned(boxed.1)),
        }
    }

    /// Stiffness matrix `∫ a ∇φ_i·∇φ_j` for a positive cellwise coefficient.
    pub fn stiffness(&self, coefficient: &[f64]) -> Result<SymMatrix> {
        check_len("stiffness coefficient", self.mesh.cell_count(), coefficient.len())?;
        let mut m = SymMatrix::zeros(self.pattern.clone());
        for (c, &a) in coefficient.iter().enumerate() {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::Ellipticity { cell: c, value: a });
            }
            self.add_stiffness_cell(&mut m.values, c, a);
        }
        Ok(m)
    }

    /// Reaction matrix `∫ w φ_i φ_j` for a cellwise weight.
    pub fn reaction(&self, weight: &[f64]) -> Result<SymMatrix> {
        check_len("reaction weight", self.mesh.cell_count(), weight.len())?;
        let mut m = SymMatrix::zeros(self.pattern.clone());
        for (c, &w) in weight.iter().enumerate() {
            self.add_reaction_cell(&mut m.values, c, w);
        }
        Ok(m)
    }

    fn add_stiffness_cell(&self, values: &mut [f64], c: usize, a: f64) {
        let g = &self.mesh.gradients[c];
        let scale = a * self.mesh.cell_areas[c];
        let slots = &self.slots[c];
        for i in 0..3 {
            for j in 0..3 {
                values[slots[3 * i + j]] += scale * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
    }

    fn add_reaction_cell(&self, values: &mut [f64], c: usize, w: f64) {
        if w == 0.0 {
            return;
        }
        let scale = w * self.mesh.cell_areas[c] / 12.0;
        let slots = &self.slots[c];
        for i in 0..3 {
            for j in 0..3 {
                values[slots[3 * i + j]] += if i == j { 2.0 * scale } else { scale };
            }
        }
    }

    /// Spatial operator `K(u, y)` collecting stiffness and reaction terms.
    ///
    /// `u` holds the fine-mesh components; power potentials use the weight
    /// `u·|y|^{p−2}` with `|y|^{p−2}` averaged over the cell vertices of
    /// `y_lag`.
    pub fn operator(&self, u: &CellField, ops: &[InhomogeneityOp], y_lag: Option<&[f64]>) -> Result<SymMatrix> {
        let cells = self.mesh.cell_count();
        if !ops.is_empty() {
            check_len("inhomogeneity cells", cells, u.cells)?;
        }
        for op in ops {
            if op.component >= u.components {
                return Err(Error::SizeMismatch {
                    context: "inhomogeneity components",
                    expected: op.component + 1,
                    actual: u.components,
                });
            }
        }
        let mut m = SymMatrix::zeros(self.pattern.clone());
        for c in 0..cells {
            let mut coef = 1.0;
            let mut weight = 0.0;
            for op in ops {
                let v = u.component(op.component)[c];
                match op.kind {
                    InhomogeneityKind::Conductivity => coef += v,
                    InhomogeneityKind::Potential => weight += v,
                    InhomogeneityKind::PowerPotential { p } => {
                        if v != 0.0 {
                            let y = y_lag.unwrap_or(&[]);
                            let tri = self.mesh.triangles[c];
                            let mean = if y.is_empty() {
                                0.0
                            } else {
                                tri.iter().map(|&i| y[i].abs().powf(p - 2.0)).sum::<f64>() / 3.0
                            };
                            weight += v * mean;
                        }
                    }
                }
            }
            if !(coef > 0.0) || !coef.is_finite() {
                return Err(Error::Ellipticity { cell: c, value: coef });
            }
            self.add_stiffness_cell(&mut m.values, c, coef);
            self.add_reaction_cell(&mut m.values, c, weight);
        }
        Ok(m)
    }

    /// Adds `∫ f φ_i` for a cellwise constant `f` to `load`.
    pub fn add_volume_load(&self, f: &[f64], load: &mut [f64]) {
        for ((tri, &area), &v) in self.mesh.triangles.iter().zip(&self.mesh.cell_areas).zip(f) {
            let share = v * area / 3.0;
            for &i in tri {
                load[i] += share;
            }
        }
    }

    /// Adds `∫_Γ g φ_i` for a boundary flux given at boundary vertices
    /// (exact for the piecewise linear interpolant of `g`).
    pub fn add_neumann_load(&self, flux: &[f64], load: &mut [f64]) {
        let m = &self.mesh;
        for (&[a, b], len) in m.boundary_edges.iter().zip(&m.boundary_edge_lengths) {
            let (ga, gb) = (flux[m.boundary_slot[a].unwrap()], flux[m.boundary_slot[b].unwrap()]);
            load[a] += len * (2.0 * ga + gb) / 6.0;
            load[b] += len * (ga + 2.0 * gb) / 6.0;
        }
    }
}

pub(crate) enum BackgroundFactor<'a> {
    Cached(&'a CholeskyFactor),
    Owned(CholeskyFactor),
}

impl core::ops::Deref for BackgroundFactor<'_> {
    type Target = CholeskyFactor;

    fn deref(&self) -> &CholeskyFactor {
        match self {
            Self::Cached(f) => f,
            Self::Owned(f) => f,
        }
    }
}

fn element_slots(mesh: &Mesh, pattern: &SparsePattern) -> Result<Vec<[usize; 9]>> {
    mesh.triangles
        .iter()
        .map(|tri| {
            let mut s = [0usize; 9];
            for i in 0..3 {
                for j in 0..3 {
                    s[3 * i + j] = pattern
                        .find(tri[i], tri[j])
                        .ok_or_else(|| Error::InvalidMesh("edge missing from pattern".into()))?;
                }
            }
            Ok(s)
        })
        .collect()
}

/// P1 mass matrix of `mesh`.
pub fn assemble_mass(mesh: &Mesh) -> Result<SymMatrix> {
    let pattern = Arc::new(SparsePattern::from_neighbors(&mesh.vertex_neighbors()));
    let slots = element_slots(mesh, &pattern)?;
    let mut m = SymMatrix::zeros(pattern);
    for (c, s) in slots.iter().enumerate() {
        let a = mesh.cell_areas[c] / 12.0;
        for i in 0..3 {
            for j in 0..3 {
                m.values[s[3 * i + j]] += if i == j { 2.0 * a } else { a };
            }
        }
    }
    Ok(m)
}

/// P1 stiffness matrix with a positive cellwise coefficient.
pub fn assemble_stiffness(mesh: &Mesh, coefficient: &CellField) -> Result<SymMatrix> {
    let pattern = Arc::new(SparsePattern::from_neighbors(&mesh.vertex_neighbors()));
    let slots = element_slots(mesh, &pattern)?;
    check_len("stiffness coefficient", mesh.cell_count(), coefficient.cells)?;
    let mut m = SymMatrix::zeros(pattern);
    for (c, s) in slots.iter().enumerate() {
        let a = coefficient.values[c];
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Ellipticity { cell: c, value: a });
        }
        let g = &mesh.gradients[c];
        let scale = a * mesh.cell_areas[c];
        for i in 0..3 {
            for j in 0..3 {
                m.values[s[3 * i + j]] += scale * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
    }
    Ok(m)
}

/// P1 reaction matrix `∫ w φ_i φ_j` with a cellwise weight.
pub fn assemble_reaction(mesh: &Mesh, weight: &CellField) -> Result<SymMatrix> {
    let pattern = Arc::new(SparsePattern::from_neighbors(&mesh.vertex_neighbors()));
    let slots = element_slots(mesh, &pattern)?;
    check_len("reaction weight", mesh.cell_count(), weight.cells)?;
    let mut m = SymMatrix::zeros(pattern);
    for (c, s) in slots.iter().enumerate() {
        let a = weight.values[c] * mesh.cell_areas[c] / 12.0;
        for i in 0..3 {
            for j in 0..3 {
                m.values[s[3 * i + j]] += if i == j { 2.0 * a } else { a };
            }
        }
    }
    Ok(m)
}

/// Load vector `∫_Γ g φ_i` for a flux given at the boundary vertices.
pub fn assemble_neumann_load(mesh: &Mesh, flux: &[f64]) -> Result<Vec<f64>> {
    check_len("boundary flux", mesh.boundary_count(), flux.len())?;
    let mut load = vec![0.0; mesh.vertex_count()];
    for (&[a, b], len) in mesh.boundary_edges.iter().zip(&mesh.boundary_edge_lengths) {
        let (ga, gb) = (
            flux[mesh.boundary_slot[a].unwrap()],
            flux[mesh.boundary_slot[b].unwrap()],
        );
        load[a] += len * (2.0 * ga + gb) / 6.0;
        load[b] += len * (ga + 2.0 * gb) / 6.0;
    }
    Ok(load)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;
    use core::f64::consts::PI;

    fn ones(n: usize) -> Vec<f64> {
        vec![1.0; n]
    }

    #[test]
    fn mass_matches_area() {
        let mesh = build_disk_mesh(7002).unwrap();
        let m = assemble_mass(&mesh).unwrap();
        let one = ones(mesh.vertex_count());
        assert!((m.bilinear(&one, &one) - PI).abs() / PI < 5e-3);
        assert_eq!(m.asymmetry(), 0.0);
        let c = vec![2.5; mesh.vertex_count()];
        assert!((m.bilinear(&c, &c) - 6.25 * PI).abs() / (6.25 * PI) < 5e-3);
        // exact against the polygon area
        assert!((m.bilinear(&one, &one) - mesh.total_area()).abs() < 1e-12);
    }

    #[test]
    fn stiffness_properties() {
        let mesh = build_disk_mesh(7002).unwrap();
        let a = assemble_stiffness(&mesh, &CellField::constant(1, mesh.cell_count(), 1.0)).unwrap();
        let x1: Vec<f64> = mesh.vertices.iter().map(|v| v[0]).collect();
        assert!((a.bilinear(&x1, &x1) - PI).abs() / PI < 0.01);
        let mut r = vec![0.0; mesh.vertex_count()];
        a.mul_vec(&vec![3.0; mesh.vertex_count()], &mut r);
        assert!(r.iter().all(|v| v.abs() < 1e-12));
        assert!(a.asymmetry() < 1e-15);
        let a2 = assemble_stiffness(&mesh, &CellField::constant(1, mesh.cell_count(), 2.0)).unwrap();
        for (x, y) in a.values.iter().zip(&a2.values) {
            assert!((2.0 * x - y).abs() <= 1e-14 * y.abs().max(1.0));
        }
    }

    #[test]
    fn stiffness_rejects_nonpositive_coefficient() {
        let mesh = build_disk_mesh(100).unwrap();
        let mut coef = CellField::constant(1, mesh.cell_count(), 1.0);
        coef.values[7] = 0.0;
        assert_eq!(
            assemble_stiffness(&mesh, &coef).unwrap_err(),
            Error::Ellipticity { cell: 7, value: 0.0 }
        );
    }

    #[test]
    fn reaction_matches_mass() {
        let mesh = build_disk_mesh(1120).unwrap();
        let w = assemble_reaction(&mesh, &CellField::constant(1, mesh.cell_count(), 1.0)).unwrap();
        let m = assemble_mass(&mesh).unwrap();
        for (x, y) in w.values.iter().zip(&m.values) {
            assert!((x - y).abs() < 1e-12);
        }
        let zero = assemble_reaction(&mesh, &CellField::zeros(1, mesh.cell_count())).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
        let half: Vec<f64> = (0..mesh.cell_count()).map(|c| (c % 2) as f64).collect();
        let expected: f64 = mesh.cell_areas.iter().skip(1).step_by(2).sum();
        let wh = assemble_reaction(&mesh, &CellField::scalar(half)).unwrap();
        let one = ones(mesh.vertex_count());
        assert!((wh.bilinear(&one, &one) - expected).abs() < 1e-12);
    }

    #[test]
    fn neumann_load_integrals() {
        let mesh = build_disk_mesh(7002).unwrap();
        let nb = mesh.boundary_count();
        let sum = |l: Vec<f64>| l.iter().sum::<f64>();
        let total = sum(assemble_neumann_load(&mesh, &ones(nb)).unwrap());
        assert!((total - 2.0 * PI).abs() / (2.0 * PI) < 5e-3);
        assert!(assemble_neumann_load(&mesh, &vec![0.0; nb])
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let x1: Vec<f64> = mesh.boundary_vertices.iter().map(|&v| mesh.vertices[v][0]).collect();
        assert!(sum(assemble_neumann_load(&mesh, &x1).unwrap()).abs() < 1e-3);
        assert!(assemble_neumann_load(&mesh, &[1.0]).is_err());
    }

    #[test]
    fn space_operator_combines_terms() {
        let mesh = build_disk_mesh(600).unwrap();
        let space = FemSpace::new(mesh).unwrap();
        let n = space.mesh().cell_count();
        let mut u = CellField::zeros(2, n);
        u.component_mut(0).iter_mut().for_each(|v| *v = -0.5);
        u.component_mut(1).iter_mut().for_each(|v| *v = 4.0);
        let ops = [InhomogeneityOp::conductivity(0), InhomogeneityOp::potential(1)];
        let k = space.operator(&u, &ops, None).unwrap();
        let mut expected = SymMatrix::combine(0.5, space.laplace(), 4.0, space.mass());
        expected.add_scaled(-1.0, &k);
        assert!(expected.values.iter().all(|v| v.abs() < 1e-12));
        u.component_mut(0)[3] = -1.0;
        assert!(matches!(
            space.operator(&u, &ops, None),
            Err(Error::Ellipticity { cell: 3, .. })
        ));
    }

    #[test]
    fn power_potential_weight_uses_lagged_state() {
        let mesh = build_disk_mesh(300).unwrap();
        let space = FemSpace::new(mesh).unwrap();
        let u = CellField::constant(1, space.mesh().cell_count(), 2.0);
        let ops = [InhomogeneityOp::power_potential(0, 3.0).unwrap()];
        let y = vec![-1.5; space.mesh().vertex_count()];
        let k = space.operator(&u, &ops, Some(&y)).unwrap();
        let mut expected = SymMatrix::combine(1.0, space.laplace(), 3.0, space.mass());
        expected.add_scaled(-1.0, &k);
        assert!(expected.values.iter().all(|v| v.abs() < 1e-12));
    }
}
