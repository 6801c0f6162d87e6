use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::UpdateScheme;
use crate::error::{check_len, Error, Result};
use crate::field::SpaceTimeField;
use crate::mesh::Mesh;

/// Parameters of the resolver kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    /// Exponent of the boundary-distance weight.
    pub nu: f64,
    /// Cells closer to the boundary than this get zero weight.
    pub cutoff: f64,
    /// Maximum number of low-rank terms kept.
    pub rank_cap: usize,
    /// Factor applied to every low-rank coefficient between segments.
    pub damping: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            nu: 1.4,
            cutoff: 0.05,
            rank_cap: 24,
            damping: 0.6,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            return Err(Error::Config(alloc::format!(
                "kernel exponent {} must be non-negative",
                self.nu
            )));
        }
        if !(self.cutoff >= 0.0 && self.cutoff < 1.0) {
            return Err(Error::Config(alloc::format!(
                "cutoff {} must lie in [0, 1)",
                self.cutoff
            )));
        }
        if self.rank_cap < 3 {
            return Err(Error::Config(alloc::format!("rank cap {} is below 3", self.rank_cap)));
        }
        if !(self.damping >= 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(alloc::format!(
                "damping {} must lie in [0, 1]",
                self.damping
            )));
        }
        Ok(())
    }
}

/// Piecewise-constant space-time inner product: coarse cell areas times
/// trapezoid time weights, summed over components.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeInner {
    pub areas: Vec<f64>,
    pub time_weights: Vec<f64>,
    pub components: usize,
}

impl SpaceTimeInner {
    pub fn new(areas: Vec<f64>, time_weights: Vec<f64>, components: usize) -> Self {
        Self {
            areas,
            time_weights,
            components,
        }
    }

    pub fn zeros(&self) -> SpaceTimeField {
        SpaceTimeField::zeros(self.time_weights.len(), self.components, self.areas.len())
    }

    pub fn check(&self, field: &SpaceTimeField) -> Result<()> {
        check_len("space-time nodes", self.time_weights.len(), field.nodes)?;
        check_len("space-time components", self.components, field.components)?;
        check_len("space-time cells", self.areas.len(), field.cells)
    }

    pub fn inner(&self, a: &SpaceTimeField, b: &SpaceTimeField) -> f64 {
        let mut total = 0.0;
        for (node, w) in self.time_weights.iter().enumerate() {
            let mut slice = 0.0;
            for l in 0..self.components {
                slice += a
                    .component_at(node, l)
                    .iter()
                    .zip(b.component_at(node, l))
                    .zip(&self.areas)
                    .map(|((x, y), s)| x * y * s)
                    .sum::<f64>();
            }
            total += w * slice;
        }
        total
    }

    pub fn norm(&self, a: &SpaceTimeField) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }
}

/// One rank-one term `coef · ⟨n, ·⟩ m`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTerm {
    pub coef: f64,
    /// Coefficient at creation, the reference for pruning after damping.
    pub birth: f64,
    pub m: Arc<SpaceTimeField>,
    pub n: Arc<SpaceTimeField>,
    /// Terms created by the same update share a group id.
    pub group: u64,
}

/// Result of a quasi-Newton update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateOutcome {
    Applied {
        pruned: usize,
    },
    /// Curvature too small relative to the norms involved.
    Skipped {
        curvature: f64,
    },
}

/// Resolver kernel `R = D + Σ coef · m ⊗ n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolverKernel {
    config: KernelConfig,
    inner: SpaceTimeInner,
    base: Vec<f64>,
    scale: Vec<f64>,
    terms: Vec<KernelTerm>,
    next_group: u64,
}

const CURVATURE_GUARD: f64 = 1e-12;
const PRUNE_RATIO: f64 = 1e-8;
const RESCALE_FLOOR: f64 = 1e-14;

impl ResolverKernel {
    /// Kernel with diagonal part `d^ν · χ(d ≥ cutoff)` from the centroid
    /// distance to the boundary of `coarse`.
    pub fn new(coarse: &Mesh, config: KernelConfig, inner: SpaceTimeInner) -> Result<Self> {
        config.validate()?;
        check_len("kernel cells", coarse.cell_count(), inner.areas.len())?;
        let base = coarse
            .boundary_distance()
            .values
            .iter()
            .map(|&d| if d >= config.cutoff { d.powf(config.nu) } else { 0.0 })
            .collect();
        Ok(Self::with_base(config, inner, base))
    }

    /// Kernel with an explicit diagonal shape.
    pub fn with_base(config: KernelConfig, inner: SpaceTimeInner, base: Vec<f64>) -> Self {
        let scale = vec![1.0; inner.components];
        Self {
            config,
            inner,
            base,
            scale,
            terms: Vec::new(),
            next_group: 0,
        }
    }

    /// Restores a kernel from checkpointed state.
    pub fn from_parts(
        coarse: &Mesh,
        config: KernelConfig,
        inner: SpaceTimeInner,
        scale: Vec<f64>,
        terms: Vec<KernelTerm>,
    ) -> Result<Self> {
        let mut k = Self::new(coarse, config, inner)?;
        check_len("kernel scale", k.inner.components, scale.len())?;
        for t in &terms {
            k.inner.check(&t.m)?;
            k.inner.check(&t.n)?;
        }
        k.next_group = terms.iter().map(|t| t.group + 1).max().unwrap_or(0);
        k.scale = scale;
        k.terms = terms;
        Ok(k)
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    pub fn inner_product(&self) -> &SpaceTimeInner {
        &self.inner
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// Per-component multiplier of the diagonal part.
    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn terms(&self) -> &[KernelTerm] {
        &self.terms
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    pub fn inner(&self, a: &SpaceTimeField, b: &SpaceTimeField) -> f64 {
        self.inner.inner(a, b)
    }

    pub fn norm(&self, a: &SpaceTimeField) -> f64 {
        self.inner.norm(a)
    }

    /// Diagonal part only.
    pub fn apply_diagonal(&self, zeta: &SpaceTimeField) -> Result<SpaceTimeField> {
        self.inner.check(zeta)?;
        let mut out = zeta.clone();
        for node in 0..zeta.nodes {
            for (l, s) in self.scale.iter().enumerate() {
                for (v, b) in out.component_at_mut(node, l).iter_mut().zip(&self.base) {
                    *v *= s * b;
                }
            }
        }
        Ok(out)
    }

    /// `R ζ`.
    pub fn apply(&self, zeta: &SpaceTimeField) -> Result<SpaceTimeField> {
        let mut out = self.apply_diagonal(zeta)?;
        for t in &self.terms {
            let c = t.coef * self.inner.inner(&t.n, zeta);
            if c != 0.0 {
                out.axpy(c, &t.m);
            }
        }
        Ok(out)
    }

    /// Rescales the diagonal so that `‖u_l‖ = ‖D_l ζ̂_l‖` (area-weighted L¹)
    /// at time node `node`, per component. Components whose reference is
    /// numerically zero keep their scale. Returns the new scales.
    pub fn rescale(&mut self, u: &SpaceTimeField, zeta_hat: &SpaceTimeField, node: usize) -> Result<&[f64]> {
        self.inner.check(u)?;
        self.inner.check(zeta_hat)?;
        if node >= u.nodes {
            return Err(Error::Config(alloc::format!("rescale node {node} out of range")));
        }
        let areas = &self.inner.areas;
        for l in 0..self.inner.components {
            let num: f64 = u
                .component_at(node, l)
                .iter()
                .zip(areas)
                .map(|(v, a)| v.abs() * a)
                .sum();
            let den: f64 = zeta_hat
                .component_at(node, l)
                .iter()
                .zip(&self.base)
                .zip(areas)
                .map(|((z, b), a)| (z * b).abs() * a)
                .sum();
            if den > RESCALE_FLOOR {
                self.scale[l] = num / den;
                if num == 0.0 {
                    log::debug!("component {l}: empty first estimate zeroes the kernel diagonal");
                }
            } else {
                log::debug!("component {l}: rescale skipped, reference norm {den:e}");
            }
        }
        Ok(&self.scale)
    }

    pub fn set_scale(&mut self, scale: &[f64]) -> Result<()> {
        check_len("kernel scale", self.scale.len(), scale.len())?;
        self.scale.copy_from_slice(scale);
        Ok(())
    }

    /// Quasi-Newton update enforcing the secant condition `R⁺ ζ̂ = η̂`.
    pub fn update(
        &mut self,
        scheme: UpdateScheme,
        zeta_hat: &SpaceTimeField,
        eta_hat: &SpaceTimeField,
    ) -> Result<UpdateOutcome> {
        match scheme {
            UpdateScheme::Dfp => self.update_dfp(zeta_hat, eta_hat),
            UpdateScheme::Bfg => self.update_bfg(zeta_hat, eta_hat),
        }
    }

    /// `R⁺ = R + η̂⊗η̂/(ζ̂,η̂) − Rζ̂⊗Rζ̂/(ζ̂,Rζ̂)`.
    pub fn update_dfp(&mut self, zeta_hat: &SpaceTimeField, eta_hat: &SpaceTimeField) -> Result<UpdateOutcome> {
        self.inner.check(zeta_hat)?;
        self.inner.check(eta_hat)?;
        let nz = self.norm(zeta_hat);
        let s = self.inner(zeta_hat, eta_hat);
        if s.abs() <= CURVATURE_GUARD * nz * self.norm(eta_hat) || s == 0.0 {
            return Ok(UpdateOutcome::Skipped { curvature: s });
        }
        let pruned = self.make_room(2);
        let r_zeta = self.apply(zeta_hat)?;
        let q = self.inner(zeta_hat, &r_zeta);
        if q.abs() <= CURVATURE_GUARD * nz * self.norm(&r_zeta) || q == 0.0 {
            return Ok(UpdateOutcome::Skipped { curvature: q });
        }
        let eta = Arc::new(eta_hat.clone());
        let rz = Arc::new(r_zeta);
        let g = self.new_group();
        self.push(1.0 / s, eta.clone(), eta, g);
        self.push(-1.0 / q, rz.clone(), rz, g);
        Ok(UpdateOutcome::Applied { pruned })
    }

    /// `R⁺ = R + (1 + (ζ̂,Rζ̂)/s)/s · η̂⊗η̂ − (η̂⊗Rζ̂ + Rζ̂⊗η̂)/s` with
    /// `s = (ζ̂,η̂)`.
    pub fn update_bfg(&mut self, zeta_hat: &SpaceTimeField, eta_hat: &SpaceTimeField) -> Result<UpdateOutcome> {
        self.inner.check(zeta_hat)?;
        self.inner.check(eta_hat)?;
        let s = self.inner(zeta_hat, eta_hat);
        if s.abs() <= CURVATURE_GUARD * self.norm(zeta_hat) * self.norm(eta_hat) || s == 0.0 {
            return Ok(UpdateOutcome::Skipped { curvature: s });
        }
        let pruned = self.make_room(3);
        let r_zeta = self.apply(zeta_hat)?;
        let q = self.inner(zeta_hat, &r_zeta);
        let eta = Arc::new(eta_hat.clone());
        let rz = Arc::new(r_zeta);
        let g = self.new_group();
        self.push((1.0 + q / s) / s, eta.clone(), eta.clone(), g);
        self.push(-1.0 / s, eta.clone(), rz.clone(), g);
        self.push(-1.0 / s, rz, eta, g);
        Ok(UpdateOutcome::Applied { pruned })
    }

    /// Multiplies every low-rank coefficient by the damping factor and drops
    /// terms that have decayed below `1e-8` of their initial size.
    pub fn damp(&mut self) -> usize {
        let lambda = self.config.damping;
        let before = self.terms.len();
        for t in &mut self.terms {
            t.coef *= lambda;
        }
        // groups are dropped whole so the remaining kernel stays symmetric
        let dead: Vec<u64> = self
            .terms
            .iter()
            .filter(|t| t.coef.abs() < PRUNE_RATIO * t.birth.abs())
            .map(|t| t.group)
            .collect();
        self.terms.retain(|t| !dead.contains(&t.group));
        before - self.terms.len()
    }

    fn new_group(&mut self) -> u64 {
        let g = self.next_group;
        self.next_group += 1;
        g
    }

    fn push(&mut self, coef: f64, m: Arc<SpaceTimeField>, n: Arc<SpaceTimeField>, group: u64) {
        self.terms.push(KernelTerm {
            coef,
            birth: coef,
            m,
            n,
            group,
        });
    }

    /// Drops the oldest groups until `incoming` more terms fit.
    fn make_room(&mut self, incoming: usize) -> usize {
        let mut dropped = 0;
        while !self.terms.is_empty() && self.terms.len() + incoming > self.config.rank_cap {
            let g = self.terms[0].group;
            let before = self.terms.len();
            self.terms.retain(|t| t.group != g);
            dropped += before - self.terms.len();
        }
        dropped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kernel(cells: usize, nodes: usize, comps: usize, rank_cap: usize) -> ResolverKernel {
        let areas: Vec<f64> = (0..cells).map(|c| 0.5 + 0.1 * c as f64).collect();
        let tw = vec![0.1; nodes];
        let base = (0..cells).map(|c| 0.2 + 0.3 * ((c * 7) % 5) as f64).collect();
        let cfg = KernelConfig {
            rank_cap,
            ..KernelConfig::default()
        };
        ResolverKernel::with_base(cfg, SpaceTimeInner::new(areas, tw, comps), base)
    }

    fn field(k: &ResolverKernel, v: &[f64]) -> SpaceTimeField {
        let mut f = k.inner_product().zeros();
        let n = f.data.len();
        f.data.copy_from_slice(&v[..n]);
        f
    }

    fn vals(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0..1.0f64, n)
    }

    // 6 cells × 3 nodes × 2 components
    const LEN: usize = 36;

    #[test]
    fn diagonal_acts_pointwise() {
        let k = kernel(4, 2, 1, 24);
        let z = field(&k, &[1.0; 8]);
        let r = k.apply(&z).unwrap();
        assert_eq!(r.component_at(1, 0), k.base());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let k = kernel(4, 2, 1, 24);
        assert!(k.apply(&SpaceTimeField::zeros(3, 1, 4)).is_err());
    }

    #[test]
    fn disk_weight_vanishes_near_boundary() {
        let mesh = crate::mesh::build_disk_mesh(600).unwrap();
        let inner = SpaceTimeInner::new(mesh.cell_areas.clone(), vec![1.0], 1);
        let k = ResolverKernel::new(&mesh, KernelConfig::default(), inner).unwrap();
        let d = mesh.boundary_distance();
        for (b, d) in k.base().iter().zip(&d.values) {
            if *d < 0.05 {
                assert_eq!(*b, 0.0);
            } else {
                assert!((b - d.powf(1.4)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rescale_matches_l1_ratio() {
        let mut k = kernel(4, 3, 1, 24);
        let z = field(&k, &[1.0; 12]);
        let mut u = k.inner_product().zeros();
        u.component_at_mut(1, 0).copy_from_slice(&[-0.5, -0.5, 0.0, 0.0]);
        k.rescale(&u, &z, 1).unwrap();
        let dz = k.apply(&z).unwrap();
        let l1 = |f: &[f64]| {
            f.iter()
                .zip(&k.inner_product().areas)
                .map(|(v, a)| v.abs() * a)
                .sum::<f64>()
        };
        assert!((l1(dz.component_at(1, 0)) - l1(u.component_at(1, 0))).abs() < 1e-14);
        // zero reference leaves the scale alone
        let before = k.scale().to_vec();
        k.rescale(&u, &k.inner_product().zeros(), 1).unwrap();
        assert_eq!(k.scale(), &before[..]);
    }

    #[test]
    fn damping_decays_and_prunes() {
        let mut k = kernel(6, 3, 2, 24);
        let z = field(&k, &[0.3; LEN]);
        let e = field(&k, &[0.7; LEN]);
        k.update_dfp(&z, &e).unwrap();
        let c0 = k.terms()[0].coef;
        k.damp();
        assert!((k.terms()[0].coef - 0.6 * c0).abs() < 1e-15 * c0.abs());
        let mut steps = 1;
        while k.rank() > 0 {
            k.damp();
            steps += 1;
        }
        // 0.6^n < 1e-8 first at n = 37
        assert_eq!(steps, 37);
    }

    #[test]
    fn consistent_pair_leaves_action_unchanged() {
        for scheme in [UpdateScheme::Dfp, UpdateScheme::Bfg] {
            let mut k = kernel(6, 3, 2, 24);
            let z: Vec<f64> = (0..LEN).map(|j| 0.1 + (j % 5) as f64).collect();
            let z = field(&k, &z);
            let before = k.apply(&z).unwrap();
            k.update(scheme, &z, &before).unwrap();
            let mut d = k.apply(&z).unwrap();
            d.axpy(-1.0, &before);
            assert!(d.max_abs() <= 1e-12 * before.max_abs());
        }
    }

    #[test]
    fn damping_scales_low_rank_part_only() {
        let mut k = kernel(6, 3, 2, 24);
        let z: Vec<f64> = (0..LEN).map(|j| ((j * 7) % 11) as f64 / 11.0 - 0.3).collect();
        let e: Vec<f64> = (0..LEN).map(|j| ((j * 3) % 5) as f64 / 5.0 + 0.1).collect();
        let (z, e) = (field(&k, &z), field(&k, &e));
        k.update_bfg(&z, &e).unwrap();
        let probe = field(&k, &[0.4; LEN]);
        let diag = k.apply_diagonal(&probe).unwrap();
        let low = |k: &ResolverKernel| {
            let mut r = k.apply(&probe).unwrap();
            r.axpy(-1.0, &diag);
            r
        };
        let l0 = low(&k);
        k.damp();
        k.damp();
        let l2 = low(&k);
        assert_eq!(k.apply_diagonal(&probe).unwrap(), diag);
        for (a, b) in l2.data.iter().zip(&l0.data) {
            assert!((a - 0.36 * b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn rescale_is_homogeneous() {
        let mut k = kernel(4, 3, 1, 24);
        let z = field(&k, &[0.5, -1.0, 2.0, 0.25, 0.5, -1.0, 2.0, 0.25, 0.5, -1.0, 2.0, 0.25]);
        let dz = k.apply(&z).unwrap();
        k.rescale(&dz, &z, 1).unwrap();
        assert!((k.scale()[0] - 1.0).abs() < 1e-14);
        let mut twice = dz.clone();
        twice.scale(2.0);
        k.rescale(&twice, &z, 1).unwrap();
        assert!((k.scale()[0] - 2.0).abs() < 1e-14);
        k.rescale(&k.inner_product().zeros(), &z, 1).unwrap();
        assert_eq!(k.scale()[0], 0.0);
    }

    #[test]
    fn rank_cap_drops_oldest_groups() {
        let mut k = kernel(6, 3, 2, 7);
        for i in 0..5 {
            let z: Vec<f64> = (0..LEN).map(|j| ((i * 13 + j * 7) % 11) as f64 / 11.0 + 0.1).collect();
            let e: Vec<f64> = (0..LEN).map(|j| ((i * 5 + j * 3) % 7) as f64 / 7.0 + 0.2).collect();
            let (z, e) = (field(&k, &z), field(&k, &e));
            assert!(matches!(k.update_bfg(&z, &e).unwrap(), UpdateOutcome::Applied { .. }));
            assert!(k.rank() <= 7);
            assert_eq!(k.terms().last().unwrap().group, i as u64);
            let r = k.apply(&z).unwrap();
            let mut d = r.clone();
            d.axpy(-1.0, &e);
            assert!(k.norm(&d) <= 1e-8 * k.norm(&e));
        }
        assert_eq!(k.rank(), 6);
    }

    #[test]
    fn orthogonal_pair_is_skipped() {
        let mut k = kernel(2, 1, 1, 24);
        let z = field(&k, &[1.0, 0.0]);
        let e = field(&k, &[0.0, 1.0]);
        assert!(matches!(k.update_dfp(&z, &e).unwrap(), UpdateOutcome::Skipped { .. }));
        assert!(matches!(k.update_bfg(&z, &e).unwrap(), UpdateOutcome::Skipped { .. }));
        assert_eq!(k.rank(), 0);
    }

    proptest! {
        #[test]
        fn secant_and_symmetry(z in vals(LEN), e in vals(LEN), a in vals(LEN), b in vals(LEN), bfg in any::<bool>()) {
            let mut k = kernel(6, 3, 2, 24);
            let (z, e) = (field(&k, &z), field(&k, &e));
            let s = k.inner(&z, &e);
            prop_assume!(s.abs() > 1e-3 * k.norm(&z) * k.norm(&e));
            let out = if bfg { k.update_bfg(&z, &e) } else { k.update_dfp(&z, &e) }.unwrap();
            prop_assume!(matches!(out, UpdateOutcome::Applied { .. }));
            let r = k.apply(&z).unwrap();
            let mut d = r.clone();
            d.axpy(-1.0, &e);
            prop_assert!(k.norm(&d) <= 1e-8 * k.norm(&e).max(1e-300));
            let (a, b) = (field(&k, &a), field(&k, &b));
            let lhs = k.inner(&k.apply(&a).unwrap(), &b);
            let rhs = k.inner(&a, &k.apply(&b).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }

        #[test]
        fn apply_is_linear(a in vals(LEN), b in vals(LEN), z in vals(LEN), e in vals(LEN), s in -3.0..3.0f64) {
            let mut k = kernel(6, 3, 2, 24);
            let (z, e) = (field(&k, &z), field(&k, &e));
            let _ = k.update_bfg(&z, &e).unwrap();
            let (a, b) = (field(&k, &a), field(&k, &b));
            let mut comb = a.clone();
            comb.axpy(s, &b);
            let mut expect = k.apply(&a).unwrap();
            expect.axpy(s, &k.apply(&b).unwrap());
            let mut d = k.apply(&comb).unwrap();
            d.axpy(-1.0, &expect);
            prop_assert!(d.max_abs() <= 1e-10 * (1.0 + expect.max_abs()));
        }
    }
}
