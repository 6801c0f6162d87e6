//! Ground-truth moving inclusions, projection bounds and source data.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fem::{Forcing, InhomogeneityKind, InhomogeneityOp};
use crate::field::{CellField, NodalField};
use crate::idsm::UpdateScheme;
use crate::mesh::Mesh;

/// Lower limit of `1 + u` for conductivity components.
pub const ELLIPTICITY_MARGIN: f64 = 0.01;

/// Number of instants on which construction-time checks are evaluated.
pub const CHECK_POINTS: usize = 1001;

/// A disk of radius `r(t)` centered at `γ(t)` carrying the value `p(t)` in
/// one component of `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Inclusion {
    pub radius: Expr,
    pub center: [Expr; 2],
    pub contrast: Expr,
    pub component: usize,
}

impl Inclusion {
    pub fn new(radius: &str, center: [&str; 2], contrast: &str, component: usize) -> Result<Self> {
        Ok(Self {
            radius: Expr::parse(radius)?,
            center: [Expr::parse(center[0])?, Expr::parse(center[1])?],
            contrast: Expr::parse(contrast)?,
            component,
        })
    }

    pub fn center_at(&self, t: f64) -> [f64; 2] {
        [self.center[0].eval(t), self.center[1].eval(t)]
    }

    pub fn radius_at(&self, t: f64) -> f64 {
        self.radius.eval(t).max(0.0)
    }

    /// Whether the inclusion has a nonzero footprint at `t`.
    pub fn is_present(&self, t: f64) -> bool {
        self.radius_at(t) > 0.0 && self.contrast.eval(t) != 0.0
    }

    pub fn contains(&self, p: [f64; 2], t: f64) -> bool {
        let [cx, cy] = self.center_at(t);
        let r = self.radius_at(t);
        (p[0] - cx).powi(2) + (p[1] - cy).powi(2) < r * r
    }
}

/// Admissible interval of one component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::Config(format!("bounds need lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.lo).min(self.hi)
    }
}

/// Source term `f`, boundary flux `g` and initial value `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceSet {
    /// `f = 25 sin(tπ/4) sin(3x) cos(4y)`, `h = 3 + sin(3x) cos(4y)` and `g`
    /// the normal derivative of `cos(tπ/6) sin(3x) cos(4y)`.
    Standard,
    /// `f = 0`, `g = 0`, `h = 1`.
    Homogeneous,
}

impl SourceSet {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "standard" => Ok(Self::Standard),
            "homogeneous" => Ok(Self::Homogeneous),
            _ => Err(Error::Config(format!("unknown source set `{name}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Standard => "standard",
            Self::Homogeneous => "homogeneous",
        }
    }

    pub fn f(&self, [x, y]: [f64; 2], t: f64) -> f64 {
        match self {
            Self::Standard => 25.0 * (t * core::f64::consts::PI / 4.0).sin() * (3.0 * x).sin() * (4.0 * y).cos(),
            Self::Homogeneous => 0.0,
        }
    }

    /// Flux at a boundary point, with the outward normal taken as the
    /// normalized position.
    pub fn g(&self, [x, y]: [f64; 2], t: f64) -> f64 {
        match self {
            Self::Standard => {
                let r = (x * x + y * y).sqrt();
                let (nx, ny) = (x / r, y / r);
                (t * core::f64::consts::PI / 6.0).cos()
                    * (3.0 * (3.0 * x).cos() * (4.0 * y).cos() * nx - 4.0 * (3.0 * x).sin() * (4.0 * y).sin() * ny)
            }
            Self::Homogeneous => 0.0,
        }
    }

    pub fn h(&self, [x, y]: [f64; 2]) -> f64 {
        match self {
            Self::Standard => 3.0 + (3.0 * x).sin() * (4.0 * y).cos(),
            Self::Homogeneous => 1.0,
        }
    }

    /// `h` at every vertex.
    pub fn initial_state(&self, mesh: &Mesh) -> NodalField {
        NodalField {
            values: mesh.vertices.iter().map(|&p| self.h(p)).collect(),
        }
    }

    pub fn forcing(&self, mesh: &Mesh) -> SourceForcing {
        SourceForcing {
            set: *self,
            centroids: mesh.centroids(),
            boundary: mesh.boundary_vertices.iter().map(|&v| mesh.vertices[v]).collect(),
        }
    }
}

/// [`SourceSet`] sampled at the centroids and boundary vertices of a mesh.
#[derive(Debug, Clone)]
pub struct SourceForcing {
    set: SourceSet,
    centroids: Vec<[f64; 2]>,
    boundary: Vec<[f64; 2]>,
}

impl Forcing for SourceForcing {
    fn volume(&self, t: f64, out: &mut [f64]) -> bool {
        if self.set == SourceSet::Homogeneous {
            return false;
        }
        for (o, &p) in out.iter_mut().zip(&self.centroids) {
            *o = self.set.f(p, t);
        }
        true
    }

    fn flux(&self, t: f64, out: &mut [f64]) -> bool {
        if self.set == SourceSet::Homogeneous {
            return false;
        }
        for (o, &p) in out.iter_mut().zip(&self.boundary) {
            *o = self.set.g(p, t);
        }
        true
    }
}

/// A complete benchmark: inclusions, equation structure, bounds, sources and
/// the default reconstruction settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub inclusions: Vec<Inclusion>,
    pub ops: Vec<InhomogeneityOp>,
    pub bounds: Vec<Bounds>,
    pub horizon: f64,
    pub sources: SourceSet,
    pub scheme: UpdateScheme,
    pub tolerance: f64,
}

impl Scenario {
    /// Validates the description; see [`check`](Self::check).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        inclusions: Vec<Inclusion>,
        ops: Vec<InhomogeneityOp>,
        bounds: Vec<Bounds>,
        horizon: f64,
        sources: SourceSet,
        scheme: UpdateScheme,
        tolerance: f64,
    ) -> Result<Self> {
        let s = Self {
            name: name.to_string(),
            inclusions,
            ops,
            bounds,
            horizon,
            sources,
            scheme,
            tolerance,
        };
        s.check()?;
        Ok(s)
    }

    pub fn components(&self) -> usize {
        self.ops.len()
    }

    /// Structural checks, then boundary clearance and same-component
    /// overlap on a uniform grid of [`CHECK_POINTS`] instants.
    pub fn check(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.ops.is_empty() {
            return Err(Error::Config("at least one inhomogeneity type is required".into()));
        }
        crate::error::check_len("bounds per component", self.ops.len(), self.bounds.len())?;
        for (l, op) in self.ops.iter().enumerate() {
            if op.component != l {
                return Err(Error::Config(format!("operator {l} must feed component {l}")));
            }
            let b = self.bounds[l];
            if !(b.lo < b.hi) {
                return Err(Error::Config(format!("component {l}: bounds need lo < hi")));
            }
            if op.kind == InhomogeneityKind::Conductivity && b.lo < -1.0 + ELLIPTICITY_MARGIN - 1e-12 {
                return Err(Error::Config(format!(
                    "component {l}: conductivity lower bound {} leaves 1 + u below {ELLIPTICITY_MARGIN}",
                    b.lo
                )));
            }
        }
        for (j, inc) in self.inclusions.iter().enumerate() {
            if inc.component >= self.ops.len() {
                return Err(Error::Config(format!(
                    "inclusion {j} feeds component {} of {}",
                    inc.component,
                    self.ops.len()
                )));
            }
        }
        for i in 0..CHECK_POINTS {
            let t = self.horizon * i as f64 / (CHECK_POINTS - 1) as f64;
            for (j, inc) in self.inclusions.iter().enumerate() {
                if inc.is_present(t) {
                    let [x, y] = inc.center_at(t);
                    if !((x * x + y * y).sqrt() + inc.radius_at(t) < 1.0) {
                        return Err(Error::Clearance { index: j, t });
                    }
                }
            }
            self.check_overlap(t)?;
        }
        Ok(())
    }

    /// Rejects same-component inclusions that intersect at `t` with
    /// different contrasts. Equal contrasts merge.
    fn check_overlap(&self, t: f64) -> Result<()> {
        for (a, ia) in self.inclusions.iter().enumerate() {
            if !ia.is_present(t) {
                continue;
            }
            for (b, ib) in self.inclusions.iter().enumerate().skip(a + 1) {
                if ib.component != ia.component || !ib.is_present(t) {
                    continue;
                }
                let (ca, cb) = (ia.center_at(t), ib.center_at(t));
                let d = ((ca[0] - cb[0]).powi(2) + (ca[1] - cb[1]).powi(2)).sqrt();
                let (pa, pb) = (ia.contrast.eval(t), ib.contrast.eval(t));
                if d < ia.radius_at(t) + ib.radius_at(t) && (pa - pb).abs() > 1e-12 * pa.abs().max(pb.abs()) {
                    return Err(Error::Overlap {
                        first: a,
                        second: b,
                        component: ia.component,
                        t,
                    });
                }
            }
        }
        Ok(())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t < -1e-9 || t > self.horizon * (1.0 + 1e-12) + 1e-9 {
            return Err(Error::OutOfHorizon {
                t,
                start: 0.0,
                end: self.horizon,
            });
        }
        Ok(())
    }

    /// Truth `u(·, t)` at the given points (one value per point and
    /// component), written into `out`.
    pub fn fill_truth(&self, points: &[[f64; 2]], t: f64, out: &mut CellField) -> Result<()> {
        self.check_time(t)?;
        self.check_overlap(t)?;
        crate::error::check_len("truth points", out.cells, points.len())?;
        crate::error::check_len("truth components", self.components(), out.components)?;
        out.values.iter_mut().for_each(|v| *v = 0.0);
        for inc in &self.inclusions {
            if !inc.is_present(t) {
                continue;
            }
            let value = inc.contrast.eval(t);
            let [cx, cy] = inc.center_at(t);
            let r2 = inc.radius_at(t).powi(2);
            for (o, p) in out.component_mut(inc.component).iter_mut().zip(points) {
                if (p[0] - cx).powi(2) + (p[1] - cy).powi(2) < r2 {
                    *o = value;
                }
            }
        }
        Ok(())
    }

    /// Cellwise truth on `mesh`: the contrast of the inclusion containing the
    /// cell centroid, zero elsewhere.
    pub fn eval_truth(&self, mesh: &Mesh, t: f64) -> Result<CellField> {
        let mut out = CellField::zeros(self.components(), mesh.cell_count());
        self.fill_truth(&mesh.centroids(), t, &mut out)?;
        Ok(out)
    }

    /// Source at the cell centroids and flux at the boundary vertices.
    pub fn eval_sources(&self, mesh: &Mesh, t: f64) -> Result<(CellField, Vec<f64>)> {
        self.check_time(t)?;
        let f = CellField::scalar(mesh.centroids().iter().map(|&p| self.sources.f(p, t)).collect());
        let g = mesh
            .boundary_vertices
            .iter()
            .map(|&v| self.sources.g(mesh.vertices[v], t))
            .collect();
        Ok((f, g))
    }

    /// The same setting without any inclusions.
    pub fn without_inclusions(&self) -> Self {
        Self {
            name: format!("{}-empty", self.name),
            inclusions: Vec::new(),
            ..self.clone()
        }
    }

    /// Built-in benchmark `ex1` … `ex5`.
    pub fn builtin(name: &str) -> Result<Self> {
        let cond = || InhomogeneityOp::conductivity(0);
        let cond_bounds = || Bounds { lo: -0.99, hi: 0.0 };
        let s = |name, inclusions, ops, bounds, scheme, tol| {
            Scenario::new(name, inclusions, ops, bounds, 10.0, SourceSet::Standard, scheme, tol)
        };
        match name {
            "ex1" => s(
                "ex1",
                vec![
                    Inclusion::new(
                        "0.2",
                        ["0.6*cos(t*pi/6)*(1 - 2*step(t - 3))", "-0.7*sin(t*pi/6)"],
                        "-0.9",
                        0,
                    )?,
                    Inclusion::new(
                        "0.2",
                        [
                            "-0.6*((1 - step(t - 6))*cos(t*pi/6) + step(t - 6)*cos((12 - t)*pi/6))",
                            "-0.7*((1 - step(t - 6))*sin(t*pi/6) + step(t - 6)*sin((12 - t)*pi/6))",
                        ],
                        "-0.9",
                        0,
                    )?,
                ],
                vec![cond()],
                vec![cond_bounds()],
                UpdateScheme::Bfg,
                0.10,
            ),
            "ex2" => s(
                "ex2",
                vec![
                    Inclusion::new(
                        "0.2",
                        ["0.65*cos(t*pi/8 - 7*pi/6)", "0.65*sin(t*pi/8 - 7*pi/6)"],
                        "-0.9",
                        0,
                    )?,
                    Inclusion::new("0.2", ["0.6*cos(t*pi/8 - pi/3)", "0.7*sin(t*pi/8 - pi/3)"], "-0.9", 0)?,
                    Inclusion::new("0.2", ["0.7*cos(t*pi/8 - pi/3)", "0.5*sin(t*pi/8 - pi/3)"], "15", 1)?,
                ],
                vec![cond(), InhomogeneityOp::potential(1)],
                vec![cond_bounds(), Bounds { lo: 0.0, hi: 30.0 }],
                UpdateScheme::Dfp,
                0.08,
            ),
            "ex3" => s(
                "ex3",
                vec![Inclusion::new(
                    "0.2",
                    ["0.5*cos(t*pi/6 + pi/4)", "0.7*sin(t*pi/6 + pi/4)"],
                    "20",
                    0,
                )?],
                vec![InhomogeneityOp::power_potential(0, 3.0)?],
                vec![Bounds { lo: 0.0, hi: 40.0 }],
                UpdateScheme::Bfg,
                0.08,
            ),
            "ex4" => s(
                "ex4",
                vec![
                    Inclusion::new("0.2", ["0.7*cos(t*pi/8)", "0.6*sin(t*pi/8)"], "max(15 - 2.5*t, 0)", 0)?,
                    Inclusion::new(
                        "0.2",
                        ["0.5*cos(t*pi/8 + 4*pi/5)", "0.6*cos(t*pi/8 + 4*pi/5)"],
                        "min(2.5*t, 15)",
                        0,
                    )?,
                ],
                vec![InhomogeneityOp::potential(0)],
                vec![Bounds { lo: 0.0, hi: 30.0 }],
                UpdateScheme::Dfp,
                0.08,
            ),
            "ex5" => s(
                "ex5",
                vec![
                    Inclusion::new("0.2", ["0.7*cos(t*pi/6 + pi/3)", "0.6*sin(t*pi/6 + pi/3)"], "-0.9", 0)?,
                    Inclusion::new(
                        "max(0.3 - 0.03*t, 0)",
                        ["0.6*cos(t*pi/6 - 2*pi/3)", "0.5*sin(t*pi/6 - 2*pi/3)"],
                        "-0.9",
                        0,
                    )?,
                ],
                vec![cond()],
                vec![cond_bounds()],
                UpdateScheme::Bfg,
                0.08,
            ),
            other => Err(Error::UnknownScenario(other.to_string())),
        }
    }

    pub const BUILTIN: [&'static str; 5] = ["ex1", "ex2", "ex3", "ex4", "ex5"];
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;
    use core::f64::consts::PI;

    #[test]
    fn ex1_truth_at_start() {
        let mesh = build_disk_mesh(3000).unwrap();
        let s = Scenario::builtin("ex1").unwrap();
        let u = s.eval_truth(&mesh, 0.0).unwrap();
        for c in 0..mesh.cell_count() {
            let [x, y] = mesh.centroid(c);
            let inside = (x - 0.6).powi(2) + y * y < 0.04 || (x + 0.6).powi(2) + y * y < 0.04;
            assert_eq!(u.values[c], if inside { -0.9 } else { 0.0 });
        }
    }

    #[test]
    fn ex1_branches_follow_the_formulas() {
        let s = Scenario::builtin("ex1").unwrap();
        let g1 = |t: f64| s.inclusions[0].center_at(t);
        let g2 = |t: f64| s.inclusions[1].center_at(t);
        let close = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12;
        let w = |t: f64| t * PI / 6.0;
        assert!(close(g1(2.0), [0.6 * w(2.0).cos(), -0.7 * w(2.0).sin()]));
        assert!(close(g1(4.0), [-0.6 * w(4.0).cos(), -0.7 * w(4.0).sin()]));
        assert!(close(g1(3.0), [-0.6 * w(3.0).cos(), -0.7 * w(3.0).sin()]));
        assert!(close(g2(5.0), [-0.6 * w(5.0).cos(), -0.7 * w(5.0).sin()]));
        let w2 = (12.0 - 8.0) * PI / 6.0;
        assert!(close(g2(8.0), [-0.6 * w2.cos(), -0.7 * w2.sin()]));
        // merged inclusions with equal contrast are accepted
        assert!(close(g1(4.5), g2(4.5)));
    }

    #[test]
    fn builtins_have_documented_structure() {
        let ex2 = Scenario::builtin("ex2").unwrap();
        assert_eq!(ex2.inclusions.len(), 3);
        assert!(ex2.inclusions.iter().all(|i| i.radius_at(1.0) == 0.2));
        assert_eq!(ex2.inclusions.iter().filter(|i| i.component == 0).count(), 2);
        assert_eq!(ex2.ops[1].kind, InhomogeneityKind::Potential);
        assert_eq!(
            ex2.bounds,
            vec![Bounds { lo: -0.99, hi: 0.0 }, Bounds { lo: 0.0, hi: 30.0 }]
        );
        let ex3 = Scenario::builtin("ex3").unwrap();
        assert_eq!(ex3.ops[0].kind, InhomogeneityKind::PowerPotential { p: 3.0 });
        assert_eq!(ex3.bounds[0], Bounds { lo: 0.0, hi: 40.0 });
        assert_eq!(
            Scenario::builtin("ex4").unwrap().bounds[0],
            Bounds { lo: 0.0, hi: 30.0 }
        );
        assert_eq!(Scenario::builtin("ex1").unwrap().tolerance, 0.10);
        assert_eq!(
            Scenario::builtin("ex5").unwrap().bounds[0],
            Bounds { lo: -0.99, hi: 0.0 }
        );
        assert_eq!(
            Scenario::builtin("ex6").unwrap_err(),
            Error::UnknownScenario("ex6".into())
        );
    }

    #[test]
    fn clearance_holds_on_check_grid() {
        for name in Scenario::BUILTIN {
            let s = Scenario::builtin(name).unwrap();
            for i in 0..CHECK_POINTS {
                let t = 10.0 * i as f64 / 1000.0;
                for inc in s.inclusions.iter().filter(|inc| inc.is_present(t)) {
                    let [x, y] = inc.center_at(t);
                    assert!((x * x + y * y).sqrt() + inc.radius_at(t) < 1.0, "{name} t={t}");
                }
            }
        }
    }

    #[test]
    fn ex5_second_inclusion_vanishes() {
        let mesh = build_disk_mesh(1120).unwrap();
        let s = Scenario::builtin("ex5").unwrap();
        assert!(!s.inclusions[1].is_present(10.0));
        let u = s.eval_truth(&mesh, 10.0).unwrap();
        let only_first = Scenario {
            inclusions: vec![s.inclusions[0].clone()],
            ..s.clone()
        };
        assert_eq!(u, only_first.eval_truth(&mesh, 10.0).unwrap());
    }

    #[test]
    fn truth_values_are_declared_contrasts() {
        let mesh = build_disk_mesh(1120).unwrap();
        for name in Scenario::BUILTIN {
            let s = Scenario::builtin(name).unwrap();
            for &t in &[0.0, 1.3, 4.0, 7.7, 10.0] {
                let u = s.eval_truth(&mesh, t).unwrap();
                for inc in &s.inclusions {
                    let p = inc.contrast.eval(t);
                    for (c, &v) in u.component(inc.component).iter().enumerate() {
                        if inc.is_present(t) && inc.contains(mesh.centroid(c), t) {
                            assert_eq!(v, p, "{name} t={t}");
                        }
                    }
                }
                let allowed: Vec<f64> = s.inclusions.iter().map(|i| i.contrast.eval(t)).collect();
                assert!(u.values.iter().all(|v| *v == 0.0 || allowed.contains(v)));
            }
        }
    }

    #[test]
    fn truth_moves_continuously() {
        let mesh = build_disk_mesh(1120).unwrap();
        let h = mesh.max_cell_diameter();
        for name in Scenario::BUILTIN {
            let s = Scenario::builtin(name).unwrap();
            for i in 0..40 {
                let t = 0.25 * i as f64 + 0.01;
                let (a, b) = (s.eval_truth(&mesh, t).unwrap(), s.eval_truth(&mesh, t + 1e-3).unwrap());
                for c in 0..mesh.cell_count() {
                    if (0..s.components()).any(|l| a.component(l)[c] != b.component(l)[c]) {
                        let p = mesh.centroid(c);
                        let near_rim = s.inclusions.iter().any(|inc| {
                            let [x, y] = inc.center_at(t);
                            let d = ((p[0] - x).powi(2) + (p[1] - y).powi(2)).sqrt();
                            (d - inc.radius_at(t)).abs() < h
                        });
                        let fading = s
                            .inclusions
                            .iter()
                            .any(|inc| inc.contrast.eval(t) != inc.contrast.eval(t + 1e-3));
                        assert!(near_rim || fading, "{name} t={t} cell {c}");
                    }
                }
            }
        }
    }

    #[test]
    fn overlap_with_different_contrast_is_rejected() {
        let inc = |x: &str, p: &str| Inclusion::new("0.2", [x, "0"], p, 0).unwrap();
        let make = |p2: &str| {
            Scenario::new(
                "custom",
                vec![inc("0.1", "-0.5"), inc("-0.1", p2)],
                vec![InhomogeneityOp::conductivity(0)],
                vec![Bounds { lo: -0.99, hi: 0.0 }],
                1.0,
                SourceSet::Standard,
                UpdateScheme::Dfp,
                0.08,
            )
        };
        assert!(matches!(
            make("-0.7"),
            Err(Error::Overlap {
                first: 0,
                second: 1,
                ..
            })
        ));
        assert!(make("-0.5").is_ok());
    }

    #[test]
    fn clearance_violation_is_rejected() {
        let r = Scenario::new(
            "custom",
            vec![Inclusion::new("0.3", ["0.5 + 0.05*t", "0"], "5", 0).unwrap()],
            vec![InhomogeneityOp::potential(0)],
            vec![Bounds { lo: 0.0, hi: 30.0 }],
            10.0,
            SourceSet::Standard,
            UpdateScheme::Dfp,
            0.08,
        );
        assert!(matches!(r, Err(Error::Clearance { index: 0, .. })));
        let bad_bounds = Scenario::new(
            "custom",
            vec![],
            vec![InhomogeneityOp::conductivity(0)],
            vec![Bounds { lo: -1.2, hi: 0.0 }],
            1.0,
            SourceSet::Standard,
            UpdateScheme::Dfp,
            0.08,
        );
        assert!(matches!(bad_bounds, Err(Error::Config(_))));
    }

    #[test]
    fn source_values() {
        let s = SourceSet::Standard;
        assert_eq!(s.h([0.0, 0.0]), 3.0);
        assert_eq!(s.f([0.0, 0.0], 1.7), 0.0);
        assert!((s.g([1.0, 0.0], 0.0) - 3.0 * 3f64.cos()).abs() < 1e-14);
        assert!((s.g([1.0, 0.0], 0.0) + 2.96997).abs() < 1e-5);
        let scenario = Scenario::builtin("ex2").unwrap();
        assert!(scenario.eval_truth(&build_disk_mesh(100).unwrap(), 10.5).is_err());
    }
}
