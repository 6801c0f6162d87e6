use alloc::vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{check_len, Error, Result};
use crate::fem::{InhomogeneityKind, InhomogeneityOp, Trajectory};
use crate::field::SpaceTimeField;
use crate::mesh::{Mesh, TransferOps};
use crate::scenario::Bounds;

/// How the correction `η̂` is formed outside the open admissible box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EtaHatVariant {
    /// Clip against the dual field `ζ̂`.
    #[default]
    Dual,
    /// Clip against the resolved field `Rζ̂`.
    Resolved,
}

/// Local dual fields `ζ_l` on the coarse mesh at every time node.
///
/// Per fine cell: `∇z·∇y` for conductivity components, the vertex mean of
/// `z y` for potentials and of `z |y|^{p−2} y` for power potentials. The
/// result is restricted to the coarse mesh.
pub fn local_dual(
    fine: &Mesh,
    transfer: &TransferOps,
    ops: &[InhomogeneityOp],
    components: usize,
    z: &Trajectory,
    y: &Trajectory,
) -> Result<SpaceTimeField> {
    check_len("dual time nodes", z.len(), y.len())?;
    check_len("dual fine cells", fine.cell_count(), transfer.fine_cells())?;
    for op in ops {
        if op.component >= components {
            return Err(Error::Config(alloc::format!(
                "operator component {} out of range",
                op.component
            )));
        }
    }
    let nodes = z.len();
    let mut out = SpaceTimeField::zeros(nodes, components, transfer.coarse_cells());
    let mut local = vec![0.0; fine.cell_count()];
    for node in 0..nodes {
        let (zs, ys) = (&z.states[node].values, &y.states[node].values);
        check_len("dual state", fine.vertex_count(), zs.len())?;
        check_len("dual state", fine.vertex_count(), ys.len())?;
        for op in ops {
            for (c, (tri, grads)) in fine.triangles.iter().zip(&fine.gradients).enumerate() {
                local[c] = match op.kind {
                    InhomogeneityKind::Conductivity => {
                        let (mut gz, mut gy) = ([0.0; 2], [0.0; 2]);
                        for (i, &v) in tri.iter().enumerate() {
                            for d in 0..2 {
                                gz[d] += zs[v] * grads[i][d];
                                gy[d] += ys[v] * grads[i][d];
                            }
                        }
                        gz[0] * gy[0] + gz[1] * gy[1]
                    }
                    InhomogeneityKind::Potential => tri.iter().map(|&v| zs[v] * ys[v]).sum::<f64>() / 3.0,
                    InhomogeneityKind::PowerPotential { p } => {
                        tri.iter()
                            .map(|&v| zs[v] * ys[v].abs().powf(p - 2.0) * ys[v])
                            .sum::<f64>()
                            / 3.0
                    }
                };
            }
            let dst = out.component_at_mut(node, op.component);
            let mut tmp = vec![0.0; dst.len()];
            transfer.restrict_into(&local, &mut tmp);
            for (d, t) in dst.iter_mut().zip(&tmp) {
                *d += t;
            }
        }
    }
    Ok(out)
}

/// Pointwise projection onto the admissible box of each component.
pub fn project(field: &SpaceTimeField, bounds: &[Bounds]) -> Result<SpaceTimeField> {
    check_len("projection bounds", field.components, bounds.len())?;
    let mut out = field.clone();
    for node in 0..field.nodes {
        for (l, b) in bounds.iter().enumerate() {
            out.component_at_mut(node, l).iter_mut().for_each(|v| *v = b.clamp(*v));
        }
    }
    Ok(out)
}

/// Correction target for the kernel update.
///
/// Inside the open box `η̂ = u`; on the lower face `min(x, lo)`, on the upper
/// face `max(x, hi)`, where `x` is `ζ̂` or `Rζ̂` depending on `variant`.
pub fn eta_hat(
    u: &SpaceTimeField,
    zeta_hat: &SpaceTimeField,
    r_zeta_hat: &SpaceTimeField,
    bounds: &[Bounds],
    variant: EtaHatVariant,
) -> Result<SpaceTimeField> {
    check_len("eta bounds", u.components, bounds.len())?;
    for f in [zeta_hat, r_zeta_hat] {
        if !u.same_shape(f) {
            return Err(Error::SizeMismatch {
                context: "eta fields",
                expected: u.data.len(),
                actual: f.data.len(),
            });
        }
    }
    let x = match variant {
        EtaHatVariant::Dual => zeta_hat,
        EtaHatVariant::Resolved => r_zeta_hat,
    };
    let mut out = u.clone();
    for node in 0..u.nodes {
        for (l, b) in bounds.iter().enumerate() {
            let xs = x.component_at(node, l);
            for (o, &xv) in out.component_at_mut(node, l).iter_mut().zip(xs) {
                if *o <= b.lo {
                    *o = xv.min(b.lo);
                } else if *o >= b.hi {
                    *o = xv.max(b.hi);
                }
            }
        }
    }
    Ok(out)
}
