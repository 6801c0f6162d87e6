//! Iterative direct sampling for moving inhomogeneities in two-dimensional
//! parabolic problems.
//!
//! The crate is `no_std` (it needs `alloc`) and carries only the numerics:
//! disk meshes and coarse/fine transfer, P1 finite elements with
//! Crank–Nicolson stepping and a sparse Cholesky solver, ground-truth
//! scenarios, synthetic boundary measurements, and the segment-wise
//! reconstruction driver. File formats, the command line and rendering live
//! in the `idsm` companion crate.
//!
//! The reconstruction pipeline in a nutshell:
//!
//! 1. [`synth::generate_reference`] solves the forward problem with the true
//!    inclusions on an independent fine mesh and records the boundary trace;
//!    [`synth::add_noise`] perturbs it multiplicatively.
//! 2. [`idsm::Reconstructor`] walks the time horizon segment by segment. In
//!    each segment it solves the background problem, a backward adjoint
//!    problem driven by the scattered trace, forms local dual fields and maps
//!    them through the resolver kernel to an index field, which is projected
//!    onto the admissible box to give the inclusion estimate.
//! 3. When the predicted boundary trace misses the data, the kernel receives
//!    a quasi-Newton (DFP or BFGS-type) low-rank correction and the segment
//!    iterates.

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod expr;
pub mod fem;
pub mod field;
pub mod idsm;
pub mod mesh;
pub mod scenario;
pub mod sparse;
pub mod synth;

pub use error::{Error, Result};
pub use field::{CellField, NodalField, SpaceTimeField};
pub use mesh::{Mesh, TransferOps};
