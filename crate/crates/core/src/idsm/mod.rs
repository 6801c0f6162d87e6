//! Segment-wise iterative direct sampling.
//!
//! Each segment solves the background problem and one adjoint problem
//! driven by the scattered boundary trace, forms local dual fields and maps
//! them through the [`ResolverKernel`] to an index field whose projection is
//! the inclusion estimate. When the predicted trace misses the data by more
//! than the tolerance, the kernel receives a low-rank correction and the
//! segment iterates.

mod driver;
mod dual;
mod kernel;

pub use driver::{mean_counters, Reconstruction, Reconstructor, RunConfig, RunState, SegmentCounters, SegmentReport};
pub use dual::{eta_hat, local_dual, project, EtaHatVariant};
pub use kernel::{KernelConfig, KernelTerm, ResolverKernel, SpaceTimeInner, UpdateOutcome};

/// Quasi-Newton correction applied to the resolver kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateScheme {
    Dfp,
    Bfg,
}

impl UpdateScheme {
    pub fn parse(name: &str) -> crate::Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "dfp" => Ok(Self::Dfp),
            "bfg" | "bfgs" => Ok(Self::Bfg),
            other => Err(crate::Error::Config(alloc::format!("unknown update scheme `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Dfp => "dfp",
            Self::Bfg => "bfg",
        }
    }
}
