//! Free subshifts over ℤ^d and free groups: width and breadth of cylinder
//! covers, the Lovász local lemma for forbidden patterns, Moser–Tardos
//! sampling, and a sofic transfer of the construction.

pub mod constructor;
pub mod covers;
pub mod group;
pub mod lll;
pub mod pattern;
pub mod sampler;
pub mod scalar;
pub mod sofic;

pub use covers::{BreadthCertificate, CoverError, CylinderFamily, ProductFamily};
pub use group::{GroupDescriptor, GroupElement, GroupError, Letter, Side};
pub use pattern::{CellPattern, Pattern, PatternError, Symbol, Window, WindowConfiguration};
pub use scalar::Real;

/// Breadth certificate over `f64`.
pub type Certificate = BreadthCertificate<f64>;
