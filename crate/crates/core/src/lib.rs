//! Validation, energy evaluation, and reconstruction for developable
//! immersions of planar regions described by framed boundary curves.
//!
//! The kernel takes a planar reference region and a framed curve (a closed
//! arclength space curve paired with a unit normal field along it), checks
//! the geometric admissibility conditions that make the pair the boundary
//! data of a developable surface, evaluates the exactly reduced bending
//! energy as a line integral, and rebuilds the full C1 surface from ruled
//! patches and rigidly placed flat pieces.

pub mod admissibility;
pub mod energy;
pub mod error;
pub mod framed;
pub mod geom;
pub mod immersion;
pub mod optimizer;
pub mod presets;
pub mod region;
pub mod rulings;
pub mod stencil;
pub mod tol;

pub use error::{Error, Result};
pub use framed::{FrameData, FramedCurve, NormalField, ValidationReport};
pub use geom::{ArcCurve, ImageFrame, ReferenceFrame, Vec3};
pub use region::{BoundaryRegion, Membership};
pub use tol::Tolerances;
