//! Geodesic flow on compact quotients `Γ\PSL(2,R)` of the hyperbolic plane.
//!
//! The crate enumerates closed geodesics of a cocompact Fuchsian group,
//! finds their configuration-space self-crossings and 2-antiparallel
//! encounters, and constructs partner orbits with their period (action)
//! differences.

pub mod atlas;
pub mod encounters;
pub mod fuchsian;
pub mod moebius;
pub mod partner;
pub mod report;
pub mod verify;

pub use atlas::{ClosedGeodesic, Crossing};
pub use encounters::{EncounterReport, SectionCoords};
pub use fuchsian::{FuchsianGroup, QuotientMetric, QuotientPoint, Word};
pub use moebius::{Mat2, PslElement};
