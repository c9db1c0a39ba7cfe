//! Spectral solver and verification suite for the linear damped wave
//! equation on finite metric graphs.
//!
//! The crate locates complex eigenvalues of the quadratic operator pencil
//! `u'' = (lambda^2 + 2 lambda a(x) - b(x)) u` with unitary vertex coupling,
//! computes high-frequency spectral abscissas through two independent
//! polynomial constructions (pseudo-orbit expansion and a leading-order
//! characteristic polynomial), and verifies the structural identities the
//! spectra must satisfy.

pub mod analysis;
pub mod coupling;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod ode;
pub mod orbits;
pub mod par;
pub mod pipeline;
pub mod poly;
pub mod profile;
pub mod quad;
pub mod rootfinding;
pub mod scaled;
pub mod secular;
pub mod verify;

pub use coupling::{named_coupling, CouplingKind, UnitaryCoupling};
pub use graph::{commensurate_unit, DirectedDouble, Edge, GraphError, MetricGraph};
pub use io::GraphFile;
pub use linalg::C64;
pub use profile::CoefficientProfile;
pub use rootfinding::{ComplexWindow, EigenvalueSet};
pub use scaled::Scaled;
pub use secular::{Backend, SecularSystem};
