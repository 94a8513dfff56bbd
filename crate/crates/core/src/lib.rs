//! Simulation and analysis of Zeno protective measurements of photon
//! polarization with a temporal pointer, stabilized by a feedback loop that
//! uses the signal photon counts themselves as its error signal.
//!
//! * [`polarization`]: Jones states, Stokes vectors, rotations, fidelity.
//! * [`zeno`]: exact pointer propagation through repeated weak delays and
//!   projections, plus arrival-time sampling.
//! * [`plant`]: the simulated loop apparatus with drift, loss and detection.
//! * [`spgd`]: the count-driven gradient-descent stabilizer.
//! * [`analysis`]: histogram windowing, moments and measurement estimates.
//! * [`scenario`]: declarative runs, manifests and verification.

// NaN-rejecting guards are written as negated comparisons on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod io;
pub mod plant;
pub mod polarization;
pub mod scenario;
pub mod spgd;
pub mod zeno;

pub use analysis::{ArrivalHistogram, PmResult};
pub use plant::{Plant, PlantConfig};
pub use polarization::{PolarizationState, StokesVector};
pub use scenario::{Manifest, Scenario};
pub use spgd::{SpgdConfig, SpgdState};
pub use zeno::{PointerState, ZenoConfig};
