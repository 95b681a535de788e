//! Dense linear algebra and quantum-state primitives.

pub mod haar;
pub mod layout;
pub mod linalg;
pub mod metrics;
pub mod state;

pub use haar::{haar_unitary, random_density, random_pure};
pub use layout::SubsystemLayout;
pub use metrics::{fidelity, trace_distance, trace_norm_distance, uhlmann_unitary};
pub use state::{gates, DensityMatrix, PureState, UnitaryMatrix};
