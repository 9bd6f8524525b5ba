//! First-order eigenvalue perturbation along curves of metrics `g(t) = g₀ + t h`.

mod branch;
mod breaking;
mod fixture;
mod variation;

pub use branch::*;
pub use breaking::*;
pub use fixture::*;
pub use variation::*;
