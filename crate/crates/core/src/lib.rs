//! Spatial-Slepian transform on the 2-sphere.
//!
//! Bandlimited Slepian bases over polar caps and spherical ellipses, the
//! forward and inverse spatial-Slepian transform on the rotation group
//! (direct sum and FFT-accelerated), frame diagnostics, and localized
//! variation analysis over ensembles of observations.

pub mod bench;
pub mod error;
pub mod io;
pub mod lva;
pub mod region;
pub mod slepian;
pub mod sphere;
pub mod sst;
pub mod wigner;

pub use error::{Result, SstError};
pub use region::Region;
pub use slepian::SlepianBasis;
pub use sphere::{HarmonicCoefficients, SphereGrid, SphereSignal};
pub use wigner::EulerAngles;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
