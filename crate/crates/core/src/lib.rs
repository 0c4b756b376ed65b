//! Simulation and statistical verification of the Lévy–Itô decomposition
//! on finite-dimensional coordinate spaces.
//!
//! A process with characteristics `(γ, Q, ν)` is synthesized as the sum of
//! four independent parts — deterministic drift, a Q-Wiener process, a
//! compensated series of small jumps organized in gauge shells around the
//! unit disk, and a compound-Poisson part for the large jumps — and each
//! claim behind that splitting is checked statistically: marginals against
//! the analytic characteristic function, summand independence, Gaussianity
//! of the continuous part, Poisson shell counts, series convergence, and
//! the finite-order reducibility of the small-jump laws.
//!
//! Everything is generic over the floating scalar through [`Scalar`]
//! (`f64` for real work, `f32` mostly to keep the code honest about
//! tolerances); the `F64`-suffixed aliases below pin the common choice.

pub mod charfn;
pub mod decomp;
pub mod error;
pub mod gaussian;
pub mod jumprm;
pub mod linalg;
pub mod measure;
pub mod paths;
pub mod report;
pub mod scalar;
pub mod space;
pub mod streams;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Process characteristics `(γ, Q, ν)` over `f64`.
pub type CharacteristicsF64 = charfn::Characteristics<f64>;
/// Lévy measure specification over `f64`.
pub type LevyMeasureF64 = measure::LevyMeasureSpec<f64>;
/// Banach disk (gauge body) over `f64`.
pub type BanachDiskF64 = space::BanachDisk<f64>;
/// Sequence-space model (dimension + functional weights) over `f64`.
pub type SpaceModelF64 = space::SpaceModel<f64>;
/// Càdlàg path over `f64`.
pub type CadlagPathF64 = paths::CadlagPath<f64>;
/// Poisson-random-measure sample over `f64`.
pub type PRMSampleF64 = jumprm::PRMSample<f64>;
/// Replica factory over `f64`.
pub type SynthesizerF64 = decomp::Synthesizer<f64>;
/// One replica with its summands over `f64`.
pub type ComponentBundleF64 = decomp::ComponentBundle<f64>;
