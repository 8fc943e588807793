//! Markov-switching vector autoregressions.
//!
//! The model is the random-coefficient recursion
//!
//! ```text
//! X_n = M_n + A_n X_{n-1} + E_n,   A_n = B_{I_n},  E_n = Sigma_{I_n} eps_n,  M_n = mu_{I_n}
//! ```
//!
//! driven by a finite-state Markov chain `I_n`. Coefficient, noise scale and mean
//! shift at time `n` are all selected by the regime at time `n` (not `n - 1`).
//!
//! The crate simulates such models and diagnoses them: top Lyapunov exponent and
//! full spectrum of the regime-modulated matrix product, closed forms for the
//! triangular, commuting and singular 2x2 cases, coupling of the regime chain,
//! forward contraction of paired trajectories, and second-moment decay.

pub mod config;
pub mod csv;
pub mod error;
pub mod ks;
pub mod linalg;
pub mod lyapunov;
pub mod markov;
pub mod model;
pub mod moments;
pub mod report;
pub mod rng;
pub mod scenarios;
pub mod serde_float;
pub mod stability;

pub use error::{Error, Result};
pub use config::{ConfiguredModel, ModelConfig};
pub use linalg::NormKind;
pub use lyapunov::LyapunovEstimate;
pub use markov::{ChainDiagnostics, CouplingBound, InitLaw, RegimeChain};
pub use model::{NoiseFamily, SmaModel, SwitchingModel, Trajectory};
pub use report::{diagnose, DiagnoseOptions, DiagnosisReport, Verdict};
pub use scenarios::Scenario;
