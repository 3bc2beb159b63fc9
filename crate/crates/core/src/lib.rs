//! Numerical laboratory for hermitian holomorphic vector bundles over flat
//! periodic model domains.
//!
//! The crate discretizes bundle-valued `(p,q)`-forms with Fourier spectral
//! calculus and provides the pieces needed to check, numerically, the
//! curvature identities behind weighted `L²` estimates for `∂̄`:
//!
//! * [`grid`]: periodic boxes in complex dimension 1 or 2, spectral `∂/∂z_j`,
//!   `∂/∂z̄_j`, quadrature and convolution.
//! * [`exterior`]: multi-index exterior algebra, the `h`-pairing, norms and
//!   the Hodge-star map `α ↦ γ_α` with `γ_α ∧ ω_p = α`.
//! * [`hermitian`]: metric fields, Chern connection, curvature, dual metrics
//!   and the bundle operators `D′`, `∂̄`, `∂̄*_h`.
//! * [`positivity`]: Griffiths and Nakano curvature bounds.
//! * [`bochner`]: the `∂∂̄`-Bochner-Kodaira identity and the basic estimate.
//! * [`hormander`]: weighted Hilbert spaces and the minimal-norm `∂̄` solver.
//! * [`singular`]: singular metrics, mollification and the regularized solve.
//! * [`cli`]: experiment configs, CSV reports, field files and plots.

pub mod bochner;
pub mod cli;
pub mod error;
pub mod exterior;
pub mod grid;
pub mod hermitian;
pub mod hormander;
mod linalg;
pub mod par;
pub mod positivity;
pub mod random;
pub mod singular;
pub mod weights;

pub use error::{Error, Result};
pub use num_complex::Complex64;
