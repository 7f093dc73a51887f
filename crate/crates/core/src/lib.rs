//! Solvability certificates for systems of real quadratic equations.
//!
//! A system `⟨Q_i x, x⟩ = α_i`, `i = 1..m`, is attacked from three sides:
//!
//! * [`relaxation`] solves the positive semidefinite relaxation
//!   `tr(Q_i X) = α_i, X ⪰ 0` and rewrites the system in trace-matched form;
//! * [`certifier`] applies the operator-norm test `‖Σ A_i²‖_op ≤ η/m` on an
//!   orthonormal basis of the span of the `Q_i` ([`basis`]);
//! * [`fourier`] evaluates the determinant integral whose non-vanishing
//!   implies solvability, by radial quadrature and Monte Carlo over the sphere.
//!
//! [`oracle`] is a multistart Gauss–Newton solver used as ground truth at
//! desk scale, [`ensembles`] generates random instances and runs the scaling
//! experiments, and [`pipeline`] strings the stages together.

pub mod basis;
pub mod certifier;
pub mod ensembles;
pub mod fourier;
pub mod instance;
pub mod oracle;
pub mod pipeline;
pub mod reductions;
pub mod relaxation;
pub mod symmat;

mod error;

pub use basis::OrthoBasis;
pub use certifier::{CertificateReport, Decision};
pub use error::{Error, Result};
pub use symmat::{SymMatrix, Spectrum};
