//! Independent reference computations used to check `fac-core`.
//!
//! Nothing in here shares code with the library under test. Each oracle is the
//! slow, obvious way of computing a quantity: adaptive quadrature instead of a
//! closed-form integral, Gram-Schmidt instead of Householder, exhaustive scans
//! instead of single passes, central differences instead of backpropagation.

pub mod finite_diff;
pub mod gate;
pub mod grid;
pub mod linalg;
pub mod quadrature;
pub mod scan;

pub use finite_diff::central_gradient;
pub use gate::{epanechnikov, rde_by_quadrature, replay_single_cell_gate};
pub use grid::nearest_center_index;
pub use linalg::{gram_schmidt_qr, max_reconstruction_error, numerical_rank};
pub use quadrature::{adaptive_simpson, integrate_piecewise};
pub use scan::{convergence_point_by_suffix_scan, duplicate_mass_function};
