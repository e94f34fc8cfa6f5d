//! Differential calculus on persistence barcodes.
//!
//! The pipeline is `parameters -> filter function -> barcode -> loss`:
//!
//! * [`complex`]: simplicial complexes, filter functions and their pre-orders.
//! * [`persistence`]: boundary-matrix reduction, barcodes, barcode templates
//!   and the global permutation lift.
//! * [`barcode`]: ordered barcodes, the quotient map, bottleneck and
//!   Wasserstein distances.
//! * [`param`]: parametrizations (height, lower-star, Rips, ellipsoid-Rips,
//!   raw filter) with analytic Jacobians.
//! * [`differential`]: local lifts, barcode differentials, directional
//!   derivatives and the chain rule.
//! * [`losses`]: differentiable functions of ordered barcodes.
//! * [`optimizer`]: gradient descent through the whole pipeline.
//! * [`verify`]: oracles and randomized property suites.
//!
//! ```
//! use barcode_grad::differential::compose;
//! use barcode_grad::losses::TotalPersistence;
//! use barcode_grad::param::Rips;
//!
//! let f = Rips::new(3, 2, 2)?;
//! let theta = [0.0, 0.0, 1.0, 0.1, 0.3, 1.2];
//! let c = compose(&f, &theta, 0, &TotalPersistence)?;
//! assert_eq!(c.gradient().len(), theta.len());
//! # Ok::<(), barcode_grad::Error>(())
//! ```

pub mod assignment;
pub mod barcode;
pub mod complex;
pub mod config;
pub mod differential;
pub mod error;
pub mod losses;
pub mod optimizer;
pub mod param;
pub mod persistence;
pub mod verify;

pub use barcode::{Barcode, OrderedBarcode};
pub use complex::{FilterFunction, PreorderSignature, SimplicialComplex};
pub use error::{Error, Result};
