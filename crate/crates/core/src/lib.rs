//! Numerical toolkit for vector-valued Bloch functions on the unit disc:
//! Möbius geometry, certified Bloch seminorm brackets, summing norms with
//! Pietsch measures, and molecule norms on the predual side.

pub mod cserde;
pub mod disc;
pub mod error;
pub mod expr;
pub mod instances;
pub mod molecules;
pub mod norms;
pub mod report;
pub mod scenario;
pub mod simplex;
pub mod summing;
pub mod vector;
pub mod verify;

pub use disc::{sample_disc, DiscPoint, MobiusMap, SampleScheme};
pub use error::{BlochError, Result};
pub use expr::HoloExpr;
pub use vector::{Exponent, Norm, VectorValue};
pub use norms::{bloch_seminorm_bracket, make_family, CertBracket, FamilySpec, TestFamily};
pub use summing::{SampleEntry, WeightedSample};
pub use molecules::{Atom, Molecule};
pub use report::{Check, Report};
