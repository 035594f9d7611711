//! Non-singular extension decisions for circle-valued Morse functions on
//! closed orientable surfaces, presented as labeled Reeb graphs over an
//! oriented circle.
//!
//! The pipeline: parse and validate an instance ([`model`]), sweep its
//! critical slots through the ten local transition models ([`symbol`],
//! [`collapse`]), test each closed collapse for allowability by a genus
//! flow cross-checked against a saddle matching ([`allow`]), and either
//! refute or emit a certificate with a symbolic assembly trace of the
//! bounding 3-manifold ([`assembly`], [`cert`]). An independent brute-force
//! oracle and an exhaustive small-instance census guard the search
//! ([`search`]).

pub mod allow;
pub mod assembly;
pub mod cert;
pub mod cli;
pub mod collapse;
pub mod dot;
pub mod gate;
pub mod model;
pub mod search;
pub mod symbol;

pub use model::{parse_instance, validate, LabeledReebGraph};
pub use search::{brute_force, census, decide, SearchLimits, Verdict};
pub use symbol::SymbolTable;
