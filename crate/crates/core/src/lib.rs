//! Cellular models for the little disks operad and its relatives.
//!
//! * [`cacti_core`]: the spineless cacti cell complex, its faces, relabelling and
//!   the cell-level operad structure.
//! * [`chain_algebra`]: integer chain complexes, Smith normal form and homology.
//! * [`metatree`]: nested trees decorated by cacti cells, giving the bar
//!   complex of the open moduli space and the Fulton-MacPherson complex.
//! * [`genfun`]: bivariate counting series for all three complexes.
//! * [`flowtrace`]: separatrix tracing for `|h|` with `h = prod (z - z_j)^{a_j}`
//!   and extraction of the cell containing a configuration.
//! * [`cli`]: the `operad-cells` command line front end.

pub mod cacti_core;
pub mod chain_algebra;
pub mod cli;
pub mod error;
pub mod flowtrace;
pub mod genfun;
pub mod metatree;

pub use error::{Error, ErrorClass, Result};
