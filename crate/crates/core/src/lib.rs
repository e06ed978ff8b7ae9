//! Width-preserving reductions between SAT, MAX-2-SAT and INDEPENDENT SET,
//! together with the decomposition machinery, gadget library and oracles
//! used to certify them.

pub mod corpus;
pub mod decomp;
pub mod epnl;
pub mod equivalence;
pub mod error;
pub mod formats;
pub mod gadgets;
pub mod instances;
pub mod kexpr;
pub mod oracles;
pub mod reduce_cw;
pub mod reduce_tw;

pub use error::{Error, Result};
