pub mod algebra;
pub mod error;
pub mod lattice;
pub mod reference;
pub mod transform;
pub mod ipt;
pub mod dmft;
pub mod observables;
