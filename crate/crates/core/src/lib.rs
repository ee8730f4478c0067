pub mod frontend;
pub mod cfg;
pub mod paths;
pub mod logic;
pub mod interp;
pub mod smt;
pub mod hoare;
pub mod candidates;
pub mod summarize;
