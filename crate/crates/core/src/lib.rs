pub mod bounds;
pub mod error;
pub mod halton;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod oracle;
pub mod relationships;
pub mod sample_set;
pub mod simplex;
pub mod testbed;
