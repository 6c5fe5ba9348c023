pub mod bound;
pub mod convert;
pub mod plan;
pub mod run;
pub mod verify;
