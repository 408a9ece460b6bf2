pub mod domains;
pub mod dsl;
pub mod features;
pub mod synth;
pub mod synthetic;
pub mod table;
pub mod text;
