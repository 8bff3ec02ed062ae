pub mod error;
pub mod poly;
pub mod engine;
pub mod sets;
pub mod critpost;
pub mod families;
pub mod contin;
pub mod checks;
