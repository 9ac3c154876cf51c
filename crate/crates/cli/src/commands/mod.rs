pub mod boost;
pub mod budget;
pub mod compare;
pub mod merge;
pub mod models;
