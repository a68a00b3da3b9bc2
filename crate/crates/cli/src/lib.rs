pub mod acceptance;
pub mod commands;
