//! Independent oracles backing the acceptance suite.

pub mod oracle;
