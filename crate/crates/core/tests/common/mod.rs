#![allow(dead_code)]

pub mod asp_oracle;
pub mod oracle;
pub mod tasks;
