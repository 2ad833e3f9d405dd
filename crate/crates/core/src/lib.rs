pub mod cli;
pub mod greenbond;
pub mod ledger;
pub mod pricing;
pub mod programs;
pub mod reports;
