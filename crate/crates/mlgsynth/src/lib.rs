pub mod cli;
pub mod netfile;
pub mod report;
pub mod sim;
