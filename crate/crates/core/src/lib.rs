pub mod formula;
pub mod serde_num;
pub mod bits;
pub mod solver;
pub mod control;
pub mod metrics;
pub mod newsome;
pub mod toy;
pub mod report;
