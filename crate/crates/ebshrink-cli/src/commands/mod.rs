pub mod bench;
pub mod diagnose;
pub mod estimate;
pub mod fit;
pub mod simulate;
