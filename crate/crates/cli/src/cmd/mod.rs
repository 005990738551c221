pub mod eigen;
pub mod estimate;
pub mod report;
pub mod sample;
pub mod scan;
pub mod verify;
