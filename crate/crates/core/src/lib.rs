pub mod bvh;
pub mod contour;
pub mod fit;
pub mod fixtures;
pub mod geom;
pub mod implant;
pub mod metrics;
pub mod mirror;
pub mod volume;
