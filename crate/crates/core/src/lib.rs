pub mod geometry;
pub mod mesh;
pub mod fem;
pub mod eigen;
pub mod radial;
pub mod spectrum;
pub mod shape;
pub mod harness;
