//! Symbolic laboratory simulator: world model, chemistry, scene layout,
//! navigation, scripted manipulation, benchmark evaluation and trajectory
//! storage.

pub mod bench;
pub mod chem;
pub mod geom;
pub mod manip;
pub mod nav;
pub mod scene;
pub mod sim;
pub mod traj;
pub mod world;
