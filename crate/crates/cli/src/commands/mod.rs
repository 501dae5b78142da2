pub mod cascade_sim;
pub mod convert;
pub mod eval;
pub mod pcs_stats;
pub mod voxel_stats;
