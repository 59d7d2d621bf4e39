//! Offline refinement of exported tracks.

mod aflink;
mod gsi;

pub use aflink::{aflink_score, link_tracklets, AflinkConfig};
pub use gsi::{gp_regress, gsi_interpolate, rbf_kernel, GsiConfig, PriorMean};
