//! Dual-channel tactile representation: learned geometric features per sensor
//! and closed-form dynamic statistics of binarized inter-frame residuals.

mod dynamic;
mod events;
mod geometric;

pub use dynamic::{dynamic_feature_window, dynamic_stats, dyn_feature_len, residual_binarize, sigma_series, DynamicStats};
pub use events::{contact_events, merged_series, ContactEvent, EventKind, EventParams};
pub use geometric::{ConvEncoder, TactileEncoder};
