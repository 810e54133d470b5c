//! Persistence: tensor containers, episodes, checkpoints, manifests, metrics and images.

pub mod checkpoint;
pub mod container;
pub mod episode;
pub mod image;
pub mod kv;
pub mod manifest;
pub mod metrics;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use container::{read_container, write_atomic, write_container, Payload, Record, CHECKPOINT_MAGIC, DATASET_MAGIC};
pub use episode::{load_episode, save_episode};
pub use kv::parse_kv;
pub use manifest::{load_dataset, DatasetManifest, LoadedDataset, MANIFEST_FILE};
pub use metrics::{append_metrics, fmt6, read_metrics, MetricsRow, METRICS_HEADER};
