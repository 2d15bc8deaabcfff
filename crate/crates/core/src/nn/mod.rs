//! Small dueling Q-network with hand-written gradients, Adam and a binary
//! checkpoint format.

pub mod adam;
pub mod checkpoint;
pub mod layers;
pub mod qnet;

use thiserror::Error;

pub use adam::{adam_update, LrSchedule, OptimizerState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_weights, save_weights};
pub use layers::{dueling_aggregate, huber_loss};
pub use qnet::{qnet_backward, qnet_forward, ArchConfig, ForwardCache, ParamSpec, QNetwork};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("checkpoint version {version} / architecture {arch_hash:#018x}, expected {expected_version} / {expected_arch_hash:#018x}")]
    VersionMismatch {
        version: u32,
        arch_hash: u64,
        expected_version: u32,
        expected_arch_hash: u64,
    },
    #[error("checkpoint checksum mismatch")]
    ChecksumMismatch,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
