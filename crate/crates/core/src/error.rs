use thiserror::Error;

use crate::workload::DataType;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid layer `{layer}`: {reason}")]
    InvalidLayer { layer: String, reason: String },

    #[error("invalid tiling for layer `{layer}`: {reason}")]
    InvalidTiling { layer: String, reason: String },

    #[error("invalid buffer configuration: {0}")]
    InvalidBuffers(String),

    #[error("invalid DRAM geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid cost profile: {0}")]
    InvalidProfile(String),

    /// The tile of `data_type` needs `needed` bytes but its buffer holds only `capacity`.
    #[error("{data_type} tile of {needed} B overflows its {capacity} B buffer (layer `{layer}`)")]
    BufferOverflow {
        layer: String,
        data_type: DataType,
        needed: u64,
        capacity: u64,
    },

    #[error("layer `{layer}` has no feasible partition: minimal {data_type} tile needs {needed} B, buffer holds {capacity} B")]
    EmptyPartitionSpace {
        layer: String,
        data_type: DataType,
        needed: u64,
        capacity: u64,
    },

    #[error("DRAM capacity exceeded: need {needed} access units, chip holds {capacity}")]
    CapacityExceeded { needed: u64, capacity: u64 },

    #[error("unknown name `{0}`")]
    UnknownName(String),

    #[error("{0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
