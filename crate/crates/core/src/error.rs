use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("nothing to quantize: input is empty")]
    EmptyInput,

    #[error("value {value} exceeds the {bits}-bit code range")]
    CodeOutOfRange { value: u32, bits: u8 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed pcap at byte {offset}: {reason}")]
    Pcap { offset: usize, reason: String },

    #[error("pcd header line `{line}`: {reason}")]
    PcdHeader { line: String, reason: String },

    #[error("unsupported DATA mode `{0}`")]
    UnsupportedDataMode(String),

    #[error("pcd data: {0}")]
    PcdData(String),

    #[error("csv row {row} column {column}: {reason}")]
    Csv { row: usize, column: usize, reason: String },

    #[error("projection: {0}")]
    Projection(String),

    #[error("corrupt stream: {0}")]
    Corrupt(String),

    #[error("frame index {index} out of range for {len} frames")]
    FrameIndex { index: usize, len: usize },

    #[error("metric: {0}")]
    Metric(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn corrupt(msg: impl Into<String>) -> Self {
        Error::Corrupt(msg.into())
    }
}
