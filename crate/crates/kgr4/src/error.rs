use thiserror::Error;

#[derive(Debug, Error)]
pub enum Kgr4Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record at line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("no content words in sentence {0:?}")]
    NoContentWords(String),
    #[error("empty concept set")]
    EmptyConceptSet,
    #[error("empty candidate list")]
    EmptyCandidates,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("empty target sentence")]
    EmptyTarget,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("training data must contain both labels")]
    SingleLabelData,
    #[error("external corpus too small: need at least {need} sentences, got {got}")]
    CorpusTooSmall { need: usize, got: usize },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {msg}")]
    Stage { stage: String, msg: String },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Kgr4Error>;
