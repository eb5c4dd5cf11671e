use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    #[error("program is recursive: cycle through {cycle}")]
    Recursion { cycle: String },

    #[error("reserved predicate nn must have arity 2, found nn/{arity} at {line}:{col}")]
    ReservedArity { arity: usize, line: usize, col: usize },

    #[error("unsafe variable {var} in `{rule}` at {span}")]
    UnsafeVariable { var: String, rule: String, span: String },

    #[error("grounding exceeded {limit} ground rules")]
    GroundingLimit { limit: usize },

    #[error("#min over an empty set for {key}")]
    EmptyMin { key: String },

    #[error("invalid mode declaration `{decl}`: {msg}")]
    Mode { decl: String, msg: String },

    #[error("invalid task: {0}")]
    Task(String),

    #[error("example {example} references unknown raw input {reference}")]
    DanglingRawRef { example: String, reference: String },

    #[error("example {example}: label {label} is not in the label space")]
    LabelNotInSpace { example: String, label: String },

    #[error("task is not in the one-predicate-learning fragment: {0}")]
    NotOpl(String),

    #[error("example {example} has no possibilities")]
    NoPossibilities { example: String },

    #[error("abduction produced more than {limit} possibilities")]
    PossibilityLimit { limit: usize },

    #[error("no head mode declaration is compatible with {atom}")]
    UnlearnableAtom { atom: String },

    #[error("label {label} of example {example} is not provable by any rule of the space")]
    LabelUnprovable { example: String, label: String },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("no hypothesis in the space covers examples: {}", .uncovered.join(", "))]
    Unsatisfiable { uncovered: Vec<String> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("artifact schema mismatch: expected {expected}, found {found}")]
    Schema { expected: String, found: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// The innermost error under stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage { stage, source: Box::new(e) }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
