use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown coordinate `{0}`")]
    UnknownCoordinate(String),
    #[error("non-integer exponent `{0}`")]
    NonIntegerExponent(String),
    #[error("invalid chart: {0}")]
    Chart(String),

    #[error("singular evaluation: {0}")]
    SingularEvaluation(String),
    #[error("hyp2f1 argument {0} outside the series domain")]
    SeriesDomain(f64),
    #[error("series expansion failed: {0}")]
    Series(String),
    #[error("not a b^m-function: {0}")]
    NotBmFunction(String),

    #[error("coframe mismatch: {0}")]
    CoframeMismatch(String),
    #[error("pole order {found} exceeds singularity order {m} in coefficient of `{coord}`")]
    OrderMismatch { coord: String, found: i64, m: u32 },
    #[error("singular matrix: {0}")]
    SingularMatrix(String),
    #[error("not a b^m-form: {0}")]
    NotBmForm(String),
    #[error("form is not closed: {0}")]
    NonClosed(String),
    #[error("Laurent truncation insufficient: residual {residual:e} exceeds {tolerance:e}")]
    TruncationInsufficient { residual: f64, tolerance: f64 },
    #[error("modular weight is not constant (deviation {0:e})")]
    NonConstantWeight(f64),

    #[error("generator `{0}` does not preserve the form")]
    NotInvariant(String),
    #[error("contraction with generator `{0}` is not closed")]
    NotClosedContraction(String),
    #[error("antiderivative not in table: {0}")]
    AntiderivativeNotInTable(String),
    #[error("model violation: {0}")]
    ModelViolation(String),

    #[error("nondegeneracy failure at {witness:?}: {msg}")]
    Nondegeneracy { witness: Vec<f64>, msg: String },
    #[error("degenerate fold: {0}")]
    DegenerateFold(String),

    #[error("highest modular weight vanishes; reduction with zero modular weight is not supported")]
    ZeroHighestWeight,
    #[error("level is not regular: {0}")]
    LevelNotRegular(String),
    #[error("slice action does not match the model: {0}")]
    NonModelAction(String),
    #[error("commutation mismatch at {witness:?}: deviation {deviation:e}")]
    CommutationMismatch { witness: Vec<f64>, deviation: f64 },

    #[error("axiom ({axiom}) violated: {msg}")]
    AxiomViolation { axiom: &'static str, msg: String },
    #[error("nonabelian structure groups are not supported")]
    NonabelianUnsupported,
    #[error("rank or pairing mismatch: {0}")]
    RankMismatch(String),
    #[error("pullback is not basic: {0}")]
    NotBasic(String),

    #[error("invalid marking: {0}")]
    Marking(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
