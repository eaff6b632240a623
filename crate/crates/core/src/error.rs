use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// The base shares a factor with the modulus. The gcd is itself a
    /// non-trivial factor of `n` and should be reported as such.
    #[error("gcd({a}, {n}) = {gcd}: base is not coprime to the modulus")]
    NotCoprime { n: u64, a: u64, gcd: u64 },

    #[error("invalid factoring instance: {0}")]
    InvalidInstance(String),

    /// `gcd(a^{r/2} ± 1, N)` came out as 1 or N.
    #[error("period {r} yields only trivial factors of {n}")]
    TrivialFactor { n: u64, r: u64 },

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// No gate can move the running value without disturbing a protected
    /// basis state. Only reachable if the protected set isolates the target.
    #[error("cannot separate basis value {value} from the protected set")]
    ProtectedCollision { value: u64 },

    #[error("{qubits} qubits exceeds the dense simulation cap of {cap}")]
    TooLarge { qubits: u32, cap: u32 },

    #[error("openqasm parse error at line {line}: {msg}")]
    QasmParse { line: usize, msg: String },
}
