use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("{name} = {value} is outside {range}")]
    Domain {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("invalid circuit: {0}")]
    Circuit(String),

    #[error("{qubits} qubits exceeds the {limit}-qubit limit of the {backend} backend")]
    SizeCap {
        qubits: usize,
        limit: usize,
        backend: &'static str,
    },

    #[error("coupling map has no path between qubits {0} and {1}")]
    Disconnected(usize, usize),

    #[error("gate cannot be synthesized with two CNOTs (residual interaction {0:.3e})")]
    NotTwoCnot(f64),

    #[error("invalid noise specification: {0}")]
    Noise(String),

    #[error("invalid records: {0}")]
    Records(String),

    #[error("no misrotation angle in [0, π/2] reaches fidelity {target:.6}")]
    NoToleranceRoot { target: f64 },

    #[error("shift fit produced {param} = {value:.4e} outside [0, 1]: {diagnostic}")]
    ShiftOutOfRange {
        param: &'static str,
        value: f64,
        diagnostic: String,
    },

    #[error("least-squares fit did not converge; best rms {best_rms:.3e} at {best_params:?}")]
    NotConverged { best_params: Vec<f64>, best_rms: f64 },

    #[error("unsupported model: {0}")]
    Unsupported(String),
}
