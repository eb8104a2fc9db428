use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SzilardError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} = {value} is outside the allowed domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("energy cutoff {cutoff} lies below the noninteracting ground energy {ground} of {n} particles")]
    EmptyBasis { n: usize, cutoff: f64, ground: f64 },

    #[error(
        "eigensolver did not converge after {iterations} iterations (residual {residual:.3e})"
    )]
    EigenConvergence { iterations: usize, residual: f64 },

    #[error(
        "spectrum for n={n}, g_eff={g_eff} not converged: |d ln Z| = {delta_log_z:.3e} \
         after growing the basis to {modes} modes / cutoff {e_cut:.3}"
    )]
    SpectrumNotConverged {
        n: usize,
        g_eff: f64,
        delta_log_z: f64,
        modes: usize,
        e_cut: f64,
    },

    #[error(
        "spectrum truncated for temperature {temperature}: it covers unit-box temperatures up to \
         {covered}; request the spectrum with a larger maximum temperature"
    )]
    Truncated { temperature: f64, covered: f64 },

    #[error("ideal-gas level set too short: largest level weight {weight:.3e} exceeds tolerance")]
    LevelsExhausted { weight: f64 },

    #[error("grid oracle not converged: P={coarse_points} gives {coarse:?}, P={fine_points} gives {fine:?}")]
    GridNotConverged {
        coarse_points: usize,
        fine_points: usize,
        coarse: Vec<f64>,
        fine: Vec<f64>,
    },

    #[error("quadrature tolerance not met (error estimate {estimate:.3e})")]
    Quadrature { estimate: f64 },

    #[error("bracket [{lo}, {hi}] does not enclose a maximum")]
    Bracket { lo: f64, hi: f64 },

    #[error("spectrum cache I/O: {0}")]
    Cache(String),
}

pub type Result<T> = std::result::Result<T, SzilardError>;

impl From<std::io::Error> for SzilardError {
    fn from(e: std::io::Error) -> Self {
        SzilardError::Cache(e.to_string())
    }
}
