use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the model. Messages name the module and, where it
/// applies, the equation that rejected its input.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{module}: {message}")]
    Domain {
        module: &'static str,
        message: String,
    },

    #[error("kinematics: law-of-cosines argument {value} out of range in the {equation} equation")]
    Geometry { equation: &'static str, value: f64 },

    #[error("sbs: spring deflection {deflection} m is below -l0 = {min} m")]
    PhysicalRange { deflection: f64, min: f64 },

    #[error("{module}: invalid configuration: {message}")]
    Configuration {
        module: &'static str,
        message: String,
    },

    #[error("sbs: device torque is singular (cable length b = 0 at theta = {theta_deg} deg)")]
    Singularity { theta_deg: f64 },

    #[error("gss: strut length {length} m outside stroke [{min}, {max}] m")]
    Unreachable { length: f64, min: f64, max: f64 },

    #[error("bench: line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("bench: {message}")]
    Validation { message: String },

    #[error("optimizer: {message}")]
    Optimization { message: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(module: &'static str, message: impl Into<String>) -> Self {
        Error::Domain {
            module,
            message: message.into(),
        }
    }

    pub(crate) fn config(module: &'static str, message: impl Into<String>) -> Self {
        Error::Configuration {
            module,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
