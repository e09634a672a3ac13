use thiserror::Error;

use crate::kernel::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scale order violated: need gamma > beta > 0, got gamma={gamma}, beta={beta}")]
    ScaleOrder { gamma: f64, beta: f64 },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("matrix {name} is not symmetric at ({i},{j}): {a} vs {b}")]
    Asymmetric {
        name: &'static str,
        i: usize,
        j: usize,
        a: f64,
        b: f64,
    },

    #[error("invalid material entry {name}[{i}][{j}] = {value}: {reason}")]
    MaterialEntry {
        name: &'static str,
        i: usize,
        j: usize,
        value: f64,
        reason: &'static str,
    },

    #[error("inadmissible material: {reason}")]
    InadmissibleMaterial {
        reason: String,
        report: Option<Box<ValidationReport>>,
    },

    #[error("coefficients failed validation: {0}")]
    InadmissibleCoefficients(String),

    #[error("time parameter must be positive and finite, got {0}")]
    NonpositiveTime(f64),

    #[error("phase index {phase} out of range for {num_phases} phases")]
    PhaseIndex { phase: usize, num_phases: usize },

    #[error("grid error: {0}")]
    Grid(String),

    #[error(
        "kernel under-resolved: sqrt(beta*h) = {width:.3e} is below half the grid spacing {spacing:.3e}"
    )]
    Resolution { width: f64, spacing: f64 },

    #[error("fields do not form a partition: {0}")]
    NotAPartition(String),

    #[error("quadratic form is negative ({0:.3e}); conditional definiteness violated")]
    NegativeSquare(f64),

    #[error("enumeration of {count} configurations exceeds the limit of {limit}")]
    EnumerationTooLarge { count: u128, limit: u128 },

    #[error("phase {0} is empty")]
    EmptyPhase(usize),

    #[error("inadmissible tensions ({0}, {1}, {2}): strict triangle inequality fails")]
    InadmissibleTensions(f64, f64, f64),

    #[error("fit window too short: {usable} usable samples, need at least {required}")]
    WindowTooShort { usable: usize, required: usize },

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("config error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config error in {path}: {message}")]
    ConfigField { path: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Stable snake-case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::ScaleOrder { .. } => "scale_order",
            Self::Dimension(_) => "dimension",
            Self::Asymmetric { .. } => "asymmetric",
            Self::MaterialEntry { .. } => "material_entry",
            Self::InadmissibleMaterial { .. } => "inadmissible_material",
            Self::InadmissibleCoefficients(_) => "inadmissible_coefficients",
            Self::NonpositiveTime(_) => "nonpositive_time",
            Self::PhaseIndex { .. } => "phase_index",
            Self::Grid(_) => "grid",
            Self::Resolution { .. } => "resolution",
            Self::NotAPartition(_) => "not_a_partition",
            Self::NegativeSquare(_) => "negative_square",
            Self::EnumerationTooLarge { .. } => "enumeration_too_large",
            Self::EmptyPhase(_) => "empty_phase",
            Self::InadmissibleTensions(..) => "inadmissible_tensions",
            Self::WindowTooShort { .. } => "window_too_short",
            Self::UnsupportedDimension(_) => "unsupported_dimension",
            Self::ConfigParse { .. } => "config_parse",
            Self::ConfigField { .. } => "config_field",
            Self::Io(_) => "io",
            Self::Format(_) => "format",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
