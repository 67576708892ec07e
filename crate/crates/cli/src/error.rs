use lowband_core::autoencoder::ModelError;
use lowband_core::codecs::CodecError;
use lowband_core::delivery::DeliveryError;
use lowband_core::metrics::MetricsError;
use lowband_core::payloads::ManifestError;
use lowband_core::raster::RasterError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<lowband_core::Error> for CliError {
    fn from(e: lowband_core::Error) -> Self {
        match e {
            lowband_core::Error::Io(io) => CliError::Io(io.to_string()),
            e if e.is_numerical() => CliError::Numerical(e.to_string()),
            e => CliError::Validation(e.to_string()),
        }
    }
}

macro_rules! via_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                lowband_core::Error::from(e).into()
            }
        }
    )*};
}

via_core!(ModelError, CodecError, DeliveryError, MetricsError, ManifestError, RasterError);

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(format!("json: {e}"))
    }
}
