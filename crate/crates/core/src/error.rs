use thiserror::Error;

use crate::autoencoder::ModelError;
use crate::codecs::CodecError;
use crate::delivery::DeliveryError;
use crate::metrics::MetricsError;
use crate::payloads::ManifestError;
use crate::raster::RasterError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Umbrella error for callers that cross module boundaries.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Delivery(#[from] DeliveryError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the failure came from non-finite numerics rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Model(ModelError::NonFiniteLoss { .. }))
    }
}
