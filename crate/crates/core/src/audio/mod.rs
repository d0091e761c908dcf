//! Acoustic front-end: WAV ingest, log-Mel filterbank features with
//! per-utterance mean normalization, context splicing, and the on-disk
//! feature archive.

pub mod dft;
pub mod fbank;
pub mod features;
pub mod wav;

pub use fbank::{compute_fbank, compute_mfcc, mel_bin_centers, splice_frames, FbankConfig};
pub use features::{load_features, save_features, FeatureMatrix};
pub use wav::{read_wav, write_wav, Waveform, WavError};

use crate::bytesio::BytesError;

/// Errors from feature computation and the feature archive.
#[derive(Debug)]
pub enum AudioError {
    /// Utterance shorter than one analysis frame, or an empty feature matrix
    /// where frames are required.
    EmptyFeature,
    /// Configuration violates its invariants (frequency range, bin count...).
    InvalidConfig(String),
    /// Archive decode failure (bad magic, version, truncation, i/o).
    Format(BytesError),
    Io(std::io::Error),
}

impl std::fmt::Display for AudioError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AudioError::EmptyFeature => write!(f, "utterance too short: no frames"),
            AudioError::InvalidConfig(m) => write!(f, "invalid feature config: {m}"),
            AudioError::Format(e) => write!(f, "feature archive: {e}"),
            AudioError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for AudioError {}

impl From<BytesError> for AudioError {
    fn from(e: BytesError) -> Self {
        AudioError::Format(e)
    }
}

impl From<std::io::Error> for AudioError {
    fn from(e: std::io::Error) -> Self {
        AudioError::Io(e)
    }
}
