//! Speaker-embedding pipeline core.
//!
//! The crate covers the full chain from PCM audio to verification metrics:
//!
//! - [`audio`] — WAV ingest, log-Mel filterbank features, frame splicing,
//!   feature archives;
//! - [`nn`] — dense tensor layers with hand-written backward passes and
//!   finite-difference gradient checking;
//! - [`ctdnn`] — the convolutional/time-delay speaker network, its
//!   receptive-field arithmetic and model serialization;
//! - [`train`] — minibatch SGD with momentum, checkpointing, frame accuracy;
//! - [`dvector`] — utterance-level speaker embeddings by frame averaging;
//! - [`backend`] — cosine, LDA and two-covariance PLDA scoring;
//! - [`eval`] — trial lists, EER and DET curves;
//! - [`synth`] — deterministic synthetic multi-speaker corpus;
//! - [`corpus`] — corpus manifests shared by the stages;
//! - [`rng`] — the pinned PRNG everything derives its randomness from.

pub mod audio;
pub mod bytesio;
pub mod backend;
pub mod corpus;
pub mod ctdnn;
pub mod dvector;
pub mod eval;
pub mod nn;
pub mod par;
pub mod rng;
pub mod synth;
pub mod train;
