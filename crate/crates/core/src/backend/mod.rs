//! Scoring backends: plain cosine, LDA projection followed by cosine, and
//! two-covariance PLDA log-likelihood ratios.
//!
//! Backend file: magic `BKND`, u32 version = 1, u8 kind (0 = none, 1 = LDA,
//! 2 = PLDA), u8 length-norm flag, then length-prefixed float32 LE blobs
//! (u32 rows, u32 cols, values): mean and projection for LDA; mean,
//! between-class and within-class covariances for PLDA.

pub mod lda;
pub mod linalg;
pub mod plda;

pub use lda::{fit_lda, LdaTransform};
pub use plda::{fit_plda, PldaFitReport, PldaModel, PldaOptions, PldaScorer};

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::bytesio as bio;
use crate::bytesio::BytesError;
use crate::nn::Mat;

#[derive(Debug)]
pub enum BackendError {
    /// Caller violated a documented precondition (class counts, zero vector).
    Precondition(String),
    /// Dimension or parameter mismatch.
    Config(String),
    /// Linear algebra failed (non-PD covariance, no convergence).
    Numerical(String),
    Format(BytesError),
    Io(std::io::Error),
}

impl std::fmt::Display for BackendError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendError::Precondition(m) => write!(f, "precondition violated: {m}"),
            BackendError::Config(m) => write!(f, "backend configuration: {m}"),
            BackendError::Numerical(m) => write!(f, "numerical failure: {m}"),
            BackendError::Format(e) => write!(f, "backend file: {e}"),
            BackendError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for BackendError {}

impl From<BytesError> for BackendError {
    fn from(e: BytesError) -> Self {
        BackendError::Format(e)
    }
}

impl From<std::io::Error> for BackendError {
    fn from(e: std::io::Error) -> Self {
        BackendError::Io(e)
    }
}

/// `a . b / (|a| |b|)`, in double precision. Zero-norm inputs are an error.
pub fn cosine_score(a: &[f64], b: &[f64]) -> Result<f64, BackendError> {
    if a.len() != b.len() {
        return Err(BackendError::Config(format!(
            "vector dims {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(BackendError::Precondition(
            "cosine score of a zero vector is undefined".into(),
        ));
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

/// Scale a vector to unit Euclidean norm.
pub fn length_normalize(v: &[f64]) -> Result<Vec<f64>, BackendError> {
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(BackendError::Precondition(
            "cannot length-normalize a zero vector".into(),
        ));
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Which scoring path a fitted backend uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Cosine,
    Lda,
    Plda,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Cosine => "cosine",
            BackendKind::Lda => "lda",
            BackendKind::Plda => "plda",
        }
    }
}

/// A fitted scoring backend. Cosine needs no fitting; LDA scores with the
/// cosine of projected vectors; PLDA scores with the log-likelihood ratio.
#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Cosine,
    Lda {
        transform: LdaTransform,
        length_norm: bool,
    },
    Plda {
        model: PldaModel,
        length_norm: bool,
    },
}

impl Backend {
    pub fn kind(&self) -> BackendKind {
        match self {
            Backend::Cosine => BackendKind::Cosine,
            Backend::Lda { .. } => BackendKind::Lda,
            Backend::Plda { .. } => BackendKind::Plda,
        }
    }

    /// Prepare a scorer (PLDA precomputes its Cholesky factors here).
    pub fn scorer(&self) -> Result<BackendScorer<'_>, BackendError> {
        match self {
            Backend::Cosine => Ok(BackendScorer::Cosine),
            Backend::Lda {
                transform,
                length_norm,
            } => Ok(BackendScorer::Lda {
                transform,
                length_norm: *length_norm,
            }),
            Backend::Plda { model, length_norm } => Ok(BackendScorer::Plda {
                scorer: model.scorer()?,
                length_norm: *length_norm,
            }),
        }
    }
}

pub enum BackendScorer<'a> {
    Cosine,
    Lda {
        transform: &'a LdaTransform,
        length_norm: bool,
    },
    Plda {
        scorer: PldaScorer,
        length_norm: bool,
    },
}

impl BackendScorer<'_> {
    pub fn score(&self, enroll: &[f64], test: &[f64]) -> Result<f64, BackendError> {
        match self {
            BackendScorer::Cosine => cosine_score(enroll, test),
            BackendScorer::Lda {
                transform,
                length_norm,
            } => {
                let (e, t) = if *length_norm {
                    (length_normalize(enroll)?, length_normalize(test)?)
                } else {
                    (enroll.to_vec(), test.to_vec())
                };
                let pe = transform.apply(&e)?;
                let pt = transform.apply(&t)?;
                cosine_score(&pe, &pt)
            }
            BackendScorer::Plda { scorer, length_norm } => {
                if *length_norm {
                    scorer.score(&length_normalize(enroll)?, &length_normalize(test)?)
                } else {
                    scorer.score(enroll, test)
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 4] = b"BKND";
const VERSION: u32 = 1;

fn write_blob(w: &mut impl Write, rows: usize, cols: usize, data: &[f64]) -> std::io::Result<()> {
    bio::write_u32(w, rows as u32)?;
    bio::write_u32(w, cols as u32)?;
    let f32s: Vec<f32> = data.iter().map(|&v| v as f32).collect();
    bio::write_f32_slice(w, &f32s)
}

fn read_blob(r: &mut impl Read) -> Result<(usize, usize, Vec<f64>), BackendError> {
    let rows = bio::read_u32(r)? as usize;
    let cols = bio::read_u32(r)? as usize;
    let data = bio::read_f32_vec(r, rows * cols)?;
    Ok((rows, cols, data.into_iter().map(f64::from).collect()))
}

pub fn save_backend(path: &Path, backend: &Backend) -> Result<(), BackendError> {
    let mut w = BufWriter::new(File::create(path)?);
    bio::write_magic(&mut w, MAGIC)?;
    bio::write_u32(&mut w, VERSION)?;
    match backend {
        Backend::Cosine => {
            bio::write_u8(&mut w, 0)?;
            bio::write_u8(&mut w, 0)?;
        }
        Backend::Lda {
            transform,
            length_norm,
        } => {
            bio::write_u8(&mut w, 1)?;
            bio::write_u8(&mut w, u8::from(*length_norm))?;
            write_blob(&mut w, 1, transform.mean.len(), &transform.mean)?;
            write_blob(
                &mut w,
                transform.projection.rows,
                transform.projection.cols,
                &transform.projection.data,
            )?;
            bio::write_u32(&mut w, transform.classes as u32)?;
        }
        Backend::Plda { model, length_norm } => {
            bio::write_u8(&mut w, 2)?;
            bio::write_u8(&mut w, u8::from(*length_norm))?;
            write_blob(&mut w, 1, model.mean.len(), &model.mean)?;
            write_blob(&mut w, model.between.rows, model.between.cols, &model.between.data)?;
            write_blob(&mut w, model.within.rows, model.within.cols, &model.within.data)?;
        }
    }
    Ok(())
}

pub fn load_backend(path: &Path) -> Result<Backend, BackendError> {
    let mut r = BufReader::new(File::open(path)?);
    bio::expect_magic(&mut r, MAGIC)?;
    bio::expect_version(&mut r, VERSION)?;
    let kind = bio::read_u8(&mut r)?;
    let length_norm = bio::read_u8(&mut r)? != 0;
    match kind {
        0 => Ok(Backend::Cosine),
        1 => {
            let (_, _, mean) = read_blob(&mut r)?;
            let (rows, cols, data) = read_blob(&mut r)?;
            let classes = bio::read_u32(&mut r)? as usize;
            Ok(Backend::Lda {
                transform: LdaTransform {
                    projection: Mat::from_vec(rows, cols, data),
                    mean,
                    classes,
                },
                length_norm,
            })
        }
        2 => {
            let (_, _, mean) = read_blob(&mut r)?;
            let (br, bc, bdata) = read_blob(&mut r)?;
            let (wr, wc, wdata) = read_blob(&mut r)?;
            Ok(Backend::Plda {
                model: PldaModel {
                    mean,
                    between: Mat::from_vec(br, bc, bdata),
                    within: Mat::from_vec(wr, wc, wdata),
                },
                length_norm,
            })
        }
        other => Err(BackendError::Config(format!("unknown backend kind {other}"))),
    }
}
