//! Utterance-level speaker embeddings.
//!
//! A d-vector is the arithmetic mean of the per-frame features the network
//! emits for one utterance. Enrollment pools several utterances with an
//! unweighted mean of their d-vectors. No length normalization happens here;
//! that is the backend's business.
//!
//! Vector archive: magic `DVEC`, u32 version = 1, u32 count, u32 dim, then
//! per record a length-prefixed UTF-8 utterance id, a length-prefixed UTF-8
//! speaker id (may be empty), u32 frames averaged, and dim float32 LE values.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::audio::FeatureMatrix;
use crate::bytesio as bio;
use crate::bytesio::BytesError;
use crate::ctdnn::{CtdnnError, CtdnnModel};
use crate::nn::Mat;

/// Utterance-level speaker embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct DVector {
    pub values: Vec<f32>,
    pub utt_id: String,
    /// Empty for unlabeled vectors.
    pub speaker_id: String,
    pub num_frames_averaged: u32,
}

#[derive(Debug)]
pub enum DvecError {
    /// Input shorter than the receptive field.
    TooShort { needed: usize, got: usize },
    /// No enrollment utterance was long enough.
    Enrollment,
    /// Truncation request longer than the utterance.
    Length { requested: usize, available: usize },
    Model(CtdnnError),
    Format(BytesError),
    Io(std::io::Error),
}

impl std::fmt::Display for DvecError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DvecError::TooShort { needed, got } => {
                write!(f, "utterance too short: {got} frames, need {needed}")
            }
            DvecError::Enrollment => write!(f, "no enrollment utterance is long enough"),
            DvecError::Length { requested, available } => {
                write!(f, "cannot take {requested} frames from {available}")
            }
            DvecError::Model(e) => write!(f, "{e}"),
            DvecError::Format(e) => write!(f, "vector archive: {e}"),
            DvecError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for DvecError {}

impl From<CtdnnError> for DvecError {
    fn from(e: CtdnnError) -> Self {
        match e {
            CtdnnError::TooShort { needed, got } => DvecError::TooShort { needed, got },
            other => DvecError::Model(other),
        }
    }
}

impl From<BytesError> for DvecError {
    fn from(e: BytesError) -> Self {
        DvecError::Format(e)
    }
}

impl From<std::io::Error> for DvecError {
    fn from(e: std::io::Error) -> Self {
        DvecError::Io(e)
    }
}

/// Column means of a feature sequence, accumulated in double precision.
pub fn mean_rows(features: &Mat<f32>) -> Vec<f32> {
    let mut acc = vec![0f64; features.cols];
    for r in 0..features.rows {
        for (a, &v) in acc.iter_mut().zip(features.row(r).iter()) {
            *a += f64::from(v);
        }
    }
    let n = features.rows as f64;
    acc.iter().map(|&a| (a / n) as f32).collect()
}

/// Average the network's per-frame features over one utterance.
pub fn extract_dvector(
    model: &CtdnnModel<f32>,
    fbank: &Mat<f32>,
    utt_id: &str,
    speaker_id: &str,
) -> Result<DVector, DvecError> {
    let features = model.forward_features(fbank)?;
    Ok(DVector {
        values: mean_rows(&features),
        utt_id: utt_id.to_string(),
        speaker_id: speaker_id.to_string(),
        num_frames_averaged: features.rows as u32,
    })
}

/// Pool enrollment utterances: unweighted mean of per-utterance d-vectors.
/// Utterances shorter than the receptive field are skipped; if none remain
/// the enrollment fails.
pub fn enroll_speaker(
    model: &CtdnnModel<f32>,
    utterances: &[Mat<f32>],
    speaker_id: &str,
) -> Result<DVector, DvecError> {
    let mut acc: Vec<f64> = vec![0.0; model.config.feature_dim];
    let mut used = 0usize;
    let mut frames = 0u32;
    for fbank in utterances {
        match extract_dvector(model, fbank, "", speaker_id) {
            Ok(d) => {
                for (a, &v) in acc.iter_mut().zip(d.values.iter()) {
                    *a += f64::from(v);
                }
                frames += d.num_frames_averaged;
                used += 1;
            }
            Err(DvecError::TooShort { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(DvecError::Enrollment);
    }
    Ok(DVector {
        values: acc.iter().map(|&a| (a / used as f64) as f32).collect(),
        utt_id: format!("enroll:{speaker_id}"),
        speaker_id: speaker_id.to_string(),
        num_frames_averaged: frames,
    })
}

/// First `n_frames` frames of an utterance (short-segment test construction).
pub fn truncate_frames(feat: &FeatureMatrix, n_frames: usize) -> Result<FeatureMatrix, DvecError> {
    if n_frames > feat.rows() {
        return Err(DvecError::Length {
            requested: n_frames,
            available: feat.rows(),
        });
    }
    Ok(feat.take_rows(n_frames))
}

// ---------------------------------------------------------------------------
// Vector archive
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 4] = b"DVEC";
const VERSION: u32 = 1;

pub fn save_dvectors(path: &Path, vectors: &[DVector]) -> Result<(), DvecError> {
    let dim = vectors.first().map(|v| v.values.len()).unwrap_or(0);
    let mut w = BufWriter::new(File::create(path)?);
    bio::write_magic(&mut w, MAGIC)?;
    bio::write_u32(&mut w, VERSION)?;
    bio::write_u32(&mut w, vectors.len() as u32)?;
    bio::write_u32(&mut w, dim as u32)?;
    for v in vectors {
        assert_eq!(v.values.len(), dim, "mixed dimensions in one archive");
        bio::write_str(&mut w, &v.utt_id)?;
        bio::write_str(&mut w, &v.speaker_id)?;
        bio::write_u32(&mut w, v.num_frames_averaged)?;
        bio::write_f32_slice(&mut w, &v.values)?;
    }
    Ok(())
}

pub fn load_dvectors(path: &Path) -> Result<Vec<DVector>, DvecError> {
    let mut r = BufReader::new(File::open(path)?);
    bio::expect_magic(&mut r, MAGIC)?;
    bio::expect_version(&mut r, VERSION)?;
    let count = bio::read_u32(&mut r)? as usize;
    let dim = bio::read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let utt_id = bio::read_str(&mut r, 1 << 16)?;
        let speaker_id = bio::read_str(&mut r, 1 << 16)?;
        let num_frames_averaged = bio::read_u32(&mut r)?;
        let values = bio::read_f32_vec(&mut r, dim)?;
        out.push(DVector {
            values,
            utt_id,
            speaker_id,
            num_frames_averaged,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctdnn::{build_ctdnn, CtdnnConfig};
    use crate::rng::Rng;

    fn model() -> CtdnnModel<f32> {
        build_ctdnn::<f32>(&CtdnnConfig::small(3), 50).unwrap()
    }

    fn random_fbank(rng: &mut Rng, t: usize, bins: usize) -> Mat<f32> {
        Mat::from_vec(
            t,
            bins,
            (0..t * bins)
                .map(|_| rng.uniform_in(-1.0, 1.0) as f32)
                .collect(),
        )
    }

    #[test]
    fn twenty_frames_yield_the_single_feature_row() {
        let m = model();
        let mut rng = Rng::new(60);
        let fbank = random_fbank(&mut rng, 20, 12);
        let d = extract_dvector(&m, &fbank, "u0", "s0").unwrap();
        assert_eq!(d.num_frames_averaged, 1);
        let features = m.forward_features(&fbank).unwrap();
        assert_eq!(features.rows, 1);
        assert_eq!(d.values, features.row(0));
    }

    #[test]
    fn mean_is_permutation_invariant() {
        let m = model();
        let mut rng = Rng::new(61);
        let fbank = random_fbank(&mut rng, 60, 12);
        let features = m.forward_features(&fbank).unwrap();
        let base = mean_rows(&features);
        let mut order: Vec<usize> = (0..features.rows).collect();
        rng.shuffle(&mut order);
        let mut shuffled = Mat::zeros(features.rows, features.cols);
        for (dst, &src) in order.iter().enumerate() {
            shuffled.row_mut(dst).copy_from_slice(features.row(src));
        }
        let permuted = mean_rows(&shuffled);
        for (a, b) in base.iter().zip(permuted.iter()) {
            assert!((f64::from(*a) - f64::from(*b)).abs() < 1e-9);
        }
    }

    #[test]
    fn hundred_frames_match_independent_recount() {
        let m = model();
        let mut rng = Rng::new(62);
        let fbank = random_fbank(&mut rng, 100, 12);
        let d = extract_dvector(&m, &fbank, "u0", "").unwrap();
        assert_eq!(d.num_frames_averaged, 81);
        // Recount: plain sum / divide in a separate pass.
        let features = m.forward_features(&fbank).unwrap();
        for c in 0..features.cols {
            let mut s = 0.0f64;
            for r in 0..features.rows {
                s += f64::from(features.get(r, c));
            }
            // Quantize the recount to storage precision before comparing.
            let mean = (s / features.rows as f64) as f32;
            assert!((f64::from(mean) - f64::from(d.values[c])).abs() < 1e-9);
        }
    }

    #[test]
    fn too_short_input_is_an_error() {
        let m = model();
        let mut rng = Rng::new(63);
        let fbank = random_fbank(&mut rng, 19, 12);
        assert!(matches!(
            extract_dvector(&m, &fbank, "u", ""),
            Err(DvecError::TooShort { needed: 20, got: 19 })
        ));
    }

    #[test]
    fn enrollment_of_one_equals_extraction() {
        let m = model();
        let mut rng = Rng::new(64);
        let fbank = random_fbank(&mut rng, 40, 12);
        let single = extract_dvector(&m, &fbank, "u", "s").unwrap();
        let enrolled = enroll_speaker(&m, &[fbank], "s").unwrap();
        assert_eq!(enrolled.values, single.values);
    }

    #[test]
    fn enrollment_of_identical_utterances_is_idempotent() {
        let m = model();
        let mut rng = Rng::new(65);
        let fbank = random_fbank(&mut rng, 35, 12);
        let one = extract_dvector(&m, &fbank, "u", "s").unwrap();
        let two = enroll_speaker(&m, &[fbank.clone(), fbank], "s").unwrap();
        for (a, b) in one.values.iter().zip(two.values.iter()) {
            assert!((f64::from(*a) - f64::from(*b)).abs() < 1e-7);
        }
    }

    #[test]
    fn enrollment_matches_recount_and_is_order_invariant() {
        let m = model();
        let mut rng = Rng::new(66);
        let utts: Vec<Mat<f32>> = (0..10)
            .map(|_| {
                let t = 25 + rng.below(30);
                random_fbank(&mut rng, t, 12)
            })
            .collect();
        let pooled = enroll_speaker(&m, &utts, "s").unwrap();
        // Independent recount.
        let mut acc = vec![0f64; 5];
        for u in &utts {
            let d = extract_dvector(&m, u, "", "").unwrap();
            for (a, &v) in acc.iter_mut().zip(d.values.iter()) {
                *a += f64::from(v);
            }
        }
        for (a, &p) in acc.iter().zip(pooled.values.iter()) {
            let recount = (a / 10.0) as f32;
            assert!((f64::from(recount) - f64::from(p)).abs() < 1e-9);
        }
        // Reversed order pools to the same vector.
        let mut reversed = utts.clone();
        reversed.reverse();
        let pooled_rev = enroll_speaker(&m, &reversed, "s").unwrap();
        for (a, b) in pooled.values.iter().zip(pooled_rev.values.iter()) {
            assert!((f64::from(*a) - f64::from(*b)).abs() < 1e-9);
        }
    }

    #[test]
    fn enrollment_with_only_short_utterances_fails() {
        let m = model();
        let mut rng = Rng::new(67);
        let utts = vec![random_fbank(&mut rng, 10, 12), random_fbank(&mut rng, 19, 12)];
        assert!(matches!(
            enroll_speaker(&m, &utts, "s"),
            Err(DvecError::Enrollment)
        ));
    }

    #[test]
    fn truncation_cases() {
        let feat = FeatureMatrix::new(50, 12, vec![0.5; 50 * 12], 10.0);
        let same = truncate_frames(&feat, 50).unwrap();
        assert_eq!(same.rows(), 50);
        let head = truncate_frames(&feat, 20).unwrap();
        assert_eq!(head.rows(), 20);
        assert!(matches!(
            truncate_frames(&feat, 51),
            Err(DvecError::Length { requested: 51, available: 50 })
        ));
    }

    #[test]
    fn truncate_then_extract_counts_features() {
        let m = model();
        let mut rng = Rng::new(68);
        let mat = random_fbank(&mut rng, 80, 12);
        let feat = FeatureMatrix::new(80, 12, mat.data.clone(), 10.0);
        for (n, want) in [(20usize, 1usize), (50, 31)] {
            let cut = truncate_frames(&feat, n).unwrap();
            let cut_mat = Mat::from_vec(cut.rows(), cut.cols(), cut.data().to_vec());
            let d = extract_dvector(&m, &cut_mat, "u", "").unwrap();
            assert_eq!(d.num_frames_averaged as usize, want, "n = {n}");
        }
    }

    #[test]
    fn archive_round_trip_is_byte_identical() {
        let dir = std::env::temp_dir().join("voxvec-dvec-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let mut rng = Rng::new(69);
        let vectors: Vec<DVector> = (0..5)
            .map(|i| DVector {
                values: (0..7).map(|_| rng.uniform_in(-2.0, 2.0) as f32).collect(),
                utt_id: format!("utt-{i}"),
                speaker_id: if i % 2 == 0 { format!("spk-{i}") } else { String::new() },
                num_frames_averaged: 10 + i as u32,
            })
            .collect();
        let p1 = dir.join("a.dvec");
        let p2 = dir.join("b.dvec");
        save_dvectors(&p1, &vectors).unwrap();
        let loaded = load_dvectors(&p1).unwrap();
        assert_eq!(loaded, vectors);
        save_dvectors(&p2, &loaded).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn truncated_archive_is_a_typed_error() {
        let dir = std::env::temp_dir().join("voxvec-dvec-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let vectors = vec![DVector {
            values: vec![1.0; 8],
            utt_id: "u".into(),
            speaker_id: "s".into(),
            num_frames_averaged: 3,
        }];
        let p = dir.join("trunc.dvec");
        save_dvectors(&p, &vectors).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(
            load_dvectors(&p),
            Err(DvecError::Format(BytesError::Truncated))
        ));
    }
}
