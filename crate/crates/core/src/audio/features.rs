//! Per-utterance feature matrices and the binary feature archive.
//!
//! Archive layout: magic `FEAT`, u32 version = 1, u32 rows, u32 cols, then
//! rows x cols float32 little-endian values in row-major order. One file per
//! utterance.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use super::AudioError;
use crate::bytesio as bio;

const MAGIC: &[u8; 4] = b"FEAT";
const VERSION: u32 = 1;

/// T x D sequence of per-frame acoustic features, row-major. The frame shift
/// carries the implied time scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
    pub frame_shift_ms: f64,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>, frame_shift_ms: f64) -> Self {
        assert_eq!(rows * cols, data.len(), "feature data length mismatch");
        FeatureMatrix {
            rows,
            cols,
            data,
            frame_shift_ms,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f32] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// First `n` frames.
    pub fn take_rows(&self, n: usize) -> FeatureMatrix {
        assert!(n <= self.rows);
        FeatureMatrix {
            rows: n,
            cols: self.cols,
            data: self.data[..n * self.cols].to_vec(),
            frame_shift_ms: self.frame_shift_ms,
        }
    }
}

pub fn save_features(path: &Path, feat: &FeatureMatrix) -> Result<(), AudioError> {
    let mut w = BufWriter::new(File::create(path)?);
    bio::write_magic(&mut w, MAGIC)?;
    bio::write_u32(&mut w, VERSION)?;
    bio::write_u32(&mut w, feat.rows as u32)?;
    bio::write_u32(&mut w, feat.cols as u32)?;
    bio::write_f32_slice(&mut w, &feat.data)?;
    Ok(())
}

pub fn load_features(path: &Path) -> Result<FeatureMatrix, AudioError> {
    let mut r = BufReader::new(File::open(path)?);
    bio::expect_magic(&mut r, MAGIC)?;
    bio::expect_version(&mut r, VERSION)?;
    let rows = bio::read_u32(&mut r)? as usize;
    let cols = bio::read_u32(&mut r)? as usize;
    let data = bio::read_f32_vec(&mut r, rows * cols)?;
    // Frame shift is fixed by the front-end configuration, not stored.
    Ok(FeatureMatrix::new(rows, cols, data, 10.0))
}
