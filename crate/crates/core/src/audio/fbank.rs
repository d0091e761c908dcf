//! Log-Mel filterbank features.
//!
//! Pipeline: preemphasis -> 25 ms Hamming frames at 10 ms shift -> magnitude
//! spectrum (FFT zero-padded to the next power of two) -> triangular Mel
//! filterbank -> natural log with floor -> per-utterance mean subtraction.
//!
//! Frame count follows `T = 1 + floor((num_samples - frame_len) / shift)`
//! for inputs of at least one frame.

use serde::{Deserialize, Serialize};

use super::dft::{magnitude_spectrum, next_power_of_two};
use super::features::FeatureMatrix;
use super::wav::Waveform;
use super::AudioError;

/// Front-end configuration. `high_freq_hz <= 0` means "Nyquist + value",
/// so the default -40 puts the top filterbank edge 40 Hz below Nyquist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FbankConfig {
    pub num_mel_bins: usize,
    pub frame_length_ms: f64,
    pub frame_shift_ms: f64,
    pub preemphasis: f64,
    pub low_freq_hz: f64,
    pub high_freq_hz: f64,
    /// Filterbank energies are clamped here before the log, so silence stays
    /// finite.
    pub log_floor: f64,
    /// Per-utterance mean normalization over each feature column.
    pub cmn: bool,
}

impl Default for FbankConfig {
    fn default() -> Self {
        FbankConfig {
            num_mel_bins: 40,
            frame_length_ms: 25.0,
            frame_shift_ms: 10.0,
            preemphasis: 0.97,
            low_freq_hz: 20.0,
            high_freq_hz: -40.0,
            log_floor: 1e-10,
            cmn: true,
        }
    }
}

impl FbankConfig {
    pub fn resolved_high_freq(&self, sample_rate: u32) -> f64 {
        let nyquist = f64::from(sample_rate) / 2.0;
        if self.high_freq_hz > 0.0 {
            self.high_freq_hz
        } else {
            nyquist + self.high_freq_hz
        }
    }

    pub fn validate(&self, sample_rate: u32) -> Result<(), AudioError> {
        let nyquist = f64::from(sample_rate) / 2.0;
        let high = self.resolved_high_freq(sample_rate);
        if self.num_mel_bins == 0 {
            return Err(AudioError::InvalidConfig("num_mel_bins must be > 0".into()));
        }
        if !(self.low_freq_hz > 0.0 && self.low_freq_hz < high && high <= nyquist) {
            return Err(AudioError::InvalidConfig(format!(
                "need 0 < low ({}) < high ({high}) <= nyquist ({nyquist})",
                self.low_freq_hz
            )));
        }
        if !(0.0..1.0).contains(&self.preemphasis) {
            return Err(AudioError::InvalidConfig(format!(
                "preemphasis {} outside [0, 1)",
                self.preemphasis
            )));
        }
        if self.frame_length_ms <= 0.0 || self.frame_shift_ms <= 0.0 {
            return Err(AudioError::InvalidConfig("frame sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn frame_len_samples(&self, sample_rate: u32) -> usize {
        (self.frame_length_ms * f64::from(sample_rate) / 1000.0).round() as usize
    }

    pub fn frame_shift_samples(&self, sample_rate: u32) -> usize {
        (self.frame_shift_ms * f64::from(sample_rate) / 1000.0).round() as usize
    }
}

/// `mel = 2595 * log10(1 + hz / 700)`.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Center frequency (Hz) of each Mel bin under `cfg`.
pub fn mel_bin_centers(cfg: &FbankConfig, sample_rate: u32) -> Vec<f64> {
    let mel_lo = hz_to_mel(cfg.low_freq_hz);
    let mel_hi = hz_to_mel(cfg.resolved_high_freq(sample_rate));
    let step = (mel_hi - mel_lo) / (cfg.num_mel_bins + 1) as f64;
    (0..cfg.num_mel_bins)
        .map(|m| mel_to_hz(mel_lo + step * (m + 1) as f64))
        .collect()
}

/// Dense triangular filter weights, one row per Mel bin, one column per FFT
/// bin (0..=n_fft/2). Triangles are evaluated at the exact bin frequencies
/// rather than snapped to bin indices.
pub fn mel_filter_weights(cfg: &FbankConfig, sample_rate: u32, n_fft: usize) -> Vec<Vec<f64>> {
    let mel_lo = hz_to_mel(cfg.low_freq_hz);
    let mel_hi = hz_to_mel(cfg.resolved_high_freq(sample_rate));
    let step = (mel_hi - mel_lo) / (cfg.num_mel_bins + 1) as f64;
    let n_bins = n_fft / 2 + 1;
    let bin_hz = f64::from(sample_rate) / n_fft as f64;
    let mut weights = Vec::with_capacity(cfg.num_mel_bins);
    for m in 0..cfg.num_mel_bins {
        let left = mel_lo + step * m as f64;
        let center = left + step;
        let right = center + step;
        let mut row = vec![0.0; n_bins];
        for (k, w) in row.iter_mut().enumerate() {
            let mel = hz_to_mel(k as f64 * bin_hz);
            if mel > left && mel < right {
                *w = if mel <= center {
                    (mel - left) / (center - left)
                } else {
                    (right - mel) / (right - center)
                };
            }
        }
        weights.push(row);
    }
    weights
}

fn hamming_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.54 - 0.46 * (std::f64::consts::TAU * n as f64 / (len - 1) as f64).cos())
        .collect()
}

fn preemphasize(samples: &[i16], coeff: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    out.push(f64::from(samples[0]));
    for i in 1..samples.len() {
        out.push(f64::from(samples[i]) - coeff * f64::from(samples[i - 1]));
    }
    out
}

/// T x num_mel_bins log-Mel energies with per-utterance CMN.
pub fn compute_fbank(wav: &Waveform, cfg: &FbankConfig) -> Result<FeatureMatrix, AudioError> {
    cfg.validate(wav.sample_rate_hz)?;
    let frame_len = cfg.frame_len_samples(wav.sample_rate_hz);
    let shift = cfg.frame_shift_samples(wav.sample_rate_hz);
    if wav.samples.len() < frame_len {
        return Err(AudioError::EmptyFeature);
    }
    let num_frames = 1 + (wav.samples.len() - frame_len) / shift;
    let signal = preemphasize(&wav.samples, cfg.preemphasis);
    let window = hamming_window(frame_len);
    let n_fft = next_power_of_two(frame_len);
    let mel = mel_filter_weights(cfg, wav.sample_rate_hz, n_fft);
    let d = cfg.num_mel_bins;

    let mut out = vec![0f64; num_frames * d];
    let mut frame = vec![0f64; frame_len];
    for t in 0..num_frames {
        let start = t * shift;
        for (i, f) in frame.iter_mut().enumerate() {
            *f = signal[start + i] * window[i];
        }
        let mags = magnitude_spectrum(&frame, n_fft);
        for (m, row) in mel.iter().enumerate() {
            let mut e = 0.0;
            for (w, s) in row.iter().zip(mags.iter()) {
                e += w * s;
            }
            out[t * d + m] = e.max(cfg.log_floor).ln();
        }
    }

    if cfg.cmn {
        for c in 0..d {
            let mut mean = 0.0;
            for t in 0..num_frames {
                mean += out[t * d + c];
            }
            mean /= num_frames as f64;
            for t in 0..num_frames {
                out[t * d + c] -= mean;
            }
        }
    }

    let data: Vec<f32> = out.iter().map(|&v| v as f32).collect();
    Ok(FeatureMatrix::new(num_frames, d, data, cfg.frame_shift_ms))
}

/// Concatenate each frame with `left` predecessors and `right` successors,
/// replicating edge frames at the utterance boundaries. T is preserved;
/// width grows to `(left + right + 1) * D`.
pub fn splice_frames(
    feat: &FeatureMatrix,
    left: usize,
    right: usize,
) -> Result<FeatureMatrix, AudioError> {
    let t = feat.rows();
    if t == 0 {
        return Err(AudioError::EmptyFeature);
    }
    let d = feat.cols();
    let width = (left + right + 1) * d;
    let mut data = Vec::with_capacity(t * width);
    for center in 0..t as i64 {
        for off in -(left as i64)..=(right as i64) {
            let src = (center + off).clamp(0, t as i64 - 1) as usize;
            data.extend_from_slice(feat.row(src));
        }
    }
    Ok(FeatureMatrix::new(t, width, data, feat.frame_shift_ms))
}

/// Optional MFCC export: 19 cepstral coefficients plus log energy, with
/// delta and delta-delta appended (60 dims total). Not consumed by the
/// embedding pipeline; provided for users who want a conventional raw
/// feature dump.
pub fn compute_mfcc(wav: &Waveform, cfg: &FbankConfig) -> Result<FeatureMatrix, AudioError> {
    let no_cmn = FbankConfig {
        cmn: false,
        ..cfg.clone()
    };
    cfg.validate(wav.sample_rate_hz)?;
    let frame_len = no_cmn.frame_len_samples(wav.sample_rate_hz);
    let shift = no_cmn.frame_shift_samples(wav.sample_rate_hz);
    if wav.samples.len() < frame_len {
        return Err(AudioError::EmptyFeature);
    }
    let fb = compute_fbank(wav, &no_cmn)?;
    let t = fb.rows();
    let n_mel = fb.cols();
    let n_ceps = 19;
    let base_dim = n_ceps + 1;

    let signal = preemphasize(&wav.samples, no_cmn.preemphasis);
    let mut base = vec![0f64; t * base_dim];
    for ti in 0..t {
        // Frame log energy.
        let start = ti * shift;
        let mut energy = 0.0;
        for s in &signal[start..start + frame_len] {
            energy += s * s;
        }
        base[ti * base_dim] = energy.max(no_cmn.log_floor).ln();
        // DCT-II of the log-Mel energies; keep c1..c19.
        let row = fb.row(ti);
        for k in 1..=n_ceps {
            let mut s = 0.0;
            for (n, &e) in row.iter().enumerate() {
                s += f64::from(e)
                    * (std::f64::consts::PI * (n as f64 + 0.5) * k as f64 / n_mel as f64).cos();
            }
            base[ti * base_dim + k] = s * (2.0 / n_mel as f64).sqrt();
        }
    }

    let deltas = regression_deltas(&base, t, base_dim, 2);
    let ddeltas = regression_deltas(&deltas, t, base_dim, 2);
    let dim = base_dim * 3;
    let mut data = Vec::with_capacity(t * dim);
    for ti in 0..t {
        for src in [&base, &deltas, &ddeltas] {
            for k in 0..base_dim {
                data.push(src[ti * base_dim + k] as f32);
            }
        }
    }
    Ok(FeatureMatrix::new(t, dim, data, no_cmn.frame_shift_ms))
}

/// Standard regression deltas over a +/- `win` frame window with edge
/// clamping.
fn regression_deltas(features: &[f64], t: usize, d: usize, win: usize) -> Vec<f64> {
    let denom: f64 = 2.0 * (1..=win).map(|n| (n * n) as f64).sum::<f64>();
    let mut out = vec![0f64; t * d];
    for ti in 0..t {
        for n in 1..=win {
            let plus = (ti + n).min(t - 1);
            let minus = ti.saturating_sub(n);
            for k in 0..d {
                out[ti * d + k] += n as f64 * (features[plus * d + k] - features[minus * d + k]);
            }
        }
        for k in 0..d {
            out[ti * d + k] /= denom;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use std::f64::consts::TAU;

    fn silence(n: usize) -> Waveform {
        Waveform {
            samples: vec![0i16; n],
            sample_rate_hz: 16000,
        }
    }

    fn tone(freq: f64, n: usize, rate: u32) -> Waveform {
        let samples = (0..n)
            .map(|i| (8000.0 * (TAU * freq * i as f64 / f64::from(rate)).sin()) as i16)
            .collect();
        Waveform {
            samples,
            sample_rate_hz: rate,
        }
    }

    #[test]
    fn frame_count_for_one_second() {
        let feat = compute_fbank(&silence(16000), &FbankConfig::default()).unwrap();
        assert_eq!(feat.rows(), 98); // 1 + (16000 - 400) / 160
        assert_eq!(feat.cols(), 40);
    }

    #[test]
    fn frame_count_formula_holds_over_random_lengths() {
        let cfg = FbankConfig::default();
        let mut rng = Rng::new(404);
        for _ in 0..100 {
            let n = 400 + rng.below(32000);
            let feat = compute_fbank(&silence(n), &cfg).unwrap();
            assert_eq!(feat.rows(), 1 + (n - 400) / 160, "n = {n}");
        }
    }

    #[test]
    fn too_short_utterance_is_empty_feature_error() {
        let cfg = FbankConfig::default();
        assert!(matches!(
            compute_fbank(&silence(399), &cfg),
            Err(AudioError::EmptyFeature)
        ));
    }

    #[test]
    fn all_zero_audio_stays_finite() {
        let feat = compute_fbank(&silence(16000), &FbankConfig::default()).unwrap();
        assert!(feat.all_finite());
    }

    #[test]
    fn cmn_zeroes_column_sums() {
        let wav = tone(440.0, 16000, 16000);
        let feat = compute_fbank(&wav, &FbankConfig::default()).unwrap();
        let t = feat.rows() as f32;
        for c in 0..feat.cols() {
            let sum: f32 = (0..feat.rows()).map(|r| feat.row(r)[c]).sum();
            assert!(sum.abs() < 1e-6 * t, "column {c} sum {sum}");
        }
    }

    /// Naive DFT, coded independently of the fft module.
    fn naive_dft_magnitude(signal: &[f64], n_fft: usize) -> Vec<f64> {
        (0..=n_fft / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, &x) in signal.iter().enumerate() {
                    let ang = -TAU * k as f64 * n as f64 / n_fft as f64;
                    re += x * ang.cos();
                    im += x * ang.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    #[test]
    fn tone_at_mel_center_peaks_in_that_bin() {
        let cfg = FbankConfig {
            cmn: false,
            ..FbankConfig::default()
        };
        let rate = 16000;
        let centers = mel_bin_centers(&cfg, rate);
        for &bin in &[5usize, 15, 25, 35] {
            let wav = tone(centers[bin], 8000, rate);
            let feat = compute_fbank(&wav, &cfg).unwrap();
            for r in 0..feat.rows() {
                let row = feat.row(r);
                let argmax = row
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0;
                assert_eq!(argmax, bin, "frame {r}: expected peak in bin {bin}");
            }

            // Cross-check one frame against an independent reference DFT fed
            // through the same triangle weights.
            let frame_len = cfg.frame_len_samples(rate);
            let n_fft = next_power_of_two(frame_len);
            let signal = preemphasize(&wav.samples[..frame_len], cfg.preemphasis);
            let window = hamming_window(frame_len);
            let windowed: Vec<f64> = signal.iter().zip(window.iter()).map(|(s, w)| s * w).collect();
            let mags = naive_dft_magnitude(&windowed, n_fft);
            let mel = mel_filter_weights(&cfg, rate, n_fft);
            let energies: Vec<f64> = mel
                .iter()
                .map(|row| {
                    row.iter()
                        .zip(mags.iter())
                        .map(|(w, m)| w * m)
                        .sum::<f64>()
                        .max(cfg.log_floor)
                        .ln()
                })
                .collect();
            let got = feat.row(0);
            for (m, (&e, &g)) in energies.iter().zip(got.iter()).enumerate() {
                assert!(
                    (e - f64::from(g)).abs() < 1e-4,
                    "bin {m}: reference {e} vs fbank {g}"
                );
            }
        }
    }

    #[test]
    fn invalid_frequency_range_is_rejected() {
        let cfg = FbankConfig {
            low_freq_hz: 9000.0,
            ..FbankConfig::default()
        };
        assert!(matches!(
            compute_fbank(&silence(16000), &cfg),
            Err(AudioError::InvalidConfig(_))
        ));
    }

    // --- splicing ---

    fn small_feat(t: usize, d: usize) -> FeatureMatrix {
        let data: Vec<f32> = (0..t * d).map(|i| i as f32).collect();
        FeatureMatrix::new(t, d, data, 10.0)
    }

    #[test]
    fn splice_single_frame_replicates_it() {
        let feat = small_feat(1, 3);
        let spliced = splice_frames(&feat, 4, 4).unwrap();
        assert_eq!(spliced.rows(), 1);
        assert_eq!(spliced.cols(), 27);
        for k in 0..9 {
            assert_eq!(&spliced.row(0)[k * 3..(k + 1) * 3], feat.row(0));
        }
    }

    #[test]
    fn splice_zero_context_is_identity() {
        let feat = small_feat(7, 4);
        let spliced = splice_frames(&feat, 0, 0).unwrap();
        assert_eq!(spliced.rows(), feat.rows());
        assert_eq!(spliced.data(), feat.data());
    }

    #[test]
    fn splice_middle_row_is_exact_concatenation() {
        let feat = small_feat(20, 2);
        let spliced = splice_frames(&feat, 4, 4).unwrap();
        assert_eq!(spliced.rows(), 20);
        let row10 = spliced.row(10);
        for (k, src) in (6..=14).enumerate() {
            assert_eq!(&row10[k * 2..(k + 1) * 2], feat.row(src), "offset {k}");
        }
    }

    #[test]
    fn splice_empty_input_is_error() {
        let feat = FeatureMatrix::new(0, 4, vec![], 10.0);
        assert!(matches!(
            splice_frames(&feat, 4, 4),
            Err(AudioError::EmptyFeature)
        ));
    }

    #[test]
    fn splice_preserves_frame_count() {
        let mut rng = Rng::new(8);
        for _ in 0..20 {
            let t = 1 + rng.below(50);
            let (l, r) = (rng.below(5), rng.below(5));
            let feat = small_feat(t, 3);
            let spliced = splice_frames(&feat, l, r).unwrap();
            assert_eq!(spliced.rows(), t);
            assert_eq!(spliced.cols(), (l + r + 1) * 3);
        }
    }

    // --- mfcc export ---

    #[test]
    fn mfcc_export_has_sixty_dims_and_stays_finite() {
        let wav = tone(300.0, 8000, 16000);
        let feat = compute_mfcc(&wav, &FbankConfig::default()).unwrap();
        assert_eq!(feat.cols(), 60);
        assert_eq!(feat.rows(), 1 + (8000 - 400) / 160);
        assert!(feat.all_finite());
    }
}
