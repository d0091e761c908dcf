//! Pipeline configuration file (UTF-8 JSON, unknown keys rejected).
//!
//! One global seed fans out to per-stage seeds by fixed hashing, so any
//! stage can be re-run in isolation and reproduce its outputs exactly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use voxvec_core::audio::FbankConfig;
use voxvec_core::ctdnn::{ConvSpec, CtdnnConfig, TdSpec};
use voxvec_core::synth::SynthSpec;
use voxvec_core::train::TrainConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub corpus: PathBuf,
    pub features: PathBuf,
    pub models: PathBuf,
    pub vectors: PathBuf,
    pub results: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            corpus: "work/corpus".into(),
            features: "work/features".into(),
            models: "work/models".into(),
            vectors: "work/vectors".into(),
            results: "work/results".into(),
        }
    }
}

/// Corpus generation knobs (the stage seed comes from the global seed).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub num_speakers: usize,
    pub utts_per_speaker: usize,
    pub utt_seconds_mean: f64,
    pub utt_seconds_jitter: f64,
    pub sample_rate: u32,
    pub snr_db: f64,
    pub f0_drift: f64,
    pub peak: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let s = SynthSpec::default();
        SynthSection {
            num_speakers: 40,
            utts_per_speaker: 20,
            utt_seconds_mean: 3.0,
            utt_seconds_jitter: 0.25,
            sample_rate: s.sample_rate,
            snr_db: s.snr_db,
            f0_drift: s.f0_drift,
            peak: s.peak,
        }
    }
}

impl SynthSection {
    pub fn to_spec(&self, seed: u64) -> SynthSpec {
        SynthSpec {
            num_speakers: self.num_speakers,
            utts_per_speaker: self.utts_per_speaker,
            utt_seconds_mean: self.utt_seconds_mean,
            utt_seconds_jitter: self.utt_seconds_jitter,
            sample_rate: self.sample_rate,
            seed,
            snr_db: self.snr_db,
            f0_drift: self.f0_drift,
            peak: self.peak,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub train_speakers: usize,
    pub eval_speakers: usize,
    pub enroll_utts: usize,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            train_speakers: 32,
            eval_speakers: 8,
            enroll_utts: 10,
        }
    }
}

/// Network architecture; the output width is derived from the training data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchSection {
    pub input_bins: usize,
    pub splice_left: usize,
    pub splice_right: usize,
    pub conv1: ConvSpec,
    pub conv2: ConvSpec,
    pub bottleneck_dim: usize,
    pub td1: TdSpec,
    pub td2: TdSpec,
    pub feature_dim: usize,
}

impl Default for ArchSection {
    fn default() -> Self {
        let c = CtdnnConfig::canonical(2);
        ArchSection {
            input_bins: c.input_bins,
            splice_left: c.splice_left,
            splice_right: c.splice_right,
            conv1: c.conv1,
            conv2: c.conv2,
            bottleneck_dim: c.bottleneck_dim,
            td1: c.td1,
            td2: c.td2,
            feature_dim: c.feature_dim,
        }
    }
}

impl ArchSection {
    pub fn to_config(&self, num_speakers: usize) -> CtdnnConfig {
        CtdnnConfig {
            input_bins: self.input_bins,
            splice_left: self.splice_left,
            splice_right: self.splice_right,
            conv1: self.conv1.clone(),
            conv2: self.conv2.clone(),
            bottleneck_dim: self.bottleneck_dim,
            td1: self.td1.clone(),
            td2: self.td2.clone(),
            feature_dim: self.feature_dim,
            num_speakers,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lr_initial: f64,
    pub momentum: f64,
    pub minibatch_frames: usize,
    pub chunk_windows: usize,
    pub epochs_max: usize,
    pub lr_halve_threshold: f64,
    pub max_plateaus: usize,
    pub holdout_max_frames: usize,
    pub loss_ema_alpha: f64,
    /// Utterances per speaker held out of SGD for the plateau schedule.
    pub holdout_utts_per_speaker: usize,
    /// Train on only the first N speakers of the training split (0 = all);
    /// the training-set-size sweep uses this.
    pub train_speakers: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            lr_initial: t.lr_initial,
            momentum: t.momentum,
            minibatch_frames: t.minibatch_frames,
            chunk_windows: t.chunk_windows,
            epochs_max: t.epochs_max,
            lr_halve_threshold: t.lr_halve_threshold,
            max_plateaus: t.max_plateaus,
            holdout_max_frames: t.holdout_max_frames,
            loss_ema_alpha: t.loss_ema_alpha,
            holdout_utts_per_speaker: 1,
            train_speakers: 0,
        }
    }
}

impl TrainSection {
    pub fn to_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lr_initial: self.lr_initial,
            momentum: self.momentum,
            minibatch_frames: self.minibatch_frames,
            chunk_windows: self.chunk_windows,
            epochs_max: self.epochs_max,
            seed,
            lr_halve_threshold: self.lr_halve_threshold,
            max_plateaus: self.max_plateaus,
            holdout_max_frames: self.holdout_max_frames,
            loss_ema_alpha: self.loss_ema_alpha,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendSection {
    /// LDA projection dimension; 0 derives min(150, classes - 1, dim).
    pub lda_dim: usize,
    pub length_norm: bool,
}

impl Default for BackendSection {
    fn default() -> Self {
        BackendSection {
            lda_dim: 0,
            length_norm: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Test-utterance frame budgets; 0 means the full utterance.
    pub test_frames: Vec<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            test_frames: vec![0, 100, 50, 20],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub synth: SynthSection,
    pub split: SplitSection,
    pub fbank: FbankConfig,
    pub arch: ArchSection,
    pub train: TrainSection,
    pub backend: BackendSection,
    pub eval: EvalSection,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut deserializer = serde_json::Deserializer::from_str(&text);
        let cfg: PipelineConfig = serde_path_to_error(&mut deserializer)
            .map_err(|e| format!("config {}: {e}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.split.train_speakers + self.split.eval_speakers > self.synth.num_speakers {
            return Err(format!(
                "split: train ({}) + eval ({}) exceeds synth.num_speakers ({})",
                self.split.train_speakers, self.split.eval_speakers, self.synth.num_speakers
            ));
        }
        if self.split.train_speakers < 2 {
            return Err("split.train_speakers must be at least 2".into());
        }
        if self.eval.test_frames.is_empty() {
            return Err("eval.test_frames must name at least one condition".into());
        }
        Ok(())
    }

    /// Condition label of one test-frame budget (0 = full utterances).
    pub fn condition_name(frames: usize) -> String {
        if frames == 0 {
            "full".to_string()
        } else {
            format!("{frames}f")
        }
    }
}

/// serde_json decode with the offending key path in the message.
fn serde_path_to_error<'de, T: Deserialize<'de>>(
    de: &mut serde_json::Deserializer<impl serde_json::de::Read<'de>>,
) -> Result<T, String> {
    T::deserialize(de).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = PipelineConfig {
            seed: 7,
            ..PipelineConfig::default()
        };
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: PipelineConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.seed, 7);
        assert_eq!(back.split.train_speakers, 32);
        back.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let json = r#"{ "seed": 1, "no_such_key": true }"#;
        let parsed: Result<PipelineConfig, _> = serde_json::from_str(json);
        assert!(parsed.is_err());
    }

    #[test]
    fn unknown_nested_keys_are_rejected() {
        let json = r#"{ "train": { "lr_initial": 0.1, "typo_field": 3 } }"#;
        let parsed: Result<PipelineConfig, _> = serde_json::from_str(json);
        assert!(parsed.is_err());
    }

    #[test]
    fn oversized_split_is_rejected() {
        let mut cfg = PipelineConfig::default();
        cfg.synth.num_speakers = 10;
        assert!(cfg.validate().is_err());
    }
}
