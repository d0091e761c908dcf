//! Deterministic synthetic multi-speaker corpus.
//!
//! Every speaker is a harmonic voice: a fundamental drawn from 80-300 Hz,
//! three formant resonances with increasing center frequencies, and a
//! spectral tilt. An utterance sums the harmonics of the (slowly drifting)
//! fundamental, shaped by the formant envelope whose targets wander during
//! the utterance - the stand-in for linguistic content - plus slow amplitude
//! modulation and additive Gaussian noise at a fixed SNR.
//!
//! Determinism: every utterance draws from its own stream seeded by
//! `(seed, speaker index, utterance index)`, so generation order and
//! parallelism cannot change a single sample.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Manifest, ManifestError, Utterance};
use crate::par::parallel_map;
use crate::rng::{derive_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub num_speakers: usize,
    pub utts_per_speaker: usize,
    pub utt_seconds_mean: f64,
    /// Uniform jitter half-width around the mean duration.
    pub utt_seconds_jitter: f64,
    pub sample_rate: u32,
    pub seed: u64,
    /// Additive noise level relative to the harmonic signal.
    pub snr_db: f64,
    /// Fundamental-frequency drift amplitude within an utterance (fraction).
    pub f0_drift: f64,
    /// Peak amplitude as a fraction of full scale.
    pub peak: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            num_speakers: 8,
            utts_per_speaker: 4,
            utt_seconds_mean: 2.0,
            utt_seconds_jitter: 0.3,
            sample_rate: 16000,
            seed: 1,
            snr_db: 20.0,
            f0_drift: 0.05,
            peak: 0.35,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.num_speakers < 2 {
            return Err(SynthError::InvalidSpec(format!(
                "need at least 2 speakers, got {}",
                self.num_speakers
            )));
        }
        if self.utt_seconds_mean - self.utt_seconds_jitter < 0.5 {
            return Err(SynthError::InvalidSpec(
                "utterances must be at least 0.5 s long".into(),
            ));
        }
        if self.sample_rate != 8000 && self.sample_rate != 16000 {
            return Err(SynthError::InvalidSpec(format!(
                "sample rate {} not in {{8000, 16000}}",
                self.sample_rate
            )));
        }
        if !(0.0 < self.peak && self.peak <= 1.0) {
            return Err(SynthError::InvalidSpec("peak must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Per-speaker voice parameters, a deterministic function of (seed, index).
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerVoice {
    pub f0_hz: f64,
    pub formants_hz: [f64; 3],
    pub bandwidths_hz: [f64; 3],
    pub tilt_db_per_oct: f64,
}

/// Golden-ratio low-discrepancy point in [0, 1) for stratified draws.
fn stratified_unit(rng: &mut Rng, speaker_index: usize) -> f64 {
    let offset = rng.uniform();
    (offset + speaker_index as f64 * 0.618_033_988_749_895).fract()
}

pub fn speaker_voice(seed: u64, speaker_index: usize) -> SpeakerVoice {
    // Voice parameters spread across the speaker population by a
    // low-discrepancy sequence (jittered), so arbitrary speaker pairs do not
    // collide in both pitch and formant layout; within-utterance variation
    // supplies the confusability instead.
    let mut base = Rng::new(derive_seed(seed, "voice-base"));
    let u_f0 = stratified_unit(&mut base, speaker_index);
    let u_f1 = stratified_unit(&mut base, speaker_index.wrapping_mul(7) + 3);
    let u_f2 = stratified_unit(&mut base, speaker_index.wrapping_mul(11) + 5);

    let mut rng = Rng::new(derive_seed(seed, &format!("voice-{speaker_index}")));
    // Log-spread fundamental over 80-300 Hz with a +/-4% jitter.
    let f0_hz = (80.0 * (300.0f64 / 80.0).powf(u_f0)) * (1.0 + rng.uniform_in(-0.04, 0.04));
    let f0_hz = f0_hz.clamp(80.0, 300.0);
    let f1 = (300.0 + 600.0 * u_f1) * (1.0 + rng.uniform_in(-0.05, 0.05));
    let f2_lo = f1 + 350.0;
    let f2_hi = 2200.0f64.max(f1 + 450.0);
    let f2 = (f2_lo + (f2_hi - f2_lo) * u_f2) * (1.0 + rng.uniform_in(-0.04, 0.04));
    let f2 = f2.max(f2_lo);
    let f3 = rng.uniform_in(f2 + 400.0, 3500.0f64.max(f2 + 450.0));
    let bandwidths_hz = [
        rng.uniform_in(60.0, 120.0),
        rng.uniform_in(80.0, 160.0),
        rng.uniform_in(110.0, 220.0),
    ];
    let tilt_db_per_oct = rng.uniform_in(-12.0, -3.0);
    SpeakerVoice {
        f0_hz,
        formants_hz: [f1, f2, f3],
        bandwidths_hz,
        tilt_db_per_oct,
    }
}

#[derive(Debug)]
pub enum SynthError {
    InvalidSpec(String),
    InsufficientSpeakers { need: usize, have: usize },
    Wav(crate::audio::WavError),
    Manifest(ManifestError),
    Io(std::io::Error),
}

impl std::fmt::Display for SynthError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SynthError::InvalidSpec(m) => write!(f, "invalid corpus spec: {m}"),
            SynthError::InsufficientSpeakers { need, have } => {
                write!(f, "split needs {need} speakers, corpus has {have}")
            }
            SynthError::Wav(e) => write!(f, "{e}"),
            SynthError::Manifest(e) => write!(f, "{e}"),
            SynthError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for SynthError {}

impl From<crate::audio::WavError> for SynthError {
    fn from(e: crate::audio::WavError) -> Self {
        SynthError::Wav(e)
    }
}

impl From<ManifestError> for SynthError {
    fn from(e: ManifestError) -> Self {
        SynthError::Manifest(e)
    }
}

impl From<std::io::Error> for SynthError {
    fn from(e: std::io::Error) -> Self {
        SynthError::Io(e)
    }
}

/// Formant envelope gain at frequency `f`, with spectral tilt relative to
/// 200 Hz. The 0.02 floor keeps every harmonic faintly present.
fn envelope_gain(f: f64, formants: &[f64; 3], bandwidths: &[f64; 3], tilt_db_per_oct: f64) -> f64 {
    let mut g = 0.02;
    for (fc, bw) in formants.iter().zip(bandwidths.iter()) {
        let x = (f - fc) / bw;
        g += 1.0 / (1.0 + x * x);
    }
    let octaves = (f / 200.0).max(0.25).log2();
    g * 10f64.powf(tilt_db_per_oct * octaves / 20.0)
}

/// Hop size for amplitude/frequency trajectory updates (10 ms).
const HOP_SAMPLES: usize = 160;
/// Highest synthesized partial frequency.
const MAX_HARMONIC_HZ: f64 = 4500.0;

/// Synthesize one utterance of a speaker's voice.
pub fn synth_utterance(
    spec: &SynthSpec,
    voice: &SpeakerVoice,
    speaker_index: usize,
    utt_index: usize,
) -> crate::audio::Waveform {
    let mut rng = Rng::new(derive_seed(
        spec.seed,
        &format!("utt-{speaker_index}-{utt_index}"),
    ));
    let duration =
        (spec.utt_seconds_mean + rng.uniform_in(-spec.utt_seconds_jitter, spec.utt_seconds_jitter))
            .max(0.5);
    let n = (duration * f64::from(spec.sample_rate)).round() as usize;
    let rate = f64::from(spec.sample_rate);
    let harmonic_cap = MAX_HARMONIC_HZ.min(rate / 2.0 - 500.0);
    let num_harmonics = (harmonic_cap / (voice.f0_hz * (1.0 + spec.f0_drift))).floor() as usize;
    let num_harmonics = num_harmonics.max(1);

    // Per-utterance randomness: phases, drift/AM oscillators, content path.
    let phases: Vec<f64> = (0..num_harmonics)
        .map(|_| rng.uniform_in(0.0, std::f64::consts::TAU))
        .collect();
    let drift_rate = rng.uniform_in(0.5, 2.0);
    let drift_phase = rng.uniform_in(0.0, std::f64::consts::TAU);
    let am_rate = rng.uniform_in(1.5, 4.0);
    let am_phase = rng.uniform_in(0.0, std::f64::consts::TAU);

    // Content: formant targets renewed every 150-300 ms, linearly tracked.
    let n_hops = n.div_ceil(HOP_SAMPLES) + 1;
    let mut formant_track: Vec<[f64; 3]> = Vec::with_capacity(n_hops);
    let mut current = voice.formants_hz;
    let mut target = voice.formants_hz;
    let mut hops_to_target = 0usize;
    for _ in 0..n_hops {
        if hops_to_target == 0 {
            hops_to_target = 15 + rng.below(16); // 150-300 ms
            for (t, &base) in target.iter_mut().zip(voice.formants_hz.iter()) {
                *t = base * (1.0 + rng.uniform_in(-0.08, 0.08));
            }
        }
        let step = 1.0 / hops_to_target as f64;
        for (c, t) in current.iter_mut().zip(target.iter()) {
            *c += (t - *c) * step;
        }
        hops_to_target -= 1;
        formant_track.push(current);
    }

    // Per-hop harmonic amplitudes from the instantaneous envelope.
    let mut amp_track: Vec<Vec<f64>> = Vec::with_capacity(n_hops);
    for hop_formants in &formant_track {
        let amps: Vec<f64> = (1..=num_harmonics)
            .map(|k| {
                let f = k as f64 * voice.f0_hz;
                if f > harmonic_cap {
                    0.0
                } else {
                    envelope_gain(f, hop_formants, &voice.bandwidths_hz, voice.tilt_db_per_oct)
                        / (k as f64).sqrt()
                }
            })
            .collect();
        amp_track.push(amps);
    }

    // Additive synthesis with per-harmonic phase accumulators.
    let mut signal = vec![0f64; n];
    let mut theta: Vec<f64> = phases;
    for (i, s) in signal.iter_mut().enumerate() {
        let t = i as f64 / rate;
        let f0 = voice.f0_hz
            * (1.0 + spec.f0_drift * (std::f64::consts::TAU * drift_rate * t + drift_phase).sin());
        let hop = i / HOP_SAMPLES;
        let frac = (i % HOP_SAMPLES) as f64 / HOP_SAMPLES as f64;
        let (a0, a1) = (&amp_track[hop], &amp_track[(hop + 1).min(n_hops - 1)]);
        let am = 1.0 + 0.25 * (std::f64::consts::TAU * am_rate * t + am_phase).sin();
        let mut acc = 0.0;
        let dphi = std::f64::consts::TAU * f0 / rate;
        for k in 0..num_harmonics {
            let amp = a0[k] + (a1[k] - a0[k]) * frac;
            if amp > 0.0 {
                acc += amp * theta[k].sin();
            }
            theta[k] += dphi * (k + 1) as f64;
        }
        *s = am * acc;
    }

    // Additive noise at the requested SNR.
    let power: f64 = signal.iter().map(|x| x * x).sum::<f64>() / n as f64;
    let sigma = (power / 10f64.powf(spec.snr_db / 10.0)).sqrt();
    for s in signal.iter_mut() {
        *s += sigma * rng.normal();
    }

    // Peak-normalize into 16-bit range.
    let peak = signal.iter().fold(0f64, |m, &x| m.max(x.abs())).max(1e-9);
    let scale = spec.peak * f64::from(i16::MAX) / peak;
    let samples: Vec<i16> = signal
        .iter()
        .map(|&x| (x * scale).round().clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16)
        .collect();
    crate::audio::Waveform {
        samples,
        sample_rate_hz: spec.sample_rate,
    }
}

/// Generate the corpus under `out_dir` (WAVs in `wav/`, manifest at
/// `corpus.txt`) and return the manifest.
pub fn generate_corpus(
    spec: &SynthSpec,
    out_dir: &Path,
    threads: usize,
) -> Result<Manifest, SynthError> {
    spec.validate()?;
    let wav_dir = out_dir.join("wav");
    std::fs::create_dir_all(&wav_dir)?;
    let jobs: Vec<(usize, usize)> = (0..spec.num_speakers)
        .flat_map(|s| (0..spec.utts_per_speaker).map(move |u| (s, u)))
        .collect();
    let voices: Vec<SpeakerVoice> = (0..spec.num_speakers)
        .map(|s| speaker_voice(spec.seed, s))
        .collect();
    let waves = parallel_map(&jobs, threads, |_, &(s, u)| {
        synth_utterance(spec, &voices[s], s, u)
    });
    let mut entries = Vec::with_capacity(jobs.len());
    for ((s, u), wave) in jobs.iter().zip(waves.iter()) {
        let utt_id = format!("s{s:03}-u{u:03}");
        let speaker_id = format!("s{s:03}");
        let rel = format!("wav/{utt_id}.wav");
        crate::audio::write_wav(&wav_dir.join(format!("{utt_id}.wav")), wave)?;
        entries.push(Utterance {
            utt_id,
            speaker_id,
            path: rel,
            duration_s: wave.duration_s(),
        });
    }
    let manifest = Manifest {
        entries,
        base_dir: out_dir.to_path_buf(),
    };
    manifest.write(&out_dir.join("corpus.txt"))?;
    Ok(manifest)
}

/// Speaker-disjoint split. Speakers are shuffled by the seed; the first
/// `train_n` go to training, the next `eval_n` to evaluation. Within each
/// evaluation speaker the first `enroll_utts` utterances (sorted by id)
/// enroll and the rest test.
pub struct CorpusSplit {
    pub train: Manifest,
    pub eval_enroll: Manifest,
    pub eval_test: Manifest,
}

pub fn split_corpus(
    manifest: &Manifest,
    train_n: usize,
    eval_n: usize,
    enroll_utts: usize,
    seed: u64,
) -> Result<CorpusSplit, SynthError> {
    let mut speakers = manifest.speakers();
    if speakers.len() < train_n + eval_n {
        return Err(SynthError::InsufficientSpeakers {
            need: train_n + eval_n,
            have: speakers.len(),
        });
    }
    let mut rng = Rng::new(derive_seed(seed, "corpus-split"));
    rng.shuffle(&mut speakers);
    let train_speakers: Vec<String> = speakers[..train_n].to_vec();
    let eval_speakers: Vec<String> = speakers[train_n..train_n + eval_n].to_vec();

    let train = manifest.filter_speakers(&train_speakers);
    let eval_all = manifest.filter_speakers(&eval_speakers);
    let mut enroll_entries = Vec::new();
    let mut test_entries = Vec::new();
    for (_, utts) in eval_all.by_speaker() {
        let mut sorted: Vec<&Utterance> = utts;
        sorted.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
        for (i, u) in sorted.into_iter().enumerate() {
            if i < enroll_utts {
                enroll_entries.push(u.clone());
            } else {
                test_entries.push(u.clone());
            }
        }
    }
    Ok(CorpusSplit {
        train,
        eval_enroll: Manifest {
            entries: enroll_entries,
            base_dir: manifest.base_dir.clone(),
        },
        eval_test: Manifest {
            entries: test_entries,
            base_dir: manifest.base_dir.clone(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{compute_fbank, FbankConfig};

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("voxvec-synth-tests").join(name);
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn generation_is_byte_identical_across_runs_and_thread_counts() {
        let spec = SynthSpec {
            num_speakers: 2,
            utts_per_speaker: 2,
            utt_seconds_mean: 0.8,
            utt_seconds_jitter: 0.2,
            seed: 99,
            ..SynthSpec::default()
        };
        let d1 = tmp("det1");
        let d2 = tmp("det2");
        generate_corpus(&spec, &d1, 1).unwrap();
        generate_corpus(&spec, &d2, 4).unwrap();
        assert_eq!(
            std::fs::read(d1.join("corpus.txt")).unwrap(),
            std::fs::read(d2.join("corpus.txt")).unwrap()
        );
        for s in 0..2 {
            for u in 0..2 {
                let name = format!("wav/s{s:03}-u{u:03}.wav");
                assert_eq!(
                    std::fs::read(d1.join(&name)).unwrap(),
                    std::fs::read(d2.join(&name)).unwrap(),
                    "{name}"
                );
            }
        }
    }

    #[test]
    fn fixed_duration_corpus_has_expected_files_and_lengths() {
        let spec = SynthSpec {
            num_speakers: 2,
            utts_per_speaker: 3,
            utt_seconds_mean: 1.0,
            utt_seconds_jitter: 0.0,
            seed: 7,
            ..SynthSpec::default()
        };
        let dir = tmp("sizes");
        let manifest = generate_corpus(&spec, &dir, 2).unwrap();
        assert_eq!(manifest.entries.len(), 6);
        for e in &manifest.entries {
            let wav = crate::audio::read_wav(&manifest.resolve(e)).unwrap();
            assert_eq!(wav.samples.len(), 16000, "{}", e.utt_id);
            assert_eq!(wav.sample_rate_hz, 16000);
        }
    }

    #[test]
    fn voices_are_deterministic_and_formants_increase() {
        for idx in 0..20 {
            let a = speaker_voice(5, idx);
            let b = speaker_voice(5, idx);
            assert_eq!(a, b);
            assert!(a.f0_hz >= 80.0 && a.f0_hz <= 300.0);
            assert!(a.formants_hz[0] < a.formants_hz[1]);
            assert!(a.formants_hz[1] < a.formants_hz[2]);
        }
    }

    /// Mean fbank vector (no CMN) of one utterance.
    fn mean_fbank(wav: &crate::audio::Waveform) -> Vec<f64> {
        let cfg = FbankConfig {
            cmn: false,
            ..FbankConfig::default()
        };
        let feat = compute_fbank(wav, &cfg).unwrap();
        let mut mean = vec![0f64; feat.cols()];
        for r in 0..feat.rows() {
            for (m, &v) in mean.iter_mut().zip(feat.row(r).iter()) {
                *m += f64::from(v);
            }
        }
        for m in mean.iter_mut() {
            *m /= feat.rows() as f64;
        }
        mean
    }

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn same_speaker_fbanks_are_closer_than_cross_speaker() {
        let spec = SynthSpec {
            num_speakers: 6,
            utts_per_speaker: 4,
            utt_seconds_mean: 1.0,
            utt_seconds_jitter: 0.0,
            seed: 11,
            ..SynthSpec::default()
        };
        let voices: Vec<SpeakerVoice> =
            (0..spec.num_speakers).map(|s| speaker_voice(spec.seed, s)).collect();
        let means: Vec<Vec<Vec<f64>>> = (0..spec.num_speakers)
            .map(|s| {
                (0..spec.utts_per_speaker)
                    .map(|u| mean_fbank(&synth_utterance(&spec, &voices[s], s, u)))
                    .collect()
            })
            .collect();
        let mut same = Vec::new();
        let mut cross = Vec::new();
        for s1 in 0..spec.num_speakers {
            for u1 in 0..spec.utts_per_speaker {
                for s2 in s1..spec.num_speakers {
                    for u2 in 0..spec.utts_per_speaker {
                        if s1 == s2 && u2 <= u1 {
                            continue;
                        }
                        let c = cosine(&means[s1][u1], &means[s2][u2]);
                        if s1 == s2 {
                            same.push(c);
                        } else {
                            cross.push(c);
                        }
                    }
                }
            }
        }
        let mean_same: f64 = same.iter().sum::<f64>() / same.len() as f64;
        let mean_cross: f64 = cross.iter().sum::<f64>() / cross.len() as f64;
        assert!(
            mean_same > mean_cross,
            "same {mean_same:.4} vs cross {mean_cross:.4} ({} / {} pairs)",
            same.len(),
            cross.len()
        );
    }

    #[test]
    fn centroid_classifier_separates_32_speakers() {
        // Separability precondition: nearest-centroid on mean fbank over 32
        // speakers stays well above chance. Threshold pinned at 60%.
        let spec = SynthSpec {
            num_speakers: 32,
            utts_per_speaker: 4,
            utt_seconds_mean: 1.0,
            utt_seconds_jitter: 0.0,
            seed: 13,
            ..SynthSpec::default()
        };
        let voices: Vec<SpeakerVoice> =
            (0..spec.num_speakers).map(|s| speaker_voice(spec.seed, s)).collect();
        let mut centroids = Vec::new();
        let mut probes = Vec::new();
        for s in 0..spec.num_speakers {
            // First two utterances build the centroid, last two probe it.
            let m0 = mean_fbank(&synth_utterance(&spec, &voices[s], s, 0));
            let m1 = mean_fbank(&synth_utterance(&spec, &voices[s], s, 1));
            let centroid: Vec<f64> = m0.iter().zip(m1.iter()).map(|(a, b)| (a + b) / 2.0).collect();
            centroids.push(centroid);
            probes.push((s, mean_fbank(&synth_utterance(&spec, &voices[s], s, 2))));
            probes.push((s, mean_fbank(&synth_utterance(&spec, &voices[s], s, 3))));
        }
        let mut correct = 0usize;
        for (label, probe) in &probes {
            let mut best = 0usize;
            let mut best_c = f64::MIN;
            for (ci, c) in centroids.iter().enumerate() {
                let sim = cosine(probe, c);
                if sim > best_c {
                    best_c = sim;
                    best = ci;
                }
            }
            if best == *label {
                correct += 1;
            }
        }
        let acc = correct as f64 / probes.len() as f64;
        assert!(acc > 0.6, "centroid accuracy {acc} ({correct}/{})", probes.len());
    }

    #[test]
    fn split_is_disjoint_deterministic_and_enrolls_ten() {
        let entries: Vec<Utterance> = (0..40)
            .flat_map(|s| {
                (0..12).map(move |u| Utterance {
                    utt_id: format!("s{s:03}-u{u:03}"),
                    speaker_id: format!("s{s:03}"),
                    path: format!("wav/s{s:03}-u{u:03}.wav"),
                    duration_s: 2.0,
                })
            })
            .collect();
        let manifest = Manifest {
            entries,
            base_dir: std::path::PathBuf::new(),
        };
        let a = split_corpus(&manifest, 32, 8, 10, 5).unwrap();
        let b = split_corpus(&manifest, 32, 8, 10, 5).unwrap();
        assert_eq!(a.train.entries, b.train.entries);
        assert_eq!(a.eval_enroll.entries, b.eval_enroll.entries);
        assert_eq!(a.eval_test.entries, b.eval_test.entries);

        let train_spk = a.train.speakers();
        let eval_spk: Vec<String> = a.eval_enroll.speakers();
        assert_eq!(train_spk.len(), 32);
        assert_eq!(eval_spk.len(), 8);
        assert!(train_spk.iter().all(|s| !eval_spk.contains(s)));

        // Each eval speaker enrolls exactly 10 utterances and tests the rest.
        for (spk, utts) in a.eval_enroll.by_speaker() {
            assert_eq!(utts.len(), 10, "{spk}");
        }
        for (spk, utts) in a.eval_test.by_speaker() {
            assert_eq!(utts.len(), 2, "{spk}");
        }

        let c = split_corpus(&manifest, 32, 8, 10, 6).unwrap();
        assert_ne!(
            a.train.speakers(),
            c.train.speakers(),
            "different seeds should give different splits"
        );
    }

    #[test]
    fn split_with_too_few_speakers_fails() {
        let manifest = Manifest {
            entries: vec![Utterance {
                utt_id: "a".into(),
                speaker_id: "s0".into(),
                path: "a.wav".into(),
                duration_s: 1.0,
            }],
            base_dir: std::path::PathBuf::new(),
        };
        assert!(matches!(
            split_corpus(&manifest, 2, 1, 1, 0),
            Err(SynthError::InsufficientSpeakers { need: 3, have: 1 })
        ));
    }
}
