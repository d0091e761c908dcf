//! Frame-level speaker-classification training.
//!
//! The trainable unit is a window of `receptive_field` frames labelled with
//! its utterance's speaker. Windows are dense (every frame position), so one
//! utterance of T frames contributes `T - rf + 1` examples. For throughput,
//! batches are built from *contiguous* window ranges: a range of W windows
//! is one forward/backward pass over W + rf - 1 frames in which every output
//! frame contributes a cross-entropy term. Ranges are shuffled per epoch and
//! drawn round-robin across speakers to keep classes balanced.
//!
//! Reproducibility contract: a checkpoint is the model file plus the JSON
//! `TrainState` sidecar, nothing else. To make that pair a complete resume
//! point, the momentum velocity starts from zero at every epoch boundary;
//! "train two epochs" and "train one, checkpoint, restore, train one" are
//! then bitwise identical in single-threaded mode.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio::{load_features, AudioError};
use crate::corpus::{FeatureManifest, ManifestError};
use crate::ctdnn::{receptive_field, CtdnnError, CtdnnGrads, CtdnnModel};
use crate::nn::{softmax_xent, Mat};
use crate::rng::Rng;

// ---------------------------------------------------------------------------
// Configuration and state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr_initial: f64,
    pub momentum: f64,
    /// Window budget per parameter update.
    pub minibatch_frames: usize,
    /// Longest contiguous window range evaluated as one forward pass. A
    /// batch draws `minibatch_frames / chunk_windows` ranges round-robin
    /// across speakers, so each update mixes several classes; smaller chunks
    /// mix more speakers per update at the price of less frame reuse.
    pub chunk_windows: usize,
    pub epochs_max: usize,
    pub seed: u64,
    /// Halve the learning rate when held-out frame accuracy improves by less
    /// than this (absolute).
    pub lr_halve_threshold: f64,
    /// Stop after this many consecutive plateaus.
    pub max_plateaus: usize,
    /// Cap on held-out frames evaluated per utterance (0 = no cap).
    pub holdout_max_frames: usize,
    /// Smoothing for the running training-loss average.
    pub loss_ema_alpha: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_initial: 0.01,
            momentum: 0.9,
            minibatch_frames: 256,
            chunk_windows: 64,
            epochs_max: 20,
            seed: 1,
            lr_halve_threshold: 0.001,
            max_plateaus: 3,
            holdout_max_frames: 300,
            loss_ema_alpha: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub epoch: usize,
    pub frames_seen: u64,
    pub lr: f64,
    pub loss_ema: f64,
    pub heldout_acc: f64,
    pub best_heldout_acc: f64,
    pub plateaus: usize,
    pub rng: [u64; 4],
}

impl TrainState {
    pub fn fresh(cfg: &TrainConfig) -> Self {
        TrainState {
            epoch: 0,
            frames_seen: 0,
            lr: cfg.lr_initial,
            loss_ema: f64::NAN,
            heldout_acc: 0.0,
            best_heldout_acc: 0.0,
            plateaus: 0,
            rng: Rng::new(cfg.seed).state(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub loss_ema: f64,
    pub lr: f64,
    pub windows: u64,
    pub heldout_acc: Option<f64>,
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum TrainError {
    /// Speaker id missing from a fixed label map.
    Labeling { speaker_id: String },
    /// Loss became NaN/Inf; diagnostics identify where.
    NonFiniteLoss { lr: f64, batch: usize },
    EmptyDataset,
    Audio(AudioError),
    Ctdnn(CtdnnError),
    Manifest(ManifestError),
    Io(std::io::Error),
    Json(String),
}

impl std::fmt::Display for TrainError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrainError::Labeling { speaker_id } => {
                write!(f, "speaker id {speaker_id:?} not in the label map")
            }
            TrainError::NonFiniteLoss { lr, batch } => {
                write!(f, "non-finite loss at batch {batch} (lr {lr})")
            }
            TrainError::EmptyDataset => write!(f, "dataset holds no trainable windows"),
            TrainError::Audio(e) => write!(f, "{e}"),
            TrainError::Ctdnn(e) => write!(f, "{e}"),
            TrainError::Manifest(e) => write!(f, "{e}"),
            TrainError::Io(e) => write!(f, "i/o error: {e}"),
            TrainError::Json(e) => write!(f, "json error: {e}"),
        }
    }
}

impl std::error::Error for TrainError {}

impl From<AudioError> for TrainError {
    fn from(e: AudioError) -> Self {
        TrainError::Audio(e)
    }
}

impl From<CtdnnError> for TrainError {
    fn from(e: CtdnnError) -> Self {
        TrainError::Ctdnn(e)
    }
}

impl From<ManifestError> for TrainError {
    fn from(e: ManifestError) -> Self {
        TrainError::Manifest(e)
    }
}

impl From<std::io::Error> for TrainError {
    fn from(e: std::io::Error) -> Self {
        TrainError::Io(e)
    }
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DatasetUtt {
    pub utt_id: String,
    pub speaker_id: String,
    pub label: u32,
    pub feat: Mat<f32>,
}

/// In-memory frame dataset: utterance features plus contiguous labels.
#[derive(Debug, Clone)]
pub struct FrameDataset {
    pub utts: Vec<DatasetUtt>,
    pub label_map: BTreeMap<String, u32>,
    /// Receptive-field width: the window size of one example.
    pub window: usize,
    /// Utterances shorter than one window, dropped at load time.
    pub skipped_short: Vec<String>,
}

impl FrameDataset {
    pub fn num_classes(&self) -> usize {
        self.label_map.len()
    }

    pub fn windows_of(&self, utt: &DatasetUtt) -> usize {
        utt.feat.rows.saturating_sub(self.window - 1)
    }

    pub fn num_windows(&self) -> u64 {
        self.utts.iter().map(|u| self.windows_of(u) as u64).sum()
    }

    /// Assemble a dataset directly from feature matrices (tests,
    /// micro-experiments).
    pub fn from_parts(
        utts: Vec<(String, String, Mat<f32>)>,
        window: usize,
    ) -> Result<FrameDataset, TrainError> {
        let speakers: Vec<String> = utts
            .iter()
            .map(|(_, s, _)| s.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let label_map: BTreeMap<String, u32> = speakers
            .into_iter()
            .enumerate()
            .map(|(i, s)| (s, i as u32))
            .collect();
        let mut ds = FrameDataset {
            utts: Vec::new(),
            label_map: label_map.clone(),
            window,
            skipped_short: Vec::new(),
        };
        for (utt_id, speaker_id, feat) in utts {
            if feat.rows < window {
                ds.skipped_short.push(utt_id);
                continue;
            }
            let label = label_map[&speaker_id];
            ds.utts.push(DatasetUtt {
                utt_id,
                speaker_id,
                label,
                feat,
            });
        }
        Ok(ds)
    }
}

/// Build the frame dataset for a model from a feature manifest.
///
/// With `fixed_labels = None` the label map is speaker ids in sorted order;
/// otherwise every utterance's speaker must resolve in the given map.
/// Utterances shorter than the receptive field contribute zero examples and
/// are recorded in `skipped_short`.
pub fn make_frame_dataset(
    manifest: &FeatureManifest,
    model: &CtdnnModel<f32>,
    fixed_labels: Option<&BTreeMap<String, u32>>,
) -> Result<FrameDataset, TrainError> {
    let window = receptive_field(&model.config).total;
    let label_map: BTreeMap<String, u32> = match fixed_labels {
        Some(m) => m.clone(),
        None => manifest
            .speakers()
            .into_iter()
            .enumerate()
            .map(|(i, s)| (s, i as u32))
            .collect(),
    };
    let mut ds = FrameDataset {
        utts: Vec::new(),
        label_map: label_map.clone(),
        window,
        skipped_short: Vec::new(),
    };
    for e in &manifest.entries {
        let label = *label_map
            .get(&e.speaker_id)
            .ok_or_else(|| TrainError::Labeling {
                speaker_id: e.speaker_id.clone(),
            })?;
        let feat = load_features(&manifest.resolve(e))?;
        if feat.rows() < window {
            ds.skipped_short.push(e.utt_id.clone());
            continue;
        }
        let mat = Mat::from_vec(feat.rows(), feat.cols(), feat.data().to_vec());
        ds.utts.push(DatasetUtt {
            utt_id: e.utt_id.clone(),
            speaker_id: e.speaker_id.clone(),
            label,
            feat: mat,
        });
    }
    Ok(ds)
}

// ---------------------------------------------------------------------------
// Label map persistence
// ---------------------------------------------------------------------------

pub fn save_label_map(path: &Path, map: &BTreeMap<String, u32>) -> Result<(), TrainError> {
    let json = serde_json::to_string_pretty(map).map_err(|e| TrainError::Json(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_label_map(path: &Path) -> Result<BTreeMap<String, u32>, TrainError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| TrainError::Json(e.to_string()))
}

// ---------------------------------------------------------------------------
// Epoch
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Chunk {
    utt: usize,
    win_lo: usize,
    win_hi: usize,
}

/// Split every utterance into window ranges of at most `cap` windows.
fn build_chunks(ds: &FrameDataset, cap: usize) -> Vec<Chunk> {
    let mut chunks = Vec::new();
    for (ui, u) in ds.utts.iter().enumerate() {
        let w = ds.windows_of(u);
        if w == 0 {
            continue;
        }
        let n = w.div_ceil(cap);
        let base = w / n;
        let rem = w % n;
        let mut lo = 0;
        for i in 0..n {
            let len = base + usize::from(i < rem);
            chunks.push(Chunk {
                utt: ui,
                win_lo: lo,
                win_hi: lo + len,
            });
            lo += len;
        }
    }
    chunks
}

/// Shuffle chunks within each speaker and interleave speakers round-robin.
fn schedule_chunks(ds: &FrameDataset, chunks: Vec<Chunk>, rng: &mut Rng) -> Vec<Chunk> {
    let mut per_speaker: BTreeMap<u32, Vec<Chunk>> = BTreeMap::new();
    for c in chunks {
        per_speaker.entry(ds.utts[c.utt].label).or_default().push(c);
    }
    let mut queues: Vec<Vec<Chunk>> = Vec::new();
    for (_, mut q) in per_speaker {
        rng.shuffle(&mut q);
        queues.push(q);
    }
    rng.shuffle(&mut queues);
    let mut out = Vec::new();
    let mut exhausted = false;
    while !exhausted {
        exhausted = true;
        for q in queues.iter_mut() {
            if let Some(c) = q.pop() {
                out.push(c);
                exhausted = false;
            }
        }
    }
    out
}

/// Forward/backward of one chunk; returns (loss sum, windows).
fn chunk_pass(
    model: &CtdnnModel<f32>,
    ds: &FrameDataset,
    chunk: Chunk,
    grads: &mut CtdnnGrads<f32>,
) -> Result<(f64, usize), CtdnnError> {
    let u = &ds.utts[chunk.utt];
    let frame_lo = chunk.win_lo;
    let frame_hi = chunk.win_hi + ds.window - 1;
    let slice = u.feat.slice_rows(frame_lo, frame_hi);
    let tape = model.forward_tape(&slice)?;
    let windows = tape.logits.rows;
    debug_assert_eq!(windows, chunk.win_hi - chunk.win_lo);
    let mut grad_logits = Mat::zeros(tape.logits.rows, tape.logits.cols);
    let mut loss_sum = 0.0f64;
    for r in 0..windows {
        let (loss, g) = softmax_xent(tape.logits.row(r), u.label as usize)
            .expect("label in range of output layer");
        loss_sum += f64::from(loss);
        grad_logits.row_mut(r).copy_from_slice(&g);
    }
    model.backward_tape(&tape, &grad_logits, grads);
    Ok((loss_sum, windows))
}

/// One full shuffled pass over the dataset with momentum SGD.
///
/// `threads` worker threads each process one chunk of every batch; gradients
/// are reduced in worker order, so results are deterministic for a fixed
/// thread count (and bitwise reproducible single-threaded).
pub fn train_epoch(
    model: &mut CtdnnModel<f32>,
    ds: &FrameDataset,
    cfg: &TrainConfig,
    state: &mut TrainState,
    threads: usize,
) -> Result<EpochStats, TrainError> {
    if ds.num_windows() == 0 {
        return Err(TrainError::EmptyDataset);
    }
    let threads = threads.max(1);
    let mut rng = Rng::from_state(state.rng);
    let cap = cfg.chunk_windows.clamp(1, cfg.minibatch_frames.max(1));
    let chunks_per_batch = cfg.minibatch_frames.div_ceil(cap).max(1);
    let chunks = build_chunks(ds, cap);
    let order = schedule_chunks(ds, chunks, &mut rng);

    // Velocity starts at zero each epoch so (model, state) checkpoints are
    // complete resume points.
    let mut velocity: Vec<Vec<f32>> = (0..model.num_blocks())
        .map(|i| vec![0f32; model.block(i).len()])
        .collect();
    let mut worker_grads: Vec<CtdnnGrads<f32>> = (0..threads)
        .map(|_| CtdnnGrads::zeros_like(model))
        .collect();

    let momentum = cfg.momentum as f32;
    let mut total_loss = 0.0f64;
    let mut total_windows = 0u64;
    let mut loss_ema = state.loss_ema;

    for (batch_idx, batch) in order.chunks(chunks_per_batch).enumerate() {
        let workers = threads.min(batch.len());
        let results: Vec<Result<(f64, usize), CtdnnError>> = if workers == 1 {
            let grads = &mut worker_grads[0];
            batch
                .iter()
                .map(|chunk| chunk_pass(model, ds, *chunk, grads))
                .collect()
        } else {
            // Worker w handles batch chunks w, w + workers, ...; each
            // accumulates into its own buffer.
            let model_ref = &*model;
            std::thread::scope(|scope| {
                let mut handles = Vec::with_capacity(workers);
                for (w, grads) in worker_grads.iter_mut().take(workers).enumerate() {
                    handles.push(scope.spawn(move || {
                        let mut out = Vec::new();
                        let mut i = w;
                        while i < batch.len() {
                            out.push(chunk_pass(model_ref, ds, batch[i], grads));
                            i += workers;
                        }
                        out
                    }));
                }
                handles
                    .into_iter()
                    .flat_map(|h| h.join().expect("train worker"))
                    .collect()
            })
        };
        let mut batch_loss = 0.0f64;
        let mut batch_windows = 0usize;
        for r in results {
            let (loss, windows) = r?;
            batch_loss += loss;
            batch_windows += windows;
        }
        if !batch_loss.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                lr: state.lr,
                batch: batch_idx,
            });
        }

        // Reduce worker gradients into worker 0 (worker order is fixed).
        let (first, rest) = worker_grads.split_at_mut(1);
        for g in rest.iter().take(workers.saturating_sub(1)) {
            first[0].add(g);
        }
        let scale = (1.0 / batch_windows as f64) as f32;
        let lr = state.lr as f32;
        for b in 0..model.num_blocks() {
            let grads = &first[0].blocks[b];
            let vel = &mut velocity[b];
            let params = model.block_mut(b);
            for ((p, v), &g) in params.iter_mut().zip(vel.iter_mut()).zip(grads.iter()) {
                *v = momentum * *v - lr * (g * scale);
                *p += *v;
            }
        }
        for g in worker_grads.iter_mut().take(workers) {
            g.clear();
        }

        let batch_mean = batch_loss / batch_windows as f64;
        loss_ema = if loss_ema.is_finite() {
            cfg.loss_ema_alpha * loss_ema + (1.0 - cfg.loss_ema_alpha) * batch_mean
        } else {
            batch_mean
        };
        total_loss += batch_loss;
        total_windows += batch_windows as u64;
    }

    state.epoch += 1;
    state.frames_seen += total_windows;
    state.loss_ema = loss_ema;
    state.rng = rng.state();
    Ok(EpochStats {
        epoch: state.epoch,
        mean_loss: total_loss / total_windows as f64,
        loss_ema,
        lr: state.lr,
        windows: total_windows,
        heldout_acc: None,
    })
}

/// Fraction of windows whose argmax posterior equals the label. Ties break
/// toward the lowest class index. `max_frames` caps the evaluated frames per
/// utterance (0 = all).
pub fn evaluate_frame_accuracy(
    model: &CtdnnModel<f32>,
    ds: &FrameDataset,
    max_frames: usize,
    threads: usize,
) -> Result<f64, TrainError> {
    if ds.utts.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let counts = crate::par::parallel_map(&ds.utts, threads, |_, u| {
        let rows = if max_frames > 0 {
            u.feat.rows.min(max_frames.max(ds.window))
        } else {
            u.feat.rows
        };
        let slice = u.feat.slice_rows(0, rows);
        let logits = model.forward_logits(&slice)?;
        let mut correct = 0u64;
        for r in 0..logits.rows {
            let row = logits.row(r);
            let mut best = row[0];
            let mut arg = 0usize;
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            if arg == u.label as usize {
                correct += 1;
            }
        }
        Ok::<(u64, u64), CtdnnError>((correct, logits.rows as u64))
    });
    let mut correct = 0u64;
    let mut total = 0u64;
    for c in counts {
        let (c, t) = c?;
        correct += c;
        total += t;
    }
    if total == 0 {
        return Err(TrainError::EmptyDataset);
    }
    Ok(correct as f64 / total as f64)
}

/// Outcome of one scheduled epoch.
#[derive(Debug, Clone)]
pub struct EpochOutcome {
    pub stats: EpochStats,
    pub lr_halved: bool,
    pub stop: bool,
}

/// One epoch plus the plateau learning-rate schedule: halve the rate when
/// held-out accuracy fails to improve by more than the threshold; stop after
/// `max_plateaus` plateaus or `epochs_max` epochs.
pub fn advance_epoch(
    model: &mut CtdnnModel<f32>,
    train_ds: &FrameDataset,
    heldout: Option<&FrameDataset>,
    cfg: &TrainConfig,
    state: &mut TrainState,
    threads: usize,
) -> Result<EpochOutcome, TrainError> {
    let mut stats = train_epoch(model, train_ds, cfg, state, threads)?;
    let mut lr_halved = false;
    if let Some(h) = heldout {
        let acc = evaluate_frame_accuracy(model, h, cfg.holdout_max_frames, threads)?;
        stats.heldout_acc = Some(acc);
        if acc > state.best_heldout_acc + cfg.lr_halve_threshold {
            state.best_heldout_acc = acc;
            state.plateaus = 0;
        } else {
            state.plateaus += 1;
            state.lr /= 2.0;
            lr_halved = true;
        }
        state.heldout_acc = acc;
    }
    let stop = state.epoch >= cfg.epochs_max
        || (heldout.is_some() && state.plateaus >= cfg.max_plateaus);
    Ok(EpochOutcome {
        stats,
        lr_halved,
        stop,
    })
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

pub fn save_checkpoint(
    model_path: &Path,
    state_path: &Path,
    model: &CtdnnModel<f32>,
    state: &TrainState,
) -> Result<(), TrainError> {
    crate::ctdnn::save_model(model_path, model)?;
    let json =
        serde_json::to_string_pretty(state).map_err(|e| TrainError::Json(e.to_string()))?;
    std::fs::write(state_path, json)?;
    Ok(())
}

pub fn load_checkpoint(
    model_path: &Path,
    state_path: &Path,
) -> Result<(CtdnnModel<f32>, TrainState), TrainError> {
    let model = crate::ctdnn::load_model(model_path)?;
    let text = std::fs::read_to_string(state_path)?;
    let state: TrainState =
        serde_json::from_str(&text).map_err(|e| TrainError::Json(e.to_string()))?;
    Ok((model, state))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
