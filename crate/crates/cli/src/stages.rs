//! Pipeline stages. Every stage reads and writes only the file formats owned
//! by the core modules, derives its randomness from the global seed, skips
//! itself when its outputs already exist (unless forced), and fails with the
//! missing upstream artifact named when run out of order.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use voxvec_core::audio::{compute_fbank, compute_mfcc, load_features, read_wav, save_features};
use voxvec_core::backend::{
    fit_lda, fit_plda, load_backend, save_backend, Backend, BackendKind, PldaOptions,
};
use voxvec_core::corpus::{FeatureEntry, FeatureManifest, Manifest};
use voxvec_core::ctdnn::{build_ctdnn, load_model, receptive_field, save_model};
use voxvec_core::dvector::{
    enroll_speaker, extract_dvector, load_dvectors, save_dvectors, truncate_frames, DVector,
};
use voxvec_core::eval::{compute_eer, det_points, det_to_csv, make_trials, score_trials, EerResult, TrialList};
use voxvec_core::nn::Mat;
use voxvec_core::par::parallel_map;
use voxvec_core::rng::derive_seed;
use voxvec_core::synth::{generate_corpus, split_corpus};
use voxvec_core::train::{
    advance_epoch, load_checkpoint, make_frame_dataset, save_checkpoint, save_label_map, TrainState,
};

use crate::config::PipelineConfig;
use crate::svg::det_svg;

#[derive(Debug)]
pub enum StageError {
    /// An upstream artifact is missing; run the named stage first.
    MissingDependency { path: PathBuf, hint: String },
    Config(String),
    Failed(String),
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StageError::MissingDependency { path, hint } => {
                write!(f, "missing {}; {hint}", path.display())
            }
            StageError::Config(m) => write!(f, "{m}"),
            StageError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for StageError {}

impl StageError {
    pub fn kind(&self) -> &'static str {
        match self {
            StageError::MissingDependency { .. } => "dependency",
            StageError::Config(_) => "config",
            StageError::Failed(_) => "failed",
        }
    }
}

macro_rules! wrap_err {
    ($($ty:ty),*) => {
        $(impl From<$ty> for StageError {
            fn from(e: $ty) -> Self {
                StageError::Failed(e.to_string())
            }
        })*
    };
}

wrap_err!(
    voxvec_core::audio::AudioError,
    voxvec_core::audio::WavError,
    voxvec_core::corpus::ManifestError,
    voxvec_core::ctdnn::CtdnnError,
    voxvec_core::train::TrainError,
    voxvec_core::dvector::DvecError,
    voxvec_core::backend::BackendError,
    voxvec_core::eval::EvalError,
    std::io::Error,
    serde_json::Error
);

/// Shared stage context.
pub struct Ctx<'a> {
    pub cfg: &'a PipelineConfig,
    pub seed: u64,
    pub threads: usize,
    pub force: bool,
}

impl Ctx<'_> {
    fn stage_seed(&self, label: &str) -> u64 {
        derive_seed(self.seed, label)
    }
}

fn all_exist(paths: &[PathBuf]) -> bool {
    paths.iter().all(|p| p.exists())
}

fn require(path: PathBuf, hint: &str) -> Result<PathBuf, StageError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(StageError::MissingDependency {
            path,
            hint: hint.to_string(),
        })
    }
}

// ---------------------------------------------------------------------------
// Stage paths
// ---------------------------------------------------------------------------

pub struct Artifacts {
    pub corpus_manifest: PathBuf,
    pub train_manifest: PathBuf,
    pub enroll_manifest: PathBuf,
    pub test_manifest: PathBuf,
    pub features_manifest: PathBuf,
    pub model: PathBuf,
    pub label_map: PathBuf,
    pub ckpt_model: PathBuf,
    pub ckpt_state: PathBuf,
    pub train_log: PathBuf,
    pub backend_lda: PathBuf,
    pub backend_plda: PathBuf,
    pub train_vectors: PathBuf,
    pub enroll_vectors: PathBuf,
    pub embeddings_csv: PathBuf,
    pub report: PathBuf,
}

impl Artifacts {
    pub fn of(cfg: &PipelineConfig) -> Artifacts {
        let p = &cfg.paths;
        Artifacts {
            corpus_manifest: p.corpus.join("corpus.txt"),
            train_manifest: p.corpus.join("train.txt"),
            enroll_manifest: p.corpus.join("eval_enroll.txt"),
            test_manifest: p.corpus.join("eval_test.txt"),
            features_manifest: p.features.join("features.txt"),
            model: p.models.join("ctdnn.model"),
            label_map: p.models.join("label_map.json"),
            ckpt_model: p.models.join("ckpt.model"),
            ckpt_state: p.models.join("ckpt.state.json"),
            train_log: p.models.join("train_log.jsonl"),
            backend_lda: p.models.join("backend_lda.bknd"),
            backend_plda: p.models.join("backend_plda.bknd"),
            train_vectors: p.vectors.join("train.dvec"),
            enroll_vectors: p.vectors.join("enroll.dvec"),
            embeddings_csv: p.vectors.join("embeddings.csv"),
            report: p.results.join("report.json"),
        }
    }

    pub fn test_vectors(cfg: &PipelineConfig, frames: usize) -> PathBuf {
        cfg.paths
            .vectors
            .join(format!("test_{}.dvec", PipelineConfig::condition_name(frames)))
    }

    pub fn trials(cfg: &PipelineConfig, frames: usize, backend: BackendKind) -> PathBuf {
        cfg.paths.results.join(format!(
            "trials_{}_{}.txt",
            PipelineConfig::condition_name(frames),
            backend.name()
        ))
    }

    pub fn eer_json(cfg: &PipelineConfig, frames: usize, backend: BackendKind) -> PathBuf {
        cfg.paths.results.join(format!(
            "eer_{}_{}.json",
            PipelineConfig::condition_name(frames),
            backend.name()
        ))
    }

    pub fn det_csv(cfg: &PipelineConfig, frames: usize, backend: BackendKind) -> PathBuf {
        cfg.paths.results.join(format!(
            "det_{}_{}.csv",
            PipelineConfig::condition_name(frames),
            backend.name()
        ))
    }

    pub fn det_svg_path(cfg: &PipelineConfig, frames: usize, backend: BackendKind) -> PathBuf {
        cfg.paths.results.join(format!(
            "det_{}_{}.svg",
            PipelineConfig::condition_name(frames),
            backend.name()
        ))
    }
}

pub const BACKENDS: [BackendKind; 3] = [BackendKind::Cosine, BackendKind::Lda, BackendKind::Plda];

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

pub fn cmd_synth(ctx: &Ctx) -> Result<(), StageError> {
    let a = Artifacts::of(ctx.cfg);
    let outputs = [
        a.corpus_manifest.clone(),
        a.train_manifest.clone(),
        a.enroll_manifest.clone(),
        a.test_manifest.clone(),
    ];
    if !ctx.force && all_exist(&outputs) {
        println!("[synth] up to date, skipping (use --force to regenerate)");
        return Ok(());
    }
    let spec = ctx.cfg.synth.to_spec(ctx.stage_seed("synth"));
    let manifest = generate_corpus(&spec, &ctx.cfg.paths.corpus, ctx.threads)
        .map_err(|e| StageError::Failed(e.to_string()))?;
    let split = split_corpus(
        &manifest,
        ctx.cfg.split.train_speakers,
        ctx.cfg.split.eval_speakers,
        ctx.cfg.split.enroll_utts,
        ctx.stage_seed("split"),
    )
    .map_err(|e| StageError::Failed(e.to_string()))?;
    split.train.write(&a.train_manifest)?;
    split.eval_enroll.write(&a.enroll_manifest)?;
    split.eval_test.write(&a.test_manifest)?;
    println!(
        "[synth] {} utterances, {} train / {} eval speakers -> {}",
        manifest.entries.len(),
        split.train.speakers().len(),
        split.eval_enroll.speakers().len(),
        ctx.cfg.paths.corpus.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// fbank
// ---------------------------------------------------------------------------

pub fn cmd_fbank(ctx: &Ctx, export_mfcc: bool) -> Result<(), StageError> {
    let a = Artifacts::of(ctx.cfg);
    if !ctx.force && a.features_manifest.exists() {
        println!("[fbank] up to date, skipping (use --force to recompute)");
        return Ok(());
    }
    let corpus_path = require(a.corpus_manifest, "run `voxvec synth` first")?;
    let corpus = Manifest::read(&corpus_path)?;
    std::fs::create_dir_all(&ctx.cfg.paths.features)?;
    let mfcc_dir = ctx.cfg.paths.features.join("mfcc");
    if export_mfcc {
        std::fs::create_dir_all(&mfcc_dir)?;
    }

    let results = parallel_map(&corpus.entries, ctx.threads, |_, u| {
        let wav = read_wav(&corpus.resolve(u)).map_err(|e| format!("{}: {e}", u.utt_id))?;
        let feat =
            compute_fbank(&wav, &ctx.cfg.fbank).map_err(|e| format!("{}: {e}", u.utt_id))?;
        let mfcc = if export_mfcc {
            Some(compute_mfcc(&wav, &ctx.cfg.fbank).map_err(|e| format!("{}: {e}", u.utt_id))?)
        } else {
            None
        };
        Ok::<_, String>((feat, mfcc))
    });

    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (u, res) in corpus.entries.iter().zip(results) {
        match res {
            Ok((feat, mfcc)) => {
                let rel = format!("{}.feat", u.utt_id);
                save_features(&ctx.cfg.paths.features.join(&rel), &feat)?;
                if let Some(m) = mfcc {
                    save_features(&mfcc_dir.join(&rel), &m)?;
                }
                entries.push(FeatureEntry {
                    utt_id: u.utt_id.clone(),
                    path: rel,
                    speaker_id: u.speaker_id.clone(),
                });
            }
            Err(why) => skipped.push(why),
        }
    }
    for why in &skipped {
        println!("[fbank] warning: skipped {why}");
    }
    let manifest = FeatureManifest {
        entries,
        base_dir: ctx.cfg.paths.features.clone(),
    };
    manifest.write(&a.features_manifest)?;
    println!(
        "[fbank] {} utterances featurized ({} skipped) -> {}",
        manifest.entries.len(),
        skipped.len(),
        a.features_manifest.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

/// Feature-manifest subset for the given speakers.
fn filter_features(manifest: &FeatureManifest, speakers: &[String]) -> FeatureManifest {
    let set: std::collections::BTreeSet<&String> = speakers.iter().collect();
    FeatureManifest {
        entries: manifest
            .entries
            .iter()
            .filter(|e| set.contains(&e.speaker_id))
            .cloned()
            .collect(),
        base_dir: manifest.base_dir.clone(),
    }
}

/// Split a feature manifest into SGD and held-out parts: the last
/// `holdout_per_speaker` utterances (by id) of every speaker are held out.
fn split_holdout(
    manifest: &FeatureManifest,
    holdout_per_speaker: usize,
) -> (FeatureManifest, FeatureManifest) {
    let mut per_speaker: BTreeMap<&String, Vec<&FeatureEntry>> = BTreeMap::new();
    for e in &manifest.entries {
        per_speaker.entry(&e.speaker_id).or_default().push(e);
    }
    let mut sgd = Vec::new();
    let mut held = Vec::new();
    for (_, mut utts) in per_speaker {
        utts.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
        let keep = utts.len().saturating_sub(holdout_per_speaker).max(1);
        for (i, e) in utts.into_iter().enumerate() {
            if i < keep {
                sgd.push(e.clone());
            } else {
                held.push(e.clone());
            }
        }
    }
    (
        FeatureManifest {
            entries: sgd,
            base_dir: manifest.base_dir.clone(),
        },
        FeatureManifest {
            entries: held,
            base_dir: manifest.base_dir.clone(),
        },
    )
}

#[derive(Serialize)]
struct LogLine {
    epoch: usize,
    mean_loss: f64,
    loss_ema: f64,
    lr: f64,
    windows: u64,
    heldout_acc: Option<f64>,
}

pub fn cmd_train(ctx: &Ctx, train_speakers_override: Option<usize>) -> Result<(), StageError> {
    let a = Artifacts::of(ctx.cfg);
    if !ctx.force && all_exist(&[a.model.clone(), a.label_map.clone()]) {
        println!("[train] up to date, skipping (use --force to retrain)");
        return Ok(());
    }
    let features_path = require(a.features_manifest.clone(), "run `voxvec fbank` first")?;
    let train_manifest_path = require(a.train_manifest.clone(), "run `voxvec synth` first")?;
    let features = FeatureManifest::read(&features_path)?;
    let train_manifest = Manifest::read(&train_manifest_path)?;

    let mut speakers = train_manifest.speakers();
    let subset = train_speakers_override.unwrap_or(ctx.cfg.train.train_speakers);
    if subset > 0 {
        if subset > speakers.len() {
            return Err(StageError::Config(format!(
                "requested {subset} training speakers, split has {}",
                speakers.len()
            )));
        }
        speakers.truncate(subset);
    }
    if speakers.len() < 2 {
        return Err(StageError::Config(
            "training needs at least 2 speakers".into(),
        ));
    }
    let train_features = filter_features(&features, &speakers);
    let (sgd_manifest, holdout_manifest) =
        split_holdout(&train_features, ctx.cfg.train.holdout_utts_per_speaker);

    let num_speakers = speakers.len();
    let arch = ctx.cfg.arch.to_config(num_speakers);
    std::fs::create_dir_all(&ctx.cfg.paths.models)?;

    // Resume from a checkpoint when one is present and not forced away.
    let resuming = !ctx.force && all_exist(&[a.ckpt_model.clone(), a.ckpt_state.clone()]);
    let (mut model, mut state) = if resuming {
        let (m, s) = load_checkpoint(&a.ckpt_model, &a.ckpt_state)?;
        println!("[train] resuming from epoch {}", s.epoch);
        (m, s)
    } else {
        let model = build_ctdnn::<f32>(&arch, ctx.stage_seed("init"))?;
        let tc = ctx.cfg.train.to_config(ctx.stage_seed("train"));
        let state = TrainState::fresh(&tc);
        let _ = std::fs::remove_file(&a.train_log);
        (model, state)
    };
    let train_cfg = ctx.cfg.train.to_config(ctx.stage_seed("train"));

    let ds = make_frame_dataset(&sgd_manifest, &model, None)?;
    for utt in &ds.skipped_short {
        println!("[train] warning: {utt} shorter than one window, no examples");
    }
    let heldout = if holdout_manifest.entries.is_empty() {
        None
    } else {
        Some(make_frame_dataset(
            &holdout_manifest,
            &model,
            Some(&ds.label_map),
        )?)
    };
    save_label_map(&a.label_map, &ds.label_map)?;
    println!(
        "[train] {} speakers, {} utterances, {} windows, {} held-out utterances",
        num_speakers,
        ds.utts.len(),
        ds.num_windows(),
        heldout.as_ref().map(|h| h.utts.len()).unwrap_or(0)
    );

    let mut log = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&a.train_log)?;
    use std::io::Write;
    while state.epoch < train_cfg.epochs_max {
        let out = advance_epoch(
            &mut model,
            &ds,
            heldout.as_ref(),
            &train_cfg,
            &mut state,
            ctx.threads,
        )?;
        let line = LogLine {
            epoch: out.stats.epoch,
            mean_loss: out.stats.mean_loss,
            loss_ema: out.stats.loss_ema,
            lr: out.stats.lr,
            windows: out.stats.windows,
            heldout_acc: out.stats.heldout_acc,
        };
        writeln!(log, "{}", serde_json::to_string(&line)?)?;
        println!(
            "[train] epoch {:>2}: loss {:.4}, heldout acc {}, lr {:.5}{}",
            out.stats.epoch,
            out.stats.mean_loss,
            out.stats
                .heldout_acc
                .map(|a| format!("{:.3}", a))
                .unwrap_or_else(|| "-".into()),
            out.stats.lr,
            if out.lr_halved { " (halved)" } else { "" }
        );
        save_checkpoint(&a.ckpt_model, &a.ckpt_state, &model, &state)?;
        if out.stop {
            break;
        }
    }
    save_model(&a.model, &model)?;
    println!("[train] model -> {}", a.model.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

fn feat_to_mat(entry: &FeatureEntry, manifest: &FeatureManifest) -> Result<Mat<f32>, StageError> {
    let feat = load_features(&manifest.resolve(entry))?;
    Ok(Mat::from_vec(feat.rows(), feat.cols(), feat.data().to_vec()))
}

pub fn cmd_extract(ctx: &Ctx) -> Result<(), StageError> {
    let a = Artifacts::of(ctx.cfg);
    let mut outputs = vec![
        a.train_vectors.clone(),
        a.enroll_vectors.clone(),
        a.embeddings_csv.clone(),
    ];
    for &frames in &ctx.cfg.eval.test_frames {
        outputs.push(Artifacts::test_vectors(ctx.cfg, frames));
    }
    if !ctx.force && all_exist(&outputs) {
        println!("[extract] up to date, skipping (use --force to re-extract)");
        return Ok(());
    }
    let model = load_model(&require(a.model.clone(), "run `voxvec train` first")?)?;
    let label_map = voxvec_core::train::load_label_map(&require(
        a.label_map.clone(),
        "run `voxvec train` first",
    )?)?;
    let features = FeatureManifest::read(&require(
        a.features_manifest.clone(),
        "run `voxvec fbank` first",
    )?)?;
    let enroll_manifest = Manifest::read(&require(
        a.enroll_manifest.clone(),
        "run `voxvec synth` first",
    )?)?;
    let test_manifest = Manifest::read(&require(
        a.test_manifest.clone(),
        "run `voxvec synth` first",
    )?)?;
    std::fs::create_dir_all(&ctx.cfg.paths.vectors)?;
    let min_frames = receptive_field(&model.config).total;

    // Training-speaker d-vectors (backend fitting data).
    let train_speakers: Vec<String> = label_map.keys().cloned().collect();
    let train_feats = filter_features(&features, &train_speakers);
    let train_vecs: Vec<Result<DVector, String>> =
        parallel_map(&train_feats.entries, ctx.threads, |_, e| {
            let mat = feat_to_mat(e, &train_feats).map_err(|err| err.to_string())?;
            extract_dvector(&model, &mat, &e.utt_id, &e.speaker_id).map_err(|err| {
                format!("{}: {err}", e.utt_id)
            })
        });
    let mut train_dvecs = Vec::new();
    for v in train_vecs {
        match v {
            Ok(d) => train_dvecs.push(d),
            Err(why) => println!("[extract] warning: train vector skipped: {why}"),
        }
    }
    save_dvectors(&a.train_vectors, &train_dvecs)?;

    // Enrollment vectors: pooled over each eval speaker's enroll utterances.
    let feat_by_id: BTreeMap<&String, &FeatureEntry> =
        features.entries.iter().map(|e| (&e.utt_id, e)).collect();
    let mut enroll_dvecs = Vec::new();
    for (speaker, utts) in enroll_manifest.by_speaker() {
        let mut mats = Vec::new();
        for u in utts {
            if let Some(entry) = feat_by_id.get(&u.utt_id) {
                mats.push(feat_to_mat(entry, &features)?);
            }
        }
        let pooled = enroll_speaker(&model, &mats, &speaker)
            .map_err(|e| StageError::Failed(format!("enrolling {speaker}: {e}")))?;
        enroll_dvecs.push(DVector {
            utt_id: speaker.clone(),
            ..pooled
        });
    }
    save_dvectors(&a.enroll_vectors, &enroll_dvecs)?;

    // Test vectors per length condition.
    let mut test_full: Vec<DVector> = Vec::new();
    for &frames in &ctx.cfg.eval.test_frames {
        let jobs: Vec<&voxvec_core::corpus::Utterance> = test_manifest.entries.iter().collect();
        let extracted: Vec<Result<Option<DVector>, String>> =
            parallel_map(&jobs, ctx.threads, |_, u| {
                let entry = match feat_by_id.get(&u.utt_id) {
                    Some(e) => e,
                    None => return Ok(None), // dropped by the front-end
                };
                let feat = load_features(&features.resolve(entry)).map_err(|e| e.to_string())?;
                let needed = if frames == 0 { min_frames } else { frames };
                if feat.rows() < needed {
                    return Ok(None);
                }
                let cut = if frames == 0 {
                    feat
                } else {
                    truncate_frames(&feat, frames).map_err(|e| e.to_string())?
                };
                let mat = Mat::from_vec(cut.rows(), cut.cols(), cut.data().to_vec());
                extract_dvector(&model, &mat, &u.utt_id, &u.speaker_id)
                    .map(Some)
                    .map_err(|e| format!("{}: {e}", u.utt_id))
            });
        let mut vecs = Vec::new();
        let mut skipped = 0usize;
        for v in extracted {
            match v.map_err(StageError::Failed)? {
                Some(d) => vecs.push(d),
                None => skipped += 1,
            }
        }
        let name = PipelineConfig::condition_name(frames);
        if skipped > 0 {
            println!("[extract] condition {name}: skipped {skipped} too-short utterances");
        }
        println!("[extract] condition {name}: {} test vectors", vecs.len());
        save_dvectors(&Artifacts::test_vectors(ctx.cfg, frames), &vecs)?;
        if frames == 0 {
            test_full = vecs;
        }
    }

    // CSV embedding export (train + full-length test vectors).
    let mut csv = String::from("set,utt_id,speaker_id");
    let dim = model.config.feature_dim;
    for i in 0..dim {
        csv.push_str(&format!(",d{i}"));
    }
    csv.push('\n');
    for (set, vecs) in [("train", &train_dvecs), ("test", &test_full)] {
        for v in vecs.iter() {
            csv.push_str(&format!("{set},{},{}", v.utt_id, v.speaker_id));
            for x in &v.values {
                csv.push_str(&format!(",{x}"));
            }
            csv.push('\n');
        }
    }
    std::fs::write(&a.embeddings_csv, csv)?;
    println!(
        "[extract] {} train vectors, {} enrollments -> {}",
        train_dvecs.len(),
        enroll_dvecs.len(),
        ctx.cfg.paths.vectors.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// backend-fit
// ---------------------------------------------------------------------------

pub fn cmd_backend_fit(ctx: &Ctx) -> Result<(), StageError> {
    let a = Artifacts::of(ctx.cfg);
    if !ctx.force && all_exist(&[a.backend_lda.clone(), a.backend_plda.clone()]) {
        println!("[backend-fit] up to date, skipping (use --force to refit)");
        return Ok(());
    }
    let vectors = load_dvectors(&require(
        a.train_vectors.clone(),
        "run `voxvec extract` first",
    )?)?;
    if vectors.is_empty() {
        return Err(StageError::Failed("no training vectors to fit on".into()));
    }
    let dim = vectors[0].values.len();
    let mut speakers: Vec<&String> = vectors
        .iter()
        .map(|v| &v.speaker_id)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    speakers.sort();
    let index: BTreeMap<&String, usize> =
        speakers.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let labels: Vec<usize> = vectors.iter().map(|v| index[&v.speaker_id]).collect();
    let data: Vec<f64> = vectors
        .iter()
        .flat_map(|v| v.values.iter().map(|&x| f64::from(x)))
        .collect();
    let mat = Mat::from_vec(vectors.len(), dim, data);

    let classes = speakers.len();
    let requested = if ctx.cfg.backend.lda_dim == 0 {
        150
    } else {
        ctx.cfg.backend.lda_dim
    };
    let lda_dim = requested.min(classes - 1).min(dim);
    if lda_dim < requested {
        println!(
            "[backend-fit] LDA dimension clamped to {lda_dim} (classes - 1 = {}, dim = {dim})",
            classes - 1
        );
    }
    let lda = fit_lda(&mat, &labels, lda_dim)?;
    save_backend(
        &a.backend_lda,
        &Backend::Lda {
            transform: lda,
            length_norm: ctx.cfg.backend.length_norm,
        },
    )?;

    let (plda, report) = fit_plda(&mat, &labels, &PldaOptions::default())?;
    save_backend(
        &a.backend_plda,
        &Backend::Plda {
            model: plda,
            length_norm: ctx.cfg.backend.length_norm,
        },
    )?;
    println!(
        "[backend-fit] LDA ({} -> {lda_dim}) and PLDA fitted on {} vectors / {classes} speakers (EM: {} iterations)",
        dim,
        vectors.len(),
        report.iterations
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

fn load_backend_of(ctx: &Ctx, kind: BackendKind) -> Result<Backend, StageError> {
    let a = Artifacts::of(ctx.cfg);
    Ok(match kind {
        BackendKind::Cosine => Backend::Cosine,
        BackendKind::Lda => load_backend(&require(
            a.backend_lda,
            "run `voxvec backend-fit` first",
        )?)?,
        BackendKind::Plda => load_backend(&require(
            a.backend_plda,
            "run `voxvec backend-fit` first",
        )?)?,
    })
}

fn vectors_as_map(vectors: &[DVector]) -> BTreeMap<String, Vec<f64>> {
    vectors
        .iter()
        .map(|v| {
            (
                v.utt_id.clone(),
                v.values.iter().map(|&x| f64::from(x)).collect(),
            )
        })
        .collect()
}

pub fn cmd_score(ctx: &Ctx) -> Result<(), StageError> {
    let a = Artifacts::of(ctx.cfg);
    let mut outputs = Vec::new();
    for &frames in &ctx.cfg.eval.test_frames {
        for backend in BACKENDS {
            outputs.push(Artifacts::trials(ctx.cfg, frames, backend));
        }
    }
    if !ctx.force && all_exist(&outputs) {
        println!("[score] up to date, skipping (use --force to rescore)");
        return Ok(());
    }
    std::fs::create_dir_all(&ctx.cfg.paths.results)?;
    let enroll = load_dvectors(&require(
        a.enroll_vectors.clone(),
        "run `voxvec extract` first",
    )?)?;
    let enroll_ids: Vec<String> = enroll.iter().map(|v| v.utt_id.clone()).collect();
    let enroll_map = vectors_as_map(&enroll);

    for &frames in &ctx.cfg.eval.test_frames {
        let test = load_dvectors(&require(
            Artifacts::test_vectors(ctx.cfg, frames),
            "run `voxvec extract` first",
        )?)?;
        let test_pairs: Vec<(String, String)> = test
            .iter()
            .map(|v| (v.utt_id.clone(), v.speaker_id.clone()))
            .collect();
        let test_map = vectors_as_map(&test);
        for kind in BACKENDS {
            let backend = load_backend_of(ctx, kind)?;
            let scorer = backend.scorer()?;
            let mut trials = make_trials(&enroll_ids, &test_pairs)?;
            score_trials(&mut trials, &enroll_map, &test_map, &scorer, ctx.threads)?;
            trials.write(&Artifacts::trials(ctx.cfg, frames, kind))?;
            println!(
                "[score] condition {} x {}: {} trials ({} targets)",
                PipelineConfig::condition_name(frames),
                kind.name(),
                trials.trials.len(),
                trials.num_targets()
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

pub fn cmd_eval(ctx: &Ctx, only_frames: Option<usize>) -> Result<(), StageError> {
    let conditions: Vec<usize> = match only_frames {
        Some(f) => vec![f],
        None => ctx.cfg.eval.test_frames.clone(),
    };
    let mut outputs = Vec::new();
    for &frames in &conditions {
        for backend in BACKENDS {
            outputs.push(Artifacts::eer_json(ctx.cfg, frames, backend));
            outputs.push(Artifacts::det_csv(ctx.cfg, frames, backend));
        }
    }
    if !ctx.force && all_exist(&outputs) {
        println!("[eval] up to date, skipping (use --force to re-evaluate)");
        return Ok(());
    }
    for &frames in &conditions {
        for kind in BACKENDS {
            let trials_path = require(
                Artifacts::trials(ctx.cfg, frames, kind),
                "run `voxvec score` first",
            )?;
            let trials = TrialList::read(&trials_path)?;
            let eer = compute_eer(&trials)?;
            let points = det_points(&trials)?;
            std::fs::write(
                Artifacts::eer_json(ctx.cfg, frames, kind),
                serde_json::to_string_pretty(&eer)?,
            )?;
            std::fs::write(
                Artifacts::det_csv(ctx.cfg, frames, kind),
                det_to_csv(&points),
            )?;
            println!(
                "[eval] condition {} x {}: EER {:.2}% at threshold {:.4} ({} targets / {} nontargets)",
                PipelineConfig::condition_name(frames),
                kind.name(),
                eer.eer * 100.0,
                eer.threshold,
                eer.num_target,
                eer.num_nontarget
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ReportRow {
    condition: String,
    backend: String,
    eer: f64,
    threshold: f64,
    n_target: usize,
    n_nontarget: usize,
}

#[derive(Serialize)]
struct Report {
    seed: u64,
    num_train_speakers: usize,
    num_eval_speakers: usize,
    conditions: Vec<ReportRow>,
}

pub fn cmd_report(ctx: &Ctx) -> Result<(), StageError> {
    let a = Artifacts::of(ctx.cfg);
    let label_map = voxvec_core::train::load_label_map(&require(
        a.label_map.clone(),
        "run `voxvec train` first",
    )?)?;
    let enroll = load_dvectors(&require(
        a.enroll_vectors.clone(),
        "run `voxvec extract` first",
    )?)?;

    let mut rows = Vec::new();
    for &frames in &ctx.cfg.eval.test_frames {
        for kind in BACKENDS {
            let path = require(
                Artifacts::eer_json(ctx.cfg, frames, kind),
                "run `voxvec eval` first",
            )?;
            let eer: EerResult = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
            rows.push(ReportRow {
                condition: PipelineConfig::condition_name(frames),
                backend: kind.name().to_string(),
                eer: eer.eer,
                threshold: eer.threshold,
                n_target: eer.num_target,
                n_nontarget: eer.num_nontarget,
            });
            // SVG rendering of the stored DET curve.
            let trials = TrialList::read(&require(
                Artifacts::trials(ctx.cfg, frames, kind),
                "run `voxvec score` first",
            )?)?;
            let points = det_points(&trials)?;
            let title = format!(
                "DET {} / {}",
                PipelineConfig::condition_name(frames),
                kind.name()
            );
            std::fs::write(
                Artifacts::det_svg_path(ctx.cfg, frames, kind),
                det_svg(&title, &points, eer.eer),
            )?;
        }
    }
    let report = Report {
        seed: ctx.seed,
        num_train_speakers: label_map.len(),
        num_eval_speakers: enroll.len(),
        conditions: rows,
    };
    std::fs::write(&a.report, serde_json::to_string_pretty(&report)?)?;

    // Plain-text table: conditions as rows, backends as columns.
    println!("\nEER (%) by test condition and backend");
    print!("{:<10}", "condition");
    for kind in BACKENDS {
        print!("{:>10}", kind.name());
    }
    println!();
    for &frames in &ctx.cfg.eval.test_frames {
        print!("{:<10}", PipelineConfig::condition_name(frames));
        for kind in BACKENDS {
            let row = report
                .conditions
                .iter()
                .find(|r| {
                    r.condition == PipelineConfig::condition_name(frames)
                        && r.backend == kind.name()
                })
                .expect("row exists");
            print!("{:>10.2}", row.eer * 100.0);
        }
        println!();
    }
    println!("\n[report] -> {}", a.report.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// run-all
// ---------------------------------------------------------------------------

pub fn cmd_run_all(ctx: &Ctx) -> Result<(), StageError> {
    cmd_synth(ctx)?;
    cmd_fbank(ctx, false)?;
    cmd_train(ctx, None)?;
    cmd_extract(ctx)?;
    cmd_backend_fit(ctx)?;
    cmd_score(ctx)?;
    cmd_eval(ctx, None)?;
    cmd_report(ctx)?;
    Ok(())
}
