//! The convolutional/time-delay speaker network.
//!
//! Layer chain, all valid (unpadded), freq sizes for the canonical config in
//! brackets:
//!
//! ```text
//! fbank T x 40
//!   -> splice +/-4, spliced frames as channels   [9 x (T-8) x 40]
//!   -> conv 32 maps, kernel 2x5, ReLU            [32 x (T-9) x 36]
//!   -> max pool over freq, 2                     [32 x (T-9) x 18]
//!   -> conv 64 maps, kernel 2x3, ReLU            [64 x (T-10) x 16]
//!   -> max pool over freq, 2                     [64 x (T-10) x 8]
//!   -> flatten per frame                         [(T-10) x 512]
//!   -> bottleneck affine 512 -> 512, ReLU
//!   -> time-delay {-3,0,3} 1536 -> 1024, p-norm group 2 -> 512   [(T-16) x 512]
//!   -> time-delay {-1,0,2} 1536 -> 1024, p-norm group 2 -> 512   [(T-19) x 512]
//!   -> feature affine 512 -> 400        <- speaker features read here
//!   -> output affine 400 -> K           <- training softmax targets
//! ```
//!
//! The receptive field of one output frame is exactly 20 input frames
//! (10 left, 9 right): splice contributes 4+4, each conv time kernel adds one
//! frame (assigned left), the time-delay layers add 3+3 and 1+2. A 20-frame
//! input therefore produces exactly one feature row, and T frames produce
//! T-19 rows.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bytesio as bio;
use crate::bytesio::BytesError;
use crate::nn::gradcheck::{relative_error, BlockReport, GradCheckReport};
use crate::nn::{softmax_xent, Affine, Conv2d, Mat, MaxPool2d, PNorm, Real, Ten3, TimeDelayAffine};
use crate::rng::Rng;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSpec {
    pub maps: usize,
    pub kernel_time: usize,
    pub kernel_freq: usize,
    /// Max-pool width over the frequency axis (1 = no pooling). Pooling never
    /// touches the time axis, so frame-count arithmetic is untouched.
    pub pool_freq: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdSpec {
    pub offsets: Vec<i32>,
    pub affine_out: usize,
    pub pnorm_group: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtdnnConfig {
    pub input_bins: usize,
    pub splice_left: usize,
    pub splice_right: usize,
    pub conv1: ConvSpec,
    pub conv2: ConvSpec,
    pub bottleneck_dim: usize,
    pub td1: TdSpec,
    pub td2: TdSpec,
    pub feature_dim: usize,
    pub num_speakers: usize,
}

impl CtdnnConfig {
    /// A reduced architecture with the canonical 20-frame receptive field.
    /// Useful for smoke tests and micro-experiments where the full widths
    /// would be wasteful.
    pub fn small(num_speakers: usize) -> Self {
        CtdnnConfig {
            input_bins: 12,
            splice_left: 4,
            splice_right: 4,
            conv1: ConvSpec {
                maps: 3,
                kernel_time: 2,
                kernel_freq: 3,
                pool_freq: 2,
            },
            conv2: ConvSpec {
                maps: 4,
                kernel_time: 2,
                kernel_freq: 2,
                pool_freq: 2,
            },
            bottleneck_dim: 8,
            td1: TdSpec {
                offsets: vec![-3, 0, 3],
                affine_out: 12,
                pnorm_group: 2,
            },
            td2: TdSpec {
                offsets: vec![-1, 0, 2],
                affine_out: 8,
                pnorm_group: 2,
            },
            feature_dim: 5,
            num_speakers,
        }
    }

    /// The canonical architecture with `num_speakers` output units.
    pub fn canonical(num_speakers: usize) -> Self {
        CtdnnConfig {
            input_bins: 40,
            splice_left: 4,
            splice_right: 4,
            conv1: ConvSpec {
                maps: 32,
                kernel_time: 2,
                kernel_freq: 5,
                pool_freq: 2,
            },
            conv2: ConvSpec {
                maps: 64,
                kernel_time: 2,
                kernel_freq: 3,
                pool_freq: 2,
            },
            bottleneck_dim: 512,
            td1: TdSpec {
                offsets: vec![-3, 0, 3],
                affine_out: 1024,
                pnorm_group: 2,
            },
            td2: TdSpec {
                offsets: vec![-1, 0, 2],
                affine_out: 1024,
                pnorm_group: 2,
            },
            feature_dim: 400,
            num_speakers,
        }
    }

    fn pooled(freq: usize, pool: usize) -> Result<usize, CtdnnError> {
        if pool == 0 {
            return Err(CtdnnError::Config("pool_freq must be >= 1".into()));
        }
        if freq < pool || freq % pool != 0 {
            return Err(CtdnnError::Config(format!(
                "pool width {pool} does not tile frequency extent {freq}"
            )));
        }
        Ok(freq / pool)
    }

    /// Frequency extent after each stage; errors name the failing layer.
    pub fn freq_chain(&self) -> Result<(usize, usize), CtdnnError> {
        if self.conv1.kernel_freq > self.input_bins {
            return Err(CtdnnError::Config(format!(
                "conv1 kernel_freq {} exceeds input bins {}",
                self.conv1.kernel_freq, self.input_bins
            )));
        }
        let f1 = Self::pooled(
            self.input_bins - self.conv1.kernel_freq + 1,
            self.conv1.pool_freq,
        )
        .map_err(|e| CtdnnError::Config(format!("conv1: {e}")))?;
        if self.conv2.kernel_freq > f1 {
            return Err(CtdnnError::Config(format!(
                "conv2 kernel_freq {} exceeds pooled extent {f1}",
                self.conv2.kernel_freq
            )));
        }
        let f2 = Self::pooled(f1 - self.conv2.kernel_freq + 1, self.conv2.pool_freq)
            .map_err(|e| CtdnnError::Config(format!("conv2: {e}")))?;
        Ok((f1, f2))
    }

    pub fn validate(&self) -> Result<(), CtdnnError> {
        if self.num_speakers < 2 {
            return Err(CtdnnError::Config(format!(
                "num_speakers must be >= 2, got {}",
                self.num_speakers
            )));
        }
        if self.feature_dim == 0 {
            return Err(CtdnnError::Config("feature_dim must be >= 1".into()));
        }
        if self.conv1.kernel_time == 0 || self.conv2.kernel_time == 0 {
            return Err(CtdnnError::Config("conv kernel_time must be >= 1".into()));
        }
        for (name, td) in [("td1", &self.td1), ("td2", &self.td2)] {
            if td.offsets.is_empty() {
                return Err(CtdnnError::Config(format!("{name}: offsets empty")));
            }
            if td.offsets.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CtdnnError::Config(format!(
                    "{name}: offsets must be strictly increasing"
                )));
            }
            if td.pnorm_group == 0 || td.affine_out % td.pnorm_group != 0 {
                return Err(CtdnnError::Config(format!(
                    "{name}: p-norm group {} does not divide affine_out {}",
                    td.pnorm_group, td.affine_out
                )));
            }
        }
        let (_, f2) = self.freq_chain()?;
        let cn_out = self.conv2.maps * f2;
        if cn_out != self.bottleneck_dim {
            return Err(CtdnnError::Config(format!(
                "bottleneck: configured dim {} but convolutional output flattens to {} ({} maps x {} freq)",
                self.bottleneck_dim, cn_out, self.conv2.maps, f2
            )));
        }
        Ok(())
    }

    pub fn td1_out_dim(&self) -> usize {
        self.td1.affine_out / self.td1.pnorm_group
    }

    pub fn td2_out_dim(&self) -> usize {
        self.td2.affine_out / self.td2.pnorm_group
    }

    /// Number of spliced frames, i.e. conv input channels.
    pub fn splice_width(&self) -> usize {
        self.splice_left + self.splice_right + 1
    }
}

/// Receptive-field extent of one output frame: frames of left context,
/// frames of right context, and the total window size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReceptiveField {
    pub left: usize,
    pub right: usize,
    pub total: usize,
}

/// Compose splice, convolution and time-delay extents. Convolution time
/// kernels consume frames on the left by convention.
pub fn receptive_field(cfg: &CtdnnConfig) -> ReceptiveField {
    let td1_min = *cfg.td1.offsets.iter().min().unwrap();
    let td1_max = *cfg.td1.offsets.iter().max().unwrap();
    let td2_min = *cfg.td2.offsets.iter().min().unwrap();
    let td2_max = *cfg.td2.offsets.iter().max().unwrap();
    let left = cfg.splice_left as i64
        + (cfg.conv1.kernel_time as i64 - 1)
        + (cfg.conv2.kernel_time as i64 - 1)
        + i64::from(-td1_min)
        + i64::from(-td2_min);
    let right =
        cfg.splice_right as i64 + i64::from(td1_max) + i64::from(td2_max);
    let total = cfg.splice_left as i64
        + cfg.splice_right as i64
        + (cfg.conv1.kernel_time as i64 - 1)
        + (cfg.conv2.kernel_time as i64 - 1)
        + i64::from(td1_max - td1_min)
        + i64::from(td2_max - td2_min)
        + 1;
    ReceptiveField {
        left: left as usize,
        right: right as usize,
        total: total as usize,
    }
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum CtdnnError {
    Config(String),
    /// Input has fewer frames than the receptive field.
    TooShort { needed: usize, got: usize },
    /// Model file decode failure.
    Format(BytesError),
    Io(std::io::Error),
}

impl std::fmt::Display for CtdnnError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CtdnnError::Config(m) => write!(f, "configuration error: {m}"),
            CtdnnError::TooShort { needed, got } => {
                write!(f, "utterance too short: {got} frames, need at least {needed}")
            }
            CtdnnError::Format(e) => write!(f, "model file: {e}"),
            CtdnnError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CtdnnError {}

impl From<BytesError> for CtdnnError {
    fn from(e: BytesError) -> Self {
        CtdnnError::Format(e)
    }
}

impl From<std::io::Error> for CtdnnError {
    fn from(e: std::io::Error) -> Self {
        CtdnnError::Io(e)
    }
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

pub const MODEL_VERSION: u32 = 1;
const MODEL_MAGIC: &[u8; 4] = b"CTDN";

/// Assembled network. Widths are chain-checked at construction; immutable
/// after training, so concurrent read-only forward passes are safe.
#[derive(Debug, Clone, PartialEq)]
pub struct CtdnnModel<R> {
    pub config: CtdnnConfig,
    pub version: u32,
    pub conv1: Conv2d<R>,
    pub pool1: MaxPool2d,
    pub conv2: Conv2d<R>,
    pub pool2: MaxPool2d,
    pub bottleneck: Affine<R>,
    pub td1: TimeDelayAffine<R>,
    pub pnorm1: PNorm,
    pub td2: TimeDelayAffine<R>,
    pub pnorm2: PNorm,
    pub feature: Affine<R>,
    pub output: Affine<R>,
}

/// Names of the trainable parameter blocks, in serialization order.
pub const PARAM_BLOCKS: [&str; 14] = [
    "conv1.weight",
    "conv1.bias",
    "conv2.weight",
    "conv2.bias",
    "bottleneck.weight",
    "bottleneck.bias",
    "td1.weight",
    "td1.bias",
    "td2.weight",
    "td2.bias",
    "feature.weight",
    "feature.bias",
    "output.weight",
    "output.bias",
];

fn glorot_fill<R: Real>(rng: &mut Rng, params: &mut [R], fan_in: usize, fan_out: usize) {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for p in params.iter_mut() {
        *p = R::from_f64(rng.uniform_in(-bound, bound));
    }
}

/// Build a fully initialized model. Identical seeds produce bitwise
/// identical parameters; biases start at zero.
pub fn build_ctdnn<R: Real>(cfg: &CtdnnConfig, seed: u64) -> Result<CtdnnModel<R>, CtdnnError> {
    cfg.validate()?;
    let (f1, _f2) = cfg.freq_chain()?;
    let channels = cfg.splice_width();
    let mut rng = Rng::new(seed);

    let mut conv1 = Conv2d::zeros(channels, cfg.conv1.maps, cfg.conv1.kernel_time, cfg.conv1.kernel_freq, true);
    glorot_fill(
        &mut rng,
        &mut conv1.weight,
        channels * cfg.conv1.kernel_time * cfg.conv1.kernel_freq,
        cfg.conv1.maps * cfg.conv1.kernel_time * cfg.conv1.kernel_freq,
    );
    let pool1 = MaxPool2d::freq_only(cfg.conv1.pool_freq);

    let mut conv2 = Conv2d::zeros(cfg.conv1.maps, cfg.conv2.maps, cfg.conv2.kernel_time, cfg.conv2.kernel_freq, true);
    glorot_fill(
        &mut rng,
        &mut conv2.weight,
        cfg.conv1.maps * cfg.conv2.kernel_time * cfg.conv2.kernel_freq,
        cfg.conv2.maps * cfg.conv2.kernel_time * cfg.conv2.kernel_freq,
    );
    let pool2 = MaxPool2d::freq_only(cfg.conv2.pool_freq);
    let _ = f1;

    let mut bottleneck = Affine::zeros(cfg.bottleneck_dim, cfg.bottleneck_dim, true);
    glorot_fill(&mut rng, &mut bottleneck.weight, cfg.bottleneck_dim, cfg.bottleneck_dim);

    let td1_in = cfg.bottleneck_dim;
    let mut td1 = TimeDelayAffine::zeros(cfg.td1.offsets.clone(), td1_in, cfg.td1.affine_out);
    glorot_fill(
        &mut rng,
        &mut td1.weight,
        td1_in * cfg.td1.offsets.len(),
        cfg.td1.affine_out,
    );
    let pnorm1 = PNorm::new(cfg.td1.pnorm_group, 2.0);

    let td2_in = cfg.td1_out_dim();
    let mut td2 = TimeDelayAffine::zeros(cfg.td2.offsets.clone(), td2_in, cfg.td2.affine_out);
    glorot_fill(
        &mut rng,
        &mut td2.weight,
        td2_in * cfg.td2.offsets.len(),
        cfg.td2.affine_out,
    );
    let pnorm2 = PNorm::new(cfg.td2.pnorm_group, 2.0);

    let mut feature = Affine::zeros(cfg.td2_out_dim(), cfg.feature_dim, false);
    glorot_fill(&mut rng, &mut feature.weight, cfg.td2_out_dim(), cfg.feature_dim);

    let mut output = Affine::zeros(cfg.feature_dim, cfg.num_speakers, false);
    glorot_fill(&mut rng, &mut output.weight, cfg.feature_dim, cfg.num_speakers);

    Ok(CtdnnModel {
        config: cfg.clone(),
        version: MODEL_VERSION,
        conv1,
        pool1,
        conv2,
        pool2,
        bottleneck,
        td1,
        pnorm1,
        td2,
        pnorm2,
        feature,
        output,
    })
}

impl<R: Real> CtdnnModel<R> {
    /// Minimum input frames for one output frame.
    pub fn min_frames(&self) -> usize {
        receptive_field(&self.config).total
    }

    pub fn num_blocks(&self) -> usize {
        PARAM_BLOCKS.len()
    }

    pub fn block(&self, i: usize) -> &[R] {
        match i {
            0 => &self.conv1.weight,
            1 => &self.conv1.bias,
            2 => &self.conv2.weight,
            3 => &self.conv2.bias,
            4 => &self.bottleneck.weight,
            5 => &self.bottleneck.bias,
            6 => &self.td1.weight,
            7 => &self.td1.bias,
            8 => &self.td2.weight,
            9 => &self.td2.bias,
            10 => &self.feature.weight,
            11 => &self.feature.bias,
            12 => &self.output.weight,
            13 => &self.output.bias,
            _ => panic!("block index {i} out of range"),
        }
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [R] {
        match i {
            0 => &mut self.conv1.weight,
            1 => &mut self.conv1.bias,
            2 => &mut self.conv2.weight,
            3 => &mut self.conv2.bias,
            4 => &mut self.bottleneck.weight,
            5 => &mut self.bottleneck.bias,
            6 => &mut self.td1.weight,
            7 => &mut self.td1.bias,
            8 => &mut self.td2.weight,
            9 => &mut self.td2.bias,
            10 => &mut self.feature.weight,
            11 => &mut self.feature.bias,
            12 => &mut self.output.weight,
            13 => &mut self.output.bias,
            _ => panic!("block index {i} out of range"),
        }
    }

    pub fn num_params(&self) -> usize {
        (0..self.num_blocks()).map(|i| self.block(i).len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        (0..self.num_blocks()).all(|i| self.block(i).iter().all(|v| v.is_finite()))
    }

    /// Valid splice: frame r of the output gathers input rows r ..
    /// r+splice_width-1 as channels. Output time length is T - (left+right).
    fn splice(&self, fbank: &Mat<R>) -> Ten3<R> {
        let channels = self.config.splice_width();
        let span = channels - 1;
        let t_out = fbank.rows - span;
        let bins = fbank.cols;
        let mut out = Ten3::zeros(channels, t_out, bins);
        for c in 0..channels {
            for t in 0..t_out {
                out.row_mut(c, t).copy_from_slice(fbank.row(t + c));
            }
        }
        out
    }

    /// `[C][T][W]` to `T x (C*W)`, channel-major within a row.
    fn flatten(&self, x: &Ten3<R>) -> Mat<R> {
        let mut out = Mat::zeros(x.h, x.c * x.w);
        for t in 0..x.h {
            let row = out.row_mut(t);
            for c in 0..x.c {
                row[c * x.w..(c + 1) * x.w].copy_from_slice(x.row(c, t));
            }
        }
        out
    }

    fn unflatten(&self, m: &Mat<R>, c: usize, w: usize) -> Ten3<R> {
        let mut out = Ten3::zeros(c, m.rows, w);
        for t in 0..m.rows {
            let row = m.row(t);
            for ci in 0..c {
                out.row_mut(ci, t).copy_from_slice(&row[ci * w..(ci + 1) * w]);
            }
        }
        out
    }

    fn check_length(&self, fbank: &Mat<R>) -> Result<(), CtdnnError> {
        let needed = self.min_frames();
        if fbank.rows < needed {
            return Err(CtdnnError::TooShort {
                needed,
                got: fbank.rows,
            });
        }
        if fbank.cols != self.config.input_bins {
            return Err(CtdnnError::Config(format!(
                "input has {} bins, model expects {}",
                fbank.cols, self.config.input_bins
            )));
        }
        Ok(())
    }

    /// Per-frame speaker features from the last hidden layer, `(T - rf + 1) x
    /// feature_dim`. Intermediates are dropped as soon as possible.
    pub fn forward_features(&self, fbank: &Mat<R>) -> Result<Mat<R>, CtdnnError> {
        self.check_length(fbank)?;
        let spliced = self.splice(fbank);
        let c1 = self.conv1.forward(&spliced).map_err(nn_to_cfg)?;
        drop(spliced);
        let (p1, _) = self.pool1.forward(&c1).map_err(nn_to_cfg)?;
        drop(c1);
        let c2 = self.conv2.forward(&p1).map_err(nn_to_cfg)?;
        drop(p1);
        let (p2, _) = self.pool2.forward(&c2).map_err(nn_to_cfg)?;
        drop(c2);
        let flat = self.flatten(&p2);
        drop(p2);
        let bn = self.bottleneck.forward(&flat).map_err(nn_to_cfg)?;
        drop(flat);
        let (t1, _) = self.td1.forward(&bn).map_err(nn_to_cfg)?;
        drop(bn);
        let n1 = self.pnorm1.forward(&t1).map_err(nn_to_cfg)?;
        drop(t1);
        let (t2, _) = self.td2.forward(&n1).map_err(nn_to_cfg)?;
        drop(n1);
        let n2 = self.pnorm2.forward(&t2).map_err(nn_to_cfg)?;
        drop(t2);
        self.feature.forward(&n2).map_err(nn_to_cfg)
    }

    /// Per-frame speaker logits, `(T - rf + 1) x K`.
    pub fn forward_logits(&self, fbank: &Mat<R>) -> Result<Mat<R>, CtdnnError> {
        let features = self.forward_features(fbank)?;
        self.output.forward(&features).map_err(nn_to_cfg)
    }

    /// Forward pass retaining every intermediate for backpropagation.
    pub fn forward_tape(&self, fbank: &Mat<R>) -> Result<Tape<R>, CtdnnError> {
        self.check_length(fbank)?;
        let spliced = self.splice(fbank);
        let conv1_out = self.conv1.forward(&spliced).map_err(nn_to_cfg)?;
        let (pool1_out, pool1_arg) = self.pool1.forward(&conv1_out).map_err(nn_to_cfg)?;
        let conv2_out = self.conv2.forward(&pool1_out).map_err(nn_to_cfg)?;
        let (pool2_out, pool2_arg) = self.pool2.forward(&conv2_out).map_err(nn_to_cfg)?;
        let flat = self.flatten(&pool2_out);
        let bn_out = self.bottleneck.forward(&flat).map_err(nn_to_cfg)?;
        let (td1_out, td1_gather) = self.td1.forward(&bn_out).map_err(nn_to_cfg)?;
        let pn1_out = self.pnorm1.forward(&td1_out).map_err(nn_to_cfg)?;
        let (td2_out, td2_gather) = self.td2.forward(&pn1_out).map_err(nn_to_cfg)?;
        let pn2_out = self.pnorm2.forward(&td2_out).map_err(nn_to_cfg)?;
        let feature_out = self.feature.forward(&pn2_out).map_err(nn_to_cfg)?;
        let logits = self.output.forward(&feature_out).map_err(nn_to_cfg)?;
        Ok(Tape {
            spliced,
            conv1_out,
            pool1_arg,
            pool1_out,
            conv2_out,
            pool2_arg,
            pool2_out,
            flat,
            bn_out,
            td1_gather,
            td1_out,
            pn1_out,
            td2_gather,
            td2_out,
            pn2_out,
            feature_out,
            logits,
        })
    }

    /// Backpropagate `grad_logits` through the tape, accumulating parameter
    /// gradients into `grads`.
    pub fn backward_tape(&self, tape: &Tape<R>, grad_logits: &Mat<R>, grads: &mut CtdnnGrads<R>) {
        let g_feat = {
            let (gw, gb) = grads.wb_mut(12);
            self.output
                .backward(&tape.feature_out, &tape.logits, grad_logits, gw, gb, true)
        };
        let g_pn2 = {
            let (gw, gb) = grads.wb_mut(10);
            self.feature
                .backward(&tape.pn2_out, &tape.feature_out, &g_feat, gw, gb, true)
        };
        let g_td2 = self.pnorm2.backward(&tape.td2_out, &tape.pn2_out, &g_pn2);
        let g_pn1 = {
            let (gw, gb) = grads.wb_mut(8);
            self.td2
                .backward(&tape.td2_gather, &g_td2, tape.pn1_out.rows, gw, gb, true)
        };
        let g_td1 = self.pnorm1.backward(&tape.td1_out, &tape.pn1_out, &g_pn1);
        let g_bn = {
            let (gw, gb) = grads.wb_mut(6);
            self.td1
                .backward(&tape.td1_gather, &g_td1, tape.bn_out.rows, gw, gb, true)
        };
        let g_flat = {
            let (gw, gb) = grads.wb_mut(4);
            self.bottleneck
                .backward(&tape.flat, &tape.bn_out, &g_bn, gw, gb, true)
        };
        let g_pool2 = self.unflatten(&g_flat, tape.pool2_out.c, tape.pool2_out.w);
        let g_conv2 = self.pool2.backward(
            (tape.conv2_out.c, tape.conv2_out.h, tape.conv2_out.w),
            &tape.pool2_arg,
            &g_pool2,
        );
        let g_pool1 = {
            let (gw, gb) = grads.wb_mut(2);
            self.conv2
                .backward(&tape.pool1_out, &tape.conv2_out, &g_conv2, gw, gb, true)
        };
        let g_conv1 = self.pool1.backward(
            (tape.conv1_out.c, tape.conv1_out.h, tape.conv1_out.w),
            &tape.pool1_arg,
            &g_pool1,
        );
        let (gw, gb) = grads.wb_mut(0);
        let _ = self
            .conv1
            .backward(&tape.spliced, &tape.conv1_out, &g_conv1, gw, gb, false);
    }
}

impl CtdnnModel<f32> {
    pub fn to_f64(&self) -> CtdnnModel<f64> {
        let mut out = build_ctdnn::<f64>(&self.config, 0).expect("config already validated");
        for i in 0..self.num_blocks() {
            let src = self.block(i);
            let dst = out.block_mut(i);
            for (d, &s) in dst.iter_mut().zip(src.iter()) {
                *d = f64::from(s);
            }
        }
        out
    }
}

fn nn_to_cfg(e: crate::nn::NnError) -> CtdnnError {
    CtdnnError::Config(e.to_string())
}

/// Cached activations of one forward pass.
pub struct Tape<R> {
    pub spliced: Ten3<R>,
    pub conv1_out: Ten3<R>,
    pub pool1_arg: Vec<u32>,
    pub pool1_out: Ten3<R>,
    pub conv2_out: Ten3<R>,
    pub pool2_arg: Vec<u32>,
    pub pool2_out: Ten3<R>,
    pub flat: Mat<R>,
    pub bn_out: Mat<R>,
    pub td1_gather: Mat<R>,
    pub td1_out: Mat<R>,
    pub pn1_out: Mat<R>,
    pub td2_gather: Mat<R>,
    pub td2_out: Mat<R>,
    pub pn2_out: Mat<R>,
    pub feature_out: Mat<R>,
    pub logits: Mat<R>,
}

/// Parameter gradients, one vector per block in [`PARAM_BLOCKS`] order.
pub struct CtdnnGrads<R> {
    pub blocks: Vec<Vec<R>>,
}

impl<R: Real> CtdnnGrads<R> {
    pub fn zeros_like(model: &CtdnnModel<R>) -> Self {
        CtdnnGrads {
            blocks: (0..model.num_blocks())
                .map(|i| vec![R::zero(); model.block(i).len()])
                .collect(),
        }
    }

    pub fn clear(&mut self) {
        for b in self.blocks.iter_mut() {
            for v in b.iter_mut() {
                *v = R::zero();
            }
        }
    }

    pub fn scale(&mut self, s: R) {
        for b in self.blocks.iter_mut() {
            for v in b.iter_mut() {
                *v *= s;
            }
        }
    }

    pub fn add(&mut self, other: &CtdnnGrads<R>) {
        for (dst, src) in self.blocks.iter_mut().zip(other.blocks.iter()) {
            for (d, &s) in dst.iter_mut().zip(src.iter()) {
                *d += s;
            }
        }
    }

    /// Mutable weight/bias gradient pair for the layer whose weight block is
    /// `w_idx` (the bias block is always the next index).
    pub fn wb_mut(&mut self, w_idx: usize) -> (&mut [R], &mut [R]) {
        let (lo, hi) = self.blocks.split_at_mut(w_idx + 1);
        (&mut lo[w_idx], &mut hi[0])
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Model file: magic `CTDN`, u32 version, length-prefixed UTF-8 JSON config,
/// then one length-prefixed float32 LE blob per parameter block in
/// [`PARAM_BLOCKS`] order (the length prefix counts elements).
pub fn save_model(path: &Path, model: &CtdnnModel<f32>) -> Result<(), CtdnnError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model_to(&mut w, model)
}

pub fn write_model_to(w: &mut impl Write, model: &CtdnnModel<f32>) -> Result<(), CtdnnError> {
    bio::write_magic(w, MODEL_MAGIC)?;
    bio::write_u32(w, model.version)?;
    let config_json =
        serde_json::to_string(&model.config).map_err(|e| CtdnnError::Config(e.to_string()))?;
    bio::write_str(w, &config_json)?;
    for i in 0..model.num_blocks() {
        let block = model.block(i);
        bio::write_u32(w, block.len() as u32)?;
        bio::write_f32_slice(w, block)?;
    }
    Ok(())
}

pub fn load_model(path: &Path) -> Result<CtdnnModel<f32>, CtdnnError> {
    let mut r = BufReader::new(File::open(path)?);
    read_model_from(&mut r)
}

pub fn read_model_from(r: &mut impl Read) -> Result<CtdnnModel<f32>, CtdnnError> {
    bio::expect_magic(r, MODEL_MAGIC)?;
    bio::expect_version(r, MODEL_VERSION)?;
    let config_json = bio::read_str(r, 1 << 20)?;
    let config: CtdnnConfig =
        serde_json::from_str(&config_json).map_err(|e| CtdnnError::Config(e.to_string()))?;
    let mut model = build_ctdnn::<f32>(&config, 0)?;
    for i in 0..model.num_blocks() {
        let expected = model.block(i).len();
        let stored = bio::read_u32(r)? as usize;
        if stored != expected {
            return Err(CtdnnError::Config(format!(
                "parameter block {} has {} values, expected {}",
                PARAM_BLOCKS[i], stored, expected
            )));
        }
        let values = bio::read_f32_vec(r, stored)?;
        model.block_mut(i).copy_from_slice(&values);
    }
    Ok(model)
}

// ---------------------------------------------------------------------------
// Gradient check of the composed network
// ---------------------------------------------------------------------------

/// Mean softmax cross-entropy over all output frames against fixed labels.
fn model_loss(model: &CtdnnModel<f64>, fbank: &Mat<f64>, labels: &[usize]) -> f64 {
    let logits = model.forward_logits(fbank).expect("forward in grad check");
    assert_eq!(logits.rows, labels.len());
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        let (loss, _) = softmax_xent(logits.row(r), label).expect("label in range");
        total += loss;
    }
    total / labels.len() as f64
}

/// Finite-difference check of every parameter block of the composed model.
/// At most `max_checks_per_block` entries per block are probed (0 = all).
pub fn grad_check_model(
    model: &mut CtdnnModel<f64>,
    fbank: &Mat<f64>,
    labels: &[usize],
    eps: f64,
    max_checks_per_block: usize,
) -> Result<GradCheckReport, CtdnnError> {
    // Analytic gradients.
    let tape = model.forward_tape(fbank)?;
    assert_eq!(tape.logits.rows, labels.len(), "one label per output frame");
    let mut grad_logits = Mat::zeros(tape.logits.rows, tape.logits.cols);
    let scale = 1.0 / labels.len() as f64;
    for (r, &label) in labels.iter().enumerate() {
        let (_, g) = softmax_xent(tape.logits.row(r), label).expect("label in range");
        for (dst, gv) in grad_logits.row_mut(r).iter_mut().zip(g.iter()) {
            *dst = gv * scale;
        }
    }
    let mut grads = CtdnnGrads::zeros_like(model);
    model.backward_tape(&tape, &grad_logits, &mut grads);
    drop(tape);

    let mut blocks = Vec::new();
    for b in 0..model.num_blocks() {
        let n = model.block(b).len();
        let stride = if max_checks_per_block == 0 || n <= max_checks_per_block {
            1
        } else {
            n.div_ceil(max_checks_per_block)
        };
        let mut max_rel = 0.0f64;
        let mut checked = 0;
        let mut i = 0;
        while i < n {
            let orig = model.block(b)[i];
            model.block_mut(b)[i] = orig + eps;
            let lp = model_loss(model, fbank, labels);
            model.block_mut(b)[i] = orig - eps;
            let lm = model_loss(model, fbank, labels);
            model.block_mut(b)[i] = orig;
            let numeric = (lp - lm) / (2.0 * eps);
            let rel = relative_error(grads.blocks[b][i], numeric);
            if rel > max_rel {
                max_rel = rel;
            }
            checked += 1;
            i += stride;
        }
        blocks.push(BlockReport {
            name: PARAM_BLOCKS[b].to_string(),
            max_rel_error: max_rel,
            checked,
        });
    }
    Ok(crate::nn::gradcheck::report_from_blocks("ctdnn", blocks))
}

// ---------------------------------------------------------------------------
// Receptive-field probe
// ---------------------------------------------------------------------------

/// Empirical receptive-field measurement.
///
/// The probe builds a model whose weights, biases and inputs are all
/// strictly positive; any increase of any input then strictly increases
/// every connected unit (ReLU stays active, the p-norm is monotone on
/// positive groups), so influence is directly observable. Perturbing one
/// input frame and recording which output rows move measures the true
/// receptive field with no reference to the arithmetic in
/// [`receptive_field`].
pub mod probe {
    use super::*;

    /// Model with strictly positive parameters for influence probing.
    pub fn positive_model(cfg: &CtdnnConfig, seed: u64) -> Result<CtdnnModel<f64>, CtdnnError> {
        let mut model = build_ctdnn::<f64>(cfg, seed)?;
        let mut rng = Rng::new(seed ^ 0xabcdef);
        for b in 0..model.num_blocks() {
            for v in model.block_mut(b).iter_mut() {
                *v = rng.uniform_in(0.05, 0.3);
            }
        }
        Ok(model)
    }

    /// Perturb every input frame in turn and verify that exactly the output
    /// rows predicted by the receptive-field arithmetic change.
    pub fn check_config(cfg: &CtdnnConfig, seed: u64) -> Result<(), String> {
        let rf = receptive_field(cfg);
        let model = positive_model(cfg, seed).map_err(|e| e.to_string())?;
        let mut rng = Rng::new(seed ^ 0x5555);
        let t = rf.total + 4 + rng.below(4);
        let fbank = Mat::from_vec(
            t,
            cfg.input_bins,
            (0..t * cfg.input_bins)
                .map(|_| rng.uniform_in(0.1, 1.0))
                .collect(),
        );
        let base = model.forward_features(&fbank).map_err(|e| e.to_string())?;
        let t_out = base.rows;
        if t_out != t - rf.total + 1 {
            return Err(format!(
                "output count {t_out} != T - total + 1 = {} (rf {rf:?})",
                t - rf.total + 1
            ));
        }
        for k in 0..t {
            let mut perturbed = fbank.clone();
            for v in perturbed.row_mut(k).iter_mut() {
                *v += 1.0;
            }
            let out = model.forward_features(&perturbed).map_err(|e| e.to_string())?;
            let changed: Vec<usize> = (0..t_out)
                .filter(|&r| {
                    base.row(r)
                        .iter()
                        .zip(out.row(r).iter())
                        .any(|(a, b)| (a - b).abs() > 1e-9)
                })
                .collect();
            // Output row r covers input frames [r, r + total - 1].
            let lo = (k + 1).saturating_sub(rf.total);
            let hi = k.min(t_out - 1);
            let expected: Vec<usize> = if lo <= hi { (lo..=hi).collect() } else { vec![] };
            if changed != expected {
                return Err(format!(
                    "frame {k} of {t}: changed rows {changed:?}, expected {expected:?} (rf {rf:?})"
                ));
            }
        }
        Ok(())
    }

    /// Random small admissible configuration for probing.
    pub fn random_config(rng: &mut Rng) -> CtdnnConfig {
        loop {
            let mut offs1: Vec<i32> = (0..1 + rng.below(3))
                .map(|_| rng.below(9) as i32 - 4)
                .collect();
            offs1.sort_unstable();
            offs1.dedup();
            let mut offs2: Vec<i32> = (0..1 + rng.below(3))
                .map(|_| rng.below(7) as i32 - 3)
                .collect();
            offs2.sort_unstable();
            offs2.dedup();
            let bins = 8 + rng.below(8);
            let mut cfg = CtdnnConfig {
                input_bins: bins,
                splice_left: rng.below(4),
                splice_right: rng.below(4),
                conv1: ConvSpec {
                    maps: 2 + rng.below(2),
                    kernel_time: 1 + rng.below(3),
                    kernel_freq: 1 + rng.below(3),
                    pool_freq: 1,
                },
                conv2: ConvSpec {
                    maps: 2 + rng.below(2),
                    kernel_time: 1 + rng.below(2),
                    kernel_freq: 1 + rng.below(2),
                    pool_freq: 1,
                },
                bottleneck_dim: 0, // patched from the frequency chain below
                td1: TdSpec {
                    offsets: offs1,
                    affine_out: 8,
                    pnorm_group: 2,
                },
                td2: TdSpec {
                    offsets: offs2,
                    affine_out: 6,
                    pnorm_group: 2,
                },
                feature_dim: 4,
                num_speakers: 3,
            };
            if let Ok((_, f2)) = cfg.freq_chain() {
                cfg.bottleneck_dim = cfg.conv2.maps * f2;
                if cfg.validate().is_ok() {
                    return cfg;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(num_speakers: usize) -> CtdnnConfig {
        CtdnnConfig::small(num_speakers)
    }

    fn random_fbank<R: Real>(rng: &mut Rng, t: usize, bins: usize) -> Mat<R> {
        Mat::from_vec(
            t,
            bins,
            (0..t * bins)
                .map(|_| R::from_f64(rng.uniform_in(-1.0, 1.0)))
                .collect(),
        )
    }

    #[test]
    fn canonical_receptive_field_is_20() {
        let cfg = CtdnnConfig::canonical(100);
        let rf = receptive_field(&cfg);
        assert_eq!((rf.left, rf.right, rf.total), (10, 9, 20));
    }

    #[test]
    fn pointwise_network_has_unit_receptive_field() {
        let mut cfg = CtdnnConfig::canonical(100);
        cfg.splice_left = 0;
        cfg.splice_right = 0;
        cfg.conv1.kernel_time = 1;
        cfg.conv2.kernel_time = 1;
        cfg.td1.offsets = vec![0];
        cfg.td2.offsets = vec![0];
        let rf = receptive_field(&cfg);
        assert_eq!((rf.left, rf.right, rf.total), (0, 0, 1));
    }

    #[test]
    fn canonical_config_validates() {
        CtdnnConfig::canonical(5000).validate().unwrap();
    }

    #[test]
    fn bottleneck_width_mismatch_names_the_layer() {
        let mut cfg = CtdnnConfig::canonical(100);
        cfg.bottleneck_dim = 511;
        match cfg.validate() {
            Err(CtdnnError::Config(msg)) => {
                assert!(msg.contains("bottleneck"), "message: {msg}");
                assert!(msg.contains("511"), "message: {msg}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn parameter_count_matches_closed_form() {
        let cfg = CtdnnConfig::canonical(5000);
        let model = build_ctdnn::<f32>(&cfg, 1).unwrap();
        // Independent recount from the configured shapes.
        let conv1 = 32 * 9 * 2 * 5 + 32;
        let conv2 = 64 * 32 * 2 * 3 + 64;
        let bottleneck = 512 * 512 + 512;
        let td1 = 1024 * (512 * 3) + 1024;
        let td2 = 1024 * (512 * 3) + 1024;
        let feature = 400 * 512 + 400;
        let output = 5000 * 400 + 5000;
        let expected = conv1 + conv2 + bottleneck + td1 + td2 + feature + output;
        assert_eq!(model.num_params(), expected);
    }

    #[test]
    fn same_seed_builds_identical_models() {
        let cfg = tiny_config(4);
        let a = build_ctdnn::<f32>(&cfg, 99).unwrap();
        let b = build_ctdnn::<f32>(&cfg, 99).unwrap();
        assert_eq!(a, b);
        let c = build_ctdnn::<f32>(&cfg, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn forward_output_counts_match_t_minus_rf_plus_one() {
        let cfg = tiny_config(4);
        let model = build_ctdnn::<f32>(&cfg, 7).unwrap();
        let rf = receptive_field(&cfg);
        assert_eq!(rf.total, 20);
        let mut rng = Rng::new(1);
        for &t in &[20usize, 21, 50, 100] {
            let fbank = random_fbank::<f32>(&mut rng, t, cfg.input_bins);
            let features = model.forward_features(&fbank).unwrap();
            assert_eq!(features.rows, t - 19, "t = {t}");
            assert_eq!(features.cols, cfg.feature_dim);
        }
    }

    #[test]
    fn too_short_input_is_an_error() {
        let cfg = tiny_config(4);
        let model = build_ctdnn::<f32>(&cfg, 7).unwrap();
        let mut rng = Rng::new(2);
        let fbank = random_fbank::<f32>(&mut rng, 19, cfg.input_bins);
        match model.forward_features(&fbank) {
            Err(CtdnnError::TooShort { needed: 20, got: 19 }) => {}
            other => panic!("expected too-short error, got {other:?}"),
        }
    }

    #[test]
    fn feature_dim_is_independent_of_speaker_count() {
        let mut rng = Rng::new(3);
        let fbank = random_fbank::<f32>(&mut rng, 25, 12);
        for k in [2usize, 10, 100] {
            let model = build_ctdnn::<f32>(&tiny_config(k), 7).unwrap();
            let features = model.forward_features(&fbank).unwrap();
            assert_eq!(features.cols, 5);
            let logits = model.forward_logits(&fbank).unwrap();
            assert_eq!(logits.cols, k);
            assert_eq!(logits.rows, 25 - 19);
        }
    }

    #[test]
    fn fresh_model_posterior_entropy_is_near_uniform() {
        let cfg = CtdnnConfig::canonical(32);
        let model = build_ctdnn::<f32>(&cfg, 11).unwrap();
        let mut rng = Rng::new(4);
        let fbank = random_fbank::<f32>(&mut rng, 40, cfg.input_bins);
        let logits = model.forward_logits(&fbank).unwrap();
        let ln_k = (32f64).ln();
        for r in 0..logits.rows {
            let probs = crate::nn::softmax(&logits.row(r).iter().map(|&v| f64::from(v)).collect::<Vec<_>>());
            let entropy: f64 = probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
            assert!(
                entropy > ln_k * 0.95,
                "row {r}: entropy {entropy} vs ln K {ln_k}"
            );
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let cfg = tiny_config(4);
        let model = build_ctdnn::<f32>(&cfg, 5).unwrap();
        let mut rng = Rng::new(6);
        let fbank = random_fbank::<f32>(&mut rng, 30, cfg.input_bins);
        let a = model.forward_features(&fbank).unwrap();
        let b = model.forward_features(&fbank).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn model_file_round_trip_is_byte_identical() {
        let dir = std::env::temp_dir().join("voxvec-ctdnn-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = tiny_config(6);
        let model = build_ctdnn::<f32>(&cfg, 21).unwrap();
        let p1 = dir.join("model1.ctdnn");
        let p2 = dir.join("model2.ctdnn");
        save_model(&p1, &model).unwrap();
        let loaded = load_model(&p1).unwrap();
        assert_eq!(loaded, model);
        save_model(&p2, &loaded).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn loaded_model_forward_is_bitwise_stable() {
        let dir = std::env::temp_dir().join("voxvec-ctdnn-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = tiny_config(6);
        let model = build_ctdnn::<f32>(&cfg, 22).unwrap();
        let mut rng = Rng::new(9);
        let fbank = random_fbank::<f32>(&mut rng, 32, cfg.input_bins);
        let before = model.forward_features(&fbank).unwrap();
        let p = dir.join("model3.ctdnn");
        save_model(&p, &model).unwrap();
        let loaded = load_model(&p).unwrap();
        let after = loaded.forward_features(&fbank).unwrap();
        assert_eq!(before.data, after.data);
    }

    #[test]
    fn truncated_model_file_is_a_typed_error() {
        let dir = std::env::temp_dir().join("voxvec-ctdnn-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = tiny_config(6);
        let model = build_ctdnn::<f32>(&cfg, 23).unwrap();
        let p = dir.join("model4.ctdnn");
        save_model(&p, &model).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() / 2]).unwrap();
        match load_model(&p) {
            Err(CtdnnError::Format(BytesError::Truncated)) => {}
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_version_is_a_typed_error() {
        let dir = std::env::temp_dir().join("voxvec-ctdnn-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = tiny_config(6);
        let model = build_ctdnn::<f32>(&cfg, 24).unwrap();
        let p = dir.join("model5.ctdnn");
        save_model(&p, &model).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[4] = 99; // version field
        std::fs::write(&p, bytes).unwrap();
        match load_model(&p) {
            Err(CtdnnError::Format(BytesError::Version { .. })) => {}
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn composed_gradients_pass_finite_difference_check() {
        let cfg = tiny_config(5);
        let mut model = build_ctdnn::<f64>(&cfg, 31).unwrap();
        let mut rng = Rng::new(12);
        let fbank = random_fbank::<f64>(&mut rng, 22, cfg.input_bins);
        let labels = vec![2usize, 4, 0];
        let report = grad_check_model(&mut model, &fbank, &labels, 1e-3, 0).unwrap();
        assert!(
            report.max_rel_error < 1e-4,
            "max rel error {} in {:?}",
            report.max_rel_error,
            report
                .blocks
                .iter()
                .max_by(|a, b| a.max_rel_error.partial_cmp(&b.max_rel_error).unwrap())
                .map(|b| &b.name)
        );
    }

    #[test]
    fn corrupted_backward_is_caught_by_the_checker() {
        // Flip the sign of the analytic gradient of one block and verify the
        // check reports a gross error: demonstrates the oracle's sensitivity.
        let cfg = tiny_config(4);
        let mut model = build_ctdnn::<f64>(&cfg, 32).unwrap();
        let mut rng = Rng::new(13);
        let fbank = random_fbank::<f64>(&mut rng, 20, cfg.input_bins);
        let labels = vec![1usize];

        let tape = model.forward_tape(&fbank).unwrap();
        let mut grad_logits = Mat::zeros(tape.logits.rows, tape.logits.cols);
        let (_, g) = softmax_xent(tape.logits.row(0), labels[0]).unwrap();
        grad_logits.row_mut(0).copy_from_slice(&g);
        let mut grads = CtdnnGrads::zeros_like(&model);
        model.backward_tape(&tape, &grad_logits, &mut grads);
        drop(tape);

        // Corrupt: sign-flip the feature-layer weight gradient.
        for v in grads.blocks[10].iter_mut() {
            *v = -*v;
        }
        let eps = 1e-3;
        let mut worst = 0.0f64;
        for i in (0..grads.blocks[10].len()).step_by(37) {
            let orig = model.block(10)[i];
            model.block_mut(10)[i] = orig + eps;
            let lp = model_loss(&model, &fbank, &labels);
            model.block_mut(10)[i] = orig - eps;
            let lm = model_loss(&model, &fbank, &labels);
            model.block_mut(10)[i] = orig;
            let numeric = (lp - lm) / (2.0 * eps);
            worst = worst.max(relative_error(grads.blocks[10][i], numeric));
        }
        assert!(worst > 1e-1, "corruption went undetected: {worst}");
    }

    #[test]
    fn small_config_probe_agrees_with_arithmetic() {
        // The small config shares the canonical 20-frame receptive field.
        probe::check_config(&tiny_config(3), 800).unwrap();
    }

    #[test]
    fn random_configs_probe_agrees_with_arithmetic() {
        let mut rng = Rng::new(2718);
        for round in 0..8 {
            let cfg = probe::random_config(&mut rng);
            probe::check_config(&cfg, 900 + round).unwrap();
        }
    }
}
