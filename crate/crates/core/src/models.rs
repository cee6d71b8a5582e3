//! The ResNet-STFT classifier and the 1-D PSD baseline.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use rfdrone_nn::init::KAIMING_UNIFORM_FAN_IN;
use rfdrone_nn::{
    conv_out_len, softmax, BatchNorm, Conv2d, GlobalAvgPool, Layer, Linear, Mode, Module, NnError, Relu,
    ResidualBlock, Sequential, Slot, Tensor,
};

use crate::error::{Error, Result};
use crate::features::{MAP_COLS, MAP_ROWS};

pub const SUPPORTED_CLASS_COUNTS: [usize; 5] = [2, 3, 4, 7, 10];
pub const PAPER_STAGE_CHANNELS: [usize; 3] = [128, 256, 512];
pub const PAPER_BLOCKS: [usize; 3] = [12, 11, 10];
pub const PSD_CHANNELS: [usize; 3] = [32, 64, 64];
pub const PSD_KERNEL: usize = 5;
pub const MIN_PSD_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Paper,
    Tiny,
    Custom,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(Profile::Paper),
            "tiny" => Ok(Profile::Tiny),
            "custom" => Ok(Profile::Custom),
            _ => Err(Error::InvalidSpec(format!("unknown profile {s:?}"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Paper => "paper",
            Profile::Tiny => "tiny",
            Profile::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    ResnetStft,
    Psd1d,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "resnet-stft" | "resnet" => Ok(ModelKind::ResnetStft),
            "psd-1d" | "psd" => Ok(ModelKind::Psd1d),
            _ => Err(Error::InvalidSpec(format!("unknown model {s:?}"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::ResnetStft => "resnet-stft",
            ModelKind::Psd1d => "psd-1d",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResnetSpec {
    pub profile: Profile,
    pub stem_channels: usize,
    pub stage_channels: [usize; 3],
    pub blocks_per_stage: [usize; 3],
    pub num_classes: usize,
}

impl ResnetSpec {
    pub fn paper(num_classes: usize) -> Self {
        Self {
            profile: Profile::Paper,
            stem_channels: 64,
            stage_channels: PAPER_STAGE_CHANNELS,
            blocks_per_stage: PAPER_BLOCKS,
            num_classes,
        }
    }

    pub fn tiny(num_classes: usize) -> Self {
        Self {
            profile: Profile::Tiny,
            stem_channels: 16,
            stage_channels: [16, 32, 64],
            blocks_per_stage: [2, 2, 2],
            num_classes,
        }
    }

    pub fn for_profile(profile: Profile, num_classes: usize) -> Result<Self> {
        match profile {
            Profile::Paper => Ok(Self::paper(num_classes)),
            Profile::Tiny => Ok(Self::tiny(num_classes)),
            Profile::Custom => Err(Error::InvalidSpec("the custom profile has no preset".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_classes(self.num_classes)?;
        if self.stem_channels == 0 || self.stage_channels.contains(&0) {
            return Err(Error::InvalidSpec("channel counts must be positive".into()));
        }
        if self.blocks_per_stage.contains(&0) {
            return Err(Error::InvalidSpec("every stage needs at least one block".into()));
        }
        if self.profile == Profile::Paper && self.stage_channels != PAPER_STAGE_CHANNELS {
            return Err(Error::InvalidSpec("profile `paper` fixes stage channels to 128/256/512".into()));
        }
        Ok(())
    }

    /// Weighted layers under the counting convention: every convolution (stem, block
    /// bodies, projections, 1x1 head) plus the softmax output layer.
    pub fn counted_layers(&self) -> usize {
        let blocks: usize = self.blocks_per_stage.iter().sum();
        1 + 2 * blocks + 3 + 1 + 1
    }

    /// (channels, height, width) after the stem and after each stage.
    pub fn stage_dims(&self, h: usize, w: usize) -> Option<Vec<(usize, usize, usize)>> {
        let mut dims = vec![(self.stem_channels, h, w)];
        let (mut h, mut w) = (h, w);
        for &c in &self.stage_channels {
            h = conv_out_len(h, 3, 2, 1)?;
            w = conv_out_len(w, 3, 2, 1)?;
            dims.push((c, h, w));
        }
        Some(dims)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsdNetSpec {
    pub num_classes: usize,
    pub psd_len: usize,
    pub channels: [usize; 3],
    pub kernel: usize,
}

impl PsdNetSpec {
    pub fn new(num_classes: usize, psd_len: usize) -> Self {
        Self {
            num_classes,
            psd_len,
            channels: PSD_CHANNELS,
            kernel: PSD_KERNEL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::InvalidSpec(format!("{} classes", self.num_classes)));
        }
        if self.psd_len < MIN_PSD_LEN {
            return Err(Error::InvalidSpec(format!(
                "PSD length {} below the minimum {MIN_PSD_LEN}",
                self.psd_len
            )));
        }
        if self.channels.contains(&0) || self.kernel.is_multiple_of(2) {
            return Err(Error::InvalidSpec("channels must be positive and the kernel odd".into()));
        }
        Ok(())
    }
}

fn check_classes(n: usize) -> Result<()> {
    if SUPPORTED_CLASS_COUNTS.contains(&n) {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!(
            "{n} classes; supported counts are {SUPPORTED_CLASS_COUNTS:?}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    ResnetStft(ResnetSpec),
    Psd1d(PsdNetSpec),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::ResnetStft(_) => ModelKind::ResnetStft,
            ModelSpec::Psd1d(_) => ModelKind::Psd1d,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            ModelSpec::ResnetStft(s) => s.num_classes,
            ModelSpec::Psd1d(s) => s.num_classes,
        }
    }

    /// Per-sample input shape (channels first).
    pub fn input_shape(&self) -> Vec<usize> {
        match self {
            ModelSpec::ResnetStft(_) => vec![1, MAP_ROWS, MAP_COLS],
            ModelSpec::Psd1d(s) => vec![1, 1, s.psd_len],
        }
    }
}

/// How parameters were initialized; stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitInfo {
    pub scheme: String,
    pub seed: u64,
    pub zero_head: bool,
}

/// A built network together with its spec.
#[derive(Debug, Clone)]
pub struct Classifier {
    spec: ModelSpec,
    init: InitInfo,
    net: Sequential,
}

fn conv_bn_relu(net: &mut Sequential, prefix: &str, conv: Conv2d, c_out: usize) {
    net.push(format!("{prefix}.conv"), Layer::Conv(conv));
    net.push(format!("{prefix}.bn"), Layer::BatchNorm(BatchNorm::new(c_out)));
    net.push(format!("{prefix}.relu"), Layer::Relu(Relu::new()));
}

fn basic_block(c_in: usize, c_out: usize, stride: usize, rng: &mut ChaCha8Rng) -> ResidualBlock {
    let body = Sequential::new()
        .with("conv1", Layer::Conv(Conv2d::new(c_in, c_out, (3, 3), (stride, stride), (1, 1), false, rng)))
        .with("bn1", Layer::BatchNorm(BatchNorm::new(c_out)))
        .with("relu1", Layer::Relu(Relu::new()))
        .with("conv2", Layer::Conv(Conv2d::new(c_out, c_out, (3, 3), (1, 1), (1, 1), false, rng)))
        .with("bn2", Layer::BatchNorm(BatchNorm::new(c_out)));
    let shortcut = (stride != 1 || c_in != c_out).then(|| {
        Sequential::new()
            .with("conv", Layer::Conv(Conv2d::new(c_in, c_out, (1, 1), (stride, stride), (0, 0), false, rng)))
            .with("bn", Layer::BatchNorm(BatchNorm::new(c_out)))
    });
    ResidualBlock::new(body, shortcut)
}

fn zero_head(c_in: usize, classes: usize) -> Conv2d {
    Conv2d::from_weight(
        Tensor::zeros(&[classes, c_in, 1, 1]),
        Some(Tensor::zeros(&[classes])),
        (1, 1),
        (0, 0),
    )
}

/// Stem conv 3x3 stride 1, three stages each opened by a stride-2 projection block,
/// then a zero-initialized 1x1 conv head and global average pooling.
pub fn build_resnet_stft(spec: &ResnetSpec, seed: u64) -> Result<Classifier> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Sequential::new();
    let stem = Conv2d::new(1, spec.stem_channels, (3, 3), (1, 1), (1, 1), false, &mut rng);
    conv_bn_relu(&mut net, "stem", stem, spec.stem_channels);
    let mut c_in = spec.stem_channels;
    for (s, (&c, &blocks)) in spec.stage_channels.iter().zip(&spec.blocks_per_stage).enumerate() {
        for b in 0..blocks {
            let stride = if b == 0 { 2 } else { 1 };
            let block = basic_block(c_in, c, stride, &mut rng);
            net.push(format!("stage{}.block{}", s + 1, b + 1), Layer::Residual(Box::new(block)));
            c_in = c;
        }
    }
    net.push("head.conv", Layer::Conv(zero_head(c_in, spec.num_classes)));
    net.push("head.pool", Layer::GlobalAvgPool(GlobalAvgPool::new()));
    Ok(Classifier {
        spec: ModelSpec::ResnetStft(spec.clone()),
        init: init_info(seed),
        net,
    })
}

/// Three [conv 1x5 stride 2, BN, ReLU] blocks over the PSD vector, global average
/// pooling, and a zero-initialized dense layer.
pub fn build_1d_psd_baseline(spec: &PsdNetSpec, seed: u64) -> Result<Classifier> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Sequential::new();
    let mut c_in = 1;
    for (i, &c) in spec.channels.iter().enumerate() {
        let pad = spec.kernel / 2;
        let conv = Conv2d::new(c_in, c, (1, spec.kernel), (1, 2), (0, pad), false, &mut rng);
        conv_bn_relu(&mut net, &format!("block{}", i + 1), conv, c);
        c_in = c;
    }
    net.push("pool", Layer::GlobalAvgPool(GlobalAvgPool::new()));
    net.push("fc", Layer::Linear(Linear::zeros(c_in, spec.num_classes)));
    Ok(Classifier {
        spec: ModelSpec::Psd1d(spec.clone()),
        init: init_info(seed),
        net,
    })
}

fn init_info(seed: u64) -> InitInfo {
    InitInfo {
        scheme: KAIMING_UNIFORM_FAN_IN.to_string(),
        seed,
        zero_head: true,
    }
}

/// Argmax with ties going to the lowest index.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

impl Classifier {
    pub fn build(spec: &ModelSpec, seed: u64) -> Result<Self> {
        match spec {
            ModelSpec::ResnetStft(s) => build_resnet_stft(s, seed),
            ModelSpec::Psd1d(s) => build_1d_psd_baseline(s, seed),
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn init_info(&self) -> &InitInfo {
        &self.init
    }

    pub fn network(&self) -> &Sequential {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Sequential {
        &mut self.net
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes()
    }

    pub fn conv_count(&self) -> usize {
        self.net.conv_count()
    }

    /// Stacks flat per-sample features into a batch tensor.
    pub fn batch(&self, features: &[&[f64]]) -> Result<Tensor> {
        let shape = self.spec.input_shape();
        let per: usize = shape.iter().product();
        let mut data = Vec::with_capacity(per * features.len());
        for f in features {
            if f.len() != per {
                return Err(NnError::ShapeMismatch(format!(
                    "model expects {per} input values ({shape:?}), got {}",
                    f.len()
                ))
                .into());
            }
            data.extend_from_slice(f);
        }
        let mut full = vec![features.len()];
        full.extend(shape);
        Ok(Tensor::new(&full, data)?)
    }

    /// Softmax probabilities for a batch, in eval mode.
    pub fn predict_proba(&mut self, features: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let x = self.batch(features)?;
        let probs = softmax(&self.net.forward(&x, Mode::Eval)?)?;
        Ok(probs.data().chunks(self.num_classes()).map(<[f64]>::to_vec).collect())
    }

    /// Class index (lowest index on ties) and probability vector for one feature.
    pub fn predict(&mut self, feature: &[f64]) -> Result<(usize, Vec<f64>)> {
        let probs = self.predict_proba(&[feature])?.remove(0);
        Ok((argmax(&probs), probs))
    }
}

impl Module for Classifier {
    fn forward(&mut self, input: &Tensor, mode: Mode) -> rfdrone_nn::Result<Tensor> {
        self.net.forward(input, mode)
    }

    fn backward(&mut self, grad_output: &Tensor) -> rfdrone_nn::Result<Tensor> {
        self.net.backward(grad_output)
    }

    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        self.net.visit(prefix, f)
    }
}
