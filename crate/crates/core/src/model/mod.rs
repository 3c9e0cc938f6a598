//! The VS-Net encoder / VAE bottleneck / decoder network.
//!
//! Per encoder stage: separable conv → relu → (skip) → 2×2 max-pool.
//! Bottleneck: 1×1 conv → relu → dropout, then 1×1 heads for μ and log σ².
//! Per decoder stage, deepest first: upsample → separable conv → relu →
//! concat with the same-resolution skip → separable conv → relu.
//! Head: 1×1 conv → sigmoid.
//!
//! Temporal context comes from approximate rank pooling over a window of
//! frames, either on the per-frame latents ([`ArpPlacement::Bottleneck`]) or
//! on the raw frames ([`ArpPlacement::InputFrames`]).

mod checkpoint;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    concat_channels, conv2d_pointwise, dropout, maxpool2, pointwise_param_count, separable_conv,
    upsample2, ConvParams, ParamSet,
};
use crate::temporal::{arp_pool, ArpCoefficients, ArpVariant};
use crate::tensor::Tensor;

pub use checkpoint::{load_params, read_params, save_params, write_params, FORMAT_VERSION, MAGIC};

/// Where the rank-pooled dynamic map enters the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArpPlacement {
    /// Pool the per-frame μ latents; concatenate with the center latent and
    /// reduce with a 1×1 convolution.
    #[default]
    Bottleneck,
    /// Pool the raw frames into a dynamic image and feed it to the encoder as
    /// extra input channels next to the center frame.
    InputFrames,
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VsNetConfig {
    /// Square frame side; must be divisible by `2^stages`.
    pub input_size: usize,
    pub in_channels: usize,
    /// Encoder output channels per stage; the number of stages is its length.
    pub widths: Vec<usize>,
    /// Decoder stage width is `round(widths[k] * multiplier)`.
    pub decoder_width_multiplier: f64,
    /// Explicit decoder widths, overriding the multiplier.
    pub decoder_widths: Option<Vec<usize>>,
    pub dropout: f64,
    pub vae_enabled: bool,
    /// KL weight β of the training objective.
    pub kl_weight: f64,
    pub arp_window: usize,
    pub arp_placement: ArpPlacement,
    pub arp_variant: ArpVariant,
    pub dilation: usize,
    /// Seed for parameter initialization.
    pub seed: u64,
}

impl Default for VsNetConfig {
    fn default() -> Self {
        Self::desk_scale()
    }
}

impl VsNetConfig {
    /// 256×256 frames, widths [64, 128, 256, 512], decoder width 1.44×; 3,491,778
    /// parameters.
    pub fn full_scale() -> Self {
        VsNetConfig {
            input_size: 256,
            widths: vec![64, 128, 256, 512],
            decoder_width_multiplier: 1.44,
            ..Self::desk_scale()
        }
    }

    /// 64×64 frames, widths [8, 16, 32, 64]; 46,231 parameters.
    pub fn desk_scale() -> Self {
        VsNetConfig {
            input_size: 64,
            in_channels: 3,
            widths: vec![8, 16, 32, 64],
            decoder_width_multiplier: 1.0,
            decoder_widths: None,
            dropout: 0.5,
            vae_enabled: true,
            kl_weight: 0.0,
            arp_window: 5,
            arp_placement: ArpPlacement::Bottleneck,
            arp_variant: ArpVariant::Harmonic,
            dilation: 1,
            seed: 0,
        }
    }

    /// 64×64 frames, widths [12, 24, 48, 96]; 99,955 parameters.
    pub fn micro() -> Self {
        VsNetConfig {
            widths: vec![12, 24, 48, 96],
            ..Self::desk_scale()
        }
    }

    pub fn stages(&self) -> usize {
        self.widths.len()
    }

    /// Spatial side of the latent maps.
    pub fn latent_size(&self) -> usize {
        self.input_size >> self.stages()
    }

    pub fn latent_channels(&self) -> usize {
        self.widths.last().copied().unwrap_or(0)
    }

    pub fn resolved_decoder_widths(&self) -> Vec<usize> {
        match &self.decoder_widths {
            Some(d) => d.clone(),
            None => self
                .widths
                .iter()
                .map(|&w| ((w as f64 * self.decoder_width_multiplier).round() as usize).max(1))
                .collect(),
        }
    }

    /// Channels seen by the first encoder stage.
    pub fn encoder_input_channels(&self) -> usize {
        match self.arp_placement {
            ArpPlacement::Bottleneck => self.in_channels,
            ArpPlacement::InputFrames => 2 * self.in_channels,
        }
    }

    /// Index of the frame whose saliency a window predicts.
    pub fn center_index(&self) -> usize {
        self.arp_window / 2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let stages = self.stages();
        if stages == 0 || self.widths.contains(&0) {
            return bad(format!("stage widths must be non-empty and positive, got {:?}", self.widths));
        }
        if stages >= usize::BITS as usize || self.input_size == 0 || !self.input_size.is_multiple_of(1 << stages) {
            return bad(format!(
                "input size {} is not divisible by 2^{stages}",
                self.input_size
            ));
        }
        if self.in_channels == 0 {
            return bad("input channels must be positive".into());
        }
        if !(self.decoder_width_multiplier > 0.0) {
            return bad(format!(
                "decoder width multiplier must be positive, got {}",
                self.decoder_width_multiplier
            ));
        }
        if let Some(d) = &self.decoder_widths {
            if d.len() != stages || d.contains(&0) {
                return bad(format!("decoder widths {d:?} do not fit {stages} stages"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} not in [0, 1)", self.dropout));
        }
        if !(self.kl_weight >= 0.0) {
            return bad(format!("KL weight must be non-negative, got {}", self.kl_weight));
        }
        if self.arp_window == 0 {
            return bad("ARP window must be at least 1".into());
        }
        if self.dilation == 0 {
            return bad("dilation must be at least 1".into());
        }
        Ok(())
    }

    /// Closed-form parameter count of the network this config describes.
    pub fn param_count(&self) -> usize {
        let sep = ConvParams::param_count;
        let pw = pointwise_param_count;
        let latent = self.latent_channels();
        let decoder = self.resolved_decoder_widths();

        let mut total = 0;
        let mut c = self.encoder_input_channels();
        for &w in &self.widths {
            total += sep(c, w);
            c = w;
        }
        total += 2 * pw(latent, latent);
        if self.vae_enabled {
            total += pw(latent, latent);
        }
        if self.arp_placement == ArpPlacement::Bottleneck {
            total += pw(2 * latent, latent);
        }
        let mut below = latent;
        for (&w, &d) in self.widths.iter().zip(&decoder).rev() {
            total += sep(below, d) + sep(d + w, d);
            below = d;
        }
        total + pw(decoder[0], 1)
    }

    /// Recovers the architecture of a parameter set written by [`VsNet`];
    /// fields that do not affect parameter shapes are taken from `base`.
    pub fn infer_from_params(params: &ParamSet, base: &VsNetConfig) -> Result<VsNetConfig> {
        let extent = |name: &str, axis: usize| -> Result<usize> {
            params
                .get(name)
                .and_then(|p| p.shape.get(axis).copied())
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))
        };
        let stages = (0..)
            .take_while(|k| params.get(&format!("encoder.{k}.pointwise")).is_some())
            .count();
        if stages == 0 {
            return Err(Error::Checkpoint("no encoder stages found".into()));
        }
        let widths = (0..stages)
            .map(|k| extent(&format!("encoder.{k}.pointwise"), 0))
            .collect::<Result<Vec<_>>>()?;
        let decoder_widths = (0..stages)
            .map(|k| extent(&format!("decoder.{k}.up.pointwise"), 0))
            .collect::<Result<Vec<_>>>()?;
        let first = extent("encoder.0.depthwise", 0)?;
        let arp_placement = if params.get("fuse.weight").is_some() {
            ArpPlacement::Bottleneck
        } else {
            ArpPlacement::InputFrames
        };
        let in_channels = match arp_placement {
            ArpPlacement::Bottleneck => first,
            ArpPlacement::InputFrames => first / 2,
        };
        let config = VsNetConfig {
            in_channels,
            widths,
            decoder_widths: Some(decoder_widths),
            vae_enabled: params.get("logvar.weight").is_some(),
            arp_placement,
            ..base.clone()
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy)]
struct SepIdx {
    depthwise: usize,
    depthwise_bias: usize,
    pointwise: usize,
    bias: usize,
}

#[derive(Debug, Clone, Copy)]
struct PwIdx {
    weight: usize,
    bias: usize,
}

/// Positions of every layer's tensors inside the parameter set.
#[derive(Debug, Clone)]
struct Layout {
    encoder: Vec<SepIdx>,
    bottleneck: PwIdx,
    mu: PwIdx,
    logvar: Option<PwIdx>,
    fuse: Option<PwIdx>,
    /// `(up, merge)` per stage, indexed from the full-resolution stage.
    decoder: Vec<(SepIdx, SepIdx)>,
    head: PwIdx,
}

/// Shape and initialization of one parameter tensor: weights are drawn from
/// `N(0, gain/fan_in)`; biases (`init: None`) start at zero.
struct Spec {
    name: String,
    shape: Vec<usize>,
    init: Option<(usize, f64)>,
}

/// Gain of a layer followed by a ReLU.
const RELU_GAIN: f64 = 2.0;
/// Gain of a layer followed by no nonlinearity.
const LINEAR_GAIN: f64 = 1.0;

struct LayoutBuilder {
    specs: Vec<Spec>,
}

impl LayoutBuilder {
    fn push(&mut self, name: String, shape: Vec<usize>, init: Option<(usize, f64)>) -> usize {
        self.specs.push(Spec { name, shape, init });
        self.specs.len() - 1
    }

    fn sep(&mut self, prefix: &str, c: usize, k: usize) -> SepIdx {
        SepIdx {
            depthwise: self.push(format!("{prefix}.depthwise"), vec![c, 1, 3, 3], Some((9, LINEAR_GAIN))),
            depthwise_bias: self.push(format!("{prefix}.depthwise_bias"), vec![c], None),
            pointwise: self.push(format!("{prefix}.pointwise"), vec![k, c, 1, 1], Some((c, RELU_GAIN))),
            bias: self.push(format!("{prefix}.bias"), vec![k], None),
        }
    }

    fn pw(&mut self, prefix: &str, c: usize, k: usize, gain: f64) -> PwIdx {
        PwIdx {
            weight: self.push(format!("{prefix}.weight"), vec![k, c, 1, 1], Some((c, gain))),
            bias: self.push(format!("{prefix}.bias"), vec![k], None),
        }
    }
}

fn layout(config: &VsNetConfig) -> (Layout, Vec<Spec>) {
    let mut b = LayoutBuilder { specs: Vec::new() };
    let latent = config.latent_channels();

    let mut c = config.encoder_input_channels();
    let encoder = config
        .widths
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            let idx = b.sep(&format!("encoder.{k}"), c, w);
            c = w;
            idx
        })
        .collect();
    let bottleneck = b.pw("bottleneck", latent, latent, RELU_GAIN);
    let mu = b.pw("mu", latent, latent, LINEAR_GAIN);
    let logvar = config.vae_enabled.then(|| b.pw("logvar", latent, latent, LINEAR_GAIN));
    let fuse = (config.arp_placement == ArpPlacement::Bottleneck)
        .then(|| b.pw("fuse", 2 * latent, latent, LINEAR_GAIN));

    let decoder_widths = config.resolved_decoder_widths();
    let mut decoder = Vec::with_capacity(config.stages());
    let mut below = latent;
    for k in (0..config.stages()).rev() {
        let d = decoder_widths[k];
        let up = b.sep(&format!("decoder.{k}.up"), below, d);
        let merge = b.sep(&format!("decoder.{k}.merge"), d + config.widths[k], d);
        decoder.push((up, merge));
        below = d;
    }
    decoder.reverse();
    let head = b.pw("head", decoder_widths[0], 1, LINEAR_GAIN);

    let layout = Layout {
        encoder,
        bottleneck,
        mu,
        logvar,
        fuse,
        decoder,
        head,
    };
    (layout, b.specs)
}

/// Forward-pass mode. Training enables dropout and latent sampling, both
/// seeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Inference,
    Training { seed: u64 },
}

impl Mode {
    fn derive(self, tag: u64) -> Mode {
        match self {
            Mode::Inference => Mode::Inference,
            Mode::Training { seed } => Mode::Training {
                seed: mix_seed(seed, tag),
            },
        }
    }
}

/// Deterministically derives a sub-seed (SplitMix64 finalizer).
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Encoder output for one frame.
#[derive(Debug, Clone)]
pub struct Encoded {
    /// Pre-pool stage outputs, full resolution first.
    pub skips: Vec<Tensor>,
    pub mu: Tensor,
    pub logvar: Option<Tensor>,
}

/// Saliency for the center frame of a window, plus the center latent
/// statistics needed by the KL term.
#[derive(Debug, Clone)]
pub struct Prediction {
    /// N×1×H×W, values in (0, 1).
    pub saliency: Tensor,
    pub mu: Tensor,
    pub logvar: Option<Tensor>,
}

/// `z = μ + exp(0.5·logσ²)·ε` with seeded `ε ~ N(0, 1)` in training, `z = μ`
/// otherwise.
pub fn reparameterize(mu: &Tensor, logvar: &Tensor, training: bool, seed: u64) -> Result<Tensor> {
    if !mu.same_shape(logvar) {
        return Err(Error::shape("reparameterize", mu.shape(), logvar.shape()));
    }
    if !training {
        return Ok(mu.clone());
    }
    let eps = Tensor::randn(mu.shape(), seed, 1.0)?;
    mu.add(&logvar.scalar_mul(0.5).exp().mul(&eps)?)
}

/// A VS-Net: its configuration and named parameters.
#[derive(Debug, Clone)]
pub struct VsNet {
    config: VsNetConfig,
    params: ParamSet,
    layout: Layout,
    coeffs: ArpCoefficients,
}

impl VsNet {
    /// Builds a freshly initialized network. Weights are drawn from
    /// `N(0, gain/fan_in)` with gain 2 before a ReLU and 1 elsewhere, biases
    /// are zero, and every value is rounded to f32.
    pub fn build(config: VsNetConfig) -> Result<VsNet> {
        config.validate()?;
        let (layout, specs) = layout(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamSet::new();
        for spec in specs {
            let len = spec.shape.iter().product();
            let data = match spec.init {
                Some((fan_in, gain)) => {
                    let normal = Normal::new(0.0, (gain / fan_in as f64).sqrt())
                        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
                    (0..len).map(|_| normal.sample(&mut rng)).collect()
                }
                None => vec![0.0; len],
            };
            params.insert(spec.name, &spec.shape, data)?;
        }
        params.round_to_f32();
        let coeffs = ArpCoefficients::new(config.arp_window, config.arp_variant)?;
        Ok(VsNet {
            config,
            params,
            layout,
            coeffs,
        })
    }

    /// Wraps existing parameters, checking that names and shapes match the
    /// layout `config` describes.
    pub fn from_params(config: VsNetConfig, params: ParamSet) -> Result<VsNet> {
        config.validate()?;
        let (layout, specs) = layout(&config);
        if params.len() != specs.len() {
            return Err(Error::Checkpoint(format!(
                "{} parameters, configuration expects {}",
                params.len(),
                specs.len()
            )));
        }
        let mut ordered = ParamSet::new();
        for spec in specs {
            let p = params
                .get(&spec.name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{}`", spec.name)))?;
            if p.shape != spec.shape {
                return Err(Error::Checkpoint(format!(
                    "parameter `{}` has shape {:?}, configuration expects {:?}",
                    spec.name, p.shape, spec.shape
                )));
            }
            ordered.insert(spec.name, &spec.shape, p.data.clone())?;
        }
        let coeffs = ArpCoefficients::new(config.arp_window, config.arp_variant)?;
        Ok(VsNet {
            config,
            params: ordered,
            layout,
            coeffs,
        })
    }

    /// Loads a checkpoint. Without a config, the architecture is inferred
    /// from the stored shapes and the remaining fields take desk defaults.
    pub fn load(path: &std::path::Path, config: Option<VsNetConfig>) -> Result<VsNet> {
        let params = load_params(path)?;
        let config = match config {
            Some(c) => c,
            None => VsNetConfig::infer_from_params(&params, &VsNetConfig::default())?,
        };
        Self::from_params(config, params)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        save_params(&self.params, path)
    }

    pub fn config(&self) -> &VsNetConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn coefficients(&self) -> &ArpCoefficients {
        &self.coeffs
    }

    /// Number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    /// Parameter tensors for one forward pass, in [`ParamSet`] order.
    pub fn bind(&self, requires_grad: bool) -> Vec<Tensor> {
        self.params.bind(requires_grad)
    }

    fn sep(&self, p: &[Tensor], idx: SepIdx, x: &Tensor) -> Result<Tensor> {
        let params = ConvParams::new(
            p[idx.depthwise].clone(),
            p[idx.depthwise_bias].clone(),
            p[idx.pointwise].clone(),
            p[idx.bias].clone(),
        )?;
        separable_conv(x, &params, self.config.dilation)
    }

    fn pw(&self, p: &[Tensor], idx: PwIdx, x: &Tensor) -> Result<Tensor> {
        conv2d_pointwise(x, &p[idx.weight], &p[idx.bias])
    }

    fn check_bound(&self, p: &[Tensor]) -> Result<()> {
        if p.len() != self.params.len() {
            return Err(Error::InvalidArgument(format!(
                "{} bound tensors for {} parameters",
                p.len(),
                self.params.len()
            )));
        }
        Ok(())
    }

    fn check_frame(&self, frame: &Tensor, channels: usize) -> Result<()> {
        let s = self.config.input_size;
        match *frame.shape() {
            [_, c, h, w] if c == channels && h == s && w == s => Ok(()),
            _ => Err(Error::shape("frame", frame.shape(), &[1, channels, s, s])),
        }
    }

    /// Runs the encoder and bottleneck on an N×C×H×W input. With
    /// [`ArpPlacement::InputFrames`] the input carries the frame and the
    /// dynamic image stacked on the channel axis.
    pub fn encode(&self, p: &[Tensor], input: &Tensor, mode: Mode) -> Result<Encoded> {
        self.check_bound(p)?;
        self.check_frame(input, self.config.encoder_input_channels())?;
        let mut x = input.clone();
        let mut skips = Vec::with_capacity(self.config.stages());
        for &idx in &self.layout.encoder {
            let y = self.sep(p, idx, &x)?.relu();
            x = maxpool2(&y)?;
            skips.push(y);
        }
        let h = self.pw(p, self.layout.bottleneck, &x)?.relu();
        let h = match mode.derive(1) {
            Mode::Training { seed } => dropout(&h, self.config.dropout, true, seed)?,
            Mode::Inference => h,
        };
        let mu = self.pw(p, self.layout.mu, &h)?;
        let logvar = self
            .layout
            .logvar
            .map(|idx| self.pw(p, idx, &h))
            .transpose()?;
        Ok(Encoded { skips, mu, logvar })
    }

    fn sample(&self, enc: &Encoded, mode: Mode) -> Result<Tensor> {
        match (&enc.logvar, mode.derive(2)) {
            (Some(logvar), Mode::Training { seed }) => reparameterize(&enc.mu, logvar, true, seed),
            _ => Ok(enc.mu.clone()),
        }
    }

    /// Decodes a latent map using the skips of the matching encode.
    pub fn decode(&self, p: &[Tensor], z: &Tensor, skips: &[Tensor]) -> Result<Tensor> {
        self.check_bound(p)?;
        if skips.len() != self.config.stages() {
            return Err(Error::InvalidArgument(format!(
                "{} skips for {} stages",
                skips.len(),
                self.config.stages()
            )));
        }
        let mut x = z.clone();
        for (k, &(up, merge)) in self.layout.decoder.iter().enumerate().rev() {
            x = self.sep(p, up, &upsample2(&x)?)?.relu();
            x = concat_channels(&x, &skips[k])?;
            x = self.sep(p, merge, &x)?.relu();
        }
        Ok(self.pw(p, self.layout.head, &x)?.sigmoid())
    }

    /// Saliency of the center frame of a window of `arp_window` frames.
    pub fn forward_window(&self, p: &[Tensor], frames: &[Tensor], mode: Mode) -> Result<Prediction> {
        self.check_bound(p)?;
        if frames.len() != self.config.arp_window {
            return Err(Error::InvalidArgument(format!(
                "window of {} frames, model expects {}",
                frames.len(),
                self.config.arp_window
            )));
        }
        for f in frames {
            self.check_frame(f, self.config.in_channels)?;
        }
        let center = self.config.center_index();
        match self.config.arp_placement {
            ArpPlacement::Bottleneck => {
                let mut center_enc = None;
                let mut latents = Vec::with_capacity(frames.len());
                for (t, frame) in frames.iter().enumerate() {
                    let enc = self.encode(p, frame, mode.derive(100 + t as u64))?;
                    latents.push(enc.mu.clone());
                    if t == center {
                        center_enc = Some(enc);
                    }
                }
                let enc = center_enc.expect("center lies inside the window");
                let dynamic = arp_pool(&latents, &self.coeffs)?;
                self.fuse_and_decode(p, enc, &dynamic, mode)
            }
            ArpPlacement::InputFrames => {
                let dynamic = arp_pool(frames, &self.coeffs)?;
                let input = concat_channels(&frames[center], &dynamic)?;
                let enc = self.encode(p, &input, mode.derive(100 + center as u64))?;
                self.decode_latent(p, enc, mode)
            }
        }
    }

    /// Single-frame path: the window machinery with an all-zero dynamic map.
    pub fn forward_frame(&self, p: &[Tensor], frame: &Tensor, mode: Mode) -> Result<Prediction> {
        self.check_bound(p)?;
        self.check_frame(frame, self.config.in_channels)?;
        let center_mode = mode.derive(100 + self.config.center_index() as u64);
        match self.config.arp_placement {
            ArpPlacement::Bottleneck => {
                let enc = self.encode(p, frame, center_mode)?;
                let zeros = Tensor::zeros(enc.mu.shape())?;
                self.fuse_and_decode(p, enc, &zeros, mode)
            }
            ArpPlacement::InputFrames => {
                let input = concat_channels(frame, &Tensor::zeros(frame.shape())?)?;
                let enc = self.encode(p, &input, center_mode)?;
                self.decode_latent(p, enc, mode)
            }
        }
    }

    fn fuse_and_decode(&self, p: &[Tensor], enc: Encoded, dynamic: &Tensor, mode: Mode) -> Result<Prediction> {
        let z = self.sample(&enc, mode)?;
        let fuse = self.layout.fuse.expect("bottleneck placement has a fusion layer");
        let fused = self.pw(p, fuse, &concat_channels(&z, dynamic)?)?;
        let saliency = self.decode(p, &fused, &enc.skips)?;
        Ok(Prediction {
            saliency,
            mu: enc.mu,
            logvar: enc.logvar,
        })
    }

    fn decode_latent(&self, p: &[Tensor], enc: Encoded, mode: Mode) -> Result<Prediction> {
        let z = self.sample(&enc, mode)?;
        let saliency = self.decode(p, &z, &enc.skips)?;
        Ok(Prediction {
            saliency,
            mu: enc.mu,
            logvar: enc.logvar,
        })
    }

    /// Inference-mode saliency for a window, without gradient tracking.
    pub fn predict(&self, frames: &[Tensor]) -> Result<Tensor> {
        let p = self.bind(false);
        Ok(self.forward_window(&p, frames, Mode::Inference)?.saliency)
    }
}

#[cfg(test)]
mod tests;
