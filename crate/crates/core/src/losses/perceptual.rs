use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pixel::same_shape;
use crate::error::{Error, Result};
use crate::models::{Conv, Param, ParamBuilder};
use crate::nn::{Tape, Tensor, Var};

/// File name looked up inside the weights directory for pretrained
/// VGG19 feature weights.
pub const PRETRAINED_FILE: &str = "vgg19_features.srt";

const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [f64; 3] = [0.229, 0.224, 0.225];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L2,
    L1,
}

/// VGG-style layout: block `b` holds `convs[b]` 3x3 convolutions of width
/// `widths[b]`, each followed by ReLU, and blocks are separated by 2x2 max
/// pooling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VggConfig {
    pub widths: Vec<usize>,
    pub convs: Vec<usize>,
}

impl VggConfig {
    pub fn vgg19() -> Self {
        Self {
            widths: vec![64, 128, 256, 512, 512],
            convs: vec![2, 2, 4, 4, 4],
        }
    }

    /// Two-block network used when no pretrained weights are available.
    pub fn small() -> Self {
        Self {
            widths: vec![16, 32],
            convs: vec![2, 2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.len() != self.convs.len() {
            return Err(Error::config(
                "extractor widths and convs must be nonempty and equally long",
            ));
        }
        if self.widths.contains(&0) || self.convs.contains(&0) {
            return Err(Error::config("extractor widths and convs must be positive"));
        }
        Ok(())
    }

    /// Tag of the deepest convolution, e.g. `conv5_4` for VGG19.
    pub fn deepest_tag(&self) -> String {
        format!("conv{}_{}", self.widths.len(), self.convs[self.convs.len() - 1])
    }

    /// Parses `convB_K` (1-based) into zero-based block and conv indices.
    pub fn parse_tag(&self, tag: &str) -> Result<(usize, usize)> {
        let bad = || Error::config(format!("layer tag {tag:?} does not name a convolution of this network"));
        let (b, k) = tag
            .strip_prefix("conv")
            .and_then(|r| r.split_once('_'))
            .ok_or_else(bad)?;
        let b: usize = b.parse().map_err(|_| bad())?;
        let k: usize = k.parse().map_err(|_| bad())?;
        if b == 0 || k == 0 || b > self.widths.len() || k > self.convs[b - 1] {
            return Err(bad());
        }
        Ok((b - 1, k - 1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Identity,
    Pretrained { path: PathBuf },
    RandomSeeded { seed: u64 },
}

#[derive(Debug, Clone)]
enum Backbone {
    Identity,
    Vgg {
        convs: Vec<Vec<Conv>>,
        params: Vec<Param>,
        mean: Vec<f64>,
        inv_std: Vec<f64>,
        stop: (usize, usize),
    },
}

/// Frozen network mapping images to the embedding used by the perceptual
/// loss. The embedding is the pre-activation output of the tagged
/// convolution.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    backbone: Backbone,
    layer_tag: String,
    provenance: Provenance,
    config: Option<VggConfig>,
}

fn build_layout(cfg: &VggConfig, channels: usize, seed: u64) -> (Vec<Vec<Conv>>, Vec<Param>) {
    let mut pb = ParamBuilder::new(seed);
    let mut cin = channels;
    let mut convs = Vec::new();
    for (b, (&width, &n)) in cfg.widths.iter().zip(&cfg.convs).enumerate() {
        let mut block = Vec::new();
        for k in 0..n {
            block.push(pb.conv(&format!("conv{}_{}", b + 1, k + 1), cin, width, 3, 1));
            cin = width;
        }
        convs.push(block);
    }
    (convs, pb.params)
}

fn normalization(channels: usize) -> (Vec<f64>, Vec<f64>) {
    if channels == 3 {
        (IMAGENET_MEAN.to_vec(), IMAGENET_STD.iter().map(|s| 1.0 / s).collect())
    } else {
        let m = IMAGENET_MEAN.iter().sum::<f64>() / 3.0;
        let s = IMAGENET_STD.iter().sum::<f64>() / 3.0;
        (vec![m; channels], vec![1.0 / s; channels])
    }
}

impl FeatureExtractor {
    /// The embedding is the image itself.
    pub fn identity() -> Self {
        Self {
            backbone: Backbone::Identity,
            layer_tag: "identity".into(),
            provenance: Provenance::Identity,
            config: None,
        }
    }

    /// Kaiming-initialized network drawn from `seed`. `layer_tag` defaults
    /// to the deepest convolution.
    pub fn random(cfg: VggConfig, layer_tag: Option<&str>, channels: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let (convs, params) = build_layout(&cfg, channels, seed);
        Self::assemble(
            cfg,
            layer_tag,
            channels,
            convs,
            params,
            Provenance::RandomSeeded { seed },
        )
    }

    /// Loads a tensor bundle whose names and shapes match the layout of
    /// `cfg` for 3-channel input (`conv1_1.weight`, `conv1_1.bias`, ...).
    pub fn pretrained(path: &Path, cfg: VggConfig, layer_tag: Option<&str>) -> Result<Self> {
        cfg.validate()?;
        let (convs, mut params) = build_layout(&cfg, 3, 0);
        let loaded = crate::artifacts::load_bundle(path)?;
        if loaded.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "{}: expected {} tensors, found {}",
                path.display(),
                params.len(),
                loaded.len()
            )));
        }
        for (slot, p) in params.iter_mut().zip(loaded) {
            if slot.name != p.name || slot.value.dim() != p.value.dim() {
                return Err(Error::Checkpoint(format!(
                    "{}: tensor {} {:?} does not match {} {:?}",
                    path.display(),
                    p.name,
                    p.value.dim(),
                    slot.name,
                    slot.value.dim()
                )));
            }
            *slot = p;
        }
        let provenance = Provenance::Pretrained {
            path: path.to_path_buf(),
        };
        Self::assemble(cfg, layer_tag, 3, convs, params, provenance)
    }

    /// Pretrained VGG19 weights when `weights_dir` holds them and the
    /// images are RGB; otherwise the small random-seeded network.
    pub fn resolve(weights_dir: Option<&Path>, layer_tag: Option<&str>, channels: usize, seed: u64) -> Result<Self> {
        if let Some(dir) = weights_dir {
            let path = dir.join(PRETRAINED_FILE);
            if channels == 3 && path.is_file() {
                return Self::pretrained(&path, VggConfig::vgg19(), layer_tag);
            }
        }
        Self::random(VggConfig::small(), layer_tag, channels, seed)
    }

    fn assemble(
        cfg: VggConfig,
        layer_tag: Option<&str>,
        channels: usize,
        convs: Vec<Vec<Conv>>,
        params: Vec<Param>,
        provenance: Provenance,
    ) -> Result<Self> {
        let layer_tag = layer_tag.map_or_else(|| cfg.deepest_tag(), str::to_owned);
        let stop = cfg.parse_tag(&layer_tag)?;
        let (mean, inv_std) = normalization(channels);
        Ok(Self {
            backbone: Backbone::Vgg {
                convs,
                params,
                mean,
                inv_std,
                stop,
            },
            layer_tag,
            provenance,
            config: Some(cfg),
        })
    }

    pub fn layer_tag(&self) -> &str {
        &self.layer_tag
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Frozen weights, `None` for the identity extractor.
    pub fn params(&self) -> Option<&[Param]> {
        match &self.backbone {
            Backbone::Identity => None,
            Backbone::Vgg { params, .. } => Some(params),
        }
    }

    pub fn config(&self) -> Option<&VggConfig> {
        self.config.as_ref()
    }

    /// Records the embedding of `x` on `tape`, returning the input leaf
    /// (which tracks gradients iff `track`) and the embedding node.
    fn record(&self, tape: &mut Tape, x: &Tensor, track: bool) -> Result<(Var, Var)> {
        let Backbone::Vgg {
            convs,
            params,
            mean,
            inv_std,
            stop,
        } = &self.backbone
        else {
            let v = if track {
                tape.leaf(x.clone())
            } else {
                tape.constant(x.clone())
            };
            return Ok((v, v));
        };
        let channels = x.dim().1;
        if channels != mean.len() {
            return Err(Error::Shape(format!(
                "feature extractor expects {} channels, got {channels}",
                mean.len()
            )));
        }
        let mut shifted = x.clone();
        for (c, m) in mean.iter().enumerate() {
            shifted.index_axis_mut(ndarray::Axis(1), c).mapv_inplace(|v| v - m);
        }
        let input = if track {
            tape.leaf(shifted)
        } else {
            tape.constant(shifted)
        };
        let mut h = tape.channel_scale(input, inv_std.clone())?;
        for (b, block) in convs.iter().enumerate() {
            if b > 0 {
                h = tape.max_pool2(h)?;
            }
            for (k, conv) in block.iter().enumerate() {
                let w = tape.constant(params[conv.weight].value.clone());
                let bias = tape.constant(params[conv.bias].value.clone());
                h = tape.conv2d(h, w, Some(bias), conv.stride, conv.pad)?;
                if (b, k) == *stop {
                    return Ok((input, h));
                }
                h = tape.relu(h);
            }
        }
        unreachable!("stop tag validated at construction")
    }

    /// Embedding of an `N x C x H x W` batch.
    pub fn embed(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let (_, out) = self.record(&mut tape, x, false)?;
        Ok(tape.take_value(out))
    }
}

/// Mean-reduced distance between embeddings: squared error for `L2`,
/// absolute error for `L1`.
pub fn perceptual(sr: &Tensor, hr: &Tensor, extractor: &FeatureExtractor, norm: Norm) -> Result<f64> {
    same_shape(sr, hr)?;
    let a = extractor.embed(sr)?;
    let b = extractor.embed(hr)?;
    let n = a.len() as f64;
    let total: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| match norm {
            Norm::L2 => (x - y) * (x - y),
            Norm::L1 => (x - y).abs(),
        })
        .sum();
    Ok(total / n)
}

pub fn perceptual_grad(sr: &Tensor, hr: &Tensor, extractor: &FeatureExtractor, norm: Norm) -> Result<(f64, Tensor)> {
    same_shape(sr, hr)?;
    let target = extractor.embed(hr)?;
    let mut tape = Tape::new();
    let (input, out) = extractor.record(&mut tape, sr, true)?;
    let fa = tape.value(out);
    let n = fa.len() as f64;
    let diff = fa - &target;
    let value = match norm {
        Norm::L2 => diff.iter().map(|d| d * d).sum::<f64>() / n,
        Norm::L1 => diff.iter().map(|d| d.abs()).sum::<f64>() / n,
    };
    let seed = match norm {
        Norm::L2 => diff.mapv(|d| 2.0 * d / n),
        Norm::L1 => diff.mapv(|d| {
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        }),
    };
    if input == out {
        return Ok((value, seed));
    }
    let grads = tape.backward(out, seed)?;
    let g = grads.wrt(input).cloned().unwrap_or_else(|| Tensor::zeros(sr.dim()));
    Ok((value, g))
}
