use rand_chacha::ChaCha8Rng;

use super::config::{dropout_positions, GeneratorConfig};
use super::layers::{dropout, prelu, Conv, Param, ParamBuilder};
use crate::error::Result;
use crate::nn::{Tape, Var};

struct ResidualBlock {
    conv1: Conv,
    act: usize,
    conv2: Conv,
}

/// Residual generator: 9x9 head, `n_blocks` conv-PReLU-conv residual blocks
/// (no batch norm), a body conv with a long skip, one conv + pixel-shuffle +
/// PReLU per factor of two, and a 9x9 tail.
pub(crate) struct SrganGenerator {
    head: Conv,
    head_act: usize,
    blocks: Vec<ResidualBlock>,
    body: Conv,
    ups: Vec<(Conv, usize)>,
    tail: Conv,
    dropout_after: Vec<usize>,
    dropout_p: f64,
}

impl SrganGenerator {
    pub fn build(cfg: &GeneratorConfig, pb: &mut ParamBuilder) -> Self {
        let (c, f) = (cfg.image_channels, cfg.base_channels);
        let head = pb.conv("head", c, f, 9, 1);
        let head_act = pb.prelu("head_act");
        let blocks = (0..cfg.n_blocks)
            .map(|i| ResidualBlock {
                conv1: pb.conv(&format!("block.{i}.conv1"), f, f, 3, 1),
                act: pb.prelu(&format!("block.{i}.act")),
                conv2: pb.conv(&format!("block.{i}.conv2"), f, f, 3, 1),
            })
            .collect();
        let body = pb.conv("body", f, f, 3, 1);
        let ups = (0..cfg.upsample_stages())
            .map(|i| {
                (
                    pb.conv(&format!("up.{i}.conv"), f, 4 * f, 3, 1),
                    pb.prelu(&format!("up.{i}.act")),
                )
            })
            .collect();
        let tail = pb.conv("tail", f, c, 9, 1);
        Self {
            head,
            head_act,
            blocks,
            body,
            ups,
            tail,
            dropout_after: dropout_positions(cfg.n_blocks, cfg.dropout_count),
            dropout_p: cfg.dropout_p,
        }
    }

    pub fn dropout_positions(&self) -> &[usize] {
        &self.dropout_after
    }

    pub fn forward(&self, tape: &mut Tape, p: &[Param], x: Var, mut rng: Option<&mut ChaCha8Rng>) -> Result<Var> {
        let h = self.head.apply(tape, p, x)?;
        let skip = prelu(tape, p, self.head_act, h);
        let mut feat = skip;
        for (i, b) in self.blocks.iter().enumerate() {
            let y = b.conv1.apply(tape, p, feat)?;
            let y = prelu(tape, p, b.act, y);
            let y = b.conv2.apply(tape, p, y)?;
            feat = tape.add(feat, y)?;
            if self.dropout_after.contains(&i) {
                feat = dropout(tape, feat, self.dropout_p, rng.as_deref_mut())?;
            }
        }
        let body = self.body.apply(tape, p, feat)?;
        let mut feat = tape.add(skip, body)?;
        for (conv, act) in &self.ups {
            let y = conv.apply(tape, p, feat)?;
            let y = tape.pixel_shuffle(y, 2)?;
            feat = prelu(tape, p, *act, y);
        }
        self.tail.apply(tape, p, feat)
    }
}
