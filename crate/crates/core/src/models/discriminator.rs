use super::config::DiscriminatorConfig;
use super::layers::{Conv, Linear, Param, ParamBuilder};
use crate::error::Result;
use crate::nn::{Tape, Var};

const SLOPE: f64 = 0.2;

/// Strided-conv classifier: a 3x3 head, then per stage a stride-2 conv and
/// a stride-1 conv (leaky ReLU after each), global average pooling and a
/// two-layer dense head producing one logit per image. Pooling makes the
/// parameter count independent of the input size.
pub(crate) struct Discriminator {
    head: Conv,
    stages: Vec<(Conv, Conv)>,
    fc1: Linear,
    fc2: Linear,
}

impl Discriminator {
    pub fn build(cfg: &DiscriminatorConfig, pb: &mut ParamBuilder) -> Self {
        let head = pb.conv("head", cfg.image_channels, cfg.base_channels, 3, 1);
        let mut cin = cfg.base_channels;
        let stages = (0..cfg.n_stages)
            .map(|s| {
                let cs = cfg.stage_channels(s);
                let pair = (
                    pb.conv(&format!("stage.{s}.down"), cin, cs, 3, 2),
                    pb.conv(&format!("stage.{s}.conv"), cs, cs, 3, 1),
                );
                cin = cs;
                pair
            })
            .collect();
        let fc1 = pb.linear("fc1", cin, cin);
        let fc2 = pb.linear("fc2", cin, 1);
        Self { head, stages, fc1, fc2 }
    }

    /// Returns the `N x 1 x 1 x 1` logits.
    pub fn forward(&self, tape: &mut Tape, p: &[Param], x: Var) -> Result<Var> {
        let y = self.head.apply(tape, p, x)?;
        let mut y = tape.leaky_relu(y, SLOPE);
        for (down, conv) in &self.stages {
            let z = down.apply(tape, p, y)?;
            let z = tape.leaky_relu(z, SLOPE);
            let z = conv.apply(tape, p, z)?;
            y = tape.leaky_relu(z, SLOPE);
        }
        let pooled = tape.global_avg_pool(y);
        let h = self.fc1.apply(tape, p, pooled)?;
        let h = tape.leaky_relu(h, SLOPE);
        self.fc2.apply(tape, p, h)
    }
}
