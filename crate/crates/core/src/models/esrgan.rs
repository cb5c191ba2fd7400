use rand_chacha::ChaCha8Rng;

use super::config::{dropout_positions, GeneratorConfig};
use super::layers::{dropout, Conv, Param, ParamBuilder};
use crate::error::Result;
use crate::nn::{Tape, Var};

const SLOPE: f64 = 0.2;

/// Residual dense block: conv `k` sees the block input concatenated with
/// the outputs of convs `1..k`, so it receives `base + (k - 1) * growth`
/// channels. The last conv maps back to `base` channels and is added to the
/// input after scaling by `beta`.
pub(crate) struct ResidualDenseBlock {
    convs: Vec<Conv>,
}

impl ResidualDenseBlock {
    fn build(name: &str, cfg: &GeneratorConfig, pb: &mut ParamBuilder) -> Self {
        let (f, g, k) = (cfg.base_channels, cfg.growth_channels, cfg.convs_per_rdb);
        let convs = (1..=k)
            .map(|i| {
                let cin = f + (i - 1) * g;
                let cout = if i == k { f } else { g };
                pb.conv(&format!("{name}.conv{i}"), cin, cout, 3, 1)
            })
            .collect();
        Self { convs }
    }

    /// Input channel count of each conv, in order.
    pub fn input_channels(&self, params: &[Param]) -> Vec<usize> {
        self.convs.iter().map(|c| params[c.weight].value.dim().1).collect()
    }

    fn forward(&self, tape: &mut Tape, p: &[Param], x: Var, beta: f64) -> Result<Var> {
        let mut features = vec![x];
        let last = self.convs.len() - 1;
        for (i, conv) in self.convs.iter().enumerate() {
            let input = if features.len() == 1 {
                x
            } else {
                tape.concat(&features)?
            };
            let y = conv.apply(tape, p, input)?;
            if i == last {
                return tape.scaled_add(x, y, beta);
            }
            features.push(tape.leaky_relu(y, SLOPE));
        }
        unreachable!("a dense block has at least one conv")
    }
}

pub(crate) struct Rrdb {
    pub rdbs: Vec<ResidualDenseBlock>,
}

impl Rrdb {
    pub fn forward(&self, tape: &mut Tape, p: &[Param], x: Var, beta: f64) -> Result<Var> {
        let mut y = x;
        for rdb in &self.rdbs {
            y = rdb.forward(tape, p, y, beta)?;
        }
        tape.scaled_add(x, y, beta)
    }
}

/// RRDB generator: head conv, trunk of RRDBs (with dropout after evenly
/// spaced blocks), trunk conv added to the head features (global skip),
/// conv + pixel-shuffle + leaky ReLU per factor of two, then two convs.
pub(crate) struct EsrganGenerator {
    head: Conv,
    pub rrdbs: Vec<Rrdb>,
    trunk: Conv,
    ups: Vec<Conv>,
    hr: Conv,
    tail: Conv,
    beta: f64,
    dropout_after: Vec<usize>,
    dropout_p: f64,
}

impl EsrganGenerator {
    pub fn build(cfg: &GeneratorConfig, pb: &mut ParamBuilder) -> Self {
        let (c, f) = (cfg.image_channels, cfg.base_channels);
        let head = pb.conv("head", c, f, 3, 1);
        let rrdbs = (0..cfg.n_blocks)
            .map(|b| Rrdb {
                rdbs: (0..cfg.rdb_per_rrdb)
                    .map(|r| ResidualDenseBlock::build(&format!("rrdb.{b}.rdb.{r}"), cfg, pb))
                    .collect(),
            })
            .collect();
        let trunk = pb.conv("trunk", f, f, 3, 1);
        let ups = (0..cfg.upsample_stages())
            .map(|i| pb.conv(&format!("up.{i}.conv"), f, 4 * f, 3, 1))
            .collect();
        let hr = pb.conv("hr", f, f, 3, 1);
        let tail = pb.conv("tail", f, c, 3, 1);
        Self {
            head,
            rrdbs,
            trunk,
            ups,
            hr,
            tail,
            beta: cfg.residual_scale,
            dropout_after: dropout_positions(cfg.n_blocks, cfg.dropout_count),
            dropout_p: cfg.dropout_p,
        }
    }

    pub fn dropout_positions(&self) -> &[usize] {
        &self.dropout_after
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn forward(&self, tape: &mut Tape, p: &[Param], x: Var, mut rng: Option<&mut ChaCha8Rng>) -> Result<Var> {
        let skip = self.head.apply(tape, p, x)?;
        let mut feat = skip;
        for (i, block) in self.rrdbs.iter().enumerate() {
            feat = block.forward(tape, p, feat, self.beta)?;
            if self.dropout_after.contains(&i) {
                feat = dropout(tape, feat, self.dropout_p, rng.as_deref_mut())?;
            }
        }
        let trunk = self.trunk.apply(tape, p, feat)?;
        let mut feat = tape.add(skip, trunk)?;
        for conv in &self.ups {
            let y = conv.apply(tape, p, feat)?;
            let y = tape.pixel_shuffle(y, 2)?;
            feat = tape.leaky_relu(y, SLOPE);
        }
        let y = self.hr.apply(tape, p, feat)?;
        let y = tape.leaky_relu(y, SLOPE);
        self.tail.apply(tape, p, y)
    }
}
