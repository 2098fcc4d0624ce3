//! Parameters, forward pass and backward pass of the two-branch network.
//!
//! Each hidden level of a branch applies `FC → batch norm → relu → dropout`.
//! In the multitask network a cross-stitch unit then mixes the two branch
//! activations before the next level. Branch A ends in a two-class logit
//! head, branch B in a two-output regression head.

use super::config::{Architecture, ModelConfig};
use crate::error::{Error, Result};
use crate::features::FEATURE_COUNT;
use crate::layers::batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormCache, BatchNormParams, RunningStats};
use crate::layers::dropout::{dropout_backward, dropout_forward};
use crate::layers::fc::{fc_backward, fc_forward, FcCache, FcParams};
use crate::layers::loss::{mse_loss, softmax_cross_entropy};
use crate::layers::Phase;
use crate::stitch::{stitch_backward, stitch_forward, CrossStitchUnit, StitchCache};
use crate::tensor::{Matrix, SeededRng};

pub const CLASSES: usize = 2;
pub const REG_OUTPUTS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub fc: FcParams,
    pub bn: Option<BatchNormParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub a: Vec<Level>,
    /// Empty unless the network is multitask.
    pub b: Vec<Level>,
    /// One per hidden level when multitask, otherwise empty.
    pub stitches: Vec<CrossStitchUnit>,
    pub head_a: FcParams,
    pub head_b: Option<FcParams>,
}

fn build_branch(name: &str, input: usize, config: &ModelConfig, rng: &SeededRng) -> Vec<Level> {
    let mut levels = Vec::new();
    let mut width_in = input;
    for (l, &w) in config.widths.iter().enumerate() {
        let mut init = rng.child(&format!("init.{name}.level{l}"));
        levels.push(Level {
            fc: FcParams::xavier(width_in, w, &mut init),
            bn: config.batchnorm.then(|| BatchNormParams::new(w)),
        });
        width_in = w;
    }
    levels
}

impl ModelParams {
    /// Xavier weights and zero biases. Every tensor draws from its own named
    /// child of `rng`, so branch A is initialized identically whatever the
    /// architecture.
    pub fn build(config: &ModelConfig, rng: &SeededRng) -> Result<Self> {
        config.validate()?;
        let last = *config.widths.last().expect("validated non-empty");
        let a = build_branch("a", config.input_a(), config, rng);
        let head_a = FcParams::xavier(last, CLASSES, &mut rng.child("init.a.head"));
        let (b, stitches, head_b) = match config.architecture {
            Architecture::Multitask => (
                build_branch("b", FEATURE_COUNT, config, rng),
                config
                    .widths
                    .iter()
                    .map(|_| CrossStitchUnit::new(config.stitch_init))
                    .collect(),
                Some(FcParams::xavier(last, REG_OUTPUTS, &mut rng.child("init.b.head"))),
            ),
            _ => (Vec::new(), Vec::new(), None),
        };
        Ok(ModelParams {
            a,
            b,
            stitches,
            head_a,
            head_b,
        })
    }

    pub fn input_a(&self) -> usize {
        self.a[0].fc.inputs()
    }

    pub fn is_multitask(&self) -> bool {
        self.head_b.is_some()
    }

    pub fn zeros_like(&self) -> Self {
        let zero_levels = |ls: &[Level]| {
            ls.iter()
                .map(|l| Level {
                    fc: l.fc.zeros_like(),
                    bn: l.bn.as_ref().map(|bn| BatchNormParams {
                        gamma: Matrix::zeros(bn.features(), 1),
                        beta: Matrix::zeros(bn.features(), 1),
                        running_mean: Matrix::zeros(bn.features(), 1),
                        running_var: Matrix::zeros(bn.features(), 1),
                        ..*bn
                    }),
                })
                .collect()
        };
        ModelParams {
            a: zero_levels(&self.a),
            b: zero_levels(&self.b),
            stitches: self
                .stitches
                .iter()
                .map(|_| CrossStitchUnit {
                    alpha: Matrix::zeros(2, 2),
                })
                .collect(),
            head_a: self.head_a.zeros_like(),
            head_b: self.head_b.as_ref().map(FcParams::zeros_like),
        }
    }

    /// Every tensor with its checkpoint name, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        for (branch, levels) in [("a", &self.a), ("b", &self.b)] {
            for (l, level) in levels.iter().enumerate() {
                out.push((format!("{branch}.level{l}.fc.weight"), &level.fc.weight));
                out.push((format!("{branch}.level{l}.fc.bias"), &level.fc.bias));
                if let Some(bn) = &level.bn {
                    out.push((format!("{branch}.level{l}.bn.gamma"), &bn.gamma));
                    out.push((format!("{branch}.level{l}.bn.beta"), &bn.beta));
                    out.push((format!("{branch}.level{l}.bn.running_mean"), &bn.running_mean));
                    out.push((format!("{branch}.level{l}.bn.running_var"), &bn.running_var));
                }
            }
        }
        for (l, s) in self.stitches.iter().enumerate() {
            out.push((format!("stitch{l}.alpha"), &s.alpha));
        }
        out.push(("a.head.weight".into(), &self.head_a.weight));
        out.push(("a.head.bias".into(), &self.head_a.bias));
        if let Some(h) = &self.head_b {
            out.push(("b.head.weight".into(), &h.weight));
            out.push(("b.head.bias".into(), &h.bias));
        }
        out
    }

    /// Mutable counterpart of [`ModelParams::tensors`], same order and names.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out = Vec::new();
        for (branch, levels) in [("a", &mut self.a), ("b", &mut self.b)] {
            for (l, level) in levels.iter_mut().enumerate() {
                out.push((format!("{branch}.level{l}.fc.weight"), &mut level.fc.weight));
                out.push((format!("{branch}.level{l}.fc.bias"), &mut level.fc.bias));
                if let Some(bn) = &mut level.bn {
                    out.push((format!("{branch}.level{l}.bn.gamma"), &mut bn.gamma));
                    out.push((format!("{branch}.level{l}.bn.beta"), &mut bn.beta));
                    out.push((format!("{branch}.level{l}.bn.running_mean"), &mut bn.running_mean));
                    out.push((format!("{branch}.level{l}.bn.running_var"), &mut bn.running_var));
                }
            }
        }
        for (l, s) in self.stitches.iter_mut().enumerate() {
            out.push((format!("stitch{l}.alpha"), &mut s.alpha));
        }
        out.push(("a.head.weight".into(), &mut self.head_a.weight));
        out.push(("a.head.bias".into(), &mut self.head_a.bias));
        if let Some(h) = &mut self.head_b {
            out.push(("b.head.weight".into(), &mut h.weight));
            out.push(("b.head.bias".into(), &mut h.bias));
        }
        out
    }
}

/// Whether a named tensor receives gradient updates.
pub fn is_trainable(name: &str, train_stitches: bool) -> bool {
    !name.contains(".running_") && (train_stitches || !name.starts_with("stitch"))
}

/// Separate dropout streams per branch.
#[derive(Debug, Clone)]
pub struct DropoutStreams {
    pub a: SeededRng,
    pub b: SeededRng,
}

impl DropoutStreams {
    pub fn new(root: &SeededRng) -> Self {
        DropoutStreams {
            a: root.child("dropout.a"),
            b: root.child("dropout.b"),
        }
    }
}

#[derive(Debug, Clone)]
struct LevelCache {
    fc: FcCache,
    bn: Option<BatchNormCache>,
    pre_relu: Matrix,
    mask: Matrix,
    rate: f64,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    a: Vec<LevelCache>,
    b: Vec<LevelCache>,
    stitches: Vec<StitchCache>,
    head_a: FcCache,
    head_b: Option<FcCache>,
}

/// Batch-norm statistics to fold in after a train-mode pass:
/// `(branch b?, level, stats)`.
pub type RunningUpdate = (bool, usize, RunningStats);

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub logits: Matrix,
    pub reg: Option<Matrix>,
    pub cache: ForwardCache,
    pub running: Vec<RunningUpdate>,
}

fn level_forward(
    x: &Matrix,
    level: &Level,
    phase: Phase,
    rate: f64,
    rng: &mut SeededRng,
) -> Result<(Matrix, LevelCache, Option<RunningStats>)> {
    let (z, fc) = fc_forward(x, &level.fc)?;
    let (pre_relu, bn, stats) = match &level.bn {
        Some(p) => {
            let (y, cache, stats) = batchnorm_forward(&z, p, phase)?;
            (y, Some(cache), stats)
        }
        None => (z, None, None),
    };
    let (out, mask) = dropout_forward(&pre_relu.relu(), rate, phase, rng)?;
    Ok((
        out,
        LevelCache {
            fc,
            bn,
            pre_relu,
            mask,
            rate,
        },
        stats,
    ))
}

/// Runs the network on `x_a` (and `x_b` when multitask). Train mode samples
/// dropout masks from `streams`; infer mode leaves them untouched.
pub fn forward(
    p: &ModelParams,
    x_a: &Matrix,
    x_b: Option<&Matrix>,
    phase: Phase,
    dropout: f64,
    streams: &mut DropoutStreams,
) -> Result<ForwardOutput> {
    if x_a.cols() != p.input_a() {
        return Err(Error::shape(
            "forward (branch A input)",
            x_a.shape(),
            p.a[0].fc.weight.shape(),
        ));
    }
    let mut h_a = x_a.clone();
    let mut h_b = match (p.is_multitask(), x_b) {
        (true, Some(x)) => {
            if x.rows() != x_a.rows() || x.cols() != FEATURE_COUNT {
                return Err(Error::shape(
                    "forward (branch B input)",
                    x.shape(),
                    (x_a.rows(), FEATURE_COUNT),
                ));
            }
            Some(x.clone())
        }
        (true, None) => return Err(Error::Config("multitask forward needs the feature input".into())),
        (false, _) => None,
    };

    let mut cache_a = Vec::new();
    let mut cache_b = Vec::new();
    let mut stitch_caches = Vec::new();
    let mut running = Vec::new();
    for l in 0..p.a.len() {
        let (out_a, c, stats) = level_forward(&h_a, &p.a[l], phase, dropout, &mut streams.a)?;
        cache_a.push(c);
        if let Some(s) = stats {
            running.push((false, l, s));
        }
        h_a = out_a;
        if let Some(hb) = h_b.take() {
            let (out_b, c, stats) = level_forward(&hb, &p.b[l], phase, dropout, &mut streams.b)?;
            cache_b.push(c);
            if let Some(s) = stats {
                running.push((true, l, s));
            }
            let ((ya, yb), sc) = stitch_forward(&h_a, &out_b, &p.stitches[l])?;
            stitch_caches.push(sc);
            h_a = ya;
            h_b = Some(yb);
        }
    }
    let (logits, head_a) = fc_forward(&h_a, &p.head_a)?;
    let (reg, head_b) = match (&p.head_b, h_b) {
        (Some(head), Some(hb)) => {
            let (r, c) = fc_forward(&hb, head)?;
            (Some(r), Some(c))
        }
        _ => (None, None),
    };
    Ok(ForwardOutput {
        logits,
        reg,
        cache: ForwardCache {
            a: cache_a,
            b: cache_b,
            stitches: stitch_caches,
            head_a,
            head_b,
        },
        running,
    })
}

fn level_backward(grad: &Matrix, c: &LevelCache, level: &Level, g: &mut Level) -> Result<Matrix> {
    let d_relu = dropout_backward(grad, &c.mask, c.rate)?;
    let d_pre = Matrix::from_fn(d_relu.rows(), d_relu.cols(), |i, j| {
        if c.pre_relu.get(i, j) > 0.0 {
            d_relu.get(i, j)
        } else {
            0.0
        }
    });
    let d_z = match (&c.bn, &level.bn, &mut g.bn) {
        (Some(cache), Some(p), Some(gbn)) => {
            let bg = batchnorm_backward(&d_pre, cache, p)?;
            gbn.gamma = bg.gamma;
            gbn.beta = bg.beta;
            bg.input
        }
        _ => d_pre,
    };
    let fg = fc_backward(&d_z, &c.fc, &level.fc)?;
    g.fc.weight = fg.weight;
    g.fc.bias = fg.bias;
    Ok(fg.input)
}

#[derive(Debug, Clone)]
pub struct Gradients {
    /// Same layout as the parameters; running-statistic slots stay zero.
    pub params: ModelParams,
    pub x_a: Matrix,
    pub x_b: Option<Matrix>,
}

/// Backpropagates `d_logits` (and `d_reg` when multitask) through the
/// network described by `cache`.
pub fn backward(p: &ModelParams, cache: &ForwardCache, d_logits: &Matrix, d_reg: Option<&Matrix>) -> Result<Gradients> {
    let mut g = p.zeros_like();
    let ga = fc_backward(d_logits, &cache.head_a, &p.head_a)?;
    g.head_a.weight = ga.weight;
    g.head_a.bias = ga.bias;
    let mut d_a = ga.input;
    let mut d_b = match (&p.head_b, &cache.head_b) {
        (Some(head), Some(hc)) => {
            let zeros;
            let d = match d_reg {
                Some(d) => d,
                None => {
                    zeros = Matrix::zeros(d_logits.rows(), REG_OUTPUTS);
                    &zeros
                }
            };
            let gb = fc_backward(d, hc, head)?;
            let gh = g.head_b.as_mut().expect("multitask grads carry a regression head");
            gh.weight = gb.weight;
            gh.bias = gb.bias;
            Some(gb.input)
        }
        _ => None,
    };

    for l in (0..p.a.len()).rev() {
        if let Some(db) = d_b.take() {
            let sg = stitch_backward(&d_a, &db, &cache.stitches[l], &p.stitches[l])?;
            g.stitches[l].alpha = sg.alpha;
            d_a = sg.x_a;
            d_b = Some(level_backward(&sg.x_b, &cache.b[l], &p.b[l], &mut g.b[l])?);
        }
        d_a = level_backward(&d_a, &cache.a[l], &p.a[l], &mut g.a[l])?;
    }
    Ok(Gradients {
        params: g,
        x_a: d_a,
        x_b: d_b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub ce: f64,
    pub mse: f64,
}

/// `CE(logits, labels) + λ·MSE(reg, targets)` and its gradients with respect
/// to the logits and the regression output. Without a regression output the
/// MSE term is 0.
pub fn joint_loss(
    logits: &Matrix,
    labels: &[usize],
    reg: Option<&Matrix>,
    targets: Option<&Matrix>,
    lambda: f64,
) -> Result<(LossParts, Matrix, Option<Matrix>)> {
    let (ce, d_logits) = softmax_cross_entropy(logits, labels)?;
    match (reg, targets) {
        (Some(r), Some(t)) => {
            let (mse, d) = mse_loss(r, t)?;
            let parts = LossParts {
                total: ce + lambda * mse,
                ce,
                mse,
            };
            Ok((parts, d_logits, Some(d.scale(lambda))))
        }
        (Some(_), None) => Err(Error::Config("regression output given without targets".into())),
        _ => Ok((LossParts { total: ce, ce, mse: 0.0 }, d_logits, None)),
    }
}
