//! Self-checks: gradient checks for every layer and the full network,
//! identity-stitch independence, a feature fixture and a metric recount.

use serde::Serialize;

use crate::data::metrics::compute_metrics;
use crate::encoder::{encode_tweet, encode_with_cache, encoder_backward, EncoderConfig, EncoderParams};
use crate::features::{extract_features, PosLexicon, SentimentLexicon};
use crate::layers::batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormParams};
use crate::layers::dropout::{dropout_backward, dropout_with_mask};
use crate::layers::fc::{fc_backward, fc_forward, FcParams};
use crate::layers::gradcheck::{grad_check, projection};
use crate::layers::gru::{gru_cell_backward, gru_cell_forward, GruParams};
use crate::layers::loss::{mse_loss, softmax_cross_entropy};
use crate::layers::Phase;
use crate::model::network::{backward, forward, is_trainable, joint_loss, DropoutStreams, ModelParams};
use crate::model::ModelConfig;
use crate::record::TweetRecord;
use crate::stitch::{stitch_backward, stitch_forward, CrossStitchUnit, StitchInit};
use crate::tensor::{dot, Matrix, SeededRng};

pub const EPS: f64 = 1e-5;
pub const LAYER_TOLERANCE: f64 = 1e-5;
pub const NETWORK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VerifyOptions {
    /// Corrupt the FC weight gradient by 0.1% to show that the checks bite.
    pub inject_fault: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// Worst relative error for gradient checks, mismatch count or largest
    /// absolute difference for the exactness checks.
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{:<width$}  {:>10.3e}  (tol {:.0e})  {}\n",
                    c.name,
                    c.measured,
                    c.tolerance,
                    if c.passed { "PASS" } else { "FAIL" }
                )
            })
            .collect()
    }
}

fn check(name: &str, measured: f64, tolerance: f64) -> Check {
    Check {
        name: name.to_string(),
        measured,
        tolerance,
        passed: measured.is_finite() && measured < tolerance,
    }
}

fn exact(name: &str, mismatches: f64) -> Check {
    Check {
        name: name.to_string(),
        measured: mismatches,
        tolerance: 0.0,
        passed: mismatches == 0.0,
    }
}

fn random(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.uniform(-1.0, 1.0))
}

fn with_data(m: &Matrix, v: &[f64]) -> Matrix {
    Matrix::new(m.rows(), m.cols(), v.to_vec()).expect("same length")
}

/// Worst error over a list of tensors, perturbing one tensor at a time.
/// `f` receives the full tensor list.
fn check_tensors(f: impl Fn(&[Matrix]) -> f64, tensors: &[Matrix], grads: &[&Matrix]) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, t) in tensors.iter().enumerate() {
        let err = grad_check(
            |v| {
                let mut probe = tensors.to_vec();
                probe[k] = with_data(t, v);
                f(&probe)
            },
            t.data(),
            grads[k].data(),
            EPS,
        );
        worst = worst.max(err);
    }
    worst
}

fn fc_check(rng: &mut SeededRng, fault: bool) -> f64 {
    let x = random(4, 5, rng);
    let p = FcParams::xavier(5, 3, rng);
    let r = projection(4, 3, rng);
    let (_, cache) = fc_forward(&x, &p).unwrap();
    let mut g = fc_backward(&r, &cache, &p).unwrap();
    if fault {
        g.weight = g.weight.scale(1.001);
    }
    check_tensors(
        |t| {
            let q = FcParams::new(t[1].clone(), t[2].clone()).unwrap();
            dot(fc_forward(&t[0], &q).unwrap().0.data(), r.data())
        },
        &[x, p.weight.clone(), p.bias.clone()],
        &[&g.input, &g.weight, &g.bias],
    )
}

fn batchnorm_check(rng: &mut SeededRng, phase: Phase) -> f64 {
    let x = random(6, 4, rng).scale(2.0).add_scalar(0.5);
    let mut p = BatchNormParams::new(4);
    p.gamma = Matrix::from_fn(4, 1, |_, _| rng.uniform(0.5, 1.5));
    p.beta = random(4, 1, rng);
    p.running_mean = random(4, 1, rng);
    p.running_var = Matrix::from_fn(4, 1, |_, _| rng.uniform(0.5, 2.0));
    let r = projection(6, 4, rng);
    let (_, cache, _) = batchnorm_forward(&x, &p, phase).unwrap();
    let g = batchnorm_backward(&r, &cache, &p).unwrap();
    check_tensors(
        |t| {
            let q = BatchNormParams {
                gamma: t[1].clone(),
                beta: t[2].clone(),
                ..p.clone()
            };
            dot(batchnorm_forward(&t[0], &q, phase).unwrap().0.data(), r.data())
        },
        &[x, p.gamma.clone(), p.beta.clone()],
        &[&g.input, &g.gamma, &g.beta],
    )
}

fn dropout_check(rng: &mut SeededRng) -> f64 {
    let rate = 0.4;
    let x = random(5, 6, rng);
    let mask = Matrix::from_fn(5, 6, |_, _| if rng.bernoulli(rate) { 0.0 } else { 1.0 });
    let r = projection(5, 6, rng);
    let g = dropout_backward(&r, &mask, rate).unwrap();
    check_tensors(
        |t| dot(dropout_with_mask(&t[0], &mask, rate).unwrap().data(), r.data()),
        &[x],
        &[&g],
    )
}

fn gru_check(rng: &mut SeededRng) -> f64 {
    let mut p = GruParams::xavier(3, 4, rng);
    for (_, m) in p.tensors_mut() {
        if m.cols() == 1 {
            *m = random(m.rows(), 1, rng).scale(0.5);
        }
    }
    let x: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let h: Vec<f64> = (0..4).map(|_| rng.uniform(-0.9, 0.9)).collect();
    let r: Vec<f64> = (0..4).map(|_| rng.uniform(-1.5, 1.5)).collect();
    let (_, cache) = gru_cell_forward(&x, &h, &p).unwrap();
    let mut grads = GruParams::zeros(3, 4);
    let (dx, dh) = gru_cell_backward(&r, &cache, &p, &mut grads).unwrap();

    let mut tensors = vec![Matrix::column(&x), Matrix::column(&h)];
    tensors.extend(p.tensors().iter().map(|(_, m)| (*m).clone()));
    let dxm = Matrix::column(&dx);
    let dhm = Matrix::column(&dh);
    let mut gl: Vec<&Matrix> = vec![&dxm, &dhm];
    gl.extend(grads.tensors().iter().map(|(_, m)| *m));
    check_tensors(
        |t| {
            let mut q = p.clone();
            for ((_, m), v) in q.tensors_mut().into_iter().zip(&t[2..]) {
                *m = v.clone();
            }
            dot(&gru_cell_forward(t[0].data(), t[1].data(), &q).unwrap().0, &r)
        },
        &tensors,
        &gl,
    )
}

fn bigru_check(rng: &mut SeededRng) -> f64 {
    let config = EncoderConfig {
        char_dim: 3,
        hidden: 4,
        embed_dim: 5,
        ..EncoderConfig::default()
    };
    let mut p = EncoderParams::init(8, &config, rng);
    for (_, m) in p.tensors_mut() {
        if m.cols() == 1 {
            *m = random(m.rows(), 1, rng).scale(0.5);
        }
    }
    let seq = [2usize, 5, 7, 3, 1, 6, 5];
    let r: Vec<f64> = (0..5).map(|_| rng.uniform(-1.5, 1.5)).collect();
    let (_, cache) = encode_with_cache(&seq, &p).unwrap();
    let g = encoder_backward(&r, &cache, &p).unwrap();
    let tensors: Vec<Matrix> = p.tensors().into_iter().map(|(_, m)| m.clone()).collect();
    let gl: Vec<&Matrix> = g.tensors().into_iter().map(|(_, m)| m).collect();
    check_tensors(
        |t| {
            let mut q = p.clone();
            for ((_, m), v) in q.tensors_mut().into_iter().zip(t) {
                *m = v.clone();
            }
            dot(&encode_tweet(&seq, &q).unwrap(), &r)
        },
        &tensors,
        &gl,
    )
}

fn stitch_check(rng: &mut SeededRng) -> f64 {
    let x_a = random(4, 3, rng);
    let x_b = random(4, 3, rng);
    let u = CrossStitchUnit {
        alpha: Matrix::from_fn(2, 2, |_, _| rng.uniform(-1.0, 1.0)),
    };
    let (r_a, r_b) = (projection(4, 3, rng), projection(4, 3, rng));
    let (_, cache) = stitch_forward(&x_a, &x_b, &u).unwrap();
    let g = stitch_backward(&r_a, &r_b, &cache, &u).unwrap();
    check_tensors(
        |t| {
            let ((y_a, y_b), _) = stitch_forward(&t[0], &t[1], &CrossStitchUnit { alpha: t[2].clone() }).unwrap();
            dot(y_a.data(), r_a.data()) + dot(y_b.data(), r_b.data())
        },
        &[x_a, x_b, u.alpha.clone()],
        &[&g.x_a, &g.x_b, &g.alpha],
    )
}

fn ce_check(rng: &mut SeededRng) -> f64 {
    let logits = random(5, 3, rng).scale(2.0);
    let labels = [0, 2, 1, 1, 0];
    let (_, g) = softmax_cross_entropy(&logits, &labels).unwrap();
    check_tensors(|t| softmax_cross_entropy(&t[0], &labels).unwrap().0, &[logits], &[&g])
}

fn mse_check(rng: &mut SeededRng) -> f64 {
    let pred = random(5, 2, rng);
    let target = random(5, 2, rng);
    let (_, g) = mse_loss(&pred, &target).unwrap();
    check_tensors(|t| mse_loss(&t[0], &target).unwrap().0, &[pred], &[&g])
}

/// Gradient of the joint loss through the whole multitask network:
/// D = 6, widths [5, 4], batch 4, fixed dropout masks.
pub fn network_check(seed: u64) -> f64 {
    let mut rng = SeededRng::new(seed);
    let cfg = ModelConfig {
        embed_dim: 6,
        widths: vec![5, 4],
        dropout: 0.3,
        ..ModelConfig::default()
    };
    let mut p = ModelParams::build(&cfg, &rng).unwrap();
    for s in &mut p.stitches {
        s.alpha = Matrix::from_fn(2, 2, |_, _| rng.uniform(0.2, 1.0));
    }
    let x_a = random(4, 6, &mut rng);
    let x_b = random(4, 12, &mut rng);
    let targets = random(4, 2, &mut rng);
    let labels = [0, 1, 1, 0];
    let lambda = 0.7;
    let streams = DropoutStreams::new(&rng.child("dropout"));
    let loss = |q: &ModelParams, xa: &Matrix, xb: &Matrix| {
        let out = forward(q, xa, Some(xb), Phase::Train, cfg.dropout, &mut streams.clone()).unwrap();
        joint_loss(&out.logits, &labels, out.reg.as_ref(), Some(&targets), lambda)
            .unwrap()
            .0
            .total
    };
    let out = forward(&p, &x_a, Some(&x_b), Phase::Train, cfg.dropout, &mut streams.clone()).unwrap();
    let (_, d_logits, d_reg) = joint_loss(&out.logits, &labels, out.reg.as_ref(), Some(&targets), lambda).unwrap();
    let g = backward(&p, &out.cache, &d_logits, d_reg.as_ref()).unwrap();

    // The bias of a layer feeding batch norm has an identically zero gradient.
    let names: Vec<String> = p
        .tensors()
        .into_iter()
        .map(|(n, _)| n)
        .filter(|n| is_trainable(n, true) && !n.ends_with("fc.bias"))
        .collect();
    let pick = |q: &ModelParams, name: &str| q.tensors().into_iter().find(|(n, _)| n == name).unwrap().1.clone();
    let mut tensors = vec![x_a.clone(), x_b.clone()];
    let mut grads = vec![g.x_a.clone(), g.x_b.clone().unwrap()];
    for n in &names {
        tensors.push(pick(&p, n));
        grads.push(pick(&g.params, n));
    }
    let gl: Vec<&Matrix> = grads.iter().collect();
    check_tensors(
        |t| {
            let mut q = p.clone();
            for (n, m) in q.tensors_mut() {
                if let Some(k) = names.iter().position(|x| *x == n) {
                    *m = t[k + 2].clone();
                }
            }
            loss(&q, &t[0], &t[1])
        },
        &tensors,
        &gl,
    )
}

/// Runs a multitask network with identity stitches next to the two isolated
/// single-branch networks on `trials` random batches, in both phases.
/// Returns the number of output entries that differ bitwise.
pub fn identity_stitch_mismatches(trials: usize, seed: u64) -> usize {
    let cfg = ModelConfig {
        embed_dim: 7,
        widths: vec![6, 5, 4],
        stitch_init: StitchInit::Identity,
        ..ModelConfig::default()
    };
    let root = SeededRng::new(seed);
    let mut p = ModelParams::build(&cfg, &root).unwrap();
    let mut rng = root.child("data");
    // Non-trivial batch-norm parameters.
    for levels in [&mut p.a, &mut p.b] {
        for l in levels.iter_mut() {
            let bn = l.bn.as_mut().unwrap();
            bn.gamma = Matrix::from_fn(bn.features(), 1, |_, _| rng.uniform(0.5, 1.5));
            bn.beta = random(bn.features(), 1, &mut rng);
            bn.running_mean = random(bn.features(), 1, &mut rng);
            bn.running_var = Matrix::from_fn(bn.features(), 1, |_, _| rng.uniform(0.5, 2.0));
        }
    }
    let only_a = ModelParams {
        a: p.a.clone(),
        b: Vec::new(),
        stitches: Vec::new(),
        head_a: p.head_a.clone(),
        head_b: None,
    };
    let only_b = ModelParams {
        a: p.b.clone(),
        b: Vec::new(),
        stitches: Vec::new(),
        head_a: p.head_b.clone().unwrap(),
        head_b: None,
    };
    let differs = |x: &Matrix, y: &Matrix| {
        x.data()
            .iter()
            .zip(y.data())
            .filter(|(a, b)| a.to_bits() != b.to_bits())
            .count()
    };
    let mut mismatches = 0;
    for trial in 0..trials {
        let x_a = random(4, 7, &mut rng).scale(3.0);
        let x_b = random(4, 12, &mut rng).scale(3.0);
        for phase in [Phase::Infer, Phase::Train] {
            let streams = DropoutStreams::new(&root.child(&format!("trial{trial}")));
            let full = forward(&p, &x_a, Some(&x_b), phase, cfg.dropout, &mut streams.clone()).unwrap();
            let iso_a = forward(&only_a, &x_a, None, phase, cfg.dropout, &mut streams.clone()).unwrap();
            let mut b_streams = DropoutStreams {
                a: streams.b.clone(),
                b: streams.b.clone(),
            };
            let iso_b = forward(&only_b, &x_b, None, phase, cfg.dropout, &mut b_streams).unwrap();
            mismatches += differs(&full.logits, &iso_a.logits);
            mismatches += differs(full.reg.as_ref().unwrap(), &iso_b.logits);
        }
    }
    mismatches
}

/// Hand-computed feature vectors for a few fixed tweets.
fn feature_fixture() -> f64 {
    let s = SentimentLexicon::bundled();
    let pos = PosLexicon::bundled();
    let mut reply = TweetRecord::from_text("2", "@bob thanks, that was great");
    reply.is_reply = true;
    let cases: Vec<(TweetRecord, [f64; 12])> = vec![
        (TweetRecord::from_text("0", ""), [0.0; 12]),
        (
            TweetRecord::from_text("1", "#win #free https://bit.ly/abc"),
            // 2 hashtags, 1 URL; "#", "#", ":", "/", "/", ".", "/" are special.
            [0.0, 2.0, 1.0, 0.0, 0.0, 7.0, 29.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        ),
        (reply, {
            let great = s.polarity("great").unwrap_or(0.0);
            let thanks = s.polarity("thanks");
            let pol = match thanks {
                Some(t) => (great + t) / 2.0,
                None => great,
            };
            let words = ["thanks", "that", "was", "great"];
            let count = |tag| words.iter().filter(|w| pos.tag(w) == tag).count() as f64;
            use crate::features::PosTag::*;
            [
                1.0,
                0.0,
                0.0,
                0.0,
                1.0,
                2.0,
                27.0,
                pol,
                count(Noun),
                count(Adjective),
                count(Pronoun),
                count(Verb),
            ]
        }),
    ];
    cases
        .iter()
        .map(|(r, want)| {
            let got = extract_features(r, &s, &pos).0;
            got.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Compares [`compute_metrics`] with a brute-force recount on `n` random
/// prediction/label pairs. Returns the largest absolute difference.
pub fn metric_recount(n: usize, seed: u64) -> f64 {
    let mut rng = SeededRng::new(seed);
    let preds: Vec<usize> = (0..n).map(|_| rng.below(2)).collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.below(2)).collect();
    let m = compute_metrics(&preds, &labels).unwrap();
    let mut worst: f64 = 0.0;
    let mut f1s = Vec::new();
    for c in 0..2 {
        let tp = (0..n).filter(|&i| preds[i] == c && labels[i] == c).count() as f64;
        let fp = (0..n).filter(|&i| preds[i] == c && labels[i] != c).count() as f64;
        let fn_ = (0..n).filter(|&i| preds[i] != c && labels[i] == c).count() as f64;
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        f1s.push(f);
        let got = m.per_class[c];
        for (a, b) in [(got.precision, p), (got.recall, r), (got.f1, f)] {
            worst = worst.max((a - b).abs());
        }
    }
    worst = worst.max((m.macro_avg.f1 - (f1s[0] + f1s[1]) / 2.0).abs());
    let correct = (0..n).filter(|&i| preds[i] == labels[i]).count() as f64;
    worst.max((m.accuracy - correct / n as f64).abs())
}

pub fn run_all(opts: VerifyOptions) -> VerifyReport {
    let root = SeededRng::new(2024);
    let r = |label: &str| root.child(label);
    let checks = vec![
        check("grad.fc", fc_check(&mut r("fc"), opts.inject_fault), LAYER_TOLERANCE),
        check(
            "grad.batchnorm.train",
            batchnorm_check(&mut r("bn.train"), Phase::Train),
            LAYER_TOLERANCE,
        ),
        check(
            "grad.batchnorm.infer",
            batchnorm_check(&mut r("bn.infer"), Phase::Infer),
            LAYER_TOLERANCE,
        ),
        check("grad.dropout", dropout_check(&mut r("dropout")), LAYER_TOLERANCE),
        check("grad.gru_cell", gru_check(&mut r("gru")), LAYER_TOLERANCE),
        check("grad.bigru_unrolled", bigru_check(&mut r("bigru")), LAYER_TOLERANCE),
        check("grad.cross_stitch", stitch_check(&mut r("stitch")), LAYER_TOLERANCE),
        check("grad.softmax_ce", ce_check(&mut r("ce")), LAYER_TOLERANCE),
        check("grad.mse", mse_check(&mut r("mse")), LAYER_TOLERANCE),
        check("grad.network", network_check(r("net").seed()), NETWORK_TOLERANCE),
        exact("identity_stitch.bitwise", identity_stitch_mismatches(100, 7) as f64),
        exact("features.fixture", feature_fixture()),
        exact("metrics.recount", metric_recount(1000, 3)),
    ];
    VerifyReport { checks }
}
