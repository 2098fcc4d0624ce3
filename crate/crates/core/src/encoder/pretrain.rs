//! Hashtag-prediction pre-training for the character encoder.

use std::path::Path;

use serde::Serialize;

use super::vocab::{char_encode, CharVocab, HashtagVocab};
use super::{encode_batch, encode_tweet, encode_with_cache, encoder_backward, EncoderConfig, EncoderParams};
use crate::checkpoint::{Checkpoint, ConfigBlock};
use crate::error::{Error, Result};
use crate::features::tokenize::{tokenize, TokenKind};
use crate::layers::fc::FcParams;
use crate::layers::loss::softmax;
use crate::optim::{Adam, AdamConfig};
use crate::record::TweetRecord;
use crate::tensor::{dot, Matrix, SeededRng};

/// A trained encoder together with the vocabularies it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainedEncoder {
    pub config: EncoderConfig,
    pub chars: CharVocab,
    pub hashtags: HashtagVocab,
    pub params: EncoderParams,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PretrainHistory {
    /// Mean training cross-entropy per epoch.
    pub epoch_loss: Vec<f64>,
    pub examples: usize,
}

/// Output of [`pretrain_hashtag`]: the encoder plus the softmax hashtag head.
#[derive(Debug, Clone)]
pub struct PretrainRun {
    pub encoder: PretrainedEncoder,
    pub head: FcParams,
    pub history: PretrainHistory,
}

impl PretrainRun {
    pub fn predict_hashtag(&self, text: &str) -> usize {
        let e = self.encoder.encode(text);
        let logits = Matrix::column(&e)
            .transpose()
            .matmul_bt(&self.head.weight)
            .unwrap()
            .add_row_broadcast(&self.head.bias)
            .unwrap();
        let row = logits.row(0);
        (0..row.len()).fold(0, |best, i| if row[i] > row[best] { i } else { best })
    }
}

impl PretrainedEncoder {
    pub fn embed_dim(&self) -> usize {
        self.params.embed_dim()
    }

    pub fn encode(&self, text: &str) -> Vec<f64> {
        encode_tweet(&char_encode(text, &self.chars), &self.params).expect("vocabulary matches parameters")
    }

    pub fn encode_batch<S: AsRef<str> + Sync>(&self, texts: &[S]) -> Matrix {
        encode_batch(texts, &self.chars, &self.params)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut config = ConfigBlock::new("encoder");
        config.set_json("encoder", &self.config);
        config.set("chars", self.chars.serialize());
        config.set("hashtags", self.hashtags.serialize());
        let mut cp = Checkpoint::new(config);
        for (name, m) in self.params.tensors() {
            cp.push(name, m.clone());
        }
        cp
    }

    pub fn from_checkpoint(cp: &Checkpoint) -> Result<Self> {
        cp.config.expect_kind("encoder")?;
        let config: EncoderConfig = cp.config.get_json("encoder")?;
        let chars = CharVocab::parse(cp.config.get("chars")?, "checkpoint chars")?;
        let hashtags = HashtagVocab::parse(cp.config.get("hashtags")?, "checkpoint hashtags")?;
        let mut params = EncoderParams::zeros(chars.len(), config.char_dim, config.hidden, config.embed_dim);
        for (name, m) in params.tensors_mut() {
            *m = cp.take_shaped(&name, m.shape())?;
        }
        Ok(PretrainedEncoder {
            config,
            chars,
            hashtags,
            params,
        })
    }

    /// Writes the checkpoint plus `<path>.chars.txt` and `<path>.hashtags.txt`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_checkpoint().save(path)?;
        self.chars.save(sidecar(path, "chars.txt"))?;
        self.hashtags.save(sidecar(path, "hashtags.txt"))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

fn sidecar(path: &Path, suffix: &str) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    s.into()
}

/// `(text without hashtags, hashtags)` for every record that carries at
/// least one hashtag.
pub fn hashtag_corpus(records: &[TweetRecord]) -> Vec<(String, Vec<String>)> {
    records
        .iter()
        .filter_map(|r| {
            let tags: Vec<String> = match &r.hashtags {
                Some(list) => list
                    .iter()
                    .map(|t| if t.starts_with('#') { t.clone() } else { format!("#{t}") })
                    .collect(),
                None => tokenize(&r.text)
                    .into_iter()
                    .filter(|t| t.kind == TokenKind::Hashtag)
                    .map(|t| t.text)
                    .collect(),
            };
            if tags.is_empty() {
                return None;
            }
            let text: Vec<&str> = r
                .text
                .split_whitespace()
                .filter(|piece| !tokenize(piece).iter().any(|t| t.kind == TokenKind::Hashtag))
                .collect();
            Some((text.join(" "), tags))
        })
        .collect()
}

struct ExampleGrad {
    loss: f64,
    encoder: EncoderParams,
    head_w: Matrix,
    head_b: Matrix,
}

fn example_grad(seq: &[usize], class: usize, p: &EncoderParams, head: &FcParams) -> ExampleGrad {
    let (e, cache) = encode_with_cache(seq, p).expect("indices come from the vocabulary");
    let logits: Vec<f64> = (0..head.outputs())
        .map(|c| dot(head.weight.row(c), &e) + head.bias.data()[c])
        .collect();
    let probs = softmax(&Matrix::from_rows(&[logits]));
    let probs = probs.row(0);
    let loss = -probs[class].max(f64::MIN_POSITIVE).ln();
    let d_logits: Vec<f64> = probs
        .iter()
        .enumerate()
        .map(|(c, &q)| q - if c == class { 1.0 } else { 0.0 })
        .collect();
    let head_w = Matrix::from_fn(head.outputs(), e.len(), |c, j| d_logits[c] * e[j]);
    let head_b = Matrix::column(&d_logits);
    let mut d_e = vec![0.0; e.len()];
    for (c, &d) in d_logits.iter().enumerate() {
        for (o, &w) in d_e.iter_mut().zip(head.weight.row(c)) {
            *o += d * w;
        }
    }
    let encoder = encoder_backward(&d_e, &cache, p).expect("shapes match");
    ExampleGrad {
        loss,
        encoder,
        head_w,
        head_b,
    }
}

/// Trains encoder + softmax hashtag head with cross-entropy. Posts with
/// several known hashtags contribute one example per hashtag.
pub fn pretrain_hashtag(corpus: &[(String, Vec<String>)], config: &EncoderConfig) -> Result<PretrainRun> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::InsufficientCorpus("empty pre-training corpus".into()));
    }
    let chars = CharVocab::build(corpus.iter().map(|(t, _)| t.as_str()), config.min_char_count);
    let hashtags = HashtagVocab::build(
        corpus.iter().flat_map(|(_, tags)| tags.iter().map(String::as_str)),
        config.min_hashtag_count,
    );
    if hashtags.len() < 2 {
        return Err(Error::InsufficientCorpus(format!(
            "{} hashtag classes after the frequency cutoff of {}; need at least 2",
            hashtags.len(),
            config.min_hashtag_count
        )));
    }

    let rng = SeededRng::new(config.seed);
    let mut examples: Vec<(Vec<usize>, usize)> = Vec::new();
    for (text, tags) in corpus {
        let seq = char_encode(text, &chars);
        let mut classes: Vec<usize> = tags.iter().filter_map(|t| hashtags.get(t)).collect();
        classes.sort_unstable();
        classes.dedup();
        examples.extend(classes.into_iter().map(|c| (seq.clone(), c)));
    }
    if config.max_examples > 0 && examples.len() > config.max_examples {
        rng.child("pretrain.subsample").shuffle(&mut examples);
        examples.truncate(config.max_examples);
    }

    let mut params = EncoderParams::init(chars.len(), config, &rng);
    let mut head = FcParams::xavier(config.embed_dim, hashtags.len(), &mut rng.child("pretrain.head"));
    let mut adam = Adam::new(AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    });
    let mut shuffle_rng = rng.child("pretrain.shuffle");
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = PretrainHistory {
        epoch_loss: Vec::with_capacity(config.epochs),
        examples: examples.len(),
    };

    for _ in 0..config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let grads = crate::par::map(batch, |&i| example_grad(&examples[i].0, examples[i].1, &params, &head));
            let scale = 1.0 / batch.len() as f64;
            let mut g_enc = params.zeros_like();
            let mut g_head = head.zeros_like();
            for g in &grads {
                epoch_loss += g.loss;
                g_enc.accumulate(&g.encoder);
                g_head.weight.add_assign(&g.head_w)?;
                g_head.bias.add_assign(&g.head_b)?;
            }
            let mut g_tensors: Vec<Matrix> = g_enc.tensors().into_iter().map(|(_, m)| m.scale(scale)).collect();
            g_tensors.push(g_head.weight.scale(scale));
            g_tensors.push(g_head.bias.scale(scale));
            let mut p_tensors: Vec<&mut Matrix> = params.tensors_mut().into_iter().map(|(_, m)| m).collect();
            p_tensors.push(&mut head.weight);
            p_tensors.push(&mut head.bias);
            adam.update(p_tensors, g_tensors.iter().collect());
        }
        let mean = epoch_loss / examples.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Training("pre-training loss diverged".into()));
        }
        log::info!("pretrain epoch {}: loss {mean:.4}", history.epoch_loss.len() + 1);
        history.epoch_loss.push(mean);
    }

    Ok(PretrainRun {
        encoder: PretrainedEncoder {
            config: *config,
            chars,
            hashtags,
            params,
        },
        head,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hashtag is determined by which marker character the text contains.
    fn marker_corpus(n: usize, seed: u64) -> Vec<(String, Vec<String>)> {
        let mut rng = SeededRng::new(seed);
        let filler = [
            "hello there",
            "what a day",
            "see you soon",
            "ok then",
            "nice one",
            "so it goes",
        ];
        (0..n)
            .map(|i| {
                let (marker, tag) = if i % 2 == 0 { ('x', "#ex") } else { ('q', "#queue") };
                let base = rng.choose(&filler);
                let pos = rng.below(base.len() + 1);
                let text = format!("{}{}{}", &base[..pos], marker, &base[pos..]);
                (text, vec![tag.to_string()])
            })
            .collect()
    }

    fn small_config() -> EncoderConfig {
        EncoderConfig {
            char_dim: 8,
            hidden: 32,
            embed_dim: 32,
            min_hashtag_count: 1,
            min_char_count: 1,
            epochs: 50,
            batch_size: 8,
            learning_rate: 5e-3,
            ..EncoderConfig::default()
        }
    }

    #[test]
    fn insufficient_classes() {
        let corpus = vec![("a".to_string(), vec!["#one".to_string()])];
        assert!(matches!(
            pretrain_hashtag(&corpus, &small_config()),
            Err(Error::InsufficientCorpus(_))
        ));
        assert!(matches!(
            pretrain_hashtag(&[], &small_config()),
            Err(Error::InsufficientCorpus(_))
        ));
    }

    #[test]
    fn learns_marker_hashtags() {
        let train = marker_corpus(64, 1);
        let test = marker_corpus(40, 2);
        let run = pretrain_hashtag(&train, &small_config()).unwrap();
        let correct = test
            .iter()
            .filter(|(text, tags)| run.encoder.hashtags.tag(run.predict_hashtag(text)) == Some(tags[0].as_str()))
            .count();
        let acc = correct as f64 / test.len() as f64;
        assert!(acc >= 0.95, "held-out accuracy {acc}, losses {:?}", run.history.epoch_loss);
    }

    #[test]
    fn loss_does_not_climb_on_small_corpus() {
        let corpus = marker_corpus(16, 3);
        // One full batch per epoch at a moderate step size.
        let config = EncoderConfig {
            epochs: 30,
            batch_size: 16,
            learning_rate: 1e-3,
            ..small_config()
        };
        let run = pretrain_hashtag(&corpus, &config).unwrap();
        for w in run.history.epoch_loss.windows(2) {
            assert!(w[1] <= w[0] * 1.05, "{:?}", run.history.epoch_loss);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let corpus = marker_corpus(16, 4);
        let config = EncoderConfig {
            epochs: 3,
            ..small_config()
        };
        let a = pretrain_hashtag(&corpus, &config).unwrap();
        let b = pretrain_hashtag(&corpus, &config).unwrap();
        for ((_, x), (_, y)) in a.encoder.params.tensors().into_iter().zip(b.encoder.params.tensors()) {
            assert!(x.bitwise_eq(y));
        }
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn corpus_strips_hashtags() {
        let mut r = TweetRecord::from_text("1", "Big sale #deal today #Shop!");
        let corpus = hashtag_corpus(std::slice::from_ref(&r));
        assert_eq!(
            corpus,
            vec![("Big sale today".to_string(), vec!["#deal".to_string(), "#Shop".to_string()])]
        );
        r.text = "no tags".into();
        assert!(hashtag_corpus(&[r]).is_empty());
    }
}
