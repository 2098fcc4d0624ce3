//! Character-level bidirectional GRU tweet encoder.
//!
//! A forward GRU reads the character embeddings left to right and a second
//! GRU reads them right to left, both from a zero state. The embedding is
//! `W_f·h_fwd + W_b·h_bwd + b_c`, passed on without normalisation.

mod pretrain;
pub mod vocab;

pub use pretrain::{hashtag_corpus, pretrain_hashtag, PretrainHistory, PretrainedEncoder};
pub use vocab::{char_encode, CharVocab, HashtagVocab, MAX_CHARS, PAD, UNK};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::gru::{gru_sequence_backward, gru_sequence_forward, GruCache, GruParams};
use crate::tensor::{dot, xavier_init, Matrix, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    /// Character embedding width.
    pub char_dim: usize,
    pub hidden: usize,
    /// Output embedding width.
    pub embed_dim: usize,
    pub min_char_count: usize,
    pub min_hashtag_count: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Cap on pre-training examples per epoch; 0 means no cap.
    pub max_examples: usize,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            char_dim: 16,
            hidden: 32,
            embed_dim: 32,
            min_char_count: 2,
            min_hashtag_count: 5,
            epochs: 8,
            batch_size: 32,
            learning_rate: 5e-3,
            max_examples: 0,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    /// 500-dimensional embedding with 150-wide characters.
    pub fn full_scale() -> Self {
        EncoderConfig {
            embed_dim: 500,
            hidden: 500,
            char_dim: 150,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.char_dim == 0 || self.hidden == 0 || self.embed_dim == 0 {
            return Err(Error::Config("encoder widths must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("encoder batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("encoder learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub embedding: Matrix,
    pub forward: GruParams,
    pub backward: GruParams,
    pub w_f: Matrix,
    pub w_b: Matrix,
    pub b_c: Matrix,
}

impl EncoderParams {
    pub fn zeros(vocab: usize, char_dim: usize, hidden: usize, embed_dim: usize) -> Self {
        EncoderParams {
            embedding: Matrix::zeros(vocab, char_dim),
            forward: GruParams::zeros(char_dim, hidden),
            backward: GruParams::zeros(char_dim, hidden),
            w_f: Matrix::zeros(embed_dim, hidden),
            w_b: Matrix::zeros(embed_dim, hidden),
            b_c: Matrix::zeros(embed_dim, 1),
        }
    }

    pub fn init(vocab: usize, config: &EncoderConfig, rng: &SeededRng) -> Self {
        let (e, h, d) = (config.char_dim, config.hidden, config.embed_dim);
        let mut p = Self::zeros(vocab, e, h, d);
        p.embedding = Matrix::from_fn(vocab, e, {
            let mut r = rng.child("encoder.embedding");
            move |_, _| r.uniform(-0.1, 0.1)
        });
        p.forward = GruParams::xavier(e, h, &mut rng.child("encoder.gru_fwd"));
        p.backward = GruParams::xavier(e, h, &mut rng.child("encoder.gru_bwd"));
        p.w_f = xavier_init(d, h, &mut rng.child("encoder.w_f"));
        p.w_b = xavier_init(d, h, &mut rng.child("encoder.w_b"));
        p
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows()
    }

    pub fn embed_dim(&self) -> usize {
        self.b_c.rows()
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden_size()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.vocab_size(), self.embedding.cols(), self.hidden(), self.embed_dim())
    }

    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = vec![("encoder.embedding".to_string(), &self.embedding)];
        for (n, m) in self.forward.tensors() {
            out.push((format!("encoder.fwd.{n}"), m));
        }
        for (n, m) in self.backward.tensors() {
            out.push((format!("encoder.bwd.{n}"), m));
        }
        out.push(("encoder.w_f".into(), &self.w_f));
        out.push(("encoder.w_b".into(), &self.w_b));
        out.push(("encoder.b_c".into(), &self.b_c));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out = vec![("encoder.embedding".to_string(), &mut self.embedding)];
        for (n, m) in self.forward.tensors_mut() {
            out.push((format!("encoder.fwd.{n}"), m));
        }
        for (n, m) in self.backward.tensors_mut() {
            out.push((format!("encoder.bwd.{n}"), m));
        }
        out.push(("encoder.w_f".into(), &mut self.w_f));
        out.push(("encoder.w_b".into(), &mut self.w_b));
        out.push(("encoder.b_c".into(), &mut self.b_c));
        out
    }

    /// Accumulates `other` into `self` entrywise.
    pub fn accumulate(&mut self, other: &EncoderParams) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b).expect("gradient shapes match parameters");
        }
    }
}

pub struct EncoderCache {
    seq: Vec<usize>,
    h_fwd: Vec<f64>,
    h_bwd: Vec<f64>,
    fwd: Vec<GruCache>,
    bwd: Vec<GruCache>,
}

fn check_indices(seq: &[usize], p: &EncoderParams) -> Result<()> {
    match seq.iter().find(|&&i| i >= p.vocab_size()) {
        Some(&index) => Err(Error::IndexOutOfRange {
            index,
            size: p.vocab_size(),
        }),
        None => Ok(()),
    }
}

/// Final states of the forward GRU over `seq` and of the backward GRU over
/// `seq` reversed.
pub fn final_states(seq: &[usize], p: &EncoderParams) -> Result<(Vec<f64>, Vec<f64>)> {
    check_indices(seq, p)?;
    let h0 = vec![0.0; p.hidden()];
    let (h_fwd, _) = gru_sequence_forward(seq.iter().map(|&i| p.embedding.row(i)), &h0, &p.forward)?;
    let (h_bwd, _) = gru_sequence_forward(seq.iter().rev().map(|&i| p.embedding.row(i)), &h0, &p.backward)?;
    Ok((h_fwd, h_bwd))
}

fn combine(h_fwd: &[f64], h_bwd: &[f64], p: &EncoderParams) -> Vec<f64> {
    (0..p.embed_dim())
        .map(|i| dot(p.w_f.row(i), h_fwd) + dot(p.w_b.row(i), h_bwd) + p.b_c.data()[i])
        .collect()
}

pub fn encode_tweet(seq: &[usize], p: &EncoderParams) -> Result<Vec<f64>> {
    let (h_fwd, h_bwd) = final_states(seq, p)?;
    Ok(combine(&h_fwd, &h_bwd, p))
}

/// Forward pass keeping everything needed for [`encoder_backward`].
pub fn encode_with_cache(seq: &[usize], p: &EncoderParams) -> Result<(Vec<f64>, EncoderCache)> {
    check_indices(seq, p)?;
    let h0 = vec![0.0; p.hidden()];
    let (h_fwd, fwd) = gru_sequence_forward(seq.iter().map(|&i| p.embedding.row(i)), &h0, &p.forward)?;
    let (h_bwd, bwd) = gru_sequence_forward(seq.iter().rev().map(|&i| p.embedding.row(i)), &h0, &p.backward)?;
    let out = combine(&h_fwd, &h_bwd, p);
    Ok((
        out,
        EncoderCache {
            seq: seq.to_vec(),
            h_fwd,
            h_bwd,
            fwd,
            bwd,
        },
    ))
}

/// Gradients of all encoder parameters given the gradient on the embedding.
pub fn encoder_backward(d_out: &[f64], cache: &EncoderCache, p: &EncoderParams) -> Result<EncoderParams> {
    if d_out.len() != p.embed_dim() {
        return Err(Error::shape("encoder_backward", (d_out.len(), 1), (p.embed_dim(), 1)));
    }
    let mut g = p.zeros_like();
    let h = p.hidden();
    let mut dh_fwd = vec![0.0; h];
    let mut dh_bwd = vec![0.0; h];
    for (i, &d) in d_out.iter().enumerate() {
        for j in 0..h {
            g.w_f.data_mut()[i * h + j] += d * cache.h_fwd[j];
            g.w_b.data_mut()[i * h + j] += d * cache.h_bwd[j];
            dh_fwd[j] += d * p.w_f.get(i, j);
            dh_bwd[j] += d * p.w_b.get(i, j);
        }
    }
    g.b_c.data_mut().copy_from_slice(d_out);

    let (g_fwd, dx_fwd, _) = gru_sequence_backward(&dh_fwd, &cache.fwd, &p.forward)?;
    let (g_bwd, dx_bwd, _) = gru_sequence_backward(&dh_bwd, &cache.bwd, &p.backward)?;
    g.forward = g_fwd;
    g.backward = g_bwd;
    let e = p.embedding.cols();
    let n = cache.seq.len();
    for (t, &c) in cache.seq.iter().enumerate() {
        let row = &mut g.embedding.data_mut()[c * e..(c + 1) * e];
        // The backward GRU saw position t at step n-1-t.
        for ((r, a), b) in row.iter_mut().zip(&dx_fwd[t]).zip(&dx_bwd[n - 1 - t]) {
            *r += a + b;
        }
    }
    Ok(g)
}

/// Encodes every text; row `i` equals `encode_tweet(char_encode(texts[i]))`.
pub fn encode_batch<S: AsRef<str> + Sync>(texts: &[S], vocab: &CharVocab, p: &EncoderParams) -> Matrix {
    let rows = crate::par::map(texts, |t| {
        encode_tweet(&char_encode(t.as_ref(), vocab), p).expect("char_encode only yields in-vocabulary indices")
    });
    if rows.is_empty() {
        return Matrix::zeros(0, p.embed_dim());
    }
    Matrix::from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::gradcheck::grad_check;
    use crate::tensor::sigmoid;

    fn random_params(vocab: usize, e: usize, h: usize, d: usize, seed: u64) -> EncoderParams {
        let config = EncoderConfig {
            char_dim: e,
            hidden: h,
            embed_dim: d,
            ..EncoderConfig::default()
        };
        let rng = SeededRng::new(seed);
        let mut p = EncoderParams::init(vocab, &config, &rng);
        let mut r = rng.child("test.bias");
        p.embedding.data_mut().iter_mut().for_each(|v| *v = r.uniform(-1.0, 1.0));
        for gru in [&mut p.forward, &mut p.backward] {
            for (name, m) in gru.tensors_mut() {
                if name.starts_with('b') {
                    m.data_mut().iter_mut().for_each(|v| *v = r.uniform(-0.3, 0.3));
                }
            }
        }
        p.b_c.data_mut().iter_mut().for_each(|v| *v = r.uniform(-0.3, 0.3));
        p
    }

    #[test]
    fn zero_params_give_zero_embedding() {
        let p = EncoderParams::zeros(10, 3, 4, 5);
        assert_eq!(encode_tweet(&[2, 3, 9, 1], &p).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn empty_sequence_gives_bias() {
        let p = random_params(6, 3, 4, 5, 1);
        let out = encode_tweet(&[], &p).unwrap();
        assert_eq!(out, p.b_c.data().to_vec());
        assert_eq!(out.len(), 5);
    }

    #[test]
    fn out_of_range_index() {
        let p = EncoderParams::zeros(4, 2, 2, 2);
        assert!(matches!(
            encode_tweet(&[0, 4], &p),
            Err(Error::IndexOutOfRange { index: 4, size: 4 })
        ));
    }

    /// Straight-line GRU step written from the update equations, sharing no
    /// code with the layer implementation.
    fn reference_gru(xs: &[Vec<f64>], p: &GruParams) -> Vec<f64> {
        let h_size = p.hidden_size();
        let mut h = vec![0.0; h_size];
        for x in xs {
            let lin = |w: &Matrix, u: &Matrix, b: &Matrix, hv: &[f64], i: usize| {
                let mut s = b.get(i, 0);
                for (k, xv) in x.iter().enumerate() {
                    s += w.get(i, k) * xv;
                }
                for (k, hk) in hv.iter().enumerate() {
                    s += u.get(i, k) * hk;
                }
                s
            };
            let z: Vec<f64> = (0..h_size).map(|i| sigmoid(lin(&p.w_z, &p.u_z, &p.b_z, &h, i))).collect();
            let r: Vec<f64> = (0..h_size).map(|i| sigmoid(lin(&p.w_r, &p.u_r, &p.b_r, &h, i))).collect();
            let rh: Vec<f64> = (0..h_size).map(|i| r[i] * h[i]).collect();
            let cand: Vec<f64> = (0..h_size).map(|i| lin(&p.w_h, &p.u_h, &p.b_h, &rh, i).tanh()).collect();
            h = (0..h_size).map(|i| (1.0 - z[i]) * h[i] + z[i] * cand[i]).collect();
        }
        h
    }

    #[test]
    fn matches_reference_forward() {
        let p = random_params(12, 3, 4, 5, 2);
        let seq = [2usize, 5, 11, 1, 7, 7, 3, 9];
        let xs: Vec<Vec<f64>> = seq.iter().map(|&i| p.embedding.row(i).to_vec()).collect();
        let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
        let (hf, hb) = (reference_gru(&xs, &p.forward), reference_gru(&rev, &p.backward));
        let expect: Vec<f64> = (0..5)
            .map(|i| {
                let mut s = p.b_c.get(i, 0);
                for j in 0..4 {
                    s += p.w_f.get(i, j) * hf[j] + p.w_b.get(i, j) * hb[j];
                }
                s
            })
            .collect();
        let got = encode_tweet(&seq, &p).unwrap();
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn reversal_symmetry() {
        let p = random_params(12, 3, 4, 5, 3);
        let seq = [2usize, 5, 11, 1, 7];
        let (_, h_bwd) = final_states(&seq, &p).unwrap();
        let reversed: Vec<&[f64]> = seq.iter().rev().map(|&i| p.embedding.row(i)).collect();
        let (direct, _) = gru_sequence_forward(reversed, &[0.0; 4], &p.backward).unwrap();
        assert!(h_bwd.iter().zip(&direct).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    fn flatten(p: &EncoderParams) -> Vec<f64> {
        p.tensors().iter().flat_map(|(_, m)| m.data().to_vec()).collect()
    }

    fn unflatten(like: &EncoderParams, v: &[f64]) -> EncoderParams {
        let mut p = like.clone();
        let mut at = 0;
        for (_, m) in p.tensors_mut() {
            let n = m.len();
            m.data_mut().copy_from_slice(&v[at..at + n]);
            at += n;
        }
        p
    }

    #[test]
    fn full_gradient_matches_central_differences() {
        let p = random_params(8, 3, 4, 5, 4);
        let seq = [2usize, 3, 7, 3, 1, 6];
        let mut r = SeededRng::new(99);
        let proj: Vec<f64> = (0..5).map(|_| r.uniform(-1.5, 1.5)).collect();
        let (_, cache) = encode_with_cache(&seq, &p).unwrap();
        let g = encoder_backward(&proj, &cache, &p).unwrap();
        let err = grad_check(
            |v| dot(&encode_tweet(&seq, &unflatten(&p, v)).unwrap(), &proj),
            &flatten(&p),
            &flatten(&g),
            1e-5,
        );
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn batch_matches_single_calls() {
        let vocab = CharVocab::from_chars("abcdefghijklmnopqrstuvwxyz #@".chars());
        let p = random_params(vocab.len(), 3, 4, 5, 5);
        let texts: Vec<String> = (0..64).map(|i| format!("tweet number {i} #tag{}", i % 7)).collect();
        let batch = encode_batch(&texts, &vocab, &p);
        for (i, t) in texts.iter().enumerate() {
            let single = encode_tweet(&char_encode(t, &vocab), &p).unwrap();
            assert!(batch.row(i).iter().zip(&single).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
        let one = encode_batch(&texts[3..4], &vocab, &p);
        assert!(one.row(0).iter().zip(batch.row(3)).all(|(a, b)| a.to_bits() == b.to_bits()));
        let mut shuffled = texts.clone();
        shuffled.reverse();
        let rev = encode_batch(&shuffled, &vocab, &p);
        assert!(rev.row(0).iter().zip(batch.row(63)).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
