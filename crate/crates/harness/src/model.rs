//! A small decoder-only transformer with hand-written backprop.
//!
//! Pre-norm blocks with RMSNorm, grouped-query causal attention and a SwiGLU
//! feed-forward, learned positions and an untied output head. Weights are
//! stored input-major so a linear layer is `Y = X·W`.

use amo_core::{Matrix, OperatorType};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

const NORM_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyModelConfig {
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub kv_heads: usize,
    pub ffn: usize,
    pub vocab: usize,
    pub seq_len: usize,
    pub seed: u64,
}

impl Default for ToyModelConfig {
    fn default() -> Self {
        Self { layers: 4, hidden: 64, heads: 4, kv_heads: 2, ffn: 128, vocab: 64, seq_len: 64, seed: 42 }
    }
}

impl ToyModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.layers, self.hidden, self.heads, self.kv_heads, self.ffn, self.vocab, self.seq_len];
        if positive.contains(&0) {
            return Err(HarnessError::Config("model dimensions must be positive".into()));
        }
        if self.hidden % self.heads != 0 {
            return Err(HarnessError::Config(format!("hidden {} not divisible by heads {}", self.hidden, self.heads)));
        }
        if self.heads % self.kv_heads != 0 {
            return Err(HarnessError::Config(format!("heads {} not divisible by kv_heads {}", self.heads, self.kv_heads)));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    pub fn kv_dim(&self) -> usize {
        self.kv_heads * self.head_dim()
    }

    /// `(rows, cols)` of the block matrix playing `op`.
    pub fn shape_of(&self, op: OperatorType) -> (usize, usize) {
        let (d, kv, f) = (self.hidden, self.kv_dim(), self.ffn);
        match op {
            OperatorType::AttnQ | OperatorType::AttnO => (d, d),
            OperatorType::AttnK | OperatorType::AttnV => (d, kv),
            OperatorType::MlpGate | OperatorType::MlpUp => (d, f),
            OperatorType::MlpDown => (f, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub attn_norm: Vec<f64>,
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
    pub o: Matrix,
    pub mlp_norm: Vec<f64>,
    pub gate: Matrix,
    pub up: Matrix,
    pub down: Matrix,
}

impl Block {
    pub fn matrix(&self, op: OperatorType) -> &Matrix {
        match op {
            OperatorType::AttnQ => &self.q,
            OperatorType::AttnK => &self.k,
            OperatorType::AttnV => &self.v,
            OperatorType::AttnO => &self.o,
            OperatorType::MlpGate => &self.gate,
            OperatorType::MlpUp => &self.up,
            OperatorType::MlpDown => &self.down,
        }
    }

    pub fn matrix_mut(&mut self, op: OperatorType) -> &mut Matrix {
        match op {
            OperatorType::AttnQ => &mut self.q,
            OperatorType::AttnK => &mut self.k,
            OperatorType::AttnV => &mut self.v,
            OperatorType::AttnO => &mut self.o,
            OperatorType::MlpGate => &mut self.gate,
            OperatorType::MlpUp => &mut self.up,
            OperatorType::MlpDown => &mut self.down,
        }
    }
}

/// Which optimizer family owns a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamKey {
    TokenEmbedding,
    PositionEmbedding,
    AttnNorm(usize),
    MlpNorm(usize),
    FinalNorm,
    Head,
    /// Block-internal 2-D weight: Muon-managed.
    Block(usize, OperatorType),
}

impl ParamKey {
    pub fn is_block_matrix(self) -> bool {
        matches!(self, ParamKey::Block(..))
    }
}

/// Weights, also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub config: ToyModelConfig,
    pub token_embedding: Matrix,
    pub position_embedding: Matrix,
    pub blocks: Vec<Block>,
    pub final_norm: Vec<f64>,
    pub head: Matrix,
}

fn normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| std * rng.sample::<f64, _>(StandardNormal))
}

impl ToyModel {
    pub fn new(config: ToyModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.hidden;
        let residual_scale = 1.0 / (2.0 * config.layers as f64).sqrt();
        let token_embedding = normal(&mut rng, config.vocab, d, 0.5);
        let position_embedding = normal(&mut rng, config.seq_len, d, 0.1);
        let blocks = (0..config.layers)
            .map(|_| {
                let mut linear = |op: OperatorType, gain: f64| {
                    let (r, c) = config.shape_of(op);
                    normal(&mut rng, r, c, gain / (r as f64).sqrt())
                };
                Block {
                    attn_norm: vec![1.0; d],
                    q: linear(OperatorType::AttnQ, 1.0),
                    k: linear(OperatorType::AttnK, 1.0),
                    v: linear(OperatorType::AttnV, 1.0),
                    o: linear(OperatorType::AttnO, residual_scale),
                    mlp_norm: vec![1.0; d],
                    gate: linear(OperatorType::MlpGate, 1.0),
                    up: linear(OperatorType::MlpUp, 1.0),
                    down: linear(OperatorType::MlpDown, residual_scale),
                }
            })
            .collect();
        let head = normal(&mut rng, d, config.vocab, 1.0 / (d as f64).sqrt());
        Ok(Self { config, token_embedding, position_embedding, blocks, final_norm: vec![1.0; d], head })
    }

    /// Same structure, every entry zero.
    pub fn zeros_like(&self) -> Self {
        let z = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        Self {
            config: self.config.clone(),
            token_embedding: z(&self.token_embedding),
            position_embedding: z(&self.position_embedding),
            blocks: self
                .blocks
                .iter()
                .map(|b| Block {
                    attn_norm: vec![0.0; b.attn_norm.len()],
                    q: z(&b.q),
                    k: z(&b.k),
                    v: z(&b.v),
                    o: z(&b.o),
                    mlp_norm: vec![0.0; b.mlp_norm.len()],
                    gate: z(&b.gate),
                    up: z(&b.up),
                    down: z(&b.down),
                })
                .collect(),
            final_norm: vec![0.0; self.final_norm.len()],
            head: z(&self.head),
        }
    }

    /// Every parameter in a fixed order.
    pub fn params(&self) -> Vec<(ParamKey, &[f64])> {
        let mut out: Vec<(ParamKey, &[f64])> = vec![
            (ParamKey::TokenEmbedding, self.token_embedding.as_slice()),
            (ParamKey::PositionEmbedding, self.position_embedding.as_slice()),
        ];
        for (l, b) in self.blocks.iter().enumerate() {
            out.push((ParamKey::AttnNorm(l), &b.attn_norm));
            out.push((ParamKey::MlpNorm(l), &b.mlp_norm));
            for op in OperatorType::ALL {
                out.push((ParamKey::Block(l, op), b.matrix(op).as_slice()));
            }
        }
        out.push((ParamKey::FinalNorm, &self.final_norm));
        out.push((ParamKey::Head, self.head.as_slice()));
        out
    }

    /// Mutable view in the same order as [`ToyModel::params`].
    pub fn params_mut(&mut self) -> Vec<(ParamKey, &mut [f64])> {
        let mut out: Vec<(ParamKey, &mut [f64])> = vec![
            (ParamKey::TokenEmbedding, self.token_embedding.as_mut_slice()),
            (ParamKey::PositionEmbedding, self.position_embedding.as_mut_slice()),
        ];
        for (l, b) in self.blocks.iter_mut().enumerate() {
            out.push((ParamKey::AttnNorm(l), &mut b.attn_norm));
            out.push((ParamKey::MlpNorm(l), &mut b.mlp_norm));
            out.push((ParamKey::Block(l, OperatorType::AttnQ), b.q.as_mut_slice()));
            out.push((ParamKey::Block(l, OperatorType::AttnK), b.k.as_mut_slice()));
            out.push((ParamKey::Block(l, OperatorType::AttnV), b.v.as_mut_slice()));
            out.push((ParamKey::Block(l, OperatorType::AttnO), b.o.as_mut_slice()));
            out.push((ParamKey::Block(l, OperatorType::MlpGate), b.gate.as_mut_slice()));
            out.push((ParamKey::Block(l, OperatorType::MlpUp), b.up.as_mut_slice()));
            out.push((ParamKey::Block(l, OperatorType::MlpDown), b.down.as_mut_slice()));
        }
        out.push((ParamKey::FinalNorm, &mut self.final_norm));
        out.push((ParamKey::Head, self.head.as_mut_slice()));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|(_, p)| p.len()).sum()
    }

    pub fn global_norm(&self) -> f64 {
        self.params().iter().flat_map(|(_, p)| p.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale_all(&mut self, s: f64) {
        for (_, p) in self.params_mut() {
            p.iter_mut().for_each(|x| *x *= s);
        }
    }

    /// Mean next-token cross-entropy over a batch of token rows, each of
    /// length `seq_len + 1`.
    pub fn loss(&self, batch: &[Vec<usize>]) -> Result<f64> {
        Ok(self.forward(batch)?.0)
    }

    /// Loss and gradients with respect to every parameter.
    pub fn loss_and_grad(&self, batch: &[Vec<usize>]) -> Result<(f64, ToyModel)> {
        let (loss, tape) = self.forward(batch)?;
        Ok((loss, self.backward(batch, &tape)))
    }
}

struct NormCache {
    normalized: Matrix,
    inv_rms: Vec<f64>,
}

fn rms_norm(x: &Matrix, gain: &[f64]) -> (Matrix, NormCache) {
    let (n, d) = x.shape();
    let mut normalized = Matrix::zeros(n, d);
    let mut out = Matrix::zeros(n, d);
    let mut inv_rms = Vec::with_capacity(n);
    for i in 0..n {
        let row = x.row(i);
        let r = 1.0 / (row.iter().map(|v| v * v).sum::<f64>() / d as f64 + NORM_EPS).sqrt();
        inv_rms.push(r);
        for j in 0..d {
            let h = row[j] * r;
            normalized[(i, j)] = h;
            out[(i, j)] = h * gain[j];
        }
    }
    (out, NormCache { normalized, inv_rms })
}

/// Returns the input gradient and accumulates into `d_gain`.
fn rms_norm_backward(dy: &Matrix, gain: &[f64], cache: &NormCache, d_gain: &mut [f64]) -> Matrix {
    let (n, d) = dy.shape();
    let mut dx = Matrix::zeros(n, d);
    for i in 0..n {
        let h = cache.normalized.row(i);
        let g = dy.row(i);
        let mut dot = 0.0;
        for j in 0..d {
            d_gain[j] += g[j] * h[j];
            dot += g[j] * gain[j] * h[j];
        }
        let mean = dot / d as f64;
        for j in 0..d {
            dx[(i, j)] = cache.inv_rms[i] * (g[j] * gain[j] - h[j] * mean);
        }
    }
    dx
}

fn silu(z: f64) -> f64 {
    z / (1.0 + (-z).exp())
}

fn silu_grad(z: f64) -> f64 {
    let s = 1.0 / (1.0 + (-z).exp());
    s * (1.0 + z * (1.0 - s))
}

struct BlockCache {
    input: Matrix,
    attn_norm: NormCache,
    attn_in: Matrix,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    /// Softmax weights, `[batch][head][query][key]` flattened.
    probs: Vec<f64>,
    attn_out: Matrix,
    mlp_norm: NormCache,
    mlp_in: Matrix,
    gate_pre: Matrix,
    up: Matrix,
    act: Matrix,
}

struct Tape {
    blocks: Vec<BlockCache>,
    final_in: Matrix,
    final_norm: NormCache,
    final_out: Matrix,
    probs: Matrix,
}

impl ToyModel {
    fn check_batch(&self, batch: &[Vec<usize>]) -> Result<()> {
        if batch.is_empty() {
            return Err(HarnessError::Config("empty batch".into()));
        }
        for row in batch {
            if row.len() != self.config.seq_len + 1 {
                return Err(HarnessError::Config(format!(
                    "sequence of {} tokens, expected {}",
                    row.len(),
                    self.config.seq_len + 1
                )));
            }
            if let Some(t) = row.iter().find(|&&t| t >= self.config.vocab) {
                return Err(HarnessError::Config(format!("token {t} outside vocab {}", self.config.vocab)));
            }
        }
        Ok(())
    }

    fn forward(&self, batch: &[Vec<usize>]) -> Result<(f64, Tape)> {
        self.check_batch(batch)?;
        let c = &self.config;
        let (s, d) = (c.seq_len, c.hidden);
        let n = batch.len() * s;

        let mut x = Matrix::zeros(n, d);
        for (b, row) in batch.iter().enumerate() {
            for t in 0..s {
                let tok = self.token_embedding.row(row[t]);
                let pos = self.position_embedding.row(t);
                for j in 0..d {
                    x[(b * s + t, j)] = tok[j] + pos[j];
                }
            }
        }

        let mut caches = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (attn_in, attn_norm) = rms_norm(&x, &block.attn_norm);
            let q = attn_in.matmul(&block.q)?;
            let k = attn_in.matmul(&block.k)?;
            let v = attn_in.matmul(&block.v)?;
            let (attn_out, probs) = self.attention(batch.len(), &q, &k, &v);
            let mut mid = attn_out.matmul(&block.o)?;
            mid.axpy(1.0, &x)?;

            let (mlp_in, mlp_norm) = rms_norm(&mid, &block.mlp_norm);
            let gate_pre = mlp_in.matmul(&block.gate)?;
            let up = mlp_in.matmul(&block.up)?;
            let mut act = Matrix::zeros(n, c.ffn);
            for ((a, &g), &u) in act.as_mut_slice().iter_mut().zip(gate_pre.as_slice()).zip(up.as_slice()) {
                *a = silu(g) * u;
            }
            let mut out = act.matmul(&block.down)?;
            out.axpy(1.0, &mid)?;

            caches.push(BlockCache {
                input: x,
                attn_norm,
                attn_in,
                q,
                k,
                v,
                probs,
                attn_out,
                mlp_norm,
                mlp_in,
                gate_pre,
                up,
                act,
            });
            x = out;
        }

        let (final_out, final_norm) = rms_norm(&x, &self.final_norm);
        let logits = final_out.matmul(&self.head)?;
        let mut probs = Matrix::zeros(n, c.vocab);
        let mut loss = 0.0;
        for (b, row) in batch.iter().enumerate() {
            for t in 0..s {
                let i = b * s + t;
                let z = logits.row(i);
                let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
                for (j, &zj) in z.iter().enumerate() {
                    probs[(i, j)] = (zj - max).exp() / sum;
                }
                loss += sum.ln() + max - z[row[t + 1]];
            }
        }
        if !loss.is_finite() {
            return Err(HarnessError::Diverged);
        }
        Ok((loss / n as f64, Tape { blocks: caches, final_in: x, final_norm, final_out, probs }))
    }

    fn attention(&self, batch: usize, q: &Matrix, k: &Matrix, v: &Matrix) -> (Matrix, Vec<f64>) {
        let c = &self.config;
        let (s, hd) = (c.seq_len, c.head_dim());
        let group = c.heads / c.kv_heads;
        let scale = 1.0 / (hd as f64).sqrt();
        let mut out = Matrix::zeros(batch * s, c.hidden);
        let mut probs = vec![0.0; batch * c.heads * s * s];
        let mut scores = vec![0.0; s];
        for b in 0..batch {
            for h in 0..c.heads {
                let (qo, ko) = (h * hd, (h / group) * hd);
                for i in 0..s {
                    let qi = &q.row(b * s + i)[qo..qo + hd];
                    let mut max = f64::NEG_INFINITY;
                    for (j, sc) in scores.iter_mut().enumerate().take(i + 1) {
                        let kj = &k.row(b * s + j)[ko..ko + hd];
                        *sc = scale * qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>();
                        max = max.max(*sc);
                    }
                    let base = ((b * c.heads + h) * s + i) * s;
                    let mut sum = 0.0;
                    for j in 0..=i {
                        let e = (scores[j] - max).exp();
                        probs[base + j] = e;
                        sum += e;
                    }
                    for j in 0..=i {
                        probs[base + j] /= sum;
                        let p = probs[base + j];
                        let vj = &v.row(b * s + j)[ko..ko + hd];
                        for (t, &vv) in vj.iter().enumerate() {
                            out[(b * s + i, qo + t)] += p * vv;
                        }
                    }
                }
            }
        }
        (out, probs)
    }

    fn attention_backward(&self, batch: usize, cache: &BlockCache, d_out: &Matrix) -> (Matrix, Matrix, Matrix) {
        let c = &self.config;
        let (s, hd) = (c.seq_len, c.head_dim());
        let group = c.heads / c.kv_heads;
        let scale = 1.0 / (hd as f64).sqrt();
        let mut dq = Matrix::zeros(batch * s, c.hidden);
        let mut dk = Matrix::zeros(batch * s, c.kv_dim());
        let mut dv = Matrix::zeros(batch * s, c.kv_dim());
        let mut dp = vec![0.0; s];
        for b in 0..batch {
            for h in 0..c.heads {
                let (qo, ko) = (h * hd, (h / group) * hd);
                for i in 0..s {
                    let base = ((b * c.heads + h) * s + i) * s;
                    let p = &cache.probs[base..base + s];
                    let go = &d_out.row(b * s + i)[qo..qo + hd];
                    let mut weighted = 0.0;
                    for j in 0..=i {
                        let vj = &cache.v.row(b * s + j)[ko..ko + hd];
                        dp[j] = go.iter().zip(vj).map(|(a, b)| a * b).sum();
                        weighted += dp[j] * p[j];
                        for t in 0..hd {
                            dv[(b * s + j, ko + t)] += p[j] * go[t];
                        }
                    }
                    for j in 0..=i {
                        let ds = p[j] * (dp[j] - weighted) * scale;
                        if ds == 0.0 {
                            continue;
                        }
                        for t in 0..hd {
                            dq[(b * s + i, qo + t)] += ds * cache.k[(b * s + j, ko + t)];
                            dk[(b * s + j, ko + t)] += ds * cache.q[(b * s + i, qo + t)];
                        }
                    }
                }
            }
        }
        (dq, dk, dv)
    }

    fn backward(&self, batch: &[Vec<usize>], tape: &Tape) -> ToyModel {
        let c = &self.config;
        let (s, d) = (c.seq_len, c.hidden);
        let n = (batch.len() * s) as f64;
        let mut grads = self.zeros_like();

        let mut d_logits = tape.probs.clone();
        for (b, row) in batch.iter().enumerate() {
            for t in 0..s {
                d_logits[(b * s + t, row[t + 1])] -= 1.0;
            }
        }
        d_logits.scale_mut(1.0 / n);
        grads.head = tape.final_out.t_matmul(&d_logits).expect("shapes agree");
        let d_final = d_logits.matmul_t(&self.head).expect("shapes agree");
        let mut dx = rms_norm_backward(&d_final, &self.final_norm, &tape.final_norm, &mut grads.final_norm);
        debug_assert_eq!(tape.final_in.shape(), dx.shape());

        for (l, (block, cache)) in self.blocks.iter().zip(&tape.blocks).enumerate().rev() {
            let g = &mut grads.blocks[l];
            // Feed-forward branch.
            g.down = cache.act.t_matmul(&dx).expect("shapes agree");
            let d_act = dx.matmul_t(&block.down).expect("shapes agree");
            let mut d_gate = Matrix::zeros(d_act.rows(), d_act.cols());
            let mut d_up = Matrix::zeros(d_act.rows(), d_act.cols());
            for (((dg, du), (&z, &u)), &da) in d_gate
                .as_mut_slice()
                .iter_mut()
                .zip(d_up.as_mut_slice())
                .zip(cache.gate_pre.as_slice().iter().zip(cache.up.as_slice()))
                .zip(d_act.as_slice())
            {
                *dg = da * u * silu_grad(z);
                *du = da * silu(z);
            }
            g.gate = cache.mlp_in.t_matmul(&d_gate).expect("shapes agree");
            g.up = cache.mlp_in.t_matmul(&d_up).expect("shapes agree");
            let mut d_mlp_in = d_gate.matmul_t(&block.gate).expect("shapes agree");
            d_mlp_in.axpy(1.0, &d_up.matmul_t(&block.up).expect("shapes agree")).expect("shapes agree");
            let mut d_mid = rms_norm_backward(&d_mlp_in, &block.mlp_norm, &cache.mlp_norm, &mut g.mlp_norm);
            d_mid.axpy(1.0, &dx).expect("shapes agree");

            // Attention branch.
            g.o = cache.attn_out.t_matmul(&d_mid).expect("shapes agree");
            let d_attn = d_mid.matmul_t(&block.o).expect("shapes agree");
            let (dq, dk, dv) = self.attention_backward(batch.len(), cache, &d_attn);
            g.q = cache.attn_in.t_matmul(&dq).expect("shapes agree");
            g.k = cache.attn_in.t_matmul(&dk).expect("shapes agree");
            g.v = cache.attn_in.t_matmul(&dv).expect("shapes agree");
            let mut d_attn_in = dq.matmul_t(&block.q).expect("shapes agree");
            d_attn_in.axpy(1.0, &dk.matmul_t(&block.k).expect("shapes agree")).expect("shapes agree");
            d_attn_in.axpy(1.0, &dv.matmul_t(&block.v).expect("shapes agree")).expect("shapes agree");
            let mut d_in = rms_norm_backward(&d_attn_in, &block.attn_norm, &cache.attn_norm, &mut g.attn_norm);
            d_in.axpy(1.0, &d_mid).expect("shapes agree");
            debug_assert_eq!(cache.input.shape(), d_in.shape());
            dx = d_in;
        }

        for (b, row) in batch.iter().enumerate() {
            for t in 0..s {
                for j in 0..d {
                    let v = dx[(b * s + t, j)];
                    grads.token_embedding[(row[t], j)] += v;
                    grads.position_embedding[(t, j)] += v;
                }
            }
        }
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ToyModelConfig {
        ToyModelConfig { layers: 2, hidden: 8, heads: 4, kv_heads: 2, ffn: 12, vocab: 11, seq_len: 5, seed: 3 }
    }

    fn batch(c: &ToyModelConfig) -> Vec<Vec<usize>> {
        (0..2).map(|b| (0..=c.seq_len).map(|t| (3 * t + 5 * b + 1) % c.vocab).collect()).collect()
    }

    #[test]
    fn every_block_exposes_seven_types() {
        let m = ToyModel::new(ToyModelConfig::default()).unwrap();
        let block_keys: Vec<_> = m.params().into_iter().filter(|(k, _)| k.is_block_matrix()).collect();
        assert_eq!(block_keys.len(), 4 * 7);
        for op in OperatorType::ALL {
            assert_eq!(m.blocks[0].matrix(op).shape(), m.config.shape_of(op));
        }
        assert_eq!(m.params().len(), m.zeros_like().params().len());
    }

    #[test]
    fn initial_loss_is_near_uniform() {
        let c = tiny();
        let m = ToyModel::new(c.clone()).unwrap();
        let loss = m.loss(&batch(&c)).unwrap();
        assert!((loss - (c.vocab as f64).ln()).abs() < 1.5, "{loss}");
    }

    #[test]
    fn rejects_bad_configs_and_batches() {
        let c = ToyModelConfig { heads: 3, ..tiny() };
        assert!(ToyModel::new(c).is_err());
        let c = ToyModelConfig { kv_heads: 3, ..tiny() };
        assert!(ToyModel::new(c).is_err());
        let m = ToyModel::new(tiny()).unwrap();
        assert!(m.loss(&[vec![0; 3]]).is_err());
        assert!(m.loss(&[vec![99; 6]]).is_err());
    }

    #[test]
    fn gradients_match_central_differences() {
        let c = tiny();
        let model = ToyModel::new(c.clone()).unwrap();
        let data = batch(&c);
        let (_, grads) = model.loss_and_grad(&data).unwrap();
        let flat: Vec<f64> = grads.params().iter().flat_map(|(_, p)| p.to_vec()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for _ in 0..20 {
            let idx = rng.random_range(0..flat.len());
            let probe = |delta: f64| {
                let mut m = model.clone();
                let mut seen = 0;
                for (_, p) in m.params_mut() {
                    if idx < seen + p.len() {
                        p[idx - seen] += delta;
                        break;
                    }
                    seen += p.len();
                }
                m.loss(&data).unwrap()
            };
            let numeric = (probe(h) - probe(-h)) / (2.0 * h);
            let analytic = flat[idx];
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
            assert!(rel <= 1e-4, "coordinate {idx}: {analytic} vs {numeric}");
        }
    }
}
